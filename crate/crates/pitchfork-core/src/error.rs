use alloc::string::String;
use core::fmt;

/// Errors produced by parsing, evaluation and the numerical routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Syntax error while parsing a problem file or expression.
    Parse { pos: usize, msg: String },
    /// An identifier that is not a declared variable, the parameter, or a
    /// known function name.
    UnknownIdentifier(String),
    /// Declared dimension does not match the number of equations/variables.
    DimensionMismatch { expected: usize, got: usize },
    /// `^` with anything other than a non-negative integer literal.
    NonIntegerExponent { pos: usize },
    /// Division by zero during plain evaluation.
    DivisionByZero,
    /// `sqrt` of a negative value during plain evaluation.
    SqrtNegative,
    /// A derivative jet was requested at a point where some subexpression is
    /// not differentiable (e.g. `sin(1/x)` at `x = 0`).
    SingularJetPoint,
    /// Invalid finite-difference step (`h <= 0`) or a stencil point failed
    /// to evaluate.
    FdStencil(String),
    /// Matrix shape violation (non-square where square is required, etc.).
    MatrixShape(String),
    /// QR eigenvalue iteration failed to converge.
    EigenNoConvergence,
    /// An eigenvalue has nonzero modulus but near-zero real part; the theory
    /// excludes imaginary-axis eigenvalues.
    NearImaginaryEigenvalue { re: f64, im: f64 },
    /// Zero eigenvalue of the Jacobian is not simple.
    ZeroEigenvalueNotSimple { count: usize },
    /// The basis assembled by `normalize` is too ill-conditioned to trust.
    IllConditionedBasis { cond: f64 },
    /// Newton iteration hit a (numerically) singular Jacobian.
    SingularJacobian,
    /// Newton iterate left the search region.
    NewtonDiverged,
    /// Newton did not converge within the iteration budget.
    MaxItersExceeded,
    /// 1D scaled Newton map failed its contraction diagnostic.
    NonContraction,
    /// Grid search would exceed the seed budget.
    BudgetExceeded { requested: usize, budget: usize },
    /// The vector field vanishes (to tolerance) on the sampling boundary.
    ZeroOnBoundary,
    /// Winding accumulation did not round cleanly to an integer.
    NonIntegerWinding { value: f64 },
    /// Boundary value too small to decide a 1D sign-change index.
    InconclusiveRadius { value: f64 },
    /// Two independent perturbation draws disagreed on the index sum.
    PerturbationDisagreement { first: i32, second: i32 },
    /// Two index oracles that must agree did not.
    IndexOracleDisagreement { a: i32, b: i32 },
    /// The analysed point is not an equilibrium to tolerance.
    NotAnEquilibrium { residual: f64 },
    /// P2 requires a kernel vector with nonzero last component; none exists.
    P2Inapplicable,
    /// Generic invalid-argument error.
    Invalid(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { pos, msg } => write!(f, "parse error at byte {pos}: {msg}"),
            Error::UnknownIdentifier(s) => write!(f, "unknown identifier `{s}`"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: declared {expected}, got {got}")
            }
            Error::NonIntegerExponent { pos } => {
                write!(f, "exponent at byte {pos} is not a non-negative integer literal")
            }
            Error::DivisionByZero => write!(f, "division by zero"),
            Error::SqrtNegative => write!(f, "sqrt of negative value"),
            Error::SingularJetPoint => write!(f, "singular jet point"),
            Error::FdStencil(s) => write!(f, "finite-difference stencil failure: {s}"),
            Error::MatrixShape(s) => write!(f, "matrix shape error: {s}"),
            Error::EigenNoConvergence => write!(f, "QR eigenvalue iteration did not converge"),
            Error::NearImaginaryEigenvalue { re, im } => {
                write!(f, "near-imaginary eigenvalue {re} + {im}i")
            }
            Error::ZeroEigenvalueNotSimple { count } => {
                write!(f, "zero eigenvalue not simple ({count} near-zero eigenvalues)")
            }
            Error::IllConditionedBasis { cond } => {
                write!(f, "normalizing basis ill-conditioned (cond ~ {cond:.3e})")
            }
            Error::SingularJacobian => write!(f, "singular Jacobian in Newton iteration"),
            Error::NewtonDiverged => write!(f, "Newton iterate left the search region"),
            Error::MaxItersExceeded => write!(f, "Newton iteration budget exceeded"),
            Error::NonContraction => write!(f, "scaled Newton map is not contracting"),
            Error::BudgetExceeded { requested, budget } => {
                write!(f, "grid of {requested} seeds exceeds budget {budget}")
            }
            Error::ZeroOnBoundary => write!(f, "vector field vanishes on the sampling boundary"),
            Error::NonIntegerWinding { value } => {
                write!(f, "winding {value} does not round to an integer; increase samples")
            }
            Error::InconclusiveRadius { value } => {
                write!(f, "boundary value {value:.3e} below tolerance; radius inconclusive")
            }
            Error::PerturbationDisagreement { first, second } => {
                write!(f, "perturbation index sums disagree: {first} vs {second}")
            }
            Error::IndexOracleDisagreement { a, b } => {
                write!(f, "index oracles disagree: {a} vs {b}")
            }
            Error::NotAnEquilibrium { residual } => {
                write!(f, "point is not an equilibrium (residual {residual:.3e})")
            }
            Error::P2Inapplicable => {
                write!(f, "no kernel vector with nonzero parameter component; P2 inapplicable")
            }
            Error::Invalid(s) => write!(f, "{s}"),
        }
    }
}

#[cfg(test)]
impl std::error::Error for Error {}
