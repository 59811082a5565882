//! Dense linear algebra for small matrices (n <= 12).
//!
//! Everything here is written for the sizes that show up in desk-scale
//! bifurcation analysis: LU determinants, cofactor adjugates (needed at
//! exactly singular Jacobians), numerical null spaces via a Jacobi
//! eigensolver on the Gram matrix, and real-Schur-style eigenvalues via
//! Hessenberg reduction plus double-shift QR. No external dependencies.

use crate::field::{jet, FieldSpec};
use crate::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub const MAX_DIM: usize = 12;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM + 1 {
            return Err(Error::MatrixShape(format!("unsupported shape {rows} x {cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::MatrixShape(format!(
                "{rows} x {cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::MatrixShape("non-finite entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Square matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.len();
        if n == 0 || cols.iter().any(|c| c.len() != cols[0].len()) {
            return Err(Error::MatrixShape("from_cols: ragged or empty input".into()));
        }
        Ok(Self::from_fn(cols[0].len(), n, |i, j| cols[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, o: &Matrix) -> Result<Matrix> {
        if self.cols != o.rows {
            return Err(Error::MatrixShape(format!(
                "matmul shape mismatch: {} x {} times {} x {}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        Ok(Matrix::from_fn(self.rows, o.cols, |i, j| {
            (0..self.cols).map(|k| self.get(i, k) * o.get(k, j)).sum()
        }))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect())
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| s * self.get(i, j))
    }

    pub fn add(&self, o: &Matrix) -> Result<Matrix> {
        if self.rows != o.rows || self.cols != o.cols {
            return Err(Error::MatrixShape("add shape mismatch".into()));
        }
        Ok(Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + o.get(i, j)))
    }

    pub fn sub(&self, o: &Matrix) -> Result<Matrix> {
        self.add(&o.scale(-1.0))
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| if v.abs() > m { v.abs() } else { m })
    }

    fn require_square(&self) -> Result<usize> {
        if self.rows != self.cols {
            return Err(Error::MatrixShape(format!(
                "square matrix required, got {} x {}",
                self.rows, self.cols
            )));
        }
        Ok(self.rows)
    }

    /// 2-norm condition number via singular values of the Gram matrix.
    pub fn cond_2(&self) -> f64 {
        let sv = self.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin == 0.0 {
            f64::INFINITY
        } else {
            smax / smin
        }
    }

    pub fn singular_values(&self) -> Vec<f64> {
        // Singular values of A are the square roots of the eigenvalues of
        // the smaller Gram matrix.
        let gram = if self.rows <= self.cols {
            self.matmul(&self.transpose()).expect("shape checked")
        } else {
            self.transpose().matmul(self).expect("shape checked")
        };
        let (evals, _) = jacobi_symmetric(&gram);
        evals.iter().map(|&l| libm::sqrt(l.max(0.0))).collect()
    }
}

/// LU factorization with partial pivoting. Returns the packed factors, the
/// pivot rows and the permutation sign; `None` pivot magnitude means exact
/// breakdown was tolerated (determinant paths want 0, solve paths error).
struct Lu {
    lu: Matrix,
    pivots: Vec<usize>,
    sign: f64,
    singular: bool,
}

fn lu_factor(m: &Matrix) -> Result<Lu> {
    let n = m.require_square()?;
    let mut a = m.clone();
    let mut pivots = Vec::with_capacity(n);
    let mut sign = 1.0;
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a.get(i, k).abs() > a.get(p, k).abs() {
                p = i;
            }
        }
        pivots.push(p);
        if p != k {
            for j in 0..n {
                let t = a.get(k, j);
                a.set(k, j, a.get(p, j));
                a.set(p, j, t);
            }
            sign = -sign;
        }
        let piv = a.get(k, k);
        if piv == 0.0 {
            singular = true;
            continue;
        }
        for i in k + 1..n {
            let f = a.get(i, k) / piv;
            a.set(i, k, f);
            for j in k + 1..n {
                a.set(i, j, a.get(i, j) - f * a.get(k, j));
            }
        }
    }
    Ok(Lu { lu: a, pivots, sign, singular })
}

/// Determinant by LU with partial pivoting.
pub fn det(m: &Matrix) -> Result<f64> {
    let n = m.require_square()?;
    let f = lu_factor(m)?;
    if f.singular {
        return Ok(0.0);
    }
    let mut d = f.sign;
    for k in 0..n {
        d *= f.lu.get(k, k);
    }
    Ok(d)
}

/// Solve `m x = b` for a single right-hand side.
pub fn solve(m: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.require_square()?;
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let f = lu_factor(m)?;
    if f.singular {
        return Err(Error::SingularJacobian);
    }
    let mut x = b.to_vec();
    // The stored multipliers describe the fully pivoted matrix, so all row
    // swaps must hit the right-hand side before forward substitution.
    for k in 0..n {
        x.swap(k, f.pivots[k]);
    }
    for k in 0..n {
        for i in k + 1..n {
            x[i] -= f.lu.get(i, k) * x[k];
        }
    }
    for k in (0..n).rev() {
        for j in k + 1..n {
            x[k] -= f.lu.get(k, j) * x[j];
        }
        x[k] /= f.lu.get(k, k);
    }
    Ok(x)
}

pub fn inverse(m: &Matrix) -> Result<Matrix> {
    let n = m.require_square()?;
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(solve(m, &e)?);
    }
    Matrix::from_cols(&cols)
}

/// Adjugate by explicit cofactors, each an (n-1) x (n-1) LU determinant.
///
/// Computed this way (rather than `det(m) * inverse(m)`) because it is
/// needed at exactly singular matrices.
pub fn adjugate(m: &Matrix) -> Result<Matrix> {
    let n = m.require_square()?;
    if n == 1 {
        return Matrix::new(1, 1, vec![1.0]);
    }
    let minor_det = |skip_r: usize, skip_c: usize| -> Result<f64> {
        let sub = Matrix::from_fn(n - 1, n - 1, |i, j| {
            let r = if i < skip_r { i } else { i + 1 };
            let c = if j < skip_c { j } else { j + 1 };
            m.get(r, c)
        });
        det(&sub)
    };
    let mut adj = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // adj(m)[i][j] is the cofactor of entry (j, i).
            let sgn = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj.set(i, j, sgn * minor_det(j, i)?);
        }
    }
    Ok(adj)
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns the
/// eigenvalues and the matrix whose columns are the eigenvectors.
fn jacobi_symmetric(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.rows;
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off <= 1e-300 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = {
                    let s = if theta >= 0.0 { 1.0 } else { -1.0 };
                    s / (theta.abs() + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let evals = (0..n).map(|i| a.get(i, i)).collect();
    (evals, v)
}

/// Orthonormal basis of the numerical right null space: singular vectors
/// whose singular value is at most `tol * (1 + sigma_max)`. The additive 1
/// keeps the cutoff meaningful for nearly-zero matrices (finite-difference
/// Jacobians whose every entry is noise), where a purely relative rule
/// would declare the noise direction significant.
pub fn kernel_right(m: &Matrix, tol: f64) -> Vec<Vec<f64>> {
    let gram = m.transpose().matmul(m).expect("shape");
    let (evals, vecs) = jacobi_symmetric(&gram);
    let smax = evals.iter().cloned().fold(0.0, f64::max).max(0.0);
    let smax = libm::sqrt(smax);
    let mut out = Vec::new();
    for (k, &l) in evals.iter().enumerate() {
        let sigma = libm::sqrt(l.max(0.0));
        if sigma <= tol * (1.0 + smax) {
            out.push(vecs.col(k));
        }
    }
    out
}

/// Orthonormal basis of the left null space (`v^T m = 0`).
pub fn kernel_left(m: &Matrix, tol: f64) -> Vec<Vec<f64>> {
    kernel_right(&m.transpose(), tol)
}

/// Orthonormal basis of the column space: singular vectors of `m m^T` with
/// singular value above `tol * (1 + sigma_max)` (the complement of the
/// kernel cutoff, so kernel and range dimensions always sum to n).
pub fn range_basis(m: &Matrix, tol: f64) -> Vec<Vec<f64>> {
    let gram = m.matmul(&m.transpose()).expect("shape");
    let (evals, vecs) = jacobi_symmetric(&gram);
    let smax = libm::sqrt(evals.iter().cloned().fold(0.0, f64::max).max(0.0));
    let mut out = Vec::new();
    for (k, &l) in evals.iter().enumerate() {
        let sigma = libm::sqrt(l.max(0.0));
        if sigma > tol * (1.0 + smax) {
            out.push(vecs.col(k));
        }
    }
    out
}

/// Real eigenvalues of a general square matrix, classified by sign.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// All n eigenvalues as (re, im) pairs, sorted by real part.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Count with modulus at most `tol_zero`.
    pub zero_count: usize,
    /// Count with real part below `-tol_zero`.
    pub stable_count: usize,
    /// Count with real part above `tol_zero`.
    pub unstable_count: usize,
}

/// All eigenvalues via Hessenberg reduction + double-shift QR, bucketed
/// into zero / stable / unstable by `tol_zero`.
///
/// An eigenvalue with modulus above `tol_zero` but real part within
/// `tol_zero` of zero cannot be bucketed and is an error: the underlying
/// theory requires the spectrum to stay off the imaginary axis except for
/// the simple zero.
pub fn eigenvalues(m: &Matrix, tol_zero: f64) -> Result<Spectrum> {
    let n = m.require_square()?;
    if n > MAX_DIM {
        return Err(Error::MatrixShape(format!("eigenvalues limited to n <= {MAX_DIM}")));
    }
    let mut h = m.clone();
    hessenberg(&mut h);
    let mut eigenvalues = hqr(&mut h)?;
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let mut zero_count = 0;
    let mut stable_count = 0;
    let mut unstable_count = 0;
    for &(re, im) in &eigenvalues {
        let modulus = libm::hypot(re, im);
        if modulus <= tol_zero {
            zero_count += 1;
        } else if re < -tol_zero {
            stable_count += 1;
        } else if re > tol_zero {
            unstable_count += 1;
        } else {
            return Err(Error::NearImaginaryEigenvalue { re, im });
        }
    }
    Ok(Spectrum { eigenvalues, zero_count, stable_count, unstable_count })
}

/// Reduce to upper Hessenberg form by stabilized elementary similarity
/// transformations (eigenvalues preserved).
fn hessenberg(a: &mut Matrix) {
    let n = a.rows;
    for m in 1..n.saturating_sub(1) {
        let mut piv = m;
        for i in m + 1..n {
            if a.get(i, m - 1).abs() > a.get(piv, m - 1).abs() {
                piv = i;
            }
        }
        if piv != m {
            for j in 0..n {
                let t = a.get(m, j);
                a.set(m, j, a.get(piv, j));
                a.set(piv, j, t);
            }
            for i in 0..n {
                let t = a.get(i, m);
                a.set(i, m, a.get(i, piv));
                a.set(i, piv, t);
            }
        }
        let x = a.get(m, m - 1);
        if x == 0.0 {
            continue;
        }
        for i in m + 1..n {
            let y = a.get(i, m - 1) / x;
            if y == 0.0 {
                continue;
            }
            for j in m - 1..n {
                a.set(i, j, a.get(i, j) - y * a.get(m, j));
            }
            for k in 0..n {
                a.set(k, m, a.get(k, m) + y * a.get(k, i));
            }
        }
    }
    // Entries below the subdiagonal are now negligible by construction.
    for i in 2..n {
        for j in 0..i - 1 {
            a.set(i, j, 0.0);
        }
    }
}

/// Double-shift QR iteration on an upper Hessenberg matrix (eigenvalues
/// only). Classic Francis algorithm with exceptional shifts.
fn hqr(a: &mut Matrix) -> Result<Vec<(f64, f64)>> {
    const EPS: f64 = f64::EPSILON;
    let n = a.rows;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a.get(i, j).abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![(0.0, 0.0); n]);
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // Look for a single small subdiagonal element.
            let mut l = 0isize;
            let mut ll = nn;
            while ll >= 1 {
                let s = a.get((ll - 1) as usize, (ll - 1) as usize).abs()
                    + a.get(ll as usize, ll as usize).abs();
                let s = if s == 0.0 { anorm } else { s };
                if a.get(ll as usize, (ll - 1) as usize).abs() <= EPS * s {
                    a.set(ll as usize, (ll - 1) as usize, 0.0);
                    l = ll;
                    break;
                }
                ll -= 1;
            }
            let mut x = a.get(nn as usize, nn as usize);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let y = a.get((nn - 1) as usize, (nn - 1) as usize);
            let mut w =
                a.get(nn as usize, (nn - 1) as usize) * a.get((nn - 1) as usize, nn as usize);
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = libm::sqrt(q.abs());
                x += t;
                if q >= 0.0 {
                    z = p + copysign(z, p);
                    wr[(nn - 1) as usize] = x + z;
                    wr[nn as usize] = if z != 0.0 { x - w / z } else { x + z };
                    wi[(nn - 1) as usize] = 0.0;
                    wi[nn as usize] = 0.0;
                } else {
                    wr[(nn - 1) as usize] = x + p;
                    wr[nn as usize] = x + p;
                    wi[(nn - 1) as usize] = -z;
                    wi[nn as usize] = z;
                }
                nn -= 2;
                break;
            }
            if its == 30 {
                return Err(Error::EigenNoConvergence);
            }
            if its == 10 || its == 20 {
                // Exceptional shift.
                t += x;
                for i in 0..=nn as usize {
                    a.set(i, i, a.get(i, i) - x);
                }
                let s = a.get(nn as usize, (nn - 1) as usize).abs()
                    + a.get((nn - 1) as usize, (nn - 2) as usize).abs();
                x = 0.75 * s;
                w = -0.4375 * s * s;
            }
            its += 1;
            let y = a.get((nn - 1) as usize, (nn - 1) as usize);
            // Form shift and look for two consecutive small subdiagonals.
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while m >= l {
                let z = a.get(m as usize, m as usize);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a.get((m + 1) as usize, m as usize)
                    + a.get(m as usize, (m + 1) as usize);
                q = a.get((m + 1) as usize, (m + 1) as usize) - z - rr - ss;
                r = a.get((m + 2) as usize, (m + 1) as usize);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a.get(m as usize, (m - 1) as usize).abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a.get((m - 1) as usize, (m - 1) as usize).abs()
                        + z.abs()
                        + a.get((m + 1) as usize, (m + 1) as usize).abs());
                if u <= EPS * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a.set(i as usize, (i - 2) as usize, 0.0);
            }
            for i in (m + 3)..=nn {
                a.set(i as usize, (i - 3) as usize, 0.0);
            }
            // Double QR step on rows l..nn, columns m..nn.
            for k in m..nn {
                if k != m {
                    p = a.get(k as usize, (k - 1) as usize);
                    q = a.get((k + 1) as usize, (k - 1) as usize);
                    r = if k != nn - 1 {
                        a.get((k + 2) as usize, (k - 1) as usize)
                    } else {
                        0.0
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = copysign(libm::sqrt(p * p + q * q + r * r), p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a.set(k as usize, (k - 1) as usize, -a.get(k as usize, (k - 1) as usize));
                    }
                } else {
                    a.set(k as usize, (k - 1) as usize, -s * x);
                }
                p += s;
                x = p / s;
                let y2 = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in (k as usize)..=(nn as usize) {
                    let mut pp = a.get(k as usize, j) + q * a.get(k as usize + 1, j);
                    if k != nn - 1 {
                        pp += r * a.get(k as usize + 2, j);
                        a.set(k as usize + 2, j, a.get(k as usize + 2, j) - pp * z);
                    }
                    a.set(k as usize + 1, j, a.get(k as usize + 1, j) - pp * y2);
                    a.set(k as usize, j, a.get(k as usize, j) - pp * x);
                }
                let mmin = if nn < k + 3 { nn } else { k + 3 };
                for i in (l as usize)..=(mmin as usize) {
                    let mut pp = x * a.get(i, k as usize) + y2 * a.get(i, k as usize + 1);
                    if k != nn - 1 {
                        pp += z * a.get(i, k as usize + 2);
                        a.set(i, k as usize + 2, a.get(i, k as usize + 2) - pp * r);
                    }
                    a.set(i, k as usize + 1, a.get(i, k as usize + 1) - pp * q);
                    a.set(i, k as usize, a.get(i, k as usize) - pp);
                }
            }
        }
    }
    Ok(wr.into_iter().zip(wi).collect())
}

fn copysign(mag: f64, sgn: f64) -> f64 {
    if sgn >= 0.0 {
        mag.abs()
    } else {
        -mag.abs()
    }
}

/// Gradient of `det(D_x V)` over all `(x, eps)` slots via Jacobi's formula:
/// the derivative of the determinant along direction `v` is
/// `tr(adj(J) * d_v J)`.
pub fn det_gradient(spec: &FieldSpec, x: &[f64], eps: f64) -> Result<Vec<f64>> {
    let j = jet(spec, x, eps, 2)?;
    det_gradient_of_jet(&j)
}

/// Same as [`det_gradient`] but reusing an already computed order-2 jet.
pub fn det_gradient_of_jet(j: &crate::Jet3) -> Result<Vec<f64>> {
    let adj = adjugate(&j.x_jacobian())?;
    let m = j.m();
    let n = j.n();
    let mut grad = Vec::with_capacity(m);
    for a in 0..m {
        let da = j.jacobian_deriv(a);
        let mut tr = 0.0;
        for i in 0..n {
            for k in 0..n {
                tr += adj.get(i, k) * da.get(k, i);
            }
        }
        grad.push(tr);
    }
    Ok(grad)
}

/// Truncated power series `a0 + a1 t + a2 t^2` (modulo `t^3`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Series2 {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Series2 {
    pub fn constant(c: f64) -> Self {
        Series2 { a0: c, a1: 0.0, a2: 0.0 }
    }

    fn add(self, o: Series2) -> Series2 {
        Series2 { a0: self.a0 + o.a0, a1: self.a1 + o.a1, a2: self.a2 + o.a2 }
    }

    fn mul(self, o: Series2) -> Series2 {
        Series2 {
            a0: self.a0 * o.a0,
            a1: self.a0 * o.a1 + self.a1 * o.a0,
            a2: self.a0 * o.a2 + self.a1 * o.a1 + self.a2 * o.a0,
        }
    }

    fn scale(self, s: f64) -> Series2 {
        Series2 { a0: s * self.a0, a1: s * self.a1, a2: s * self.a2 }
    }
}

/// Determinant of the matrix curve `t -> j0 + t j1 + t^2 j2` as a truncated
/// series in `t`, via the Faddeev-LeVerrier recursion (division-free except
/// by integers, so it stays valid when `j0` is singular).
pub fn det_series2(j0: &Matrix, j1: &Matrix, j2: &Matrix) -> Result<Series2> {
    let n = j0.require_square()?;
    if j1.rows != n || j1.cols != n || j2.rows != n || j2.cols != n {
        return Err(Error::MatrixShape("det_series2 expects three n x n matrices".into()));
    }
    let at = |i: usize, j: usize| Series2 {
        a0: j0.get(i, j),
        a1: j1.get(i, j),
        a2: j2.get(i, j),
    };
    // Faddeev-LeVerrier: M_1 = A, c_1 = -tr M_1,
    // M_k = A (M_{k-1} + c_{k-1} I), c_k = -tr(M_k)/k;
    // then det(A) = (-1)^n c_n.
    let zero = Series2::constant(0.0);
    let mut mk: Vec<Series2> = (0..n * n).map(|p| at(p / n, p % n)).collect();
    let mut trace = zero;
    for i in 0..n {
        trace = trace.add(mk[i * n + i]);
    }
    let mut ck = trace.scale(-1.0);
    for k in 2..=n {
        // B = M_{k-1} + c_{k-1} I
        let mut b = mk.clone();
        for i in 0..n {
            b[i * n + i] = b[i * n + i].add(ck);
        }
        // M_k = A * B
        let mut next = vec![zero; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = zero;
                for l in 0..n {
                    acc = acc.add(at(i, l).mul(b[l * n + j]));
                }
                next[i * n + j] = acc;
            }
        }
        mk = next;
        let mut tr = zero;
        for i in 0..n {
            tr = tr.add(mk[i * n + i]);
        }
        ck = tr.scale(-1.0 / k as f64);
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(ck.scale(sign))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64;

    fn random_matrix(rng: &mut XorShift64, n: usize) -> Matrix {
        Matrix::from_fn(n, n, |_, _| rng.next_sym() * 2.0)
    }

    // Cofactor-expansion determinant, used as an independent oracle.
    fn det_cofactor(m: &Matrix) -> f64 {
        let n = m.rows();
        if n == 1 {
            return m.get(0, 0);
        }
        let mut acc = 0.0;
        for j in 0..n {
            let sub = Matrix::from_fn(n - 1, n - 1, |r, c| {
                m.get(r + 1, if c < j { c } else { c + 1 })
            });
            let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sgn * m.get(0, j) * det_cofactor(&sub);
        }
        acc
    }

    #[test]
    fn det_identity_and_cofactor_oracle() {
        assert_eq!(det(&Matrix::identity(3)).unwrap(), 1.0);
        let mut rng = XorShift64::new(7);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 4);
            let a = det(&m).unwrap();
            let b = det_cofactor(&m);
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn det_rejects_non_square() {
        let m = Matrix::zeros(2, 3);
        assert!(matches!(det(&m), Err(Error::MatrixShape(_))));
    }

    #[test]
    fn adjugate_identity_and_inverse_oracle() {
        let i3 = Matrix::identity(3);
        assert_eq!(adjugate(&i3).unwrap(), i3);
        let mut rng = XorShift64::new(11);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 3);
            if det(&m).unwrap().abs() < 0.1 {
                continue;
            }
            let adj = adjugate(&m).unwrap();
            let oracle = inverse(&m).unwrap().scale(det(&m).unwrap());
            assert!(adj.sub(&oracle).unwrap().max_norm() <= 1e-10);
        }
    }

    #[test]
    fn adjugate_block_diag_with_zero() {
        // diag(0, -2): adjugate swaps the diagonal.
        let m = Matrix::new(2, 2, vec![0.0, 0.0, 0.0, -2.0]).unwrap();
        let adj = adjugate(&m).unwrap();
        assert_eq!(adj, Matrix::new(2, 2, vec![-2.0, 0.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn adjugate_identity_holds_on_singular_matrices() {
        let mut rng = XorShift64::new(13);
        for _ in 0..30 {
            let n = 3;
            let mut m = random_matrix(&mut rng, n);
            // Force singularity: overwrite last row with a combination of
            // the first two.
            let (a, b) = (rng.next_sym(), rng.next_sym());
            for j in 0..n {
                m.set(n - 1, j, a * m.get(0, j) + b * m.get(1, j));
            }
            let adj = adjugate(&m).unwrap();
            let d = det(&m).unwrap();
            let lhs = m.matmul(&adj).unwrap();
            let rhs = Matrix::identity(n).scale(d);
            assert!(lhs.sub(&rhs).unwrap().max_norm() <= 1e-10 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn kernel_of_identity_is_empty() {
        assert!(kernel_right(&Matrix::identity(4), 1e-8).is_empty());
    }

    #[test]
    fn kernel_of_rank_one_outer_product() {
        // m = u v^T has a 2-dimensional kernel orthogonal to v.
        let u = [1.0, 2.0, -1.0];
        let v = [0.5, -1.0, 3.0];
        let m = Matrix::from_fn(3, 3, |i, j| u[i] * v[j]);
        let ker = kernel_right(&m, 1e-8);
        assert_eq!(ker.len(), 2);
        let smax = m.singular_values().into_iter().fold(0.0, f64::max);
        for k in &ker {
            let mv = m.mul_vec(k).unwrap();
            let norm = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm <= 10.0 * 1e-8 * smax);
            let dot: f64 = k.iter().zip(v).map(|(a, b)| a * b).sum();
            assert!(dot.abs() <= 1e-8);
        }
    }

    #[test]
    fn kernel_residual_bound_random() {
        let mut rng = XorShift64::new(17);
        for _ in 0..20 {
            let mut m = random_matrix(&mut rng, 4);
            for j in 0..4 {
                m.set(2, j, m.get(0, j) - m.get(1, j));
            }
            let smax = m.singular_values().into_iter().fold(0.0, f64::max);
            for k in kernel_right(&m, 1e-8) {
                let mv = m.mul_vec(&k).unwrap();
                let norm = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(norm <= 10.0 * 1e-8 * smax);
            }
        }
    }

    #[test]
    fn eigenvalues_2x2_negative_semidefinite() {
        // [[-1,-1],[-1,-1]] has eigenvalues 0 and -2.
        let m = Matrix::new(2, 2, vec![-1.0, -1.0, -1.0, -1.0]).unwrap();
        let s = eigenvalues(&m, 1e-7).unwrap();
        assert_eq!(s.zero_count, 1);
        assert_eq!(s.stable_count, 1);
        assert_eq!(s.unstable_count, 0);
        assert!((s.eigenvalues[0].0 + 2.0).abs() <= 1e-10);
        assert!(s.eigenvalues[1].0.abs() <= 1e-10);
    }

    #[test]
    fn eigenvalues_diag_mixed() {
        let m = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        let s = eigenvalues(&m, 1e-7).unwrap();
        assert_eq!((s.stable_count, s.unstable_count, s.zero_count), (1, 1, 0));
    }

    #[test]
    fn eigenvalues_imaginary_pair_is_an_error() {
        // Companion matrix of lambda^2 + 1.
        let m = Matrix::new(2, 2, vec![0.0, -1.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            eigenvalues(&m, 1e-7),
            Err(Error::NearImaginaryEigenvalue { .. })
        ));
    }

    #[test]
    fn eigenvalues_invariant_under_similarity() {
        let mut rng = XorShift64::new(23);
        for _ in 0..20 {
            let n = 4;
            let m = random_matrix(&mut rng, n);
            // Well-conditioned transform: identity plus a small perturbation.
            let p = Matrix::from_fn(n, n, |i, j| {
                if i == j { 1.0 } else { 0.2 * rng.next_sym() }
            });
            let pinv = inverse(&p).unwrap();
            let sim = p.matmul(&m).unwrap().matmul(&pinv).unwrap();
            let (sa, sb) = match (eigenvalues(&m, 1e-7), eigenvalues(&sim, 1e-7)) {
                (Ok(a), Ok(b)) => (a, b),
                // A random draw can legitimately sit near the imaginary
                // axis; skip those.
                _ => continue,
            };
            assert_eq!(sa.zero_count, sb.zero_count);
            assert_eq!(sa.stable_count, sb.stable_count);
            assert_eq!(sa.unstable_count, sb.unstable_count);
            for (a, b) in sa.eigenvalues.iter().zip(&sb.eigenvalues) {
                assert!((a.0 - b.0).abs() <= 1e-8 && (a.1.abs() - b.1.abs()).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn solve_round_trip() {
        let mut rng = XorShift64::new(31);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 5);
            if det(&m).unwrap().abs() < 0.05 {
                continue;
            }
            let x: Vec<f64> = (0..5).map(|_| rng.next_sym()).collect();
            let b = m.mul_vec(&x).unwrap();
            let x2 = solve(&m, &b).unwrap();
            for (a, b) in x.iter().zip(&x2) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn det_series2_matches_lu_on_samples() {
        let mut rng = XorShift64::new(37);
        for _ in 0..20 {
            let n = 3;
            let j0 = random_matrix(&mut rng, n);
            let j1 = random_matrix(&mut rng, n);
            let j2 = random_matrix(&mut rng, n);
            let s = det_series2(&j0, &j1, &j2).unwrap();
            // Compare the series against determinants of the sampled curve.
            for &t in &[0.0, 1e-4, -1e-4] {
                let jt = j0.add(&j1.scale(t)).unwrap().add(&j2.scale(t * t)).unwrap();
                let exact = det(&jt).unwrap();
                let approx = s.a0 + s.a1 * t + s.a2 * t * t;
                assert!((exact - approx).abs() <= 1e-8 * (1.0 + exact.abs()));
            }
        }
    }

    #[test]
    fn det_series2_valid_at_singular_base() {
        // j0 singular: det(j0 + t I) for j0 = [[0,1],[0,0]] is t^2.
        let j0 = Matrix::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let j1 = Matrix::identity(2);
        let j2 = Matrix::zeros(2, 2);
        let s = det_series2(&j0, &j1, &j2).unwrap();
        assert!(s.a0.abs() <= 1e-14 && s.a1.abs() <= 1e-14 && (s.a2 - 1.0).abs() <= 1e-14);
    }
}
