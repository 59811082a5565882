//! Command-line front end: load a problem file, analyze the candidate
//! bifurcation point, sweep equilibrium counts over a parameter range, or
//! trace a bifurcation diagram to CSV.

mod report;

use clap::{Args, Parser, Subcommand};
use pitchfork_core::criteria::{self, Tolerances, Verdict};
use pitchfork_core::equilibria::{self, Equilibrium};
use pitchfork_core::{FieldSpec, Problem};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Parser)]
#[command(
    name = "pitchfork",
    about = "Detect and classify pitchfork-type bifurcations of parametrized vector fields",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TolArgs {
    /// Residual norm below which a point counts as an equilibrium.
    #[arg(long, default_value_t = 1e-10)]
    tol_res: f64,
    /// Eigenvalue modulus below which an eigenvalue counts as zero.
    #[arg(long, default_value_t = 1e-7)]
    tol_zero: f64,
    /// Bound on |v_l . dV/deps| for P1.
    #[arg(long, default_value_t = 1e-7)]
    tol_p1: f64,
    /// Minimum |directional derivative| for P2.
    #[arg(long, default_value_t = 1e-7)]
    tol_p2: f64,
    /// Minimum |P3 value|.
    #[arg(long, default_value_t = 1e-6)]
    tol_p3: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            tol_res: self.tol_res,
            tol_zero: self.tol_zero,
            tol_p1: self.tol_p1,
            tol_p2: self.tol_p2,
            tol_p3: self.tol_p3,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check conditions P0-P3 at the problem's candidate point and classify.
    Analyze {
        /// Problem file.
        file: PathBuf,
        /// Search-ball radius (overrides the problem file).
        #[arg(long)]
        radius: Option<f64>,
        /// Parameter offset for the two-sided equilibrium counts.
        #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
        delta_eps: f64,
        #[command(flatten)]
        tols: TolArgs,
        /// Seed for the random perturbation draws of the index oracle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Count equilibria (with index sum) across a parameter range; CSV out.
    Sweep {
        file: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        eps_lo: f64,
        #[arg(long, allow_negative_numbers = true)]
        eps_hi: f64,
        /// Number of parameter samples (>= 2 unless the range is empty).
        #[arg(long)]
        steps: usize,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        radius: Option<f64>,
        #[command(flatten)]
        tols: TolArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Trace equilibrium branches across a parameter range; CSV out.
    Diagram {
        file: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        eps_lo: f64,
        #[arg(long, allow_negative_numbers = true)]
        eps_hi: f64,
        /// Number of continuation steps across the range (>= 2).
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        radius: Option<f64>,
        #[command(flatten)]
        tols: TolArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Analyze { file, radius, delta_eps, tols, seed } => {
            let problem = load_problem(&file)?;
            let r = effective_radius(&problem, radius)?;
            if !(delta_eps > 0.0) {
                return Err("--delta-eps must be positive".into());
            }
            let (report, class) = criteria::classify(
                &problem.field,
                &problem.point,
                problem.eps0,
                r,
                delta_eps,
                &tols.tolerances(),
                seed,
            )
            .map_err(|e| e.to_string())?;
            print!("{}", report::render(&file, &problem, r, delta_eps, &report, &class));
            let code = match class.verdict {
                Verdict::Undetermined | Verdict::Inconsistent => 2,
                _ => 0,
            };
            Ok(ExitCode::from(code))
        }
        Command::Sweep { file, eps_lo, eps_hi, steps, jobs, radius, tols, seed, output } => {
            let problem = load_problem(&file)?;
            let r = effective_radius(&problem, radius)?;
            let grid = eps_grid(eps_lo, eps_hi, steps)?;
            let jobs = jobs.max(1);
            let tols = tols.tolerances();
            let rows = parallel_map(&grid, jobs, |&eps| {
                sweep_row(&problem.field, &problem.point, r, eps, &tols, seed)
            })?;
            let mut csv = String::from("eps,zero_count,sum_of_indices,min_abs_det\r\n");
            for row in rows {
                csv.push_str(&row);
                csv.push_str("\r\n");
            }
            std::fs::write(&output, csv)
                .map_err(|e| format!("cannot write {}: {e}", output.display()))?;
            Ok(ExitCode::from(0))
        }
        Command::Diagram { file, eps_lo, eps_hi, steps, radius, tols, output } => {
            let problem = load_problem(&file)?;
            let r = effective_radius(&problem, radius)?;
            let grid = eps_grid(eps_lo, eps_hi, steps)?;
            let tols = tols.tolerances();
            let csv = diagram_csv(&problem, r, eps_lo, eps_hi, &grid, &tols)?;
            std::fs::write(&output, csv)
                .map_err(|e| format!("cannot write {}: {e}", output.display()))?;
            Ok(ExitCode::from(0))
        }
    }
}

fn load_problem(path: &PathBuf) -> Result<Problem, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Problem::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn effective_radius(problem: &Problem, flag: Option<f64>) -> Result<f64, String> {
    let r = flag.unwrap_or(problem.radius);
    if !(r > 0.0 && r.is_finite()) {
        return Err("radius must be positive".into());
    }
    Ok(r)
}

/// Parameter samples for sweep/diagram. An empty range (lo = hi) yields a
/// single sample; otherwise at least two are required.
fn eps_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, String> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err("need finite --eps-lo <= --eps-hi".into());
    }
    if lo == hi {
        return Ok(vec![lo]);
    }
    if steps < 2 {
        return Err("--steps must be at least 2".into());
    }
    Ok((0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect())
}

/// Map over items with up to `jobs` worker threads, preserving input order.
fn parallel_map<T: Sync, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<String>, String>
where
    F: Fn(&T) -> Result<String, String> + Sync,
{
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<Result<String, String>>>> =
        Mutex::new(vec![None; items.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let res = f(&items[i]);
                out.lock().expect("worker panicked")[i] = Some(res);
            });
        }
    });
    out.into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|slot| slot.expect("every index visited"))
        .collect()
}

fn sweep_row(
    spec: &FieldSpec,
    x0: &[f64],
    r: f64,
    eps: f64,
    tols: &Tolerances,
    seed: u64,
) -> Result<String, String> {
    let grid = criteria::grid_for_dim(spec.dim());
    let zeros = equilibria::find_zeros_in_ball(spec, x0, r, eps, grid, tols.tol_res)
        .map_err(|e| e.to_string())?;
    let mut sum = 0i64;
    let mut min_abs_det = f64::INFINITY;
    for z in &zeros {
        min_abs_det = min_abs_det.min(z.det_jac.abs());
        sum += i64::from(zero_index(spec, z, r, tols, seed));
    }
    Ok(format!(
        "{},{},{},{}",
        report::fmt_f(eps),
        zeros.len(),
        sum,
        report::fmt_f(min_abs_det)
    ))
}

/// Index of one located zero: sign of the Jacobian determinant when
/// nondegenerate, otherwise the consensus of the degenerate-index methods
/// over a small surrounding ball (0 when even those abstain).
fn zero_index(
    spec: &FieldSpec,
    z: &Equilibrium,
    r: f64,
    tols: &Tolerances,
    seed: u64,
) -> i32 {
    if !z.degenerate {
        return if z.det_jac > 0.0 { 1 } else { -1 };
    }
    criteria::equilibrium_index(spec, &z.x, z.eps, 0.05 * r, tols, seed)
        .ok()
        .and_then(|(v, _)| v)
        .unwrap_or(0)
}

fn diagram_csv(
    problem: &Problem,
    r: f64,
    eps_lo: f64,
    eps_hi: f64,
    grid: &[f64],
    tols: &Tolerances,
) -> Result<String, String> {
    let spec = &problem.field;
    let n = spec.dim();
    let newton_grid = criteria::grid_for_dim(n);
    let max_step = if grid.len() > 1 {
        (eps_hi - eps_lo) / (grid.len() - 1) as f64
    } else {
        1.0
    };
    // Seed branches from the zeros at the endpoints and the midpoint, so
    // branches born inside the range are still picked up.
    let mid = 0.5 * (eps_lo + eps_hi);
    let mut seeds: Vec<Equilibrium> = Vec::new();
    for eps in [eps_lo, mid, eps_hi] {
        let zs = equilibria::find_zeros_in_ball(spec, &problem.point, r, eps, newton_grid, tols.tol_res)
            .map_err(|e| e.to_string())?;
        seeds.extend(zs);
    }
    let match_tol = 1e-5_f64.max(10.0 * tols.tol_res.sqrt());
    let mut branches: Vec<equilibria::Branch> = Vec::new();
    for seed in &seeds {
        let covered = branches.iter().any(|b| {
            b.points.iter().any(|p| {
                (p.eps - seed.eps).abs() <= max_step
                    && dist(&p.x, &seed.x) <= 100.0 * match_tol
            })
        });
        if covered {
            continue;
        }
        let b = equilibria::continue_branch(spec, seed, eps_lo, eps_hi, max_step, tols.tol_res)
            .map_err(|e| e.to_string())?;
        branches.push(b);
    }
    let mut csv = String::from("branch_id,eps");
    for name in spec.var_names() {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push_str(",stable,index\r\n");
    for (id, b) in branches.iter().enumerate() {
        for p in &b.points {
            csv.push_str(&format!("{},{}", id, report::fmt_f(p.eps)));
            for xi in &p.x {
                csv.push(',');
                csv.push_str(&report::fmt_f(*xi));
            }
            let stable = match &p.spectrum {
                Some(s) if s.zero_count == 0 => {
                    if s.unstable_count == 0 { "true" } else { "false" }
                }
                _ => "unknown",
            };
            let index = if p.degenerate {
                0
            } else if p.det_jac > 0.0 {
                1
            } else {
                -1
            };
            csv.push_str(&format!(",{stable},{index}\r\n"));
        }
    }
    Ok(csv)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
