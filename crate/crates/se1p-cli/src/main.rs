//! Command line driver for the se1p spectral Ewald solver.
//!
//! Subcommands:
//!
//! * `gen` writes a random neutral particle system in the text format
//!   understood by every other subcommand.
//! * `params` runs the tolerance-driven parameter selection and prints
//!   the chosen grid, window, padding and cutoff values.
//! * `solve` evaluates potentials, forces and the energy with the fast
//!   solver and emits them as CSV.
//! * `direct` does the same with the slow direct reference summation.
//! * `verify` runs both paths on one system and reports per-term rms
//!   differences next to the corresponding truncation estimates.
//! * `bench` times the solver stages (spreading, transforms, scaling,
//!   gathering, real-space sum) over a list of particle counts.
//! * `quadcheck` tabulates measured trapezoidal quadrature errors next
//!   to the closed form (1D) or the heuristic estimate (2D).
//! * `sweep` scans one truncation parameter (window support `P`, real
//!   cutoff `rc`, or Fourier cutoff `kinf`) and emits measured errors
//!   next to the estimates.
//!
//! All machine-readable output is CSV with a leading `# schema=1`
//! comment line and goes to stdout unless `--out FILE` is given;
//! diagnostics go to stderr. Exit codes: 0 on success, 2 on usage
//! errors, 1 on input or numerical failures. The worker thread count
//! comes from `--threads`, then the `SE1P_THREADS` environment
//! variable, then defaults to 1 so that repeated runs are bit-for-bit
//! reproducible.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use se1p::direct::{self, DirectConfig};
use se1p::estimate::{
    est_approx, est_fourier_trunc, est_real_trunc, rms_error, select_params, SolverParams,
};
use se1p::model::gen_uniform;
use se1p::solver::{self, KSpaceWorkspace, SolveOptions};
use se1p::{aft, greens, gridding, quadtheory, realspace, Output, System, Vec3};

/// Marker for command line combinations that clap alone cannot reject;
/// mapped to exit code 2 like parse errors.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Parser)]
#[command(
    name = "se1p",
    version,
    about = "Electrostatics of singly periodic charge systems",
    propagate_version = true
)]
struct Cli {
    /// Worker threads (falls back to SE1P_THREADS, then 1).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random neutral particle system.
    Gen {
        /// Number of particles (even, so alternating unit charges cancel).
        #[arg(long)]
        n: usize,
        /// Box dimensions.
        #[arg(long = "box", num_args = 3, value_names = ["LX", "LY", "LZ"])]
        boxd: Vec<f64>,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select solver parameters from an error tolerance.
    Params {
        /// Target rms error tolerance.
        #[arg(long)]
        tol: f64,
        /// Ewald splitting parameter.
        #[arg(long)]
        xi: f64,
        /// Box dimensions (must be cubic).
        #[arg(long = "box", num_args = 3, value_names = ["LX", "LY", "LZ"])]
        boxd: Vec<f64>,
        /// Sum of squared charges of the target system.
        #[arg(long)]
        q2: f64,
    },
    /// Evaluate potentials, forces and energy with the fast solver.
    Solve {
        /// Particle system file.
        #[arg(long)]
        system: PathBuf,
        /// Ewald splitting parameter.
        #[arg(long)]
        xi: f64,
        /// Error tolerance for automatic parameter selection.
        #[arg(long)]
        tol: Option<f64>,
        /// Grid size (explicit parameter mode; requires the other five).
        #[arg(long)]
        m: Option<usize>,
        /// Window support in grid points.
        #[arg(long)]
        p: Option<usize>,
        /// Number of locally padded positive wave numbers.
        #[arg(long)]
        nl: Option<usize>,
        /// Oversampling factor for the padded local modes.
        #[arg(long)]
        sl: Option<f64>,
        /// Oversampling factor for the zero mode.
        #[arg(long)]
        s0: Option<f64>,
        /// Real-space cutoff radius.
        #[arg(long)]
        rc: Option<f64>,
        /// Neutralize a charged system with a uniform background.
        #[arg(long)]
        background: bool,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the same quantities with the direct reference summation.
    Direct {
        /// Particle system file.
        #[arg(long)]
        system: PathBuf,
        /// Ewald splitting parameter.
        #[arg(long)]
        xi: f64,
        /// Periodic image layers for the real-space sum.
        #[arg(long, default_value_t = 2)]
        layers: usize,
        /// Largest wave number index of the Fourier sum.
        #[arg(long, default_value_t = 30)]
        kinf: usize,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the fast solver against the direct reference per term.
    Verify {
        /// Particle system file.
        #[arg(long)]
        system: PathBuf,
        /// Target rms error tolerance for parameter selection.
        #[arg(long)]
        tol: f64,
        /// Ewald splitting parameter.
        #[arg(long)]
        xi: f64,
        /// Periodic image layers of the reference real-space sum.
        #[arg(long, default_value_t = 2)]
        layers: usize,
        /// Largest wave number index of the reference Fourier sum.
        #[arg(long, default_value_t = 40)]
        kinf: usize,
        /// Report format.
        #[arg(long, value_enum, default_value_t = Report::Csv)]
        report: Report,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the solver stages over a list of particle counts.
    Bench {
        /// Particle count; repeat the flag for several sizes.
        #[arg(long, required = true)]
        n: Vec<usize>,
        /// Box dimensions (must be cubic).
        #[arg(long = "box", num_args = 3, value_names = ["LX", "LY", "LZ"],
              default_values_t = [1.0, 1.0, 1.0])]
        boxd: Vec<f64>,
        /// Target rms error tolerance.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Ewald splitting parameter.
        #[arg(long, default_value_t = 8.0)]
        xi: f64,
        /// Repetitions per size; the minimum is reported.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// RNG seed for the generated systems.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate trapezoidal quadrature errors against the theory.
    Quadcheck {
        /// Gaussian decay rate of the integrand.
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Wave numbers, comma separated.
        #[arg(long = "k3", value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0])]
        k3: Vec<f64>,
        /// Step sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 1.0])]
        h: Vec<f64>,
        /// Quadrature dimension: 1 (closed form) or 2 (heuristic).
        #[arg(long, default_value_t = 1)]
        dim: u8,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan one truncation parameter and report measured vs estimate.
    Sweep {
        /// Which parameter to scan.
        #[arg(long, value_enum)]
        kind: SweepKind,
        /// Particle system file (a random system is generated when omitted).
        #[arg(long)]
        system: Option<PathBuf>,
        /// Particles in the generated system.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Box dimensions of the generated system (must be cubic).
        #[arg(long = "box", num_args = 3, value_names = ["LX", "LY", "LZ"],
              default_values_t = [2.0, 2.0, 2.0])]
        boxd: Vec<f64>,
        /// RNG seed for the generated system.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Ewald splitting parameter.
        #[arg(long)]
        xi: f64,
        /// Smallest real-space cutoff (kind rc).
        #[arg(long, default_value_t = 0.3)]
        rc_min: f64,
        /// Largest real-space cutoff (kind rc).
        #[arg(long, default_value_t = 1.0)]
        rc_max: f64,
        /// Number of cutoffs between rc-min and rc-max (kind rc).
        #[arg(long, default_value_t = 8)]
        steps: usize,
        /// Smallest Fourier cutoff index (kind kinf).
        #[arg(long, default_value_t = 2)]
        kinf_min: usize,
        /// Largest Fourier cutoff index (kind kinf).
        #[arg(long, default_value_t = 30)]
        kinf_max: usize,
        /// Stride through the Fourier cutoffs (kind kinf).
        #[arg(long, default_value_t = 2)]
        kinf_step: usize,
        /// Grid size (kind p; required).
        #[arg(long)]
        m: Option<usize>,
        /// Smallest window support (kind p).
        #[arg(long, default_value_t = 4)]
        p_min: usize,
        /// Largest window support (kind p).
        #[arg(long, default_value_t = 24)]
        p_max: usize,
        /// Stride through the window supports (kind p).
        #[arg(long, default_value_t = 2)]
        p_step: usize,
        /// Oversampling factor for the padded local modes (kind p).
        #[arg(long, default_value_t = 4.0)]
        sl: f64,
        /// Oversampling factor for the zero mode (kind p).
        #[arg(long, default_value_t = 2.5)]
        s0: f64,
        /// Number of locally padded positive wave numbers (kind p).
        #[arg(long)]
        nl: Option<usize>,
        /// Periodic image layers of the reference real-space sum.
        #[arg(long, default_value_t = 2)]
        layers: usize,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Report {
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    /// Window support of the gridding Gaussian.
    P,
    /// Real-space cutoff radius.
    Rc,
    /// Fourier-space cutoff index of the direct sum.
    Kinf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("SE1P_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1);
    // Errors only if a global pool already exists, which is fine.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if err.downcast_ref::<UsageError>().is_some() {
                eprintln!("usage error: {err}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {err:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Gen { n, boxd, seed, out } => {
            let sys = gen_uniform(n, cube3(&boxd), seed)?;
            emit(&out, &sys.to_text())
        }
        Command::Params { tol, xi, boxd, q2 } => {
            let b = cube3(&boxd);
            let params = select_params(tol, xi, q2, Vec3::new(b[0], b[1], b[2]))?;
            let mut line = String::new();
            let _ = write!(
                line,
                "M={} P={} nl={} sl={} s0={} rc={} xi={} eta={} h={} mtilde={}",
                params.m,
                params.p,
                params.nl,
                params.sl,
                params.s0,
                params.rc,
                params.xi,
                params.eta(),
                params.h(),
                params.mtilde()
            );
            line.push('\n');
            emit(&None, &line)
        }
        Command::Solve {
            system,
            xi,
            tol,
            m,
            p,
            nl,
            sl,
            s0,
            rc,
            background,
            out,
        } => {
            let sys = load_system(&system)?;
            let params = resolve_params(&sys, xi, tol, m, p, nl, sl, s0, rc)?;
            let options = SolveOptions {
                neutralizing_background: background,
            };
            let res = solver::solve_with(&sys, &params, options)?;
            emit(&out, &results_csv(&res))
        }
        Command::Direct {
            system,
            xi,
            layers,
            kinf,
            out,
        } => {
            let sys = load_system(&system)?;
            let cfg = DirectConfig::new(xi, layers, kinf)?;
            let res = direct::direct_total(&sys, &cfg)?;
            emit(&out, &results_csv(&res))
        }
        Command::Verify {
            system,
            tol,
            xi,
            layers,
            kinf,
            report,
            out,
        } => {
            let Report::Csv = report;
            let sys = load_system(&system)?;
            let text = verify_csv(&sys, tol, xi, layers, kinf)?;
            emit(&out, &text)
        }
        Command::Bench {
            n,
            boxd,
            tol,
            xi,
            reps,
            seed,
            out,
        } => {
            let text = bench_csv(&n, cube3(&boxd), tol, xi, reps.max(1), seed)?;
            emit(&out, &text)
        }
        Command::Quadcheck {
            alpha,
            k3,
            h,
            dim,
            out,
        } => {
            if dim != 1 && dim != 2 {
                return Err(usage(format!("--dim must be 1 or 2, got {dim}")));
            }
            let mut text = String::from("# schema=1\nh,k3,measured,estimate\n");
            for &hv in &h {
                for &kv in &k3 {
                    let nq = quadtheory::suggested_n(alpha, hv);
                    let (measured, estimate) = if dim == 1 {
                        quadtheory::trapz_error_1d(kv, alpha, hv, nq)?
                    } else {
                        quadtheory::trapz_error_2d(kv, alpha, hv, nq)?
                    };
                    let _ = writeln!(text, "{hv},{kv},{measured:.17e},{estimate:.17e}");
                }
            }
            emit(&out, &text)
        }
        Command::Sweep {
            kind,
            system,
            n,
            boxd,
            seed,
            xi,
            rc_min,
            rc_max,
            steps,
            kinf_min,
            kinf_max,
            kinf_step,
            m,
            p_min,
            p_max,
            p_step,
            sl,
            s0,
            nl,
            layers,
            out,
        } => {
            let sys = match &system {
                Some(path) => load_system(path)?,
                None => gen_uniform(n, cube3(&boxd), seed)?,
            };
            let text = match kind {
                SweepKind::Rc => sweep_rc(&sys, xi, rc_min, rc_max, steps, layers)?,
                SweepKind::Kinf => {
                    sweep_kinf(&sys, xi, kinf_min, kinf_max, kinf_step, m, sl, s0, nl)?
                }
                SweepKind::P => {
                    let m = m.ok_or_else(|| usage("--kind p requires --m"))?;
                    sweep_p(&sys, xi, m, p_min, p_max, p_step, sl, s0, nl)?
                }
            };
            emit(&out, &text)
        }
    }
}

/// Validates a `--box LX LY LZ` argument list as a cubic box.
fn cube3(boxd: &[f64]) -> [f64; 3] {
    [boxd[0], boxd[1], boxd[2]]
}

fn load_system(path: &PathBuf) -> anyhow::Result<System> {
    System::load(path).with_context(|| format!("loading system from {}", path.display()))
}

fn cubic_edge(sys: &System) -> anyhow::Result<f64> {
    let b = sys.boxd();
    if b[0] != b[1] || b[1] != b[2] {
        anyhow::bail!(
            "solver requires a cubic box, got {} x {} x {}",
            b[0],
            b[1],
            b[2]
        );
    }
    Ok(b[0])
}

/// Builds solver parameters either from six explicit flags or from a
/// tolerance. Mixing, or giving neither, is a usage error.
#[allow(clippy::too_many_arguments)]
fn resolve_params(
    sys: &System,
    xi: f64,
    tol: Option<f64>,
    m: Option<usize>,
    p: Option<usize>,
    nl: Option<usize>,
    sl: Option<f64>,
    s0: Option<f64>,
    rc: Option<f64>,
) -> anyhow::Result<SolverParams<f64>> {
    let l = cubic_edge(sys)?;
    let explicit = [m.is_some(), p.is_some(), nl.is_some(), sl.is_some(), s0.is_some(), rc.is_some()];
    if explicit.iter().all(|&g| g) {
        if tol.is_some() {
            return Err(usage("give either --tol or the explicit parameter set, not both"));
        }
        return Ok(SolverParams::new(
            xi,
            rc.unwrap(),
            m.unwrap(),
            p.unwrap(),
            nl.unwrap(),
            sl.unwrap(),
            s0.unwrap(),
            l,
        )?);
    }
    if explicit.iter().any(|&g| g) {
        return Err(usage(
            "explicit parameter mode requires all of --m --p --nl --sl --s0 --rc",
        ));
    }
    let tol = tol.ok_or_else(|| usage("give --tol or the full explicit parameter set"))?;
    Ok(select_params(tol, xi, sys.charge_sq_sum(), Vec3::new(l, l, l))?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Per-particle CSV with the energy and its breakdown as comments.
fn results_csv(res: &Output) -> String {
    let csv = res.to_csv();
    let (head, rest) = csv.split_once('\n').unwrap_or((csv.as_str(), ""));
    format!(
        "{head}\n# energy={:.17e}\n# energy_real={:.17e}\n# energy_fourier={:.17e}\n# energy_self={:.17e}\n{rest}",
        res.energy, res.breakdown.real, res.breakdown.fourier, res.breakdown.self_term
    )
}

/// Runs the fast and the direct path term by term and renders the
/// `term,rms_abs,rms_rel,estimate` table.
///
/// Estimates: the real row carries the truncation estimate for the
/// chosen `rc`. The Fourier row combines the truncation estimate at
/// the grid cutoff `M/2`, the window approximation estimate scaled by
/// `sqrt(Q xi L)/L`, and the transform padding error `exp(-2 pi sl)`
/// scaled by the rms of the Fourier part itself. The total row adds
/// the real and Fourier rows; the force row scales the total by the
/// Gaussian screening rate `2 xi`, the dominant derivative scale.
fn verify_csv(sys: &System, tol: f64, xi: f64, layers: usize, kinf: usize) -> anyhow::Result<String> {
    let l = cubic_edge(sys)?;
    let q2 = sys.charge_sq_sum();
    let params = select_params(tol, xi, q2, Vec3::new(l, l, l))?;
    let cfg = DirectConfig::new(xi, layers, kinf)?;

    let (phi_r, force_r) = realspace::real_potential_and_force(sys, xi, params.rc)?;
    let ws = KSpaceWorkspace::new(&params)?;
    let (phi_f, force_f) = ws.fourier_both(sys)?;

    let oracle_r = direct::direct_real(sys, &cfg);
    let kspace = direct::direct_kspace(sys, &cfg)?;
    let zero = direct::direct_zeromode(sys, xi)?;
    let oracle_f: Vec<f64> = kspace.iter().zip(&zero).map(|(&a, &b)| a + b).collect();
    let oracle = direct::direct_total(sys, &cfg)?;

    let total: Vec<f64> = (0..sys.len())
        .map(|i| phi_r[i] + phi_f[i] + direct::self_term(sys.charges()[i], xi))
        .collect();
    let force: Vec<f64> = (0..sys.len())
        .flat_map(|i| {
            let f = force_r[i] + force_f[i];
            [f.x, f.y, f.z]
        })
        .collect();
    let oracle_force: Vec<f64> = oracle.force.iter().flat_map(|f| [f.x, f.y, f.z]).collect();

    let fourier_scale = (oracle_f.iter().map(|&v| v * v).sum::<f64>() / sys.len() as f64).sqrt();
    let est_r = est_real_trunc(xi, params.rc, q2, l);
    let est_f = est_fourier_trunc(xi, params.m / 2, q2, l)
        + est_approx::<f64>(params.p) * (q2 * xi * l).sqrt() / l
        + (-2.0 * std::f64::consts::PI * params.sl).exp() * fourier_scale;
    let rows = [
        ("real", &phi_r, &oracle_r, est_r),
        ("fourier", &phi_f, &oracle_f, est_f),
        ("total", &total, &oracle.potential, est_r + est_f),
        ("force", &force, &oracle_force, 2.0 * xi * (est_r + est_f)),
    ];

    let mut text = String::from("# schema=1\nterm,rms_abs,rms_rel,estimate\n");
    for (term, values, reference, estimate) in rows {
        let abs = rms_error(values, reference, false)?;
        let rel = rms_error(values, reference, true)?;
        let _ = writeln!(text, "{term},{abs:.17e},{rel:.17e},{estimate:.17e}");
    }
    Ok(text)
}

/// Times each solver stage for every requested particle count and
/// renders one CSV row per count with the minimum over `reps` runs.
fn bench_csv(
    counts: &[usize],
    boxd: [f64; 3],
    tol: f64,
    xi: f64,
    reps: usize,
    seed: u64,
) -> anyhow::Result<String> {
    let mut text = String::from("# schema=1\nn,grid,fft,scale,gather,real,total\n");
    for &n in counts {
        let sys = gen_uniform(n, boxd, seed)?;
        let l = cubic_edge(&sys)?;
        let params = select_params(tol, xi, sys.charge_sq_sum(), Vec3::new(l, l, l))?;
        let scaling = greens::ScalingSpec::from_params(&params)?;

        let mut best = [f64::INFINITY; 5];
        for rep in 0..=reps {
            let t0 = Instant::now();
            let grid = gridding::spread(&sys, &params)?;
            let t_grid = t0.elapsed().as_secs_f64();

            let t0 = Instant::now();
            let mut spec = aft::aft_forward(&grid, &params)?;
            let t_fwd = t0.elapsed().as_secs_f64();

            let t0 = Instant::now();
            greens::scale_field(&mut spec, &scaling)?;
            let t_scale = t0.elapsed().as_secs_f64();

            let t0 = Instant::now();
            let back = aft::aft_inverse(&spec, &params)?;
            let t_inv = t0.elapsed().as_secs_f64();

            let t0 = Instant::now();
            let _ = gridding::gather_both(&back, &sys, &params)?;
            let t_gather = t0.elapsed().as_secs_f64();

            let t0 = Instant::now();
            let _ = realspace::real_potential_and_force(&sys, xi, params.rc)?;
            let t_real = t0.elapsed().as_secs_f64();

            // First pass is an untimed warmup.
            if rep == 0 && reps > 0 {
                continue;
            }
            let sample = [t_grid, t_fwd + t_inv, t_scale, t_gather, t_real];
            for (b, s) in best.iter_mut().zip(sample) {
                *b = b.min(s);
            }
        }
        let total: f64 = best.iter().sum();
        let _ = writeln!(
            text,
            "{n},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{total:.6e}",
            best[0], best[1], best[2], best[3], best[4]
        );
    }
    Ok(text)
}

fn sweep_rc(
    sys: &System,
    xi: f64,
    rc_min: f64,
    rc_max: f64,
    steps: usize,
    layers: usize,
) -> anyhow::Result<String> {
    if !(rc_min > 0.0 && rc_max > rc_min) {
        return Err(usage("need 0 < --rc-min < --rc-max"));
    }
    let l = cubic_edge(sys)?;
    let q2 = sys.charge_sq_sum();
    let cfg = DirectConfig::new(xi, layers, 1)?;
    let reference = direct::direct_real(sys, &cfg);
    let steps = steps.max(2);

    let mut text = String::from("# schema=1\nrc,measured,estimate\n");
    for i in 0..steps {
        let rc = rc_min + (rc_max - rc_min) * i as f64 / (steps - 1) as f64;
        let phi = realspace::real_potential(sys, xi, rc)?;
        let measured = rms_error(&phi, &reference, false)?;
        let estimate = est_real_trunc(xi, rc, q2, l);
        let _ = writeln!(text, "{rc},{measured:.17e},{estimate:.17e}");
    }
    Ok(text)
}

/// Measures the spherical truncation error of the k-space sum: the
/// scaled spectral field is computed once on a grid whose own cutoff
/// sits far beyond `kinf_max`, then every wave number with
/// `|k| > 2 pi kinf / L` is zeroed. By linearity the difference from
/// the untruncated field is exactly the discarded tail, so shared
/// window and padding errors cancel.
#[allow(clippy::too_many_arguments)]
fn sweep_kinf(
    sys: &System,
    xi: f64,
    kinf_min: usize,
    kinf_max: usize,
    kinf_step: usize,
    m: Option<usize>,
    sl: f64,
    s0: f64,
    nl: Option<usize>,
) -> anyhow::Result<String> {
    if kinf_min < 1 || kinf_max <= kinf_min {
        return Err(usage("need 1 <= --kinf-min < --kinf-max"));
    }
    let l = cubic_edge(sys)?;
    let q2 = sys.charge_sq_sum();
    let m = m.unwrap_or(2 * kinf_max + 16);
    let nl = nl.unwrap_or(8);
    let params = SolverParams::new(xi, l / 4.0, m, 24.min(m), nl, sl, s0, l)?;
    let scaling = greens::ScalingSpec::from_params(&params)?;

    let grid = gridding::spread(sys, &params)?;
    let mut spec = aft::aft_forward(&grid, &params)?;
    greens::scale_field(&mut spec, &scaling)?;
    let full = gridding::gather_potential(&aft::aft_inverse(&spec, &params)?, sys, &params)?;

    let mut text = String::from("# schema=1\nkinf,measured,estimate\n");
    let mut k = kinf_min;
    while k <= kinf_max {
        let kmax = 2.0 * std::f64::consts::PI * k as f64 / l;
        let mut cut = spec.clone();
        for plane in &mut cut.planes {
            let k3 = 2.0 * std::f64::consts::PI * plane.k3_index as f64 / l;
            let side = plane.side;
            for row in 0..side {
                let ky = plane.kappa(row, params.h());
                for col in 0..side {
                    let kx = plane.kappa(col, params.h());
                    if kx * kx + ky * ky + k3 * k3 > kmax * kmax {
                        plane.data[row * side + col] = Default::default();
                    }
                }
            }
        }
        let phi = gridding::gather_potential(&aft::aft_inverse(&cut, &params)?, sys, &params)?;
        let measured = rms_error(&phi, &full, false)?;
        let estimate = est_fourier_trunc(xi, k, q2, l);
        let _ = writeln!(text, "{k},{measured:.17e},{estimate:.17e}");
        k += kinf_step.max(1);
    }
    Ok(text)
}

#[allow(clippy::too_many_arguments)]
fn sweep_p(
    sys: &System,
    xi: f64,
    m: usize,
    p_min: usize,
    p_max: usize,
    p_step: usize,
    sl: f64,
    s0: f64,
    nl: Option<usize>,
) -> anyhow::Result<String> {
    if p_min < 2 || p_max < p_min {
        return Err(usage("need 2 <= --p-min <= --p-max"));
    }
    let l = cubic_edge(sys)?;
    let nl = nl.unwrap_or_else(|| (m / 10).max(2));
    let cfg = DirectConfig::new(xi, 1, 40)?;
    let kspace = direct::direct_kspace(sys, &cfg)?;
    let zero = direct::direct_zeromode(sys, xi)?;
    let reference: Vec<f64> = kspace.iter().zip(&zero).map(|(&a, &b)| a + b).collect();

    let mut text = String::from("# schema=1\np,measured,estimate\n");
    let mut p = p_min;
    while p <= p_max {
        let params = SolverParams::new(xi, l / 4.0, m, p, nl, sl, s0, l)?;
        let phi = solver::fourier_potential(sys, &params)?;
        let measured = rms_error(&phi, &reference, true)?;
        let estimate = est_approx::<f64>(p);
        let _ = writeln!(text, "{p},{measured:.17e},{estimate:.17e}");
        p += p_step.max(1);
    }
    Ok(text)
}
