//! `wavelab` command line: config parsing, dispatch, output and exit codes.
//!
//! Exit codes: 0 success, 1 invalid input (bad flags, config or
//! preconditions), 2 numerically inconclusive or divergent outcome.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use wavelab_core::dalembert::huygens_residual;
use wavelab_core::functional::{auto_windows, combined_lower_bound_trace, moment_series, GrowthTrace, MomentSeries};
use wavelab_core::model::{ProblemSpec, TermKind};
use wavelab_core::picard::{run_picard, PicardConfig, PicardError, PicardProblem};
use wavelab_core::regimes::{predict, LawKind, QueryTerm, RegimeQuery, ScalingLaw, WeightClass};
use wavelab_core::solver::{estimate_lifespan, read_snapshots, run_once, LifespanOutcome, SnapshotWriter, SolverError};
use wavelab_core::sweep::{export, read_report, run_sweep, Timestamps, Verdict};

use config::{ConfigError, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Dump file written by `solve --out` and read by `functional`.
pub const DUMP_NAME: &str = "levels.csv";
/// Copy of the config stored next to a dump.
pub const DUMP_CONFIG_NAME: &str = "config.toml";

#[derive(Debug, Parser)]
#[command(name = "wavelab", version, about = "Blow-up and lifespan lab for 1D semilinear wave equations")]
pub struct Cli {
    /// Directory for machine-readable output
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Grid spacing h (overrides [grid] h)
    #[arg(long = "grid-h", global = true, value_name = "REAL")]
    pub grid_h: Option<f64>,
    /// Time horizon (overrides [grid] t_max)
    #[arg(long = "t-max", global = true, value_name = "REAL")]
    pub t_max: Option<f64>,
    /// Blow-up threshold M (overrides [grid] threshold)
    #[arg(long, global = true, value_name = "REAL")]
    pub threshold: Option<f64>,
    /// Sweep worker threads (overrides [sweep] workers)
    #[arg(long, global = true, value_name = "INT")]
    pub workers: Option<usize>,
    /// Seed for randomized spot checks
    #[arg(long, global = true, value_name = "INT", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict the lifespan law from a config file or from flags
    Predict(PredictArgs),
    /// Estimate the lifespan of one problem
    Solve { config: PathBuf },
    /// Run an epsilon sweep and fit the scaling law
    Sweep { config: PathBuf },
    /// Picard iteration of the integral equation up to --t-max
    Iterate { config: PathBuf },
    /// Moment functional analysis of a `solve --out` dump directory
    Functional { dump: PathBuf },
    /// Summarize a sweep result directory
    Report { dir: PathBuf },
}

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    /// Config with [problem] and [data]
    pub config: Option<PathBuf>,
    /// p of the constant-weight term |u_t|^p |u|^q
    #[arg(long, conflicts_with = "config")]
    pub p: Option<f64>,
    /// q of |u_t|^p |u|^q
    #[arg(long, requires = "p", conflicts_with = "config")]
    pub q: Option<f64>,
    /// r of the constant-weight term |u|^r
    #[arg(long, conflicts_with = "config")]
    pub r: Option<f64>,
    /// Treat g as having zero mean
    #[arg(long, conflicts_with = "config")]
    pub zero_mean: bool,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(format!("{}: {e}", path.display()))
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(|e| io_fail(&p, e))
}

fn write_toml<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let text = toml::to_string(value).map_err(|e| Failure::Invalid(format!("serializing {name}: {e}")))?;
    write_out(dir, name, text.as_bytes())
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            EXIT_INVALID
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("inconclusive: {m}");
            EXIT_NUMERICAL
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let ov = Overrides {
        grid_h: cli.grid_h,
        t_max: cli.t_max,
        threshold: cli.threshold,
        workers: cli.workers,
    };
    match &cli.command {
        Command::Predict(args) => cmd_predict(cli, args),
        Command::Solve { config } => cmd_solve(cli, &ov, config),
        Command::Sweep { config } => cmd_sweep(cli, &ov, config),
        Command::Iterate { config } => cmd_iterate(cli, &ov, config),
        Command::Functional { dump } => cmd_functional(cli, dump),
        Command::Report { dir } => cmd_report(dir),
    }
}

#[derive(Serialize)]
struct PredictRecord {
    status: &'static str,
    law: Option<ScalingLaw<f64>>,
    nearest: Option<String>,
    reason: Option<String>,
}

fn describe_law(law: &LawKind<f64>) -> String {
    match law {
        LawKind::Global => "Global (no blow-up for small data)".into(),
        LawKind::Power { exponent } => format!("PowerLaw T ~ C eps^-{}", fmt_exponent(*exponent)),
        LawKind::Exp { exponent } => format!("ExpLaw T ~ exp(C eps^-{})", fmt_exponent(*exponent)),
        LawKind::LogInverse { inverse, exponent } => format!(
            "LogInverse T ~ {}^-1(C eps^-{})",
            inverse.name(),
            fmt_exponent(*exponent)
        ),
    }
}

/// Shows small-denominator rationals exactly (`8/3`), otherwise decimals.
fn fmt_exponent(e: f64) -> String {
    for d in 1..=100i64 {
        let n = (e * d as f64).round();
        if (n / d as f64 - e).abs() < 1e-12 {
            return if d == 1 { format!("{n}") } else { format!("{n}/{d}") };
        }
    }
    format!("{e}")
}

fn cmd_predict(cli: &Cli, args: &PredictArgs) -> Outcome {
    let query = match &args.config {
        Some(path) => RegimeQuery::from_spec(&config::load(path)?.problem_spec_with(Some(1.0))?),
        None => {
            let mut terms = Vec::new();
            if let Some(p) = args.p {
                let q = args.q.unwrap_or(0.0);
                TermKind::DerivativeMixed { p, q }
                    .validate()
                    .map_err(|e| Failure::Invalid(e.to_string()))?;
                terms.push(QueryTerm::Derivative {
                    p,
                    q,
                    weight: WeightClass::Constant,
                });
            }
            if let Some(r) = args.r {
                TermKind::Power { r }.validate().map_err(|e| Failure::Invalid(e.to_string()))?;
                terms.push(QueryTerm::Power {
                    r,
                    weight: WeightClass::Constant,
                });
            }
            if terms.is_empty() {
                return Err(Failure::Invalid("give a config file or at least one of --p, --r".into()));
            }
            RegimeQuery {
                terms,
                g_mean_zero: args.zero_mean,
            }
        }
    };
    let record = match predict(&query) {
        Ok(law) => {
            println!("{}", describe_law(&law.kind));
            println!("provenance: {}", law.provenance);
            println!("condition: {}", law.condition);
            PredictRecord {
                status: "predicted",
                law: Some(law),
                nearest: None,
                reason: None,
            }
        }
        Err(wavelab_core::regimes::RegimeError::OutsideTheorems { nearest, reason }) => {
            println!("outside stated theorems: {reason}");
            println!("nearest: {nearest}");
            PredictRecord {
                status: "outside_theorems",
                law: None,
                nearest: Some(nearest),
                reason: Some(reason),
            }
        }
        Err(e) => return Err(Failure::Invalid(e.to_string())),
    };
    if let Some(dir) = &cli.out {
        write_toml(dir, "predict.toml", &record)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SolveRecord {
    label: String,
    epsilon: f64,
    outcome: String,
    t_num: Option<f64>,
    uncertainty: Option<f64>,
    threshold: f64,
    threshold_sensitivity: Option<f64>,
    run_crossings: Vec<Option<f64>>,
    huygens_residual: Option<f64>,
    seed: u64,
}

/// Seeded sample of the interior domain `t - |x| >= R`, `t <= t_max`.
fn interior_samples(spec: &ProblemSpec, t_max: f64, seed: u64, n: usize) -> Vec<(f64, f64)> {
    let r = spec.radius();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.gen_range(r..=t_max);
            let x = rng.gen_range(-(t - r)..=(t - r));
            (x, t)
        })
        .collect()
}

fn cmd_solve(cli: &Cli, ov: &Overrides, path: &Path) -> Outcome {
    let file = config::load(path)?;
    let spec = file.problem_spec()?;
    let grid = file.grid_config(spec.radius(), ov)?;

    let huygens = if spec.data.g_zero_mean() && grid.t_max > spec.radius() {
        let samples = interior_samples(&spec, grid.t_max, cli.seed, 1000);
        huygens_residual(&spec.data, spec.epsilon, &samples).ok()
    } else {
        None
    };

    let est = estimate_lifespan(&spec, &grid);
    let mut record = SolveRecord {
        label: spec.label.clone(),
        epsilon: spec.epsilon,
        outcome: String::new(),
        t_num: None,
        uncertainty: None,
        threshold: grid.threshold_for(&spec),
        threshold_sensitivity: None,
        run_crossings: Vec::new(),
        huygens_residual: huygens,
        seed: cli.seed,
    };
    let code = match &est {
        Ok(e) => {
            record.run_crossings = e.runs.iter().map(|r| r.crossing).collect();
            match e.outcome {
                LifespanOutcome::BlownUp => {
                    record.outcome = "blown_up".into();
                    record.t_num = Some(e.t_num);
                    record.uncertainty = Some(e.uncertainty);
                    record.threshold_sensitivity = e.threshold_sensitivity;
                    println!(
                        "{}: blow-up, T_num = {:.6} ± {:.2e} (threshold {:.3e})",
                        spec.label, e.t_num, e.uncertainty, e.threshold
                    );
                    if let Some(s) = e.threshold_sensitivity {
                        println!("threshold sensitivity |T(M) - T(100M)|/T(M) = {s:.3e}");
                    }
                }
                LifespanOutcome::ReachedHorizon => {
                    record.outcome = "reached_horizon".into();
                    println!("{}: no blow-up before t_max = {}", spec.label, grid.t_max);
                }
            }
            EXIT_OK
        }
        Err(SolverError::Config(m)) => return Err(Failure::Invalid(m.clone())),
        Err(e) => {
            record.outcome = "inconclusive".into();
            println!("{}: {e}", spec.label);
            EXIT_NUMERICAL
        }
    };
    if let Some(h) = huygens {
        println!("Huygens residual over 1000 interior samples (seed {}): {h:.3e}", cli.seed);
    }
    if let Some(dir) = &cli.out {
        write_toml(dir, "solve.toml", &record)?;
        let source = fs::read(path).map_err(|e| io_fail(path, e))?;
        write_out(dir, DUMP_CONFIG_NAME, &source)?;
        let levels = (grid.t_max / grid.h).ceil() as usize;
        let every = file.snapshot_every().unwrap_or((levels / 400).max(1));
        let dump_path = dir.join(DUMP_NAME);
        let f = fs::File::create(&dump_path).map_err(|e| io_fail(&dump_path, e))?;
        let mut writer = SnapshotWriter::new(std::io::BufWriter::new(f), every);
        run_once(&spec, &grid, &mut writer).map_err(|e| Failure::Invalid(e.to_string()))?;
        writer.finish().map_err(|e| io_fail(&dump_path, e))?;
    }
    Ok(code)
}

fn cmd_sweep(cli: &Cli, ov: &Overrides, path: &Path) -> Outcome {
    let cfg = config::load(path)?.sweep_config(ov)?;
    let started = now();
    let result = run_sweep(&cfg).map_err(|e| Failure::Invalid(e.to_string()))?;
    let finished = now();
    println!("{:>12} {:>14} {:>12}  status", "epsilon", "T_num", "±");
    for r in &result.rows {
        let t = r.t_num.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        let u = r.uncertainty.map(|v| format!("{v:.2e}")).unwrap_or_else(|| "-".into());
        println!("{:>12.6} {:>14} {:>12}  {}", r.epsilon, t, u, r.status.as_str());
    }
    match &result.expected {
        Some(law) => println!("expected: {} [{}]", describe_law(&law.kind), law.provenance),
        None => println!(
            "expected: none ({})",
            result.prediction_note.as_deref().unwrap_or("no prediction")
        ),
    }
    for f in &result.fits {
        println!(
            "fit {:?}: slope {:.4} ± {:.4}, R² {:.5}, verdict {:?}",
            f.law, f.slope, f.slope_se, f.r_squared, f.verdict
        );
    }
    if !result.excluded.is_empty() {
        println!("excluded (reached horizon): {:?}", result.excluded);
    }
    println!("verdict: {:?}", result.verdict);
    if let Some(dir) = &cli.out {
        export(&result, dir, Some(&Timestamps { started, finished })).map_err(|e| Failure::Invalid(e.to_string()))?;
    }
    Ok(if result.verdict == Verdict::Inconclusive {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    })
}

#[derive(Serialize)]
struct IterateRecord {
    converged: bool,
    steps: usize,
    horizon: f64,
    h: f64,
    differences: Vec<f64>,
    contraction_ratios: Vec<f64>,
    u_norms: Vec<f64>,
    v_norms: Vec<f64>,
    residual: Option<f64>,
    quadrature_error: Option<f64>,
}

fn cmd_iterate(cli: &Cli, ov: &Overrides, path: &Path) -> Outcome {
    let file = config::load(path)?;
    let spec = file.problem_spec()?;
    let grid = file.grid_config(spec.radius(), ov)?;
    // Snap the horizon to the grid.
    let horizon = (grid.t_max / grid.h).round().max(1.0) * grid.h;
    let pc = PicardConfig::new(grid.h, horizon);
    let (report, residual) = match run_picard(&spec, pc.clone()) {
        Ok(out) => {
            let problem = PicardProblem::new(&spec, pc).map_err(|e| Failure::Invalid(e.to_string()))?;
            let res = problem.integral_residual(&out).ok();
            (out.report, res)
        }
        Err(PicardError::Diverged(rep)) => (*rep, None),
        Err(PicardError::Invalid(m)) => return Err(Failure::Invalid(m)),
        Err(e) => return Err(Failure::Numerical(e.to_string())),
    };
    println!(
        "Picard on [0, {horizon}] with h = {}: {} after {} steps",
        grid.h,
        if report.converged { "converged" } else { "not converged" },
        report.steps
    );
    if let Some(c) = report.max_contraction() {
        println!("max contraction ratio {c:.4}");
    }
    if let Some((r, q)) = residual {
        println!("integral-equation residual {r:.3e} (quadrature error estimate {q:.3e})");
    }
    if let Some(dir) = &cli.out {
        let rec = IterateRecord {
            converged: report.converged,
            steps: report.steps,
            horizon,
            h: grid.h,
            differences: report.differences.clone(),
            contraction_ratios: report.contraction_ratios.clone(),
            u_norms: report.u_norms.clone(),
            v_norms: report.v_norms.clone(),
            residual: residual.map(|r| r.0),
            quadrature_error: residual.map(|r| r.1),
        };
        write_toml(dir, "iterate.toml", &rec)?;
    }
    Ok(if report.converged { EXIT_OK } else { EXIT_NUMERICAL })
}

#[derive(Serialize)]
struct FunctionalRecord {
    windows: Vec<(f64, f64)>,
    trace: Option<GrowthTrace>,
    verdict: String,
}

/// `(p, q, r)` of the combined structure, taking the first terms of each kind.
fn combined_exponents(spec: &ProblemSpec) -> (f64, f64, f64) {
    let mut pq = (0.0, 0.0);
    let mut r = 0.0;
    for t in &spec.terms {
        match t.kind {
            TermKind::DerivativeMixed { p, q } if pq == (0.0, 0.0) => pq = (p, q),
            TermKind::Power { r: rr } if r == 0.0 => r = rr,
            _ => {}
        }
    }
    (pq.0, pq.1, r)
}

fn cmd_functional(cli: &Cli, dump: &Path) -> Outcome {
    let file = config::load(&dump.join(DUMP_CONFIG_NAME))?;
    let spec = file.problem_spec()?;
    let dump_path = dump.join(DUMP_NAME);
    let f = fs::File::open(&dump_path).map_err(|e| io_fail(&dump_path, e))?;
    let slices = read_snapshots(std::io::BufReader::new(f)).map_err(|e| Failure::Invalid(e.to_string()))?;
    let series: MomentSeries = moment_series(&slices, &spec);
    let (early, late) = auto_windows(&series, spec.radius());
    let windows: Vec<(f64, f64)> = early.into_iter().chain(late).collect();
    let (p, q, r) = combined_exponents(&spec);
    let (trace, verdict) = if windows.is_empty() {
        (None, "no fit window (series too short)".to_string())
    } else {
        match combined_lower_bound_trace(&series, p, q, r, spec.epsilon, &windows) {
            Ok(t) => {
                let v = t.verdict().to_string();
                (Some(t), v)
            }
            Err(e) => (None, e.to_string()),
        }
    };
    println!("{} levels read, F(end) = {:.4e}", series.len(), series.f.last().copied().unwrap_or(0.0));
    if let Some(t) = &trace {
        for w in &t.windows {
            println!(
                "window [{:.3}, {:.3}]: kappa {:.3} (raw {:.3}), R² {:.4}, gain {:.3e}",
                w.start, w.end, w.kappa, w.kappa_raw, w.r_squared, w.gain
            );
        }
    }
    println!("{verdict}");
    let out_dir = cli.out.clone().unwrap_or_else(|| dump.to_path_buf());
    let mut csv = Vec::new();
    series.write_csv(&mut csv, &windows).map_err(|e| Failure::Invalid(e.to_string()))?;
    write_out(&out_dir, "moments.csv", &csv)?;
    let code = if trace.is_some() { EXIT_OK } else { EXIT_NUMERICAL };
    write_toml(&out_dir, "functional.toml", &FunctionalRecord { windows, trace, verdict })?;
    Ok(code)
}

fn cmd_report(dir: &Path) -> Outcome {
    let result = read_report(dir).map_err(|e| Failure::Invalid(e.to_string()))?;
    println!(
        "sweep of {} points, config {} (version {})",
        result.rows.len(),
        &result.provenance.config_hash[..12.min(result.provenance.config_hash.len())],
        result.provenance.code_version
    );
    if let Some(law) = &result.expected {
        println!("expected: {} [{}]", describe_law(&law.kind), law.provenance);
    }
    for f in &result.fits {
        let pred = f.predicted.map(fmt_exponent).unwrap_or_else(|| "-".into());
        println!(
            "fit {:?}: slope {:.4} ± {:.4} (predicted {pred}), R² {:.5}, {:?}",
            f.law, f.slope, f.slope_se, f.r_squared, f.verdict
        );
    }
    println!("verdict: {:?}, monotone: {}", result.verdict, result.monotone);
    Ok(EXIT_OK)
}
