//! ε-sweeps of [`estimate_lifespan`], fits against the predicted law, and
//! persistence.

mod export;
mod fit;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::ProblemSpec;
use crate::regimes::{predict, LawKind, RegimeQuery, ScalingLaw};
use crate::solver::{estimate_lifespan, GridConfig, LifespanOutcome, SolverError};

pub use export::{export, read_report, ExportError, Timestamps, CSV_NAME, REPORT_NAME, TIMESTAMPS_NAME};
pub use fit::{fit_exp_law, fit_log_corrected, fit_power_law, FitError, FitLaw, FitReport, Verdict, MIN_POINTS, MIN_R_SQUARED};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid sweep config: {0}")]
    Invalid(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Geometric grid from `max` down to `min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonGrid {
    pub max: f64,
    pub min: f64,
    pub count: usize,
}

impl EpsilonGrid {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.count < MIN_POINTS {
            return Err(SweepError::Invalid(format!("count ≥ {MIN_POINTS} required, got {}", self.count)));
        }
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) {
            return Err(SweepError::Invalid("0 < min < max required (strictly decreasing grid)".into()));
        }
        Ok(())
    }

    /// Strictly decreasing values, endpoints exact.
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        let ratio = self.min / self.max;
        (0..n)
            .map(|i| match i {
                0 => self.max,
                i if i == n - 1 => self.min,
                i => self.max * ratio.powf(i as f64 / (n - 1) as f64),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Template; its ε is replaced by each grid value.
    pub spec: ProblemSpec,
    pub epsilons: EpsilonGrid,
    pub grid: GridConfig,
    /// Worker threads; does not influence results.
    pub workers: usize,
    /// Overrides the atlas prediction.
    pub expected: Option<LawKind<f64>>,
    /// Relative slope tolerance.
    pub tolerance: f64,
}

impl SweepConfig {
    pub fn new(spec: ProblemSpec, epsilons: EpsilonGrid, grid: GridConfig) -> Self {
        Self {
            spec,
            epsilons,
            grid,
            workers: 1,
            expected: None,
            tolerance: 0.15,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        self.epsilons.validate()?;
        self.grid.validate().map_err(|e| SweepError::Invalid(e.to_string()))?;
        self.spec.validate().map_err(|e| SweepError::Invalid(e.to_string()))?;
        if self.workers == 0 {
            return Err(SweepError::Invalid("workers ≥ 1 required".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(SweepError::Invalid("tolerance > 0 required".into()));
        }
        Ok(())
    }

    /// SHA-256 over everything that determines the result; the worker count
    /// is excluded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&(&self.spec, &self.epsilons, &self.grid, &self.expected, self.tolerance))
            .expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    BlownUp,
    ReachedHorizon,
    /// Refinement levels disagree by more than the spread bound.
    Inconclusive,
    /// Some refinement levels blew up, others did not.
    Mixed,
    Failed,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::BlownUp => "blown_up",
            CellStatus::ReachedHorizon => "reached_horizon",
            CellStatus::Inconclusive => "inconclusive",
            CellStatus::Mixed => "mixed",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub t_num: Option<f64>,
    pub uncertainty: Option<f64>,
    pub status: CellStatus,
    pub threshold_sensitivity: Option<f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted by ε descending.
    pub rows: Vec<SweepRow>,
    pub expected: Option<ScalingLaw<f64>>,
    /// Why no law was predicted, when none was.
    pub prediction_note: Option<String>,
    pub fits: Vec<FitReport>,
    /// Verdict of the fit that matches the expected law kind.
    pub verdict: Verdict,
    /// Epsilons of ReachedHorizon rows left out of the fits.
    pub excluded: Vec<f64>,
    /// `T_num` nonincreasing in ε within the refinement uncertainty band.
    pub monotone: bool,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn fit(&self, law: FitLaw) -> Option<&FitReport> {
        self.fits.iter().find(|f| f.law == law)
    }

    /// `(ε, T)` of the rows that enter fits.
    pub fn clean_points(&self) -> Vec<(f64, f64)> {
        clean_points(&self.rows)
    }
}

fn clean_points(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.status == CellStatus::BlownUp)
        .filter_map(|r| r.t_num.map(|t| (r.epsilon, t)))
        .collect()
}

fn run_cell(spec: &ProblemSpec, grid: &GridConfig, epsilon: f64) -> SweepRow {
    let row = |status, t_num, uncertainty, sens, message| SweepRow {
        epsilon,
        t_num,
        uncertainty,
        status,
        threshold_sensitivity: sens,
        message,
    };
    match estimate_lifespan(&spec.with_epsilon(epsilon), grid) {
        Ok(est) => match est.outcome {
            LifespanOutcome::BlownUp => row(
                CellStatus::BlownUp,
                Some(est.t_num),
                Some(est.uncertainty),
                est.threshold_sensitivity,
                None,
            ),
            LifespanOutcome::ReachedHorizon => row(CellStatus::ReachedHorizon, None, None, None, None),
        },
        Err(SolverError::Inconclusive { values, spread }) => row(
            CellStatus::Inconclusive,
            values.last().copied().flatten(),
            None,
            None,
            Some(format!("refinement spread {spread:.3}")),
        ),
        Err(e @ SolverError::Mixed { .. }) => row(CellStatus::Mixed, None, None, None, Some(e.to_string())),
        Err(e) => row(CellStatus::Failed, None, None, None, Some(e.to_string())),
    }
}

/// All candidate fits for the expected law, primary first. Simple fits are
/// never allowed to confirm a log-corrected hypothesis.
pub fn fit_candidates(points: &[(f64, f64)], expected: Option<&LawKind<f64>>, tolerance: f64) -> Vec<FitReport> {
    let mut fits = Vec::new();
    let power_pred = match expected {
        Some(LawKind::Power { exponent }) => Some(*exponent),
        _ => None,
    };
    let power = fit_power_law(points, power_pred, tolerance).ok();
    match expected {
        Some(LawKind::Exp { exponent }) => {
            fits.extend(fit_exp_law(points, *exponent, tolerance).ok());
            fits.extend(power);
        }
        Some(LawKind::LogInverse { inverse, exponent }) => {
            fits.extend(fit_log_corrected(points, inverse, *exponent, tolerance).ok());
            let mut simple: Vec<FitReport> = power.into_iter().chain(fit_exp_law(points, *exponent, tolerance).ok()).collect();
            for f in &mut simple {
                f.verdict = Verdict::Inconclusive;
            }
            fits.extend(simple);
        }
        _ => fits.extend(power),
    }
    fits
}

fn primary_verdict(rows: &[SweepRow], expected: Option<&LawKind<f64>>, fits: &[FitReport]) -> Verdict {
    let want = match expected {
        None => return Verdict::Inconclusive,
        Some(LawKind::Global) => {
            let decided = rows
                .iter()
                .filter(|r| matches!(r.status, CellStatus::BlownUp | CellStatus::ReachedHorizon))
                .count();
            if rows.iter().any(|r| r.status == CellStatus::BlownUp) {
                return Verdict::Inconsistent;
            }
            return if decided >= MIN_POINTS {
                Verdict::Consistent
            } else {
                Verdict::Inconclusive
            };
        }
        Some(LawKind::Power { .. }) => FitLaw::Power,
        Some(LawKind::Exp { .. }) => FitLaw::Exp,
        Some(LawKind::LogInverse { .. }) => FitLaw::LogCorrected,
    };
    fits.iter()
        .find(|f| f.law == want)
        .map(|f| f.verdict)
        .unwrap_or(Verdict::Inconclusive)
}

fn is_monotone(rows: &[SweepRow]) -> bool {
    let pts: Vec<&SweepRow> = rows.iter().filter(|r| r.status == CellStatus::BlownUp).collect();
    pts.windows(2).all(|w| {
        let (big, small) = (w[0], w[1]);
        let band = big.uncertainty.unwrap_or(0.0) + small.uncertainty.unwrap_or(0.0);
        big.t_num.unwrap() <= small.t_num.unwrap() + band
    })
}

/// Runs every ε cell on a pool of `cfg.workers` threads and reduces in grid
/// order, so the result does not depend on the worker count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult, SweepError> {
    cfg.validate()?;
    let eps = cfg.epsilons.values();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| eps.par_iter().map(|&e| run_cell(&cfg.spec, &cfg.grid, e)).collect());

    let (expected, prediction_note) = match &cfg.expected {
        Some(kind) => (
            Some(ScalingLaw {
                kind: kind.clone(),
                provenance: "config override".into(),
                condition: "expected law set in config".into(),
            }),
            None,
        ),
        None => match predict(&RegimeQuery::from_spec(&cfg.spec)) {
            Ok(law) => (Some(law), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let kind = expected.as_ref().map(|l| &l.kind);
    let points = clean_points(&rows);
    let fits = fit_candidates(&points, kind, cfg.tolerance);
    let verdict = primary_verdict(&rows, kind, &fits);
    let excluded = rows
        .iter()
        .filter(|r| r.status == CellStatus::ReachedHorizon)
        .map(|r| r.epsilon)
        .collect();
    let monotone = is_monotone(&rows);
    Ok(SweepResult {
        rows,
        expected,
        prediction_note,
        fits,
        verdict,
        excluded,
        monotone,
        provenance: Provenance {
            config_hash: cfg.hash(),
            code_version: CODE_VERSION.into(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitialData, NonlinearTerm, Profile};
    use crate::regimes::{invert_law, InverseKind};

    fn smoke_config() -> SweepConfig {
        let data = InitialData::new(Profile::zero(), Profile::single(1.0, 0.0, 1.0), 1.5).unwrap();
        let spec = ProblemSpec::new(vec![NonlinearTerm::power(2.0)], data, 1.0, "smoke").unwrap();
        let grid = GridConfig::for_radius(1.5, 40.0).with_h(0.05);
        SweepConfig::new(spec, EpsilonGrid { max: 0.8, min: 0.3, count: 4 }, grid)
    }

    #[test]
    fn grid_values_are_geometric_and_decreasing() {
        let g = EpsilonGrid { max: 0.4, min: 0.05, count: 6 };
        let v = g.values();
        assert_eq!(v.len(), 6);
        assert_eq!(v[0], 0.4);
        assert_eq!(v[5], 0.05);
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        let r = v[1] / v[0];
        assert!(v.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
    }

    #[test]
    fn three_points_are_rejected() {
        let g = EpsilonGrid { max: 0.4, min: 0.1, count: 3 };
        assert!(matches!(g.validate(), Err(SweepError::Invalid(m)) if m.contains("count ≥ 4")));
    }

    #[test]
    fn hash_ignores_worker_count() {
        let a = smoke_config();
        let mut b = a.clone();
        b.workers = 4;
        assert_eq!(a.hash(), b.hash());
        b.tolerance = 0.2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn smoke_sweep_is_ordered_and_worker_independent() {
        let mut cfg = smoke_config();
        let one = run_sweep(&cfg).unwrap();
        cfg.workers = 4;
        let four = run_sweep(&cfg).unwrap();
        assert_eq!(one, four);
        assert!(one.rows.windows(2).all(|w| w[0].epsilon > w[1].epsilon));
        assert!(one.rows.iter().all(|r| r.status == CellStatus::BlownUp));
        assert!(one.monotone);
        assert_eq!(one.expected.as_ref().unwrap().provenance, "Zhou92");
    }

    #[test]
    fn horizon_rows_never_enter_fits() {
        let rows: Vec<SweepRow> = [0.4, 0.3, 0.2, 0.1, 0.05]
            .iter()
            .enumerate()
            .map(|(i, &e)| SweepRow {
                epsilon: e,
                t_num: (i < 4).then(|| e.powf(-0.5)),
                uncertainty: Some(0.0),
                status: if i < 4 { CellStatus::BlownUp } else { CellStatus::ReachedHorizon },
                threshold_sensitivity: None,
                message: None,
            })
            .collect();
        let pts = clean_points(&rows);
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.0 != 0.05));
    }

    #[test]
    fn candidates_for_log_corrected_hypothesis() {
        let inv = InverseKind::Phi1 { a: -0.5 };
        let pts: Vec<_> = EpsilonGrid { max: 0.4, min: 0.05, count: 6 }
            .values()
            .into_iter()
            .map(|e| (e, invert_law(&inv, 2.0 / e).unwrap()))
            .collect();
        let law = LawKind::LogInverse { inverse: inv, exponent: 1.0 };
        let fits = fit_candidates(&pts, Some(&law), 0.15);
        assert_eq!(fits.len(), 3);
        assert_eq!(fits[0].law, FitLaw::LogCorrected);
        assert_eq!(fits[0].verdict, Verdict::Consistent);
        assert!(fits[1..].iter().all(|f| f.verdict == Verdict::Inconclusive));
    }
}
