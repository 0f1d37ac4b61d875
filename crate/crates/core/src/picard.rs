//! Fixed-point iteration for `(U, V) = (u - εu⁰, u_t - εu⁰_t)`:
//!
//! ```text
//! U_{j+1} = L (S(U_j + εu⁰, V_j + εu⁰_t, ∂_x U_j + εu⁰_x)),   U_1 = 0
//! V_{j+1} = L'(S(U_j + εu⁰, V_j + εu⁰_t, ∂_x U_j + εu⁰_x)),   V_1 = 0
//! ```
//!
//! Fields live on the characteristic grid `(x, t) = (jh, nh)` restricted to the
//! cone `|x| <= t + R`; the composed source is sampled on that grid and
//! interpolated bilinearly inside the Duhamel quadratures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dalembert::{duhamel_l, duhamel_lt, free_solution, DalembertError, QuadConfig, SpaceTimeField};
use crate::model::{ProblemSpec, Source};

#[derive(Debug, Error, PartialEq)]
pub enum PicardError {
    #[error("invalid iteration setup: {0}")]
    Invalid(String),
    #[error("source overflowed at x={x}, t={t}")]
    NonFinite { x: f64, t: f64 },
    #[error("iteration diverged after {} steps", .0.steps)]
    Diverged(Box<IterationReport>),
}

impl From<DalembertError> for PicardError {
    fn from(e: DalembertError) -> Self {
        match e {
            DalembertError::NonFinite { y, s } => PicardError::NonFinite { x: y, t: s },
            other => PicardError::Invalid(other.to_string()),
        }
    }
}

/// A scalar field on the grid nodes inside `|x| <= t + R`, `0 <= t <= T`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    h: f64,
    radius: f64,
    /// `rows[n][k]` is the value at `x = (k - half(n))·h`, `t = n·h`.
    rows: Vec<Vec<f64>>,
}

impl GridField {
    pub fn zeros(h: f64, radius: f64, horizon: f64) -> Self {
        let nt = (horizon / h).round() as usize;
        let rows = (0..=nt)
            .map(|n| vec![0.0; 2 * Self::half_for(h, radius, n) + 1])
            .collect();
        Self { h, radius, rows }
    }

    /// Samples `f(x, t)` at every node.
    pub fn from_fn(h: f64, radius: f64, horizon: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(h, radius, horizon);
        field.fill(|x, t, _| f(x, t));
        field
    }

    fn half_for(h: f64, radius: f64, n: usize) -> usize {
        ((n as f64 * h + radius) / h + 1e-9).floor() as usize
    }

    fn half(&self, n: usize) -> usize {
        (self.rows[n].len() - 1) / 2
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn horizon(&self) -> f64 {
        (self.rows.len() - 1) as f64 * self.h
    }

    pub fn levels(&self) -> usize {
        self.rows.len()
    }

    /// Value at node `(j, n)`; zero outside the stored cone.
    pub fn node(&self, j: i64, n: usize) -> f64 {
        if n >= self.rows.len() {
            return 0.0;
        }
        let half = self.half(n) as i64;
        if j.abs() > half {
            return 0.0;
        }
        self.rows[n][(j + half) as usize]
    }

    pub fn set_node(&mut self, j: i64, n: usize, v: f64) {
        let half = self.half(n) as i64;
        self.rows[n][(j + half) as usize] = v;
    }

    /// Iterates `(j, n, x, t, value)` over all nodes.
    pub fn nodes(&self) -> impl Iterator<Item = (i64, usize, f64, f64, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(move |(n, row)| {
            let half = (row.len() - 1) as i64 / 2;
            let t = n as f64 * self.h;
            row.iter().enumerate().map(move |(k, &v)| {
                let j = k as i64 - half;
                (j, n, j as f64 * self.h, t, v)
            })
        })
    }

    fn fill(&mut self, mut f: impl FnMut(f64, f64, i64) -> f64) {
        let h = self.h;
        for (n, row) in self.rows.iter_mut().enumerate() {
            let half = (row.len() - 1) as i64 / 2;
            let t = n as f64 * h;
            for (k, v) in row.iter_mut().enumerate() {
                let j = k as i64 - half;
                *v = f(j as f64 * h, t, j);
            }
        }
    }

    fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> GridField {
        let mut out = self.clone();
        for (ro, (ra, rb)) in out.rows.iter_mut().zip(self.rows.iter().zip(&other.rows)) {
            for (o, (a, b)) in ro.iter_mut().zip(ra.iter().zip(rb)) {
                *o = f(*a, *b);
            }
        }
        out
    }

    /// Centred difference in `x` (one-sided is unnecessary: the field is 0 past the cone).
    pub fn dx(&self) -> GridField {
        let mut out = self.clone();
        for (n, row) in out.rows.iter_mut().enumerate() {
            let half = (row.len() - 1) as i64 / 2;
            for (k, v) in row.iter_mut().enumerate() {
                let j = k as i64 - half;
                *v = (self.node(j + 1, n) - self.node(j - 1, n)) / (2.0 * self.h);
            }
        }
        out
    }

    /// Weighted sup over nodes.
    pub fn weighted_sup(&self, w: impl Fn(f64, f64) -> f64) -> f64 {
        self.nodes().fold(0.0f64, |m, (_, _, x, t, v)| m.max(w(x, t) * v.abs()))
    }
}

impl SpaceTimeField for GridField {
    /// Bilinear interpolation between the four surrounding nodes.
    fn eval(&self, x: f64, t: f64) -> f64 {
        let (sx, st) = (x / self.h, t / self.h);
        let (j, n) = (sx.floor(), st.floor());
        let (fx, ft) = (sx - j, st - n);
        if n < 0.0 {
            return 0.0;
        }
        let (j, n) = (j as i64, n as usize);
        let lower = (1.0 - fx) * self.node(j, n) + fx * self.node(j + 1, n);
        if ft == 0.0 {
            return lower;
        }
        let upper = (1.0 - fx) * self.node(j, n + 1) + fx * self.node(j + 1, n + 1);
        (1.0 - ft) * lower + ft * upper
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// `sup (t + |x| + R)^{-1} |U|`.
pub fn norm_u1(u: &GridField) -> f64 {
    let r = u.radius;
    u.weighted_sup(|x, t| 1.0 / (t + x.abs() + r))
}

/// `sup [χ_D + (1 - χ_D)(t + |x| + R)^{-1}] |V|` with `D = {t - |x| >= R}`.
pub fn norm_v2(v: &GridField, radius: f64) -> f64 {
    v.weighted_sup(|x, t| {
        if t - x.abs() >= radius {
            1.0
        } else {
            1.0 / (t + x.abs() + radius)
        }
    })
}

/// The pair `(U, V)` of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPair {
    pub u: GridField,
    pub v: GridField,
}

impl WeightedPair {
    pub fn zeros(h: f64, radius: f64, horizon: f64) -> Self {
        let z = GridField::zeros(h, radius, horizon);
        Self { u: z.clone(), v: z }
    }

    pub fn horizon(&self) -> f64 {
        self.u.horizon()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    pub h: f64,
    pub horizon: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_steps() -> usize {
    50
}

impl PicardConfig {
    pub fn new(h: f64, horizon: f64) -> Self {
        Self {
            h,
            horizon,
            tol: default_tol(),
            max_steps: default_max_steps(),
        }
    }

    pub fn validate(&self) -> Result<(), PicardError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(PicardError::Invalid("h > 0 required".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(PicardError::Invalid("horizon T > 0 required".into()));
        }
        let ratio = self.horizon / self.h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(PicardError::Invalid("horizon must be a multiple of h".into()));
        }
        if !(self.tol > 0.0) || self.max_steps == 0 {
            return Err(PicardError::Invalid("tol > 0 and max_steps >= 1 required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationReport {
    /// `‖U_j‖₁` after each step.
    pub u_norms: Vec<f64>,
    /// `‖V_j‖₂` after each step.
    pub v_norms: Vec<f64>,
    pub ux_norms: Vec<f64>,
    pub vx_norms: Vec<f64>,
    /// `‖U_{j+1} - U_j‖₁ + ‖V_{j+1} - V_j‖₂`.
    pub differences: Vec<f64>,
    /// Successive difference ratios; length `steps - 1`.
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
    pub steps: usize,
}

impl IterationReport {
    pub fn max_contraction(&self) -> Option<f64> {
        self.contraction_ratios
            .iter()
            .cloned()
            .filter(|r| r.is_finite())
            .reduce(f64::max)
    }
}

/// The free solution `εu⁰` (with derivatives) sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeGrid {
    pub u: GridField,
    pub ut: GridField,
    pub ux: GridField,
}

impl FreeGrid {
    pub fn new(spec: &ProblemSpec, h: f64, horizon: f64) -> Self {
        let (data, eps, r) = (&spec.data, spec.epsilon, spec.radius());
        let mut u = GridField::zeros(h, r, horizon);
        let mut ut = u.clone();
        let mut ux = u.clone();
        let waves: Vec<_> = u.nodes().map(|(j, n, x, t, _)| (j, n, free_solution(data, eps, x, t))).collect();
        for (j, n, w) in waves {
            u.set_node(j, n, w.u);
            ut.set_node(j, n, w.ut);
            ux.set_node(j, n, w.ux);
        }
        Self { u, ut, ux }
    }
}

/// A configured iteration: spec, grid and the precomputed free wave.
pub struct PicardProblem<'a> {
    pub spec: &'a ProblemSpec,
    pub config: PicardConfig,
    pub free: FreeGrid,
}

impl<'a> PicardProblem<'a> {
    pub fn new(spec: &'a ProblemSpec, config: PicardConfig) -> Result<Self, PicardError> {
        config.validate()?;
        let free = FreeGrid::new(spec, config.h, config.horizon);
        Ok(Self { spec, config, free })
    }

    /// `S(U + εu⁰, V + εu⁰_t, U_x + εu⁰_x)` on the grid.
    pub fn composed_source(&self, prev: &WeightedPair) -> Result<GridField, PicardError> {
        let ux = prev.u.dx();
        let mut out = GridField::zeros(self.config.h, self.spec.radius(), self.config.horizon);
        if self.spec.is_free() {
            return Ok(out);
        }
        let mut bad = None;
        out.fill(|x, t, j| {
            let n = (t / self.config.h).round() as usize;
            let u = prev.u.node(j, n) + self.free.u.node(j, n);
            let ut = prev.v.node(j, n) + self.free.ut.node(j, n);
            let uxv = ux.node(j, n) + self.free.ux.node(j, n);
            let s = self.spec.source(u, ut, uxv, x, t);
            if !s.is_finite() && bad.is_none() {
                bad = Some((x, t));
            }
            s
        });
        match bad {
            Some((x, t)) => Err(PicardError::NonFinite { x, t }),
            None => Ok(out),
        }
    }

    pub fn step(&self, prev: &WeightedPair) -> Result<WeightedPair, PicardError> {
        let source = self.composed_source(prev)?;
        let quad = QuadConfig::new(self.config.h);
        let mut next = WeightedPair::zeros(self.config.h, self.spec.radius(), self.config.horizon);
        let nodes: Vec<_> = next.u.nodes().map(|(j, n, x, t, _)| (j, n, x, t)).collect();
        for (j, n, x, t) in nodes {
            next.u.set_node(j, n, duhamel_l(&source, x, t, quad)?);
            next.v.set_node(j, n, duhamel_lt(&source, x, t, quad)?);
        }
        Ok(next)
    }

    pub fn run(&self) -> Result<PicardOutcome, PicardError> {
        let r = self.spec.radius();
        let (h, horizon) = (self.config.h, self.config.horizon);
        let mut pair = WeightedPair::zeros(h, r, horizon);
        let mut report = IterationReport::default();
        let mut growth = 0;
        for _ in 0..self.config.max_steps {
            let next = self.step(&pair)?;
            let du = next.u.zip_map(&pair.u, |a, b| a - b);
            let dv = next.v.zip_map(&pair.v, |a, b| a - b);
            let diff = norm_u1(&du) + norm_v2(&dv, r);
            if let Some(&last) = report.differences.last() {
                report.contraction_ratios.push(if last > 0.0 { diff / last } else { 0.0 });
                growth = if diff > last { growth + 1 } else { 0 };
            }
            report.u_norms.push(norm_u1(&next.u));
            report.v_norms.push(norm_v2(&next.v, r));
            report.ux_norms.push(norm_u1(&next.u.dx()));
            report.vx_norms.push(norm_v2(&next.v.dx(), r));
            report.differences.push(diff);
            report.steps += 1;
            pair = next;
            if !diff.is_finite() || growth >= 5 {
                return Err(PicardError::Diverged(Box::new(report)));
            }
            if diff < self.config.tol {
                report.converged = true;
                break;
            }
        }
        let u = pair.u.zip_map(&self.free.u, |a, b| a + b);
        let ut = pair.v.zip_map(&self.free.ut, |a, b| a + b);
        Ok(PicardOutcome { pair, u, ut, report })
    }

    /// `max |U - L(S(u))|` over nodes, together with a quadrature error
    /// estimate `(4/3)·max |L_h(S) - L_{h/2}(S)|` for the same source field.
    pub fn integral_residual(&self, outcome: &PicardOutcome) -> Result<(f64, f64), PicardError> {
        let source = self.composed_source(&outcome.pair)?;
        let quad = QuadConfig::new(self.config.h);
        let fine = QuadConfig::new(0.5 * self.config.h);
        let mut residual = 0.0f64;
        let mut quad_err = 0.0f64;
        for (_, _, x, t, u) in outcome.pair.u.nodes() {
            let l = duhamel_l(&source, x, t, quad)?;
            residual = residual.max((u - l).abs());
            quad_err = quad_err.max((l - duhamel_l(&source, x, t, fine)?).abs() * 4.0 / 3.0);
        }
        Ok((residual, quad_err))
    }
}

/// Result of [`run_picard`]: the pair and the reconstructed `u = U + εu⁰`, `u_t = V + εu⁰_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    pub pair: WeightedPair,
    pub u: GridField,
    pub ut: GridField,
    pub report: IterationReport,
}

/// One application of the iteration map.
pub fn picard_step(prev: &WeightedPair, spec: &ProblemSpec) -> Result<WeightedPair, PicardError> {
    let cfg = PicardConfig::new(prev.u.h(), prev.horizon());
    PicardProblem::new(spec, cfg)?.step(prev)
}

pub fn run_picard(spec: &ProblemSpec, config: PicardConfig) -> Result<PicardOutcome, PicardError> {
    PicardProblem::new(spec, config)?.run()
}
