//! Characteristic-grid ("diamond") integrator with blow-up detection.
//!
//! With `Δt = Δx = h` the update
//!
//! ```text
//! u(x, t+h) = u(x+h, t) + u(x-h, t) - u(x, t-h) + h² S(x, t)
//! ```
//!
//! is the discrete d'Alembert identity on the unit diamond, exact for the
//! free wave equation. All discretisation error sits in the source term.
//! `u_x` is a centred difference at level `t`; `u_t` uses only levels `t` and
//! `t-h` (plus the lagged source) so blow-up detection never looks ahead:
//!
//! ```text
//! u_t(x,t) ≈ [u(x+h,t) + u(x-h,t) - 2u(x,t-h)] / 2h + (h/2) S(x, t-h)
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dalembert::free_solution;
use crate::model::{ProblemSpec, Source};

/// Ratio between the two recorded thresholds used for the sensitivity check.
pub const SENSITIVITY_FACTOR: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid grid configuration: {0}")]
    Config(String),
    #[error("inconclusive lifespan: refinement values {values:?} disagree by {spread:.3} (> 0.2)")]
    Inconclusive { values: Vec<Option<f64>>, spread: f64 },
    #[error("inconclusive lifespan: some refinements blew up and others reached the horizon ({values:?})")]
    Mixed { values: Vec<Option<f64>> },
    #[error("snapshot dump line {line}: {reason}")]
    Dump { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Grid spacing, `Δx = Δt = h`.
    pub h: f64,
    /// Extra computed half-width beyond `t + R`, in units of `h`.
    #[serde(default = "default_margin")]
    pub margin_cells: usize,
    pub t_max: f64,
    /// Absolute blow-up threshold `M`; `None` selects `10⁶ × ε × sup-scale` (at least 10³).
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "default_levels")]
    pub refinement_levels: usize,
}

fn default_margin() -> usize {
    2
}

fn default_levels() -> usize {
    2
}

impl GridConfig {
    /// 200 cells across `[-R, R]`.
    pub fn for_radius(radius: f64, t_max: f64) -> Self {
        Self {
            h: radius / 100.0,
            margin_cells: default_margin(),
            t_max,
            threshold: None,
            refinement_levels: default_levels(),
        }
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_threshold(mut self, m: f64) -> Self {
        self.threshold = Some(m);
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::Config(m.into()));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h > 0 required");
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("t_max > 0 required");
        }
        if let Some(m) = self.threshold {
            if !(m >= 1e3) {
                return bad("threshold M >= 1e3 required");
            }
        }
        if self.refinement_levels < 2 {
            return bad("refinement_levels >= 2 required");
        }
        Ok(())
    }

    /// Threshold actually used for a problem.
    pub fn threshold_for(&self, spec: &ProblemSpec) -> f64 {
        self.threshold
            .unwrap_or_else(|| (1e6 * spec.epsilon * spec.data.sup_scale()).max(1e3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    BlownUp { t_star: f64 },
    ReachedHorizon,
}

/// Borrowed view of one time level over the computed band.
pub struct LevelView<'a> {
    pub index: usize,
    pub t: f64,
    pub h: f64,
    /// `x` of the first entry.
    pub x0: f64,
    pub u: &'a [f64],
    pub ut: &'a [f64],
    pub ux: &'a [f64],
    pub source: &'a [f64],
}

impl LevelView<'_> {
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn to_slice(&self) -> LevelSlice {
        LevelSlice {
            t: self.t,
            h: self.h,
            x0: self.x0,
            u: self.u.to_vec(),
            ut: self.ut.to_vec(),
            ux: self.ux.to_vec(),
        }
    }
}

/// Owned copy of a level: `u`, `u_t`, `u_x` on a uniform `x` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSlice {
    pub t: f64,
    pub h: f64,
    pub x0: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub ux: Vec<f64>,
}

impl LevelSlice {
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }
}

/// Receives every level once its derivatives and source are known.
pub trait LevelObserver {
    fn observe(&mut self, level: &LevelView<'_>);
}

impl LevelObserver for () {
    fn observe(&mut self, _: &LevelView<'_>) {}
}

impl<F: FnMut(&LevelView<'_>)> LevelObserver for F {
    fn observe(&mut self, level: &LevelView<'_>) {
        self(level)
    }
}

/// Keeps a copy of every `every`-th level.
pub struct SliceRecorder {
    pub every: usize,
    pub slices: Vec<LevelSlice>,
}

impl SliceRecorder {
    pub fn new(every: usize) -> Self {
        Self {
            every: every.max(1),
            slices: Vec::new(),
        }
    }
}

impl LevelObserver for SliceRecorder {
    fn observe(&mut self, level: &LevelView<'_>) {
        if level.index % self.every == 0 {
            self.slices.push(level.to_slice());
        }
    }
}

/// Streams `x,t,u,u_t` rows of every `every`-th level.
pub struct SnapshotWriter<W: Write> {
    every: usize,
    out: W,
    header: bool,
    error: Option<std::io::Error>,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(out: W, every: usize) -> Self {
        Self {
            every: every.max(1),
            out,
            header: false,
            error: None,
        }
    }

    /// Flushes and returns the writer, or the first I/O error encountered.
    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }

    fn write_level(&mut self, level: &LevelView<'_>) -> std::io::Result<()> {
        if !self.header {
            writeln!(self.out, "x,t,u,u_t")?;
            self.header = true;
        }
        for i in 0..level.u.len() {
            writeln!(self.out, "{},{},{},{}", level.x(i), level.t, level.u[i], level.ut[i])?;
        }
        Ok(())
    }
}

impl<W: Write> LevelObserver for SnapshotWriter<W> {
    fn observe(&mut self, level: &LevelView<'_>) {
        if self.error.is_some() || level.index % self.every != 0 {
            return;
        }
        if let Err(e) = self.write_level(level) {
            self.error = Some(e);
        }
    }
}

/// Reads an `x,t,u,u_t` dump back into slices; `u_x` is rebuilt by centred
/// differences (one-sided at the band edges).
pub fn read_snapshots<R: std::io::BufRead>(input: R) -> Result<Vec<LevelSlice>, SolverError> {
    let bad = |line: usize, reason: String| SolverError::Dump { line, reason };
    let mut slices: Vec<LevelSlice> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let finish = |slice: Option<LevelSlice>, xs: &mut Vec<f64>, slices: &mut Vec<LevelSlice>| {
        if let Some(mut s) = slice {
            let n = s.u.len();
            s.h = if n > 1 { (xs[n - 1] - xs[0]) / (n - 1) as f64 } else { 0.0 };
            s.x0 = xs[0];
            s.ux = (0..n)
                .map(|i| match (i, n) {
                    (_, 1) => 0.0,
                    (0, _) => (s.u[1] - s.u[0]) / s.h,
                    (i, n) if i == n - 1 => (s.u[i] - s.u[i - 1]) / s.h,
                    (i, _) => (s.u[i + 1] - s.u[i - 1]) / (2.0 * s.h),
                })
                .collect();
            slices.push(s);
        }
        xs.clear();
    };
    let mut current: Option<LevelSlice> = None;
    for (k, line) in input.lines().enumerate() {
        let line = line.map_err(|e| bad(k + 1, e.to_string()))?;
        if k == 0 {
            if line.trim() != "x,t,u,u_t" {
                return Err(bad(1, format!("expected header x,t,u,u_t, found {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(k + 1, e.to_string()))?;
        let [x, t, u, ut] = vals[..] else {
            return Err(bad(k + 1, format!("expected 4 columns, found {}", vals.len())));
        };
        if current.as_ref().is_some_and(|c| c.t != t) {
            finish(current.take(), &mut xs, &mut slices);
        }
        let c = current.get_or_insert_with(|| LevelSlice {
            t,
            h: 0.0,
            x0: x,
            u: Vec::new(),
            ut: Vec::new(),
            ux: Vec::new(),
        });
        c.u.push(u);
        c.ut.push(ut);
        xs.push(x);
    }
    finish(current.take(), &mut xs, &mut slices);
    Ok(slices)
}

/// Rolling state of one grid run.
#[derive(Debug, Clone)]
pub struct GridSolution {
    h: f64,
    radius: f64,
    epsilon: f64,
    margin: usize,
    offset: usize,
    t_max: f64,
    prev: Vec<f64>,
    curr: Vec<f64>,
    spare: Vec<f64>,
    src_prev: Vec<f64>,
    ut: Vec<f64>,
    ux: Vec<f64>,
    src: Vec<f64>,
    level: usize,
    thresholds: [f64; 2],
    crossings: [Option<f64>; 2],
    sup_history: Vec<f64>,
    status: RunStatus,
}

impl GridSolution {
    /// Level 0 from the data; level 1 from the exact free wave at `t = h`
    /// plus the Taylor source term `h²/2 · S(x, 0)`.
    pub fn new(spec: &ProblemSpec, cfg: &GridConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let eps = spec.epsilon;
        let data = &spec.data;
        let h = cfg.h;
        let free = spec.is_free();
        let source0 = |x: f64| {
            if free {
                return 0.0;
            }
            let (f, g, df) = data.sample(x);
            spec.source(eps * f, eps * g, eps * df, x, 0.0)
        };
        Ok(Self::from_levels(
            h,
            data.radius(),
            eps,
            cfg.t_max,
            cfg.margin_cells,
            cfg.threshold_for(spec),
            |x| eps * data.sample(x).0,
            |x| free_solution(data, eps, x, h).u + 0.5 * h * h * source0(x),
            source0,
        ))
    }

    /// Generic start from two exact (or approximate) levels and the source at `t = 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_levels(
        h: f64,
        radius: f64,
        epsilon: f64,
        t_max: f64,
        margin: usize,
        threshold: f64,
        level0: impl Fn(f64) -> f64,
        level1: impl Fn(f64) -> f64,
        source0: impl Fn(f64) -> f64,
    ) -> Self {
        let half = ((t_max + radius) / h).ceil() as usize + margin + 3;
        let len = 2 * half + 1;
        let offset = half;
        let mut sol = Self {
            h,
            radius,
            epsilon,
            margin,
            offset,
            t_max,
            prev: vec![0.0; len],
            curr: vec![0.0; len],
            spare: vec![0.0; len],
            src_prev: vec![0.0; len],
            ut: vec![0.0; len],
            ux: vec![0.0; len],
            src: vec![0.0; len],
            level: 1,
            thresholds: [threshold, threshold * SENSITIVITY_FACTOR],
            crossings: [None, None],
            sup_history: Vec::new(),
            status: RunStatus::Running,
        };
        let (lo0, hi0) = sol.band(0);
        for i in lo0..=hi0 {
            let x = sol.x(i);
            sol.prev[i] = level0(x);
            sol.src_prev[i] = source0(x);
        }
        let (lo1, hi1) = sol.band(1);
        for i in lo1..=hi1 {
            sol.curr[i] = level1(sol.x(i));
        }
        let sup0 = sup_abs(&sol.prev[lo0..=hi0]);
        let sup1 = sup_abs(&sol.curr[lo1..=hi1]);
        sol.sup_history.push(sup0);
        sol.sup_history.push(sup0);
        sol.record(sup1);
        sol
    }

    #[inline]
    fn x(&self, i: usize) -> f64 {
        (i as f64 - self.offset as f64) * self.h
    }

    /// Index range computed at level `n`: `|x| <= t_n + R + margin·h`, clipped
    /// so that neighbours stay in bounds.
    fn band(&self, n: usize) -> (usize, usize) {
        let t = n as f64 * self.h;
        let half = ((t + self.radius) / self.h).ceil() as usize + self.margin;
        let half = half.min(self.offset - 1);
        (self.offset - half, self.offset + half)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn time(&self) -> f64 {
        self.level as f64 * self.h
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    /// Sup-norm of `u` per level, starting at level 0.
    pub fn sup_history(&self) -> &[f64] {
        &self.sup_history[1..]
    }

    pub fn threshold(&self) -> f64 {
        self.thresholds[0]
    }

    /// First crossing times of `M` and of `100·M`.
    pub fn crossings(&self) -> (Option<f64>, Option<f64>) {
        (self.crossings[0], self.crossings[1])
    }

    /// `(x, u)` at the current level over the computed band.
    pub fn current(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = self.band(self.level);
        (lo..=hi).map(|i| (self.x(i), self.curr[i])).collect()
    }

    /// `u` at grid node `x = j·h` of the current level (0 outside the array).
    pub fn value_at(&self, j: i64) -> f64 {
        let i = self.offset as i64 + j;
        if i < 0 || i as usize >= self.curr.len() {
            0.0
        } else {
            self.curr[i as usize]
        }
    }

    /// Mutable access to the current level, for fault-injection tests.
    pub fn current_mut(&mut self) -> &mut [f64] {
        &mut self.curr
    }

    fn record(&mut self, sup: f64) {
        let t = self.time();
        let prev_sup = *self.sup_history.last().unwrap_or(&0.0);
        self.sup_history.push(sup);
        for k in 0..2 {
            if self.crossings[k].is_some() {
                continue;
            }
            let m = self.thresholds[k];
            if !sup.is_finite() {
                self.crossings[k] = Some(t);
            } else if sup >= m {
                let t0 = t - self.h;
                let frac = if prev_sup > 0.0 && sup > prev_sup {
                    ((m.ln() - prev_sup.ln()) / (sup.ln() - prev_sup.ln())).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                self.crossings[k] = Some(t0 + frac * self.h);
            }
        }
        if self.status == RunStatus::Running {
            if let Some(t_star) = self.crossings[0] {
                self.status = RunStatus::BlownUp { t_star };
            } else if t >= self.t_max - 1e-9 * self.h {
                self.status = RunStatus::ReachedHorizon;
            }
        }
    }

    /// Advances one level; `observer` sees level `n` with its derivatives.
    pub fn step<S: Source + ?Sized, O: LevelObserver + ?Sized>(
        &mut self,
        spec: &S,
        observer: &mut O,
    ) -> RunStatus {
        let n = self.level;
        let h = self.h;
        let t = n as f64 * h;
        let (lo, hi) = self.band(n + 1);
        let free = spec.is_free();
        let mut sup = 0.0f64;
        for i in lo..=hi {
            let (l, c, r) = (self.curr[i - 1], self.curr[i], self.curr[i + 1]);
            let ux = (r - l) / (2.0 * h);
            let ut = (r + l - 2.0 * self.prev[i]) / (2.0 * h) + 0.5 * h * self.src_prev[i];
            let s = if free {
                0.0
            } else {
                spec.source(c, ut, ux, self.x(i), t)
            };
            self.ux[i] = ux;
            self.ut[i] = ut;
            self.src[i] = s;
            let next = r + l - self.prev[i] + h * h * s;
            self.spare[i] = next;
            let a = next.abs();
            if !(a <= sup) {
                sup = if a.is_nan() { f64::INFINITY } else { a };
            }
        }
        observer.observe(&LevelView {
            index: n,
            t,
            h,
            x0: self.x(lo),
            u: &self.curr[lo..=hi],
            ut: &self.ut[lo..=hi],
            ux: &self.ux[lo..=hi],
            source: &self.src[lo..=hi],
        });
        std::mem::swap(&mut self.prev, &mut self.curr);
        std::mem::swap(&mut self.curr, &mut self.spare);
        std::mem::swap(&mut self.src_prev, &mut self.src);
        self.level += 1;
        self.record(sup);
        self.status
    }

    /// Steps until the horizon, or until the `100·M` threshold (or a
    /// non-finite value) once `M` has been crossed.
    pub fn run<S: Source + ?Sized, O: LevelObserver + ?Sized>(
        &mut self,
        spec: &S,
        observer: &mut O,
    ) -> RunStatus {
        loop {
            if self.time() >= self.t_max - 1e-9 * self.h {
                break;
            }
            if self.crossings[1].is_some() {
                break;
            }
            if let Some(&s) = self.sup_history.last() {
                if !s.is_finite() {
                    break;
                }
            }
            self.step(spec, observer);
        }
        self.status
    }

    /// True iff `|u| <= 1e-12·ε` outside `|x| <= t + R` on both stored levels.
    pub fn light_cone_check(&self) -> bool {
        let tol = 1e-12 * self.epsilon;
        let check = |u: &[f64], t: f64| {
            u.iter().enumerate().all(|(i, v)| {
                let x = self.x(i);
                x.abs() <= t + self.radius + 1e-9 * self.h || v.abs() <= tol
            })
        };
        let t = self.time();
        check(&self.curr, t) && check(&self.prev, t - self.h)
    }
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| {
        if x.is_nan() {
            f64::INFINITY
        } else {
            m.max(x.abs())
        }
    })
}

pub fn light_cone_check(sol: &GridSolution) -> bool {
    sol.light_cone_check()
}

/// Summary of one grid run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub h: f64,
    pub status: RunStatus,
    pub crossing: Option<f64>,
    pub crossing_high: Option<f64>,
    pub final_time: f64,
    pub final_sup: f64,
}

/// One full run at spacing `cfg.h`.
pub fn run_once<O: LevelObserver + ?Sized>(
    spec: &ProblemSpec,
    cfg: &GridConfig,
    observer: &mut O,
) -> Result<RunSummary, SolverError> {
    let mut sol = GridSolution::new(spec, cfg)?;
    let status = sol.run(spec, observer);
    let (crossing, crossing_high) = sol.crossings();
    Ok(RunSummary {
        h: cfg.h,
        status,
        crossing,
        crossing_high,
        final_time: sol.time(),
        final_sup: *sol.sup_history.last().unwrap_or(&0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifespanOutcome {
    BlownUp,
    ReachedHorizon,
}

/// Numerical lifespan with refinement metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanEstimate {
    pub outcome: LifespanOutcome,
    /// Extrapolated blow-up time, or `t_max` when the horizon was reached.
    pub t_num: f64,
    pub runs: Vec<RunSummary>,
    pub extrapolated: Option<f64>,
    /// `|T(h/2^{k-1}) - T(h/2^k)|` for the two finest levels.
    pub uncertainty: f64,
    /// `|T(M) - T(100M)| / T(M)` on the finest grid.
    pub threshold_sensitivity: Option<f64>,
    pub threshold: f64,
}

/// Runs at `h, h/2, …` and Richardson-extrapolates the first threshold crossing.
pub fn estimate_lifespan(spec: &ProblemSpec, cfg: &GridConfig) -> Result<LifespanEstimate, SolverError> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.refinement_levels);
    for k in 0..cfg.refinement_levels {
        let level_cfg = cfg.with_h(cfg.h / f64::powi(2.0, k as i32));
        runs.push(run_once(spec, &level_cfg, &mut ())?);
    }
    let values: Vec<Option<f64>> = runs.iter().map(|r| r.crossing).collect();
    let threshold = cfg.threshold_for(spec);
    if values.iter().all(Option::is_none) {
        return Ok(LifespanEstimate {
            outcome: LifespanOutcome::ReachedHorizon,
            t_num: cfg.t_max,
            runs,
            extrapolated: None,
            uncertainty: 0.0,
            threshold_sensitivity: None,
            threshold,
        });
    }
    if values.iter().any(Option::is_none) {
        return Err(SolverError::Mixed { values });
    }
    let times: Vec<f64> = values.iter().map(|v| v.unwrap()).collect();
    let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = times.iter().cloned().fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    if spread > 0.2 {
        return Err(SolverError::Inconclusive { values, spread });
    }
    let fine = times[times.len() - 1];
    let coarse = times[times.len() - 2];
    let extrapolated = fine + (fine - coarse) / 3.0;
    let last = runs.last().unwrap();
    let threshold_sensitivity = match (last.crossing, last.crossing_high) {
        (Some(a), Some(b)) => Some((a - b).abs() / a),
        _ => None,
    };
    Ok(LifespanEstimate {
        outcome: LifespanOutcome::BlownUp,
        t_num: extrapolated,
        runs,
        extrapolated: Some(extrapolated),
        uncertainty: (fine - coarse).abs(),
        threshold_sensitivity,
        threshold,
    })
}
