//! The moment functional `F(t) = ∫u dx`, its growth windows, and an adaptive
//! ODE oracle for the comparison problem `F'' = c (t+R)^{-(r-1)} |F|^r`.
//!
//! `F''` is accumulated from the source (`F'' = ∫S dx`), never by differencing
//! `F`. On the diamond grid the identity is discrete-exact: the second
//! difference of `h·Σu` equals `h²·(h·ΣS)` up to rounding.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ProblemSpec;
use crate::solver::{LevelObserver, LevelSlice, LevelView};

#[derive(Debug, Error, PartialEq)]
pub enum FunctionalError {
    #[error("fit window [{start}, {end}] holds {levels} levels, at least 10 required")]
    WindowTooShort { start: f64, end: f64, levels: usize },
    #[error("no blow-up before horizon {horizon} (F = {final_f:e})")]
    NoBlowup { horizon: f64, final_f: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("step budget exhausted at t = {0}")]
    StepBudget(f64),
}

/// `F`, `F''` and the per-term parts of `F''` at each stored level.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub f2: Vec<f64>,
    /// `f2_terms[k][i]`: contribution of term `k` at level `i`.
    pub f2_terms: Vec<Vec<f64>>,
    /// `F(0) = ε∫f`.
    pub f0: f64,
    /// `F'(0) = ε∫g`.
    pub f1: f64,
}

impl MomentSeries {
    pub fn new(spec: &ProblemSpec) -> Self {
        Self {
            f2_terms: vec![Vec::new(); spec.terms.len()],
            f0: spec.epsilon * spec.data.f_mean(),
            f1: spec.epsilon * spec.data.g_mean(),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, spec: &ProblemSpec, t: f64, h: f64, x0: f64, u: &[f64], ut: &[f64], ux: &[f64]) {
        self.times.push(t);
        self.f.push(h * u.iter().sum::<f64>());
        let mut total = 0.0;
        for (k, term) in spec.terms.iter().enumerate() {
            let part: f64 = (0..u.len())
                .map(|i| term.evaluate(u[i], ut[i], ux[i], x0 + i as f64 * h, t))
                .sum::<f64>()
                * h;
            self.f2_terms[k].push(part);
            total += part;
        }
        self.f2.push(total);
    }

    /// Nonlinear part `F(t) - F(0) - t F'(0)`.
    pub fn nonlinear_part(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.f)
            .map(|(t, f)| f - self.f0 - t * self.f1)
            .collect()
    }

    /// Max `|(F_{n+1} - 2F_n + F_{n-1})/h² - F''_n|` over interior levels
    /// (requires every level to be stored).
    pub fn second_difference_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.len().saturating_sub(1) {
            let h = self.times[i + 1] - self.times[i];
            let d2 = (self.f[i + 1] - 2.0 * self.f[i] + self.f[i - 1]) / (h * h);
            worst = worst.max((d2 - self.f2[i]).abs());
        }
        worst
    }

    /// Writes `t,F,F2,window` rows; `window` is the index of the fit window
    /// containing `t`, or empty.
    pub fn write_csv<W: Write>(&self, mut out: W, windows: &[(f64, f64)]) -> std::io::Result<()> {
        writeln!(out, "t,F,F2,window")?;
        for i in 0..self.len() {
            let t = self.times[i];
            let w = windows
                .iter()
                .position(|&(a, b)| t >= a && t <= b)
                .map(|k| k.to_string())
                .unwrap_or_default();
            writeln!(out, "{},{},{},{}", t, self.f[i], self.f2[i], w)?;
        }
        Ok(())
    }
}

/// Builds a series from stored slices.
pub fn moment_series(slices: &[LevelSlice], spec: &ProblemSpec) -> MomentSeries {
    let mut series = MomentSeries::new(spec);
    for s in slices {
        series.push(spec, s.t, s.h, s.x0, &s.u, &s.ut, &s.ux);
    }
    series
}

/// Accumulates the series while the solver runs.
pub struct MomentRecorder<'a> {
    spec: &'a ProblemSpec,
    pub series: MomentSeries,
}

impl<'a> MomentRecorder<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Self {
        Self {
            spec,
            series: MomentSeries::new(spec),
        }
    }
}

impl LevelObserver for MomentRecorder<'_> {
    fn observe(&mut self, lv: &LevelView<'_>) {
        self.series.push(self.spec, lv.t, lv.h, lv.x0, lv.u, lv.ut, lv.ux);
    }
}

/// `c` in `F'' >= c (t+R)^{-(r-1)} |F|^r` from Hölder on a support of width `2(t+R)`.
pub fn holder_constant(b: f64, r: f64) -> f64 {
    b * 2f64.powf(-(r - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub threshold: f64,
    pub horizon: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            threshold: 1e12,
            horizon: 1e8,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeBlowup {
    /// Escape time at the tighter tolerance.
    pub t_star: f64,
    /// Escape time at the base tolerance.
    pub t_star_coarse: f64,
    /// `|t_star - t_star_coarse| / t_star`.
    pub relative_change: f64,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn escape_time(
    rhs: impl Fn(f64, [f64; 2]) -> [f64; 2],
    y0: [f64; 2],
    opts: &OdeOptions,
) -> Result<f64, FunctionalError> {
    let scale0 = y0[0].abs() + y0[1].abs();
    if scale0 == 0.0 {
        return Err(FunctionalError::NoBlowup {
            horizon: opts.horizon,
            final_f: 0.0,
        });
    }
    let atol = opts.rtol * 1e-3 * scale0;
    let mut t = 0.0f64;
    let mut y = y0;
    let mut h = 1e-3f64;
    let mut k = [[0.0; 2]; 7];
    k[0] = rhs(t, y);
    for _ in 0..opts.max_steps {
        if t >= opts.horizon {
            return Err(FunctionalError::NoBlowup {
                horizon: opts.horizon,
                final_f: y[0],
            });
        }
        h = h.min(opts.horizon - t);
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += h * A[s][j] * kj[0];
                ys[1] += h * A[s][j] * kj[1];
            }
            k[s] = rhs(t + C[s] * h, ys);
        }
        let mut y_new = y;
        let mut err = 0.0f64;
        for i in 0..2 {
            for s in 0..6 {
                y_new[i] += h * A[6][s] * k[s][i];
            }
            let e: f64 = (0..7).map(|s| h * E[s] * k[s][i]).sum();
            let sc = atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !y_new[0].is_finite() || !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            if y_new[0].abs() >= opts.threshold {
                let (a, b) = (y[0].abs().max(1e-300).ln(), y_new[0].abs().ln());
                let frac = if b > a {
                    ((opts.threshold.ln() - a) / (b - a)).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                return Ok(t + frac * h);
            }
            t += h;
            y = y_new;
            k[0] = k[6];
        }
        let factor = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
        h *= factor.clamp(0.2, 5.0);
    }
    Err(FunctionalError::StepBudget(t))
}

/// Escape time of `F'' = c (t+R)^{-(r-1)} |F|^r`, `F(0) = F0`, `F'(0) = F1`,
/// confirmed by a rerun at tolerance `rtol/32`.
pub fn ode_comparison_blowup(
    r: f64,
    radius: f64,
    f0: f64,
    f1: f64,
    c: f64,
    opts: &OdeOptions,
) -> Result<OdeBlowup, FunctionalError> {
    if !(r > 1.0 && c > 0.0 && radius > 0.0 && f0.is_finite() && f1.is_finite()) {
        return Err(FunctionalError::Invalid("r > 1, c > 0, R > 0 required".into()));
    }
    let rhs = |t: f64, y: [f64; 2]| [y[1], c * (t + radius).powf(1.0 - r) * y[0].abs().powf(r)];
    let coarse = escape_time(rhs, [f0, f1], opts)?;
    let tight = OdeOptions {
        rtol: opts.rtol / 32.0,
        ..*opts
    };
    let fine = escape_time(rhs, [f0, f1], &tight)?;
    Ok(OdeBlowup {
        t_star: fine,
        t_star_coarse: coarse,
        relative_change: (fine - coarse).abs() / fine,
    })
}

/// One power-law fit `N(t) ≈ C t^κ` over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub start: f64,
    pub end: f64,
    pub levels: usize,
    /// Exponent fitted to the nonlinear part `F - F(0) - tF'(0)`.
    pub kappa: f64,
    /// Exponent fitted to `F` itself.
    pub kappa_raw: f64,
    pub r_squared: f64,
    /// `ε^{(p+q)(r-1)} t^{r+1}` at the window end.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTrace {
    pub windows: Vec<WindowFit>,
    /// False when no window shows `F` growing faster than linearly.
    pub superlinear: bool,
}

impl GrowthTrace {
    pub fn verdict(&self) -> &'static str {
        if self.superlinear {
            "superlinear growth"
        } else {
            "no superlinear growth"
        }
    }
}

fn loglog_slope(ts: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| **t > 0.0 && **y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, r2))
}

/// Early window: from `2R` until `F''` has doubled from its value there.
/// Late window: from the first time `F''` exceeds 100× that value to the
/// end of the series. Either is `None` when the series never gets there.
pub fn auto_windows(series: &MomentSeries, radius: f64) -> (Option<(f64, f64)>, Option<(f64, f64)>) {
    let start = series.times.iter().position(|&t| t >= 2.0 * radius);
    let Some(i0) = start else {
        return (None, None);
    };
    let base = series.f2[i0].abs();
    let end_early = series.f2[i0..]
        .iter()
        .position(|v| v.abs() > 2.0 * base)
        .map(|k| i0 + k);
    let early = end_early.map(|i1| (series.times[i0], series.times[i1]));
    let late = series.f2[i0..]
        .iter()
        .position(|v| v.abs() > 100.0 * base)
        .map(|k| (series.times[i0 + k], *series.times.last().unwrap()));
    (early, late)
}

/// Fits `F ≈ C t^κ` (nonlinear part and raw) on each window and reports the
/// gain factor `ε^{(p+q)(r-1)} t^{r+1}` at each window end.
pub fn combined_lower_bound_trace(
    series: &MomentSeries,
    p: f64,
    q: f64,
    r: f64,
    epsilon: f64,
    windows: &[(f64, f64)],
) -> Result<GrowthTrace, FunctionalError> {
    let nonlinear = series.nonlinear_part();
    let scale = series.f0.abs() + series.f1.abs() * series.times.last().copied().unwrap_or(0.0);
    let mut fits = Vec::with_capacity(windows.len());
    let mut superlinear = false;
    for &(start, end) in windows {
        let idx: Vec<usize> = (0..series.len())
            .filter(|&i| series.times[i] >= start && series.times[i] <= end)
            .collect();
        if idx.len() < 10 {
            return Err(FunctionalError::WindowTooShort {
                start,
                end,
                levels: idx.len(),
            });
        }
        let ts: Vec<f64> = idx.iter().map(|&i| series.times[i]).collect();
        let ns: Vec<f64> = idx.iter().map(|&i| nonlinear[i]).collect();
        let fs: Vec<f64> = idx.iter().map(|&i| series.f[i]).collect();
        let significant = ns.iter().any(|v| v.abs() > 1e-10 * scale.max(1e-300));
        let (kappa, r_squared) = if significant {
            loglog_slope(&ts, &ns).unwrap_or((0.0, 0.0))
        } else {
            (0.0, 0.0)
        };
        let kappa_raw = loglog_slope(&ts, &fs).map(|(k, _)| k).unwrap_or(0.0);
        if significant && kappa > 1.5 && kappa_raw > 1.0 {
            superlinear = true;
        }
        fits.push(WindowFit {
            start,
            end,
            levels: idx.len(),
            kappa,
            kappa_raw,
            r_squared,
            gain: epsilon.powf((p + q) * (r - 1.0)) * end.powf(r + 1.0),
        });
    }
    Ok(GrowthTrace {
        windows: fits,
        superlinear,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitialData, NonlinearTerm, Profile, BUMP_INTEGRAL};
    use crate::solver::{GridConfig, GridSolution};

    fn run_series(spec: &ProblemSpec, t_max: f64) -> MomentSeries {
        let cfg = GridConfig::for_radius(spec.radius(), t_max);
        let mut sol = GridSolution::new(spec, &cfg).unwrap();
        let mut rec = MomentRecorder::new(spec);
        sol.run(spec, &mut rec);
        rec.series
    }

    #[test]
    fn free_moments() {
        let amp = 1.0 / BUMP_INTEGRAL;
        let data = InitialData::new(Profile::single(amp, 0.0, 1.0), Profile::zero(), 1.5).unwrap();
        let free = ProblemSpec::new(vec![], data, 0.3, "free").unwrap();
        let s = run_series(&free, 5.0);
        let worst = s.f.iter().map(|f| (f - 0.3).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst:e}");
        let data = InitialData::new(Profile::zero(), Profile::single(amp, 0.0, 1.0), 1.5).unwrap();
        let free = ProblemSpec::new(vec![], data, 0.3, "free").unwrap();
        let s = run_series(&free, 5.0);
        for (t, f) in s.times.iter().zip(&s.f) {
            assert!((f - 0.3 * t).abs() < 1e-10, "t={t}");
        }
        let trace = combined_lower_bound_trace(&s, 2.0, 0.0, 3.0, 0.3, &[(1.0, 4.0)]).unwrap();
        assert!(!trace.superlinear);
        assert_eq!(trace.verdict(), "no superlinear growth");
    }

    #[test]
    fn power_source_is_convex_and_discrete_exact() {
        let data = InitialData::new(Profile::single(1.0, 0.0, 1.0), Profile::zero(), 1.5).unwrap();
        let spec = ProblemSpec::new(vec![NonlinearTerm::power(2.0)], data, 0.3, "b").unwrap();
        let s = run_series(&spec, 3.0);
        assert!(s.f2.iter().all(|v| *v >= 0.0));
        let scale = s.f2.iter().cloned().fold(0.0, f64::max);
        assert!(s.second_difference_defect() < 1e-9 * scale.max(1.0));
    }

    #[test]
    fn window_too_short() {
        let s = MomentSeries {
            times: vec![0.0, 0.1, 0.2],
            f: vec![1.0; 3],
            f2: vec![0.0; 3],
            ..Default::default()
        };
        assert!(matches!(
            combined_lower_bound_trace(&s, 2.0, 0.0, 3.0, 0.1, &[(0.0, 0.2)]),
            Err(FunctionalError::WindowTooShort { levels: 3, .. })
        ));
    }

    #[test]
    fn ode_examples() {
        let opts = OdeOptions::default();
        let b = ode_comparison_blowup(2.0, 1.0, 1.0, 0.0, 1.0, &opts).unwrap();
        assert!(b.t_star.is_finite() && b.t_star > 0.0);
        assert!(b.relative_change < 0.005);
        assert!(matches!(
            ode_comparison_blowup(2.0, 1.0, 0.0, 0.0, 1.0, &opts),
            Err(FunctionalError::NoBlowup { .. })
        ));
        assert_eq!(holder_constant(1.0, 3.0), 0.25);
    }

    #[test]
    fn ode_matches_closed_form_for_autonomous_case() {
        // With r = 2 and R huge, (t+R)^{-1} ≈ 1/R: F'' = F²/R, F' = F sqrt(2F/3R)
        // has escape time ∫_{F0}^∞ dF / sqrt(2F³/3R) = 2 sqrt(3R/(2F0)).
        let radius = 1e9;
        let f0 = 1.0f64;
        let f1 = (2.0 * f0.powi(3) / (3.0 * radius)).sqrt();
        let b = ode_comparison_blowup(2.0, radius, f0, f1, 1.0, &OdeOptions::default()).unwrap();
        let exact = 2.0 * (3.0 * radius / (2.0 * f0)).sqrt();
        assert!((b.t_star - exact).abs() / exact < 1e-3, "{} vs {exact}", b.t_star);
    }
}
