//! Least-squares fits of `T(ε)` against power, exponential and
//! log-corrected laws.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regimes::{evaluate_law, InverseKind, LawKind};

/// Minimum R² for a Consistent verdict.
pub const MIN_R_SQUARED: f64 = 0.98;
pub const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("at least {MIN_POINTS} points required, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate design: all abscissae equal")]
    Degenerate,
    #[error("non-positive or non-finite value at epsilon = {0}")]
    BadPoint(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitLaw {
    /// `ln T = intercept + slope · ln ε`
    Power,
    /// `ln T = intercept + slope · ε^{-e}`
    Exp,
    /// `T = evaluate_law(law, ε, C)`, `intercept = ln C`
    LogCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub law: FitLaw,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
    pub r_squared: f64,
    /// Residuals in `ln T`, in input order.
    pub residuals: Vec<f64>,
    /// Exponent the fit is judged against, if any.
    pub predicted: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// R² of the competing power fit (exp fits only).
    pub competing_r_squared: Option<f64>,
    /// Which simple law explains the data better (exp fits only).
    pub preferred: Option<FitLaw>,
}

impl FitReport {
    /// `-slope` for a power fit.
    pub fn exponent(&self) -> f64 {
        -self.slope
    }
}

struct Ols {
    slope: f64,
    intercept: f64,
    slope_se: f64,
    intercept_se: f64,
    r_squared: f64,
    residuals: Vec<f64>,
}

fn ols(x: &[f64], y: &[f64]) -> Result<Ols, FitError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) || x.iter().all(|v| *v == x[0]) {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (intercept + slope * a)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r_squared = r_squared(ss_res, ss_tot);
    let s2 = if x.len() > 2 { ss_res / (n - 2.0) } else { 0.0 };
    Ok(Ols {
        slope,
        intercept,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
        r_squared,
        residuals,
    })
}

/// `1 - SS_res/SS_tot`; a perfectly constant sample counts as fully explained
/// when the fit reproduces it.
fn r_squared(ss_res: f64, ss_tot: f64) -> f64 {
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= 1e-24 {
        1.0
    } else {
        0.0
    }
}

fn checked(points: &[(f64, f64)]) -> Result<(), FitError> {
    if points.len() < MIN_POINTS {
        return Err(FitError::TooFewPoints(points.len()));
    }
    for &(e, t) in points {
        if !(e > 0.0 && e.is_finite() && t > 0.0 && t.is_finite()) {
            return Err(FitError::BadPoint(e));
        }
    }
    Ok(())
}

fn slope_verdict(exponent: f64, r2: f64, predicted: Option<f64>, tolerance: f64) -> Verdict {
    let Some(pred) = predicted else {
        return Verdict::Inconclusive;
    };
    if r2 < MIN_R_SQUARED {
        return Verdict::Inconclusive;
    }
    if (exponent - pred).abs() <= tolerance * pred.abs() {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    }
}

/// OLS on `(ln ε, ln T)`; the fitted exponent is `-slope`.
pub fn fit_power_law(points: &[(f64, f64)], predicted: Option<f64>, tolerance: f64) -> Result<FitReport, FitError> {
    checked(points)?;
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let f = ols(&x, &y)?;
    let verdict = slope_verdict(-f.slope, f.r_squared, predicted, tolerance);
    Ok(FitReport {
        law: FitLaw::Power,
        slope: f.slope,
        slope_se: f.slope_se,
        intercept: f.intercept,
        intercept_se: f.intercept_se,
        r_squared: f.r_squared,
        residuals: f.residuals,
        predicted,
        tolerance,
        verdict,
        competing_r_squared: None,
        preferred: None,
    })
}

/// OLS of `ln T` against `ε^{-e}`, compared with the competing power fit.
/// Consistent when the exp fit is good, has positive slope and beats the
/// power fit on R²; Inconsistent when the power fit wins with R² ≥ 0.98.
pub fn fit_exp_law(points: &[(f64, f64)], exponent: f64, tolerance: f64) -> Result<FitReport, FitError> {
    checked(points)?;
    let x: Vec<f64> = points.iter().map(|p| p.0.powf(-exponent)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let f = ols(&x, &y)?;
    let power = fit_power_law(points, None, tolerance)?;
    let preferred = if f.r_squared >= power.r_squared {
        FitLaw::Exp
    } else {
        FitLaw::Power
    };
    let verdict = if preferred == FitLaw::Exp && f.r_squared >= MIN_R_SQUARED && f.slope > 0.0 {
        Verdict::Consistent
    } else if preferred == FitLaw::Power && power.r_squared >= MIN_R_SQUARED {
        Verdict::Inconsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(FitReport {
        law: FitLaw::Exp,
        slope: f.slope,
        slope_se: f.slope_se,
        intercept: f.intercept,
        intercept_se: f.intercept_se,
        r_squared: f.r_squared,
        residuals: f.residuals,
        predicted: Some(exponent),
        tolerance,
        verdict,
        competing_r_squared: Some(power.r_squared),
        preferred: Some(preferred),
    })
}

/// Fits the constant `C` of a log-corrected law by golden-section search on
/// `ln C` and judges the curve by its residual norm: Consistent when the RMS
/// relative misfit is within `tolerance`, Inconsistent when it is not but a
/// plain power law fits with R² ≥ 0.98, Inconclusive otherwise.
pub fn fit_log_corrected(
    points: &[(f64, f64)],
    inverse: &InverseKind<f64>,
    exponent: f64,
    tolerance: f64,
) -> Result<FitReport, FitError> {
    checked(points)?;
    inverse.check().map_err(|_| FitError::Degenerate)?;
    let law = LawKind::LogInverse {
        inverse: *inverse,
        exponent,
    };
    let residuals_for = |ln_c: f64| -> Vec<f64> {
        points
            .iter()
            .map(|&(e, t)| match evaluate_law(&law, e, ln_c.exp()) {
                Ok(v) if v > 0.0 && v.is_finite() => t.ln() - v.ln(),
                _ => f64::INFINITY,
            })
            .collect()
    };
    let cost = |ln_c: f64| residuals_for(ln_c).iter().map(|r| r * r).sum::<f64>();

    // Coarse scan then golden section; the misfit is unimodal in ln C
    // because every law is increasing in its argument.
    let mut best = -40.0;
    let mut best_cost = f64::INFINITY;
    for i in 0..=160 {
        let c = -40.0 + 0.5 * i as f64;
        let v = cost(c);
        if v < best_cost {
            best_cost = v;
            best = c;
        }
    }
    let (mut a, mut b) = (best - 0.5, best + 0.5);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
        if b - a < 1e-13 {
            break;
        }
    }
    let ln_c = 0.5 * (a + b);
    let residuals = residuals_for(ln_c);
    let n = points.len() as f64;
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let rms = (ss_res / n).sqrt();
    let power = fit_power_law(points, None, tolerance)?;
    let verdict = if rms <= tolerance {
        Verdict::Consistent
    } else if power.r_squared >= MIN_R_SQUARED {
        Verdict::Inconsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(FitReport {
        law: FitLaw::LogCorrected,
        slope: exponent,
        slope_se: 0.0,
        intercept: ln_c,
        intercept_se: 0.0,
        r_squared: r_squared(ss_res, ss_tot),
        residuals,
        predicted: Some(exponent),
        tolerance,
        verdict,
        competing_r_squared: Some(power.r_squared),
        preferred: None,
    })
}
