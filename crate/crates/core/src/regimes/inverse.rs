//! Log-corrected laws `φ`, `ψ_p`, `φ₁`, `ψ₁`, `ψ₂`, `b log(1+b)` and their inverses.

use serde::{Deserialize, Serialize};

use super::RegimeError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InverseKind<S> {
    /// `s log(2+s)`
    Phi,
    /// `s log^p(2+s)`
    Psi { p: S },
    /// `s^{-a} log(2+s)`, `a < 0`
    Phi1 { a: S },
    /// `s^{-pa} log(2+s)`, `a < 0`
    Psi1 { p: S, a: S },
    /// `s^{-b} log^{p-1}(2+s)`, `b < 0`
    Psi2 { p: S, b: S },
    /// `s log(1+s)`; `b(ε)` solves `b log(1+b) = ε^{-2}`.
    BImplicit,
}

impl<S: Clone + num_traits::ToPrimitive> InverseKind<S> {
    pub fn to_f64(&self) -> InverseKind<f64> {
        let f = |v: &S| v.to_f64().unwrap_or(f64::NAN);
        match self {
            InverseKind::Phi => InverseKind::Phi,
            InverseKind::Psi { p } => InverseKind::Psi { p: f(p) },
            InverseKind::Phi1 { a } => InverseKind::Phi1 { a: f(a) },
            InverseKind::Psi1 { p, a } => InverseKind::Psi1 { p: f(p), a: f(a) },
            InverseKind::Psi2 { p, b } => InverseKind::Psi2 { p: f(p), b: f(b) },
            InverseKind::BImplicit => InverseKind::BImplicit,
        }
    }
}

impl<S> InverseKind<S> {
    pub fn name(&self) -> &'static str {
        match self {
            InverseKind::Phi => "phi",
            InverseKind::Psi { .. } => "psi",
            InverseKind::Phi1 { .. } => "phi1",
            InverseKind::Psi1 { .. } => "psi1",
            InverseKind::Psi2 { .. } => "psi2",
            InverseKind::BImplicit => "b_implicit",
        }
    }
}

impl InverseKind<f64> {
    /// Checks that the law is strictly increasing from 0 on `(0, ∞)`.
    pub fn check(&self) -> Result<(), RegimeError> {
        let bad = |m: &str| Err(RegimeError::NotMonotone(m.into()));
        match *self {
            InverseKind::Phi | InverseKind::BImplicit => Ok(()),
            InverseKind::Psi { p } if !(p > 0.0) => bad("psi requires p > 0"),
            InverseKind::Phi1 { a } if !(a < 0.0) => bad("phi1 requires a < 0"),
            InverseKind::Psi1 { p, a } if !(a < 0.0 && p > 0.0) => bad("psi1 requires a < 0 and p > 0"),
            InverseKind::Psi2 { p, b } if !(b < 0.0 && p >= 1.0) => bad("psi2 requires b < 0 and p >= 1"),
            _ => Ok(()),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        let l = (2.0 + s).ln();
        match *self {
            InverseKind::Phi => s * l,
            InverseKind::Psi { p } => s * l.powf(p),
            InverseKind::Phi1 { a } => s.powf(-a) * l,
            InverseKind::Psi1 { p, a } => s.powf(-p * a) * l,
            InverseKind::Psi2 { p, b } => s.powf(-b) * l.powf(p - 1.0),
            InverseKind::BImplicit => s * s.ln_1p(),
        }
    }
}

/// `s > 0` with `law(s) = y`, by bracketed bisection to relative `1e-12`.
pub fn invert_law(kind: &InverseKind<f64>, y: f64) -> Result<f64, RegimeError> {
    kind.check()?;
    if !(y > 0.0 && y.is_finite()) {
        return Err(RegimeError::Domain(format!("y must be positive and finite, got {y}")));
    }
    let mut hi = 1.0f64;
    while kind.value(hi) < y {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(RegimeError::Domain(format!("no bracket found for y = {y}")));
        }
    }
    let mut lo = 0.5 * hi;
    while kind.value(lo) >= y {
        hi = lo;
        lo *= 0.5;
        if lo == 0.0 {
            return Ok(hi);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kind.value(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
