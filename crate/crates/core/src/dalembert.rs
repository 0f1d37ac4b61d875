//! Exact free waves and quadratured Duhamel operators.
//!
//! `L(v)(x,t) = ½ ∫₀ᵗ ds ∫_{x-t+s}^{x+t-s} v(y,s) dy` integrates a source over
//! the backward characteristic triangle; `L'(v) = ∂_t L(v)` reduces to
//! `½ ∫₀ᵗ [v(x+t-s, s) + v(x-t+s, s)] ds` and is quadratured from that form
//! directly.

use thiserror::Error;

use crate::model::InitialData;

#[derive(Debug, Error, PartialEq)]
pub enum DalembertError {
    #[error("non-finite field value at y={y}, s={s}")]
    NonFinite { y: f64, s: f64 },
    #[error("quadrature step must be positive, got {0}")]
    BadStep(f64),
    #[error("sample point (x={x}, t={t}) lies outside the interior domain t - |x| >= R")]
    OutsideInterior { x: f64, t: f64 },
    #[error("empty sample")]
    EmptySample,
}

/// `ε u⁰` and its first derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeWave {
    pub u: f64,
    pub ut: f64,
    pub ux: f64,
}

/// d'Alembert's formula scaled by ε; the `g` integral uses the exact
/// antiderivative of the bump family.
pub fn free_solution(data: &InitialData, epsilon: f64, x: f64, t: f64) -> FreeWave {
    let (f, g) = (data.f(), data.g());
    let (xp, xm) = (x + t, x - t);
    let u = 0.5 * (f.value(xp) + f.value(xm)) + 0.5 * (g.antiderivative(xp) - g.antiderivative(xm));
    let ut = 0.5 * (f.derivative(xp) - f.derivative(xm)) + 0.5 * (g.value(xp) + g.value(xm));
    let ux = 0.5 * (f.derivative(xp) + f.derivative(xm)) + 0.5 * (g.value(xp) - g.value(xm));
    FreeWave {
        u: epsilon * u,
        ut: epsilon * ut,
        ux: epsilon * ux,
    }
}

/// A source field `v(x,t)` supported in the cone `|x| <= t + R`.
pub trait SpaceTimeField {
    /// Raw value; only called inside the support.
    fn eval(&self, x: f64, t: f64) -> f64;

    /// Support radius `R`; `f64::INFINITY` for fields without compact support.
    fn support_radius(&self) -> f64 {
        f64::INFINITY
    }

    fn value(&self, x: f64, t: f64) -> f64 {
        if x.abs() > t + self.support_radius() {
            0.0
        } else {
            self.eval(x, t)
        }
    }
}

/// Adapter turning a closure into a [`SpaceTimeField`].
pub struct ClosureField<F> {
    f: F,
    radius: f64,
}

impl<F: Fn(f64, f64) -> f64> ClosureField<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            radius: f64::INFINITY,
        }
    }

    pub fn with_support(f: F, radius: f64) -> Self {
        Self { f, radius }
    }
}

impl<F: Fn(f64, f64) -> f64> SpaceTimeField for ClosureField<F> {
    fn eval(&self, x: f64, t: f64) -> f64 {
        (self.f)(x, t)
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// Quadrature resolution; the step is usually tied to the solver grid spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub step: f64,
}

impl QuadConfig {
    pub fn new(step: f64) -> Self {
        Self { step }
    }

    fn check(&self) -> Result<(), DalembertError> {
        if self.step > 0.0 && self.step.is_finite() {
            Ok(())
        } else {
            Err(DalembertError::BadStep(self.step))
        }
    }
}

fn checked(v: f64, y: f64, s: f64) -> Result<f64, DalembertError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DalembertError::NonFinite { y, s })
    }
}

/// `L(v)(x,t)`: midpoint rule in `s`, trapezoid rule in `y`, second order.
pub fn duhamel_l<V: SpaceTimeField + ?Sized>(
    v: &V,
    x: f64,
    t: f64,
    quad: QuadConfig,
) -> Result<f64, DalembertError> {
    quad.check()?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let radius = v.support_radius();
    let ns = (t / quad.step - 1e-9).ceil().max(1.0) as usize;
    let ds = t / ns as f64;
    let mut total = 0.0;
    for k in 0..ns {
        let s = (k as f64 + 0.5) * ds;
        let mut lo = x - t + s;
        let mut hi = x + t - s;
        if radius.is_finite() {
            lo = lo.max(-(s + radius));
            hi = hi.min(s + radius);
        }
        if hi <= lo {
            continue;
        }
        let ny = ((hi - lo) / quad.step - 1e-9).ceil().max(1.0) as usize;
        let dy = (hi - lo) / ny as f64;
        let mut inner = 0.5 * (checked(v.value(lo, s), lo, s)? + checked(v.value(hi, s), hi, s)?);
        for m in 1..ny {
            let y = lo + m as f64 * dy;
            inner += checked(v.value(y, s), y, s)?;
        }
        total += inner * dy;
    }
    Ok(0.5 * total * ds)
}

/// `L'(v)(x,t) = ½ ∫₀ᵗ [v(x+t-s, s) + v(x-t+s, s)] ds`, midpoint rule.
pub fn duhamel_lt<V: SpaceTimeField + ?Sized>(
    v: &V,
    x: f64,
    t: f64,
    quad: QuadConfig,
) -> Result<f64, DalembertError> {
    quad.check()?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let ns = (t / quad.step - 1e-9).ceil().max(1.0) as usize;
    let ds = t / ns as f64;
    let mut total = 0.0;
    for k in 0..ns {
        let s = (k as f64 + 0.5) * ds;
        let (yr, yl) = (x + t - s, x - t + s);
        total += checked(v.value(yr, s), yr, s)? + checked(v.value(yl, s), yl, s)?;
    }
    Ok(0.5 * total * ds)
}

/// `sup |ε u⁰|` over sample points of the interior domain `t - |x| >= R`.
pub fn huygens_residual(
    data: &InitialData,
    epsilon: f64,
    samples: &[(f64, f64)],
) -> Result<f64, DalembertError> {
    if samples.is_empty() {
        return Err(DalembertError::EmptySample);
    }
    let radius = data.radius();
    let mut sup = 0.0f64;
    for &(x, t) in samples {
        if t - x.abs() < radius {
            return Err(DalembertError::OutsideInterior { x, t });
        }
        sup = sup.max(free_solution(data, epsilon, x, t).u.abs());
    }
    Ok(sup)
}
