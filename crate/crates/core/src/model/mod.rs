//! Problem description: nonlinear terms, coefficient weights, initial data.
//!
//! The model equation is `u_tt - u_xx = Σ_k w_k(x,t) · N_k(u, u_t, u_x)` with
//! data `u(x,0) = ε f(x)`, `u_t(x,0) = ε g(x)`. All types are immutable after
//! construction.

pub mod bump;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bump::{Bump, Profile, BUMP_INTEGRAL};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("source overflowed at x={x}, t={t}")]
    Blowup { x: f64, t: f64 },
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::Invalid(msg.into())
}

/// Japanese bracket `⟨y⟩ = sqrt(1 + y²)`.
#[inline]
pub fn bracket(y: f64) -> f64 {
    (1.0 + y * y).sqrt()
}

/// `|x|^e`, with `|x|^0 = 1` and `0^e = 0` for `e > 0`.
#[inline]
pub fn abs_pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if x == 0.0 {
        0.0
    } else {
        x.abs().powf(e)
    }
}

/// Space-time coefficient in front of a nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant { value: f64 },
    /// `1 / (⟨t+⟨x⟩⟩^{1+a} ⟨t-⟨x⟩⟩^{1+b} ⟨x⟩^{1+c})`; an exponent parameter of
    /// `-1` switches its factor off.
    Characteristic { a: f64, b: f64, c: f64 },
    /// `(1+t)^{-k}`.
    TimePower { k: f64 },
    Zero,
}

impl WeightSpec {
    pub fn constant(value: f64) -> Self {
        WeightSpec::Constant { value }
    }

    pub fn characteristic(a: f64, b: f64, c: f64) -> Self {
        WeightSpec::Characteristic { a, b, c }
    }

    pub fn evaluate(&self, x: f64, t: f64) -> f64 {
        match *self {
            WeightSpec::Constant { value } => value,
            WeightSpec::Zero => 0.0,
            WeightSpec::TimePower { k } => (1.0 + t).powf(-k),
            WeightSpec::Characteristic { a, b, c } => {
                let bx = bracket(x);
                let mut w = 1.0;
                if a != -1.0 {
                    w *= bracket(t + bx).powf(-(1.0 + a));
                }
                if b != -1.0 {
                    w *= bracket(t - bx).powf(-(1.0 + b));
                }
                if c != -1.0 {
                    w *= bx.powf(-(1.0 + c));
                }
                w
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, WeightSpec::Zero) || matches!(self, WeightSpec::Constant { value } if *value == 0.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("weight parameter {name} must be finite")))
            }
        };
        match *self {
            WeightSpec::Constant { value } => {
                finite(value, "value")?;
                if value < 0.0 {
                    return Err(invalid("constant weight must be nonnegative"));
                }
            }
            WeightSpec::Characteristic { a, b, c } => {
                finite(a, "a")?;
                finite(b, "b")?;
                finite(c, "c")?;
            }
            WeightSpec::TimePower { k } => finite(k, "k")?,
            WeightSpec::Zero => {}
        }
        Ok(())
    }
}

/// Shape of a nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    /// `|u_t|^p |u|^q`
    DerivativeMixed { p: f64, q: f64 },
    /// `|u|^r`
    Power { r: f64 },
    /// `|u_x|^p`
    GradientPower { p: f64 },
    /// Signed `u_t^p u^q`, integer powers.
    SmoothMixed { p: u32, q: u32 },
}

impl TermKind {
    #[inline]
    pub fn value(&self, u: f64, ut: f64, ux: f64) -> f64 {
        match *self {
            TermKind::DerivativeMixed { p, q } => abs_pow(ut, p) * abs_pow(u, q),
            TermKind::Power { r } => abs_pow(u, r),
            TermKind::GradientPower { p } => abs_pow(ux, p),
            TermKind::SmoothMixed { p, q } => ut.powi(p as i32) * u.powi(q as i32),
        }
    }

    /// Whether the term is a nonnegative (absolute-value) form.
    pub fn is_nonnegative(&self) -> bool {
        !matches!(self, TermKind::SmoothMixed { .. })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            TermKind::DerivativeMixed { p, q } => {
                if !(p > 1.0 && p.is_finite()) {
                    return Err(invalid("p > 1 required"));
                }
                if !(q >= 0.0 && q.is_finite()) {
                    return Err(invalid("q >= 0 required"));
                }
            }
            TermKind::Power { r } => {
                if !(r > 1.0 && r.is_finite()) {
                    return Err(invalid("r > 1 required"));
                }
            }
            TermKind::GradientPower { p } => {
                if !(p > 1.0 && p.is_finite()) {
                    return Err(invalid("p > 1 required"));
                }
            }
            TermKind::SmoothMixed { p, q } => {
                if p + q < 2 {
                    return Err(invalid("p + q >= 2 required for a smooth term"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearTerm {
    pub weight: WeightSpec,
    #[serde(flatten)]
    pub kind: TermKind,
}

impl NonlinearTerm {
    pub fn new(weight: WeightSpec, kind: TermKind) -> Self {
        Self { weight, kind }
    }

    pub fn power(r: f64) -> Self {
        Self::new(WeightSpec::constant(1.0), TermKind::Power { r })
    }

    pub fn derivative(p: f64, q: f64) -> Self {
        Self::new(WeightSpec::constant(1.0), TermKind::DerivativeMixed { p, q })
    }

    pub fn with_weight(mut self, weight: WeightSpec) -> Self {
        self.weight = weight;
        self
    }

    #[inline]
    pub fn evaluate(&self, u: f64, ut: f64, ux: f64, x: f64, t: f64) -> f64 {
        let w = self.weight.evaluate(x, t);
        if w == 0.0 {
            return 0.0;
        }
        w * self.kind.value(u, ut, ux)
    }
}

/// Initial data `(f, g)` drawn from the bump family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    f: Profile,
    g: Profile,
    radius: f64,
    g_mean: f64,
    g_zero_mean: bool,
}

impl InitialData {
    pub fn new(f: Profile, g: Profile, radius: f64) -> Result<Self, ModelError> {
        if !(radius > 1.0 && radius.is_finite()) {
            return Err(invalid("support radius R > 1 required"));
        }
        for b in f.bumps.iter().chain(&g.bumps) {
            if !(b.width > 0.0 && b.width.is_finite()) {
                return Err(invalid("bump width must be positive"));
            }
            if !(b.amplitude.is_finite() && b.center.is_finite()) {
                return Err(invalid("bump parameters must be finite"));
            }
            if b.reach() > radius {
                return Err(invalid(format!(
                    "supp f, g must lie in |x| <= R = {radius}; bump at {} with width {} reaches {}",
                    b.center,
                    b.width,
                    b.reach()
                )));
            }
        }
        let g_zero_mean = g.is_zero_mean_by_construction();
        let g_mean = g.integral();
        Ok(Self {
            f,
            g,
            radius,
            g_mean,
            g_zero_mean,
        })
    }

    pub fn f(&self) -> &Profile {
        &self.f
    }

    pub fn g(&self) -> &Profile {
        &self.g
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `∫ g dx`.
    pub fn g_mean(&self) -> f64 {
        self.g_mean
    }

    pub fn f_mean(&self) -> f64 {
        self.f.integral()
    }

    pub fn g_zero_mean(&self) -> bool {
        self.g_zero_mean
    }

    /// `(f(x), g(x), f'(x))`.
    pub fn sample(&self, x: f64) -> (f64, f64, f64) {
        if x.abs() > self.radius {
            return (0.0, 0.0, 0.0);
        }
        (self.f.value(x), self.g.value(x), self.f.derivative(x))
    }

    /// Scale of `|u|` near `t = 0` per unit ε, used to set blow-up thresholds.
    pub fn sup_scale(&self) -> f64 {
        self.f.sup_bound().max(0.5 * self.g.abs_integral_bound())
    }
}

pub fn sample_data(data: &InitialData, x: f64) -> (f64, f64, f64) {
    data.sample(x)
}

/// Anything that can act as the right-hand side `S(u, u_t, u_x, x, t)`.
pub trait Source: Sync {
    fn source(&self, u: f64, ut: f64, ux: f64, x: f64, t: f64) -> f64;

    /// True when the source vanishes identically (free wave equation).
    fn is_free(&self) -> bool {
        false
    }
}

/// One initial value problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub terms: Vec<NonlinearTerm>,
    pub data: InitialData,
    pub epsilon: f64,
    pub label: String,
}

impl ProblemSpec {
    pub fn new(
        terms: Vec<NonlinearTerm>,
        data: InitialData,
        epsilon: f64,
        label: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            terms,
            data,
            epsilon,
            label: label.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be finite and nonnegative"));
        }
        for term in &self.terms {
            term.weight.validate()?;
            term.kind.validate()?;
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn radius(&self) -> f64 {
        self.data.radius()
    }

    /// True when every active term is an absolute-value form.
    pub fn is_nonnegative(&self) -> bool {
        self.terms.iter().all(|t| t.kind.is_nonnegative())
    }
}

impl Source for ProblemSpec {
    #[inline]
    fn source(&self, u: f64, ut: f64, ux: f64, x: f64, t: f64) -> f64 {
        self.terms.iter().map(|k| k.evaluate(u, ut, ux, x, t)).sum()
    }

    fn is_free(&self) -> bool {
        self.terms.iter().all(|t| t.weight.is_zero())
    }
}

pub fn evaluate_weight(w: &WeightSpec, x: f64, t: f64) -> f64 {
    w.evaluate(x, t)
}

/// Right-hand side at one point; overflow is reported as [`ModelError::Blowup`].
pub fn evaluate_source(
    spec: &ProblemSpec,
    u: f64,
    ut: f64,
    ux: f64,
    x: f64,
    t: f64,
) -> Result<f64, ModelError> {
    let s = spec.source(u, ut, ux, x, t);
    if s.is_finite() {
        Ok(s)
    } else {
        Err(ModelError::Blowup { x, t })
    }
}

/// Maps `v_tt - v_xx + 2/(1+t) v_t = |v|^p` onto the undamped problem for
/// `u = (1+t) v`: source `|u|^p / (1+t)^{p-1}`, data `(f, f + g)`.
pub fn liouville_transform(damped: &ProblemSpec) -> Result<ProblemSpec, ModelError> {
    let p = match damped.terms.as_slice() {
        [NonlinearTerm {
            weight: WeightSpec::Constant { value },
            kind: TermKind::Power { r },
        }] if *value == 1.0 => *r,
        _ => {
            return Err(invalid(
                "damped problem must have exactly one |v|^p term with unit weight",
            ))
        }
    };
    let data = &damped.data;
    let speed = data.f().plus(data.g());
    let transformed = InitialData::new(data.f().clone(), speed, data.radius())?;
    ProblemSpec::new(
        vec![NonlinearTerm::new(
            WeightSpec::TimePower { k: p - 1.0 },
            TermKind::Power { r: p },
        )],
        transformed,
        damped.epsilon,
        format!("{} (Liouville)", damped.label),
    )
}

/// Parameters of a general smooth nonlinearity `H = O(|λ|^{1+α})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralTheoryParams {
    pub alpha: u32,
    pub beta0: u32,
    /// `∂_u^β H(0) = 0` for `α+1 <= β <= β₀`.
    pub u_power_vanishing: bool,
    pub g_mean_zero: bool,
}

impl GeneralTheoryParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.alpha == 0 {
            return Err(invalid("alpha >= 1 required"));
        }
        if self.beta0 == 0 {
            return Err(invalid("beta0 >= 1 required"));
        }
        if self.u_power_vanishing && self.beta0 < self.alpha + 1 {
            return Err(invalid("beta0 >= alpha + 1 required"));
        }
        Ok(())
    }
}
