//! Atlas of lifespan scaling laws `T(ε)` as total, executable functions.
//!
//! Every branch is a `(condition, applies, law)` triple; tables are generic
//! over the scalar type so identities can be checked in exact rational
//! arithmetic (`Ratio<i64>`) and predictions served in `f64`.
//!
//! Provenance tags name the literature result a branch comes from:
//! Zhou92, Zhou01/KMT23, LYZ/KSTT, MST/KSTT (generalized combined effect),
//! KMT22, KMT23, KTW23, Kitamura, STT23, Wakasa16/KTW19 (damped waves).

mod general;
mod inverse;

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ProblemSpec, TermKind, WeightSpec};

pub use general::{general_theory_bound, special_term_general_bound, takamatsu_bound};
pub use inverse::{invert_law, InverseKind};

/// Exact or floating scalars the atlas can be evaluated in.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive {}

impl<T> Scalar for T where T: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive {}

fn k<S: Scalar>(v: i64) -> S {
    S::from_i64(v).expect("small integer")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error("outside stated theorems: {reason} (nearest branch: {nearest})")]
    OutsideTheorems { nearest: String, reason: String },
    #[error("law is not monotone: {0}")]
    NotMonotone(String),
    #[error("invalid argument: {0}")]
    Domain(String),
}

fn outside(nearest: impl Into<String>, reason: impl Into<String>) -> RegimeError {
    RegimeError::OutsideTheorems {
        nearest: nearest.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LawKind<S> {
    Global,
    /// `T ~ C ε^{-exponent}`
    Power { exponent: S },
    /// `T ~ exp(C ε^{-exponent})`
    Exp { exponent: S },
    /// `T ~ law^{-1}(C ε^{-exponent})`; for `BImplicit`, `T ~ C b(ε)`.
    LogInverse { inverse: InverseKind<S>, exponent: S },
}

impl<S: Scalar> LawKind<S> {
    pub fn name(&self) -> &'static str {
        match self {
            LawKind::Global => "global",
            LawKind::Power { .. } => "power",
            LawKind::Exp { .. } => "exp",
            LawKind::LogInverse { .. } => "log_inverse",
        }
    }

    pub fn exponent(&self) -> Option<&S> {
        match self {
            LawKind::Global => None,
            LawKind::Power { exponent } | LawKind::Exp { exponent } => Some(exponent),
            LawKind::LogInverse { exponent, .. } => Some(exponent),
        }
    }

    pub fn to_f64(&self) -> LawKind<f64> {
        let f = |v: &S| v.to_f64().unwrap_or(f64::NAN);
        match self {
            LawKind::Global => LawKind::Global,
            LawKind::Power { exponent } => LawKind::Power { exponent: f(exponent) },
            LawKind::Exp { exponent } => LawKind::Exp { exponent: f(exponent) },
            LawKind::LogInverse { inverse, exponent } => LawKind::LogInverse {
                inverse: inverse.to_f64(),
                exponent: f(exponent),
            },
        }
    }
}

/// A law together with where it comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw<S> {
    #[serde(flatten)]
    pub kind: LawKind<S>,
    pub provenance: String,
    pub condition: String,
}

impl<S: Scalar> ScalingLaw<S> {
    fn new(kind: LawKind<S>, provenance: &str, condition: &str) -> Self {
        Self {
            kind,
            provenance: provenance.into(),
            condition: condition.into(),
        }
    }

    pub fn to_f64(&self) -> ScalingLaw<f64> {
        ScalingLaw {
            kind: self.kind.to_f64(),
            provenance: self.provenance.clone(),
            condition: self.condition.clone(),
        }
    }
}

/// Parameters fed to a branch table. One-parameter families (`c` or `p`
/// alone) use `a` for their parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchParams<S> {
    pub p: S,
    pub a: S,
    pub b: S,
}

pub struct Branch<S> {
    pub condition: &'static str,
    pub applies: fn(&BranchParams<S>) -> bool,
    pub law: fn(&BranchParams<S>) -> LawKind<S>,
}

/// Conditions of all branches that claim `params`.
pub fn matching_branches<S: Scalar>(table: &[Branch<S>], params: &BranchParams<S>) -> Vec<&'static str> {
    table
        .iter()
        .filter(|b| (b.applies)(params))
        .map(|b| b.condition)
        .collect()
}

fn select<S: Scalar>(
    table: &[Branch<S>],
    params: &BranchParams<S>,
    provenance: &str,
) -> Result<ScalingLaw<S>, RegimeError> {
    let hits: Vec<&Branch<S>> = table.iter().filter(|b| (b.applies)(params)).collect();
    match hits.as_slice() {
        [one] => Ok(ScalingLaw::new((one.law)(params), provenance, one.condition)),
        [] => Err(outside(provenance, "no branch condition holds")),
        _ => Err(outside(provenance, "several branch conditions hold")),
    }
}

fn zero<S: Scalar>() -> S {
    S::zero()
}

fn pm1<S: Scalar>(x: &BranchParams<S>) -> S {
    x.p.clone() - S::one()
}

fn ppm1<S: Scalar>(x: &BranchParams<S>) -> S {
    x.p.clone() * pm1(x)
}

/// KTW23, `B = ⟨t+⟨x⟩⟩^{-(1+a)} ⟨t-⟨x⟩⟩^{-(1+b)}`, `∫g ≠ 0`.
pub fn ktw23_nonzero_mean<S: Scalar>() -> Vec<Branch<S>> {
    vec![
        Branch {
            condition: "a+b > 0 and a > 0",
            applies: |x| x.a.clone() + x.b.clone() > zero() && x.a > zero(),
            law: |_| LawKind::Global,
        },
        Branch {
            condition: "a+b = 0 and a > 0, or a = 0 and b > 0",
            applies: |x| {
                (x.a.clone() + x.b.clone() == zero() && x.a > zero()) || (x.a == zero() && x.b > zero())
            },
            law: |x| LawKind::Exp { exponent: pm1(x) },
        },
        Branch {
            condition: "a = b = 0",
            applies: |x| x.a == zero() && x.b == zero(),
            law: |x| LawKind::Exp { exponent: pm1(x) / k(2) },
        },
        Branch {
            condition: "a < 0 and b > 0",
            applies: |x| x.a < zero() && x.b > zero(),
            law: |x| LawKind::Power { exponent: pm1(x) / -x.a.clone() },
        },
        Branch {
            condition: "a < 0 and b = 0",
            applies: |x| x.a < zero() && x.b == zero(),
            law: |x| LawKind::LogInverse {
                inverse: InverseKind::Phi1 { a: x.a.clone() },
                exponent: pm1(x),
            },
        },
        Branch {
            condition: "a+b < 0 and b < 0",
            applies: |x| x.a.clone() + x.b.clone() < zero() && x.b < zero(),
            law: |x| LawKind::Power { exponent: pm1(x) / -(x.a.clone() + x.b.clone()) },
        },
    ]
}

/// KTW23, `∫g = 0`.
pub fn ktw23_zero_mean<S: Scalar>() -> Vec<Branch<S>> {
    vec![
        Branch {
            condition: "a+b > 0 and a > 0",
            applies: |x| x.a.clone() + x.b.clone() > zero() && x.a > zero(),
            law: |_| LawKind::Global,
        },
        Branch {
            condition: "a = 0 and b > 0",
            applies: |x| x.a == zero() && x.b > zero(),
            law: |x| LawKind::Exp { exponent: pm1(x) },
        },
        Branch {
            condition: "a+b = 0 and a > 0",
            applies: |x| x.a.clone() + x.b.clone() == zero() && x.a > zero(),
            law: |x| LawKind::Exp { exponent: ppm1(x) },
        },
        Branch {
            condition: "a = b = 0",
            applies: |x| x.a == zero() && x.b == zero(),
            law: |x| LawKind::Exp { exponent: ppm1(x) / (x.p.clone() + S::one()) },
        },
        Branch {
            condition: "a < 0 and b > 0",
            applies: |x| x.a < zero() && x.b > zero(),
            law: |x| LawKind::Power { exponent: pm1(x) / -x.a.clone() },
        },
        Branch {
            condition: "a < 0 and b = 0",
            applies: |x| x.a < zero() && x.b == zero(),
            law: |x| LawKind::LogInverse {
                inverse: InverseKind::Psi1 { p: x.p.clone(), a: x.a.clone() },
                exponent: ppm1(x),
            },
        },
        Branch {
            condition: "a < 0 and b < 0",
            applies: |x| x.a < zero() && x.b < zero(),
            law: |x| LawKind::Power {
                exponent: ppm1(x) / -(x.p.clone() * x.a.clone() + x.b.clone()),
            },
        },
        Branch {
            condition: "a = 0 and b < 0",
            applies: |x| x.a == zero() && x.b < zero(),
            law: |x| LawKind::LogInverse {
                inverse: InverseKind::Psi2 { p: x.p.clone(), b: x.b.clone() },
                exponent: ppm1(x),
            },
        },
        Branch {
            condition: "a+b < 0 and a > 0",
            applies: |x| x.a.clone() + x.b.clone() < zero() && x.a > zero(),
            law: |x| LawKind::Power { exponent: ppm1(x) / -(x.a.clone() + x.b.clone()) },
        },
    ]
}

fn kitamura_line<S: Scalar>(x: &BranchParams<S>) -> S {
    x.p.clone() * (S::one() + x.a.clone()) + x.b.clone()
}

/// Kitamura, `A = ⟨t+⟨x⟩⟩^{-(1+a)} ⟨t-⟨x⟩⟩^{-(1+b)}`, `q = 0`, either data class.
pub fn kitamura<S: Scalar>() -> Vec<Branch<S>> {
    vec![
        Branch {
            condition: "a < 0 and b >= -p",
            applies: |x| x.a < zero() && x.b >= -x.p.clone(),
            law: |x| LawKind::Power { exponent: pm1(x) / -x.a.clone() },
        },
        Branch {
            condition: "p(1+a)+b < 0 and b < -p",
            applies: |x| kitamura_line(x) < zero() && x.b < -x.p.clone(),
            law: |x| LawKind::Power { exponent: ppm1(x) / -kitamura_line(x) },
        },
        Branch {
            condition: "a = 0 and b >= -p",
            applies: |x| x.a == zero() && x.b >= -x.p.clone(),
            law: |x| LawKind::Exp { exponent: pm1(x) },
        },
        Branch {
            condition: "a > 0 and p(1+a)+b = 0",
            applies: |x| x.a > zero() && kitamura_line(x) == zero(),
            law: |x| LawKind::Exp { exponent: ppm1(x) },
        },
        Branch {
            condition: "a > 0 and p(1+a)+b > 0",
            applies: |x| x.a > zero() && kitamura_line(x) > zero(),
            law: |_| LawKind::Global,
        },
    ]
}

/// KMT22, `B = ⟨x⟩^{-(1+c)}` with `c` in `a`.
pub fn kmt22<S: Scalar>(g_mean_zero: bool) -> Vec<Branch<S>> {
    if g_mean_zero {
        vec![
            Branch {
                condition: "c < 0",
                applies: |x| x.a < zero(),
                law: |x| LawKind::Power {
                    exponent: ppm1(x) / (S::one() - x.p.clone() * x.a.clone()),
                },
            },
            Branch {
                condition: "c = 0",
                applies: |x| x.a == zero(),
                law: |x| LawKind::LogInverse {
                    inverse: InverseKind::Psi { p: x.p.clone() },
                    exponent: ppm1(x),
                },
            },
            Branch {
                condition: "c > 0",
                applies: |x| x.a > zero(),
                law: |x| LawKind::Power { exponent: ppm1(x) },
            },
        ]
    } else {
        vec![
            Branch {
                condition: "c < 0",
                applies: |x| x.a < zero(),
                law: |x| LawKind::Power { exponent: pm1(x) / (S::one() - x.a.clone()) },
            },
            Branch {
                condition: "c = 0",
                applies: |x| x.a == zero(),
                law: |x| LawKind::LogInverse {
                    inverse: InverseKind::Phi,
                    exponent: pm1(x),
                },
            },
            Branch {
                condition: "c > 0",
                applies: |x| x.a > zero(),
                law: |x| LawKind::Power { exponent: pm1(x) },
            },
        ]
    }
}

/// KMT23, `A = ⟨x⟩^{-(1+c)}`, `q = 0`, with `c` in `a`.
pub fn kmt23<S: Scalar>() -> Vec<Branch<S>> {
    vec![
        Branch {
            condition: "c < 0",
            applies: |x| x.a < zero(),
            law: |x| LawKind::Power { exponent: pm1(x) / -x.a.clone() },
        },
        Branch {
            condition: "c = 0",
            applies: |x| x.a == zero(),
            law: |x| LawKind::Exp { exponent: pm1(x) },
        },
        Branch {
            condition: "c > 0",
            applies: |x| x.a > zero(),
            law: |_| LawKind::Global,
        },
    ]
}

/// `v_tt - v_xx + 2/(1+t) v_t = |v|^p` after the Liouville transform; the
/// data class is that of `f + g`.
pub fn damped<S: Scalar>(transformed_mean_zero: bool) -> Vec<Branch<S>> {
    if transformed_mean_zero {
        vec![
            Branch {
                condition: "1 < p < 2",
                applies: |x| x.p < k(2),
                law: |x| LawKind::Power {
                    exponent: ppm1(x)
                        / (S::one() + k::<S>(2) * x.p.clone() - x.p.clone() * x.p.clone()),
                },
            },
            Branch {
                condition: "p = 2",
                applies: |x| x.p == k(2),
                law: |_| LawKind::LogInverse {
                    inverse: InverseKind::BImplicit,
                    exponent: k(2),
                },
            },
            Branch {
                condition: "2 < p < 3",
                applies: |x| x.p > k(2) && x.p < k(3),
                law: |x| LawKind::Power { exponent: ppm1(x) / (k::<S>(3) - x.p.clone()) },
            },
            Branch {
                condition: "p = 3",
                applies: |x| x.p == k(3),
                law: |x| LawKind::Exp { exponent: ppm1(x) },
            },
            Branch {
                condition: "p > 3",
                applies: |x| x.p > k(3),
                law: |_| LawKind::Global,
            },
        ]
    } else {
        vec![
            Branch {
                condition: "1 < p < 3",
                applies: |x| x.p < k(3),
                law: |x| LawKind::Power { exponent: pm1(x) / (k::<S>(3) - x.p.clone()) },
            },
            Branch {
                condition: "p = 3",
                applies: |x| x.p == k(3),
                law: |x| LawKind::Exp { exponent: pm1(x) },
            },
            Branch {
                condition: "p > 3",
                applies: |x| x.p > k(3),
                law: |_| LawKind::Global,
            },
        ]
    }
}

/// Strict membership `(r+1)/2 < p+q < r`.
pub fn combined_window<S: Scalar>(p: &S, q: &S, r: &S) -> bool {
    let s = p.clone() + q.clone();
    (r.clone() + S::one()) / k(2) < s && s < *r
}

/// `(p+q)(r-1)/(r+1)`.
pub fn combined_exponent<S: Scalar>(p: &S, q: &S, r: &S) -> S {
    (p.clone() + q.clone()) * (r.clone() - S::one()) / (r.clone() + S::one())
}

fn min<S: Scalar>(a: S, b: S) -> S {
    if a < b {
        a
    } else {
        b
    }
}

/// Exponent for constant `A, B > 0`: the combined-effect value inside the
/// window, the minimum of the single-term exponents elsewhere.
pub fn constant_combined_exponent<S: Scalar>(p: &S, q: &S, r: &S, g_mean_zero: bool) -> S {
    if g_mean_zero && combined_window(p, q, r) {
        return combined_exponent(p, q, r);
    }
    let a_only = p.clone() + q.clone() - S::one();
    let rm1 = r.clone() - S::one();
    let b_only = if g_mean_zero {
        r.clone() * rm1 / (r.clone() + S::one())
    } else {
        rm1 / k(2)
    };
    min(a_only, b_only)
}

/// Weight shape as the atlas sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightClass<S> {
    Constant,
    /// `⟨x⟩^{-(1+c)}`
    Spatial { c: S },
    /// `⟨t+⟨x⟩⟩^{-(1+a)} ⟨t-⟨x⟩⟩^{-(1+b)}`
    Characteristic { a: S, b: S },
    /// `(1+t)^{-k}`
    TimePower { k: S },
    /// All three characteristic factors active at once.
    Mixed { a: S, b: S, c: S },
}

impl WeightClass<f64> {
    /// `None` for a weight that switches the term off.
    pub fn classify(w: &WeightSpec) -> Option<Self> {
        match *w {
            WeightSpec::Zero => None,
            WeightSpec::Constant { value } if value == 0.0 => None,
            WeightSpec::Constant { .. } => Some(WeightClass::Constant),
            WeightSpec::TimePower { k } if k == 0.0 => Some(WeightClass::Constant),
            WeightSpec::TimePower { k } => Some(WeightClass::TimePower { k }),
            WeightSpec::Characteristic { a, b, c } => Some(match (a == -1.0, b == -1.0, c == -1.0) {
                (true, true, true) => WeightClass::Constant,
                (true, true, false) => WeightClass::Spatial { c },
                (_, _, true) => WeightClass::Characteristic { a, b },
                _ => WeightClass::Mixed { a, b, c },
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum QueryTerm<S> {
    /// `A |u_t|^p |u|^q`
    Derivative { p: S, q: S, weight: WeightClass<S> },
    /// `B |u|^r`
    Power { r: S, weight: WeightClass<S> },
    /// `|u_x|^p`
    Gradient { p: S, weight: WeightClass<S> },
    /// Signed `u_t^p u^q`
    Smooth { p: S, q: S },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeQuery<S> {
    pub terms: Vec<QueryTerm<S>>,
    pub g_mean_zero: bool,
}

impl RegimeQuery<f64> {
    /// Drops switched-off terms and classifies the weights.
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let mut terms = Vec::new();
        for t in &spec.terms {
            let Some(weight) = WeightClass::classify(&t.weight) else {
                continue;
            };
            terms.push(match t.kind {
                TermKind::DerivativeMixed { p, q } => QueryTerm::Derivative { p, q, weight },
                TermKind::Power { r } => QueryTerm::Power { r, weight },
                TermKind::GradientPower { p } => QueryTerm::Gradient { p, weight },
                TermKind::SmoothMixed { p, q } => QueryTerm::Smooth {
                    p: p as f64,
                    q: q as f64,
                },
            });
        }
        Self {
            terms,
            g_mean_zero: spec.data.g_zero_mean(),
        }
    }
}

fn q_admissible<S: Scalar>(q: &S) -> bool {
    *q == S::zero() || *q > S::one()
}

/// The theorem-backed law for a query, or [`RegimeError::OutsideTheorems`].
pub fn predict<S: Scalar>(query: &RegimeQuery<S>) -> Result<ScalingLaw<S>, RegimeError> {
    let g0 = query.g_mean_zero;
    let (mut a_terms, mut b_terms, mut grad_terms) = (Vec::new(), Vec::new(), Vec::new());
    for t in &query.terms {
        match t {
            QueryTerm::Derivative { p, q, weight } => a_terms.push((p, q, weight)),
            QueryTerm::Power { r, weight } => b_terms.push((r, weight)),
            QueryTerm::Gradient { p, weight } => grad_terms.push((p, weight)),
            QueryTerm::Smooth { .. } => {
                return Err(outside(
                    "general theory (general_theory_bound)",
                    "signed smooth terms only carry general-theory lower bounds",
                ))
            }
        }
    }
    if a_terms.len() > 1 || b_terms.len() > 1 || grad_terms.len() > 1 {
        return Err(outside("single-term laws", "at most one term of each kind is covered"));
    }
    match (a_terms.first(), b_terms.first(), grad_terms.first()) {
        (None, None, None) => Ok(ScalingLaw::new(LawKind::Global, "free wave", "no nonlinear term")),
        (None, None, Some((p, w))) => match w {
            WeightClass::Constant => Ok(ScalingLaw::new(
                LawKind::Power { exponent: (*p).clone() - S::one() },
                "STT23",
                "constant |u_x|^p",
            )),
            _ => Err(outside("STT23", "|u_x|^p is covered with constant weight only")),
        },
        (_, _, Some(_)) => Err(outside("STT23", "|u_x|^p combined with other terms")),
        (None, Some((r, w)), None) => predict_b(r, w, g0),
        (Some((p, q, w)), None, None) => predict_a(p, q, w),
        (Some((p, q, wa)), Some((r, wb)), None) => {
            if !matches!(wa, WeightClass::Constant) || !matches!(wb, WeightClass::Constant) {
                return Err(outside(
                    "MST/KSTT generalized combined effect",
                    "both A and B present with variable weights",
                ));
            }
            if !q_admissible(*q) {
                return Err(outside(
                    "MST/KSTT generalized combined effect",
                    "0 < q <= 1 is not covered (q = 0 or q > 1 required)",
                ));
            }
            let e = constant_combined_exponent(*p, *q, *r, g0);
            if g0 && combined_window(*p, *q, *r) {
                Ok(ScalingLaw::new(
                    LawKind::Power { exponent: e },
                    "MST/KSTT generalized combined effect",
                    "int g = 0 and (r+1)/2 < p+q < r",
                ))
            } else {
                let cond = if g0 {
                    "min{p+q-1, r(r-1)/(r+1)} outside the combined window"
                } else {
                    "min{p+q-1, (r-1)/2}, int g != 0"
                };
                Ok(ScalingLaw::new(LawKind::Power { exponent: e }, "MST/KSTT", cond))
            }
        }
    }
}

fn predict_b<S: Scalar>(r: &S, w: &WeightClass<S>, g0: bool) -> Result<ScalingLaw<S>, RegimeError> {
    let plane = |a: S, b: S| BranchParams { p: r.clone(), a, b };
    match w {
        WeightClass::Constant => {
            let rm1 = r.clone() - S::one();
            if g0 {
                Ok(ScalingLaw::new(
                    LawKind::Power {
                        exponent: r.clone() * rm1 / (r.clone() + S::one()),
                    },
                    "Zhou92",
                    "B-only, int g = 0",
                ))
            } else {
                Ok(ScalingLaw::new(
                    LawKind::Power { exponent: rm1 / k(2) },
                    "Zhou92",
                    "B-only, int g != 0",
                ))
            }
        }
        WeightClass::Spatial { c } => select(&kmt22(g0), &plane(c.clone(), zero()), "KMT22"),
        WeightClass::Characteristic { a, b } => {
            let table = if g0 { ktw23_zero_mean() } else { ktw23_nonzero_mean() };
            select(&table, &plane(a.clone(), b.clone()), "KTW23")
        }
        WeightClass::TimePower { k: kk } => {
            if *kk == r.clone() - S::one() {
                select(&damped(g0), &plane(zero(), zero()), "Wakasa16/KTW19")
            } else {
                let table = if g0 { ktw23_zero_mean() } else { ktw23_nonzero_mean() };
                select(
                    &table,
                    &plane(kk.clone() - S::one(), -S::one()),
                    "KTW23 with (1+t) ~ <t+<x>>",
                )
            }
        }
        WeightClass::Mixed { .. } => Err(outside("KTW23 / KMT22", "spatial and characteristic factors combined")),
    }
}

fn predict_a<S: Scalar>(p: &S, q: &S, w: &WeightClass<S>) -> Result<ScalingLaw<S>, RegimeError> {
    let plane = |a: S, b: S| BranchParams { p: p.clone(), a, b };
    if let WeightClass::Constant = w {
        if !q_admissible(q) {
            return Err(outside("Zhou01/KMT23 (q = 0) or LYZ/KSTT (q > 1)", "0 < q <= 1 is not covered"));
        }
        let tag = if *q == S::zero() { "Zhou01/KMT23" } else { "LYZ/KSTT" };
        return Ok(ScalingLaw::new(
            LawKind::Power {
                exponent: p.clone() + q.clone() - S::one(),
            },
            tag,
            "A-only, constant weight",
        ));
    }
    if *q != S::zero() {
        let nearest = match w {
            WeightClass::Spatial { .. } => "KMT23",
            _ => "Kitamura",
        };
        return Err(outside(nearest, "weighted A-term laws are stated for q = 0 only"));
    }
    match w {
        WeightClass::Spatial { c } => select(&kmt23(), &plane(c.clone(), zero()), "KMT23"),
        WeightClass::Characteristic { a, b } => select(&kitamura(), &plane(a.clone(), b.clone()), "Kitamura"),
        WeightClass::TimePower { k: kk } => select(
            &kitamura(),
            &plane(kk.clone() - S::one(), -S::one()),
            "Kitamura with (1+t) ~ <t+<x>>",
        ),
        WeightClass::Mixed { .. } => Err(outside("Kitamura / KMT23", "spatial and characteristic factors combined")),
        WeightClass::Constant => unreachable!(),
    }
}

/// Predicted `T` for `ε` and a constant `C`; `+∞` for global laws.
pub fn evaluate_law(law: &LawKind<f64>, epsilon: f64, c: f64) -> Result<f64, RegimeError> {
    if !(epsilon > 0.0 && c > 0.0) {
        return Err(RegimeError::Domain("epsilon > 0 and C > 0 required".into()));
    }
    Ok(match law {
        LawKind::Global => f64::INFINITY,
        LawKind::Power { exponent } => c * epsilon.powf(-exponent),
        LawKind::Exp { exponent } => (c * epsilon.powf(-exponent)).exp(),
        LawKind::LogInverse {
            inverse: InverseKind::BImplicit,
            exponent,
        } => c * invert_law(&InverseKind::BImplicit, epsilon.powf(-exponent))?,
        LawKind::LogInverse { inverse, exponent } => invert_law(inverse, c * epsilon.powf(-exponent))?,
    })
}
