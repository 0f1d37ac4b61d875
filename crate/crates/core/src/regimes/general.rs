//! Lower-bound exponents from the general theory for `H(u, u_t)` smooth
//! nonlinearities, and the special-term conclusions that follow from it.

use super::Scalar;
use crate::model::GeneralTheoryParams;

fn half<S: Scalar>(v: S) -> S {
    v / S::from_i64(2).unwrap()
}

fn min<S: Scalar>(a: S, b: S) -> S {
    if a < b {
        a
    } else {
        b
    }
}

fn max<S: Scalar>(a: S, b: S) -> S {
    if a > b {
        a
    } else {
        b
    }
}

/// Best exponent `e` with `T(ε) >= c ε^{-e}` among the applicable cases:
/// `α/2` always, `α(1+α)/(2+α)` for zero-mean `g`, `min{β₀/2, α}` when the
/// `u`-powers vanish up to `β₀`.
pub fn general_theory_bound(params: &GeneralTheoryParams) -> f64 {
    let alpha = params.alpha as f64;
    let beta0 = params.beta0 as f64;
    let mut e = alpha / 2.0;
    if params.g_mean_zero {
        e = e.max(alpha * (1.0 + alpha) / (2.0 + alpha));
    }
    if params.u_power_vanishing {
        e = e.max((beta0 / 2.0).min(alpha));
    }
    e
}

/// Refinement for `β₀ > α` with vanishing `u`-powers: `min{β₀/2, α}` for
/// `∫g ≠ 0`, `min{(α+1)β₀/(β₀+2), α}` for `∫g = 0`.
pub fn takamatsu_bound<S: Scalar>(alpha: S, beta0: S, g_mean_zero: bool) -> S {
    if g_mean_zero {
        let two = S::from_i64(2).unwrap();
        min((alpha.clone() + S::one()) * beta0.clone() / (beta0 + two), alpha)
    } else {
        min(half(beta0), alpha)
    }
}

/// Exponent the general theory gives for `|u_t|^p |u|^q + |u|^r` with
/// `s = p+q`, all weights constant.
pub fn special_term_general_bound<S: Scalar>(s: S, r: S, g_mean_zero: bool) -> S {
    let one = S::one();
    let knee = half(r.clone() + one.clone());
    if s <= knee {
        return s - one;
    }
    if !g_mean_zero {
        return half(r - one);
    }
    if s <= r {
        let a = half(r - one.clone());
        let b = s.clone() * (s.clone() - one.clone()) / (s + one);
        max(a, b)
    } else {
        r.clone() * (r.clone() - one.clone()) / (r + one)
    }
}
