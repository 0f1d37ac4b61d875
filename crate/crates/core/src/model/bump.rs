//! The built-in C^∞ bump family used for initial data.
//!
//! Every profile is a finite sum of scaled translates of the unit-peak bump
//! `φ(s) = exp(1 - 1/(1-s²))` on `|s| < 1`. Values, derivatives and the
//! antiderivative are exact zeros (or the exact total) outside the support.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// `∫_{-1}^{1} exp(1 - 1/(1-s²)) ds`.
pub const BUMP_INTEGRAL: f64 = 1.206_900_322_437_876_2;

const PANELS: usize = 12;
const GL_ORDER: usize = 12;

/// Unit-peak bump `φ(s)`, `φ(0) = 1`.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    (1.0 - 1.0 / (1.0 - s * s)).exp()
}

/// `φ'(s)`.
pub fn bump_derivative(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - s * s;
    bump(s) * (-2.0 * s / (d * d))
}

/// `∫_{-1}^{s} φ`, exactly 0 below the support and exactly [`BUMP_INTEGRAL`] above.
pub fn bump_antiderivative(s: f64) -> f64 {
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return BUMP_INTEGRAL;
    }
    let half = 0.5 * BUMP_INTEGRAL;
    let a = s.abs();
    let partial = if a <= 0.5 {
        integrate(0.0, a)
    } else {
        half - integrate(a, 1.0)
    };
    if s >= 0.0 {
        half + partial
    } else {
        half - partial
    }
}

// Composite Gauss-Legendre on [a, b]. Near s = 1 only the tail is integrated,
// so its absolute error scales with the (tiny) tail itself.
fn integrate(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre_rule();
    let panel = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for k in 0..PANELS {
        let mid = a + (k as f64 + 0.5) * panel;
        let half = 0.5 * panel;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            acc += w * bump(mid + half * x);
        }
        total += acc * half;
    }
    total
}

fn gauss_legendre_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`, `n ≥ 2`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// One scaled translate `amplitude · φ((x - center)/width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Self {
        Self {
            amplitude,
            center,
            width,
        }
    }

    fn arg(&self, x: f64) -> f64 {
        (x - self.center) / self.width
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * bump(self.arg(x))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.amplitude * bump_derivative(self.arg(x)) / self.width
    }

    /// `∫_{-∞}^{x}` of this bump.
    pub fn antiderivative(&self, x: f64) -> f64 {
        self.amplitude * self.width * bump_antiderivative(self.arg(x))
    }

    pub fn integral(&self) -> f64 {
        self.amplitude * self.width * BUMP_INTEGRAL
    }

    /// Half-width of the closed support around the origin.
    pub fn reach(&self) -> f64 {
        self.center.abs() + self.width
    }
}

/// A finite sum of bumps; the empty profile is the zero function.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile {
    pub bumps: Vec<Bump>,
}

impl Profile {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(amplitude: f64, center: f64, width: f64) -> Self {
        Self {
            bumps: vec![Bump::new(amplitude, center, width)],
        }
    }

    /// Antisymmetric pair `A[φ((x+d)/w) - φ((x-d)/w)]`; zero mean by construction.
    pub fn dipole(amplitude: f64, offset: f64, width: f64) -> Self {
        Self {
            bumps: vec![
                Bump::new(amplitude, -offset, width),
                Bump::new(-amplitude, offset, width),
            ],
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.value(x)).sum()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.derivative(x)).sum()
    }

    pub fn antiderivative(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.antiderivative(x)).sum()
    }

    pub fn reach(&self) -> f64 {
        self.bumps.iter().map(Bump::reach).fold(0.0, f64::max)
    }

    /// Pointwise sum of two profiles (concatenation of the bump lists).
    pub fn plus(&self, other: &Profile) -> Profile {
        let mut bumps = self.bumps.clone();
        bumps.extend_from_slice(&other.bumps);
        Profile { bumps }
    }

    /// True iff the bumps cancel in pairs `(A, w)` / `(-A, w)`, so the total
    /// integral vanishes structurally rather than numerically.
    pub fn is_zero_mean_by_construction(&self) -> bool {
        let mut pending: Vec<&Bump> = self.bumps.iter().filter(|b| b.amplitude != 0.0).collect();
        while let Some(b) = pending.pop() {
            let partner = pending
                .iter()
                .position(|o| o.amplitude == -b.amplitude && o.width == b.width);
            match partner {
                Some(i) => {
                    pending.swap_remove(i);
                }
                None => return false,
            }
        }
        true
    }

    /// Exact integral; 0.0 exactly when the profile is zero mean by construction.
    pub fn integral(&self) -> f64 {
        if self.is_zero_mean_by_construction() {
            0.0
        } else {
            self.bumps.iter().map(Bump::integral).sum()
        }
    }

    /// Sum of the bump peaks; the sup-norm for non-overlapping bumps and an
    /// upper bound otherwise.
    pub fn sup_bound(&self) -> f64 {
        self.bumps.iter().map(|b| b.amplitude.abs()).sum()
    }

    pub fn abs_integral_bound(&self) -> f64 {
        self.bumps.iter().map(|b| b.integral().abs()).sum()
    }
}
