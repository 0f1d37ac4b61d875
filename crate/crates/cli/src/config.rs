//! Config files: TOML with sections `[problem]`, `[data]`, `[grid]`,
//! `[sweep]`. Unknown keys are errors everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use wavelab_core::model::bump::Bump;
use wavelab_core::model::{InitialData, NonlinearTerm, ProblemSpec, Profile, TermKind, WeightSpec};
use wavelab_core::regimes::LawKind;
use wavelab_core::solver::GridConfig;
use wavelab_core::sweep::{EpsilonGrid, SweepConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error{}{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), key.as_ref().map(|k| format!(" (key `{k}`)")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        key: Option<String>,
        reason: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
}

fn validation(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: Option<ProblemSection>,
    pub data: Option<DataSection>,
    pub grid: Option<GridSection>,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default)]
    pub label: Option<String>,
    /// Required except in sweep configs, where the grid supplies ε.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub terms: Vec<TermSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermName {
    /// `|u_t|^p |u|^q`
    Derivative,
    /// `|u|^r`
    Power,
    /// `|u_x|^p`
    Gradient,
    /// signed `u_t^p u^q`, integer powers
    Smooth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSection {
    pub kind: TermName,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub weight: Option<WeightSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightName {
    Constant,
    Characteristic,
    TimePower,
    Zero,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    pub kind: WeightName,
    pub value: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Support radius `R > 1`.
    pub radius: f64,
    #[serde(default)]
    pub f: Vec<Bump>,
    #[serde(default)]
    pub g: Vec<Bump>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Defaults to `R/100`.
    pub h: Option<f64>,
    /// Defaults to 100.
    pub t_max: Option<f64>,
    pub threshold: Option<f64>,
    pub margin_cells: Option<usize>,
    pub refinement_levels: Option<usize>,
    /// Dump every k-th level in `solve --out`; defaults to about 400 levels in total.
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eps_max: f64,
    pub eps_min: f64,
    pub count: usize,
    pub workers: Option<usize>,
    pub tolerance: Option<f64>,
    pub expected: Option<ExpectedSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedName {
    Global,
    Power,
    Exp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedSection {
    pub law: ExpectedName,
    pub exponent: Option<f64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub grid_h: Option<f64>,
    pub t_max: Option<f64>,
    pub threshold: Option<f64>,
    pub workers: Option<usize>,
}

/// Line of a byte offset, 1-based.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

pub fn parse_str(text: &str) -> Result<ConfigFile, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        key: backticked(e.message()),
        reason: e.message().trim().to_string(),
    })
}

pub fn load(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&text)
}

fn need(v: Option<f64>, key: &str, at: &str) -> Result<f64, ConfigError> {
    v.ok_or_else(|| ConfigError::Parse {
        line: None,
        key: Some(format!("{at}.{key}")),
        reason: format!("missing key `{key}`"),
    })
}

fn forbid(v: Option<f64>, key: &str, at: &str) -> Result<(), ConfigError> {
    match v {
        None => Ok(()),
        Some(_) => Err(ConfigError::Parse {
            line: None,
            key: Some(format!("{at}.{key}")),
            reason: format!("key `{key}` does not apply here"),
        }),
    }
}

fn integer(v: f64, key: &str, at: &str) -> Result<u32, ConfigError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(ConfigError::Parse {
            line: None,
            key: Some(format!("{at}.{key}")),
            reason: "smooth terms need nonnegative integer powers".into(),
        })
    }
}

impl WeightSection {
    pub fn to_spec(&self, at: &str) -> Result<WeightSpec, ConfigError> {
        let keys = [("value", self.value), ("a", self.a), ("b", self.b), ("c", self.c), ("k", self.k)];
        let allowed: &[&str] = match self.kind {
            WeightName::Constant => &["value"],
            WeightName::Characteristic => &["a", "b", "c"],
            WeightName::TimePower => &["k"],
            WeightName::Zero => &[],
        };
        for (key, v) in keys {
            if !allowed.contains(&key) {
                forbid(v, key, at)?;
            }
        }
        let w = match self.kind {
            WeightName::Constant => WeightSpec::Constant {
                value: self.value.unwrap_or(1.0),
            },
            WeightName::Characteristic => WeightSpec::Characteristic {
                a: self.a.unwrap_or(-1.0),
                b: self.b.unwrap_or(-1.0),
                c: self.c.unwrap_or(-1.0),
            },
            WeightName::TimePower => WeightSpec::TimePower { k: need(self.k, "k", at)? },
            WeightName::Zero => WeightSpec::Zero,
        };
        w.validate().map_err(|e| validation(e.to_string()))?;
        Ok(w)
    }
}

impl TermSection {
    pub fn to_term(&self, at: &str) -> Result<NonlinearTerm, ConfigError> {
        let kind = match self.kind {
            TermName::Derivative => {
                forbid(self.r, "r", at)?;
                TermKind::DerivativeMixed {
                    p: need(self.p, "p", at)?,
                    q: self.q.unwrap_or(0.0),
                }
            }
            TermName::Power => {
                forbid(self.p, "p", at)?;
                forbid(self.q, "q", at)?;
                TermKind::Power { r: need(self.r, "r", at)? }
            }
            TermName::Gradient => {
                forbid(self.q, "q", at)?;
                forbid(self.r, "r", at)?;
                TermKind::GradientPower { p: need(self.p, "p", at)? }
            }
            TermName::Smooth => {
                forbid(self.r, "r", at)?;
                TermKind::SmoothMixed {
                    p: integer(need(self.p, "p", at)?, "p", at)?,
                    q: integer(self.q.unwrap_or(0.0), "q", at)?,
                }
            }
        };
        kind.validate().map_err(|e| validation(e.to_string()))?;
        let weight = match &self.weight {
            Some(w) => w.to_spec(&format!("{at}.weight"))?,
            None => WeightSpec::Constant { value: 1.0 },
        };
        Ok(NonlinearTerm::new(weight, kind))
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
    s.as_ref().ok_or_else(|| ConfigError::Parse {
        line: None,
        key: Some(name.into()),
        reason: format!("missing section [{name}]"),
    })
}

impl ConfigFile {
    /// The problem with `epsilon` taken from `[problem]`, or `fallback`.
    pub fn problem_spec_with(&self, fallback: Option<f64>) -> Result<ProblemSpec, ConfigError> {
        let problem = section(&self.problem, "problem")?;
        let data = section(&self.data, "data")?;
        let terms = problem
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| t.to_term(&format!("problem.terms[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let init = InitialData::new(
            Profile { bumps: data.f.clone() },
            Profile { bumps: data.g.clone() },
            data.radius,
        )
        .map_err(|e| validation(e.to_string()))?;
        let epsilon = match (problem.epsilon, fallback) {
            (Some(e), _) | (None, Some(e)) => e,
            (None, None) => need(None, "epsilon", "problem")?,
        };
        if !(epsilon > 0.0) {
            return Err(validation("epsilon > 0 required"));
        }
        ProblemSpec::new(terms, init, epsilon, problem.label.clone().unwrap_or_else(|| "problem".into()))
            .map_err(|e| validation(e.to_string()))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        self.problem_spec_with(None)
    }

    pub fn grid_config(&self, radius: f64, ov: &Overrides) -> Result<GridConfig, ConfigError> {
        let g = self.grid.clone().unwrap_or_default();
        let t_max = ov.t_max.or(g.t_max).unwrap_or(100.0);
        let mut cfg = GridConfig::for_radius(radius, t_max);
        if let Some(h) = ov.grid_h.or(g.h) {
            cfg.h = h;
        }
        cfg.threshold = ov.threshold.or(g.threshold);
        if let Some(m) = g.margin_cells {
            cfg.margin_cells = m;
        }
        if let Some(l) = g.refinement_levels {
            cfg.refinement_levels = l;
        }
        cfg.validate().map_err(|e| validation(e.to_string()))?;
        Ok(cfg)
    }

    pub fn snapshot_every(&self) -> Option<usize> {
        self.grid.as_ref().and_then(|g| g.snapshot_every)
    }

    pub fn sweep_config(&self, ov: &Overrides) -> Result<SweepConfig, ConfigError> {
        let s = section(&self.sweep, "sweep")?;
        let epsilons = EpsilonGrid {
            max: s.eps_max,
            min: s.eps_min,
            count: s.count,
        };
        epsilons.validate().map_err(|e| validation(e.to_string()))?;
        let spec = self.problem_spec_with(Some(s.eps_max))?;
        let grid = self.grid_config(spec.radius(), ov)?;
        let mut cfg = SweepConfig::new(spec, epsilons, grid);
        cfg.workers = ov.workers.or(s.workers).unwrap_or(1);
        if let Some(t) = s.tolerance {
            cfg.tolerance = t;
        }
        cfg.expected = match &s.expected {
            None => None,
            Some(e) => Some(match e.law {
                ExpectedName::Global => {
                    forbid(e.exponent, "exponent", "sweep.expected")?;
                    LawKind::Global
                }
                ExpectedName::Power => LawKind::Power {
                    exponent: need(e.exponent, "exponent", "sweep.expected")?,
                },
                ExpectedName::Exp => LawKind::Exp {
                    exponent: need(e.exponent, "exponent", "sweep.expected")?,
                },
            }),
        };
        cfg.validate().map_err(|e| validation(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[problem]
epsilon = 0.2
[[problem.terms]]
kind = "power"
r = 2.0

[data]
radius = 1.5
g = [{ amplitude = 1.0, center = 0.0, width = 1.0 }]
"#;

    #[test]
    fn minimal_b_only_spec() {
        let cfg = parse_str(MINIMAL).unwrap();
        let spec = cfg.problem_spec().unwrap();
        assert_eq!(spec.epsilon, 0.2);
        assert_eq!(spec.terms[0].kind, TermKind::Power { r: 2.0 });
        assert_eq!(spec.terms[0].weight, WeightSpec::Constant { value: 1.0 });
        assert!(!spec.data.g_zero_mean());
    }

    #[test]
    fn r_equal_one_names_the_condition() {
        let text = MINIMAL.replace("r = 2.0", "r = 1.0");
        let err = parse_str(&text).unwrap().problem_spec().unwrap_err();
        assert!(matches!(&err, ConfigError::Validation(m) if m.contains("r > 1 required")), "{err}");
    }

    #[test]
    fn unknown_keys_are_errors_with_line() {
        let text = MINIMAL.replace("epsilon = 0.2", "epsilon = 0.2\nepsilom = 0.3");
        match parse_str(&text) {
            Err(ConfigError::Parse { line, key, .. }) => {
                assert_eq!(line, Some(4));
                assert_eq!(key.as_deref(), Some("epsilom"));
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("r = 2.0", "r = 2.0\np = 3.0");
        let err = parse_str(&text).unwrap().problem_spec().unwrap_err();
        assert!(matches!(err, ConfigError::Parse { key: Some(k), .. } if k == "problem.terms[0].p"));
    }

    #[test]
    fn three_point_sweep_is_rejected() {
        let text = format!("{MINIMAL}\n[sweep]\neps_max = 0.4\neps_min = 0.1\ncount = 3\n");
        let err = parse_str(&text).unwrap().sweep_config(&Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("count ≥ 4"), "{err}");
    }

    #[test]
    fn flags_override_file_values() {
        let text = format!("{MINIMAL}\n[grid]\nh = 0.05\nt_max = 30.0\n");
        let cfg = parse_str(&text).unwrap();
        let g = cfg.grid_config(1.5, &Overrides::default()).unwrap();
        assert_eq!((g.h, g.t_max), (0.05, 30.0));
        let ov = Overrides {
            grid_h: Some(0.01),
            t_max: Some(5.0),
            threshold: Some(1e4),
            workers: None,
        };
        let g = cfg.grid_config(1.5, &ov).unwrap();
        assert_eq!((g.h, g.t_max, g.threshold), (0.01, 5.0, Some(1e4)));
        let g = parse_str(MINIMAL).unwrap().grid_config(1.5, &Overrides::default()).unwrap();
        assert_eq!((g.h, g.t_max), (0.015, 100.0));
    }

    #[test]
    fn weights_and_smooth_terms() {
        let text = MINIMAL.replace(
            "r = 2.0",
            "r = 2.0\nweight = { kind = \"characteristic\", a = 0.5, b = 0.0 }\n[[problem.terms]]\nkind = \"smooth\"\np = 2\nq = 1",
        );
        let spec = parse_str(&text).unwrap().problem_spec().unwrap();
        assert_eq!(spec.terms[0].weight, WeightSpec::Characteristic { a: 0.5, b: 0.0, c: -1.0 });
        assert_eq!(spec.terms[1].kind, TermKind::SmoothMixed { p: 2, q: 1 });
        let bad = MINIMAL.replace("r = 2.0", "r = 2.0\nweight = { kind = \"constant\", k = 1.0 }");
        assert!(parse_str(&bad).unwrap().problem_spec().is_err());
    }
}
