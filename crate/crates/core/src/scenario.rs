//! Scenario files: one strict JSON document per run.
//!
//! ```json
//! {
//!   "version": 1,
//!   "id": "head_on",
//!   "initial": { "atoms": [[0.5, 0.0, 1.0], [0.5, 1.0, -1.0]] },
//!   "times": [0.0, 0.25, 0.5, 1.0],
//!   "suites": ["equivalence", "entropy"],
//!   "tolerances": { "equivalence": 1e-9 },
//!   "seed": 7
//! }
//! ```
//!
//! `initial` is one of `{"atoms": [[m, x, v], ...]}`, `{"csv": "path"}` (an
//! `m,x,v` file, relative to the scenario file) or
//! `{"family": {"name": ..., "n": N}}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{discretize, MassVelocityState, VelocityField};

pub const FORMAT_VERSION: u32 = 1;

pub const SUITES: [&str; 5] = ["cone", "stability", "equivalence", "entropy", "gradflow"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub id: String,
    pub initial: Initial,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "all_suites")]
    pub suites: Vec<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

fn all_suites() -> Vec<String> {
    SUITES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Initial {
    Atoms(Vec<[f64; 3]>),
    Csv(PathBuf),
    Family(Family),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Family {
    pub name: FamilyName,
    pub n: usize,
}

/// Analytic initial data, discretized with `n` equal masses at midpoint
/// quantiles of the uniform distribution on `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    /// `v(x) = ½ − x`: everything meets at `x = ½` at `t = 1`.
    Compression,
    /// `v(x) = x − ½`: free expansion.
    Rarefaction,
    /// `v(x) = −sin(2πx)`.
    Sine,
    /// `v = +1` on the left half, `−1` on the right.
    TwoStream,
}

impl FamilyName {
    pub fn velocity(self, x: f64) -> f64 {
        match self {
            FamilyName::Compression => 0.5 - x,
            FamilyName::Rarefaction => x - 0.5,
            FamilyName::Sine => -(2.0 * std::f64::consts::PI * x).sin(),
            FamilyName::TwoStream => {
                if x < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Per-suite tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub cone: f64,
    pub stability: f64,
    pub equivalence: f64,
    pub entropy: f64,
    pub gradflow: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { cone: 1e-9, stability: 1e-9, equivalence: 1e-9, entropy: 1e-9, gradflow: 1e-6 }
    }
}

impl Tolerances {
    pub fn get(&self, suite: &str) -> Option<f64> {
        match suite {
            "cone" => Some(self.cone),
            "stability" => Some(self.stability),
            "equivalence" => Some(self.equivalence),
            "entropy" => Some(self.entropy),
            "gradflow" => Some(self.gradflow),
            _ => None,
        }
    }

    /// Replaces every tolerance.
    pub fn uniform(tol: f64) -> Self {
        Self { cone: tol, stability: tol, equivalence: tol, entropy: tol, gradflow: tol }
    }
}

/// A parsed scenario plus the directory relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<LoadedScenario> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let scenario = Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedScenario { scenario, base_dir })
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Scenario(format!("unsupported version {}, expected {FORMAT_VERSION}", self.version)));
        }
        let safe = |c: char| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.');
        if self.id.is_empty() || self.id.starts_with('.') || !self.id.chars().all(safe) {
            return Err(Error::Scenario(format!("id `{}` is not a safe file name", self.id)));
        }
        for (i, &t) in self.times.iter().enumerate() {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Scenario(format!("times[{i}] = {t} is not a finite time >= 0")));
            }
            if i > 0 && t < self.times[i - 1] {
                return Err(Error::Scenario(format!("times must be nondecreasing: {} then {t}", self.times[i - 1])));
            }
        }
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(Error::Scenario(format!("unknown suite `{s}`; known: {}", SUITES.join(", "))));
            }
        }
        if let Initial::Family(f) = &self.initial {
            if f.n == 0 {
                return Err(Error::Scenario("family needs n >= 1".into()));
            }
        }
        let t = &self.tolerances;
        for v in [t.cone, t.stability, t.equivalence, t.entropy, t.gradflow] {
            if !(v >= 0.0) {
                return Err(Error::Scenario(format!("tolerance {v} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Positive sample times, or a default grid if there are none.
    pub fn positive_times(&self) -> Vec<f64> {
        let ts: Vec<f64> = self.times.iter().copied().filter(|&t| t > 0.0).collect();
        if ts.is_empty() {
            vec![0.25, 0.5, 1.0, 2.0]
        } else {
            ts
        }
    }
}

impl LoadedScenario {
    pub fn id(&self) -> &str {
        &self.scenario.id
    }

    /// Builds the initial measure. `renormalize` rescales masses that do not
    /// sum to 1.
    pub fn initial_state(&self, renormalize: bool) -> Result<MassVelocityState> {
        match &self.scenario.initial {
            Initial::Atoms(atoms) => {
                let atoms: Vec<(f64, f64, f64)> = atoms.iter().map(|a| (a[0], a[1], a[2])).collect();
                if renormalize {
                    MassVelocityState::normalized(&atoms)
                } else {
                    MassVelocityState::new(&atoms)
                }
            }
            Initial::Csv(path) => {
                let full = self.base_dir.join(path);
                let file = fs::File::open(&full)
                    .map_err(|e| Error::Scenario(format!("cannot open {}: {e}", full.display())))?;
                MassVelocityState::read_csv(file, renormalize)
            }
            Initial::Family(f) => {
                let name = f.name;
                let v = move |x: f64| name.velocity(x);
                discretize(&|w| w, VelocityField::OfPosition(&v), f.n)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD_ON: &str = r#"{"version": 1, "id": "head_on",
        "initial": {"atoms": [[0.5, 0.0, 1.0], [0.5, 1.0, -1.0]]},
        "times": [0.0, 0.5, 1.0]}"#;

    #[test]
    fn parses_and_defaults() {
        let s = Scenario::from_json(HEAD_ON).unwrap();
        assert_eq!(s.suites.len(), 5);
        assert_eq!(s.tolerances, Tolerances::default());
        assert_eq!(s.positive_times(), vec![0.5, 1.0]);
        let loaded = LoadedScenario { scenario: s, base_dir: PathBuf::new() };
        assert_eq!(loaded.initial_state(false).unwrap().len(), 2);
    }

    #[test]
    fn strict_parsing() {
        let extra = HEAD_ON.replace("\"version\": 1,", "\"version\": 1, \"colour\": 3,");
        assert!(Scenario::from_json(&extra).is_err());
        let bad_id = HEAD_ON.replace("head_on", "../x");
        assert!(Scenario::from_json(&bad_id).is_err());
        let backwards = HEAD_ON.replace("[0.0, 0.5, 1.0]", "[1.0, 0.5]");
        assert!(Scenario::from_json(&backwards).is_err());
        let suite = HEAD_ON.replace("\"times\"", "\"suites\": [\"magic\"], \"times\"");
        assert!(Scenario::from_json(&suite).is_err());
    }

    #[test]
    fn families() {
        let text = r#"{"version": 1, "id": "c", "initial": {"family": {"name": "compression", "n": 4}}}"#;
        let s = Scenario::from_json(text).unwrap();
        let mu = LoadedScenario { scenario: s, base_dir: PathBuf::new() }.initial_state(false).unwrap();
        assert_eq!(mu.positions(), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(mu.velocities()[0], 0.375);
    }

    #[test]
    fn renormalize_atoms() {
        let text = HEAD_ON.replace("[0.5, 0.0, 1.0]", "[0.499999, 0.0, 1.0]");
        let loaded = LoadedScenario { scenario: Scenario::from_json(&text).unwrap(), base_dir: PathBuf::new() };
        assert!(loaded.initial_state(false).is_err());
        assert!((loaded.initial_state(true).unwrap().total_mass() - 1.0).abs() < 1e-15);
    }
}
