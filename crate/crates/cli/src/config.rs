//! JSON run configuration, schema version 1.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "group": "SO3",
//!   "curve": { "fourier": { "period": 6.283185307179586,
//!                           "cos": [[0.0, 0.3], [0.0], [0.4]],
//!                           "sin": [[0.0], [0.0, 0.3], [0.0]] } },
//!   "grid": { "n_t": 256, "n_s": 64 },
//!   "homotopy": "linear_scale",
//!   "tolerances": { "splitting": 1e-6 }
//! }
//! ```
//!
//! The `rigidbody` command takes a `rigid_body` block instead of `curve`.

use std::fmt;
use std::path::Path;

use floquet_lie::integrator::{FourierCoefficients, PeriodicCurve, Segment};
use floquet_lie::phases::{HomotopyKind, Tolerances};
use floquet_lie::{AlgebraElement, GroupId};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSpec>,
    pub grid: GridSpec,
    #[serde(default)]
    pub homotopy: HomotopyKind,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rigid_body: Option<RigidBodySpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Exactly one of the two forms; serde rejects objects with both keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Fourier(FourierSpec),
    Piecewise(PiecewiseSpec),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientBasis {
    /// Algebra coordinates of the library.
    #[default]
    Coordinates,
    /// SL(2,R) only: matrix entries `(a1, a2, a3)` of `[[a1, a2], [a3, -a1]]`.
    Sl2Entries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSpec {
    pub period: f64,
    #[serde(default)]
    pub basis: CoefficientBasis,
    /// `cos[i][n]` multiplies `cos(2 pi n t / T)` in component `i`.
    pub cos: [Vec<f64>; 3],
    #[serde(default = "empty_harmonics")]
    pub sin: [Vec<f64>; 3],
}

fn empty_harmonics() -> [Vec<f64>; 3] {
    [Vec::new(), Vec::new(), Vec::new()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseSpec {
    pub period: f64,
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub value: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_t: usize,
    pub n_s: usize,
}

/// Optional overrides of the library defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splitting: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodicity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_jump: Option<f64>,
}

impl ToleranceSpec {
    pub fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            drift: self.drift.unwrap_or(d.drift),
            splitting: self.splitting.unwrap_or(d.splitting),
            periodicity: self.periodicity.unwrap_or(d.periodicity),
            branch_jump: self.branch_jump.unwrap_or(d.branch_jump),
        }
    }

    fn slot(&mut self, key: &str) -> Option<&mut Option<f64>> {
        match key {
            "drift" => Some(&mut self.drift),
            "splitting" => Some(&mut self.splitting),
            "periodicity" => Some(&mut self.periodicity),
            "branch_jump" => Some(&mut self.branch_jump),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidBodySpec {
    pub inertia: [f64; 3],
    pub radius: f64,
    pub theta_max: f64,
}

/// File names inside the `--out` directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_sweep")]
    pub sweep_csv: String,
    #[serde(default = "default_orbits")]
    pub orbit_csv: String,
}

fn default_report() -> String {
    "report.json".into()
}

fn default_sweep() -> String {
    "sweep.csv".into()
}

fn default_orbits() -> String {
    "orbits.csv".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            report: default_report(),
            sweep_csv: default_sweep(),
            orbit_csv: default_orbits(),
        }
    }
}

/// A configuration problem, located by its JSON path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// What a command needs from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    Curve,
    RigidBody,
}

pub fn parse(text: &str) -> Result<AnalysisConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(path, e.into_inner().to_string())
    })
}

pub fn load(path: &Path) -> Result<AnalysisConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// Applies `KEY=VAL` tolerance overrides from the command line.
pub fn apply_overrides(
    config: &mut AnalysisConfig,
    overrides: &[String],
) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            ConfigError::new(
                "--tolerance-override",
                format!("expected KEY=VAL, got `{item}`"),
            )
        })?;
        let key = key.trim().trim_start_matches("tolerances.");
        let path = format!("tolerances.{key}");
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| ConfigError::new(&path, format!("`{value}` is not a number")))?;
        let slot = config.tolerances.slot(key).ok_or_else(|| {
            ConfigError::new(
                &path,
                "unknown tolerance; expected drift, splitting, periodicity or branch_jump",
            )
        })?;
        *slot = Some(value);
    }
    Ok(())
}

fn check_grid(value: usize, path: &str, symbol: &str) -> Result<(), ConfigError> {
    if value >= 8 && value.is_power_of_two() {
        Ok(())
    } else {
        Err(ConfigError::new(
            path,
            format!("{symbol} must be a power of two >= 8, got {value}"),
        ))
    }
}

fn check_positive(value: Option<f64>, path: &str) -> Result<(), ConfigError> {
    match value {
        Some(v) if !(v.is_finite() && v > 0.0) => {
            Err(ConfigError::new(path, format!("must be positive, got {v}")))
        }
        _ => Ok(()),
    }
}

impl AnalysisConfig {
    pub fn validate(&self, need: Requirement) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!(
                    "unsupported schema version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        check_grid(self.grid.n_t, "grid.n_t", "N_t (n_t)")?;
        check_grid(self.grid.n_s, "grid.n_s", "N_s (n_s)")?;
        let t = &self.tolerances;
        check_positive(t.drift, "tolerances.drift")?;
        check_positive(t.splitting, "tolerances.splitting")?;
        check_positive(t.periodicity, "tolerances.periodicity")?;
        check_positive(t.branch_jump, "tolerances.branch_jump")?;
        if let Some(b) = t.branch_jump {
            if b >= 1.0 {
                return Err(ConfigError::new(
                    "tolerances.branch_jump",
                    "must be below 1",
                ));
            }
        }
        match need {
            Requirement::Curve => {
                if self.group.is_none() {
                    return Err(ConfigError::new("group", "missing field `group`"));
                }
                if self.curve.is_none() {
                    return Err(ConfigError::new("curve", "missing field `curve`"));
                }
                if self.homotopy == HomotopyKind::UserSupplied {
                    return Err(ConfigError::new(
                        "homotopy",
                        "user_supplied families are only available through the library",
                    ));
                }
                self.curve()?;
            }
            Requirement::RigidBody => {
                let rb = self
                    .rigid_body
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("rigid_body", "missing field `rigid_body`"))?;
                if matches!(self.group, Some(g) if g != GroupId::So3) {
                    return Err(ConfigError::new("group", "the rigid body lives on SO3"));
                }
                for (i, m) in rb.inertia.iter().enumerate() {
                    check_positive(Some(*m), &format!("rigid_body.inertia[{i}]"))?;
                }
                check_positive(Some(rb.radius), "rigid_body.radius")?;
                check_positive(Some(rb.theta_max), "rigid_body.theta_max")?;
            }
        }
        Ok(())
    }

    /// The coefficient curve; requires `group` and `curve`.
    pub fn curve(&self) -> Result<PeriodicCurve, ConfigError> {
        let group = self
            .group
            .ok_or_else(|| ConfigError::new("group", "missing field `group`"))?;
        let spec = self
            .curve
            .as_ref()
            .ok_or_else(|| ConfigError::new("curve", "missing field `curve`"))?;
        match spec {
            CurveSpec::Fourier(f) => {
                let coefficients = FourierCoefficients {
                    cos: f.cos.clone(),
                    sin: f.sin.clone(),
                };
                let curve = match f.basis {
                    CoefficientBasis::Coordinates => {
                        PeriodicCurve::fourier(group, f.period, coefficients)
                    }
                    CoefficientBasis::Sl2Entries => {
                        if group != GroupId::Sl2r {
                            return Err(ConfigError::new(
                                "curve.fourier.basis",
                                "sl2_entries requires group SL2R",
                            ));
                        }
                        floquet_lie::euler::sl2_euler_coords(&coefficients, f.period)
                    }
                };
                curve.map_err(|e| ConfigError::new("curve.fourier", e.to_string()))
            }
            CurveSpec::Piecewise(p) => {
                let segments = p
                    .segments
                    .iter()
                    .map(|s| Segment {
                        t_start: s.t_start,
                        t_end: s.t_end,
                        value: AlgebraElement::new(group, s.value),
                    })
                    .collect();
                PeriodicCurve::piecewise(group, p.period, segments)
                    .map_err(|e| ConfigError::new("curve.piecewise", e.to_string()))
            }
        }
    }
}
