//! Run configuration (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asymptotics::VirtualStates;
use crate::error::{Error, Result};
use crate::field_model::{io, Backing, Preset, QuadratureSpec, ScalarField2D};
use crate::validator::ValidatorSpec;

/// A field given by preset parameters or a data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    /// `2β/(1+r²)²`.
    RadialRational { beta: f64 },
    /// `v0 (1+r²)^{-σ}`.
    RadialPower { v0: f64, sigma: f64 },
    Gaussian { amplitude: f64, width: f64 },
    /// CSV `r,value`.
    RadialTable { path: PathBuf, decay_exponent: f64 },
    /// CSV `x,y,value` or PWC2 binary.
    Grid { path: PathBuf, decay_exponent: f64 },
}

impl FieldSpec {
    fn path(&self) -> Option<&Path> {
        match self {
            FieldSpec::RadialTable { path, .. } | FieldSpec::Grid { path, .. } => Some(path),
            _ => None,
        }
    }

    /// Builds the field; relative paths resolve against `base`.
    pub fn build(&self, base: &Path, nonneg: bool) -> Result<ScalarField2D> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        match self {
            FieldSpec::Zero => ScalarField2D::preset(Preset::Zero, nonneg),
            FieldSpec::RadialRational { beta } => ScalarField2D::preset(Preset::Rational { beta: *beta }, nonneg),
            FieldSpec::RadialPower { v0, sigma } => {
                ScalarField2D::preset(Preset::Power { v0: *v0, sigma: *sigma }, nonneg)
            }
            FieldSpec::Gaussian { amplitude, width } => {
                ScalarField2D::preset(Preset::Gaussian { amplitude: *amplitude, width: *width }, nonneg)
            }
            FieldSpec::RadialTable { path, decay_exponent } => {
                let t = io::read_radial_table(&resolve(path))?;
                ScalarField2D::new(Backing::RadialTable(t), *decay_exponent, nonneg)
            }
            FieldSpec::Grid { path, decay_exponent } => {
                let g = io::read_grid(&resolve(path))?;
                ScalarField2D::new(Backing::Grid(g), *decay_exponent, nonneg)
            }
        }
    }
}

/// Tolerances used by `validate` to decide the exit status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Relative error of linear branches at the smallest ε.
    pub linear_rel_tol: f64,
    /// Absolute error of fitted scaling exponents.
    pub exponent_tol: f64,
    /// Relative error of fitted scaling coefficients.
    pub coefficient_tol: f64,
    /// Relative error of Birman–Schwinger slopes.
    pub slope_tol: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self { linear_rel_tol: 0.1, exponent_tol: 0.15, coefficient_tol: 0.2, slope_tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldSpec,
    pub potential: FieldSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub validator: ValidatorSpec,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub virtual_states: VirtualStates,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Directory that relative data paths refer to (the config's own).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Referenced files exist and every ε lies in `(0, 1)`.
    pub fn check(&self) -> Result<()> {
        for (name, spec) in [("field", &self.field), ("potential", &self.potential)] {
            if let Some(p) = spec.path() {
                let full = if p.is_absolute() { p.to_path_buf() } else { self.base_dir.join(p) };
                if !full.exists() {
                    return Err(Error::Config(format!("{name}.path: file {} does not exist", full.display())));
                }
            }
        }
        check_eps(&self.validator.eps).map_err(|e| Error::Config(format!("validator.eps: {e}")))?;
        self.quadrature.validate().map_err(|e| Error::Config(format!("quadrature: {e}")))?;
        Ok(())
    }

    pub fn build_field(&self) -> Result<ScalarField2D> {
        self.field.build(&self.base_dir, false)
    }

    pub fn build_potential(&self) -> Result<ScalarField2D> {
        self.potential.build(&self.base_dir, true)
    }
}

pub fn check_eps(eps: &[f64]) -> Result<()> {
    match eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        Some(e) => Err(Error::Domain(format!("eps = {e} must lie in (0, 1)"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "field": {"kind": "radial-rational", "beta": 1.5},
        "potential": {"kind": "radial-power", "v0": 1.0, "sigma": 3.5},
        "validator": {"eps": [0.02, 0.01]}
    }"#;

    #[test]
    fn parses_presets() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.field, FieldSpec::RadialRational { beta: 1.5 });
        assert_eq!(c.validator.eps, vec![0.02, 0.01]);
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn round_trip_is_idempotent() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        let again = RunConfig::parse(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_json().unwrap(), again.to_json().unwrap());
    }

    #[test]
    fn diagnostics_name_the_problem() {
        let e = RunConfig::parse(r#"{"field": {"kind": "radial-rational"}, "potential": {"kind": "zero"}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("beta") && e.contains("line"), "{e}");
        let e = RunConfig::parse(r#"{"field": {"kind": "zero"}}"#).unwrap_err().to_string();
        assert!(e.contains("potential"), "{e}");
    }

    #[test]
    fn missing_file_and_bad_eps_are_rejected() {
        let mut c = RunConfig::parse(SAMPLE).unwrap();
        c.potential = FieldSpec::RadialTable { path: "nope.csv".into(), decay_exponent: 4.0 };
        assert!(matches!(c.check(), Err(Error::Config(_))));
        let mut c = RunConfig::parse(SAMPLE).unwrap();
        c.validator.eps = vec![0.5, 1.0];
        assert!(c.check().is_err());
    }
}
