//! JSON run configuration.
//!
//! Every section is optional and falls back to the reference experiment; any
//! unknown key is an error. Errors carry the dotted path of the field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atom::AtomSpec;
use crate::error::{Error, Result};
use crate::experiments::{Experiment, InitialState, ScanKind, CALIBRATED_DEPTH};
use crate::propagation::{
    coupling_constant, MediumSpec, PropagationGrid, CELL_LENGTH, REFERENCE_DENSITY,
};
use crate::pulses::ExperimentTiming;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomSpec,
    pub sequence: ExperimentTiming,
    pub medium: MediumConfig,
    pub grid: PropagationGrid,
    pub initial: InitialState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    pub output: OutputConfig,
}

/// The medium, with its coupling given in exactly one of three ways: a depth
/// `β = ηL/γ` shared by both channels, explicit `eta_ac`/`eta_ab`, or the
/// transition frequency `nu` (rad/ns) and dipole moment `dipole` (C·m).
/// With none of them the calibrated depth applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    pub density: f64,
    pub length: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_ac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_ab: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dipole: Option<f64>,
    /// Free text, ignored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            density: REFERENCE_DENSITY,
            length: CELL_LENGTH,
            depth: None,
            eta_ac: None,
            eta_ab: None,
            nu: None,
            dipole: None,
            note: None,
        }
    }
}

impl MediumConfig {
    pub fn resolve(&self) -> Result<MediumSpec> {
        let forms = [
            self.depth.is_some(),
            self.eta_ac.is_some() || self.eta_ab.is_some(),
            self.nu.is_some() || self.dipole.is_some(),
        ];
        if forms.iter().filter(|&&f| f).count() > 1 {
            return Err(Error::invalid(
                "medium",
                "give the coupling as only one of depth, eta_ac/eta_ab or nu/dipole",
            ));
        }
        let medium = match (self.eta_ac, self.eta_ab, self.nu, self.dipole) {
            (Some(eta_ac), Some(eta_ab), ..) => MediumSpec {
                density: self.density,
                length: self.length,
                eta_ac,
                eta_ab,
            },
            (Some(_), None, ..) => {
                return Err(Error::invalid("medium.eta_ab", "required with eta_ac"))
            }
            (None, Some(_), ..) => {
                return Err(Error::invalid("medium.eta_ac", "required with eta_ab"))
            }
            (_, _, Some(nu), Some(dipole)) => {
                for (name, v) in [("nu", nu), ("dipole", dipole)] {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(Error::invalid(
                            format!("medium.{name}"),
                            format!("must be >= 0 (got {v})"),
                        ));
                    }
                }
                let eta = coupling_constant(nu, self.density.max(0.0), dipole);
                MediumSpec {
                    density: self.density,
                    length: self.length,
                    eta_ac: eta,
                    eta_ab: eta,
                }
            }
            (_, _, Some(_), None) => {
                return Err(Error::invalid("medium.dipole", "required with nu"))
            }
            (_, _, None, Some(_)) => {
                return Err(Error::invalid("medium.nu", "required with dipole"))
            }
            _ => {
                let beta = self.depth.unwrap_or(CALIBRATED_DEPTH);
                if !(beta.is_finite() && beta >= 0.0) {
                    return Err(Error::invalid(
                        "medium.depth",
                        format!("must be >= 0 (got {beta})"),
                    ));
                }
                // The depth refers to the reference density; η follows N.
                MediumSpec::from_depth(REFERENCE_DENSITY, self.length, beta)
                    .with_density(self.density)
            }
        };
        medium.validate().map_err(|e| e.within("medium"))?;
        Ok(medium)
    }
}

/// Scan parameters as an explicit list or an inclusive `start..stop` range.
/// With neither, the kind's default grid is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub kind: ScanKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl ScanConfig {
    pub fn new(kind: ScanKind) -> Self {
        ScanConfig {
            kind,
            values: None,
            start: None,
            stop: None,
            step: None,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let range = [self.start, self.stop, self.step];
        let values = match (&self.values, range) {
            (Some(_), r) if r.iter().any(Option::is_some) => {
                return Err(Error::invalid(
                    "scan",
                    "give either values or start/stop/step, not both",
                ))
            }
            (Some(v), _) => v.clone(),
            (None, [None, None, None]) => self.kind.default_values(),
            (None, [Some(start), Some(stop), Some(step)]) => {
                if !(step.is_finite()
                    && step > 0.0
                    && start.is_finite()
                    && stop.is_finite()
                    && stop >= start)
                {
                    return Err(Error::invalid(
                        "scan.step",
                        "need finite start <= stop and step > 0",
                    ));
                }
                let n = ((stop - start) / step).round();
                if (start + n * step - stop).abs() > 1e-9 * step.max(stop.abs()) {
                    return Err(Error::invalid(
                        "scan.stop",
                        "stop - start must be a whole number of steps",
                    ));
                }
                (0..=n as usize).map(|k| start + k as f64 * step).collect()
            }
            (None, _) => {
                return Err(Error::invalid(
                    "scan",
                    "start, stop and step must be given together",
                ))
            }
        };
        if values.is_empty() {
            return Err(Error::invalid("scan.values", "must not be empty"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "scan.values",
                format!("must be finite (got {v})"),
            ));
        }
        Ok(values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl RunConfig {
    pub fn experiment(&self) -> Result<Experiment> {
        let experiment = Experiment {
            atom: self.atom.clone(),
            timing: self.sequence.clone(),
            medium: self.medium.resolve()?,
            grid: self.grid.clone(),
            initial: self.initial.clone(),
        };
        experiment.validate()?;
        Ok(experiment)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment()?;
        if let Some(scan) = &self.scan {
            scan.values()?;
        }
        if self.output.formats.is_empty() {
            return Err(Error::invalid(
                "output.formats",
                "must name at least one format",
            ));
        }
        Ok(())
    }

    /// Parse and validate a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Parse {
                path: if path == "." { "config".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_reference_experiment() {
        let config = RunConfig::from_json("{}").unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.experiment().unwrap(), Experiment::default());
    }

    #[test]
    fn committed_default_matches_builtin() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
        let config = load_config(&path).unwrap();
        assert_eq!(config.experiment().unwrap(), Experiment::default());
        assert_eq!(config.medium.depth, Some(CALIBRATED_DEPTH));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = RunConfig::from_json(r#"{"medium": {"densty": 1e11}}"#).unwrap_err();
        assert!(err.to_string().starts_with("medium"), "{err}");
        assert!(err.to_string().contains("densty"), "{err}");
        let err = RunConfig::from_json(r#"{"grid": {"nz": 10, "dtt": 0.1}}"#).unwrap_err();
        assert!(err.to_string().contains("dtt"), "{err}");
    }

    #[test]
    fn negative_density_names_the_field() {
        let err = RunConfig::from_json(r#"{"medium": {"density": -1}}"#).unwrap_err();
        assert!(err.to_string().starts_with("medium.density:"), "{err}");
    }

    #[test]
    fn type_errors_carry_a_path() {
        let err = RunConfig::from_json(r#"{"sequence": {"rise": "fast"}}"#).unwrap_err();
        assert!(err.to_string().starts_with("sequence.rise"), "{err}");
    }

    #[test]
    fn delay_range_reproduces_default_axis() {
        let config = RunConfig::from_json(
            r#"{"scan": {"kind": "delay", "start": -100, "stop": 100, "step": 5}}"#,
        )
        .unwrap();
        let values = config.scan.unwrap().values().unwrap();
        assert_eq!(values.len(), 41);
        assert_eq!(values, ScanKind::Delay.default_values());
    }

    #[test]
    fn scan_forms_are_exclusive() {
        let text = r#"{"scan": {"kind": "power", "values": [1.0], "step": 0.1}}"#;
        assert!(RunConfig::from_json(text).is_err());
        let text = r#"{"scan": {"kind": "power", "start": 0.1, "stop": 1.0}}"#;
        assert!(RunConfig::from_json(text).is_err());
    }

    #[test]
    fn medium_forms_are_exclusive() {
        let text = r#"{"medium": {"depth": 2.0, "eta_ac": 0.1, "eta_ab": 0.1}}"#;
        assert!(RunConfig::from_json(text).is_err());
        let text = r#"{"medium": {"eta_ac": 0.1}}"#;
        let err = RunConfig::from_json(text).unwrap_err();
        assert!(err.to_string().starts_with("medium.eta_ab"), "{err}");
    }

    #[test]
    fn depth_scales_with_density() {
        let half = MediumConfig {
            density: 0.5e11,
            depth: Some(4.0),
            ..MediumConfig::default()
        };
        let m = half.resolve().unwrap();
        assert!((m.depth().0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dipole_form_uses_the_coupling_constant() {
        let c = MediumConfig {
            nu: Some(2.0),
            dipole: Some(1e-29),
            ..MediumConfig::default()
        };
        let m = c.resolve().unwrap();
        assert_eq!(m.eta_ab, coupling_constant(2.0, 1e11, 1e-29));
    }

    #[test]
    fn round_trip_is_idempotent() {
        let text = r#"{"medium": {"depth": 3.5, "note": "x"}, "grid": {"nz": 40},
                       "scan": {"kind": "density", "values": [4e10, 1e11]}, "output": {"formats": ["csv"]}}"#;
        let config = RunConfig::from_json(text).unwrap();
        let again = RunConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(config, again);
        assert_eq!(config.to_json(), again.to_json());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_config(Path::new("/nonexistent/run.json")).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Io);
    }
}
