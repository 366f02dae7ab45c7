//! JSON run configuration.

use std::path::{Path, PathBuf};

use qonn_core::fock::SYNTHESIS_CUTOFF;
use qonn_core::model::{QonnArchitecture, Readout};
use qonn_core::training::{DatasetKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{config, io_at, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub architecture: Option<ArchitectureConfig>,
    pub task: TaskConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("qonn-out")
}

/// Network shape. Exactly one of `outputs` (homodyne readout modes) and
/// `moments` (mode whose order-4 moment set is read out) is required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub n_modes: usize,
    #[serde(default)]
    pub n_layers: Option<usize>,
    /// Subtracted modes of each layer.
    pub subtractions: Vec<Vec<usize>>,
    #[serde(default)]
    pub outputs: Option<Vec<usize>>,
    #[serde(default)]
    pub moments: Option<usize>,
}

impl ArchitectureConfig {
    pub fn build(&self) -> Result<QonnArchitecture> {
        if let Some(l) = self.n_layers {
            if l != self.subtractions.len() {
                return Err(config(format!(
                    "architecture.n_layers is {l} but {} subtraction sets are given",
                    self.subtractions.len()
                )));
            }
        }
        let readout = match (&self.outputs, self.moments) {
            (Some(o), None) => Readout::Quadratures(o.clone()),
            (None, Some(m)) => Readout::Moments(m),
            _ => return Err(config("architecture needs exactly one of `outputs` and `moments`")),
        };
        QonnArchitecture::new(self.n_modes, self.subtractions.clone(), readout)
            .map_err(|e| config(format!("architecture: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    Curvefit { dataset: DatasetKind },
    Classify { dataset: DatasetKind },
    Synth { dataset: DatasetKind },
    Validate(ValidateConfig),
    PlanStats(PlanStatsConfig),
    ReportActivation(ActivationConfig),
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::Curvefit { .. } => "curvefit",
            TaskConfig::Classify { .. } => "classify",
            TaskConfig::Synth { .. } => "synth",
            TaskConfig::Validate(_) => "validate",
            TaskConfig::PlanStats(_) => "plan-stats",
            TaskConfig::ReportActivation(_) => "report-activation",
        }
    }
}

/// Random-circuit comparison of the engine against the Fock oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub circuits: usize,
    pub cutoff: usize,
    /// Largest allowed `|engine − oracle| / max(1, |oracle|)`.
    pub tolerance: f64,
    /// Longest operator string compared.
    pub order: usize,
    pub r_max: f64,
    pub alpha_max: f64,
    pub delta_max: f64,
    /// Oracle leakage above this aborts the run.
    pub leakage_threshold: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            circuits: 16,
            cutoff: 150,
            tolerance: 1e-8,
            order: 5,
            r_max: 1.0,
            alpha_max: 1.5,
            delta_max: 0.5,
            leakage_threshold: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanStatsConfig {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Subtraction,
    Addition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivationConfig {
    pub kind: ActivationKind,
    pub r_values: Vec<f64>,
    pub alpha_range: (f64, f64),
    pub points: usize,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        ActivationConfig {
            kind: ActivationKind::Subtraction,
            r_values: vec![0.25, 0.5, 1.0, 1.5],
            alpha_range: (-3.0, 3.0),
            points: 201,
        }
    }
}

impl ActivationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(config("report-activation needs at least 2 points"));
        }
        if self.r_values.is_empty() {
            return Err(config("report-activation needs at least one r value"));
        }
        if !(self.alpha_range.0 < self.alpha_range.1) {
            return Err(config("alpha_range must be increasing"));
        }
        Ok(())
    }
}

/// Parameters of the cubic-phase moment table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthTargets {
    pub gamma: f64,
    pub samples: usize,
    pub cutoff: usize,
}

impl Default for SynthTargets {
    fn default() -> Self {
        SynthTargets { gamma: 0.2, samples: 20, cutoff: SYNTHESIS_CUTOFF }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_at(path))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate().map_err(|e| config(format!("training: {e}")))?;
        match &self.task {
            TaskConfig::Curvefit { dataset } => {
                let ok = matches!(dataset, DatasetKind::Curve { .. } | DatasetKind::Csv { n_classes: None, .. });
                if !ok {
                    return Err(config("curvefit needs a `curve` dataset or a `csv` dataset without n_classes"));
                }
            }
            TaskConfig::Classify { dataset } => {
                let ok = matches!(
                    dataset,
                    DatasetKind::Moons { .. }
                        | DatasetKind::Circles { .. }
                        | DatasetKind::Csv { n_classes: Some(_), .. }
                );
                if !ok {
                    return Err(config("classify needs a `moons`, `circles` or labelled `csv` dataset"));
                }
            }
            TaskConfig::Synth { dataset } => {
                if !matches!(dataset, DatasetKind::CubicPhase { .. }) {
                    return Err(config("synth needs a `cubic_phase` dataset"));
                }
            }
            TaskConfig::Validate(v) => {
                if v.circuits == 0 || v.order == 0 {
                    return Err(config("validate needs at least one circuit and order >= 1"));
                }
                if v.r_max < 0.0 || v.r_max > qonn_core::gaussian::SQUEEZING_BOUND {
                    return Err(config("validate.r_max must lie in [0, 1.7]"));
                }
            }
            TaskConfig::PlanStats(_) => {}
            TaskConfig::ReportActivation(a) => a.validate()?,
        }
        let needs_arch = matches!(
            self.task,
            TaskConfig::Curvefit { .. }
                | TaskConfig::Classify { .. }
                | TaskConfig::Synth { .. }
                | TaskConfig::PlanStats(_)
        );
        match &self.architecture {
            Some(a) => {
                a.build()?;
            }
            None if needs_arch => {
                return Err(config(format!("task `{}` needs an architecture block", self.task.name())))
            }
            None => {}
        }
        Ok(())
    }

    pub fn architecture(&self) -> Result<QonnArchitecture> {
        self.architecture.as_ref().ok_or_else(|| config("missing architecture block"))?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn minimal_classify_config() {
        let cfg = parse(
            r#"{"architecture": {"n_modes": 2, "subtractions": [[0]], "outputs": [0, 1]},
                "task": {"kind": "classify", "dataset": {"kind": "moons"}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.training, TrainConfig::default());
        assert_eq!(cfg.architecture().unwrap().n_outputs(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = [
            r#"{"task": {"kind": "validate"}, "extra": 1}"#,
            r#"{"task": {"kind": "validate", "circuitz": 3}}"#,
            r#"{"task": {"kind": "validate"}, "training": {"sead": 1}}"#,
            r#"{"architecture": {"n_modes": 1, "subtractions": [[0]], "outputs": [0], "x": 0},
                "task": {"kind": "plan-stats"}}"#,
        ];
        for b in bad {
            assert!(matches!(parse(b), Err(crate::error::CliError::Config(_))), "{b}");
        }
    }

    #[test]
    fn task_and_dataset_must_agree() {
        let r = parse(
            r#"{"architecture": {"n_modes": 2, "subtractions": [[0]], "outputs": [0]},
                "task": {"kind": "curvefit", "dataset": {"kind": "moons"}}}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn architecture_consistency() {
        let a = ArchitectureConfig {
            n_modes: 2,
            n_layers: Some(2),
            subtractions: vec![vec![0]],
            outputs: Some(vec![0]),
            moments: None,
        };
        assert!(a.build().is_err());
        let a = ArchitectureConfig { n_layers: None, moments: Some(0), ..a };
        assert!(a.build().is_err());
        let a = ArchitectureConfig { outputs: None, ..a };
        assert_eq!(a.build().unwrap().readout, Readout::Moments(0));
    }

    #[test]
    fn training_tasks_need_an_architecture() {
        assert!(parse(r#"{"task": {"kind": "synth", "dataset": {"kind": "cubic_phase"}}}"#).is_err());
        assert!(parse(r#"{"task": {"kind": "report-activation", "points": 11}}"#).is_ok());
    }
}
