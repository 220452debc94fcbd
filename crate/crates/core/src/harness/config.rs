//! Experiment description, its TOML file form and the figure presets.
//!
//! Every key is optional; omitted keys take the values of
//! [`ExperimentConfig::default`]. Unknown keys are rejected. See
//! `docs/config.md` in the repository for the full schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DEFAULT_QUANTIZATION_UNIT_M;
use crate::protocol::DEFAULT_RESERVED_PREAMBLES;
use crate::signal::DEFAULT_SEQUENCE_LENGTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Shra,
    Conventional,
    Both,
}

impl Scheme {
    pub fn runs_shra(self) -> bool {
        matches!(self, Scheme::Shra | Scheme::Both)
    }

    pub fn runs_conventional(self) -> bool {
        matches!(self, Scheme::Conventional | Scheme::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Contention preamble count G.
    Preambles,
    /// Active devices per slot N (fixed arrivals).
    ActiveDevices,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Preambles => "Number of preambles",
            SweepAxis::ActiveDevices => "Total active IoT devices",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorChoice {
    /// Forecast equals the true active count.
    Oracle,
    /// Forecast is always zero.
    None,
    /// Load the model file named by `model`.
    Trained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionChoice {
    Ideal,
    Signal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalChoice {
    Fixed,
    Poisson,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingChoice {
    Constant,
    Uniform01,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SicPolicyChoice {
    Abort,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionRuleChoice {
    MultiUser,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub replications: usize,
    pub slots: usize,
    pub radii_m: Vec<f64>,
    pub quantization_unit_m: f64,
    pub gamma: f64,
    pub power_levels: usize,
    /// G when the axis is not `preambles`.
    pub preambles: usize,
    /// N when the axis is not `active_devices` and arrivals are fixed.
    pub active_devices: usize,
    pub predictor: PredictorChoice,
    pub model: Option<PathBuf>,
    pub detection: DetectionChoice,
    pub sequence_length: usize,
    pub noise_variance: f64,
    pub reserved_preambles: usize,
    pub urllc_fraction: f64,
    pub fading: FadingChoice,
    pub arrivals: ArrivalChoice,
    pub poisson_mean: f64,
    pub trace: Option<PathBuf>,
    pub sic_policy: SicPolicyChoice,
    pub prediction_rule: PredictionRuleChoice,
    /// Resource blocks per slot; absent means unlimited.
    pub resource_budget: Option<usize>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scheme: Scheme::Both,
            axis: SweepAxis::ActiveDevices,
            values: vec![35],
            replications: 1,
            slots: 1000,
            radii_m: vec![800.0],
            quantization_unit_m: DEFAULT_QUANTIZATION_UNIT_M,
            gamma: 1.0,
            power_levels: 3,
            preambles: 54,
            active_devices: 80,
            predictor: PredictorChoice::Oracle,
            model: None,
            detection: DetectionChoice::Ideal,
            sequence_length: DEFAULT_SEQUENCE_LENGTH,
            noise_variance: 0.0,
            reserved_preambles: DEFAULT_RESERVED_PREAMBLES,
            urllc_fraction: 0.0,
            fading: FadingChoice::Constant,
            arrivals: ArrivalChoice::Fixed,
            poisson_mean: 3.0,
            trace: None,
            sic_policy: SicPolicyChoice::Abort,
            prediction_rule: PredictionRuleChoice::MultiUser,
            resource_budget: None,
            seed: 42,
        }
    }
}

/// Named figure reproductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Successes vs preamble count, N = 80.
    Fig2,
    /// Successes vs active devices, G = 54.
    Fig3,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            other => Err(format!("unknown preset `{other}` (expected fig2 or fig3)")),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        }
    }

    pub fn config(self) -> ExperimentConfig {
        let base = ExperimentConfig {
            scheme: Scheme::Both,
            replications: 20,
            slots: 1000,
            radii_m: vec![600.0, 800.0],
            gamma: 1.0,
            power_levels: 3,
            predictor: PredictorChoice::Oracle,
            ..ExperimentConfig::default()
        };
        match self {
            Preset::Fig2 => ExperimentConfig {
                axis: SweepAxis::Preambles,
                values: (10..=60).step_by(5).collect(),
                active_devices: 80,
                ..base
            },
            Preset::Fig3 => ExperimentConfig {
                axis: SweepAxis::ActiveDevices,
                values: (5..=80).step_by(5).collect(),
                preambles: 54,
                ..base
            },
        }
    }

    /// Which values are fixed by the figure and which are chosen here.
    pub fn provenance(self) -> &'static str {
        match self {
            Preset::Fig2 => {
                "# fixed by the figure: active_devices = 80, power_levels = 3, radii_m = [600, 800], quantization_unit_m = 157\n\
                 # chosen defaults: values (G) = 10..60 step 5, gamma = 1, slots = 1000, replications = 20, oracle predictor\n"
            }
            Preset::Fig3 => {
                "# fixed by the figure: power_levels = 3, radii_m = [600, 800], quantization_unit_m = 157\n\
                 # chosen defaults: values (N) = 5..80 step 5, preambles = 54, gamma = 1, slots = 1000, replications = 20, oracle predictor\n"
            }
        }
    }
}

impl ExperimentConfig {
    /// Every violated constraint, one message each.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.values.is_empty() {
            problems.push("values must not be empty".to_string());
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            problems.push("values must be strictly increasing".to_string());
        }
        if self.axis == SweepAxis::Preambles && self.values.contains(&0) {
            problems.push("preamble counts (values) must be at least 1".to_string());
        }
        if self.replications < 1 {
            problems.push("replications must be at least 1".to_string());
        }
        if self.slots < 1 {
            problems.push("slots must be at least 1".to_string());
        }
        if self.radii_m.is_empty() {
            problems.push("radii_m must not be empty".to_string());
        }
        for r in &self.radii_m {
            if !(*r > 0.0 && r.is_finite()) {
                problems.push(format!("cell radius must be > 0, got {r}"));
            }
        }
        if !(self.quantization_unit_m > 0.0 && self.quantization_unit_m.is_finite()) {
            problems.push(format!(
                "quantization_unit_m must be > 0, got {}",
                self.quantization_unit_m
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            problems.push(format!("gamma must be > 0, got {}", self.gamma));
        }
        if self.power_levels < 1 {
            problems.push("power_levels must be at least 1".to_string());
        }
        if self.preambles < 1 {
            problems.push("preambles must be at least 1".to_string());
        }
        if self.predictor == PredictorChoice::Trained && self.model.is_none() {
            problems.push("predictor = \"trained\" requires a model path".to_string());
        }
        if self.detection == DetectionChoice::Signal {
            let max_g = match self.axis {
                SweepAxis::Preambles => self.values.last().copied().unwrap_or(0),
                SweepAxis::ActiveDevices => self.preambles,
            };
            if max_g >= self.sequence_length {
                problems.push(format!(
                    "signal detection needs fewer preambles ({max_g}) than the sequence length ({})",
                    self.sequence_length
                ));
            }
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            problems.push(format!("noise_variance must be >= 0, got {}", self.noise_variance));
        }
        if !(0.0..=1.0).contains(&self.urllc_fraction) {
            problems.push(format!(
                "urllc_fraction must lie in [0, 1], got {}",
                self.urllc_fraction
            ));
        }
        if self.arrivals == ArrivalChoice::Poisson && !(self.poisson_mean > 0.0 && self.poisson_mean.is_finite()) {
            problems.push(format!("poisson_mean must be > 0, got {}", self.poisson_mean));
        }
        if self.arrivals == ArrivalChoice::Trace && self.trace.is_none() {
            problems.push("arrivals = \"trace\" requires a trace path".to_string());
        }
        if self.axis == SweepAxis::ActiveDevices && self.arrivals != ArrivalChoice::Fixed {
            problems.push("sweeping active_devices requires arrivals = \"fixed\"".to_string());
        }
        problems
    }

    pub fn validated(self) -> Result<Self> {
        let problems = self.validate();
        if problems.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str::<ExperimentConfig>(text).map_err(|e| Error::parse(origin, e.message().to_string()))
    }

    /// Reads and fully validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)?.validated()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for p in [Preset::Fig2, Preset::Fig3] {
            assert!(p.config().validate().is_empty(), "{:?}", p.config().validate());
        }
        assert_eq!(Preset::Fig2.config().active_devices, 80);
        assert_eq!(Preset::Fig2.config().values.len(), 11);
        assert_eq!(Preset::Fig3.config().values.first(), Some(&5));
        assert_eq!(Preset::Fig3.config().values.last(), Some(&80));
        assert!("fig4".parse::<Preset>().is_err());
    }

    #[test]
    fn one_message_per_violation() {
        let cfg = ExperimentConfig {
            gamma: 0.0,
            power_levels: 0,
            preambles: 0,
            radii_m: vec![-1.0],
            ..ExperimentConfig::default()
        };
        let problems = cfg.validate();
        assert_eq!(problems.len(), 4, "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("gamma")));
        assert!(problems.iter().any(|p| p.contains("power_levels")));
        assert!(problems.iter().any(|p| p.contains("preambles")));
        assert!(problems.iter().any(|p| p.contains("radius")));
    }

    #[test]
    fn values_must_increase() {
        let cfg = ExperimentConfig {
            values: vec![10, 10],
            ..ExperimentConfig::default()
        };
        assert_eq!(cfg.validate().len(), 1);
        let cfg = ExperimentConfig {
            values: vec![],
            ..ExperimentConfig::default()
        };
        assert!(!cfg.validate().is_empty());
    }

    #[test]
    fn toml_roundtrip_and_unknown_keys() {
        let cfg = Preset::Fig3.config();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
        let err = ExperimentConfig::from_toml_str("gama = 1.0\n", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("gama"));
        let partial = ExperimentConfig::from_toml_str("gamma = 2.0\nvalues = [5, 10]\n", Path::new("x.toml")).unwrap();
        assert_eq!(partial.gamma, 2.0);
        assert_eq!(partial.power_levels, 3);
    }

    #[test]
    fn missing_file_names_path() {
        let err = ExperimentConfig::load("/nonexistent/run.toml").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/run.toml"));
    }
}
