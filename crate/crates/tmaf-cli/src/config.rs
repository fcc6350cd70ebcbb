//! Declarative experiment configuration: JSON on disk, strict parsing
//! (unknown keys are errors), semantic validation that reports every
//! violation at once, and resolution of kind-dependent defaults.

use crate::error::RunError;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use tmaf_core::activations::{ActivationSpec, Sharing};
use tmaf_core::stepfn::{gaussian_decile_breakpoints, uniform_grid_breakpoints, StepFunction};

/// What the experiment trains on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Regression of `sin(pi (x_1 + ... + x_d))` on `[-2, 2]^d`.
    Sine,
    /// Regression of `sin(a pi x) + cos(b pi x) + sin(pi x)` on `[-1, 1]`.
    Oscillatory,
    /// Digit classification from IDX image/label files.
    Mnist,
    /// Regression from user-supplied CSV files.
    CustomCsv,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Sine => "sine",
            ExperimentKind::Oscillatory => "oscillatory",
            ExperimentKind::Mnist => "mnist",
            ExperimentKind::CustomCsv => "custom_csv",
        }
    }
}

/// Whether TMAF layers share one step function or train one per neuron.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingConfig {
    #[default]
    PerLayer,
    PerNeuron,
}

impl SharingConfig {
    fn to_core(self) -> Sharing {
        match self {
            SharingConfig::PerLayer => Sharing::PerLayer,
            SharingConfig::PerNeuron => Sharing::PerNeuron,
        }
    }
}

/// Named breakpoint layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakpointPreset {
    /// Nine breakpoints splitting the standard Gaussian into ten
    /// equal-probability intervals.
    GaussianDeciles,
}

/// Uniform breakpoint grid: `intervals + 1` points from `lo` to `hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub intervals: usize,
}

/// Where a step function's breakpoints come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakpointSpec {
    Preset(BreakpointPreset),
    Grid(GridSpec),
    Explicit(Vec<f64>),
}

impl BreakpointSpec {
    /// Materializes the breakpoint list, or explains what is wrong with the
    /// spec.
    pub fn to_breakpoints(&self) -> Result<Vec<f64>, String> {
        match self {
            BreakpointSpec::Preset(BreakpointPreset::GaussianDeciles) => {
                Ok(gaussian_decile_breakpoints())
            }
            BreakpointSpec::Grid(g) => uniform_grid_breakpoints(g.lo, g.hi, g.intervals)
                .map_err(|e| format!("breakpoint grid: {e}")),
            BreakpointSpec::Explicit(bps) => StepFunction::zeroed(bps.clone())
                .map(|f| f.breakpoints().to_vec())
                .map_err(|e| format!("explicit breakpoints: {e}")),
        }
    }
}

/// Activation choice. Fields apply per kind: `slope` to `leaky_relu`,
/// `breakpoints` to `diag_tmaf`, `alpha`/`beta`/`gamma` to `tri_diag_tmaf`,
/// `sharing` to both TMAF kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationConfig {
    pub kind: ActivationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<BreakpointSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<BreakpointSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<BreakpointSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<BreakpointSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sharing: Option<SharingConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    LeakyRelu,
    Prelu,
    DiagTmaf,
    TriDiagTmaf,
}

impl ActivationConfig {
    pub fn relu() -> ActivationConfig {
        ActivationConfig {
            kind: ActivationKind::Relu,
            slope: None,
            breakpoints: None,
            alpha: None,
            beta: None,
            gamma: None,
            sharing: None,
        }
    }

    pub fn prelu() -> ActivationConfig {
        ActivationConfig {
            kind: ActivationKind::Prelu,
            ..ActivationConfig::relu()
        }
    }

    pub fn diag_tmaf(breakpoints: BreakpointSpec) -> ActivationConfig {
        ActivationConfig {
            kind: ActivationKind::DiagTmaf,
            breakpoints: Some(breakpoints),
            ..ActivationConfig::relu()
        }
    }

    pub fn tri_diag_tmaf(
        alpha: BreakpointSpec,
        beta: BreakpointSpec,
        gamma: BreakpointSpec,
    ) -> ActivationConfig {
        ActivationConfig {
            kind: ActivationKind::TriDiagTmaf,
            alpha: Some(alpha),
            beta: Some(beta),
            gamma: Some(gamma),
            ..ActivationConfig::relu()
        }
    }

    fn forbid(&self, violations: &mut Vec<String>, allowed: &[&str]) {
        let fields: [(&str, bool); 6] = [
            ("slope", self.slope.is_some()),
            ("breakpoints", self.breakpoints.is_some()),
            ("alpha", self.alpha.is_some()),
            ("beta", self.beta.is_some()),
            ("gamma", self.gamma.is_some()),
            ("sharing", self.sharing.is_some()),
        ];
        for (name, present) in fields {
            if present && !allowed.contains(&name) {
                violations.push(format!(
                    "activation.{name} does not apply to kind {:?}",
                    self.kind
                ));
            }
        }
    }

    fn breaks(
        &self,
        spec: &Option<BreakpointSpec>,
        name: &str,
        violations: &mut Vec<String>,
    ) -> Option<Vec<f64>> {
        match spec {
            Some(s) => match s.to_breakpoints() {
                Ok(b) => Some(b),
                Err(e) => {
                    violations.push(format!("activation.{name}: {e}"));
                    None
                }
            },
            None => {
                violations.push(format!(
                    "activation.{name} is required for kind {:?}",
                    self.kind
                ));
                None
            }
        }
    }

    /// Builds the core activation spec, or lists every problem.
    pub fn to_spec(&self) -> Result<ActivationSpec, Vec<String>> {
        let mut violations = Vec::new();
        let spec = match self.kind {
            ActivationKind::Relu => {
                self.forbid(&mut violations, &[]);
                Some(ActivationSpec::ReLU)
            }
            ActivationKind::LeakyRelu => {
                self.forbid(&mut violations, &["slope"]);
                let slope = self.slope.unwrap_or(0.01);
                if !slope.is_finite() || slope <= 0.0 {
                    violations.push(format!(
                        "activation.slope must be a positive finite number, got {slope}"
                    ));
                    None
                } else {
                    Some(ActivationSpec::LeakyReLU { slope })
                }
            }
            ActivationKind::Prelu => {
                self.forbid(&mut violations, &[]);
                Some(ActivationSpec::PReLU)
            }
            ActivationKind::DiagTmaf => {
                self.forbid(&mut violations, &["breakpoints", "sharing"]);
                self.breaks(&self.breakpoints, "breakpoints", &mut violations)
                    .map(|b| ActivationSpec::DiagTMAF {
                        breakpoints: b,
                        sharing: self.sharing.unwrap_or_default().to_core(),
                    })
            }
            ActivationKind::TriDiagTmaf => {
                self.forbid(&mut violations, &["alpha", "beta", "gamma", "sharing"]);
                let a = self.breaks(&self.alpha, "alpha", &mut violations);
                let b = self.breaks(&self.beta, "beta", &mut violations);
                let g = self.breaks(&self.gamma, "gamma", &mut violations);
                match (a, b, g) {
                    (Some(alpha), Some(beta), Some(gamma)) => Some(ActivationSpec::TriDiagTMAF {
                        alpha,
                        beta,
                        gamma,
                        sharing: self.sharing.unwrap_or_default().to_core(),
                    }),
                    _ => None,
                }
            }
        };
        match spec {
            Some(s) if violations.is_empty() => Ok(s),
            _ => Err(violations),
        }
    }
}

/// Data source parameters. Fields apply per experiment kind: `dims` and
/// `samples` to `sine`, `samples`/`freq_a`/`freq_b` to `oscillatory`, the
/// four IDX paths to `mnist` (plus an optional `samples` cap on the
/// training set), the CSV paths to `custom_csv`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_csv: Option<PathBuf>,
}

fn default_lr_first() -> f64 {
    1e-4
}

fn default_lr_second() -> f64 {
    1e-5
}

fn default_holdout() -> f64 {
    0.1
}

/// One experiment, start to finish. `epochs` defaults per experiment kind
/// (sine 200, oscillatory 500, mnist 50); `custom_csv` must set it. The
/// holdout fraction applies to the regression experiments; `mnist` always
/// evaluates on its test files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub hidden_widths: Vec<usize>,
    pub activation: ActivationConfig,
    #[serde(default)]
    pub batch_norm: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    pub batch_size: usize,
    #[serde(default = "default_lr_first")]
    pub lr_first: f64,
    #[serde(default = "default_lr_second")]
    pub lr_second: f64,
    pub seed: u64,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default)]
    pub data: DataConfig,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parses a config file. Syntax errors and unknown keys are reported
    /// with the serde message, which names the offending key.
    pub fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::ConfigRead {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| RunError::ConfigRead {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    /// Epochs after kind defaults are applied.
    pub fn effective_epochs(&self) -> usize {
        self.epochs.unwrap_or(match self.experiment {
            ExperimentKind::Sine => 200,
            ExperimentKind::Oscillatory => 500,
            ExperimentKind::Mnist => 50,
            ExperimentKind::CustomCsv => 1,
        })
    }

    /// Oscillatory target frequencies after defaults: `a` defaults to 100,
    /// `b` to `a / 2`.
    pub fn effective_freqs(&self) -> (f64, f64) {
        let a = self.data.freq_a.unwrap_or(100.0);
        let b = self.data.freq_b.unwrap_or(a / 2.0);
        (a, b)
    }

    /// Copy with every kind-dependent default materialized. This is what
    /// gets written as the resolved-config snapshot; re-running from the
    /// snapshot reproduces the run exactly.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.epochs = Some(self.effective_epochs());
        if self.experiment == ExperimentKind::Oscillatory {
            let (a, b) = self.effective_freqs();
            cfg.data.freq_a = Some(a);
            cfg.data.freq_b = Some(b);
        }
        cfg
    }

    /// Input feature count, when it is determined by the config alone.
    /// `custom_csv` inputs are sized by the file contents.
    pub fn input_dim(&self) -> Option<usize> {
        match self.experiment {
            ExperimentKind::Sine => self.data.dims,
            ExperimentKind::Oscillatory => Some(1),
            ExperimentKind::Mnist => Some(784),
            ExperimentKind::CustomCsv => None,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self.experiment {
            ExperimentKind::Mnist => 10,
            _ => 1,
        }
    }

    /// Full layer-size chain for a given input width.
    pub fn network_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(&self.hidden_widths);
        dims.push(self.output_dim());
        dims
    }

    fn check_data(&self, violations: &mut Vec<String>) {
        let d = &self.data;
        let mut require_file = |field: &str, path: &Option<PathBuf>| match path {
            Some(p) if p.is_file() => {}
            Some(p) => {
                violations.push(format!("data.{field}: file {} does not exist", p.display()))
            }
            None => violations.push(format!(
                "data.{field} is required for {}",
                self.experiment.as_str()
            )),
        };
        match self.experiment {
            ExperimentKind::Sine => {
                match d.dims {
                    Some(0) | None => {
                        violations.push("data.dims must be at least 1 for sine".into())
                    }
                    _ => {}
                }
                match d.samples {
                    Some(0) | None => {
                        violations.push("data.samples must be at least 1 for sine".into())
                    }
                    _ => {}
                }
            }
            ExperimentKind::Oscillatory => {
                match d.samples {
                    Some(0) | None => {
                        violations.push("data.samples must be at least 1 for oscillatory".into())
                    }
                    _ => {}
                }
                for (name, v) in [("freq_a", d.freq_a), ("freq_b", d.freq_b)] {
                    if let Some(f) = v {
                        if !f.is_finite() || f <= 0.0 {
                            violations.push(format!(
                                "data.{name} must be a positive finite number, got {f}"
                            ));
                        }
                    }
                }
            }
            ExperimentKind::Mnist => {
                require_file("train_images", &d.train_images);
                require_file("train_labels", &d.train_labels);
                require_file("test_images", &d.test_images);
                require_file("test_labels", &d.test_labels);
                if d.samples == Some(0) {
                    violations.push("data.samples must be at least 1 for mnist".into());
                }
            }
            ExperimentKind::CustomCsv => {
                require_file("train_csv", &d.train_csv);
                if let Some(p) = &d.eval_csv {
                    if !p.is_file() {
                        violations.push(format!(
                            "data.eval_csv: file {} does not exist",
                            p.display()
                        ));
                    }
                }
            }
        }
        // Fields that belong to a different experiment kind.
        let owner: [(&str, bool, &[ExperimentKind]); 10] = [
            ("dims", d.dims.is_some(), &[ExperimentKind::Sine]),
            (
                "samples",
                d.samples.is_some(),
                &[
                    ExperimentKind::Sine,
                    ExperimentKind::Oscillatory,
                    ExperimentKind::Mnist,
                ],
            ),
            ("freq_a", d.freq_a.is_some(), &[ExperimentKind::Oscillatory]),
            ("freq_b", d.freq_b.is_some(), &[ExperimentKind::Oscillatory]),
            (
                "train_images",
                d.train_images.is_some(),
                &[ExperimentKind::Mnist],
            ),
            (
                "train_labels",
                d.train_labels.is_some(),
                &[ExperimentKind::Mnist],
            ),
            (
                "test_images",
                d.test_images.is_some(),
                &[ExperimentKind::Mnist],
            ),
            (
                "test_labels",
                d.test_labels.is_some(),
                &[ExperimentKind::Mnist],
            ),
            (
                "train_csv",
                d.train_csv.is_some(),
                &[ExperimentKind::CustomCsv],
            ),
            (
                "eval_csv",
                d.eval_csv.is_some(),
                &[ExperimentKind::CustomCsv],
            ),
        ];
        for (name, present, kinds) in owner {
            if present && !kinds.contains(&self.experiment) {
                violations.push(format!(
                    "data.{name} does not apply to experiment {}",
                    self.experiment.as_str()
                ));
            }
        }
    }

    /// Checks every semantic constraint and reports all violations at once.
    pub fn validate(&self) -> Result<(), RunError> {
        let mut violations = Vec::new();
        if self.epochs == Some(0) {
            violations.push("epochs must be at least 1".into());
        }
        if self.experiment == ExperimentKind::CustomCsv && self.epochs.is_none() {
            violations.push("epochs is required for custom_csv".into());
        }
        if self.batch_size < 1 {
            violations.push("batch_size must be at least 1".into());
        }
        for (name, lr) in [("lr_first", self.lr_first), ("lr_second", self.lr_second)] {
            if !lr.is_finite() || lr <= 0.0 {
                violations.push(format!("{name} must be a positive finite number, got {lr}"));
            }
        }
        if self.hidden_widths.is_empty() {
            violations.push(
                "hidden_widths must name at least one hidden layer; \
                 the activation would never be applied"
                    .into(),
            );
        } else if self.hidden_widths.contains(&0) {
            violations.push("hidden_widths entries must be at least 1".into());
        }
        if !self.holdout_fraction.is_finite() || !(0.0..1.0).contains(&self.holdout_fraction) {
            violations.push(format!(
                "holdout_fraction must be in [0, 1), got {}",
                self.holdout_fraction
            ));
        }
        if self.out_dir.as_os_str().is_empty() {
            violations.push("out_dir must not be empty".into());
        }
        if let Err(mut act) = self.activation.to_spec() {
            violations.append(&mut act);
        }
        self.check_data(&mut violations);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(RunError::ConfigInvalid { violations })
        }
    }

    /// Serializes the resolved snapshot deterministically.
    pub fn to_resolved_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.resolved())
            .expect("config serialization cannot fail");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentKind::Sine,
            hidden_widths: vec![20],
            activation: ActivationConfig::diag_tmaf(BreakpointSpec::Preset(
                BreakpointPreset::GaussianDeciles,
            )),
            batch_norm: true,
            epochs: None,
            batch_size: 500,
            lr_first: 1e-4,
            lr_second: 1e-5,
            seed: 1,
            holdout_fraction: 0.1,
            data: DataConfig {
                dims: Some(1),
                samples: Some(20000),
                ..DataConfig::default()
            },
            out_dir: PathBuf::from("runs/test"),
        }
    }

    #[test]
    fn minimal_sine_config_parses_and_validates() {
        let json = r#"{
            "experiment": "sine",
            "hidden_widths": [20],
            "activation": {"kind": "diag_tmaf", "breakpoints": {"preset": "gaussian_deciles"}},
            "batch_norm": true,
            "batch_size": 500,
            "seed": 7,
            "data": {"dims": 1, "samples": 20000},
            "out_dir": "runs/sine"
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.effective_epochs(), 200);
        assert_eq!(cfg.lr_first, 1e-4);
        assert_eq!(cfg.lr_second, 1e-5);
        assert_eq!(cfg.network_dims(1), vec![1, 20, 1]);
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        let top = r#"{"experiment": "sine", "activation": {"kind": "relu"},
            "batch_size": 1, "seed": 1, "data": {}, "out_dir": "x", "typo_key": 3}"#;
        let err = serde_json::from_str::<ExperimentConfig>(top).unwrap_err();
        assert!(err.to_string().contains("typo_key"), "{err}");

        let nested = r#"{"experiment": "sine", "activation": {"kind": "relu", "slop": 0.1},
            "batch_size": 1, "seed": 1, "data": {}, "out_dir": "x"}"#;
        let err = serde_json::from_str::<ExperimentConfig>(nested).unwrap_err();
        assert!(err.to_string().contains("slop"), "{err}");

        let data = r#"{"experiment": "sine", "activation": {"kind": "relu"},
            "batch_size": 1, "seed": 1, "data": {"dim": 1}, "out_dir": "x"}"#;
        let err = serde_json::from_str::<ExperimentConfig>(data).unwrap_err();
        assert!(err.to_string().contains("dim"), "{err}");

        let grid = r#"{"experiment": "sine", "activation": {"kind": "diag_tmaf",
            "breakpoints": {"grid": {"lo": -1, "hi": 1, "intervals": 10, "step": 2}}},
            "batch_size": 1, "seed": 1, "data": {"dims": 1, "samples": 10}, "out_dir": "x"}"#;
        let err = serde_json::from_str::<ExperimentConfig>(grid).unwrap_err();
        assert!(err.to_string().contains("step"), "{err}");
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut cfg = base_config();
        cfg.epochs = Some(0);
        cfg.batch_size = 0;
        cfg.lr_first = -1.0;
        cfg.holdout_fraction = 1.5;
        cfg.hidden_widths = vec![20, 0];
        cfg.data.dims = None;
        match cfg.validate() {
            Err(RunError::ConfigInvalid { violations }) => {
                let text = violations.join("\n");
                for needle in [
                    "epochs",
                    "batch_size",
                    "lr_first",
                    "holdout_fraction",
                    "hidden_widths",
                    "data.dims",
                ] {
                    assert!(text.contains(needle), "missing {needle} in:\n{text}");
                }
                assert!(violations.len() >= 6);
            }
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn activation_field_ownership_is_checked() {
        let mut cfg = base_config();
        cfg.activation = ActivationConfig {
            kind: ActivationKind::Relu,
            slope: Some(0.1),
            ..ActivationConfig::relu()
        };
        match cfg.validate() {
            Err(RunError::ConfigInvalid { violations }) => {
                assert!(violations.iter().any(|v| v.contains("activation.slope")));
            }
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }

        let mut cfg = base_config();
        cfg.activation.breakpoints = Some(BreakpointSpec::Explicit(vec![1.0, 1.0]));
        assert!(cfg.validate().is_err());

        let mut cfg = base_config();
        cfg.activation.breakpoints = Some(BreakpointSpec::Grid(GridSpec {
            lo: 1.0,
            hi: -1.0,
            intervals: 10,
        }));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn data_field_ownership_is_checked() {
        let mut cfg = base_config();
        cfg.data.freq_a = Some(100.0);
        match cfg.validate() {
            Err(RunError::ConfigInvalid { violations }) => {
                assert!(violations
                    .iter()
                    .any(|v| v.contains("data.freq_a") && v.contains("sine")));
            }
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn mnist_requires_existing_files() {
        let mut cfg = base_config();
        cfg.experiment = ExperimentKind::Mnist;
        cfg.data = DataConfig {
            train_images: Some(PathBuf::from("/nonexistent/ti")),
            ..DataConfig::default()
        };
        match cfg.validate() {
            Err(RunError::ConfigInvalid { violations }) => {
                assert!(violations.iter().any(|v| v.contains("does not exist")));
                assert!(violations
                    .iter()
                    .any(|v| v.contains("data.train_labels is required")));
            }
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn resolved_fills_defaults_and_round_trips() {
        let mut cfg = base_config();
        cfg.experiment = ExperimentKind::Oscillatory;
        cfg.data = DataConfig {
            samples: Some(1000),
            freq_a: Some(20.0),
            ..DataConfig::default()
        };
        let resolved = cfg.resolved();
        assert_eq!(resolved.epochs, Some(500));
        assert_eq!(resolved.data.freq_b, Some(10.0));
        let text = cfg.to_resolved_json();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, resolved);
        assert_eq!(back.to_resolved_json(), text);
    }

    #[test]
    fn load_reports_missing_and_malformed_files() {
        let err = ExperimentConfig::load(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(matches!(err, RunError::ConfigRead { .. }));
        assert_eq!(err.exit_code(), 1);

        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "not json").unwrap();
        let err = ExperimentConfig::load(f.path()).unwrap_err();
        assert!(matches!(err, RunError::ConfigRead { .. }));
    }

    #[test]
    fn custom_csv_requires_epochs() {
        let mut cfg = base_config();
        cfg.experiment = ExperimentKind::CustomCsv;
        cfg.epochs = None;
        cfg.data = DataConfig::default();
        match cfg.validate() {
            Err(RunError::ConfigInvalid { violations }) => {
                assert!(violations.iter().any(|v| v.contains("epochs is required")));
                assert!(violations
                    .iter()
                    .any(|v| v.contains("data.train_csv is required")));
            }
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }
}
