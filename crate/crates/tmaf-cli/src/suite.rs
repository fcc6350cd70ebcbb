//! Canned comparison suites: a grid of experiments differing only in the
//! activation, trained with a shared seed so initial weights and data are
//! identical across rows, then summarized in one table.

use crate::config::{
    ActivationConfig, BreakpointPreset, BreakpointSpec, DataConfig, ExperimentConfig,
    ExperimentKind, GridSpec,
};
use crate::error::RunError;
use crate::runner::{run_train, MetricKind};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Which comparison grid to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuiteName {
    /// Smooth sine regression across input dimensions.
    Sine,
    /// Oscillatory regression with high-frequency content.
    Oscillatory,
    /// Digit classification.
    Mnist,
}

/// Problem size. Desk runs finish in minutes on a laptop CPU; full runs
/// reproduce the original experiment sizes and can take hours.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuiteScale {
    Desk,
    Full,
}

/// Everything needed to materialize and run a suite.
#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub name: SuiteName,
    pub scale: SuiteScale,
    pub out_dir: PathBuf,
    /// Directory holding the four standard IDX files; only used by the
    /// mnist suite.
    pub mnist_dir: PathBuf,
    pub seed: u64,
}

/// One finished suite run.
#[derive(Clone, Debug)]
pub struct SuiteCell {
    pub scenario: String,
    pub activation: String,
    pub train_loss: f64,
    pub eval_metric: f64,
    pub metric_kind: MetricKind,
}

/// All cells plus the written summary file.
#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub cells: Vec<SuiteCell>,
    pub summary_path: PathBuf,
}

fn oscillatory_activations() -> Vec<(String, ActivationConfig)> {
    let grid = |lo: f64, hi: f64| {
        BreakpointSpec::Grid(GridSpec {
            lo,
            hi,
            intervals: 100,
        })
    };
    vec![
        ("relu".into(), ActivationConfig::relu()),
        ("para_relu".into(), ActivationConfig::prelu()),
        (
            "diag_tmaf".into(),
            ActivationConfig::diag_tmaf(grid(-1.0, 1.0)),
        ),
        (
            "tri_diag_tmaf".into(),
            ActivationConfig::tri_diag_tmaf(grid(-1.0, 1.0), grid(-2.01, -0.01), grid(0.01, 2.01)),
        ),
    ]
}

/// Builds every (scenario, activation, config) cell of a suite without
/// running anything.
pub fn build_suite_configs(opts: &SuiteOptions) -> Vec<(String, String, ExperimentConfig)> {
    let base = |experiment: ExperimentKind| ExperimentConfig {
        experiment,
        hidden_widths: Vec::new(),
        activation: ActivationConfig::relu(),
        batch_norm: false,
        epochs: None,
        batch_size: 500,
        lr_first: 1e-4,
        lr_second: 1e-5,
        seed: opts.seed,
        holdout_fraction: 0.1,
        data: DataConfig::default(),
        out_dir: PathBuf::new(),
    };
    let mut cells = Vec::new();
    match opts.name {
        SuiteName::Sine => {
            let dims: &[usize] = match opts.scale {
                SuiteScale::Desk => &[1, 2],
                SuiteScale::Full => &[1, 2, 5, 6],
            };
            let activations = [
                ("relu".to_string(), ActivationConfig::relu()),
                ("para_relu".to_string(), ActivationConfig::prelu()),
                (
                    "diag_tmaf".to_string(),
                    ActivationConfig::diag_tmaf(BreakpointSpec::Preset(
                        BreakpointPreset::GaussianDeciles,
                    )),
                ),
            ];
            for &d in dims {
                for (label, act) in &activations {
                    let mut cfg = base(ExperimentKind::Sine);
                    cfg.hidden_widths = if d <= 2 { vec![20] } else { vec![20, 20] };
                    cfg.activation = act.clone();
                    cfg.batch_norm = true;
                    cfg.data.dims = Some(d);
                    cfg.data.samples = Some(20000);
                    cells.push((format!("sine_d{d}"), label.clone(), cfg));
                }
            }
        }
        SuiteName::Oscillatory => {
            let (freq_a, samples, wide, tri_wide) = match opts.scale {
                SuiteScale::Desk => (20.0, 5000, 100, 100),
                SuiteScale::Full => (100.0, 20000, 400, 300),
            };
            let scenario = format!("oscillatory_a{}", freq_a as u64);
            for (label, act) in oscillatory_activations() {
                let mut cfg = base(ExperimentKind::Oscillatory);
                let width = if label == "tri_diag_tmaf" {
                    tri_wide
                } else {
                    wide
                };
                cfg.hidden_widths = vec![width; 3];
                cfg.activation = act;
                cfg.data.samples = Some(samples);
                cfg.data.freq_a = Some(freq_a);
                cells.push((scenario.clone(), label, cfg));
            }
        }
        SuiteName::Mnist => {
            let activations = [
                ("relu".to_string(), ActivationConfig::relu()),
                (
                    "diag_tmaf".to_string(),
                    ActivationConfig::diag_tmaf(BreakpointSpec::Preset(
                        BreakpointPreset::GaussianDeciles,
                    )),
                ),
            ];
            for (label, act) in activations {
                let mut cfg = base(ExperimentKind::Mnist);
                cfg.hidden_widths = vec![10, 10];
                cfg.activation = act;
                cfg.batch_norm = true;
                cfg.data = mnist_data(&opts.mnist_dir);
                if opts.scale == SuiteScale::Desk {
                    cfg.data.samples = Some(10000);
                }
                cells.push(("mnist".to_string(), label, cfg));
            }
        }
    }
    for (scenario, label, cfg) in &mut cells {
        cfg.out_dir = opts.out_dir.join(format!("{scenario}__{label}"));
    }
    cells
}

/// The four standard file names inside a directory.
pub fn mnist_data(dir: &Path) -> DataConfig {
    DataConfig {
        train_images: Some(dir.join("train-images-idx3-ubyte")),
        train_labels: Some(dir.join("train-labels-idx1-ubyte")),
        test_images: Some(dir.join("t10k-images-idx3-ubyte")),
        test_labels: Some(dir.join("t10k-labels-idx1-ubyte")),
        ..DataConfig::default()
    }
}

/// Renders the cells as an aligned text table.
pub fn format_table(cells: &[SuiteCell]) -> String {
    let mut rows = vec![[
        "scenario".to_string(),
        "activation".to_string(),
        "train_loss".to_string(),
        "eval".to_string(),
    ]];
    for c in cells {
        rows.push([
            c.scenario.clone(),
            c.activation.clone(),
            format!("{:.4e}", c.train_loss),
            match c.metric_kind {
                MetricKind::Loss => format!("{:.4e}", c.eval_metric),
                MetricKind::Accuracy => format!("{:.2}%", c.eval_metric * 100.0),
            },
        ]);
    }
    let mut widths = [0usize; 4];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        for (k, (w, cell)) in widths.iter().zip(row).enumerate() {
            if k > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{cell:w$}");
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}

/// Runs every cell, writes `summary.csv` under the suite output directory,
/// and returns the table data. Progress goes to stderr as each cell
/// finishes.
pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteOutcome, RunError> {
    let cells_cfg = build_suite_configs(opts);
    let mut cells = Vec::with_capacity(cells_cfg.len());
    for (scenario, activation, cfg) in cells_cfg {
        eprintln!("suite: running {scenario} / {activation}");
        let outcome = run_train(&cfg)?;
        let last = outcome.final_row();
        eprintln!(
            "suite: {scenario} / {activation}: train_loss {:.4e}, {} {:.4}",
            last.train_loss,
            outcome.metric_kind.describe(),
            last.eval_metric
        );
        cells.push(SuiteCell {
            scenario,
            activation,
            train_loss: last.train_loss,
            eval_metric: last.eval_metric,
            metric_kind: outcome.metric_kind,
        });
    }

    std::fs::create_dir_all(&opts.out_dir).map_err(|e| RunError::Io {
        path: opts.out_dir.clone(),
        detail: e.to_string(),
    })?;
    let summary_path = opts.out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary_path).map_err(|e| RunError::Io {
        path: summary_path.clone(),
        detail: e.to_string(),
    })?;
    let io_err = |e: csv::Error| RunError::Io {
        path: summary_path.clone(),
        detail: e.to_string(),
    };
    w.write_record(["scenario", "activation", "train_loss", "eval_metric"])
        .map_err(io_err)?;
    for c in &cells {
        w.write_record([
            c.scenario.as_str(),
            c.activation.as_str(),
            &c.train_loss.to_string(),
            &c.eval_metric.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| RunError::Io {
        path: summary_path.clone(),
        detail: e.to_string(),
    })?;

    Ok(SuiteOutcome {
        cells,
        summary_path,
    })
}
