//! Command-line entry point. Exit codes: 0 success, 1 config validation
//! failure, 2 runtime failure, 3 failed gradient check.

use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;
use tmaf_cli::config::ExperimentConfig;
use tmaf_cli::dataset_csv::write_dataset_csv;
use tmaf_cli::error::RunError;
use tmaf_cli::gradcheck::{run_gradcheck, DEFAULT_TOLERANCE};
use tmaf_cli::runner::{run_eval, run_train};
use tmaf_cli::suite::{format_table, run_suite, SuiteName, SuiteOptions, SuiteScale};
use tmaf_core::data::{sample_oscillatory_dataset, sample_sine_dataset, SeededRng};

#[derive(Parser)]
#[command(
    name = "tmaf",
    version,
    about = "Train and evaluate networks whose activations are trainable matrix step functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Prints one line to stdout; exits quietly when the consumer has closed
/// the pipe (for example `tmaf train ... | head -1`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let mut out = std::io::stdout().lock();
        if writeln!(out, $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteNameArg {
    Sine,
    Oscillatory,
    Mnist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteScaleArg {
    /// Minutes on a laptop CPU.
    Desk,
    /// Original experiment sizes; can take hours.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenDataKind {
    Sine,
    Oscillatory,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a JSON config; writes metrics.csv, model.bin,
    /// and config.resolved.json into the config's out_dir.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a saved model on the data its config describes.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare analytic gradients against central finite differences for
    /// the network a config would build.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        /// Maximum allowed relative error.
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Run a canned activation-comparison grid and print the summary table.
    Suite {
        #[arg(long, value_enum)]
        name: SuiteNameArg,
        #[arg(long, value_enum, default_value_t = SuiteScaleArg::Desk)]
        scale: SuiteScaleArg,
        #[arg(long, default_value = "runs/suite")]
        out_dir: PathBuf,
        /// Directory with the four standard IDX files (mnist suite only).
        #[arg(long, default_value = "data/mnist")]
        mnist_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Sample a synthetic regression dataset and write it as CSV.
    GenData {
        #[arg(long, value_enum)]
        experiment: GenDataKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Input dimensions (sine only).
        #[arg(long, default_value_t = 1)]
        dims: usize,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
        /// High-frequency coefficient (oscillatory only; defaults to 100).
        #[arg(long)]
        freq_a: Option<f64>,
        /// Mid-frequency coefficient (oscillatory only; defaults to half
        /// of freq_a).
        #[arg(long)]
        freq_b: Option<f64>,
    },
}

fn run(command: Command) -> Result<(), RunError> {
    match command {
        Command::Train { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = run_train(&cfg)?;
            let last = outcome.final_row();
            say!(
                "trained {} epochs: train_loss {:.6e}, {} {:.6}",
                last.epoch,
                last.train_loss,
                outcome.metric_kind.describe(),
                last.eval_metric
            );
            say!(
                "artifacts: {}, {}, {}",
                outcome.metrics_path.display(),
                outcome.model_path.display(),
                outcome.config_path.display()
            );
        }
        Command::Eval { model, config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_eval(&model, &cfg)?;
            say!("train loss: {:.6e}", report.train_metric);
            say!(
                "{}: {:.6}",
                report.metric_kind.describe(),
                report.eval_metric
            );
        }
        Command::Gradcheck { config, tolerance } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_gradcheck(&cfg)?;
            say!("class        count  max_rel_err");
            for c in &report.classes {
                say!("{:12} {:5}  {:.3e}", c.class, c.count, c.max_rel_err);
            }
            match report.margin {
                Some(m) => say!(
                    "probe margin {:.3e} after {} draw(s), {} gradients checked",
                    m,
                    report.probe_tries,
                    report.checked()
                ),
                None => say!("{} gradients checked", report.checked()),
            }
            report.check(tolerance)?;
            say!(
                "gradient check passed: max relative error {:.3e} <= {:.1e}",
                report.max_rel_err,
                tolerance
            );
        }
        Command::Suite {
            name,
            scale,
            out_dir,
            mnist_dir,
            seed,
        } => {
            let opts = SuiteOptions {
                name: match name {
                    SuiteNameArg::Sine => SuiteName::Sine,
                    SuiteNameArg::Oscillatory => SuiteName::Oscillatory,
                    SuiteNameArg::Mnist => SuiteName::Mnist,
                },
                scale: match scale {
                    SuiteScaleArg::Desk => SuiteScale::Desk,
                    SuiteScaleArg::Full => SuiteScale::Full,
                },
                out_dir,
                mnist_dir,
                seed,
            };
            let outcome = run_suite(&opts)?;
            print!("{}", format_table(&outcome.cells));
            say!("summary written to {}", outcome.summary_path.display());
        }
        Command::GenData {
            experiment,
            out,
            seed,
            dims,
            samples,
            freq_a,
            freq_b,
        } => {
            let mut violations = Vec::new();
            if samples == 0 {
                violations.push("--samples must be at least 1".to_string());
            }
            match experiment {
                GenDataKind::Sine => {
                    if dims == 0 {
                        violations.push("--dims must be at least 1".to_string());
                    }
                    for (name, v) in [("--freq-a", freq_a), ("--freq-b", freq_b)] {
                        if v.is_some() {
                            violations.push(format!("{name} applies only to oscillatory"));
                        }
                    }
                }
                GenDataKind::Oscillatory => {
                    if dims != 1 {
                        violations.push("--dims applies only to sine".to_string());
                    }
                    for (name, v) in [("--freq-a", freq_a), ("--freq-b", freq_b)] {
                        if let Some(f) = v {
                            if !f.is_finite() || f <= 0.0 {
                                violations.push(format!("{name} must be a positive finite number"));
                            }
                        }
                    }
                }
            }
            if !violations.is_empty() {
                return Err(RunError::ConfigInvalid { violations });
            }
            let mut rng = SeededRng::new(seed);
            let ds = match experiment {
                GenDataKind::Sine => sample_sine_dataset(dims, samples, &mut rng)?,
                GenDataKind::Oscillatory => {
                    let a = freq_a.unwrap_or(100.0);
                    let b = freq_b.unwrap_or(a / 2.0);
                    sample_oscillatory_dataset(samples, &mut rng, (a, b))?
                }
            };
            write_dataset_csv(&out, &ds)?;
            say!("wrote {} samples to {}", ds.n(), out.display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
