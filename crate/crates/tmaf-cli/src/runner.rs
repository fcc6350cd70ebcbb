//! Experiment execution: deterministic data preparation, the training loop
//! and its on-disk artifacts, and evaluation of saved models.
//!
//! Every random decision flows from the config seed through a single
//! generator in a fixed order: dataset sampling, holdout split, weight
//! initialization, then one shuffle per epoch. Evaluation replays the same
//! order, so a saved model and its resolved config reproduce the run's
//! metrics exactly.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::dataset_csv::read_dataset_csv;
use crate::error::RunError;
use crate::idx::load_mnist;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use tmaf_core::codec;
use tmaf_core::data::{
    batches, sample_oscillatory_dataset, sample_sine_dataset, Dataset, SeededRng, Targets,
};
use tmaf_core::la::Batch;
use tmaf_core::network::{Mode, Network};
use tmaf_core::optim::{cross_entropy_loss, mse_loss, Adam, LrSchedule};

/// One line of the metrics log. Field order fixes the CSV header:
/// `epoch,train_loss,eval_metric,learning_rate,wall_seconds`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_metric: f64,
    pub learning_rate: f64,
    pub wall_seconds: f64,
}

/// What `eval_metric` measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    /// Loss on held-out data, or on the training set when nothing is held
    /// out.
    Loss,
    /// Fraction of correctly classified test samples.
    Accuracy,
}

impl MetricKind {
    pub fn describe(self) -> &'static str {
        match self {
            MetricKind::Loss => "eval loss",
            MetricKind::Accuracy => "eval accuracy",
        }
    }
}

/// Training set, optional evaluation set, and how to score the latter.
pub(crate) struct Prepared {
    pub train: Dataset,
    pub eval: Option<Dataset>,
    pub metric_kind: MetricKind,
}

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
}

fn split_or_keep(
    full: Dataset,
    fraction: f64,
    rng: &mut SeededRng,
) -> Result<(Dataset, Option<Dataset>), RunError> {
    if fraction == 0.0 {
        Ok((full, None))
    } else {
        let (train, held) = full.split_holdout(fraction, rng)?;
        Ok((train, Some(held)))
    }
}

/// Builds train and eval sets for a resolved config. Consumes generator
/// draws in the documented order; callers must pass a generator fresh from
/// the config seed.
pub(crate) fn prepare_data(
    cfg: &ExperimentConfig,
    rng: &mut SeededRng,
) -> Result<Prepared, RunError> {
    match cfg.experiment {
        ExperimentKind::Sine => {
            let dims = cfg.data.dims.expect("validated");
            let samples = cfg.data.samples.expect("validated");
            let full = sample_sine_dataset(dims, samples, rng)?;
            let (train, eval) = split_or_keep(full, cfg.holdout_fraction, rng)?;
            Ok(Prepared {
                train,
                eval,
                metric_kind: MetricKind::Loss,
            })
        }
        ExperimentKind::Oscillatory => {
            let samples = cfg.data.samples.expect("validated");
            let full = sample_oscillatory_dataset(samples, rng, cfg.effective_freqs())?;
            let (train, eval) = split_or_keep(full, cfg.holdout_fraction, rng)?;
            Ok(Prepared {
                train,
                eval,
                metric_kind: MetricKind::Loss,
            })
        }
        ExperimentKind::Mnist => {
            let d = &cfg.data;
            let train_set = load_mnist(
                d.train_images.as_deref().expect("validated"),
                d.train_labels.as_deref().expect("validated"),
            )?;
            let test_set = load_mnist(
                d.test_images.as_deref().expect("validated"),
                d.test_labels.as_deref().expect("validated"),
            )?;
            let mut train = train_set.into_dataset();
            if let Some(cap) = d.samples {
                if cap < train.n() {
                    let idx: Vec<usize> = (0..cap).collect();
                    train = train.gather(&idx);
                }
            }
            Ok(Prepared {
                train,
                eval: Some(test_set.into_dataset()),
                metric_kind: MetricKind::Accuracy,
            })
        }
        ExperimentKind::CustomCsv => {
            let train_full = read_dataset_csv(cfg.data.train_csv.as_deref().expect("validated"))?;
            match &cfg.data.eval_csv {
                Some(path) => {
                    let eval = read_dataset_csv(path)?;
                    if eval.input_dim() != train_full.input_dim() {
                        return Err(RunError::DatasetCsv {
                            path: path.clone(),
                            detail: format!(
                                "eval file has {} input columns but the training file has {}",
                                eval.input_dim(),
                                train_full.input_dim()
                            ),
                        });
                    }
                    Ok(Prepared {
                        train: train_full,
                        eval: Some(eval),
                        metric_kind: MetricKind::Loss,
                    })
                }
                None => {
                    let (train, eval) = split_or_keep(train_full, cfg.holdout_fraction, rng)?;
                    Ok(Prepared {
                        train,
                        eval,
                        metric_kind: MetricKind::Loss,
                    })
                }
            }
        }
    }
}

pub(crate) fn loss_and_grad(out: &Batch, targets: &Targets) -> Result<(f64, Batch), RunError> {
    match targets {
        Targets::Values(t) => Ok(mse_loss(out, t)?),
        Targets::Labels(l) => Ok(cross_entropy_loss(out, l)?),
    }
}

/// Mean loss over a dataset in evaluation mode, computed in fixed-size
/// chunks so large sets never need a second full-size buffer. The chunk
/// boundaries are part of the arithmetic, so callers that must agree bit
/// for bit (training logs and later evaluation) use the same chunk size.
pub fn dataset_loss(net: &Network, ds: &Dataset, chunk: usize) -> Result<f64, RunError> {
    assert!(chunk >= 1, "chunk size must be at least 1");
    let n = ds.n();
    let mut weighted = 0.0;
    let mut start = 0;
    while start < n {
        let end = usize::min(start + chunk, n);
        let idx: Vec<usize> = (start..end).collect();
        let part = ds.gather(&idx);
        let out = net.forward_eval(part.inputs())?;
        let (loss, _) = loss_and_grad(&out, part.targets())?;
        weighted += loss * (end - start) as f64;
        start = end;
    }
    Ok(weighted / n as f64)
}

/// Fraction of samples whose highest logit matches the label. Ties pick
/// the lowest class index, so the result is deterministic.
pub fn dataset_accuracy(net: &Network, ds: &Dataset, chunk: usize) -> Result<f64, RunError> {
    assert!(chunk >= 1, "chunk size must be at least 1");
    let labels = match ds.targets() {
        Targets::Labels(l) => l,
        Targets::Values(_) => panic!("accuracy needs a labeled dataset"),
    };
    let n = ds.n();
    let mut correct = 0usize;
    let mut start = 0;
    while start < n {
        let end = usize::min(start + chunk, n);
        let idx: Vec<usize> = (start..end).collect();
        let part = ds.gather(&idx);
        let out = net.forward_eval(part.inputs())?;
        for (s, &label) in labels[start..end].iter().enumerate() {
            let row = out.row(s);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            if best + 1 == label {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(correct as f64 / n as f64)
}

fn eval_metric_for(
    net: &Network,
    prepared: &Prepared,
    chunk: usize,
    train_loss: f64,
) -> Result<f64, RunError> {
    match (&prepared.eval, prepared.metric_kind) {
        (Some(ds), MetricKind::Accuracy) => dataset_accuracy(net, ds, chunk),
        (Some(ds), MetricKind::Loss) => dataset_loss(net, ds, chunk),
        (None, _) => Ok(train_loss),
    }
}

/// Everything a finished training run leaves behind.
#[derive(Debug)]
pub struct TrainOutcome {
    /// One row per epoch, in order; identical to the contents of
    /// `metrics.csv`.
    pub rows: Vec<MetricsRow>,
    pub metric_kind: MetricKind,
    pub metrics_path: PathBuf,
    pub model_path: PathBuf,
    pub config_path: PathBuf,
}

impl TrainOutcome {
    pub fn final_row(&self) -> &MetricsRow {
        self.rows.last().expect("training runs at least one epoch")
    }
}

/// Trains with the wall clock.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainOutcome, RunError> {
    let start = Instant::now();
    let mut clock = move || start.elapsed().as_secs_f64();
    run_train_with_clock(cfg, &mut clock)
}

/// Trains with an injected clock. The clock only feeds the `wall_seconds`
/// column; with a constant clock, two runs of the same config produce
/// byte-identical artifacts.
pub fn run_train_with_clock(
    cfg: &ExperimentConfig,
    clock: &mut dyn FnMut() -> f64,
) -> Result<TrainOutcome, RunError> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let epochs = cfg.epochs.expect("resolved config has explicit epochs");
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;

    let mut rng = SeededRng::new(cfg.seed);
    let prepared = prepare_data(&cfg, &mut rng)?;
    let dims = cfg.network_dims(prepared.train.input_dim());
    let spec = cfg
        .activation
        .to_spec()
        .map_err(|violations| RunError::ConfigInvalid { violations })?;
    let mut net = Network::mlp(&dims, &spec, cfg.batch_norm, &mut rng)?;

    let config_path = cfg.out_dir.join("config.resolved.json");
    fs::write(&config_path, cfg.to_resolved_json()).map_err(|e| io_err(&config_path, e))?;

    let schedule = LrSchedule::new(epochs, cfg.lr_first, cfg.lr_second)?;
    let mut adam = Adam::new(net.param_count(), cfg.lr_first);

    let metrics_path = cfg.out_dir.join("metrics.csv");
    let file = fs::File::create(&metrics_path).map_err(|e| io_err(&metrics_path, e))?;
    let mut writer = csv::Writer::from_writer(file);

    let mut rows = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        adam.set_lr(schedule.lr_at(epoch)?);
        for (i, batch) in batches(&prepared.train, cfg.batch_size, &mut rng, true).enumerate() {
            net.zero_grads();
            let (out, tape) = net.forward(batch.inputs(), Mode::Train)?;
            let (loss, grad) = loss_and_grad(&out, batch.targets())?;
            if !loss.is_finite() {
                return Err(RunError::NonFiniteLoss {
                    epoch,
                    batch: i + 1,
                });
            }
            net.backward(tape, &grad)?;
            adam.step(&mut net.collect_params())?;
        }
        let train_loss = dataset_loss(&net, &prepared.train, cfg.batch_size)?;
        let eval_metric = eval_metric_for(&net, &prepared, cfg.batch_size, train_loss)?;
        if !train_loss.is_finite() || !eval_metric.is_finite() {
            // The divergence happened inside this epoch's updates; point at
            // its last batch.
            let n_batches = prepared.train.n().div_ceil(cfg.batch_size);
            return Err(RunError::NonFiniteLoss {
                epoch,
                batch: n_batches,
            });
        }
        let row = MetricsRow {
            epoch,
            train_loss,
            eval_metric,
            learning_rate: adam.lr(),
            wall_seconds: clock(),
        };
        writer
            .serialize(row)
            .map_err(|e| io_err(&metrics_path, std::io::Error::other(e)))?;
        writer.flush().map_err(|e| io_err(&metrics_path, e))?;
        rows.push(row);
    }

    let model_path = cfg.out_dir.join("model.bin");
    fs::write(&model_path, codec::to_bytes(&net)).map_err(|e| io_err(&model_path, e))?;

    Ok(TrainOutcome {
        rows,
        metric_kind: prepared.metric_kind,
        metrics_path,
        model_path,
        config_path,
    })
}

/// Metrics of a saved model on the datasets its config describes.
#[derive(Debug)]
pub struct EvalReport {
    /// Loss over the full training set, eval mode; matches the final
    /// `train_loss` the training run logged.
    pub train_metric: f64,
    /// Same quantity as the training log's `eval_metric` column.
    pub eval_metric: f64,
    pub metric_kind: MetricKind,
}

/// Loads a model and scores it on the data the config describes. The data
/// and its split are re-derived from the config seed with the same draw
/// order as training, and the model header must match the architecture the
/// config would build.
pub fn run_eval(model_path: &Path, cfg: &ExperimentConfig) -> Result<EvalReport, RunError> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let bytes = fs::read(model_path).map_err(|e| io_err(model_path, e))?;
    let net = codec::from_bytes(&bytes)?;

    let mut rng = SeededRng::new(cfg.seed);
    let prepared = prepare_data(&cfg, &mut rng)?;
    let dims = cfg.network_dims(prepared.train.input_dim());
    let spec = cfg
        .activation
        .to_spec()
        .map_err(|violations| RunError::ConfigInvalid { violations })?;
    let expected = Network::mlp(&dims, &spec, cfg.batch_norm, &mut rng)?;
    if codec::header_bytes(&expected) != codec::header_bytes(&net) {
        return Err(RunError::ArchMismatch);
    }

    let train_metric = dataset_loss(&net, &prepared.train, cfg.batch_size)?;
    let eval_metric = eval_metric_for(&net, &prepared, cfg.batch_size, train_metric)?;
    Ok(EvalReport {
        train_metric,
        eval_metric,
        metric_kind: prepared.metric_kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ActivationConfig, BreakpointPreset, BreakpointSpec, DataConfig};
    use crate::dataset_csv::write_dataset_csv;
    use crate::idx::{encode_idx_images, encode_idx_labels};
    use std::io::Write;

    fn sine_config(out_dir: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentKind::Sine,
            hidden_widths: vec![6],
            activation: ActivationConfig::diag_tmaf(BreakpointSpec::Preset(
                BreakpointPreset::GaussianDeciles,
            )),
            batch_norm: true,
            epochs: Some(3),
            batch_size: 16,
            lr_first: 1e-3,
            lr_second: 1e-4,
            seed: 9,
            holdout_fraction: 0.1,
            data: DataConfig {
                dims: Some(1),
                samples: Some(80),
                ..DataConfig::default()
            },
            out_dir,
        }
    }

    #[test]
    fn train_writes_all_three_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sine_config(dir.path().join("run"));
        let outcome = run_train(&cfg).unwrap();
        assert_eq!(outcome.rows.len(), 3);
        assert_eq!(outcome.rows[0].epoch, 1);
        assert_eq!(outcome.final_row().epoch, 3);
        // Three epochs: the first half is floor(3 / 2) = 1 epoch.
        assert_eq!(outcome.rows[0].learning_rate, 1e-3);
        assert_eq!(outcome.rows[1].learning_rate, 1e-4);
        assert_eq!(outcome.rows[2].learning_rate, 1e-4);
        for pair in outcome.rows.windows(2) {
            assert!(pair[1].wall_seconds >= pair[0].wall_seconds);
        }

        let metrics = fs::read_to_string(&outcome.metrics_path).unwrap();
        assert!(
            metrics.starts_with("epoch,train_loss,eval_metric,learning_rate,wall_seconds\n"),
            "{metrics}"
        );
        assert_eq!(metrics.lines().count(), 4);

        let model = fs::read(&outcome.model_path).unwrap();
        let net = codec::from_bytes(&model).unwrap();
        assert_eq!(net.input_dim(), 1);
        assert_eq!(net.output_dim(), 1);

        let saved = ExperimentConfig::load(&outcome.config_path).unwrap();
        assert_eq!(saved, cfg.resolved());
    }

    #[test]
    fn constant_clock_makes_runs_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut artifacts = Vec::new();
        for name in ["a", "b"] {
            let cfg = sine_config(dir.path().join(name));
            let mut clock = || 0.0;
            let outcome = run_train_with_clock(&cfg, &mut clock).unwrap();
            artifacts.push((
                fs::read(&outcome.metrics_path).unwrap(),
                fs::read(&outcome.model_path).unwrap(),
            ));
        }
        assert_eq!(artifacts[0].0, artifacts[1].0);
        assert_eq!(artifacts[0].1, artifacts[1].1);
    }

    #[test]
    fn single_epoch_runs_entirely_at_the_second_rate() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = sine_config(dir.path().join("run"));
        cfg.epochs = Some(1);
        let outcome = run_train(&cfg).unwrap();
        assert_eq!(outcome.rows.len(), 1);
        assert_eq!(outcome.rows[0].learning_rate, cfg.lr_second);
    }

    #[test]
    fn eval_reproduces_the_final_training_row_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sine_config(dir.path().join("run"));
        let outcome = run_train(&cfg).unwrap();
        let report = run_eval(&outcome.model_path, &cfg).unwrap();
        assert_eq!(report.train_metric, outcome.final_row().train_loss);
        assert_eq!(report.eval_metric, outcome.final_row().eval_metric);
        assert_eq!(report.metric_kind, MetricKind::Loss);
    }

    #[test]
    fn eval_rejects_a_model_with_a_different_architecture() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sine_config(dir.path().join("run"));
        let outcome = run_train(&cfg).unwrap();
        let mut other = sine_config(dir.path().join("other"));
        other.hidden_widths = vec![7];
        match run_eval(&outcome.model_path, &other) {
            Err(RunError::ArchMismatch) => {}
            other => panic!("expected ArchMismatch, got {other:?}"),
        }

        let mut relu = sine_config(dir.path().join("relu"));
        relu.activation = ActivationConfig::relu();
        assert!(matches!(
            run_eval(&outcome.model_path, &relu),
            Err(RunError::ArchMismatch)
        ));
    }

    #[test]
    fn no_holdout_echoes_train_loss_as_the_eval_metric() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = sine_config(dir.path().join("run"));
        cfg.holdout_fraction = 0.0;
        let outcome = run_train(&cfg).unwrap();
        for row in &outcome.rows {
            assert_eq!(row.train_loss, row.eval_metric);
        }
    }

    #[test]
    fn absurd_learning_rate_aborts_with_epoch_and_batch() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = sine_config(dir.path().join("run"));
        cfg.lr_first = 1e300;
        match run_train(&cfg) {
            Err(e @ RunError::NonFiniteLoss { epoch, .. }) => {
                assert_eq!(epoch, 1);
                assert_eq!(e.exit_code(), 2);
                let msg = e.to_string();
                assert!(msg.contains("epoch 1"), "{msg}");
            }
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn custom_csv_trains_and_scores_against_an_eval_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = SeededRng::new(4);
        let train = tmaf_core::data::sample_sine_dataset(2, 64, &mut rng).unwrap();
        let eval = tmaf_core::data::sample_sine_dataset(2, 16, &mut rng).unwrap();
        let train_path = dir.path().join("train.csv");
        let eval_path = dir.path().join("eval.csv");
        write_dataset_csv(&train_path, &train).unwrap();
        write_dataset_csv(&eval_path, &eval).unwrap();

        let cfg = ExperimentConfig {
            experiment: ExperimentKind::CustomCsv,
            hidden_widths: vec![5],
            activation: ActivationConfig::relu(),
            batch_norm: false,
            epochs: Some(2),
            batch_size: 32,
            lr_first: 1e-3,
            lr_second: 1e-4,
            seed: 2,
            holdout_fraction: 0.1,
            data: DataConfig {
                train_csv: Some(train_path),
                eval_csv: Some(eval_path),
                ..DataConfig::default()
            },
            out_dir: dir.path().join("run"),
        };
        let outcome = run_train(&cfg).unwrap();
        assert_eq!(outcome.rows.len(), 2);
        let report = run_eval(&outcome.model_path, &cfg).unwrap();
        assert_eq!(report.eval_metric, outcome.final_row().eval_metric);
    }

    fn tiny_mnist_files(dir: &Path, n_train: usize, n_test: usize) -> DataConfig {
        let mut rng = SeededRng::new(77);
        let write = |name: &str, bytes: &[u8]| {
            let path = dir.join(name);
            let mut f = fs::File::create(&path).unwrap();
            f.write_all(bytes).unwrap();
            path
        };
        let mut images = |n: usize| -> Vec<u8> {
            (0..n * 784)
                .map(|_| rng.uniform(0.0, 256.0) as u8)
                .collect()
        };
        let labels = |n: usize| -> Vec<u8> { (0..n).map(|i| (i % 10) as u8).collect() };
        let ti = write("ti", &encode_idx_images(28, 28, &images(n_train)));
        let tl = write("tl", &encode_idx_labels(&labels(n_train)));
        let ei = write("ei", &encode_idx_images(28, 28, &images(n_test)));
        let el = write("el", &encode_idx_labels(&labels(n_test)));
        DataConfig {
            train_images: Some(ti),
            train_labels: Some(tl),
            test_images: Some(ei),
            test_labels: Some(el),
            ..DataConfig::default()
        }
    }

    #[test]
    fn mnist_runs_use_test_accuracy_and_honor_the_sample_cap() {
        let dir = tempfile::tempdir().unwrap();
        let mut data = tiny_mnist_files(dir.path(), 40, 20);
        data.samples = Some(24);
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Mnist,
            hidden_widths: vec![8],
            activation: ActivationConfig::relu(),
            batch_norm: true,
            epochs: Some(2),
            batch_size: 12,
            lr_first: 1e-3,
            lr_second: 1e-4,
            seed: 3,
            holdout_fraction: 0.1,
            data,
            out_dir: dir.path().join("run"),
        };
        cfg.validate().unwrap();

        let mut rng = SeededRng::new(cfg.seed);
        let prepared = prepare_data(&cfg.resolved(), &mut rng).unwrap();
        assert_eq!(prepared.train.n(), 24);
        assert_eq!(prepared.eval.as_ref().unwrap().n(), 20);
        assert_eq!(prepared.metric_kind, MetricKind::Accuracy);

        let outcome = run_train(&cfg).unwrap();
        assert_eq!(outcome.metric_kind, MetricKind::Accuracy);
        for row in &outcome.rows {
            assert!((0.0..=1.0).contains(&row.eval_metric));
        }
        let report = run_eval(&outcome.model_path, &cfg).unwrap();
        assert_eq!(report.eval_metric, outcome.final_row().eval_metric);
    }

    #[test]
    fn accuracy_counts_argmax_matches() {
        // Identity-ish network: 2 inputs to 2 logits, no hidden layers.
        let mut rng = SeededRng::new(1);
        let net = Network::mlp(
            &[2, 2],
            &tmaf_core::activations::ActivationSpec::ReLU,
            false,
            &mut rng,
        )
        .unwrap();
        let inputs = Batch::from_vec(3, 2, vec![5.0, 0.0, 0.0, 5.0, 5.0, 0.0]).unwrap();
        let out = net.forward_eval(&inputs).unwrap();
        let mut expect = 0;
        for s in 0..3 {
            let row = out.row(s);
            let pred = if row[1] > row[0] { 2 } else { 1 };
            let label = [1, 2, 2][s];
            if pred == label {
                expect += 1;
            }
        }
        let ds = Dataset::new(inputs, Targets::Labels(vec![1, 2, 2])).unwrap();
        let acc = dataset_accuracy(&net, &ds, 2).unwrap();
        assert_eq!(acc, expect as f64 / 3.0);
    }
}
