//! Central finite-difference verification of every analytic gradient a
//! config exercises: weights, biases, normalization parameters, activation
//! step values and slopes, and the gradient with respect to the inputs.
//!
//! The probe batch is resampled until every activation argument sits at
//! least a safety margin away from the nearest step-function kink, since a
//! finite-difference step across a kink measures the jump, not the slope.

use crate::config::ExperimentConfig;
use crate::error::RunError;
use crate::runner::{loss_and_grad, prepare_data};
use tmaf_core::data::{Dataset, SeededRng};
use tmaf_core::network::{Mode, Network};

/// Default pass threshold on the relative error.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Central-difference step.
const FD_STEP: f64 = 1e-5;
/// Minimum distance between any activation argument and the nearest kink.
const MIN_MARGIN: f64 = 1e-3;
/// Give up resampling probe batches after this many attempts.
const MAX_PROBE_TRIES: usize = 200;
/// Probe batch size; small, because every scalar costs two forward passes.
const PROBE_BATCH: usize = 3;

/// Worst relative error of one gradient group.
#[derive(Clone, Debug)]
pub struct ClassReport {
    pub class: &'static str,
    pub count: usize,
    pub max_rel_err: f64,
}

/// Outcome of a full check.
#[derive(Clone, Debug)]
pub struct GradcheckReport {
    /// One entry per parameter class that occurred, plus `input`, in
    /// network order.
    pub classes: Vec<ClassReport>,
    pub max_rel_err: f64,
    /// Kink margin of the accepted probe batch; absent when the network
    /// has no activations.
    pub margin: Option<f64>,
    /// How many probe batches were drawn before one cleared the margin.
    pub probe_tries: usize,
}

impl GradcheckReport {
    /// Total number of scalars compared.
    pub fn checked(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// Applies a tolerance, turning a bad comparison into the error that
    /// carries the gradcheck exit code.
    pub fn check(&self, tolerance: f64) -> Result<(), RunError> {
        if self.max_rel_err > tolerance {
            Err(RunError::GradcheckFailed {
                max_rel_err: self.max_rel_err,
                tolerance,
            })
        } else {
            Ok(())
        }
    }
}

/// `|analytic - numeric|` relative to the larger magnitude, floored so
/// near-zero pairs compare absolutely.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-3);
    (analytic - numeric).abs() / denom
}

/// Training-mode loss on the probe batch; the quantity whose derivatives
/// the backward pass claims to compute.
fn probe_loss(net: &mut Network, probe: &Dataset) -> Result<f64, RunError> {
    let (out, _tape) = net.forward(probe.inputs(), Mode::Train)?;
    Ok(loss_and_grad(&out, probe.targets())?.0)
}

/// Checks the config's network on a margin-cleared probe batch.
pub fn run_gradcheck(cfg: &ExperimentConfig) -> Result<GradcheckReport, RunError> {
    run_gradcheck_tampered(cfg, |_| {})
}

/// Like [`run_gradcheck`], but lets the caller corrupt the analytic
/// gradients before comparison. This is the negative control: a check that
/// cannot fail proves nothing, so tests inject a broken gradient and watch
/// it get caught.
pub fn run_gradcheck_tampered(
    cfg: &ExperimentConfig,
    tamper: impl FnOnce(&mut [f64]),
) -> Result<GradcheckReport, RunError> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let mut rng = SeededRng::new(cfg.seed);
    let prepared = prepare_data(&cfg, &mut rng)?;
    let dims = cfg.network_dims(prepared.train.input_dim());
    let spec = cfg
        .activation
        .to_spec()
        .map_err(|violations| RunError::ConfigInvalid { violations })?;
    let mut net = Network::mlp(&dims, &spec, cfg.batch_norm, &mut rng)?;

    // Rejection-sample a probe batch that keeps every activation argument
    // off the kinks.
    let n = prepared.train.n();
    let probe_n = PROBE_BATCH.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut probe = None;
    let mut margin = None;
    let mut probe_tries = 0;
    for t in 1..=MAX_PROBE_TRIES {
        probe_tries = t;
        rng.shuffle(&mut order);
        let candidate = prepared.train.gather(&order[..probe_n]);
        let m = net.min_kink_margin(candidate.inputs())?;
        if m.is_none_or(|mm| mm >= MIN_MARGIN) {
            margin = m;
            probe = Some(candidate);
            break;
        }
    }
    let probe = probe.ok_or(RunError::NoMarginBatch { tries: probe_tries })?;

    // Analytic gradients, one labeled scalar at a time: parameters in
    // network order, then the loss gradient with respect to each input.
    net.zero_grads();
    let (out, tape) = net.forward(probe.inputs(), Mode::Train)?;
    let (_, out_grad) = loss_and_grad(&out, probe.targets())?;
    let input_grad = net.backward(tape, &out_grad)?;
    let mut labels: Vec<&'static str> = Vec::new();
    let mut analytic: Vec<f64> = Vec::new();
    for slot in net.collect_params() {
        labels.push(slot.class.name());
        analytic.push(*slot.grad);
    }
    for &g in input_grad.data() {
        labels.push("input");
        analytic.push(g);
    }
    tamper(&mut analytic);

    // Numeric gradients by central differences. Each evaluation runs on a
    // fresh clone so normalization running statistics cannot drift between
    // probes; training-mode loss itself only uses batch statistics.
    let param_count = net.param_count();
    let mut rel = Vec::with_capacity(analytic.len());
    for (i, &a) in analytic.iter().enumerate().take(param_count) {
        let shifted = |delta: f64| -> Result<f64, RunError> {
            let mut c = net.clone();
            *c.collect_params()[i].value += delta;
            probe_loss(&mut c, &probe)
        };
        let numeric = (shifted(FD_STEP)? - shifted(-FD_STEP)?) / (2.0 * FD_STEP);
        rel.push(rel_err(a, numeric));
    }
    let base_inputs = probe.inputs().clone();
    for j in 0..base_inputs.n() * base_inputs.dim() {
        let shifted = |delta: f64| -> Result<f64, RunError> {
            let mut inputs = base_inputs.clone();
            inputs.data_mut()[j] += delta;
            let shifted_probe = Dataset::new(inputs, probe.targets().clone())?;
            probe_loss(&mut net.clone(), &shifted_probe)
        };
        let numeric = (shifted(FD_STEP)? - shifted(-FD_STEP)?) / (2.0 * FD_STEP);
        rel.push(rel_err(analytic[param_count + j], numeric));
    }

    let mut classes: Vec<ClassReport> = Vec::new();
    for (&label, &r) in labels.iter().zip(&rel) {
        match classes.iter_mut().find(|c| c.class == label) {
            Some(c) => {
                c.count += 1;
                c.max_rel_err = c.max_rel_err.max(r);
            }
            None => classes.push(ClassReport {
                class: label,
                count: 1,
                max_rel_err: r,
            }),
        }
    }
    let max_rel_err = rel.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(GradcheckReport {
        classes,
        max_rel_err,
        margin,
        probe_tries,
    })
}
