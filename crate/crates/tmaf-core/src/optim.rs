//! Losses and the optimizer: mean squared error over sample norms,
//! cross-entropy over logits, ADAM with bias correction, and the two-stage
//! learning-rate schedule used by the experiments.

use crate::la::Batch;
use crate::params::ParamSlot;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Loss-function input violation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LossError {
    /// Prediction and target shapes differ.
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A class label fell outside `1..=classes`.
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    /// Label count does not match the number of logit rows.
    LabelCountMismatch { rows: usize, labels: usize },
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::ShapeMismatch { left, right } => write!(
                f,
                "shapes {}x{} and {}x{} differ",
                left.0, left.1, right.0, right.1
            ),
            LossError::LabelOutOfRange {
                index,
                label,
                classes,
            } => write!(f, "label {label} at index {index} outside 1..={classes}"),
            LossError::LabelCountMismatch { rows, labels } => {
                write!(f, "{rows} logit rows but {labels} labels")
            }
        }
    }
}

impl core::error::Error for LossError {}

/// Optimizer misuse.
#[derive(Clone, Debug, PartialEq)]
pub enum OptimError {
    /// Slot count differs from the optimizer's moment buffers.
    ParamCountMismatch { expected: usize, got: usize },
    /// Epoch outside `1..=total_epochs`.
    EpochOutOfRange { epoch: usize, total: usize },
    /// Schedule needs positive epochs and learning rates.
    BadSchedule,
}

impl fmt::Display for OptimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimError::ParamCountMismatch { expected, got } => {
                write!(f, "optimizer tracks {expected} parameters, got {got}")
            }
            OptimError::EpochOutOfRange { epoch, total } => {
                write!(f, "epoch {epoch} outside 1..={total}")
            }
            OptimError::BadSchedule => {
                write!(
                    f,
                    "schedule needs at least one epoch and positive learning rates"
                )
            }
        }
    }
}

impl core::error::Error for OptimError {}

/// Mean over samples of the squared Euclidean norm of the residual, with its
/// gradient `2 (pred - target) / n`.
pub fn mse_loss(pred: &Batch, target: &Batch) -> Result<(f64, Batch), LossError> {
    if pred.n() != target.n() || pred.dim() != target.dim() {
        return Err(LossError::ShapeMismatch {
            left: (pred.n(), pred.dim()),
            right: (target.n(), target.dim()),
        });
    }
    let n = pred.n() as f64;
    let mut loss = 0.0;
    let mut grad = Batch::zeros(pred.n(), pred.dim());
    for (i, (p, t)) in pred.data().iter().zip(target.data()).enumerate() {
        let d = p - t;
        loss += d * d;
        grad.data_mut()[i] = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

/// Average negative log-softmax of the true class, with gradient
/// `(softmax - onehot) / n`. Labels are 1-based class indices.
pub fn cross_entropy_loss(logits: &Batch, labels: &[usize]) -> Result<(f64, Batch), LossError> {
    if labels.len() != logits.n() {
        return Err(LossError::LabelCountMismatch {
            rows: logits.n(),
            labels: labels.len(),
        });
    }
    let classes = logits.dim();
    if let Some(index) = labels.iter().position(|&l| l < 1 || l > classes) {
        return Err(LossError::LabelOutOfRange {
            index,
            label: labels[index],
            classes,
        });
    }
    let n = logits.n() as f64;
    let mut loss = 0.0;
    let mut grad = Batch::zeros(logits.n(), logits.dim());
    for (s, &label) in labels.iter().enumerate() {
        let row = logits.row(s);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for &l in row {
            sum += libm::exp(l - max);
        }
        let log_sum_exp = max + libm::log(sum);
        let truth = label - 1;
        loss += log_sum_exp - row[truth];
        let gs = grad.row_mut(s);
        for (j, &l) in row.iter().enumerate() {
            let softmax = libm::exp(l - max) / sum;
            gs[j] = (softmax - if j == truth { 1.0 } else { 0.0 }) / n;
        }
    }
    Ok((loss / n, grad))
}

/// ADAM with bias correction. Moment buffers are indexed by slot position,
/// so the same parameter ordering must be used on every step.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step_count: u64,
    beta1_pow: f64,
    beta2_pow: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(param_count: usize, lr: f64) -> Adam {
        assert!(lr > 0.0 && lr.is_finite(), "learning rate must be positive");
        Adam {
            lr,
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            eps: Self::EPS,
            step_count: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Changes the learning rate without touching moment state. The schedule
    /// calls this at epoch boundaries.
    pub fn set_lr(&mut self, lr: f64) {
        assert!(lr > 0.0 && lr.is_finite(), "learning rate must be positive");
        self.lr = lr;
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update over every slot: first and second moments decay toward the
    /// gradient and its square, bias-corrected estimates drive the step.
    pub fn step(&mut self, params: &mut [ParamSlot<'_>]) -> Result<(), OptimError> {
        if params.len() != self.m.len() {
            return Err(OptimError::ParamCountMismatch {
                expected: self.m.len(),
                got: params.len(),
            });
        }
        self.step_count += 1;
        self.beta1_pow *= self.beta1;
        self.beta2_pow *= self.beta2;
        let m_correction = 1.0 - self.beta1_pow;
        let v_correction = 1.0 - self.beta2_pow;
        for (i, slot) in params.iter_mut().enumerate() {
            let g = *slot.grad;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / m_correction;
            let v_hat = self.v[i] / v_correction;
            *slot.value -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
        Ok(())
    }
}

/// Two-stage learning rate: `lr_first` through epoch `total/2` (floor),
/// `lr_second` afterwards. Epochs are 1-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    total_epochs: usize,
    lr_first: f64,
    lr_second: f64,
}

impl LrSchedule {
    pub fn new(
        total_epochs: usize,
        lr_first: f64,
        lr_second: f64,
    ) -> Result<LrSchedule, OptimError> {
        let ok = total_epochs >= 1
            && lr_first > 0.0
            && lr_first.is_finite()
            && lr_second > 0.0
            && lr_second.is_finite();
        if !ok {
            return Err(OptimError::BadSchedule);
        }
        Ok(LrSchedule {
            total_epochs,
            lr_first,
            lr_second,
        })
    }

    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    pub fn lr_at(&self, epoch: usize) -> Result<f64, OptimError> {
        if epoch < 1 || epoch > self.total_epochs {
            return Err(OptimError::EpochOutOfRange {
                epoch,
                total: self.total_epochs,
            });
        }
        Ok(if epoch <= self.total_epochs / 2 {
            self.lr_first
        } else {
            self.lr_second
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SeededRng;
    use crate::params::ParamClass;

    fn random_batch(n: usize, dim: usize, rng: &mut SeededRng) -> Batch {
        let data = (0..n * dim).map(|_| rng.uniform(-2.0, 2.0)).collect();
        Batch::from_vec(n, dim, data).unwrap()
    }

    fn slots<'a>(values: &'a mut [f64], grads: &'a mut [f64]) -> Vec<ParamSlot<'a>> {
        values
            .iter_mut()
            .zip(grads.iter_mut())
            .map(|(value, grad)| ParamSlot {
                class: ParamClass::Weight,
                value,
                grad,
            })
            .collect()
    }

    #[test]
    fn mse_zero_on_match() {
        let p = Batch::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (loss, grad) = mse_loss(&p, &p).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mse_hand_case() {
        let p = Batch::from_vec(1, 1, vec![1.0]).unwrap();
        let t = Batch::from_vec(1, 1, vec![0.0]).unwrap();
        let (loss, grad) = mse_loss(&p, &t).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.data(), &[2.0]);
    }

    #[test]
    fn mse_matches_scalar_oracle_and_fd() {
        let mut rng = SeededRng::new(1);
        let p = random_batch(5, 3, &mut rng);
        let t = random_batch(5, 3, &mut rng);
        let (loss, grad) = mse_loss(&p, &t).unwrap();

        let mut want = 0.0;
        for s in 0..5 {
            let mut norm = 0.0;
            for k in 0..3 {
                let d = p.get(s, k) - t.get(s, k);
                norm += d * d;
            }
            want += norm;
        }
        want /= 5.0;
        assert!((loss - want).abs() <= 1e-15 * want.abs().max(1.0));

        let h = 1e-5;
        for s in 0..5 {
            for k in 0..3 {
                let mut plus = p.clone();
                plus.set(s, k, p.get(s, k) + h);
                let mut minus = p.clone();
                minus.set(s, k, p.get(s, k) - h);
                let numeric =
                    (mse_loss(&plus, &t).unwrap().0 - mse_loss(&minus, &t).unwrap().0) / (2.0 * h);
                let analytic = grad.get(s, k);
                let denom = analytic.abs().max(numeric.abs()).max(1e-3);
                assert!((analytic - numeric).abs() / denom < 1e-6);
            }
        }
    }

    #[test]
    fn mse_shape_mismatch() {
        let p = Batch::zeros(2, 2);
        let t = Batch::zeros(2, 3);
        assert!(matches!(
            mse_loss(&p, &t),
            Err(LossError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = Batch::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        let (loss, grad) = cross_entropy_loss(&logits, &[1]).unwrap();
        assert!((loss - libm::log(2.0)).abs() < 1e-15);
        assert!((grad.get(0, 0) + 0.5).abs() < 1e-15);
        assert!((grad.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_shift_invariance_and_row_sums() {
        let mut rng = SeededRng::new(2);
        let logits = random_batch(4, 5, &mut rng);
        let labels = [3, 1, 5, 2];
        let (loss, grad) = cross_entropy_loss(&logits, &labels).unwrap();
        let mut shifted = logits.clone();
        for s in 0..4 {
            let c = rng.uniform(-10.0, 10.0);
            for k in 0..5 {
                shifted.set(s, k, logits.get(s, k) + c);
            }
        }
        let (loss2, grad2) = cross_entropy_loss(&shifted, &labels).unwrap();
        assert!((loss - loss2).abs() < 1e-12);
        for (a, b) in grad.data().iter().zip(grad2.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for s in 0..4 {
            let sum: f64 = grad.row(s).iter().sum();
            assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_gradient_matches_fd() {
        let mut rng = SeededRng::new(3);
        let logits = random_batch(3, 4, &mut rng);
        let labels = [2, 4, 1];
        let (_, grad) = cross_entropy_loss(&logits, &labels).unwrap();
        let h = 1e-5;
        for s in 0..3 {
            for k in 0..4 {
                let mut plus = logits.clone();
                plus.set(s, k, logits.get(s, k) + h);
                let mut minus = logits.clone();
                minus.set(s, k, logits.get(s, k) - h);
                let numeric = (cross_entropy_loss(&plus, &labels).unwrap().0
                    - cross_entropy_loss(&minus, &labels).unwrap().0)
                    / (2.0 * h);
                let analytic = grad.get(s, k);
                let denom = analytic.abs().max(numeric.abs()).max(1e-3);
                assert!((analytic - numeric).abs() / denom < 1e-6);
            }
        }
    }

    #[test]
    fn cross_entropy_is_stable_at_extreme_logits() {
        let logits = Batch::from_vec(1, 2, vec![1000.0, -1000.0]).unwrap();
        let (loss, grad) = cross_entropy_loss(&logits, &[1]).unwrap();
        assert!(loss.is_finite());
        assert!(loss.abs() < 1e-12);
        assert!(grad.data().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let logits = Batch::zeros(2, 3);
        assert!(matches!(
            cross_entropy_loss(&logits, &[1, 0]),
            Err(LossError::LabelOutOfRange {
                index: 1,
                label: 0,
                classes: 3
            })
        ));
        assert!(matches!(
            cross_entropy_loss(&logits, &[1, 4]),
            Err(LossError::LabelOutOfRange {
                index: 1,
                label: 4,
                classes: 3
            })
        ));
        assert!(matches!(
            cross_entropy_loss(&logits, &[1]),
            Err(LossError::LabelCountMismatch { rows: 2, labels: 1 })
        ));
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut values = [1.5, -2.0];
        let mut grads = [0.0, 0.0];
        let mut adam = Adam::new(2, 1e-3);
        adam.step(&mut slots(&mut values, &mut grads)).unwrap();
        assert_eq!(values, [1.5, -2.0]);
    }

    #[test]
    fn adam_first_step_hand_oracle() {
        let mut values = [0.0];
        let mut grads = [1.0];
        let mut adam = Adam::new(1, 1e-4);
        adam.step(&mut slots(&mut values, &mut grads)).unwrap();
        // Bias corrections cancel exactly on the first step, so the update
        // is lr / (1 + eps).
        assert_eq!(values[0], -1e-4 / (1.0 + 1e-8));
    }

    #[test]
    fn adam_constant_gradient_keeps_step_size() {
        let mut values = [0.0];
        let mut grads = [1.0];
        let mut adam = Adam::new(1, 1e-4);
        adam.step(&mut slots(&mut values, &mut grads)).unwrap();
        let first = values[0];
        adam.step(&mut slots(&mut values, &mut grads)).unwrap();
        let second = values[0] - first;
        assert!((second - first).abs() < 1e-12 * first.abs());
    }

    #[test]
    fn adam_updates_flip_with_gradient_sign() {
        let mut rng = SeededRng::new(4);
        let mut pos = [0.0; 5];
        let mut neg = [0.0; 5];
        let mut adam_pos = Adam::new(5, 1e-3);
        let mut adam_neg = Adam::new(5, 1e-3);
        for _ in 0..3 {
            let g: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let mut gp: Vec<f64> = g.clone();
            let mut gn: Vec<f64> = g.iter().map(|v| -v).collect();
            adam_pos.step(&mut slots(&mut pos, &mut gp)).unwrap();
            adam_neg.step(&mut slots(&mut neg, &mut gn)).unwrap();
        }
        for (p, n) in pos.iter().zip(&neg) {
            assert_eq!(*p, -*n);
        }
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut value = [0.0];
        let mut adam = Adam::new(1, 1e-2);
        let loss = |p: f64| (p - 3.0) * (p - 3.0);
        let before = loss(value[0]);
        let mut grad = [2.0 * (value[0] - 3.0)];
        adam.step(&mut slots(&mut value, &mut grad)).unwrap();
        assert!(loss(value[0]) < before);
    }

    #[test]
    fn adam_rejects_wrong_slot_count() {
        let mut values = [0.0; 2];
        let mut grads = [0.0; 2];
        let mut adam = Adam::new(3, 1e-3);
        assert!(matches!(
            adam.step(&mut slots(&mut values, &mut grads)),
            Err(OptimError::ParamCountMismatch {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn schedule_switches_at_half() {
        let s = LrSchedule::new(100, 1e-4, 1e-5).unwrap();
        assert_eq!(s.lr_at(1).unwrap(), 1e-4);
        assert_eq!(s.lr_at(50).unwrap(), 1e-4);
        assert_eq!(s.lr_at(51).unwrap(), 1e-5);
        assert_eq!(s.lr_at(100).unwrap(), 1e-5);
    }

    #[test]
    fn schedule_boundary_cases() {
        let one = LrSchedule::new(1, 1e-4, 1e-5).unwrap();
        assert_eq!(one.lr_at(1).unwrap(), 1e-5);
        let two = LrSchedule::new(2, 1e-4, 1e-5).unwrap();
        assert_eq!(two.lr_at(1).unwrap(), 1e-4);
        assert_eq!(two.lr_at(2).unwrap(), 1e-5);
    }

    #[test]
    fn schedule_rejects_bad_input() {
        assert!(matches!(
            LrSchedule::new(0, 1e-4, 1e-5),
            Err(OptimError::BadSchedule)
        ));
        assert!(matches!(
            LrSchedule::new(10, 0.0, 1e-5),
            Err(OptimError::BadSchedule)
        ));
        let s = LrSchedule::new(10, 1e-4, 1e-5).unwrap();
        assert!(matches!(
            s.lr_at(0),
            Err(OptimError::EpochOutOfRange {
                epoch: 0,
                total: 10
            })
        ));
        assert!(matches!(
            s.lr_at(11),
            Err(OptimError::EpochOutOfRange {
                epoch: 11,
                total: 10
            })
        ));
    }
}
