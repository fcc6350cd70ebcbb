//! Feed-forward network assembly: affine layers, optional per-feature batch
//! normalization of hidden linear outputs, and activation operators, with a
//! tape-based reverse pass.
//!
//! A network is a chain of blocks. Every block applies its affine map, then
//! batch normalization if present, then its activation if present. The final
//! block is affine only, so regression outputs and classification logits
//! leave the network untouched.

use crate::activations::{ActError, ActivationCache, ActivationOp};
use crate::data::SeededRng;
use crate::la::{affine_batch, Batch, LaError, Matrix};
use crate::params::{ParamClass, ParamSlot};
use crate::stepfn::StepFnError;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Network construction or pass error.
#[derive(Clone, Debug, PartialEq)]
pub enum NetError {
    La(LaError),
    Act(ActError),
    Step(StepFnError),
    /// Block `block` outputs `from` features but the next block expects `to`.
    ChainMismatch {
        block: usize,
        from: usize,
        to: usize,
    },
    /// Activation of block `block` is built for `width` features, affine
    /// produces `expected`.
    ActWidthMismatch {
        block: usize,
        width: usize,
        expected: usize,
    },
    /// Batch normalization of block `block` is built for `dim` features,
    /// affine produces `expected`.
    BnDimMismatch {
        block: usize,
        dim: usize,
        expected: usize,
    },
    /// The final block must be affine only.
    TrailingOps,
    /// A network needs at least one block.
    EmptyNetwork,
    /// Input feature count does not match the first layer.
    InputDimMismatch {
        expected: usize,
        got: usize,
    },
    /// Train-mode batch normalization needs at least two samples.
    BatchTooSmall {
        n: usize,
    },
    /// The tape does not belong to this network and batch.
    TapeMismatch,
    /// Batch normalization state violates its invariants.
    BadBatchNorm,
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::La(e) => write!(f, "linear algebra: {e}"),
            NetError::Act(e) => write!(f, "activation: {e}"),
            NetError::Step(e) => write!(f, "step function: {e}"),
            NetError::ChainMismatch { block, from, to } => write!(
                f,
                "block {block} outputs {from} features but the next block expects {to}"
            ),
            NetError::ActWidthMismatch {
                block,
                width,
                expected,
            } => write!(
                f,
                "block {block} activation width {width} does not match affine output {expected}"
            ),
            NetError::BnDimMismatch {
                block,
                dim,
                expected,
            } => write!(
                f,
                "block {block} batch norm width {dim} does not match affine output {expected}"
            ),
            NetError::TrailingOps => {
                write!(f, "final block must not carry batch norm or an activation")
            }
            NetError::EmptyNetwork => write!(f, "network needs at least one block"),
            NetError::InputDimMismatch { expected, got } => {
                write!(f, "network expects {expected} input features, got {got}")
            }
            NetError::BatchTooSmall { n } => write!(
                f,
                "train-mode batch normalization needs at least 2 samples, got {n}"
            ),
            NetError::TapeMismatch => write!(f, "tape does not match this network and batch"),
            NetError::BadBatchNorm => write!(
                f,
                "batch norm state invalid: vectors must agree in length, eps > 0, \
                 momentum in (0,1), running variance non-negative, all entries finite"
            ),
        }
    }
}

impl core::error::Error for NetError {}

impl From<LaError> for NetError {
    fn from(e: LaError) -> NetError {
        NetError::La(e)
    }
}

impl From<ActError> for NetError {
    fn from(e: ActError) -> NetError {
        NetError::Act(e)
    }
}

impl From<StepFnError> for NetError {
    fn from(e: StepFnError) -> NetError {
        NetError::Step(e)
    }
}

/// Dense affine map `W x + b` with gradient accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    w: Matrix,
    b: Vec<f64>,
    w_grad: Matrix,
    b_grad: Vec<f64>,
}

impl AffineLayer {
    /// Wraps explicit parameters; `w` is `out x in` and `b` has length `out`.
    pub fn new(w: Matrix, b: Vec<f64>) -> Result<AffineLayer, NetError> {
        if b.len() != w.rows() {
            return Err(NetError::La(LaError::DimMismatch {
                op: "affine layer bias",
                left: (w.rows(), w.cols()),
                right: (b.len(), 1),
            }));
        }
        if let Some(index) = b.iter().position(|v| !v.is_finite()) {
            return Err(NetError::La(LaError::NonFinite { index }));
        }
        let w_grad = Matrix::zeros(w.rows(), w.cols());
        let b_grad = vec![0.0; b.len()];
        Ok(AffineLayer {
            w,
            b,
            w_grad,
            b_grad,
        })
    }

    /// Random initialization: weights uniform in `[-1/sqrt(in), 1/sqrt(in))`
    /// drawn row by row, biases zero.
    pub fn seeded(in_dim: usize, out_dim: usize, rng: &mut SeededRng) -> AffineLayer {
        let bound = 1.0 / libm::sqrt(in_dim as f64);
        let mut w = Matrix::zeros(out_dim, in_dim);
        for v in w.data_mut() {
            *v = rng.uniform(-bound, bound);
        }
        AffineLayer::new(w, vec![0.0; out_dim]).expect("seeded layer is well-formed")
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn biases(&self) -> &[f64] {
        &self.b
    }

    fn forward(&self, x: &Batch) -> Result<Batch, LaError> {
        affine_batch(x, &self.w, &self.b)
    }

    /// Accumulates weight and bias gradients and returns the input gradient.
    fn backward(&mut self, input: &Batch, upstream: &Batch) -> Batch {
        debug_assert_eq!(input.n(), upstream.n());
        debug_assert_eq!(input.dim(), self.in_dim());
        debug_assert_eq!(upstream.dim(), self.out_dim());
        let in_dim = self.in_dim();
        for s in 0..input.n() {
            let xs = input.row(s);
            let us = upstream.row(s);
            for (o, &u) in us.iter().enumerate() {
                self.b_grad[o] += u;
                let wg = &mut self.w_grad.data_mut()[o * in_dim..(o + 1) * in_dim];
                for (g, x) in wg.iter_mut().zip(xs) {
                    *g += u * x;
                }
            }
        }
        let mut input_grad = Batch::zeros(input.n(), in_dim);
        for s in 0..input.n() {
            let us = upstream.row(s);
            let gs = input_grad.row_mut(s);
            for (o, &u) in us.iter().enumerate() {
                for (g, w) in gs.iter_mut().zip(self.w.row(o)) {
                    *g += u * w;
                }
            }
        }
        input_grad
    }

    fn zero_grads(&mut self) {
        self.w_grad.data_mut().fill(0.0);
        self.b_grad.fill(0.0);
    }

    fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        let mut slots = Vec::with_capacity(self.w.data().len() + self.b.len());
        for (value, grad) in self
            .w
            .data_mut()
            .iter_mut()
            .zip(self.w_grad.data_mut().iter_mut())
        {
            slots.push(ParamSlot {
                class: ParamClass::Weight,
                value,
                grad,
            });
        }
        for (value, grad) in self.b.iter_mut().zip(self.b_grad.iter_mut()) {
            slots.push(ParamSlot {
                class: ParamClass::Bias,
                value,
                grad,
            });
        }
        slots
    }

    fn param_values(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.b);
    }
}

/// Per-feature batch normalization with trainable scale and shift, tracking
/// running statistics for eval mode.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormLayer {
    scale: Vec<f64>,
    shift: Vec<f64>,
    scale_grad: Vec<f64>,
    shift_grad: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    eps: f64,
    momentum: f64,
}

/// Per-batch statistics the backward pass needs.
#[derive(Clone, Debug)]
pub struct BnCache {
    xhat: Batch,
    inv_std: Vec<f64>,
}

pub const BN_DEFAULT_EPS: f64 = 1e-5;
pub const BN_DEFAULT_MOMENTUM: f64 = 0.1;

impl BatchNormLayer {
    /// Fresh layer: scale 1, shift 0, running mean 0, running variance 1.
    pub fn new(dim: usize) -> BatchNormLayer {
        assert!(dim > 0, "batch norm needs at least one feature");
        BatchNormLayer {
            scale: vec![1.0; dim],
            shift: vec![0.0; dim],
            scale_grad: vec![0.0; dim],
            shift_grad: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            eps: BN_DEFAULT_EPS,
            momentum: BN_DEFAULT_MOMENTUM,
        }
    }

    /// Rebuilds a layer from stored state, validating every invariant.
    pub fn from_parts(
        scale: Vec<f64>,
        shift: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        eps: f64,
        momentum: f64,
    ) -> Result<BatchNormLayer, NetError> {
        let dim = scale.len();
        let lengths_ok =
            dim > 0 && shift.len() == dim && running_mean.len() == dim && running_var.len() == dim;
        let entries_ok = scale.iter().all(|v| v.is_finite())
            && shift.iter().all(|v| v.is_finite())
            && running_mean.iter().all(|v| v.is_finite())
            && running_var.iter().all(|v| v.is_finite() && *v >= 0.0);
        let scalars_ok = eps.is_finite()
            && eps > 0.0
            && momentum.is_finite()
            && momentum > 0.0
            && momentum < 1.0;
        if !(lengths_ok && entries_ok && scalars_ok) {
            return Err(NetError::BadBatchNorm);
        }
        Ok(BatchNormLayer {
            scale_grad: vec![0.0; dim],
            shift_grad: vec![0.0; dim],
            scale,
            shift,
            running_mean,
            running_var,
            eps,
            momentum,
        })
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    /// Normalizes by batch statistics (biased variance), applies scale and
    /// shift, and updates running statistics (variance with the unbiased
    /// n/(n-1) correction).
    pub fn forward_train(&mut self, y: &Batch) -> Result<(Batch, BnCache), NetError> {
        let (n, dim) = (y.n(), y.dim());
        if dim != self.dim() {
            return Err(NetError::BnDimMismatch {
                block: 0,
                dim: self.dim(),
                expected: dim,
            });
        }
        if n < 2 {
            return Err(NetError::BatchTooSmall { n });
        }
        let nf = n as f64;
        let mut xhat = Batch::zeros(n, dim);
        let mut inv_std = vec![0.0; dim];
        let mut out = Batch::zeros(n, dim);
        for (k, istd_slot) in inv_std.iter_mut().enumerate() {
            let mut mean = 0.0;
            for s in 0..n {
                mean += y.get(s, k);
            }
            mean /= nf;
            let mut var = 0.0;
            for s in 0..n {
                let d = y.get(s, k) - mean;
                var += d * d;
            }
            var /= nf;
            let istd = 1.0 / libm::sqrt(var + self.eps);
            *istd_slot = istd;
            for s in 0..n {
                let xh = (y.get(s, k) - mean) * istd;
                xhat.set(s, k, xh);
                out.set(s, k, self.scale[k] * xh + self.shift[k]);
            }
            self.running_mean[k] =
                (1.0 - self.momentum) * self.running_mean[k] + self.momentum * mean;
            let unbiased = var * nf / (nf - 1.0);
            self.running_var[k] =
                (1.0 - self.momentum) * self.running_var[k] + self.momentum * unbiased;
        }
        Ok((out, BnCache { xhat, inv_std }))
    }

    /// Normalizes by running statistics; pure and valid for any batch size.
    pub fn forward_eval(&self, y: &Batch) -> Result<Batch, NetError> {
        if y.dim() != self.dim() {
            return Err(NetError::BnDimMismatch {
                block: 0,
                dim: self.dim(),
                expected: y.dim(),
            });
        }
        let mut out = Batch::zeros(y.n(), y.dim());
        for k in 0..self.dim() {
            let istd = 1.0 / libm::sqrt(self.running_var[k] + self.eps);
            for s in 0..y.n() {
                let xh = (y.get(s, k) - self.running_mean[k]) * istd;
                out.set(s, k, self.scale[k] * xh + self.shift[k]);
            }
        }
        Ok(out)
    }

    /// Accumulates scale and shift gradients and returns the gradient with
    /// respect to the pre-normalization input, including the batch-statistics
    /// terms.
    pub fn backward(&mut self, cache: &BnCache, upstream: &Batch) -> Batch {
        let (n, dim) = (upstream.n(), upstream.dim());
        debug_assert_eq!(dim, self.dim());
        debug_assert_eq!(cache.xhat.n(), n);
        let nf = n as f64;
        let mut dy = Batch::zeros(n, dim);
        for k in 0..dim {
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for s in 0..n {
                let u = upstream.get(s, k);
                let xh = cache.xhat.get(s, k);
                self.shift_grad[k] += u;
                self.scale_grad[k] += u * xh;
                sum_dxhat += u * self.scale[k];
                sum_dxhat_xhat += u * self.scale[k] * xh;
            }
            let istd = cache.inv_std[k];
            for s in 0..n {
                let dxhat = upstream.get(s, k) * self.scale[k];
                let xh = cache.xhat.get(s, k);
                dy.set(
                    s,
                    k,
                    (istd / nf) * (nf * dxhat - sum_dxhat - xh * sum_dxhat_xhat),
                );
            }
        }
        dy
    }

    fn zero_grads(&mut self) {
        self.scale_grad.fill(0.0);
        self.shift_grad.fill(0.0);
    }

    fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        let mut slots = Vec::with_capacity(2 * self.scale.len());
        for (value, grad) in self.scale.iter_mut().zip(self.scale_grad.iter_mut()) {
            slots.push(ParamSlot {
                class: ParamClass::BnScale,
                value,
                grad,
            });
        }
        for (value, grad) in self.shift.iter_mut().zip(self.shift_grad.iter_mut()) {
            slots.push(ParamSlot {
                class: ParamClass::BnShift,
                value,
                grad,
            });
        }
        slots
    }

    fn param_values(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.scale);
        out.extend_from_slice(&self.shift);
    }
}

/// One stage of the network: affine, then optional batch norm, then optional
/// activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    affine: AffineLayer,
    bn: Option<BatchNormLayer>,
    act: Option<ActivationOp>,
}

impl Block {
    pub fn new(
        affine: AffineLayer,
        bn: Option<BatchNormLayer>,
        act: Option<ActivationOp>,
    ) -> Block {
        Block { affine, bn, act }
    }

    pub fn affine(&self) -> &AffineLayer {
        &self.affine
    }

    pub fn bn(&self) -> Option<&BatchNormLayer> {
        self.bn.as_ref()
    }

    pub fn act(&self) -> Option<&ActivationOp> {
        self.act.as_ref()
    }
}

/// Forward mode: train normalizes by batch statistics and fills a tape, eval
/// normalizes by running statistics and is pure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

struct TapeRecord {
    input: Batch,
    bn: Option<BnCache>,
    act: Option<ActivationCache>,
}

/// Per-block caches from one train-mode forward pass; consumed by exactly
/// one backward pass.
pub struct GradientTape {
    records: Vec<TapeRecord>,
    n: usize,
}

impl GradientTape {
    /// Eval-mode passes produce an empty tape.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// A validated chain of blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    blocks: Vec<Block>,
}

impl Network {
    /// Validates dimension chaining, operator widths, and the affine-only
    /// final block.
    pub fn new(blocks: Vec<Block>) -> Result<Network, NetError> {
        if blocks.is_empty() {
            return Err(NetError::EmptyNetwork);
        }
        let last = blocks.len() - 1;
        for (i, block) in blocks.iter().enumerate() {
            let out = block.affine.out_dim();
            if i == last {
                if block.bn.is_some() || block.act.is_some() {
                    return Err(NetError::TrailingOps);
                }
                continue;
            }
            if blocks[i + 1].affine.in_dim() != out {
                return Err(NetError::ChainMismatch {
                    block: i,
                    from: out,
                    to: blocks[i + 1].affine.in_dim(),
                });
            }
            if let Some(bn) = &block.bn {
                if bn.dim() != out {
                    return Err(NetError::BnDimMismatch {
                        block: i,
                        dim: bn.dim(),
                        expected: out,
                    });
                }
            }
            if let Some(act) = &block.act {
                if let Some(width) = act.width() {
                    if width != out {
                        return Err(NetError::ActWidthMismatch {
                            block: i,
                            width,
                            expected: out,
                        });
                    }
                }
            }
        }
        Ok(Network { blocks })
    }

    /// Builds a plain multilayer perceptron: `dims` lists layer sizes from
    /// input to output, every hidden layer gets an activation instantiated
    /// from `act`, and `batch_norm` inserts batch normalization between each
    /// hidden affine and its activation. Weights draw from `rng` layer by
    /// layer.
    pub fn mlp(
        dims: &[usize],
        act: &crate::activations::ActivationSpec,
        batch_norm: bool,
        rng: &mut SeededRng,
    ) -> Result<Network, NetError> {
        if dims.len() < 2 {
            return Err(NetError::EmptyNetwork);
        }
        let mut blocks = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let affine = AffineLayer::seeded(dims[l], dims[l + 1], rng);
            let hidden = l + 2 < dims.len();
            let bn = (hidden && batch_norm).then(|| BatchNormLayer::new(dims[l + 1]));
            let op = if hidden {
                Some(act.instantiate(dims[l + 1])?)
            } else {
                None
            };
            blocks.push(Block::new(affine, bn, op));
        }
        Network::new(blocks)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn input_dim(&self) -> usize {
        self.blocks[0].affine.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.blocks[self.blocks.len() - 1].affine.out_dim()
    }

    /// Runs the chain. Train mode normalizes by batch statistics, updates
    /// running statistics, and returns a tape for [`Network::backward`];
    /// eval mode uses running statistics and returns an empty tape.
    pub fn forward(&mut self, x: &Batch, mode: Mode) -> Result<(Batch, GradientTape), NetError> {
        if x.dim() != self.input_dim() {
            return Err(NetError::InputDimMismatch {
                expected: self.input_dim(),
                got: x.dim(),
            });
        }
        if mode == Mode::Eval {
            let out = self.forward_eval(x)?;
            return Ok((
                out,
                GradientTape {
                    records: Vec::new(),
                    n: x.n(),
                },
            ));
        }
        let mut records = Vec::with_capacity(self.blocks.len());
        let mut current = x.clone();
        for block in &mut self.blocks {
            let input = current;
            let mut y = block.affine.forward(&input)?;
            let bn_cache = match &mut block.bn {
                Some(bn) => {
                    let (out, cache) = bn.forward_train(&y)?;
                    y = out;
                    Some(cache)
                }
                None => None,
            };
            let act_cache = match &block.act {
                Some(act) => {
                    let (out, cache) = act.forward(&y)?;
                    y = out;
                    Some(cache)
                }
                None => None,
            };
            records.push(TapeRecord {
                input,
                bn: bn_cache,
                act: act_cache,
            });
            current = y;
        }
        Ok((current, GradientTape { records, n: x.n() }))
    }

    /// Pure eval-mode pass: batch norm uses running statistics, nothing is
    /// mutated, and rows are processed independently.
    pub fn forward_eval(&self, x: &Batch) -> Result<Batch, NetError> {
        if x.dim() != self.input_dim() {
            return Err(NetError::InputDimMismatch {
                expected: self.input_dim(),
                got: x.dim(),
            });
        }
        let mut current = x.clone();
        for block in &self.blocks {
            current = block.affine.forward(&current)?;
            if let Some(bn) = &block.bn {
                current = bn.forward_eval(&current)?;
            }
            if let Some(act) = &block.act {
                let (out, _) = act.forward(&current)?;
                current = out;
            }
        }
        Ok(current)
    }

    /// Reverse pass over a tape from a matching train-mode forward call.
    /// Accumulates every parameter gradient and returns the gradient with
    /// respect to the network input.
    pub fn backward(&mut self, tape: GradientTape, out_grad: &Batch) -> Result<Batch, NetError> {
        if tape.records.len() != self.blocks.len()
            || tape.n != out_grad.n()
            || out_grad.dim() != self.output_dim()
        {
            return Err(NetError::TapeMismatch);
        }
        let mut grad = out_grad.clone();
        for (block, record) in self.blocks.iter_mut().zip(tape.records).rev() {
            if let Some(act) = &mut block.act {
                let cache = record.act.as_ref().ok_or(NetError::TapeMismatch)?;
                grad = act.backward(cache, &grad)?;
            }
            if let Some(bn) = &mut block.bn {
                let cache = record.bn.as_ref().ok_or(NetError::TapeMismatch)?;
                grad = bn.backward(cache, &grad);
            }
            grad = block.affine.backward(&record.input, &grad);
        }
        Ok(grad)
    }

    /// Every trainable scalar exactly once: per block, weights row-major,
    /// then biases, then batch-norm scale and shift, then activation
    /// parameters.
    pub fn collect_params(&mut self) -> Vec<ParamSlot<'_>> {
        let mut slots = Vec::with_capacity(self.param_count());
        for block in &mut self.blocks {
            slots.extend(block.affine.param_slots());
            if let Some(bn) = &mut block.bn {
                slots.extend(bn.param_slots());
            }
            if let Some(act) = &mut block.act {
                slots.extend(act.collect_params());
            }
        }
        slots
    }

    /// Current parameter values in [`Network::collect_params`] order.
    pub fn param_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for block in &self.blocks {
            block.affine.param_values(&mut out);
            if let Some(bn) = &block.bn {
                bn.param_values(&mut out);
            }
            if let Some(act) = &block.act {
                out.extend(act.param_values());
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| {
                b.affine.w.data().len()
                    + b.affine.b.len()
                    + b.bn.as_ref().map_or(0, |bn| 2 * bn.dim())
                    + b.act.as_ref().map_or(0, ActivationOp::param_count)
            })
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for block in &mut self.blocks {
            block.affine.zero_grads();
            if let Some(bn) = &mut block.bn {
                bn.zero_grads();
            }
            if let Some(act) = &mut block.act {
                act.zero_grads();
            }
        }
    }

    /// Smallest distance between any activation argument and any kink point
    /// of its operator, over a train-mode pass on `x`. Gradient checking
    /// rejects inputs whose margin is too small. Runs on a clone, so running
    /// statistics are untouched. `None` when no block has an activation.
    pub fn min_kink_margin(&self, x: &Batch) -> Result<Option<f64>, NetError> {
        let mut probe = self.clone();
        let mut current = x.clone();
        let mut min: Option<f64> = None;
        for block in &mut probe.blocks {
            let mut y = block.affine.forward(&current)?;
            if let Some(bn) = &mut block.bn {
                let (out, _) = bn.forward_train(&y)?;
                y = out;
            }
            if let Some(act) = &block.act {
                for &kink in &act.kink_points() {
                    for &v in y.data() {
                        let d = libm::fabs(v - kink);
                        min = Some(match min {
                            Some(m) if m <= d => m,
                            _ => d,
                        });
                    }
                }
                let (out, _) = act.forward(&y)?;
                y = out;
            }
            current = y;
        }
        Ok(min)
    }
}
