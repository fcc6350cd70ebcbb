//! Activation operators over batches of pre-activations.
//!
//! Pointwise baselines (ReLU, Leaky ReLU, parametric ReLU) and two matrix
//! kinds built from step functions: a diagonal operator scaling `y_i` by
//! `alpha(y_i)`, and a tri-diagonal operator that also mixes neighboring
//! neurons. Every kind carries an exact backward pass; the matrix kinds
//! additionally accumulate gradients for their step-function values.
//!
//! All pointwise baselines are computed in the multiplicative form
//! `coefficient(y) * y` rather than with `max`. The results are numerically
//! equal, and the form makes the step-function reductions (ReLU as a
//! diagonal operator with values `[0, 1]`, and so on) bit-exact.

use crate::la::Batch;
use crate::params::{ParamClass, ParamSlot};
use crate::stepfn::{StepFnError, StepFunction};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Default negative-side slope for the Leaky ReLU baseline.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Initial per-neuron slope for parametric ReLU.
pub const PRELU_INIT_SLOPE: f64 = 0.25;

/// Whether a layer's step functions are shared by every neuron or owned per
/// neuron. Shared is the default; the per-neuron variant exists as a
/// constructor option.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sharing {
    PerLayer,
    PerNeuron,
}

/// Shape violation in an activation call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActError {
    /// The batch width does not match the operator's layer width.
    WidthMismatch { expected: usize, got: usize },
    /// Upstream gradient shape does not match the cached forward shape.
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// Per-neuron construction needs one step function per neuron, equally
    /// many for each diagonal.
    BadFunctionCount { expected: usize, got: usize },
}

impl fmt::Display for ActError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActError::WidthMismatch { expected, got } => {
                write!(
                    f,
                    "activation width {expected} does not match batch width {got}"
                )
            }
            ActError::ShapeMismatch { expected, got } => write!(
                f,
                "upstream shape {}x{} does not match cached {}x{}",
                got.0, got.1, expected.0, expected.1
            ),
            ActError::BadFunctionCount { expected, got } => {
                write!(f, "expected {expected} step functions, got {got}")
            }
        }
    }
}

impl core::error::Error for ActError {}

/// Pre-activations captured by `forward` for the matching `backward` call.
#[derive(Clone, Debug)]
pub struct ActivationCache {
    y: Batch,
}

impl ActivationCache {
    /// The exact batch the activation was applied to.
    pub fn input(&self) -> &Batch {
        &self.y
    }
}

/// An activation operator instance, including any trainable state.
#[derive(Clone, Debug, PartialEq)]
pub enum ActivationOp {
    ReLU,
    LeakyReLU {
        slope: f64,
    },
    PReLU {
        slopes: Vec<f64>,
        slope_grads: Vec<f64>,
    },
    /// `out_i = alpha(y_i) * y_i`. One shared function, or one per neuron.
    DiagTMAF {
        alpha: Vec<StepFunction>,
    },
    /// `out_i = gamma(y_{i-1}) * y_{i-1} + alpha(y_i) * y_i
    ///          + beta(y_{i+1}) * y_{i+1}`, out-of-range terms dropped.
    /// Every entry in column `j` is a function of `y_j`.
    TriDiagTMAF {
        alpha: Vec<StepFunction>,
        beta: Vec<StepFunction>,
        gamma: Vec<StepFunction>,
    },
}

fn fn_for(fns: &[StepFunction], i: usize) -> &StepFunction {
    if fns.len() == 1 {
        &fns[0]
    } else {
        &fns[i]
    }
}

fn fn_for_mut(fns: &mut [StepFunction], i: usize) -> &mut StepFunction {
    if fns.len() == 1 {
        &mut fns[0]
    } else {
        &mut fns[i]
    }
}

impl ActivationOp {
    pub fn relu() -> ActivationOp {
        ActivationOp::ReLU
    }

    pub fn leaky_relu(slope: f64) -> ActivationOp {
        ActivationOp::LeakyReLU { slope }
    }

    /// Parametric ReLU with one trainable slope per neuron, all starting at
    /// [`PRELU_INIT_SLOPE`].
    pub fn prelu(width: usize) -> ActivationOp {
        assert!(width > 0, "prelu needs a positive width");
        ActivationOp::PReLU {
            slopes: vec![PRELU_INIT_SLOPE; width],
            slope_grads: vec![0.0; width],
        }
    }

    /// Diagonal operator with one step function shared across the layer.
    pub fn diag_tmaf(alpha: StepFunction) -> ActivationOp {
        ActivationOp::DiagTMAF { alpha: vec![alpha] }
    }

    /// Diagonal operator with one step function per neuron.
    pub fn diag_tmaf_per_neuron(alphas: Vec<StepFunction>) -> Result<ActivationOp, ActError> {
        if alphas.is_empty() {
            return Err(ActError::BadFunctionCount {
                expected: 1,
                got: 0,
            });
        }
        Ok(ActivationOp::DiagTMAF { alpha: alphas })
    }

    /// Tri-diagonal operator with layer-shared step functions.
    pub fn tri_diag_tmaf(
        alpha: StepFunction,
        beta: StepFunction,
        gamma: StepFunction,
    ) -> ActivationOp {
        ActivationOp::TriDiagTMAF {
            alpha: vec![alpha],
            beta: vec![beta],
            gamma: vec![gamma],
        }
    }

    /// Tri-diagonal operator with per-neuron step functions; the three lists
    /// must have equal, positive length.
    pub fn tri_diag_tmaf_per_neuron(
        alphas: Vec<StepFunction>,
        betas: Vec<StepFunction>,
        gammas: Vec<StepFunction>,
    ) -> Result<ActivationOp, ActError> {
        if alphas.is_empty() {
            return Err(ActError::BadFunctionCount {
                expected: 1,
                got: 0,
            });
        }
        if betas.len() != alphas.len() || gammas.len() != alphas.len() {
            return Err(ActError::BadFunctionCount {
                expected: alphas.len(),
                got: betas.len().min(gammas.len()),
            });
        }
        Ok(ActivationOp::TriDiagTMAF {
            alpha: alphas,
            beta: betas,
            gamma: gammas,
        })
    }

    /// The layer width this operator is pinned to, if any. Shared-function
    /// operators and the stateless baselines work at any width.
    pub fn width(&self) -> Option<usize> {
        match self {
            ActivationOp::ReLU | ActivationOp::LeakyReLU { .. } => None,
            ActivationOp::PReLU { slopes, .. } => Some(slopes.len()),
            ActivationOp::DiagTMAF { alpha } => {
                if alpha.len() == 1 {
                    None
                } else {
                    Some(alpha.len())
                }
            }
            ActivationOp::TriDiagTMAF { alpha, .. } => {
                if alpha.len() == 1 {
                    None
                } else {
                    Some(alpha.len())
                }
            }
        }
    }

    fn check_width(&self, dim: usize) -> Result<(), ActError> {
        match self.width() {
            Some(w) if w != dim => Err(ActError::WidthMismatch {
                expected: w,
                got: dim,
            }),
            _ => Ok(()),
        }
    }

    /// Applies the operator to a batch of pre-activations and captures the
    /// cache the backward pass needs.
    pub fn forward(&self, y: &Batch) -> Result<(Batch, ActivationCache), ActError> {
        self.check_width(y.dim())?;
        let (n, d) = (y.n(), y.dim());
        let mut out = Batch::zeros(n, d);
        match self {
            ActivationOp::ReLU => {
                for (o, &v) in out.data_mut().iter_mut().zip(y.data()) {
                    let c = if v > 0.0 { 1.0 } else { 0.0 };
                    *o = c * v;
                }
            }
            ActivationOp::LeakyReLU { slope } => {
                for (o, &v) in out.data_mut().iter_mut().zip(y.data()) {
                    let c = if v > 0.0 { 1.0 } else { *slope };
                    *o = c * v;
                }
            }
            ActivationOp::PReLU { slopes, .. } => {
                for s in 0..n {
                    for (i, &slope) in slopes.iter().enumerate() {
                        let v = y.get(s, i);
                        let c = if v > 0.0 { 1.0 } else { slope };
                        out.set(s, i, c * v);
                    }
                }
            }
            ActivationOp::DiagTMAF { alpha } => {
                for s in 0..n {
                    for i in 0..d {
                        let v = y.get(s, i);
                        out.set(s, i, fn_for(alpha, i).eval(v) * v);
                    }
                }
            }
            ActivationOp::TriDiagTMAF { alpha, beta, gamma } => {
                for s in 0..n {
                    let row = y.row(s);
                    for i in 0..d {
                        let v = row[i];
                        let mut acc = fn_for(alpha, i).eval(v) * v;
                        if i > 0 {
                            let u = row[i - 1];
                            acc += fn_for(gamma, i - 1).eval(u) * u;
                        }
                        if i + 1 < d {
                            let u = row[i + 1];
                            acc += fn_for(beta, i + 1).eval(u) * u;
                        }
                        out.set(s, i, acc);
                    }
                }
            }
        }
        Ok((out, ActivationCache { y: y.clone() }))
    }

    /// Gradient with respect to the pre-activations, holding each piecewise
    /// constant locally constant; at a breakpoint the left interval's value
    /// applies, consistent with the right-closed forward convention.
    /// Trainable state (PReLU slopes, step-function values) accumulates its
    /// gradients as a side effect.
    pub fn backward(
        &mut self,
        cache: &ActivationCache,
        upstream: &Batch,
    ) -> Result<Batch, ActError> {
        let y = &cache.y;
        if upstream.n() != y.n() || upstream.dim() != y.dim() {
            return Err(ActError::ShapeMismatch {
                expected: (y.n(), y.dim()),
                got: (upstream.n(), upstream.dim()),
            });
        }
        self.check_width(y.dim())?;
        let (n, d) = (y.n(), y.dim());
        let mut gy = Batch::zeros(n, d);
        match self {
            ActivationOp::ReLU => {
                for ((g, &v), &u) in gy.data_mut().iter_mut().zip(y.data()).zip(upstream.data()) {
                    let c = if v > 0.0 { 1.0 } else { 0.0 };
                    *g = u * c;
                }
            }
            ActivationOp::LeakyReLU { slope } => {
                for ((g, &v), &u) in gy.data_mut().iter_mut().zip(y.data()).zip(upstream.data()) {
                    let c = if v > 0.0 { 1.0 } else { *slope };
                    *g = u * c;
                }
            }
            ActivationOp::PReLU {
                slopes,
                slope_grads,
            } => {
                for s in 0..n {
                    for i in 0..d {
                        let v = y.get(s, i);
                        let u = upstream.get(s, i);
                        let c = if v > 0.0 { 1.0 } else { slopes[i] };
                        gy.set(s, i, u * c);
                        slope_grads[i] += u * v.min(0.0);
                    }
                }
            }
            ActivationOp::DiagTMAF { alpha } => {
                for s in 0..n {
                    for i in 0..d {
                        let v = y.get(s, i);
                        let u = upstream.get(s, i);
                        let f = fn_for_mut(alpha, i);
                        gy.set(s, i, u * f.eval(v));
                        f.accumulate_value_grad(v, u);
                    }
                }
            }
            ActivationOp::TriDiagTMAF { alpha, beta, gamma } => {
                // Column j of the operator holds alpha(y_j) on the diagonal,
                // beta(y_j) one row above, gamma(y_j) one row below; each
                // entry's value gradient uses the upstream of its row.
                for s in 0..n {
                    for j in 0..d {
                        let v = y.get(s, j);
                        let u_diag = upstream.get(s, j);
                        let fa = fn_for_mut(alpha, j);
                        let mut g = u_diag * fa.eval(v);
                        fa.accumulate_value_grad(v, u_diag);
                        if j >= 1 {
                            let u_above = upstream.get(s, j - 1);
                            let fb = fn_for_mut(beta, j);
                            g += u_above * fb.eval(v);
                            fb.accumulate_value_grad(v, u_above);
                        }
                        if j + 1 < d {
                            let u_below = upstream.get(s, j + 1);
                            let fg = fn_for_mut(gamma, j);
                            g += u_below * fg.eval(v);
                            fg.accumulate_value_grad(v, u_below);
                        }
                        gy.set(s, j, g);
                    }
                }
            }
        }
        Ok(gy)
    }

    /// Clears every gradient accumulator the operator owns.
    pub fn zero_grads(&mut self) {
        match self {
            ActivationOp::ReLU | ActivationOp::LeakyReLU { .. } => {}
            ActivationOp::PReLU { slope_grads, .. } => slope_grads.fill(0.0),
            ActivationOp::DiagTMAF { alpha } => {
                for f in alpha {
                    f.zero_grads();
                }
            }
            ActivationOp::TriDiagTMAF { alpha, beta, gamma } => {
                for f in alpha.iter_mut().chain(beta).chain(gamma) {
                    f.zero_grads();
                }
            }
        }
    }

    /// Every trainable scalar of the operator, exactly once, in a fixed
    /// order: PReLU slopes by neuron, or step-function values for alpha,
    /// then beta, then gamma.
    pub fn collect_params(&mut self) -> Vec<ParamSlot<'_>> {
        match self {
            ActivationOp::ReLU | ActivationOp::LeakyReLU { .. } => Vec::new(),
            ActivationOp::PReLU {
                slopes,
                slope_grads,
            } => slopes
                .iter_mut()
                .zip(slope_grads.iter_mut())
                .map(|(value, grad)| ParamSlot {
                    class: ParamClass::PReluSlope,
                    value,
                    grad,
                })
                .collect(),
            ActivationOp::DiagTMAF { alpha } => slots_for(alpha, ParamClass::AlphaValue),
            ActivationOp::TriDiagTMAF { alpha, beta, gamma } => {
                let mut out = slots_for(alpha, ParamClass::AlphaValue);
                out.extend(slots_for(beta, ParamClass::BetaValue));
                out.extend(slots_for(gamma, ParamClass::GammaValue));
                out
            }
        }
    }

    /// Trainable values in [`collect_params`] order, read-only.
    pub fn param_values(&self) -> Vec<f64> {
        match self {
            ActivationOp::ReLU | ActivationOp::LeakyReLU { .. } => Vec::new(),
            ActivationOp::PReLU { slopes, .. } => slopes.clone(),
            ActivationOp::DiagTMAF { alpha } => alpha
                .iter()
                .flat_map(|f| f.values().iter().copied())
                .collect(),
            ActivationOp::TriDiagTMAF { alpha, beta, gamma } => alpha
                .iter()
                .chain(beta)
                .chain(gamma)
                .flat_map(|f| f.values().iter().copied())
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ActivationOp::ReLU | ActivationOp::LeakyReLU { .. } => 0,
            ActivationOp::PReLU { slopes, .. } => slopes.len(),
            ActivationOp::DiagTMAF { alpha } => alpha.iter().map(StepFunction::num_values).sum(),
            ActivationOp::TriDiagTMAF { alpha, beta, gamma } => alpha
                .iter()
                .chain(beta)
                .chain(gamma)
                .map(StepFunction::num_values)
                .sum(),
        }
    }

    /// Points where the map `y -> forward(y)` is non-differentiable:
    /// the origin for the ReLU family, the breakpoints for the matrix kinds.
    pub fn kink_points(&self) -> Vec<f64> {
        match self {
            ActivationOp::ReLU | ActivationOp::LeakyReLU { .. } | ActivationOp::PReLU { .. } => {
                vec![0.0]
            }
            ActivationOp::DiagTMAF { alpha } => breakpoint_union(alpha),
            ActivationOp::TriDiagTMAF { alpha, beta, gamma } => {
                let mut out = breakpoint_union(alpha);
                out.extend(breakpoint_union(beta));
                out.extend(breakpoint_union(gamma));
                out
            }
        }
    }
}

fn slots_for<'a>(fns: &'a mut [StepFunction], class: ParamClass) -> Vec<ParamSlot<'a>> {
    fns.iter_mut()
        .flat_map(|f| {
            f.param_slots()
                .map(move |(value, grad)| ParamSlot { class, value, grad })
        })
        .collect()
}

fn breakpoint_union(fns: &[StepFunction]) -> Vec<f64> {
    fns.iter()
        .flat_map(|f| f.breakpoints().iter().copied())
        .collect()
}

/// Width-independent recipe for building a layer's activation. The matrix
/// kinds start as exact ReLU (alpha in the relu-like configuration, beta and
/// gamma all zero).
#[derive(Clone, Debug, PartialEq)]
pub enum ActivationSpec {
    ReLU,
    LeakyReLU {
        slope: f64,
    },
    PReLU,
    DiagTMAF {
        breakpoints: Vec<f64>,
        sharing: Sharing,
    },
    TriDiagTMAF {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        gamma: Vec<f64>,
        sharing: Sharing,
    },
}

impl ActivationSpec {
    /// Builds the operator for a layer of the given width.
    pub fn instantiate(&self, width: usize) -> Result<ActivationOp, StepFnError> {
        assert!(width > 0, "layer width must be positive");
        Ok(match self {
            ActivationSpec::ReLU => ActivationOp::relu(),
            ActivationSpec::LeakyReLU { slope } => ActivationOp::leaky_relu(*slope),
            ActivationSpec::PReLU => ActivationOp::prelu(width),
            ActivationSpec::DiagTMAF {
                breakpoints,
                sharing,
            } => {
                let count = match sharing {
                    Sharing::PerLayer => 1,
                    Sharing::PerNeuron => width,
                };
                let fns = (0..count)
                    .map(|_| StepFunction::relu_like(breakpoints.clone()))
                    .collect::<Result<Vec<_>, _>>()?;
                ActivationOp::DiagTMAF { alpha: fns }
            }
            ActivationSpec::TriDiagTMAF {
                alpha,
                beta,
                gamma,
                sharing,
            } => {
                let count = match sharing {
                    Sharing::PerLayer => 1,
                    Sharing::PerNeuron => width,
                };
                let build =
                    |bps: &Vec<f64>, relu: bool| -> Result<Vec<StepFunction>, StepFnError> {
                        (0..count)
                            .map(|_| {
                                if relu {
                                    StepFunction::relu_like(bps.clone())
                                } else {
                                    StepFunction::zeroed(bps.clone())
                                }
                            })
                            .collect()
                    };
                ActivationOp::TriDiagTMAF {
                    alpha: build(alpha, true)?,
                    beta: build(beta, false)?,
                    gamma: build(gamma, false)?,
                }
            }
        })
    }
}
