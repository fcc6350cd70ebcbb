//! Dense feed-forward networks whose activations are trainable matrix
//! operators built from piecewise-constant step functions.
//!
//! A diagonal operator scales each pre-activation `y_i` by `alpha(y_i)`,
//! where `alpha` is a step function with fixed breakpoints and trained
//! values; a tri-diagonal operator additionally mixes neighboring neurons.
//! ReLU and Leaky ReLU are exact special cases of the diagonal operator, so
//! these networks can start at a known baseline and only add capacity.
//!
//! Module map:
//! - [`la`]: row-major matrices and sample batches.
//! - [`stepfn`]: step functions, interval lookup, value gradients.
//! - [`activations`]: pointwise baselines plus the matrix operator kinds.
//! - [`network`]: affine layers, batch normalization, forward/backward.
//! - [`codec`]: bit-exact model serialization.
//! - [`optim`]: squared-error and cross-entropy losses, ADAM, the two-stage
//!   learning-rate schedule.
//! - [`data`]: seeded randomness, synthetic regression sets, MNIST
//!   containers, mini-batching.
//!
//! The crate is `no_std` (alloc required). File formats, configs, and the
//! experiment harness live in the companion CLI crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod activations;
pub mod codec;
pub mod data;
pub mod la;
pub mod network;
pub mod optim;
pub mod params;
pub mod stepfn;

pub use activations::{ActivationOp, ActivationSpec, Sharing};
pub use data::{Dataset, MnistSet, SeededRng, Targets};
pub use la::{Batch, Matrix};
pub use network::{AffineLayer, BatchNormLayer, Block, GradientTape, Mode, Network};
pub use optim::{cross_entropy_loss, mse_loss, Adam, LrSchedule};
pub use params::{ParamClass, ParamSlot};
pub use stepfn::StepFunction;
