//! Seeded randomness, synthetic regression datasets, in-memory MNIST
//! containers, and epoch batching.
//!
//! Every randomized stage of an experiment (sampling, splits, weight
//! initialization, batch shuffling) draws from a [`SeededRng`], so a single
//! seed pins the entire run.

use crate::la::Batch;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dataset construction or splitting error.
#[derive(Clone, Debug, PartialEq)]
pub enum DataError {
    /// Inputs and targets disagree on the sample count.
    CountMismatch { inputs: usize, targets: usize },
    /// A requested sample or dimension count was zero.
    EmptySpec,
    /// Holdout fraction must leave both parts non-empty.
    BadFraction { fraction: f64, n: usize },
    /// Pixel buffer length must be samples x 784.
    PixelCountMismatch { expected: usize, got: usize },
    /// MNIST digits are 0 through 9.
    BadDigit { index: usize, digit: u8 },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::CountMismatch { inputs, targets } => {
                write!(f, "{inputs} input rows but {targets} targets")
            }
            DataError::EmptySpec => write!(f, "sample and dimension counts must be positive"),
            DataError::BadFraction { fraction, n } => write!(
                f,
                "holdout fraction {fraction} does not split {n} samples into two non-empty parts"
            ),
            DataError::PixelCountMismatch { expected, got } => {
                write!(f, "expected {expected} pixel bytes, got {got}")
            }
            DataError::BadDigit { index, digit } => {
                write!(f, "label {digit} at index {index} is not a digit 0-9")
            }
        }
    }
}

impl core::error::Error for DataError {}

/// Deterministic random source: a ChaCha8 stream keyed by a 64-bit seed.
/// The same seed always yields the same stream.
#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> SeededRng {
        SeededRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw from the half-open interval `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo < hi);
        self.inner.random_range(lo..hi)
    }

    /// Uniform in-place shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        xs.shuffle(&mut self.inner);
    }
}

/// Regression targets are value rows; classification targets are 1-based
/// class labels.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Values(Batch),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(b) => b.n(),
            Targets::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Aligned inputs and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Batch,
    targets: Targets,
}

impl Dataset {
    pub fn new(inputs: Batch, targets: Targets) -> Result<Dataset, DataError> {
        if inputs.n() != targets.len() {
            return Err(DataError::CountMismatch {
                inputs: inputs.n(),
                targets: targets.len(),
            });
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn n(&self) -> usize {
        self.inputs.n()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn inputs(&self) -> &Batch {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Width of the target rows, if this is a regression set.
    pub fn target_dim(&self) -> Option<usize> {
        match &self.targets {
            Targets::Values(b) => Some(b.dim()),
            Targets::Labels(_) => None,
        }
    }

    /// New dataset holding the given sample indices, in order.
    pub fn gather(&self, idx: &[usize]) -> Dataset {
        assert!(!idx.is_empty(), "cannot gather an empty dataset");
        let dim = self.inputs.dim();
        let mut data = Vec::with_capacity(idx.len() * dim);
        for &i in idx {
            data.extend_from_slice(self.inputs.row(i));
        }
        let inputs = Batch::from_vec(idx.len(), dim, data).expect("gathered rows stay valid");
        let targets = match &self.targets {
            Targets::Values(b) => {
                let td = b.dim();
                let mut t = Vec::with_capacity(idx.len() * td);
                for &i in idx {
                    t.extend_from_slice(b.row(i));
                }
                Targets::Values(
                    Batch::from_vec(idx.len(), td, t).expect("gathered rows stay valid"),
                )
            }
            Targets::Labels(l) => Targets::Labels(idx.iter().map(|&i| l[i]).collect()),
        };
        Dataset { inputs, targets }
    }

    /// Splits into disjoint (train, heldout) parts. The heldout size is the
    /// rounded fraction of `n`; both parts must end up non-empty. Indices
    /// are shuffled with `rng` first, so the split is seed-deterministic.
    pub fn split_holdout(
        &self,
        fraction: f64,
        rng: &mut SeededRng,
    ) -> Result<(Dataset, Dataset), DataError> {
        let n = self.n();
        let heldout = libm::round(n as f64 * fraction) as usize;
        if heldout == 0 || heldout >= n {
            return Err(DataError::BadFraction { fraction, n });
        }
        let mut idx: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut idx);
        let train = self.gather(&idx[..n - heldout]);
        let held = self.gather(&idx[n - heldout..]);
        Ok((train, held))
    }
}

/// Uniform samples on the hypercube `[-2, 2]^dims` with targets
/// `sin(pi * (x_1 + ... + x_dims))`.
pub fn sample_sine_dataset(
    dims: usize,
    count: usize,
    rng: &mut SeededRng,
) -> Result<Dataset, DataError> {
    if dims == 0 || count == 0 {
        return Err(DataError::EmptySpec);
    }
    let mut inputs = Vec::with_capacity(count * dims);
    let mut targets = Vec::with_capacity(count);
    for _ in 0..count {
        let mut sum = 0.0;
        for _ in 0..dims {
            let x = rng.uniform(-2.0, 2.0);
            inputs.push(x);
            sum += x;
        }
        targets.push(libm::sin(PI * sum));
    }
    Dataset::new(
        Batch::from_vec(count, dims, inputs).expect("sampled entries are finite"),
        Targets::Values(Batch::from_vec(count, 1, targets).expect("sine is finite")),
    )
}

/// One-dimensional uniform samples on `[-1, 1]` with targets
/// `sin(a pi x) + cos(b pi x) + sin(pi x)` for `freqs = (a, b)`.
pub fn sample_oscillatory_dataset(
    count: usize,
    rng: &mut SeededRng,
    freqs: (f64, f64),
) -> Result<Dataset, DataError> {
    if count == 0 {
        return Err(DataError::EmptySpec);
    }
    let (a, b) = freqs;
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for _ in 0..count {
        let x = rng.uniform(-1.0, 1.0);
        inputs.push(x);
        targets.push(libm::sin(a * PI * x) + libm::cos(b * PI * x) + libm::sin(PI * x));
    }
    Dataset::new(
        Batch::from_vec(count, 1, inputs).expect("sampled entries are finite"),
        Targets::Values(Batch::from_vec(count, 1, targets).expect("target is finite")),
    )
}

/// MNIST in memory: images scaled to `[0, 1]`, digits 0-9 stored as classes
/// 1-10.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistSet {
    images: Batch,
    labels: Vec<usize>,
}

impl MnistSet {
    pub const IMAGE_DIM: usize = 784;

    /// Builds the set from raw bytes: `pixels` holds `n * 784` grayscale
    /// bytes, `digits` holds `n` labels in 0-9.
    pub fn from_raw(pixels: &[u8], digits: &[u8]) -> Result<MnistSet, DataError> {
        if digits.is_empty() {
            return Err(DataError::EmptySpec);
        }
        let expected = digits.len() * Self::IMAGE_DIM;
        if pixels.len() != expected {
            return Err(DataError::PixelCountMismatch {
                expected,
                got: pixels.len(),
            });
        }
        if let Some(index) = digits.iter().position(|&d| d > 9) {
            return Err(DataError::BadDigit {
                index,
                digit: digits[index],
            });
        }
        let data: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
        let images =
            Batch::from_vec(digits.len(), Self::IMAGE_DIM, data).expect("scaled pixels are finite");
        let labels = digits.iter().map(|&d| d as usize + 1).collect();
        Ok(MnistSet { images, labels })
    }

    /// Inverse of [`MnistSet::from_raw`]: recovers the exact pixel and digit
    /// bytes.
    pub fn to_raw(&self) -> (Vec<u8>, Vec<u8>) {
        let pixels = self
            .images
            .data()
            .iter()
            .map(|&v| libm::round(v * 255.0) as u8)
            .collect();
        let digits = self.labels.iter().map(|&c| (c - 1) as u8).collect();
        (pixels, digits)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn images(&self) -> &Batch {
        &self.images
    }

    /// Classes 1-10.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_dataset(self) -> Dataset {
        Dataset {
            inputs: self.images,
            targets: Targets::Labels(self.labels),
        }
    }
}

/// Index partition for one epoch: consecutive chunks of a (optionally
/// shuffled) permutation. The last chunk may be short. Shuffling draws from
/// `rng`; without it the partition is the identity order and `rng` is
/// untouched.
pub fn batch_indices(
    n: usize,
    batch_size: usize,
    rng: &mut SeededRng,
    shuffle: bool,
) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    assert!(n >= 1, "cannot batch an empty dataset");
    let mut idx: Vec<usize> = (0..n).collect();
    if shuffle {
        rng.shuffle(&mut idx);
    }
    idx.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// Materialized mini-batches for one epoch, built on [`batch_indices`].
pub fn batches<'a>(
    ds: &'a Dataset,
    batch_size: usize,
    rng: &mut SeededRng,
    shuffle: bool,
) -> impl Iterator<Item = Dataset> + 'a {
    batch_indices(ds.n(), batch_size, rng, shuffle)
        .into_iter()
        .map(move |ix| ds.gather(&ix))
}
