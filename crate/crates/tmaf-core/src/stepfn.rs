//! Piecewise-constant step functions with fixed breakpoints and trainable
//! values.
//!
//! With breakpoints `s_1 < ... < s_m` and values `t_0 ..= t_m`, the function
//! maps `s` to `t_0` on `(-inf, s_1]`, to `t_j` on `(s_j, s_{j+1}]`, and to
//! `t_m` on `(s_m, inf)`. Intervals are right-closed, so `s = s_1` takes the
//! leftmost value. Breakpoints never move during training; only the values
//! carry gradients.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Index of the interval a scalar falls into, `0 ..= m` for `m` breakpoints.
pub type IntervalIndex = usize;

/// Construction error for step functions and breakpoint grids.
#[derive(Clone, Debug, PartialEq)]
pub enum StepFnError {
    /// `breakpoints[index] >= breakpoints[index + 1]`.
    NotIncreasing { index: usize },
    /// values length must be breakpoints length + 1.
    WrongValueCount { breakpoints: usize, values: usize },
    /// Breakpoints and values must be finite.
    NonFinite,
    /// A uniform grid needs `lo < hi` and at least one interval.
    BadGrid { lo: f64, hi: f64, intervals: usize },
}

impl fmt::Display for StepFnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepFnError::NotIncreasing { index } => {
                write!(
                    f,
                    "breakpoints must be strictly increasing at index {index}"
                )
            }
            StepFnError::WrongValueCount {
                breakpoints,
                values,
            } => write!(
                f,
                "{breakpoints} breakpoints need {} values, got {values}",
                breakpoints + 1
            ),
            StepFnError::NonFinite => write!(f, "breakpoints and values must be finite"),
            StepFnError::BadGrid { lo, hi, intervals } => write!(
                f,
                "uniform grid needs lo < hi and intervals >= 1, got [{lo}, {hi}] with {intervals}"
            ),
        }
    }
}

impl core::error::Error for StepFnError {}

/// Step function: fixed breakpoints, trainable values, gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    value_grads: Vec<f64>,
}

impl StepFunction {
    /// Validates strict monotonicity, the values/breakpoints length relation,
    /// and finiteness.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<StepFunction, StepFnError> {
        if values.len() != breakpoints.len() + 1 {
            return Err(StepFnError::WrongValueCount {
                breakpoints: breakpoints.len(),
                values: values.len(),
            });
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(StepFnError::NonFinite);
        }
        if let Some(index) = breakpoints.windows(2).position(|w| w[0] >= w[1]) {
            return Err(StepFnError::NotIncreasing { index });
        }
        let value_grads = vec![0.0; values.len()];
        Ok(StepFunction {
            breakpoints,
            values,
            value_grads,
        })
    }

    /// Values chosen so that `eval(s) * s == max(s, 0)`: zero on every
    /// interval whose right end is non-positive, one elsewhere.
    pub fn relu_like(breakpoints: Vec<f64>) -> Result<StepFunction, StepFnError> {
        let m = breakpoints.len();
        let values = (0..=m)
            .map(|j| {
                if j < m && breakpoints[j] <= 0.0 {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        StepFunction::new(breakpoints, values)
    }

    /// All values zero; the starting point for off-diagonal entries.
    pub fn zeroed(breakpoints: Vec<f64>) -> Result<StepFunction, StepFnError> {
        let values = vec![0.0; breakpoints.len() + 1];
        StepFunction::new(breakpoints, values)
    }

    /// Every interval takes the same value `c`.
    pub fn constant(breakpoints: Vec<f64>, c: f64) -> Result<StepFunction, StepFnError> {
        let values = vec![c; breakpoints.len() + 1];
        StepFunction::new(breakpoints, values)
    }

    /// Interval index for `s`: the number of breakpoints strictly below `s`.
    /// Right-closed by construction: `locate(s_j) = j - 1`, and anything
    /// above the last breakpoint maps to `m`. Binary search; agrees with a
    /// linear scan on every finite input. Total on purpose: NaN lands in
    /// interval 0 (no breakpoint compares below it), so a diverging run
    /// propagates NaN to the loss instead of crashing mid-forward, and the
    /// training loop's finite-loss guard can abort cleanly.
    pub fn locate(&self, s: f64) -> IntervalIndex {
        self.breakpoints.partition_point(|&b| b < s)
    }

    /// The value on the interval containing `s`.
    pub fn eval(&self, s: f64) -> f64 {
        self.values[self.locate(s)]
    }

    /// Adds `upstream * s` to the gradient of the value selected by `s`.
    /// This is the exact partial derivative of `eval(s) * s` with respect to
    /// that value, since the product is `t_j * s` throughout interval `j`.
    pub fn accumulate_value_grad(&mut self, s: f64, upstream: f64) {
        let j = self.locate(s);
        self.value_grads[j] += upstream * s;
    }

    pub fn zero_grads(&mut self) {
        self.value_grads.fill(0.0);
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value_grads(&self) -> &[f64] {
        &self.value_grads
    }

    /// Number of trainable values, `m + 1`.
    pub fn num_values(&self) -> usize {
        self.values.len()
    }

    /// Paired (value, gradient) slots in index order.
    pub fn param_slots(&mut self) -> impl Iterator<Item = (&mut f64, &mut f64)> {
        self.values.iter_mut().zip(self.value_grads.iter_mut())
    }

    /// Distance from `s` to the nearest breakpoint; infinite when there are
    /// no breakpoints. Finite-difference probes need this margin.
    pub fn breakpoint_margin(&self, s: f64) -> f64 {
        self.breakpoints
            .iter()
            .map(|b| libm::fabs(s - b))
            .fold(f64::INFINITY, f64::min)
    }
}

/// The nine breakpoints splitting the standard Gaussian into ten intervals
/// of probability 0.1 each (two decimals' precision).
pub fn gaussian_decile_breakpoints() -> Vec<f64> {
    vec![-1.4, -0.92, -0.56, -0.26, 0.0, 0.26, 0.56, 0.92, 1.4]
}

/// `intervals + 1` evenly spaced breakpoints from `lo` to `hi` inclusive,
/// carving the line into `intervals + 2` pieces counting both unbounded
/// ends. Endpoints are exact.
pub fn uniform_grid_breakpoints(
    lo: f64,
    hi: f64,
    intervals: usize,
) -> Result<Vec<f64>, StepFnError> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi || intervals == 0 {
        return Err(StepFnError::BadGrid { lo, hi, intervals });
    }
    let k = intervals as f64;
    Ok((0..=intervals)
        .map(|i| {
            let t = i as f64 / k;
            lo * (1.0 - t) + hi * t
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SeededRng;
    use proptest::prelude::*;

    fn linear_scan_locate(breakpoints: &[f64], s: f64) -> usize {
        let mut j = 0;
        for &b in breakpoints {
            if b < s {
                j += 1;
            } else {
                break;
            }
        }
        j
    }

    #[test]
    fn locate_single_breakpoint_boundaries() {
        let f = StepFunction::new(vec![0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(f.locate(-1.0), 0);
        assert_eq!(f.locate(0.0), 0);
        assert_eq!(f.locate(0.5), 1);
        assert_eq!(f.locate(f64::MIN_POSITIVE), 1);
    }

    #[test]
    fn locate_decile_example() {
        let f = StepFunction::relu_like(gaussian_decile_breakpoints()).unwrap();
        assert_eq!(f.locate(0.3), 6);
        assert_eq!(f.locate(0.3), linear_scan_locate(f.breakpoints(), 0.3));
    }

    #[test]
    fn locate_is_total_on_non_finite_input() {
        let f = StepFunction::new(vec![0.0], vec![0.5, 1.0]).unwrap();
        assert_eq!(f.locate(f64::NAN), 0);
        assert_eq!(f.locate(f64::NEG_INFINITY), 0);
        assert_eq!(f.locate(f64::INFINITY), 1);
        // eval(NaN) * NaN stays NaN, so divergence is visible at the loss.
        assert!((f.eval(f64::NAN) * f64::NAN).is_nan());
    }

    #[test]
    fn eval_relu_and_leaky_configs() {
        let relu = StepFunction::new(vec![0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(relu.eval(-3.0), 0.0);
        assert_eq!(relu.eval(2.0), 1.0);
        let leaky = StepFunction::new(vec![0.0], vec![0.01, 1.0]).unwrap();
        assert_eq!(leaky.eval(-3.0), 0.01);
        let constant = StepFunction::constant(vec![-1.0, 1.0], 2.5).unwrap();
        for s in [-5.0, -1.0, 0.0, 1.0, 7.0] {
            assert_eq!(constant.eval(s), 2.5);
        }
    }

    #[test]
    fn relu_config_eval_times_s_is_max() {
        let relu = StepFunction::new(vec![0.0], vec![0.0, 1.0]).unwrap();
        let mut rng = SeededRng::new(3);
        for _ in 0..1000 {
            let s = rng.uniform(-10.0, 10.0);
            assert_eq!(relu.eval(s) * s, s.max(0.0));
        }
        assert_eq!(relu.eval(0.0) * 0.0, 0.0);
    }

    #[test]
    fn relu_like_initialization_patterns() {
        let decile = StepFunction::relu_like(gaussian_decile_breakpoints()).unwrap();
        assert_eq!(
            decile.values(),
            &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]
        );
        let single = StepFunction::relu_like(vec![0.0]).unwrap();
        assert_eq!(single.values(), &[0.0, 1.0]);
        let grid =
            StepFunction::relu_like(uniform_grid_breakpoints(-1.0, 1.0, 100).unwrap()).unwrap();
        let mut rng = SeededRng::new(5);
        for _ in 0..1000 {
            let s = rng.uniform(-4.0, 4.0);
            assert_eq!(grid.eval(s) * s, s.max(0.0), "relu-like grid at {s}");
        }
    }

    #[test]
    fn accumulate_value_grad_examples() {
        let mut f = StepFunction::new(vec![0.0], vec![0.0, 1.0]).unwrap();
        f.accumulate_value_grad(2.0, 1.0);
        assert_eq!(f.value_grads(), &[0.0, 2.0]);
        f.zero_grads();
        f.accumulate_value_grad(0.0, 5.0);
        assert_eq!(f.value_grads(), &[0.0, 0.0]);
    }

    #[test]
    fn accumulate_value_grad_matches_batch_loop_oracle() {
        let mut f = StepFunction::relu_like(gaussian_decile_breakpoints()).unwrap();
        let mut rng = SeededRng::new(9);
        // All samples inside interval 6 = (0.26, 0.56].
        let samples: Vec<(f64, f64)> = (0..40)
            .map(|_| (rng.uniform(0.27, 0.55), rng.uniform(-2.0, 2.0)))
            .collect();
        let mut want = 0.0;
        for &(s, up) in &samples {
            f.accumulate_value_grad(s, up);
            want += up * s;
        }
        for (j, &g) in f.value_grads().iter().enumerate() {
            if j == 6 {
                assert!((g - want).abs() <= 1e-12 * want.abs().max(1.0));
            } else {
                assert_eq!(g, 0.0);
            }
        }
    }

    #[test]
    fn value_grads_match_finite_differences() {
        // Perturbing a value never moves interval membership, so central
        // differences on the values are exact up to rounding.
        let bps = gaussian_decile_breakpoints();
        let mut rng = SeededRng::new(21);
        let values: Vec<f64> = (0..10).map(|_| rng.uniform(-1.5, 1.5)).collect();
        let mut f = StepFunction::new(bps.clone(), values.clone()).unwrap();
        let samples: Vec<(f64, f64)> = (0..200)
            .map(|_| (rng.uniform(-3.0, 3.0), rng.uniform(-2.0, 2.0)))
            .collect();
        for &(s, up) in &samples {
            f.accumulate_value_grad(s, up);
        }
        let loss = |vals: &[f64]| -> f64 {
            let g = StepFunction::new(bps.clone(), vals.to_vec()).unwrap();
            samples.iter().map(|&(s, up)| up * g.eval(s) * s).sum()
        };
        let h = 1e-6;
        for j in 0..10 {
            let mut plus = values.clone();
            plus[j] += h;
            let mut minus = values.clone();
            minus[j] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let got = f.value_grads()[j];
            assert!(
                (fd - got).abs() <= 1e-6 * got.abs().max(1.0),
                "value {j}: fd {fd} vs accumulated {got}"
            );
        }
    }

    #[test]
    fn decile_breakpoints_exact_and_antisymmetric() {
        let bps = gaussian_decile_breakpoints();
        assert_eq!(
            bps,
            vec![-1.4, -0.92, -0.56, -0.26, 0.0, 0.26, 0.56, 0.92, 1.4]
        );
        for i in 0..bps.len() {
            assert_eq!(bps[i], -bps[bps.len() - 1 - i]);
        }
        assert!(bps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn uniform_grid_reproduces_expected_grids() {
        let alpha = uniform_grid_breakpoints(-1.0, 1.0, 100).unwrap();
        assert_eq!(alpha.len(), 101);
        assert_eq!(alpha[0], -1.0);
        assert_eq!(alpha[100], 1.0);
        assert!((alpha[1] - -0.98).abs() < 1e-15);
        assert!((alpha[50] - 0.0).abs() < 1e-15);
        let f = StepFunction::relu_like(alpha).unwrap();
        assert_eq!(f.num_values(), 102);

        assert_eq!(
            uniform_grid_breakpoints(0.0, 1.0, 1).unwrap(),
            vec![0.0, 1.0]
        );

        let beta = uniform_grid_breakpoints(-2.01, -0.01, 100).unwrap();
        assert_eq!(beta.len(), 101);
        assert_eq!(beta[0], -2.01);
        assert_eq!(beta[100], -0.01);
        for w in beta.windows(2) {
            assert!((w[1] - w[0] - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_grid_rejects_bad_bounds() {
        assert!(matches!(
            uniform_grid_breakpoints(1.0, 1.0, 10),
            Err(StepFnError::BadGrid { .. })
        ));
        assert!(matches!(
            uniform_grid_breakpoints(2.0, -1.0, 10),
            Err(StepFnError::BadGrid { .. })
        ));
        assert!(matches!(
            uniform_grid_breakpoints(0.0, 1.0, 0),
            Err(StepFnError::BadGrid { .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            StepFunction::new(vec![0.0, 0.0], vec![1.0, 2.0, 3.0]).unwrap_err(),
            StepFnError::NotIncreasing { index: 0 }
        );
        assert_eq!(
            StepFunction::new(vec![0.0], vec![1.0]).unwrap_err(),
            StepFnError::WrongValueCount {
                breakpoints: 1,
                values: 1
            }
        );
        assert_eq!(
            StepFunction::new(vec![f64::NAN], vec![1.0, 2.0]).unwrap_err(),
            StepFnError::NonFinite
        );
    }

    #[test]
    fn binary_search_agrees_with_linear_scan_bulk() {
        let mut rng = SeededRng::new(33);
        for _ in 0..200 {
            let m = 1 + (rng.uniform(0.0, 12.0) as usize);
            let mut bps: Vec<f64> = (0..m).map(|_| rng.uniform(-5.0, 5.0)).collect();
            bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            bps.dedup();
            let f = StepFunction::zeroed(bps).unwrap();
            for _ in 0..50 {
                let s = rng.uniform(-6.0, 6.0);
                assert_eq!(f.locate(s), linear_scan_locate(f.breakpoints(), s));
            }
            // Exactly on each breakpoint too.
            for j in 0..f.breakpoints().len() {
                let s = f.breakpoints()[j];
                assert_eq!(f.locate(s), j);
                assert_eq!(f.locate(s), linear_scan_locate(f.breakpoints(), s));
            }
        }
    }

    proptest! {
        #[test]
        fn eval_piecewise_constant(seed in 0u64..500) {
            let mut rng = SeededRng::new(seed);
            let f = StepFunction::new(
                gaussian_decile_breakpoints(),
                (0..10).map(|_| rng.uniform(-2.0, 2.0)).collect(),
            ).unwrap();
            let a = rng.uniform(-3.0, 3.0);
            let b = rng.uniform(-3.0, 3.0);
            if f.locate(a) == f.locate(b) {
                prop_assert_eq!(f.eval(a), f.eval(b));
            }
        }
    }
}
