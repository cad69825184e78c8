//! Algebraic derivative estimation over a sliding sample window.
//!
//! The estimator approximates the first derivative at the newest of
//! `eta + 1` equally spaced samples by a weighted sum. The weights come
//! from a trapezoidal discretization of an annihilator integral over the
//! window `T = eta * h`: the oldest sample carries weight `T`, interior
//! samples carry `2(T - 2jh)`, and the newest carries `T - 2*eta*h = -T`.
//! The weights are antisymmetric and sum to zero, so constants are
//! annihilated exactly; a scalar gain `K` calibrates the sum to be exact
//! on linear ramps. Averaging over the window is what gives the estimate
//! its low-pass behavior on noisy samples.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// How the estimator gain `K` is resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainMode {
    /// Exact-on-ramp closed form `K = eta^2 / (eta^2 + 2)`.
    Calibrated,
    /// `K = 1`.
    Unit,
    /// Caller-supplied positive gain.
    Manual(f64),
}

impl std::str::FromStr for GainMode {
    type Err = String;

    /// Accepts `calibrated` (alias `auto`), `unit`, or a positive number.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "calibrated" | "auto" => Ok(GainMode::Calibrated),
            "unit" => Ok(GainMode::Unit),
            _ => s
                .parse::<f64>()
                .map(GainMode::Manual)
                .map_err(|_| format!("bad gain '{s}' (expected calibrated, unit, or a number)")),
        }
    }
}

impl GainMode {
    fn resolve(&self, eta: usize) -> Result<f64> {
        match *self {
            GainMode::Calibrated => Ok(calibrated_gain(eta)),
            GainMode::Unit => Ok(1.0),
            GainMode::Manual(k) => {
                if !k.is_finite() || k <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "manual gain must be positive and finite, got {k}"
                    )));
                }
                Ok(k)
            }
        }
    }
}

/// The unique gain making the window estimator exact on linear ramps
/// sampled on a regular grid: `K(eta) = eta^2 / (eta^2 + 2)`.
///
/// Strictly increasing in `eta` with limit 1. The closed form is frozen
/// against a brute-force ramp oracle in the tests below.
pub fn calibrated_gain(eta: usize) -> f64 {
    assert!(eta >= 1, "calibrated_gain requires eta >= 1");
    let e2 = (eta * eta) as f64;
    e2 / (e2 + 2.0)
}

/// Sign distribution of the window weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignSplit {
    pub positive: usize,
    pub zero: usize,
    pub negative: usize,
}

/// Precomputed window weights, gain, and scale factor of the algebraic
/// derivative estimator.
///
/// Immutable after construction; the weights depend only on `(eta, h)`
/// and are evaluated once, not per step.
#[derive(Debug, Clone)]
pub struct EstimatorCoefficients {
    eta: usize,
    h: f64,
    gain: f64,
    raw_weights: Vec<f64>,
    scale: f64,
}

impl EstimatorCoefficients {
    /// Builds the weights for a window of `eta` steps of width `h`,
    /// resolving the gain per `mode`.
    ///
    /// Weights are ordered oldest sample first: `w_0 = T`,
    /// `w_j = 2(T - 2jh)` for `1 <= j <= eta-1`, `w_eta = T - 2*eta*h`,
    /// with `T = eta * h`. The multiplying scale is `-3*K*h/T^3`.
    pub fn new(eta: usize, h: f64, mode: GainMode) -> Result<Self> {
        if eta == 0 {
            return Err(Error::InvalidParameter("eta must be >= 1".into()));
        }
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sample spacing h must be positive and finite, got {h}"
            )));
        }
        let gain = mode.resolve(eta)?;
        let t = eta as f64 * h;
        // Each weight is an exact small integer times h: w_0 = eta*h = T,
        // w_j = 2(eta - 2j)*h = 2(T - 2jh), w_eta = -eta*h = T - 2*eta*h.
        // Multiplying the exact integer pattern by h keeps antisymmetry
        // (w_j = -w_{eta-j}) exact in floating point, not just to rounding.
        let mut raw_weights = Vec::with_capacity(eta + 1);
        raw_weights.push(eta as f64 * h);
        for j in 1..eta {
            raw_weights.push(2.0 * (eta as f64 - 2.0 * j as f64) * h);
        }
        raw_weights.push(-(eta as f64) * h);
        let scale = -3.0 * gain * h / (t * t * t);
        Ok(Self { eta, h, gain, raw_weights, scale })
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Window weights, oldest sample first (`eta + 1` entries).
    pub fn raw_weights(&self) -> &[f64] {
        &self.raw_weights
    }

    /// The factor multiplying the weighted sample sum.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Estimates the first derivative at the newest sample of a full
    /// window: `scale * sum_j w_j * samples[j]`.
    pub fn estimate_slope(&self, window: &HistoryWindow) -> Result<f64> {
        if window.len() != self.eta + 1 {
            return Err(Error::WindowUnderflow { needed: self.eta + 1, have: window.len() });
        }
        let dot: f64 = self
            .raw_weights
            .iter()
            .zip(window.iter())
            .map(|(w, y)| w * y)
            .sum();
        Ok(self.scale * dot)
    }

    /// Counts weight signs. `w_j > 0` iff `j < eta/2`, with a single zero
    /// at `j = eta/2` when `eta` is even.
    pub fn sign_split(&self) -> SignSplit {
        let mut split = SignSplit { positive: 0, zero: 0, negative: 0 };
        for &w in &self.raw_weights {
            if w > 0.0 {
                split.positive += 1;
            } else if w < 0.0 {
                split.negative += 1;
            } else {
                split.zero += 1;
            }
        }
        split
    }
}

/// Ordered buffer of the most recent samples, oldest first.
///
/// Holds solution values for the moving-window use (one window per
/// integration run, single owner) or right-hand-side evaluations for the
/// static per-step use. Pushing beyond capacity drops the oldest sample.
#[derive(Debug, Clone)]
pub struct HistoryWindow {
    capacity: usize,
    samples: VecDeque<f64>,
}

impl HistoryWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be >= 1");
        Self { capacity, samples: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity
    }

    /// Appends a sample, evicting the oldest once at capacity.
    pub fn push(&mut self, sample: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    /// Samples oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.samples.iter()
    }

    /// The `n` most recent samples, oldest of those first.
    pub fn tail(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().skip(self.samples.len().saturating_sub(n)).copied()
    }

    pub fn latest(&self) -> Option<f64> {
        self.samples.back().copied()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window_from(samples: &[f64], capacity: usize) -> HistoryWindow {
        let mut w = HistoryWindow::new(capacity);
        for &s in samples {
            w.push(s);
        }
        w
    }

    /// Independent ramp oracle: the gain that maps the unit-gain estimate
    /// of a slope-1 ramp back to 1.
    fn ramp_gain_oracle(eta: usize) -> f64 {
        let h = 1.0;
        let coeffs = EstimatorCoefficients::new(eta, h, GainMode::Unit).unwrap();
        let mut win = HistoryWindow::new(eta + 1);
        for j in 0..=eta {
            win.push(j as f64 * h);
        }
        1.0 / coeffs.estimate_slope(&win).unwrap()
    }

    #[test]
    fn weights_eta3_match_integer_pattern() {
        let c = EstimatorCoefficients::new(3, 1.0, GainMode::Unit).unwrap();
        assert_eq!(c.raw_weights(), &[3.0, 2.0, -2.0, -3.0]);
        assert!((c.scale() - (-1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn weights_eta5_match_integer_pattern() {
        let c = EstimatorCoefficients::new(5, 1.0, GainMode::Unit).unwrap();
        assert_eq!(c.raw_weights(), &[5.0, 6.0, 2.0, -2.0, -6.0, -5.0]);
    }

    #[test]
    fn weights_eta1_are_endpoints_only() {
        let c = EstimatorCoefficients::new(1, 0.1, GainMode::Unit).unwrap();
        assert_eq!(c.raw_weights(), &[0.1, -0.1]);
        // -3 * 0.1 / 0.1^3 = -300
        assert!((c.scale() + 300.0).abs() < 300.0 * 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(
            EstimatorCoefficients::new(0, 0.1, GainMode::Unit),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            EstimatorCoefficients::new(3, 0.0, GainMode::Unit),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            EstimatorCoefficients::new(3, -1.0, GainMode::Unit),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            EstimatorCoefficients::new(3, 0.1, GainMode::Manual(0.0)),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            EstimatorCoefficients::new(3, 0.1, GainMode::Manual(-2.0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn calibrated_gain_matches_ramp_oracle() {
        for eta in 1..=32 {
            let oracle = ramp_gain_oracle(eta);
            let closed = calibrated_gain(eta);
            assert!(
                (oracle - closed).abs() <= 1e-12,
                "eta={eta}: oracle {oracle} vs closed form {closed}"
            );
        }
        assert!((calibrated_gain(1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((calibrated_gain(3) - 9.0 / 11.0).abs() < 1e-15);
        assert!((calibrated_gain(5) - 25.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn calibrated_gain_is_strictly_increasing_below_one() {
        let mut prev = 0.0;
        for eta in 1..=1000 {
            let k = calibrated_gain(eta);
            assert!(k > prev, "gain not increasing at eta={eta}");
            assert!(k < 1.0, "gain reached 1 at eta={eta}");
            prev = k;
        }
    }

    #[test]
    fn antisymmetry_and_zero_sum() {
        for eta in 1..=64 {
            for &h in &[1e-3, 1e-1, 1.0] {
                let c = EstimatorCoefficients::new(eta, h, GainMode::Calibrated).unwrap();
                let w = c.raw_weights();
                let max_w = w.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                for j in 0..=eta {
                    assert!(
                        (w[j] + w[eta - j]).abs() <= 1e-12 * max_w,
                        "antisymmetry broken at eta={eta}, h={h}, j={j}"
                    );
                }
                let sum: f64 = w.iter().sum();
                assert!(sum.abs() <= 1e-12 * max_w, "weight sum nonzero at eta={eta}, h={h}");
            }
        }
    }

    #[test]
    fn sign_split_follows_half_window_rule() {
        let c3 = EstimatorCoefficients::new(3, 0.1, GainMode::Unit).unwrap();
        assert_eq!(c3.sign_split(), SignSplit { positive: 2, zero: 0, negative: 2 });
        let c4 = EstimatorCoefficients::new(4, 0.1, GainMode::Unit).unwrap();
        assert_eq!(c4.sign_split(), SignSplit { positive: 2, zero: 1, negative: 2 });
        let c1 = EstimatorCoefficients::new(1, 0.1, GainMode::Unit).unwrap();
        assert_eq!(c1.sign_split(), SignSplit { positive: 1, zero: 0, negative: 1 });
        // w_j > 0 iff j < eta/2, single zero at j = eta/2 for even eta
        for eta in 1..=64usize {
            let c = EstimatorCoefficients::new(eta, 0.37, GainMode::Unit).unwrap();
            let split = c.sign_split();
            let expect_pos = (0..=eta).filter(|&j| 2 * j < eta).count();
            let expect_zero = usize::from(eta % 2 == 0);
            assert_eq!(split.positive, expect_pos, "eta={eta}");
            assert_eq!(split.zero, expect_zero, "eta={eta}");
            assert_eq!(split.negative, eta + 1 - expect_pos - expect_zero, "eta={eta}");
        }
    }

    #[test]
    fn slope_of_calibrated_ramp_is_exact() {
        let c = EstimatorCoefficients::new(3, 0.1, GainMode::Manual(9.0 / 11.0)).unwrap();
        let w = window_from(&[0.0, 0.1, 0.2, 0.3], 4);
        let slope = c.estimate_slope(&w).unwrap();
        assert!((slope - 1.0).abs() <= 1e-12, "got {slope}");
    }

    #[test]
    fn slope_of_unit_gain_ramp_overshoots_by_known_ratio() {
        let c = EstimatorCoefficients::new(3, 0.1, GainMode::Unit).unwrap();
        let w = window_from(&[0.0, 0.1, 0.2, 0.3], 4);
        let slope = c.estimate_slope(&w).unwrap();
        assert!((slope - 11.0 / 9.0).abs() <= 1e-12, "got {slope}");
    }

    #[test]
    fn slope_of_constant_window_is_zero() {
        let c = EstimatorCoefficients::new(3, 0.1, GainMode::Calibrated).unwrap();
        for &v in &[0.0, 1.0, -7.5, 1e6] {
            let w = window_from(&[v; 4], 4);
            let slope = c.estimate_slope(&w).unwrap();
            assert!(slope.abs() <= 1e-12 * v.abs().max(1.0) / 0.1, "c={v}, got {slope}");
        }
    }

    #[test]
    fn ramp_exactness_across_eta_slope_offset() {
        for eta in 1..=32usize {
            let h = 0.05;
            let c = EstimatorCoefficients::new(eta, h, GainMode::Calibrated).unwrap();
            for &m in &[-5.0, 1.0, 1e3] {
                for &a0 in &[0.0, 7.0] {
                    let mut w = HistoryWindow::new(eta + 1);
                    for j in 0..=eta {
                        w.push(a0 + m * j as f64 * h);
                    }
                    let slope = c.estimate_slope(&w).unwrap();
                    assert!(
                        ((slope - m) / m).abs() <= 1e-10,
                        "eta={eta}, m={m}, a0={a0}: got {slope}"
                    );
                }
            }
        }
    }

    #[test]
    fn underflow_is_reported() {
        let c = EstimatorCoefficients::new(3, 0.1, GainMode::Unit).unwrap();
        let w = window_from(&[1.0, 2.0], 4);
        match c.estimate_slope(&w) {
            Err(Error::WindowUnderflow { needed: 4, have: 2 }) => {}
            other => panic!("expected underflow, got {other:?}"),
        }
    }

    #[test]
    fn window_evicts_oldest_at_capacity() {
        let mut w = HistoryWindow::new(3);
        for s in [1.0, 2.0, 3.0, 4.0] {
            w.push(s);
        }
        assert!(w.is_full());
        let v: Vec<f64> = w.iter().copied().collect();
        assert_eq!(v, vec![2.0, 3.0, 4.0]);
        assert_eq!(w.latest(), Some(4.0));
        assert_eq!(w.tail(2).collect::<Vec<_>>(), vec![3.0, 4.0]);
    }

    proptest! {
        /// Affine maps of the window scale the estimate and drop the shift.
        #[test]
        fn slope_is_linear_in_the_window(
            eta in 1usize..16,
            base in proptest::collection::vec(-1e3f64..1e3, 17),
            c in -50.0f64..50.0,
            d in -50.0f64..50.0,
        ) {
            let h = 0.1;
            let coeffs = EstimatorCoefficients::new(eta, h, GainMode::Calibrated).unwrap();
            let mut w0 = HistoryWindow::new(eta + 1);
            let mut w1 = HistoryWindow::new(eta + 1);
            for &b in base.iter().take(eta + 1) {
                w0.push(b);
                w1.push(c * b + d);
            }
            let s0 = coeffs.estimate_slope(&w0).unwrap();
            let s1 = coeffs.estimate_slope(&w1).unwrap();
            let wmax = (0..=eta).map(|j| (c * base[j] + d).abs()).fold(0.0f64, f64::max);
            // relative in the estimate, with an absolute floor set by the
            // window's own magnitude over h (rounding scale of the dot product)
            let tol = (1e-12 * (c * s0).abs()).max(1e-13 * wmax.max(1.0) / h);
            prop_assert!((s1 - c * s0).abs() <= tol, "s0={s0}, s1={s1}, c={c}");
        }

        /// Constant windows are annihilated regardless of eta, h, and level.
        #[test]
        fn constants_are_annihilated(
            eta in 1usize..32,
            h in 1e-3f64..1.0,
            level in -1e6f64..1e6,
        ) {
            let coeffs = EstimatorCoefficients::new(eta, h, GainMode::Calibrated).unwrap();
            let mut w = HistoryWindow::new(eta + 1);
            for _ in 0..=eta {
                w.push(level);
            }
            let slope = coeffs.estimate_slope(&w).unwrap();
            prop_assert!(slope.abs() <= 1e-12 * level.abs().max(1.0) / h);
        }
    }
}
