//! Error norms, observed convergence order, stability thresholds, and
//! noise-filtering variance studies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorCoefficients, GainMode, HistoryWindow};
use crate::problems::{dahlquist, OdeProblem};
use crate::schemes::{integrate, integrate_steps, SchemeSpec, Trajectory};

/// A run counts as stable when `|y_N| <= |y_0| * (1 + BOUNDEDNESS_SLACK)`.
pub const BOUNDEDNESS_SLACK: f64 = 1e-6;

/// Bisection stops once the bracket is narrower than this.
pub const BRACKET_TOLERANCE: f64 = 1e-4;

/// Grid-norm summary of a trajectory against a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// `max_k |e_k|` over all samples and components.
    pub linf: f64,
    /// Discrete grid-weighted norm `sqrt(h * sum_k e_k^2)`.
    pub l2: f64,
    /// Error at the final sample.
    pub final_error: f64,
}

/// Pointwise error norms of `traj` against `reference(t)`.
pub fn error_norm(traj: &Trajectory, reference: &dyn Fn(f64) -> Vec<f64>) -> ErrorReport {
    let h = traj.meta.h;
    let mut linf = 0.0f64;
    let mut sumsq = 0.0f64;
    let mut final_error = 0.0f64;
    for (t, y) in traj.times.iter().zip(&traj.values) {
        let want = reference(*t);
        let mut emax = 0.0f64;
        for (yi, wi) in y.iter().zip(&want) {
            let e = (yi - wi).abs();
            emax = emax.max(e);
            sumsq += e * e;
        }
        linf = linf.max(emax);
        final_error = emax;
    }
    ErrorReport { linf, l2: (h * sumsq).sqrt(), final_error }
}

/// [`error_norm`] against the problem's own analytic reference.
pub fn error_vs_reference(problem: &OdeProblem, traj: &Trajectory) -> Option<ErrorReport> {
    let reference = problem.reference()?.clone();
    Some(error_norm(traj, &*reference))
}

/// Final errors over a halving step sequence with pairwise orders
/// `log2(e(h)/e(h/2))`.
#[derive(Debug, Clone)]
pub struct OrderEstimate {
    pub h_values: Vec<f64>,
    pub errors: Vec<f64>,
    pub pairwise_orders: Vec<f64>,
    /// Median of the finite pairwise orders; `None` when the errors are
    /// degenerate (a zero error makes the order undefined).
    pub summary_order: Option<f64>,
}

/// Integrates `problem` with `spec` at each step in `h_values` (a
/// halving sequence, at least three entries, largest first) and reduces
/// the final errors to pairwise orders.
pub fn observed_order(
    problem: &OdeProblem,
    spec: &SchemeSpec,
    h_values: &[f64],
) -> Result<OrderEstimate> {
    if h_values.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "order study needs at least 3 step sizes, got {}",
            h_values.len()
        )));
    }
    for pair in h_values.windows(2) {
        if !pair[0].is_finite()
            || !pair[1].is_finite()
            || (pair[1] - pair[0] / 2.0).abs() > 1e-9 * pair[0]
        {
            return Err(Error::InvalidParameter(format!(
                "h values must halve: {} does not follow {}",
                pair[1], pair[0]
            )));
        }
    }
    if problem.reference().is_none() {
        return Err(Error::InvalidParameter(format!(
            "problem '{}' has no reference solution for an order study",
            problem.name()
        )));
    }
    let mut errors = Vec::with_capacity(h_values.len());
    for &h in h_values {
        let traj = integrate(problem, spec, h).map_err(|e| match e {
            Error::Divergence { step, .. } => Error::OrderDiverged { h, step },
            other => other,
        })?;
        let report = error_vs_reference(problem, &traj).expect("reference checked above");
        errors.push(report.final_error);
    }
    let pairwise_orders: Vec<f64> = errors
        .windows(2)
        .map(|e| if e[0] > 0.0 && e[1] > 0.0 { (e[0] / e[1]).log2() } else { f64::NAN })
        .collect();
    let mut finite: Vec<f64> = pairwise_orders.iter().copied().filter(|o| o.is_finite()).collect();
    let summary_order = if finite.len() == pairwise_orders.len() && !finite.is_empty() {
        finite.sort_by(f64::total_cmp);
        let n = finite.len();
        Some(if n % 2 == 1 { finite[n / 2] } else { 0.5 * (finite[n / 2 - 1] + finite[n / 2]) })
    } else {
        None
    };
    Ok(OrderEstimate { h_values: h_values.to_vec(), errors, pairwise_orders, summary_order })
}

/// Whether one run of `spec` on the Dahlquist problem stays bounded.
///
/// Stable means no divergence over `n_steps` fixed steps and
/// `|y_N| <= |y_0| * (1 + BOUNDEDNESS_SLACK)`.
pub fn is_stable(spec: &SchemeSpec, lambda: f64, h: f64, n_steps: usize) -> Result<bool> {
    let problem = dahlquist(lambda);
    match integrate_steps(&problem, spec, h, n_steps) {
        Ok(traj) => {
            let y0 = traj.values[0][0].abs();
            let yn = traj.final_value()[0].abs();
            Ok(yn <= y0 * (1.0 + BOUNDEDNESS_SLACK))
        }
        Err(Error::Divergence { .. }) => Ok(false),
        Err(other) => Err(other),
    }
}

/// Bisects the largest stable step size for `spec` on `y' = lambda*y`.
///
/// `bracket.0` must be stable and `bracket.1` unstable; the boundary is
/// located to within [`BRACKET_TOLERANCE`].
pub fn stability_threshold(
    spec: &SchemeSpec,
    lambda: f64,
    n_steps: usize,
    bracket: (f64, f64),
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !lambda.is_finite() || lambda >= 0.0 {
        return Err(Error::InvalidParameter(format!("lambda must be negative, got {lambda}")));
    }
    if !lo.is_finite() || !hi.is_finite() || lo <= 0.0 || lo >= hi {
        return Err(Error::InvalidParameter(format!("bad bracket [{lo}, {hi}]")));
    }
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
    }
    if !is_stable(spec, lambda, lo, n_steps)? {
        return Err(Error::BadBracket {
            lo,
            hi,
            reason: format!("lower end h = {lo} is already unstable"),
        });
    }
    if is_stable(spec, lambda, hi, n_steps)? {
        return Err(Error::BadBracket {
            lo,
            hi,
            reason: format!("upper end h = {hi} is still stable"),
        });
    }
    while hi - lo > BRACKET_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if is_stable(spec, lambda, mid, n_steps)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One row of the noise-filtering study.
#[derive(Debug, Clone, Copy)]
pub struct NoiseRow {
    pub eta: usize,
    /// Monte-Carlo std of the window slope estimate.
    pub algebraic_std: f64,
    /// Monte-Carlo std of the two-point difference `(y_new - y_prev)/h`.
    pub two_point_std: f64,
    /// `sigma * sqrt(sum_j (scale*w_j)^2)`, the exact std of the window
    /// estimate under i.i.d. noise.
    pub analytic_std: f64,
}

/// Analytic std of the two-point difference under i.i.d. noise.
pub fn two_point_analytic_std(sigma: f64, h: f64) -> f64 {
    sigma * 2.0f64.sqrt() / h
}

/// Monte-Carlo comparison of the window estimator against the two-point
/// difference on a unit ramp with additive Gaussian noise.
///
/// Each trial re-derives its RNG from `(seed, eta, trial)`, so rows are
/// independent of evaluation order.
pub fn noise_variance_report(
    eta_values: &[usize],
    sigma: f64,
    trials: usize,
    seed: u64,
    h: f64,
) -> Result<Vec<NoiseRow>> {
    if trials < 1000 {
        return Err(Error::InvalidParameter(format!(
            "noise study needs at least 1000 trials, got {trials}"
        )));
    }
    if !sigma.is_finite() || sigma < 0.0 || !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidParameter(format!("bad sigma = {sigma} or h = {h}")));
    }
    let mut rows = Vec::with_capacity(eta_values.len());
    for &eta in eta_values {
        let coeffs = EstimatorCoefficients::new(eta, h, GainMode::Calibrated)?;
        let analytic: f64 = sigma
            * coeffs
                .raw_weights()
                .iter()
                .map(|w| (coeffs.scale() * w) * (coeffs.scale() * w))
                .sum::<f64>()
                .sqrt();
        let mut algebraic = Vec::with_capacity(trials);
        let mut two_point = Vec::with_capacity(trials);
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((eta as u64) << 32) ^ trial as u64);
            let mut window = HistoryWindow::new(eta + 1);
            let mut prev = 0.0;
            let mut newest = 0.0;
            for j in 0..=eta {
                let noise: f64 = StandardNormal.sample(&mut rng);
                let sample = j as f64 * h + sigma * noise;
                window.push(sample);
                prev = newest;
                newest = sample;
            }
            algebraic.push(coeffs.estimate_slope(&window)?);
            two_point.push((newest - prev) / h);
        }
        rows.push(NoiseRow {
            eta,
            algebraic_std: sample_std(&algebraic),
            two_point_std: sample_std(&two_point),
            analytic_std: analytic,
        });
    }
    Ok(rows)
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}
