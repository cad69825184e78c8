//! Initial-value problem catalog, input signals, and reference solutions.
//!
//! Problems are vector-capable but the built-in catalog is scalar. Input
//! signals are pure functions of `(t, sample_index)`; the noisy variant
//! derives its Gaussian draw from `(seed, sample_index)` alone, so a
//! trajectory's noise path is reproducible and independent of evaluation
//! order or step size.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Deterministic standard normal draw keyed on `(seed, index)`.
pub(crate) fn indexed_normal(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    StandardNormal.sample(&mut rng)
}

/// The forcing term `u(t)` of a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    Zero,
    Constant(f64),
    /// 0 before `t_on`, `level` from `t_on` onward.
    Step { t_on: f64, level: f64 },
    Sinusoid { amplitude: f64, angular_frequency: f64, phase: f64 },
    /// `base` plus zero-mean Gaussian noise with deviation `sigma`,
    /// keyed on `(seed, sample_index)`.
    Noisy { base: Box<InputSignal>, sigma: f64, seed: u64 },
}

impl InputSignal {
    /// Evaluates the signal at time `t` for step `sample_index`.
    pub fn eval(&self, t: f64, sample_index: u64) -> f64 {
        match self {
            InputSignal::Zero => 0.0,
            InputSignal::Constant(c) => *c,
            InputSignal::Step { t_on, level } => {
                if t >= *t_on {
                    *level
                } else {
                    0.0
                }
            }
            InputSignal::Sinusoid { amplitude, angular_frequency, phase } => {
                amplitude * (angular_frequency * t + phase).sin()
            }
            InputSignal::Noisy { base, sigma, seed } => {
                base.eval(t, sample_index) + sigma * indexed_normal(*seed, sample_index)
            }
        }
    }

    pub fn is_noisy(&self) -> bool {
        matches!(self, InputSignal::Noisy { .. })
    }

    /// Returns the signal with every noisy node reseeded to `seed`.
    pub fn with_seed(&self, seed: u64) -> InputSignal {
        match self {
            InputSignal::Noisy { base, sigma, .. } => InputSignal::Noisy {
                base: Box::new(base.with_seed(seed)),
                sigma: *sigma,
                seed,
            },
            other => other.clone(),
        }
    }
}

type RhsFn = dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync;
type ReferenceFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// An initial-value problem `dy/dt = f(y, u(t))`, `y(0) = y0`, on
/// `[0, t_final]`, with an optional analytic reference solution.
#[derive(Clone)]
pub struct OdeProblem {
    name: String,
    rhs: Arc<RhsFn>,
    input: InputSignal,
    y0: Vec<f64>,
    t_final: f64,
    reference: Option<Arc<ReferenceFn>>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("dim", &self.y0.len())
            .field("input", &self.input)
            .field("t_final", &self.t_final)
            .field("has_reference", &self.reference.is_some())
            .finish()
    }
}

impl OdeProblem {
    pub fn new(
        name: impl Into<String>,
        rhs: Arc<RhsFn>,
        input: InputSignal,
        y0: Vec<f64>,
        t_final: f64,
    ) -> Result<Self> {
        if y0.is_empty() {
            return Err(Error::InvalidParameter("y0 must have at least one component".into()));
        }
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "t_final must be positive and finite, got {t_final}"
            )));
        }
        Ok(Self { name: name.into(), rhs, input, y0, t_final, reference: None })
    }

    pub fn with_reference(mut self, reference: Arc<ReferenceFn>) -> Self {
        self.reference = Some(reference);
        self
    }

    /// Replaces the input signal; any previous reference is dropped since
    /// it was derived for the old forcing.
    pub fn with_input(mut self, input: InputSignal) -> Self {
        self.input = input;
        self.reference = None;
        self
    }

    pub fn with_t_final(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }

    /// Reseeds any noisy input nodes; a no-op for deterministic inputs.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.input = self.input.with_seed(seed);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn input(&self) -> &InputSignal {
        &self.input
    }

    pub fn reference(&self) -> Option<&Arc<ReferenceFn>> {
        self.reference.as_ref()
    }

    /// Evaluates the analytic reference at `t`, when present.
    pub fn reference_at(&self, t: f64) -> Option<Vec<f64>> {
        self.reference.as_ref().map(|r| r(t))
    }

    /// Evaluates `f(y, u(t))` at step `sample_index`.
    pub fn eval_rhs(&self, y: &[f64], t: f64, sample_index: u64) -> Result<Vec<f64>> {
        if y.len() != self.y0.len() {
            return Err(Error::DimensionMismatch { expected: self.y0.len(), got: y.len() });
        }
        let u = self.input.eval(t, sample_index);
        let mut out = vec![0.0; y.len()];
        (self.rhs)(y, u, &mut out);
        Ok(out)
    }
}

fn dahlquist_rhs(lambda: f64) -> Arc<RhsFn> {
    Arc::new(move |y, u, out| {
        for (o, yi) in out.iter_mut().zip(y) {
            *o = lambda * yi + u;
        }
    })
}

/// `dy/dt = lambda*y + u`, `y(0) = 1`, reference `e^{lambda t}` for the
/// default zero input.
pub fn dahlquist(lambda: f64) -> OdeProblem {
    OdeProblem::new(
        format!("dahlquist:{lambda}"),
        dahlquist_rhs(lambda),
        InputSignal::Zero,
        vec![1.0],
        1.0,
    )
    .expect("valid problem")
    .with_reference(Arc::new(move |t| vec![(lambda * t).exp()]))
}

/// Dahlquist with a noisy zero-mean input (`sigma = 0.1`, default seed 42).
pub fn dahlquist_noisy(lambda: f64) -> OdeProblem {
    OdeProblem::new(
        format!("dahlquist_noisy:{lambda}"),
        dahlquist_rhs(lambda),
        InputSignal::Noisy { base: Box::new(InputSignal::Zero), sigma: 0.1, seed: 42 },
        vec![1.0],
        1.0,
    )
    .expect("valid problem")
}

/// `dy/dt = 5y + u`, `y(0) = 1`, `t_final = 0.5`; grows like `e^{5t}` for
/// zero input (just over 12 at the horizon).
pub fn linear_gain5() -> OdeProblem {
    OdeProblem::new(
        "linear_gain5",
        Arc::new(|y: &[f64], u: f64, out: &mut [f64]| {
            for (o, yi) in out.iter_mut().zip(y) {
                *o = 5.0 * yi + u;
            }
        }),
        InputSignal::Zero,
        vec![1.0],
        0.5,
    )
    .expect("valid problem")
    .with_reference(Arc::new(|t| vec![(5.0 * t).exp()]))
}

/// `dy/dt = y(1 - y)`, `y(0) = 0.1`, closed-form logistic reference.
pub fn logistic() -> OdeProblem {
    let y0 = 0.1;
    OdeProblem::new(
        "logistic",
        Arc::new(|y: &[f64], _u: f64, out: &mut [f64]| {
            for (o, yi) in out.iter_mut().zip(y) {
                *o = yi * (1.0 - yi);
            }
        }),
        InputSignal::Zero,
        vec![y0],
        5.0,
    )
    .expect("valid problem")
    .with_reference(Arc::new(move |t| vec![1.0 / (1.0 + (1.0 - y0) / y0 * (-t).exp())]))
}

/// The built-in problem list.
pub fn catalog() -> Vec<OdeProblem> {
    vec![
        linear_gain5(),
        dahlquist(-1.0),
        dahlquist(-10.0),
        dahlquist(-100.0),
        dahlquist_noisy(-1.0),
        dahlquist_noisy(-10.0),
        logistic(),
    ]
}

/// Names accepted by [`lookup`], for error messages and `--help`.
pub fn catalog_names() -> Vec<String> {
    let mut names: Vec<String> = catalog().into_iter().map(|p| p.name().to_string()).collect();
    names.push("dahlquist:<lambda>".into());
    names.push("dahlquist_noisy:<lambda>".into());
    names
}

/// Resolves a problem name. `dahlquist:<lambda>` and
/// `dahlquist_noisy:<lambda>` accept any finite lambda.
pub fn lookup(name: &str) -> Result<OdeProblem> {
    let unknown = || Error::UnknownProblem {
        name: name.to_string(),
        available: catalog_names().join(", "),
    };
    if let Some(rest) = name.strip_prefix("dahlquist:") {
        let lambda: f64 = rest.parse().map_err(|_| unknown())?;
        if !lambda.is_finite() {
            return Err(unknown());
        }
        return Ok(dahlquist(lambda));
    }
    if let Some(rest) = name.strip_prefix("dahlquist_noisy:") {
        let lambda: f64 = rest.parse().map_err(|_| unknown())?;
        if !lambda.is_finite() {
            return Err(unknown());
        }
        return Ok(dahlquist_noisy(lambda));
    }
    match name {
        "linear_gain5" => Ok(linear_gain5()),
        "logistic" => Ok(logistic()),
        _ => Err(unknown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_examples() {
        assert_eq!(InputSignal::Zero.eval(0.5, 3), 0.0);
        assert_eq!(InputSignal::Constant(2.0).eval(0.1, 0), 2.0);
        let step = InputSignal::Step { t_on: 1.0, level: 3.0 };
        assert_eq!(step.eval(0.99, 0), 0.0);
        assert_eq!(step.eval(1.0, 0), 3.0);
    }

    #[test]
    fn noisy_input_is_deterministic_per_index() {
        let sig = InputSignal::Noisy { base: Box::new(InputSignal::Zero), sigma: 0.1, seed: 42 };
        let a = sig.eval(0.3, 7);
        let b = sig.eval(0.3, 7);
        assert_eq!(a.to_bits(), b.to_bits());
        // different index, different draw
        assert_ne!(sig.eval(0.3, 8), a);
        // same seed, bitwise-equal sequence
        let again = InputSignal::Noisy { base: Box::new(InputSignal::Zero), sigma: 0.1, seed: 42 };
        for k in 0..64 {
            assert_eq!(sig.eval(0.0, k).to_bits(), again.eval(0.0, k).to_bits());
        }
        // different seed changes the path
        let other = sig.with_seed(43);
        assert!((0..64).any(|k| other.eval(0.0, k) != sig.eval(0.0, k)));
    }

    #[test]
    fn catalog_contains_expected_problems() {
        let names: Vec<String> =
            catalog().iter().map(|p| p.name().to_string()).collect();
        assert!(names.contains(&"linear_gain5".to_string()));
        assert!(names.contains(&"dahlquist:-1".to_string()));
        assert!(names.contains(&"logistic".to_string()));
        assert!(names.iter().any(|n| n.starts_with("dahlquist_noisy:")));
    }

    #[test]
    fn linear_gain5_rhs_value() {
        let p = linear_gain5();
        let f = p.eval_rhs(&[1.0], 0.0, 0).unwrap();
        assert_eq!(f, vec![5.0]);
        // constant(1) input contributes additively
        let p = p.with_input(InputSignal::Constant(1.0));
        let f = p.eval_rhs(&[0.0], 0.0, 0).unwrap();
        assert_eq!(f, vec![1.0]);
    }

    #[test]
    fn dahlquist_rhs_and_reference() {
        let p = dahlquist(-1.0);
        assert_eq!(p.eval_rhs(&[2.0], 0.0, 0).unwrap(), vec![-2.0]);
        let r = p.reference_at(1.0).unwrap();
        assert!((r[0] - (-1.0f64).exp()).abs() < 1e-12);
        assert!((r[0] - 0.3678794).abs() < 1e-6);
    }

    #[test]
    fn logistic_fixed_points() {
        let p = logistic();
        assert_eq!(p.eval_rhs(&[0.0], 0.0, 0).unwrap(), vec![0.0]);
        assert_eq!(p.eval_rhs(&[1.0], 0.0, 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = dahlquist(-1.0);
        match p.eval_rhs(&[1.0, 2.0], 0.0, 0) {
            Err(Error::DimensionMismatch { expected: 1, got: 2 }) => {}
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn references_start_at_y0() {
        for p in catalog() {
            if let Some(r0) = p.reference_at(0.0) {
                for (a, b) in r0.iter().zip(p.y0()) {
                    assert!((a - b).abs() <= 1e-12, "{}: reference(0) != y0", p.name());
                }
            }
        }
    }

    /// Five-point-stencil residual check of every catalog reference:
    /// d(ref)/dt must match f(ref, u) on an interior grid.
    #[test]
    fn references_satisfy_their_ode() {
        let h = 1e-4;
        for p in catalog() {
            let Some(reference) = p.reference() else { continue };
            let tf = p.t_final();
            for i in 0..100 {
                let t = 2.0 * h + (tf - 4.0 * h) * i as f64 / 99.0;
                let sample = |dt: f64| reference(t + dt)[0];
                let deriv = (sample(-2.0 * h) - 8.0 * sample(-h) + 8.0 * sample(h)
                    - sample(2.0 * h))
                    / (12.0 * h);
                let f = p.eval_rhs(&reference(t), t, 0).unwrap()[0];
                assert!(
                    (deriv - f).abs() <= 1e-4,
                    "{}: residual {} at t={t}",
                    p.name(),
                    (deriv - f).abs()
                );
            }
        }
    }

    #[test]
    fn lookup_parses_parameterized_names() {
        assert_eq!(lookup("dahlquist:-2.5").unwrap().name(), "dahlquist:-2.5");
        assert_eq!(lookup("linear_gain5").unwrap().name(), "linear_gain5");
        match lookup("nosuch") {
            Err(Error::UnknownProblem { available, .. }) => {
                assert!(available.contains("dahlquist"));
            }
            other => panic!("expected unknown problem, got {other:?}"),
        }
    }
}
