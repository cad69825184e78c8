//! Time steppers and full-horizon integration.
//!
//! Five schemes sit behind one spec type: explicit Euler, midpoint RK2,
//! classical RK4, and the two window-estimator variants. The Euler-like
//! variant replaces the forward difference by the algebraic slope
//! estimate over a *moving* window of past solution samples, turning the
//! update into a multi-step solve for the newest sample. The RK-like
//! variant keeps the RK2 prediction/correction shape but refines the
//! predicted average slope with an estimate of `df/dy` from a *static*
//! window of right-hand-side evaluations rebuilt inside each step.
//!
//! Scheme specs have a compact text form (see [`SchemeSpec::parse`]),
//! e.g. `euler_ansfd:eta=3,gain=calibrated` or
//! `rk_ansfd:eta=5,delta=grid:0:auto,seed=42`.

use std::fmt;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::{EstimatorCoefficients, GainMode, HistoryWindow};
use crate::problems::OdeProblem;

/// Integration aborts once any component magnitude exceeds this.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// Generalized step denominator `phi(h) = h + O(h^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Denominator {
    /// `phi(h) = h`.
    Identity,
    /// `phi(h) = (e^{lambda h} - 1) / lambda`.
    ExpFitted { lambda_hint: f64 },
}

impl Denominator {
    pub fn phi(&self, h: f64) -> f64 {
        match *self {
            Denominator::Identity => h,
            Denominator::ExpFitted { lambda_hint } => (lambda_hint * h).exp_m1() / lambda_hint,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Denominator::ExpFitted { lambda_hint } = *self {
            if !lambda_hint.is_finite() || lambda_hint == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "expfit lambda hint must be finite and nonzero, got {lambda_hint}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Denominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Denominator::Identity => write!(f, "identity"),
            Denominator::ExpFitted { lambda_hint } => write!(f, "expfit:{lambda_hint}"),
        }
    }
}

/// Bounds for the slope-sampling offsets; `None` means auto.
///
/// Auto resolves to `[0, max(h*|f_k|, 1e-12*max(1, |y_k|))]`, an
/// approximation of the step's excursion in `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSpan {
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl DeltaSpan {
    pub const AUTO: DeltaSpan = DeltaSpan { min: None, max: None };

    /// Concrete bounds for the current state and right-hand-side value.
    pub fn resolve(&self, h: f64, y_k: f64, f_k: f64) -> (f64, f64) {
        let lo = self.min.unwrap_or(0.0);
        let hi = self.max.unwrap_or_else(|| (h * f_k.abs()).max(collapse_epsilon(y_k)));
        (lo, hi)
    }

    fn validate(&self) -> Result<()> {
        if let (Some(lo), Some(hi)) = (self.min, self.max) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "delta span requires min < max, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for DeltaSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.min {
            Some(v) => write!(f, "{v}")?,
            None => write!(f, "auto")?,
        }
        write!(f, ":")?;
        match self.max {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "auto"),
        }
    }
}

/// Spans below this width are treated as a flat right-hand side.
pub fn collapse_epsilon(y_k: f64) -> f64 {
    1e-12 * y_k.abs().max(1.0)
}

/// How the slope-sampling offsets are placed inside their span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaMode {
    /// `delta_j = min + j*(max - min)/eta`.
    RegularGrid(DeltaSpan),
    /// `eta + 1` i.i.d. uniform draws, sorted ascending.
    RandomUniform(DeltaSpan),
}

impl DeltaMode {
    pub fn span(&self) -> &DeltaSpan {
        match self {
            DeltaMode::RegularGrid(s) | DeltaMode::RandomUniform(s) => s,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, DeltaMode::RandomUniform(_))
    }
}

impl fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaMode::RegularGrid(s) => write!(f, "grid:{s}"),
            DeltaMode::RandomUniform(s) => write!(f, "random:{s}"),
        }
    }
}

/// Which spacing the slope-estimate coefficients are built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeSpacing {
    /// The actual offset spacing `(max - min)/eta`, so the estimate is
    /// literally `df/dy`. Default.
    DeltaGrid,
    /// Reuse the integration step `h` even though the samples live in
    /// `y`-space; kept for fidelity experiments with the original
    /// formulation.
    TimeStep,
}

impl fmt::Display for SlopeSpacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlopeSpacing::DeltaGrid => write!(f, "delta"),
            SlopeSpacing::TimeStep => write!(f, "timestep"),
        }
    }
}

/// Scheme used to fill the history window before multi-step updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapMethod {
    Euler,
    Rk4,
}

impl fmt::Display for BootstrapMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BootstrapMethod::Euler => write!(f, "euler"),
            BootstrapMethod::Rk4 => write!(f, "rk4"),
        }
    }
}

/// The three classical one-step baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    ExplicitEuler,
    Rk2Midpoint,
    Rk4Classic,
}

/// Selector plus parameters for one stepper.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSpec {
    ExplicitEuler,
    Rk2Midpoint,
    Rk4Classic,
    EulerAnsfd {
        eta: usize,
        gain: GainMode,
        denominator: Denominator,
        bootstrap: BootstrapMethod,
    },
    RkAnsfd {
        eta: usize,
        gain: GainMode,
        delta: DeltaMode,
        spacing: SlopeSpacing,
        denominator: Denominator,
        seed: Option<u64>,
    },
}

impl SchemeSpec {
    pub fn euler_ansfd(eta: usize) -> Self {
        SchemeSpec::EulerAnsfd {
            eta,
            gain: GainMode::Calibrated,
            denominator: Denominator::Identity,
            bootstrap: BootstrapMethod::Euler,
        }
    }

    pub fn rk_ansfd(eta: usize) -> Self {
        SchemeSpec::RkAnsfd {
            eta,
            gain: GainMode::Calibrated,
            delta: DeltaMode::RegularGrid(DeltaSpan::AUTO),
            spacing: SlopeSpacing::DeltaGrid,
            denominator: Denominator::Identity,
            seed: None,
        }
    }

    /// Window length, for schemes that have one.
    pub fn eta(&self) -> Option<usize> {
        match self {
            SchemeSpec::EulerAnsfd { eta, .. } | SchemeSpec::RkAnsfd { eta, .. } => Some(*eta),
            _ => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            SchemeSpec::RkAnsfd { seed, .. } => *seed,
            _ => None,
        }
    }

    /// Returns the spec with its window length replaced; errors for
    /// schemes without one.
    pub fn with_eta(&self, new_eta: usize) -> Result<Self> {
        let mut spec = self.clone();
        match &mut spec {
            SchemeSpec::EulerAnsfd { eta, .. } | SchemeSpec::RkAnsfd { eta, .. } => {
                *eta = new_eta;
                Ok(spec)
            }
            _ => Err(Error::InvalidParameter(format!(
                "scheme '{self}' has no eta parameter to sweep"
            ))),
        }
    }

    /// Fills in a seed when the scheme wants one and has none yet.
    pub fn ensure_seed(&self, default_seed: u64) -> Self {
        let mut spec = self.clone();
        if let SchemeSpec::RkAnsfd { seed, .. } = &mut spec {
            if seed.is_none() {
                *seed = Some(default_seed);
            }
        }
        spec
    }

    /// Structural checks that hold independent of how the spec will be
    /// run: window length, span ordering, denominator parameters.
    pub fn validate_structure(&self) -> Result<()> {
        match self {
            SchemeSpec::ExplicitEuler | SchemeSpec::Rk2Midpoint | SchemeSpec::Rk4Classic => Ok(()),
            SchemeSpec::EulerAnsfd { eta, denominator, .. } => {
                if *eta == 0 {
                    return Err(Error::InvalidParameter("eta must be >= 1".into()));
                }
                denominator.validate()
            }
            SchemeSpec::RkAnsfd { eta, delta, denominator, .. } => {
                if *eta == 0 {
                    return Err(Error::InvalidParameter("eta must be >= 1".into()));
                }
                delta.span().validate()?;
                denominator.validate()
            }
        }
    }

    /// Full run-readiness check: structure plus the seed requirement for
    /// random delta sampling. The seed may arrive after parsing (from a
    /// run seed or the environment), so only execution enforces it.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if let SchemeSpec::RkAnsfd { delta, seed, .. } = self {
            if delta.is_random() && seed.is_none() {
                return Err(Error::InvalidParameter(
                    "delta=random requires a seed (scheme seed, --seed, or ANSFD_SEED)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Parses the compact text form.
    ///
    /// Grammar: `<kind>[:key=value,...]` with kinds `explicit_euler`,
    /// `rk2_midpoint`, `rk4_classic`, `euler_ansfd`, `rk_ansfd`. Keys:
    /// `eta=N` (required for the *_ansfd kinds), `gain=calibrated|auto|unit|<K>`,
    /// `phi=identity|expfit:<lambda>`, `bootstrap=euler|rk4` (euler_ansfd),
    /// `delta=grid|random[:<min|auto>:<max|auto>]`, `spacing=delta|timestep`,
    /// `seed=N` (rk_ansfd).
    pub fn parse(text: &str) -> Result<Self> {
        let fail = |reason: &str| Error::SchemeParse {
            spec: text.to_string(),
            reason: reason.to_string(),
        };
        let (kind, rest) = match text.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (text, None),
        };
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        if let Some(rest) = rest {
            for item in rest.split(',') {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| fail(&format!("expected key=value, got '{item}'")))?;
                pairs.push((k, v));
            }
        }
        let baseline = |spec: SchemeSpec| {
            if pairs.is_empty() {
                Ok(spec)
            } else {
                Err(fail(&format!("'{kind}' takes no parameters")))
            }
        };
        let spec = match kind {
            "explicit_euler" => return baseline(SchemeSpec::ExplicitEuler),
            "rk2_midpoint" => return baseline(SchemeSpec::Rk2Midpoint),
            "rk4_classic" => return baseline(SchemeSpec::Rk4Classic),
            "euler_ansfd" => {
                let mut eta = None;
                let mut gain = GainMode::Calibrated;
                let mut denominator = Denominator::Identity;
                let mut bootstrap = BootstrapMethod::Euler;
                for (k, v) in &pairs {
                    match *k {
                        "eta" => eta = Some(parse_eta(v).map_err(|r| fail(&r))?),
                        "gain" => gain = parse_gain(v).map_err(|r| fail(&r))?,
                        "phi" => denominator = parse_phi(v).map_err(|r| fail(&r))?,
                        "bootstrap" => {
                            bootstrap = match *v {
                                "euler" => BootstrapMethod::Euler,
                                "rk4" => BootstrapMethod::Rk4,
                                _ => return Err(fail(&format!("unknown bootstrap '{v}'"))),
                            }
                        }
                        _ => return Err(fail(&format!("unknown key '{k}' for euler_ansfd"))),
                    }
                }
                let eta = eta.ok_or_else(|| fail("euler_ansfd requires eta=N"))?;
                SchemeSpec::EulerAnsfd { eta, gain, denominator, bootstrap }
            }
            "rk_ansfd" => {
                let mut eta = None;
                let mut gain = GainMode::Calibrated;
                let mut delta = DeltaMode::RegularGrid(DeltaSpan::AUTO);
                let mut spacing = SlopeSpacing::DeltaGrid;
                let mut denominator = Denominator::Identity;
                let mut seed = None;
                for (k, v) in &pairs {
                    match *k {
                        "eta" => eta = Some(parse_eta(v).map_err(|r| fail(&r))?),
                        "gain" => gain = parse_gain(v).map_err(|r| fail(&r))?,
                        "phi" => denominator = parse_phi(v).map_err(|r| fail(&r))?,
                        "delta" => delta = parse_delta(v).map_err(|r| fail(&r))?,
                        "spacing" => {
                            spacing = match *v {
                                "delta" => SlopeSpacing::DeltaGrid,
                                "timestep" => SlopeSpacing::TimeStep,
                                _ => return Err(fail(&format!("unknown spacing '{v}'"))),
                            }
                        }
                        "seed" => {
                            seed = Some(
                                v.parse::<u64>()
                                    .map_err(|_| fail(&format!("bad seed '{v}'")))?,
                            )
                        }
                        _ => return Err(fail(&format!("unknown key '{k}' for rk_ansfd"))),
                    }
                }
                let eta = eta.ok_or_else(|| fail("rk_ansfd requires eta=N"))?;
                SchemeSpec::RkAnsfd { eta, gain, delta, spacing, denominator, seed }
            }
            _ => {
                return Err(fail(
                    "unknown scheme kind (expected explicit_euler, rk2_midpoint, \
                     rk4_classic, euler_ansfd, or rk_ansfd)",
                ))
            }
        };
        spec.validate_structure().map_err(|e| Error::SchemeParse {
            spec: text.to_string(),
            reason: e.to_string(),
        })?;
        Ok(spec)
    }
}

fn parse_eta(v: &str) -> std::result::Result<usize, String> {
    let eta: usize = v.parse().map_err(|_| format!("bad eta '{v}'"))?;
    if eta == 0 {
        return Err("eta must be >= 1".into());
    }
    Ok(eta)
}

fn parse_gain(v: &str) -> std::result::Result<GainMode, String> {
    v.parse()
}

fn parse_phi(v: &str) -> std::result::Result<Denominator, String> {
    if v == "identity" {
        return Ok(Denominator::Identity);
    }
    for prefix in ["expfit:", "exp_fitted:"] {
        if let Some(rest) = v.strip_prefix(prefix) {
            let lambda: f64 = rest.parse().map_err(|_| format!("bad phi lambda '{rest}'"))?;
            return Ok(Denominator::ExpFitted { lambda_hint: lambda });
        }
    }
    Err(format!("unknown phi '{v}' (expected identity or expfit:<lambda>)"))
}

fn parse_delta(v: &str) -> std::result::Result<DeltaMode, String> {
    let mut parts = v.splitn(3, ':');
    let mode = parts.next().unwrap_or("");
    let bound = |s: Option<&str>| -> std::result::Result<Option<f64>, String> {
        match s {
            None | Some("auto") => Ok(None),
            Some(t) => t
                .parse::<f64>()
                .map(Some)
                .map_err(|_| format!("bad delta bound '{t}'")),
        }
    };
    let span = DeltaSpan { min: bound(parts.next())?, max: bound(parts.next())? };
    match mode {
        "grid" => Ok(DeltaMode::RegularGrid(span)),
        "random" => Ok(DeltaMode::RandomUniform(span)),
        _ => Err(format!("unknown delta mode '{mode}' (expected grid or random)")),
    }
}

impl fmt::Display for GainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GainMode::Calibrated => write!(f, "calibrated"),
            GainMode::Unit => write!(f, "unit"),
            GainMode::Manual(k) => write!(f, "{k}"),
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::ExplicitEuler => write!(f, "explicit_euler"),
            SchemeSpec::Rk2Midpoint => write!(f, "rk2_midpoint"),
            SchemeSpec::Rk4Classic => write!(f, "rk4_classic"),
            SchemeSpec::EulerAnsfd { eta, gain, denominator, bootstrap } => {
                write!(f, "euler_ansfd:eta={eta},gain={gain},phi={denominator},bootstrap={bootstrap}")
            }
            SchemeSpec::RkAnsfd { eta, gain, delta, spacing, denominator, seed } => {
                write!(
                    f,
                    "rk_ansfd:eta={eta},gain={gain},delta={delta},spacing={spacing},phi={denominator}"
                )?;
                if let Some(seed) = seed {
                    write!(f, ",seed={seed}")?;
                }
                Ok(())
            }
        }
    }
}

/// One step of the integration, produced alongside run metadata.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Number of slope estimations skipped because the sampling span
    /// collapsed (flat right-hand side).
    pub collapsed_spans: u64,
}

/// Run metadata attached to a trajectory.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub problem: String,
    pub scheme: String,
    pub h: f64,
    pub seed: Option<u64>,
    pub diagnostics: Diagnostics,
}

/// Time grid plus solution samples produced by one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub meta: RunMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Samples of one component across the whole run.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }

    pub fn final_value(&self) -> &[f64] {
        self.values.last().expect("trajectory has at least the initial sample")
    }
}

/// History of the first `eta` samples plus the primed per-component
/// windows, ready for the first multi-step solve.
#[derive(Debug, Clone)]
pub struct BootstrapState {
    pub windows: Vec<HistoryWindow>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Produces the first `eta` samples (`eta - 1` explicit Euler steps) and
/// per-component windows primed with them.
pub fn bootstrap_window(problem: &OdeProblem, h: f64, eta: usize) -> Result<BootstrapState> {
    bootstrap_window_with(problem, h, eta, BootstrapMethod::Euler)
}

/// [`bootstrap_window`] with a selectable bootstrap scheme.
pub fn bootstrap_window_with(
    problem: &OdeProblem,
    h: f64,
    eta: usize,
    method: BootstrapMethod,
) -> Result<BootstrapState> {
    if eta == 0 {
        return Err(Error::InvalidParameter("eta must be >= 1".into()));
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    let kind = match method {
        BootstrapMethod::Euler => BaselineKind::ExplicitEuler,
        BootstrapMethod::Rk4 => BaselineKind::Rk4Classic,
    };
    let dim = problem.dim();
    let mut windows: Vec<HistoryWindow> = (0..dim).map(|_| HistoryWindow::new(eta + 1)).collect();
    let mut times = vec![0.0];
    let mut values = vec![problem.y0().to_vec()];
    for (i, w) in windows.iter_mut().enumerate() {
        w.push(problem.y0()[i]);
    }
    let mut y = problem.y0().to_vec();
    for k in 0..eta - 1 {
        let t = k as f64 * h;
        y = step_baseline(kind, problem, &y, t, k as u64, h)?;
        check_guard(&y, k + 1)?;
        for (i, w) in windows.iter_mut().enumerate() {
            w.push(y[i]);
        }
        times.push((k + 1) as f64 * h);
        values.push(y.clone());
    }
    Ok(BootstrapState { windows, times, values })
}

/// One classical baseline step from `(t_k, y_k)` with step `h`.
///
/// All stage evaluations within the step use sample index `k` for the
/// input signal (noise is per-step); `u` is evaluated at each stage's
/// time argument.
pub fn step_baseline(
    kind: BaselineKind,
    problem: &OdeProblem,
    y_k: &[f64],
    t_k: f64,
    k: u64,
    h: f64,
) -> Result<Vec<f64>> {
    match kind {
        BaselineKind::ExplicitEuler => {
            let f = problem.eval_rhs(y_k, t_k, k)?;
            Ok(axpy(y_k, h, &f))
        }
        BaselineKind::Rk2Midpoint => {
            let s1 = problem.eval_rhs(y_k, t_k, k)?;
            let y_mid = axpy(y_k, 0.5 * h, &s1);
            let s2 = problem.eval_rhs(&y_mid, t_k + 0.5 * h, k)?;
            Ok(axpy(y_k, h, &s2))
        }
        BaselineKind::Rk4Classic => {
            let s1 = problem.eval_rhs(y_k, t_k, k)?;
            let s2 = problem.eval_rhs(&axpy(y_k, 0.5 * h, &s1), t_k + 0.5 * h, k)?;
            let s3 = problem.eval_rhs(&axpy(y_k, 0.5 * h, &s2), t_k + 0.5 * h, k)?;
            let s4 = problem.eval_rhs(&axpy(y_k, h, &s3), t_k + h, k)?;
            let mut out = y_k.to_vec();
            for i in 0..out.len() {
                out[i] += h / 6.0 * (s1[i] + 2.0 * s2[i] + 2.0 * s3[i] + s4[i]);
            }
            Ok(out)
        }
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

/// Solves the Euler-like multi-step relation for the next sample.
///
/// The window must hold the `eta` most recent solution samples
/// `y_{k-eta+1}..y_k`; `rhs_value` is `f(y_k, u_k)` (pre-scaled by
/// `h/phi(h)` when a generalized denominator is in use). Solves
/// `scale * (w_eta*y_{k+1} + sum_{j<eta} w_j*y_j) = rhs_value`,
/// rearranged about `y_k` so that constant windows with a zero
/// right-hand side are preserved exactly.
pub fn step_euler_ansfd(
    coeffs: &EstimatorCoefficients,
    window: &HistoryWindow,
    rhs_value: f64,
) -> Result<f64> {
    let eta = coeffs.eta();
    if window.len() < eta {
        return Err(Error::WindowUnderflow { needed: eta, have: window.len() });
    }
    let w = coeffs.raw_weights();
    let y_k = window.latest().expect("window non-empty");
    // sum_{j<eta} w_j y_j = sum_{j<eta} w_j (y_j - y_k) - w_eta y_k,
    // using the exact zero-sum of the weights.
    let mut acc = 0.0;
    for (j, y) in window.tail(eta).enumerate() {
        acc += w[j] * (y - y_k);
    }
    Ok(y_k + (rhs_value / coeffs.scale() - acc) / w[eta])
}

/// Draws the `eta + 1` slope-sampling offsets for one step.
///
/// Random draws are sorted ascending so the window weights act on a
/// monotone sample sequence. A degenerate span yields `eta + 1` copies
/// of the lower bound.
pub fn sample_deltas(
    mode: &DeltaMode,
    eta: usize,
    h: f64,
    y_k: f64,
    f_k: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Vec<f64>> {
    if eta == 0 {
        return Err(Error::InvalidParameter("eta must be >= 1".into()));
    }
    let (lo, hi) = mode.span().resolve(h, y_k, f_k);
    if hi.is_nan() || hi <= lo {
        return Ok(vec![lo; eta + 1]);
    }
    match mode {
        DeltaMode::RegularGrid(_) => {
            let width = hi - lo;
            Ok((0..=eta).map(|j| lo + j as f64 * width / eta as f64).collect())
        }
        DeltaMode::RandomUniform(_) => {
            let rng = rng.ok_or_else(|| {
                Error::InvalidParameter("random delta sampling requires an RNG".into())
            })?;
            let dist = Uniform::new_inclusive(lo, hi);
            let mut draws: Vec<f64> = (0..=eta).map(|_| dist.sample(rng)).collect();
            draws.sort_by(f64::total_cmp);
            Ok(draws)
        }
    }
}

/// The RK-like stepper: prediction with an estimator-refined average
/// slope, then a full-step correction.
///
/// Vector problems are handled componentwise: component `i`'s slope is
/// estimated from `f_i(y + delta_j e_i)` with offsets drawn from that
/// component's own span.
#[derive(Debug, Clone)]
pub struct RkAnsfdStepper {
    eta: usize,
    gain: GainMode,
    delta: DeltaMode,
    spacing: SlopeSpacing,
    denominator: Denominator,
    rng: Option<ChaCha8Rng>,
    last_slopes: Vec<f64>,
    collapsed_spans: u64,
}

impl RkAnsfdStepper {
    pub fn from_spec(spec: &SchemeSpec) -> Result<Self> {
        spec.validate()?;
        match spec {
            SchemeSpec::RkAnsfd { eta, gain, delta, spacing, denominator, seed } => Ok(Self {
                eta: *eta,
                gain: *gain,
                delta: *delta,
                spacing: *spacing,
                denominator: *denominator,
                rng: seed.map(ChaCha8Rng::seed_from_u64),
                last_slopes: Vec::new(),
                collapsed_spans: 0,
            }),
            other => Err(Error::InvalidParameter(format!(
                "RkAnsfdStepper requires an rk_ansfd spec, got '{other}'"
            ))),
        }
    }

    /// Per-component slope estimates from the most recent step.
    pub fn last_slope_estimates(&self) -> &[f64] {
        &self.last_slopes
    }

    /// How many slope estimations collapsed to zero so far.
    pub fn collapsed_spans(&self) -> u64 {
        self.collapsed_spans
    }

    /// Advances one step from `(t_k, y_k)`.
    pub fn step(
        &mut self,
        problem: &OdeProblem,
        y_k: &[f64],
        t_k: f64,
        k: u64,
        h: f64,
    ) -> Result<Vec<f64>> {
        let dim = y_k.len();
        let f0 = problem.eval_rhs(y_k, t_k, k)?;
        let mut slopes = vec![0.0; dim];
        let mut probe = y_k.to_vec();
        for i in 0..dim {
            let (lo, hi) = self.delta.span().resolve(h, y_k[i], f0[i]);
            let width = hi - lo;
            if width.is_nan() || width <= collapse_epsilon(y_k[i]) {
                self.collapsed_spans += 1;
                continue;
            }
            let deltas = sample_deltas(&self.delta, self.eta, h, y_k[i], f0[i], self.rng.as_mut())?;
            let mut window = HistoryWindow::new(self.eta + 1);
            for &d in &deltas {
                probe[i] = y_k[i] + d;
                window.push(problem.eval_rhs(&probe, t_k, k)?[i]);
            }
            probe[i] = y_k[i];
            let spacing = match self.spacing {
                SlopeSpacing::DeltaGrid => width / self.eta as f64,
                SlopeSpacing::TimeStep => h,
            };
            let coeffs = EstimatorCoefficients::new(self.eta, spacing, self.gain)?;
            slopes[i] = coeffs.estimate_slope(&window)?;
        }
        self.last_slopes = slopes.clone();
        // prediction: y_k + (h/2) * (f(y_k) + h * a_1)
        let mut y_mid = y_k.to_vec();
        for i in 0..dim {
            y_mid[i] += 0.5 * h * (f0[i] + h * slopes[i]);
        }
        // correction: y_k + phi(h) * f(y_mid)
        let f_mid = problem.eval_rhs(&y_mid, t_k + 0.5 * h, k)?;
        let phi = self.denominator.phi(h);
        Ok(axpy(y_k, phi, &f_mid))
    }
}

fn check_guard(y: &[f64], step: usize) -> Result<()> {
    if y.iter().all(|v| v.abs() <= DIVERGENCE_GUARD) {
        Ok(())
    } else {
        Err(Error::Divergence { step, guard: DIVERGENCE_GUARD })
    }
}

/// Integrates over the problem's own horizon.
pub fn integrate(problem: &OdeProblem, spec: &SchemeSpec, h: f64) -> Result<Trajectory> {
    integrate_to(problem, spec, h, problem.t_final())
}

/// Integrates to an explicit horizon; the final step is truncated so the
/// grid lands exactly on `t_final`.
pub fn integrate_to(
    problem: &OdeProblem,
    spec: &SchemeSpec,
    h: f64,
    t_final: f64,
) -> Result<Trajectory> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    if !t_final.is_finite() || h > t_final * (1.0 + 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "h = {h} exceeds the horizon t_final = {t_final}"
        )));
    }
    let ratio = t_final / h;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        run_engine(problem, spec, h, rounded as usize, None)
    } else {
        run_engine(problem, spec, h, ratio.floor() as usize, Some(t_final))
    }
}

/// Integrates for exactly `n_steps` fixed steps, ignoring the problem's
/// horizon (used by stability scans).
pub fn integrate_steps(
    problem: &OdeProblem,
    spec: &SchemeSpec,
    h: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    run_engine(problem, spec, h, n_steps, None)
}

fn run_engine(
    problem: &OdeProblem,
    spec: &SchemeSpec,
    h: f64,
    n_full: usize,
    truncate_to: Option<f64>,
) -> Result<Trajectory> {
    spec.validate()?;
    let dim = problem.dim();
    let mut times: Vec<f64> = Vec::with_capacity(n_full + 2);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(n_full + 2);
    times.push(0.0);
    values.push(problem.y0().to_vec());
    let mut diagnostics = Diagnostics::default();

    match spec {
        SchemeSpec::ExplicitEuler | SchemeSpec::Rk2Midpoint | SchemeSpec::Rk4Classic => {
            let kind = match spec {
                SchemeSpec::ExplicitEuler => BaselineKind::ExplicitEuler,
                SchemeSpec::Rk2Midpoint => BaselineKind::Rk2Midpoint,
                _ => BaselineKind::Rk4Classic,
            };
            let mut y = problem.y0().to_vec();
            for k in 0..n_full {
                y = step_baseline(kind, problem, &y, k as f64 * h, k as u64, h)?;
                check_guard(&y, k + 1)?;
                times.push((k + 1) as f64 * h);
                values.push(y.clone());
            }
            if let Some(tf) = truncate_to {
                let t = n_full as f64 * h;
                y = step_baseline(kind, problem, &y, t, n_full as u64, tf - t)?;
                check_guard(&y, n_full + 1)?;
                times.push(tf);
                values.push(y);
            }
        }
        SchemeSpec::EulerAnsfd { eta, gain, denominator, bootstrap } => {
            let eta = *eta;
            let boot_kind = match bootstrap {
                BootstrapMethod::Euler => BaselineKind::ExplicitEuler,
                BootstrapMethod::Rk4 => BaselineKind::Rk4Classic,
            };
            let mut windows: Vec<HistoryWindow> =
                (0..dim).map(|_| HistoryWindow::new(eta + 1)).collect();
            for (i, w) in windows.iter_mut().enumerate() {
                w.push(problem.y0()[i]);
            }
            let mut y = problem.y0().to_vec();
            let boot_steps = (eta - 1).min(n_full);
            for k in 0..boot_steps {
                y = step_baseline(boot_kind, problem, &y, k as f64 * h, k as u64, h)?;
                check_guard(&y, k + 1)?;
                for (i, w) in windows.iter_mut().enumerate() {
                    w.push(y[i]);
                }
                times.push((k + 1) as f64 * h);
                values.push(y.clone());
            }
            let coeffs = EstimatorCoefficients::new(eta, h, *gain)?;
            let factor = h / denominator.phi(h);
            for k in boot_steps..n_full {
                let t = k as f64 * h;
                let rhs = problem.eval_rhs(&y, t, k as u64)?;
                let mut next = vec![0.0; dim];
                for i in 0..dim {
                    next[i] = step_euler_ansfd(&coeffs, &windows[i], rhs[i] * factor)?;
                }
                check_guard(&next, k + 1)?;
                for (i, w) in windows.iter_mut().enumerate() {
                    w.push(next[i]);
                }
                times.push((k + 1) as f64 * h);
                values.push(next.clone());
                y = next;
            }
            if let Some(tf) = truncate_to {
                let t = n_full as f64 * h;
                let h_last = tf - t;
                let next = if n_full < eta - 1 {
                    // horizon ends inside the bootstrap phase
                    step_baseline(boot_kind, problem, &y, t, n_full as u64, h_last)?
                } else {
                    // single truncated step: coefficients rebuilt on its width
                    let coeffs = EstimatorCoefficients::new(eta, h_last, *gain)?;
                    let factor = h_last / denominator.phi(h_last);
                    let rhs = problem.eval_rhs(&y, t, n_full as u64)?;
                    let mut next = vec![0.0; dim];
                    for i in 0..dim {
                        next[i] = step_euler_ansfd(&coeffs, &windows[i], rhs[i] * factor)?;
                    }
                    next
                };
                check_guard(&next, n_full + 1)?;
                times.push(tf);
                values.push(next);
            }
        }
        SchemeSpec::RkAnsfd { .. } => {
            let mut stepper = RkAnsfdStepper::from_spec(spec)?;
            let mut y = problem.y0().to_vec();
            for k in 0..n_full {
                y = stepper.step(problem, &y, k as f64 * h, k as u64, h)?;
                check_guard(&y, k + 1)?;
                times.push((k + 1) as f64 * h);
                values.push(y.clone());
            }
            if let Some(tf) = truncate_to {
                let t = n_full as f64 * h;
                y = stepper.step(problem, &y, t, n_full as u64, tf - t)?;
                check_guard(&y, n_full + 1)?;
                times.push(tf);
                values.push(y);
            }
            diagnostics.collapsed_spans = stepper.collapsed_spans();
        }
    }

    Ok(Trajectory {
        times,
        values,
        meta: RunMeta {
            problem: problem.name().to_string(),
            scheme: spec.to_string(),
            h,
            seed: spec.seed(),
            diagnostics,
        },
    })
}
