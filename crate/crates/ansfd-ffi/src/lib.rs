//! C ABI for the ansfd library.
//!
//! Conventions: every fallible call returns an [`AnsfdStatus`]; results
//! come back through out-pointers; heap objects are opaque handles with
//! matching `*_free` functions. A textual detail for the most recent
//! error on the calling thread is available via
//! [`ansfd_last_error_message`]. The C header is generated into
//! `include/ansfd.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ansfd::analysis;
use ansfd::error::Error;
use ansfd::estimator::{EstimatorCoefficients, GainMode, HistoryWindow};
use ansfd::problems::{self, OdeProblem};
use ansfd::schemes::{self, SchemeSpec, Trajectory};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnsfdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A numeric or structural argument was out of range.
    InvalidParameter = 3,
    /// The problem name did not resolve.
    UnknownProblem = 4,
    /// The scheme spec string did not parse.
    ParseError = 5,
    /// The integration exceeded the divergence guard.
    Divergence = 6,
    /// The sample window held too few samples.
    WindowUnderflow = 7,
    /// A stability bracket did not straddle the boundary.
    BadBracket = 8,
    /// A caller-supplied buffer was too small.
    BufferTooSmall = 9,
    /// An internal panic was caught at the boundary.
    InternalPanic = 10,
}

/// Gain selection for coefficient construction over the C ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnsfdGainMode {
    /// Exact-on-ramp closed form.
    Calibrated = 0,
    /// K = 1.
    Unit = 1,
    /// Use the explicit `manual_k` argument.
    Manual = 2,
}

impl AnsfdGainMode {
    fn to_gain(self, manual_k: f64) -> GainMode {
        match self {
            AnsfdGainMode::Calibrated => GainMode::Calibrated,
            AnsfdGainMode::Unit => GainMode::Unit,
            AnsfdGainMode::Manual => GainMode::Manual(manual_k),
        }
    }
}

/// Opaque handle: an initial-value problem from the catalog.
pub struct AnsfdProblem {
    inner: OdeProblem,
}

/// Opaque handle: a parsed scheme spec.
pub struct AnsfdScheme {
    inner: SchemeSpec,
}

/// Opaque handle: an integration result.
pub struct AnsfdTrajectory {
    inner: Trajectory,
}

/// Opaque handle: estimator coefficients plus their sample window.
pub struct AnsfdEstimator {
    coeffs: EstimatorCoefficients,
    window: HistoryWindow,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &Error) -> AnsfdStatus {
    remember_error(&err.to_string());
    match err {
        Error::InvalidParameter(_) => AnsfdStatus::InvalidParameter,
        Error::WindowUnderflow { .. } => AnsfdStatus::WindowUnderflow,
        Error::UnknownProblem { .. } => AnsfdStatus::UnknownProblem,
        Error::SchemeParse { .. } => AnsfdStatus::ParseError,
        Error::Divergence { .. } | Error::OrderDiverged { .. } => AnsfdStatus::Divergence,
        Error::BadBracket { .. } => AnsfdStatus::BadBracket,
        _ => AnsfdStatus::InvalidParameter,
    }
}

/// Runs a closure, converting panics into `InternalPanic`.
fn guarded(body: impl FnOnce() -> AnsfdStatus) -> AnsfdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            remember_error("internal panic caught at the C boundary");
            AnsfdStatus::InternalPanic
        }
    }
}

/// # Safety
/// `text` must be null or a valid nul-terminated string.
unsafe fn read_str<'a>(text: *const c_char) -> Result<&'a str, AnsfdStatus> {
    if text.is_null() {
        remember_error("null string argument");
        return Err(AnsfdStatus::NullPointer);
    }
    CStr::from_ptr(text).to_str().map_err(|_| {
        remember_error("string argument is not valid UTF-8");
        AnsfdStatus::InvalidUtf8
    })
}

fn write_out<T>(out: *mut T, value: T) -> AnsfdStatus {
    if out.is_null() {
        remember_error("null output pointer");
        return AnsfdStatus::NullPointer;
    }
    unsafe { out.write(value) };
    AnsfdStatus::Ok
}

/// Copies the most recent error message for this thread into `buf`
/// (truncating, always nul-terminated) and returns the full message
/// length in bytes, excluding the terminator. `buf` may be null to
/// query the length.
///
/// # Safety
/// `buf` must be null or point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ansfd_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static name of a status code (never null).
#[no_mangle]
pub extern "C" fn ansfd_status_name(status: AnsfdStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        AnsfdStatus::Ok => b"ok\0",
        AnsfdStatus::NullPointer => b"null pointer\0",
        AnsfdStatus::InvalidUtf8 => b"invalid utf-8\0",
        AnsfdStatus::InvalidParameter => b"invalid parameter\0",
        AnsfdStatus::UnknownProblem => b"unknown problem\0",
        AnsfdStatus::ParseError => b"parse error\0",
        AnsfdStatus::Divergence => b"divergence\0",
        AnsfdStatus::WindowUnderflow => b"window underflow\0",
        AnsfdStatus::BadBracket => b"bad bracket\0",
        AnsfdStatus::BufferTooSmall => b"buffer too small\0",
        AnsfdStatus::InternalPanic => b"internal panic\0",
    };
    name.as_ptr().cast()
}

/// Resolves a catalog problem name (e.g. `dahlquist:-1`).
///
/// # Safety
/// `name` must be a valid nul-terminated string; `out` must be a valid
/// pointer. On success `*out` owns a handle to release with
/// [`ansfd_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn ansfd_problem_lookup(
    name: *const c_char,
    out: *mut *mut AnsfdProblem,
) -> AnsfdStatus {
    guarded(AssertUnwindSafe(|| {
        let name = match read_str(name) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match problems::lookup(name) {
            Ok(problem) => {
                write_out(out, Box::into_raw(Box::new(AnsfdProblem { inner: problem })))
            }
            Err(err) => fail(&err),
        }
    }))
}

/// Reseeds any noisy input nodes of the problem.
///
/// # Safety
/// `problem` must be a live handle from [`ansfd_problem_lookup`].
#[no_mangle]
pub unsafe extern "C" fn ansfd_problem_set_seed(
    problem: *mut AnsfdProblem,
    seed: u64,
) -> AnsfdStatus {
    if problem.is_null() {
        remember_error("null problem handle");
        return AnsfdStatus::NullPointer;
    }
    let handle = &mut *problem;
    handle.inner = handle.inner.clone().with_seed(seed);
    AnsfdStatus::Ok
}

/// The problem's own horizon.
///
/// # Safety
/// `problem` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ansfd_problem_t_final(
    problem: *const AnsfdProblem,
    out: *mut f64,
) -> AnsfdStatus {
    if problem.is_null() {
        remember_error("null problem handle");
        return AnsfdStatus::NullPointer;
    }
    write_out(out, (*problem).inner.t_final())
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ansfd_problem_free(problem: *mut AnsfdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Parses a scheme spec string (see the CLI help for the grammar).
///
/// # Safety
/// `spec` must be a valid nul-terminated string; `out` must be valid.
/// On success `*out` owns a handle to release with [`ansfd_scheme_free`].
#[no_mangle]
pub unsafe extern "C" fn ansfd_scheme_parse(
    spec: *const c_char,
    out: *mut *mut AnsfdScheme,
) -> AnsfdStatus {
    guarded(AssertUnwindSafe(|| {
        let text = match read_str(spec) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match SchemeSpec::parse(text) {
            Ok(spec) => write_out(out, Box::into_raw(Box::new(AnsfdScheme { inner: spec }))),
            Err(err) => fail(&err),
        }
    }))
}

/// # Safety
/// `scheme` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ansfd_scheme_free(scheme: *mut AnsfdScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

unsafe fn integrate_impl(
    problem: *const AnsfdProblem,
    scheme: *const AnsfdScheme,
    h: f64,
    t_final: Option<f64>,
    out: *mut *mut AnsfdTrajectory,
) -> AnsfdStatus {
    if problem.is_null() || scheme.is_null() {
        remember_error("null problem or scheme handle");
        return AnsfdStatus::NullPointer;
    }
    let problem = &(*problem).inner;
    let spec = &(*scheme).inner;
    let result = match t_final {
        Some(tf) => schemes::integrate_to(problem, spec, h, tf),
        None => schemes::integrate(problem, spec, h),
    };
    match result {
        Ok(traj) => write_out(out, Box::into_raw(Box::new(AnsfdTrajectory { inner: traj }))),
        Err(err) => fail(&err),
    }
}

/// Integrates over the problem's own horizon.
///
/// # Safety
/// `problem` and `scheme` must be live handles; `out` must be valid. On
/// success `*out` owns a handle to release with
/// [`ansfd_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn ansfd_integrate(
    problem: *const AnsfdProblem,
    scheme: *const AnsfdScheme,
    h: f64,
    out: *mut *mut AnsfdTrajectory,
) -> AnsfdStatus {
    guarded(AssertUnwindSafe(|| integrate_impl(problem, scheme, h, None, out)))
}

/// Integrates to an explicit horizon (final step truncated to land on it).
///
/// # Safety
/// As for [`ansfd_integrate`].
#[no_mangle]
pub unsafe extern "C" fn ansfd_integrate_to(
    problem: *const AnsfdProblem,
    scheme: *const AnsfdScheme,
    h: f64,
    t_final: f64,
    out: *mut *mut AnsfdTrajectory,
) -> AnsfdStatus {
    guarded(AssertUnwindSafe(|| integrate_impl(problem, scheme, h, Some(t_final), out)))
}

/// Number of samples (including the initial condition); 0 for null.
///
/// # Safety
/// `trajectory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ansfd_trajectory_len(trajectory: *const AnsfdTrajectory) -> usize {
    if trajectory.is_null() {
        return 0;
    }
    (*trajectory).inner.len()
}

/// State dimension; 0 for null.
///
/// # Safety
/// `trajectory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ansfd_trajectory_dim(trajectory: *const AnsfdTrajectory) -> usize {
    if trajectory.is_null() {
        return 0;
    }
    (*trajectory).inner.dim()
}

/// Copies the time grid into `buf`.
///
/// # Safety
/// `trajectory` must be a live handle and `buf` must point to at least
/// `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ansfd_trajectory_times(
    trajectory: *const AnsfdTrajectory,
    buf: *mut f64,
    cap: usize,
) -> AnsfdStatus {
    if trajectory.is_null() || buf.is_null() {
        remember_error("null trajectory handle or buffer");
        return AnsfdStatus::NullPointer;
    }
    let times = &(*trajectory).inner.times;
    if cap < times.len() {
        remember_error("times buffer too small");
        return AnsfdStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(times.as_ptr(), buf, times.len());
    AnsfdStatus::Ok
}

/// Copies one solution component across all samples into `buf`.
///
/// # Safety
/// `trajectory` must be a live handle and `buf` must point to at least
/// `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ansfd_trajectory_component(
    trajectory: *const AnsfdTrajectory,
    component: usize,
    buf: *mut f64,
    cap: usize,
) -> AnsfdStatus {
    if trajectory.is_null() || buf.is_null() {
        remember_error("null trajectory handle or buffer");
        return AnsfdStatus::NullPointer;
    }
    let traj = &(*trajectory).inner;
    if component >= traj.dim() {
        remember_error("component index out of range");
        return AnsfdStatus::InvalidParameter;
    }
    if cap < traj.len() {
        remember_error("component buffer too small");
        return AnsfdStatus::BufferTooSmall;
    }
    for (i, sample) in traj.values.iter().enumerate() {
        *buf.add(i) = sample[component];
    }
    AnsfdStatus::Ok
}

/// # Safety
/// `trajectory` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ansfd_trajectory_free(trajectory: *mut AnsfdTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// The exact-on-ramp gain `eta^2 / (eta^2 + 2)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ansfd_calibrated_gain(eta: usize, out: *mut f64) -> AnsfdStatus {
    if eta == 0 {
        remember_error("eta must be >= 1");
        return AnsfdStatus::InvalidParameter;
    }
    write_out(out, ansfd::estimator::calibrated_gain(eta))
}

/// Fills `buf` with the `eta + 1` window weights (oldest sample first)
/// and stores the multiplying scale in `scale_out` when non-null.
///
/// # Safety
/// `buf` must point to at least `cap` doubles; `scale_out` must be null
/// or valid.
#[no_mangle]
pub unsafe extern "C" fn ansfd_weights(
    eta: usize,
    h: f64,
    gain_mode: AnsfdGainMode,
    manual_k: f64,
    buf: *mut f64,
    cap: usize,
    scale_out: *mut f64,
) -> AnsfdStatus {
    guarded(AssertUnwindSafe(|| {
        if buf.is_null() {
            remember_error("null weight buffer");
            return AnsfdStatus::NullPointer;
        }
        let coeffs = match EstimatorCoefficients::new(eta, h, gain_mode.to_gain(manual_k)) {
            Ok(c) => c,
            Err(err) => return fail(&err),
        };
        let weights = coeffs.raw_weights();
        if cap < weights.len() {
            remember_error("weight buffer too small");
            return AnsfdStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(weights.as_ptr(), buf, weights.len());
        if !scale_out.is_null() {
            scale_out.write(coeffs.scale());
        }
        AnsfdStatus::Ok
    }))
}

/// Creates an estimator handle: coefficients for `(eta, h)` plus an
/// empty window of `eta + 1` samples.
///
/// # Safety
/// `out` must be valid. On success `*out` owns a handle to release with
/// [`ansfd_estimator_free`].
#[no_mangle]
pub unsafe extern "C" fn ansfd_estimator_new(
    eta: usize,
    h: f64,
    gain_mode: AnsfdGainMode,
    manual_k: f64,
    out: *mut *mut AnsfdEstimator,
) -> AnsfdStatus {
    guarded(AssertUnwindSafe(|| {
        match EstimatorCoefficients::new(eta, h, gain_mode.to_gain(manual_k)) {
            Ok(coeffs) => {
                let window = HistoryWindow::new(eta + 1);
                write_out(out, Box::into_raw(Box::new(AnsfdEstimator { coeffs, window })))
            }
            Err(err) => fail(&err),
        }
    }))
}

/// Appends a sample, evicting the oldest once the window is full.
///
/// # Safety
/// `estimator` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ansfd_estimator_push(
    estimator: *mut AnsfdEstimator,
    sample: f64,
) -> AnsfdStatus {
    if estimator.is_null() {
        remember_error("null estimator handle");
        return AnsfdStatus::NullPointer;
    }
    (*estimator).window.push(sample);
    AnsfdStatus::Ok
}

/// Whether the window holds its full `eta + 1` samples.
///
/// # Safety
/// `estimator` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ansfd_estimator_is_full(estimator: *const AnsfdEstimator) -> bool {
    !estimator.is_null() && (*estimator).window.is_full()
}

/// Slope estimate at the newest sample of a full window.
///
/// # Safety
/// `estimator` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ansfd_estimator_slope(
    estimator: *const AnsfdEstimator,
    out: *mut f64,
) -> AnsfdStatus {
    if estimator.is_null() {
        remember_error("null estimator handle");
        return AnsfdStatus::NullPointer;
    }
    let handle = &*estimator;
    match handle.coeffs.estimate_slope(&handle.window) {
        Ok(slope) => write_out(out, slope),
        Err(err) => fail(&err),
    }
}

/// # Safety
/// `estimator` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ansfd_estimator_free(estimator: *mut AnsfdEstimator) {
    if !estimator.is_null() {
        drop(Box::from_raw(estimator));
    }
}

/// Bisects the largest stable step for the scheme on `y' = lambda*y`
/// over `n_steps`-step runs, between a stable `lo` and an unstable `hi`.
///
/// # Safety
/// `scheme` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ansfd_stability_threshold(
    scheme: *const AnsfdScheme,
    lambda: f64,
    n_steps: usize,
    lo: f64,
    hi: f64,
    out: *mut f64,
) -> AnsfdStatus {
    guarded(AssertUnwindSafe(|| {
        if scheme.is_null() {
            remember_error("null scheme handle");
            return AnsfdStatus::NullPointer;
        }
        match analysis::stability_threshold(&(*scheme).inner, lambda, n_steps, (lo, hi)) {
            Ok(h_max) => write_out(out, h_max),
            Err(err) => fail(&err),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { ansfd_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&b| b as u8).collect();
        String::from_utf8(bytes).unwrap()
    }

    #[test]
    fn integrate_through_the_c_surface_matches_the_library() {
        unsafe {
            let mut problem = ptr::null_mut();
            let name = cstr("dahlquist:-1");
            assert_eq!(ansfd_problem_lookup(name.as_ptr(), &mut problem), AnsfdStatus::Ok);
            let mut scheme = ptr::null_mut();
            let spec = cstr("explicit_euler");
            assert_eq!(ansfd_scheme_parse(spec.as_ptr(), &mut scheme), AnsfdStatus::Ok);

            let mut traj = ptr::null_mut();
            assert_eq!(ansfd_integrate(problem, scheme, 0.1, &mut traj), AnsfdStatus::Ok);
            let len = ansfd_trajectory_len(traj);
            assert_eq!(len, 11);
            assert_eq!(ansfd_trajectory_dim(traj), 1);
            let mut times = vec![0.0; len];
            let mut values = vec![0.0; len];
            assert_eq!(ansfd_trajectory_times(traj, times.as_mut_ptr(), len), AnsfdStatus::Ok);
            assert_eq!(
                ansfd_trajectory_component(traj, 0, values.as_mut_ptr(), len),
                AnsfdStatus::Ok
            );

            let direct = schemes::integrate(
                &problems::lookup("dahlquist:-1").unwrap(),
                &SchemeSpec::ExplicitEuler,
                0.1,
            )
            .unwrap();
            assert_eq!(times, direct.times);
            assert_eq!(values, direct.component(0));

            // undersized buffer is reported, not written past
            let mut small = [0.0; 3];
            assert_eq!(
                ansfd_trajectory_times(traj, small.as_mut_ptr(), small.len()),
                AnsfdStatus::BufferTooSmall
            );

            ansfd_trajectory_free(traj);
            ansfd_scheme_free(scheme);
            ansfd_problem_free(problem);
        }
    }

    #[test]
    fn error_paths_set_status_and_message() {
        unsafe {
            let mut problem = ptr::null_mut();
            let name = cstr("nosuch");
            assert_eq!(
                ansfd_problem_lookup(name.as_ptr(), &mut problem),
                AnsfdStatus::UnknownProblem
            );
            assert!(last_error().contains("dahlquist"), "{}", last_error());

            let mut scheme = ptr::null_mut();
            let bad = cstr("euler_ansfd:eta=0");
            assert_eq!(ansfd_scheme_parse(bad.as_ptr(), &mut scheme), AnsfdStatus::ParseError);

            assert_eq!(
                ansfd_problem_lookup(ptr::null(), &mut problem),
                AnsfdStatus::NullPointer
            );

            // divergence surfaces its status
            let name = cstr("dahlquist:-1");
            assert_eq!(ansfd_problem_lookup(name.as_ptr(), &mut problem), AnsfdStatus::Ok);
            let spec = cstr("explicit_euler");
            assert_eq!(ansfd_scheme_parse(spec.as_ptr(), &mut scheme), AnsfdStatus::Ok);
            let mut traj = ptr::null_mut();
            assert_eq!(
                ansfd_integrate_to(problem, scheme, 3.0, 300.0, &mut traj),
                AnsfdStatus::Divergence
            );
            assert!(last_error().contains("step 40"), "{}", last_error());
            ansfd_scheme_free(scheme);
            ansfd_problem_free(problem);
        }
    }

    #[test]
    fn estimator_handle_reports_ramp_slope() {
        unsafe {
            let mut est = ptr::null_mut();
            assert_eq!(
                ansfd_estimator_new(3, 0.1, AnsfdGainMode::Calibrated, 0.0, &mut est),
                AnsfdStatus::Ok
            );
            let mut slope = 0.0;
            assert_eq!(ansfd_estimator_slope(est, &mut slope), AnsfdStatus::WindowUnderflow);
            for j in 0..=3 {
                assert_eq!(ansfd_estimator_push(est, j as f64 * 0.1), AnsfdStatus::Ok);
            }
            assert!(ansfd_estimator_is_full(est));
            assert_eq!(ansfd_estimator_slope(est, &mut slope), AnsfdStatus::Ok);
            assert!((slope - 1.0).abs() <= 1e-12, "{slope}");
            ansfd_estimator_free(est);
        }
    }

    #[test]
    fn weights_and_gain_round_trip() {
        unsafe {
            let mut gain = 0.0;
            assert_eq!(ansfd_calibrated_gain(3, &mut gain), AnsfdStatus::Ok);
            assert!((gain - 9.0 / 11.0).abs() < 1e-15);
            assert_eq!(ansfd_calibrated_gain(0, &mut gain), AnsfdStatus::InvalidParameter);

            let mut buf = [0.0; 4];
            let mut scale = 0.0;
            assert_eq!(
                ansfd_weights(3, 1.0, AnsfdGainMode::Unit, 0.0, buf.as_mut_ptr(), 4, &mut scale),
                AnsfdStatus::Ok
            );
            assert_eq!(buf, [3.0, 2.0, -2.0, -3.0]);
            assert!((scale + 1.0 / 9.0).abs() < 1e-15);
            assert_eq!(
                ansfd_weights(3, 1.0, AnsfdGainMode::Unit, 0.0, buf.as_mut_ptr(), 2, &mut scale),
                AnsfdStatus::BufferTooSmall
            );
        }
    }

    #[test]
    fn stability_threshold_over_the_c_surface() {
        unsafe {
            let mut scheme = ptr::null_mut();
            let spec = cstr("explicit_euler");
            assert_eq!(ansfd_scheme_parse(spec.as_ptr(), &mut scheme), AnsfdStatus::Ok);
            let mut h_max = 0.0;
            assert_eq!(
                ansfd_stability_threshold(scheme, -1.0, 400, 1.0, 3.0, &mut h_max),
                AnsfdStatus::Ok
            );
            assert!((h_max - 2.0).abs() <= 5e-3, "{h_max}");
            assert_eq!(
                ansfd_stability_threshold(scheme, -1.0, 400, 0.1, 0.5, &mut h_max),
                AnsfdStatus::BadBracket
            );
            ansfd_scheme_free(scheme);
        }
    }

    #[test]
    fn status_names_are_nul_terminated_statics() {
        for status in [AnsfdStatus::Ok, AnsfdStatus::Divergence, AnsfdStatus::InternalPanic] {
            let name = ansfd_status_name(status);
            assert!(!name.is_null());
            let text = unsafe { CStr::from_ptr(name) }.to_str().unwrap();
            assert!(!text.is_empty());
        }
    }

    #[test]
    fn generated_header_declares_the_surface() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ansfd.h");
        let text = std::fs::read_to_string(&header).expect("header generated at build time");
        for symbol in [
            "AnsfdStatus",
            "ansfd_problem_lookup",
            "ansfd_scheme_parse",
            "ansfd_integrate",
            "ansfd_trajectory_component",
            "ansfd_estimator_slope",
            "ansfd_stability_threshold",
            "ansfd_last_error_message",
        ] {
            assert!(text.contains(symbol), "header missing {symbol}");
        }
    }

    /// Compile the generated header as C when a compiler is around.
    #[test]
    fn generated_header_is_valid_c() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ansfd.h");
        let compiler = ["cc", "clang", "gcc"].into_iter().find(|c| {
            std::process::Command::new(c)
                .arg("--version")
                .output()
                .map(|o| o.status.success())
                .unwrap_or(false)
        });
        let Some(compiler) = compiler else {
            eprintln!("no C compiler found; skipping syntax check");
            return;
        };
        let status = std::process::Command::new(compiler)
            .args(["-fsyntax-only", "-x", "c"])
            .arg(&header)
            .status()
            .unwrap();
        assert!(status.success(), "header does not compile as C");
    }
}
