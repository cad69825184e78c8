//! Nonstandard time-stepping schemes for first-order ODEs built on an
//! algebraic derivative estimator, with classical baselines and an
//! analysis harness.
//!
//! The estimator ([`estimator`]) reads a first derivative off a window
//! of `eta + 1` equally spaced samples through antisymmetric
//! trapezoidal weights; a calibrated gain makes it exact on linear
//! ramps, and the averaging gives it low-pass behavior on noisy data.
//! Two steppers ([`schemes`]) are built on it: a multi-step Euler-like
//! scheme over a moving window of past solution samples, and an
//! RK2-shaped scheme whose predicted slope is refined from a static
//! window of right-hand-side evaluations inside each step. The
//! [`analysis`] module measures error norms, observed convergence
//! order, stability thresholds, and noise-filtering variance; [`cli`]
//! drives everything from the `ansfd` binary.
//!
//! ```
//! use ansfd::problems;
//! use ansfd::schemes::{integrate, SchemeSpec};
//!
//! let problem = problems::dahlquist(-1.0);
//! let spec = SchemeSpec::parse("euler_ansfd:eta=3")?;
//! let traj = integrate(&problem, &spec, 0.01)?;
//! let final_value = traj.final_value()[0];
//! assert!((final_value - (-1.0f64).exp()).abs() < 5e-2);
//! # Ok::<(), ansfd::Error>(())
//! ```

pub mod analysis;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod problems;
pub mod schemes;

pub use error::{Error, Result};
