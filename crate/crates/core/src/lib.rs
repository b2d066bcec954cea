//! Exact worst-case rates for fixed-stepsize gradient descent on smooth
//! strongly convex functions, together with the dual multiplier
//! certificates that prove them.
//!
//! The pipeline is
//! [`rates`] → [`nu`] → [`certificate`] / [`lambda`] → [`verifier`], with
//! [`gdlab`] providing concrete functions that attain the bounds and
//! [`cli`] tying everything to a command line.

pub mod certificate;
pub mod cli;
pub mod error;
pub mod format;
pub mod gdlab;
pub mod lambda;
pub mod nu;
pub mod psd;
pub mod rates;
pub mod verifier;

pub use error::{CertError, Result};
pub use rates::{Branch, EffectiveParameters, ExtReal, Moved, ProblemSpec, RateResult};
