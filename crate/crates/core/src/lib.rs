//! Gaussian-process classification and preference learning with the BALD
//! (Bayesian Active Learning by Disagreement) acquisition criterion.
//!
//! The crate is organised bottom-up:
//!
//! * [`math`]: binary entropy, probit, and the closed-form BALD terms.
//! * [`kernels`]: squared-exponential and preference-judgement covariances.
//! * [`gp`]: EP and Laplace approximations to the probit GP posterior.
//! * [`acquisition`]: pool scoring (BALD, MES, QBC, random) and selection.
//! * [`data`]: CSV ingestion, synthetic benchmarks, preference tasks.
//! * [`harness`]: the pool-based active-learning loop and its summaries.

pub mod acquisition;
pub mod data;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernels;
pub mod label;
pub mod math;
pub mod rng;

pub use error::{Error, Result};
pub use gp::{GaussianPosterior, InferenceMethod};
pub use kernels::{Covariance, KernelSpec, PreferencePair};
pub use label::Label;
pub use math::PredictiveMoments;
