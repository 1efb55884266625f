//! Collaborative, explainable Bayesian optimization.
//!
//! A human expert and a Gaussian-process optimizer take turns: each iteration
//! proposes two candidates, one from plain UCB and one from UCB combined with a
//! learned preference belief, explains both with Shapley attributions, and
//! learns from the expert's pick.

pub mod acquisition;
pub mod engine;
pub mod error;
pub mod explain;
pub mod gp;
pub mod linalg;
pub mod optim;
pub mod oracle;
pub mod pref;
pub mod rng;
pub mod sobol;

pub use error::{Error, Result};
pub use gp::{fit_gp, rbf_kernel, Dataset, Domain, GpModel, KernelParams};
