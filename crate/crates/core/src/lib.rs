//! Cramér-Rao bounds for blind channel estimation in redundant block
//! transmission systems (cyclic prefix, zero padding, or any full-rank linear
//! redundant precoder), together with a system simulator, a noise-subspace
//! estimator and a Monte Carlo harness that compares the two.

pub mod cli;
pub mod config;
pub mod crb_blind;
pub mod crb_core;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
