//! Iterated random walks and the populations they generate.
//!
//! The crate is organised by subsystem:
//!
//! - [`dist`]: inter-arrival laws (lattice and smooth), exact moments and
//!   reproducible per-replica random streams.
//! - [`renewal`]: exact lattice renewal calculus (`V`, `U = V + 1`, the
//!   k-fold Stieltjes convolutions `V_k`, perturbed variants) and the
//!   closed-form asymptotic constants.
//! - [`cmj`]: Crump–Mode–Jagers simulation of generation counts `Y_k(t)`,
//!   normalized statistics and Monte Carlo ensembles.
//! - [`rrt`]: random recursive trees grown discretely or through the Yule
//!   embedding, with profile tracking and exact enumeration.
//! - [`gauss`]: discretized Brownian paths and the weighted integrals that
//!   carry the dominant fluctuation of `Y_k`.

pub mod cmj;
pub mod dist;
mod error;
pub mod gauss;
pub mod parallel;
pub mod renewal;
pub mod rrt;
pub mod stats;

pub use error::{Error, Result};
