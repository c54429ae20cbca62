//! Rank-one spiked matrix estimation under quartic rotationally invariant noise.
//!
//! The crate covers the full pipeline: spectral objects of the quartic ensemble,
//! instance generation, scalar priors, replica and state-evolution fixed points,
//! and the finite-N algorithms (baseline AMP, BAMP, spectral PCA, EM learning).
//!
//! Heavy loops go through [`exec::Exec`], which runs on rayon when the
//! `parallel` feature is enabled and sequentially otherwise. Both paths produce
//! bitwise-identical results.

pub mod amp;
pub mod error;
pub mod exec;
mod fixed;
pub mod linalg;
pub mod priors;
pub mod quad;
pub mod replica;
pub mod sampling;
pub mod se;
pub mod spectrum;

pub use error::{Error, Result};
