//! Random interlacements on Z^d.
//!
//! Exact Green function and equilibrium measures, a Poisson sampler for the
//! trace of the interlacement on finite windows, vacant-set analysis, the
//! renormalisation bookkeeping and an experiment harness.

pub mod bessel;
pub mod error;
pub mod green;
pub mod lattice;
pub mod levels;

pub use error::{Error, Result};
pub use green::GreenEvaluator;
pub use lattice::{Adjacency, LatticePoint, SiteSet, Window};
pub mod harness;
pub mod interlacement;
pub mod potential;
pub mod renorm;
pub mod rng;
pub mod sample_io;
pub mod stats;
pub mod tree;
pub mod vacant;
pub mod walk;
