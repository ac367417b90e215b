//! Exact computation and simulation for random walks on weighted fractal
//! networks.
//!
//! The crate is organised around a finite rooted measured network
//! ([`network::ResistanceNetwork`]):
//!
//! - [`network`] builds paths, random networks and level-n graphs of
//!   finitely ramified fractals (gasket, Vicsek set, carpet).
//! - [`resistance`] computes effective resistances, Schur-complement traces,
//!   Green functions, resolvent densities, heat kernels and commute times.
//! - [`simulate`] runs exact event-driven walks, extracts local times and
//!   performs time changes by additive functionals.
//! - [`environments`] samples random conductances, trap landscapes, Gaussian
//!   free fields, Liouville measures and Poisson (FIN) measures.
//! - [`homogenize`] implements the conductance-matrix renormalization map,
//!   its fixed point, harmonic matrices and random iterates.
//! - [`metrics`] has Hausdorff/Prohorov distances in a common embedding,
//!   volume profiles, KS distances and local-time moduli.
//! - [`harness`] runs the scaling experiments and writes reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod environments;
pub mod error;
pub mod harness;
pub mod homogenize;
pub mod metrics;
pub mod network;
pub mod resistance;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use network::ResistanceNetwork;
