//! Numerical laboratory for finite-volume alloy-type Anderson models.
//!
//! The crate builds lattice Dirichlet Hamiltonians `H` and compactly
//! supported perturbations `H + τW`, and computes the objects needed to
//! study them: localized Schatten norms of `f(H) − f(H + τW)`, spectral
//! shift functions, the index of the pair of Fermi projections, and
//! ground-state overlap determinants, together with Monte Carlo disorder
//! averages and exponential-decay fits.
//!
//! The crate is `no_std` (it needs `alloc`); IO, threading and file formats
//! live in the `anderson-lab` companion crate.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod estimators;
pub mod exec;
pub mod funcalc;
pub mod identities;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod overlap;
pub mod shift;
pub mod spectral;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
