//! Simulation and estimation for collections of inhomogeneous Poisson
//! processes observed with covariates.
//!
//! `n` independent processes share a time domain `T`; process `i` has
//! intensity `s(., x_i)` determined by a covariate `x_i`. The crate provides
//!
//! * exact simulation of such collections ([`simulate`]),
//! * the Hellinger-type geometry on intensities and on their square roots
//!   ([`geometry`]),
//! * robust pairwise tests between candidate square-root functions
//!   ([`testing`]),
//! * discretization nets with covering/cardinality guarantees ([`nets`]),
//! * and the tournament selector that turns a candidate collection plus one
//!   observation per process into an intensity estimate ([`selector`]).

pub mod domain;
pub mod error;
pub mod geometry;
pub mod nets;
pub mod poly;
pub mod quadrature;
pub mod selector;
pub mod simulate;
pub mod surface;
pub mod testing;

pub use domain::{CovariateSet, Partition, TimeDomain};
pub use error::{IpsError, Result};
pub use quadrature::QuadratureRule;
pub use surface::{EvalCtx, IntensitySurface, SqrtFunction, TimeLaw};
