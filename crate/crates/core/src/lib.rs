//! Planar orthogonal polynomials, determinantal correlation kernels and
//! exact sampling for random normal matrix ensembles with a lemniscate
//! droplet and an inserted point charge.

// `!(x > 0.0)` is used deliberately so that NaN is rejected; index loops
// mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cdi;
pub mod dd;
pub mod droplet;
pub mod error;
pub mod export;
pub mod kernels;
pub mod limits;
pub mod linalg;
pub mod orthopoly;
pub mod params;
pub mod quadrature;
pub mod sampler;
pub mod specfun;
pub mod sum;

pub use error::{Error, Result};
pub use kernels::{Convention, DensityProfile, KernelHandle, Rescaling};
pub use num_complex::Complex64;
pub use orthopoly::{ConstructionTag, GramMatrix, OPBasis};
pub use params::EnsembleParams;
