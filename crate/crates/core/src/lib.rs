// NaN inputs must fail the positivity checks, hence `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carousel;
pub mod combinatorics;
pub mod correlation;
pub mod coupling;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod linalg;
pub mod noise;
pub mod oracles;
pub mod parallel;
pub mod params;
pub mod quad;
pub mod sde;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
pub use noise::{generate_noise, NoisePath, NoiseStream};
pub use params::BetaParams;
pub use sde::{integrate_difference, integrate_family, DiffusionTrajectory};
