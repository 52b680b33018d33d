//! Numerics for densities of compound Poisson and infinitely divisible
//! distributions driven by their Levy densities.
//!
//! The crate covers four pipelines:
//!
//! - convolution algebra on grid densities, the compound Poisson series and
//!   its logarithmic inverse ([`conv`]);
//! - Levy-Khintchine characteristic functions, Fourier inversion, fractional
//!   convolution powers and exponential tilting ([`charfn`]);
//! - numerical verdicts for heavy-tail properties of densities: long-tailed,
//!   subexponential, a.n.i./al.d., tail equivalence, convolution-root and
//!   Steutel ratios ([`diagnostics`]), plus the two-sided compound Poisson
//!   counterexample whose absolutely continuous part fails subexponentiality
//!   ([`counterexample`]);
//! - simulation and maximum likelihood for these laws, with a consistency
//!   experiment ([`mle`]).

pub mod charfn;
pub mod conv;
pub mod counterexample;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod levy;
pub mod mle;
pub mod model;
pub mod quad;

pub use error::{Error, Result};
pub use grid::{GeneralizedDensity, GridFunction, GridParams, TailKind};
pub use levy::{JumpDensitySpec, JumpFamily, LevyTriplet};
