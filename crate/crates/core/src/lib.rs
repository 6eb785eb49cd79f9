//! Reflected delay equations driven by fractional Brownian motion.
//!
//! The crate covers the full numerical pipeline for one-dimensional delay
//! equations with normal reflection at zero and Hurst index `H > 1/2`:
//!
//! * [`fbm`]: exact fBm sampling from a cached Cholesky factor, the
//!   Molchan kernel `K_H` and the Cameron–Martin lift.
//! * [`fraccalc`]: Hölder and fractional Sobolev norms, Weyl fractional
//!   derivatives, Young sums and the fractional-derivative representation
//!   of the Riemann–Stieltjes integral.
//! * [`skorokhod`]: the one-sided Skorokhod map.
//! * [`solver`]: the unreflected ODE, the penalized and reflected schemes
//!   (stepped one delay interval at a time) and the comparison bounds.
//! * [`malliavin`]: pathwise derivative fields `D_s X_t`.
//! * [`density`]: Monte Carlo ensembles and density diagnostics.

pub mod density;
pub mod error;
pub mod exec;
pub mod fbm;
pub mod fraccalc;
pub mod grid;
pub mod malliavin;
pub mod model;
pub mod skorokhod;
pub mod solver;

mod quad;

pub use error::{Error, Result};
pub use fbm::{DriverPath, FbmSampler, HurstParam};
pub use grid::TimeGrid;
pub use model::{CoefficientFn, InitialPath, ModelSpec};
pub use solver::{PenaltySpec, SolutionBundle};
