//! Capacity and hyperbolicity analysis for warped-product model spaces.
//!
//! The crate decides p-hyperbolicity of comparison constellations, computes
//! drifted capacities of model annuli and bounds p-capacities of extrinsic
//! annuli. Every closed form is cross-checked by an independent route: a
//! direct minimisation of the discretised p-energy and finite-difference
//! residuals of the radial equation.

pub mod capacity;
pub mod classifier;
pub mod config;
pub mod constellation;
pub mod error;
pub mod expr;
pub mod model;
pub mod quadrature;
pub mod report;
pub mod special;
pub mod verify;

pub use capacity::{CapacityEstimate, CapacityMethod, CapacityOptions, PotentialTable};
pub use classifier::{classify, Mode, Verdict};
pub use config::{load_config, JobConfig, Task};
pub use constellation::{Annulus, BalanceCheck, Bounds, Constellation};
pub use error::{Error, Result};
pub use expr::{parse, RadialExpr};
pub use model::{ModelSpace, WarpingFunction};
pub use quadrature::{classify_tail, integrate, IntegralResult, TailVerdict};
pub use report::{run, RunOutput};
