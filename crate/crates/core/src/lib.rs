//! Averaged kernels built from a radial profile under random dilation and
//! random translation, the mollifications and maximal operators they induce,
//! and numerical checks of the sufficient conditions for their convergence.
//!
//! The pieces, bottom up:
//!
//! - [`profiles`]: radial profiles φ with `K(x) = φ(|x|)`, normalization and
//!   analytic hypothesis checks.
//! - [`randomness`]: joint laws of (scale, shift), families indexed by `j`,
//!   samplers and convergence diagnostics.
//! - [`kernels`]: the averaged kernel `K_j` and its special cases.
//! - [`transport`]: grid functions and the mollification `K_j * f`.
//! - [`maximal`]: the maximal operator, the centered Hardy–Littlewood maximal
//!   function, domination, weak-type and smoothness checks.

pub mod error;
pub mod kernels;
pub mod maximal;
pub mod mc;
pub mod profiles;
pub mod quad;
pub mod randomness;
pub mod report;
pub mod transport;

pub use error::{Error, Result};
pub use kernels::{AveragedKernel, Strategy};
pub use maximal::MaximalEstimate;
pub use mc::Estimate;
pub use profiles::{ball_volume, sphere_area, Profile, ProfileFlags, ProfileKind};
pub use randomness::{FamilyKind, FamilySpec, JointDistributionSpec, JointForm};
pub use report::{ConditionReport, Evidence, Verdict};
pub use transport::{GridFunction, MollifyPath, MollifyResult};
