//! Joint modeling of longitudinal prostate-cancer biomarkers and competing
//! time-to-event outcomes under interval censoring, with everything needed to
//! run the model end to end:
//!
//! - [`spline`]: natural cubic spline and B-spline design rows, quantile knot
//!   selection, and difference-penalty matrices.
//! - [`quad`]: fixed 15-point quadrature panels.
//! - [`data`]: patient records, event windows, dataset validation, and
//!   train/test splitting.
//! - [`model`]: model parameters, random effects, and the model specification
//!   (variant, knots, penalty, prior constants).
//! - [`likelihood`]: longitudinal densities, cause-specific hazards with a
//!   penalized B-spline baseline, cumulative hazards, the three-branch
//!   interval-censored survival likelihood, and priors.
//! - [`mcmc`]: adaptive Metropolis-within-Gibbs estimation with conjugate
//!   updates and convergence diagnostics.
//! - [`predict`]: posterior sampling of subject random effects and dynamic
//!   progression-risk curves.
//! - [`schedule`]: risk-threshold biopsy scheduling, expected number of
//!   biopsies / detection delay, and threshold optimization.
//! - [`simulate`]: synthetic active-surveillance cohorts from the built-in
//!   generating parameters.
//! - [`evaluate`]: Aalen-Johansen incidence, prediction-error study, fixed
//!   versus personalized schedule comparison, and hazard-ratio effect curves.
//!
//! The crate is `no_std` (alloc required); all file formats and the command
//! line interface live in the companion `icjm-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod evaluate;
pub mod likelihood;
pub mod mcmc;
pub mod model;
pub mod predict;
pub mod quad;
pub mod rng;
pub mod schedule;
pub mod simulate;
pub mod spline;
pub mod stats;

pub use data::{Dataset, EventKind, EventRecord, PatientRecord};
pub use model::{Cause, ModelParameters, ModelSpec, RandomEffects, Variant};
