//! Viscosity min-max on finite-dimensional discretizations.
//!
//! A functional `F` is regularized to `F_σ = F + σ²G`. Widths `β(σ)` are
//! estimated by tightening sweepouts, `σ` values satisfying the entropy
//! condition are selected from the width curve, near-critical points are
//! localized and refined, and Morse indices are certified against the family
//! dimension, using perturbation for degenerate points and sweepout surgery
//! for over-indexed ones.

pub mod acceptance;
pub mod config;
pub mod critical;
pub mod deform;
pub mod entropy;
pub mod error;
pub mod functionals;
pub mod io;
pub mod model;
pub mod perturb;
pub mod pipeline;
pub mod sweepout;

pub use error::{Error, Result};
pub use model::{
    entropy_bound, entropy_residual, evaluate_viscous, grad_check, hessian_check, EntropyForm,
    Functional, FunctionalHandle, Matrix, Point, SigmaFamily, ToleranceProfile, Vector,
    ViscousFamily,
};
