//! Numerical analysis of a predator-prey system living in a river habitat
//! with unidirectional flow.
//!
//! The library revolves around the scalar operator
//! `L[d,q,h] phi = d phi_xx - q phi_x + h(x) phi` on the unit interval with
//! a zero-flux condition `d phi_x(0) - q phi(0) = 0` at the upstream end and
//! `phi_x(1) = 0` downstream. Everything else is built from it:
//!
//! * [`profiles`] — spatial coefficient functions r(x), K(x) and the small
//!   expression grammar used to specify them;
//! * [`grid`] / [`operator`] — cell-centered finite-volume discretization;
//! * [`eigen`] — principal eigenvalues, Rayleigh quotients, and the
//!   indefinite-weight eigenvalue that controls invasion at zero flow;
//! * [`steady`] — logistic steady states of the prey alone and the washout
//!   flow speed above which it cannot persist;
//! * [`thresholds`] — predator mortality thresholds and the structural
//!   roots that organize the stability regions;
//! * [`stability`] — classification of the prey-only state against predator
//!   invasion, critical flow speeds, and (mu, q) region sweeps;
//! * [`dynamics`] — IMEX time integration used for nonlinear invasion
//!   experiments;
//! * [`scenario`] — the flat key=value scenario file format shared by the
//!   CLI tools;
//! * [`validate`] — the self-contained property suite run by `validate`.

pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod numeric;
pub mod operator;
pub mod profiles;
pub mod report;
pub mod scenario;
pub mod stability;
pub mod steady;
pub mod thresholds;
pub mod validate;

pub use error::{Error, Result};
pub use grid::Grid;
pub use operator::DiscreteOperator;
pub use profiles::{parse_profile, HypothesisReport, Profile};
