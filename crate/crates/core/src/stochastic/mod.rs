//! Brute-force Monte-Carlo oracle for the averaged dynamics.
//!
//! Field realisations are sampled on a uniform grid, each one drives the
//! per-realisation equations of motion, and the ensemble mean is compared
//! with the closed forms of [`crate::dynamics`].

mod ensemble;
mod field;
mod spectrum;
mod trajectory;

pub use ensemble::{
    ensemble_average, ensemble_average_with, trajectory_seed, BandCheck, EnsembleOptions, EnsembleReport,
};
pub use field::{max_field_step, sample_field, FieldRealization};
pub use spectrum::{estimate_spectrum, fit_lorentzian, LorentzianFit, SpectrumEstimate};
pub use trajectory::{simulate_trajectory, simulate_trajectory_with, Trajectory, TrajectoryState, DIVERGENCE_LIMIT};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("time step {dt} exceeds the limit {limit} set by the field bandwidth")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("field grid ends at t = {available}, horizon {requested} requested")]
    HorizonNotCovered { requested: f64, available: f64 },
    #[error("trajectory with seed {seed} diverged at t = {t}: m = {m}, mdot = {mdot}, w = {w}")]
    Diverged { seed: u64, t: f64, m: f64, mdot: f64, w: f64 },
    #[error("spectrum estimation needs at least two realisations on a common grid")]
    NotEnoughRealizations,
    #[error("realisations do not share a grid")]
    GridMismatch,
    #[error("Lorentzian fit did not converge: {0}")]
    FitDidNotConverge(String),
}
