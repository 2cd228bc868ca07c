//! Non-Markovianity of a classically driven two-level dipole.
//!
//! A dipole couples to a stochastic field with a damped-cosine correlation
//! function. The crate provides:
//!
//! - [`model`]: physical parameters, derived constants, reduced units;
//! - [`dynamics`]: ensemble-averaged Bloch vector, purity, trace distance;
//! - [`blp`]: information backflow and its maximisation over state pairs;
//! - [`stochastic`]: field sampling, trajectory integration, Monte-Carlo
//!   ensembles and spectral estimation;
//! - [`config`] and [`output`]: parameter files and CSV/JSON writers.
//!
//! ```
//! use dipole_backflow::blp::{n_measure, BranchKind};
//! use dipole_backflow::dynamics::FormulaSource;
//! use dipole_backflow::model::DimensionlessConfig;
//!
//! let cfg = DimensionlessConfig::reduced(0.1, 8.0, 5.0);
//! let n = n_measure(&cfg, FormulaSource::Derived, 17).unwrap();
//! assert_eq!(n.best.winning_branch, BranchKind::OmegaBranch);
//! assert!((n.best.n_value - 12.667).abs() < 1e-3);
//! ```

pub mod blp;
pub mod config;
pub mod dynamics;
pub mod model;
pub mod output;
pub mod quadrature;
pub mod stochastic;

pub use blp::{BackflowResult, BranchKind, NonMarkovianity};
pub use dynamics::{BlochState, FormulaSource, InitialCondition, StatePair};
pub use model::{DerivedParams, DimensionlessConfig, SystemParams};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/dynamics.md")]
    struct Dynamics;
    #[doc = include_str!("../../../book/src/backflow.md")]
    struct Backflow;
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    struct MonteCarlo;
}
