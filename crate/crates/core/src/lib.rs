//! Varying coefficient Cox models fitted by group Lasso over an orthonormal
//! B-spline basis, with threshold-based structure selection and numerical
//! oracle diagnostics.

pub mod basis;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod likelihood;
pub mod linalg;
pub mod quadrature;
pub mod select;
pub mod solver;
pub mod survival;

#[cfg(test)]
pub(crate) mod testutil;

pub use basis::{OrthoBasis, RawBasis};
pub use config::{Command, DataSource, RunConfig};
pub use diagnostics::{oracle_check, ConeOptions, OracleReport, SlotSupport};
pub use error::{Error, Result};
pub use experiment::{Experiment, SimulationReport};
pub use likelihood::{expand_design, DesignExpansion, GroupCoefficients, GroupLayout};
pub use select::{extract_estimates, score_selection, threshold_select, Estimates, Grouping, SelectionResult, SelectionScores};
pub use solver::{fit, lambda_max, lambda_path, FitOptions, FitResult, PathGrid, PenaltyKind, PenaltySpec};
pub use survival::{Family, GFunction, SurvivalDataset, TruthSpec};
