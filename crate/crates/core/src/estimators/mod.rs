//! Maximum-likelihood localizers: ACO (unknown noise covariance) and CO-WGN
//! (white noise), both driven by cyclic coarse-to-fine grid search.

pub mod grid;
pub mod localize;
pub mod objective;

pub use grid::{refine_search, GridSchedule, SearchOutcome, SearchRegion};
pub use localize::{
    assign_targets, localize, EstimateResult, LocalizeOptions, NoiseEstimate, TraceEntry, DEFAULT_EPSILON, MAX_SWEEPS,
};
pub use objective::{
    aml_coefficients, concentrated_nll_aco, concentrated_nll_wgn, steering_matrices, wgn_coefficients, wgn_system, AcoValue,
    Column, Criterion, Objective, WgnValue, PERFECT_FIT_TOL,
};
