//! The spatially integrated master equation, closed-form oracles, the
//! Gaussian-smoothing transfer check and the comparison metrics that tie
//! the solution routes together.

mod cme;
mod compare;
mod oracles;
mod stats;
mod transfer;

pub use cme::{cme_generator, cme_stationary, CmeSystem};
pub use compare::{
    compare_generators, compare_max_abs, compare_number_laws, compare_z_scores, total_variation,
    CompareOptions, ComparisonReport, ComponentResult, ReportSuite,
};
pub use oracles::{
    creation_only_intensity, creation_only_law, intensity_bin_averages, reflected_heat_cdf,
};
pub use stats::{chi_square_pvalue, ks_pvalue, ks_statistic, ks_test};
pub use transfer::{
    gauss_hermite, hermite_he, uniform_grid, weierstrass_transfer_check, weierstrass_transform,
    GAUSS_HERMITE_NODES, TRANSFER_MAX_DEGREE,
};
