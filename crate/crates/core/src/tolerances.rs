//! Pass/fail tolerances shared by the harness and the acceptance suite.

/// Absolute slack on box-dimension proxies.
pub const DIMENSION_TOL: f64 = 0.15;
/// Absolute slack on grid box proxies of exceptional parameter sets.
pub const SURVEY_TOL: f64 = 0.2;
/// Estimator calibration on a uniform planar sample.
pub const UNIFORM_CALIBRATION_TOL: f64 = 0.10;
/// Estimator calibration on the middle-thirds Cantor set.
pub const CANTOR_CALIBRATION_TOL: f64 = 0.05;
/// Exact algebra and metric identities in double precision.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Closed-form bound evaluation.
pub const BOUND_TOL: f64 = 1e-12;
/// Largest admissible Frostman constant.
pub const FROSTMAN_C_MAX: f64 = 4.0;
/// `max/min` of the critical per-level norms.
pub const LEVEL_NORM_WINDOW: f64 = 8.0;
/// `max/min` of `N(r)·r^s` in a regularity table.
pub const REGULARITY_WINDOW: f64 = 4.0;
/// Largest recorded comparability constant for coset distances.
pub const GRUSHIN_C1_MAX: f64 = 10.0;
/// Two-sided carpet mass window `[1/C, C]` on `ν(B)/r²`.
pub const CARPET_AHLFORS_C: f64 = 32.0;
/// Agreement of the two quotient-distance anchorings.
pub const QUOTIENT_ANCHOR_TOL: f64 = 1e-6;
