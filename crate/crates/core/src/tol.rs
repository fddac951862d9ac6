//! Numerical tolerances shared across the crate.

/// Relative residual allowed in the first-order conditions of a computed equilibrium.
pub const EQUILIBRIUM_RTOL: f64 = 1e-9;

/// Agreement expected between the closed form and the best-response oracle.
pub const ORACLE_RTOL: f64 = 1e-6;

/// A miner whose activity margin is within this relative band of zero is treated as inactive.
pub const BREAK_EVEN_RTOL: f64 = 1e-12;

/// Stop best-response iteration once the largest undamped step falls below this, relative to max h.
pub const FIXED_POINT_TOL: f64 = 1e-10;

pub const MAX_SWEEPS: usize = 100_000;

/// Floor for the damping factor of the best-response iteration.
pub const MIN_DAMPING: f64 = 1e-4;

/// Relative perturbation used to probe whether a state sits on a regime boundary.
pub const BOUNDARY_PROBE: f64 = 1e-8;

/// Floor in relative-error denominators.
pub const REL_ERR_FLOOR: f64 = 1e-12;

/// Relative band used to recognise a miner sitting exactly at break-even before investment.
pub const BREAK_EVEN_MEMBER_RTOL: f64 = 1e-9;
