//! Sweeps, figure presets, verification reports and their CSV/SVG/JSON output.

pub mod export;
pub mod figures;
pub mod sweep;
pub mod verify;

/// Below this dark-port probability conditional observables are left blank.
pub const MIN_REPORTED_PROB: f64 = 1e-12;
