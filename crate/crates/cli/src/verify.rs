//! Closed-form model against the master-equation oracle over a parameter grid.

use std::f64::consts::PI;

use optoweak::lindblad::{self, Diagnostics, IntegratorConfig};
use optoweak::{model, ModelParams, Tau};
use rayon::prelude::*;
use serde::Serialize;

use crate::MIN_REPORTED_PROB;

pub const DEFAULT_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_POINTS: usize = 50;
pub const DEFAULT_TAU_END: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Q,
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyPoint {
    pub k: f64,
    pub gamma: f64,
    pub theta: f64,
    pub tau: f64,
    pub quantity: Quantity,
    pub success_prob: f64,
    pub analytic: Option<f64>,
    pub oracle: Option<f64>,
    pub abs_diff: Option<f64>,
    /// Set when either engine failed here; such a point fails the report.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub points: Vec<VerifyPoint>,
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub compared: usize,
    pub errors: usize,
    pub integrator: IntegratorConfig,
    pub diagnostics: Diagnostics,
}

/// k = 0.005, γ ∈ {0, 0.005}, θ ∈ {0, ±0.001}.
pub fn default_grid() -> Vec<ModelParams> {
    let mut grid = Vec::new();
    for gamma in [0.0, 0.005] {
        for theta in [0.0, 0.001, -0.001] {
            grid.push(ModelParams::new(0.005, gamma, theta).expect("grid parameters are valid"));
        }
    }
    grid
}

/// `n` equally spaced times on `[0, end]`.
pub fn tau_grid(n: usize, end: f64) -> Vec<Tau> {
    (0..n).map(|i| Tau::new(if i + 1 == n { end } else { end * i as f64 / (n - 1).max(1) as f64 }).expect("finite grid")).collect()
}

fn base_point(params: &ModelParams, tau: f64, quantity: Quantity) -> VerifyPoint {
    VerifyPoint {
        k: params.k(),
        gamma: params.gamma(),
        theta: params.theta(),
        tau,
        quantity,
        success_prob: f64::NAN,
        analytic: None,
        oracle: None,
        abs_diff: None,
        error: None,
    }
}

fn quantities(params: &ModelParams) -> &'static [Quantity] {
    if params.gamma() == 0.0 {
        &[Quantity::Q, Quantity::P]
    } else {
        &[Quantity::Q]
    }
}

fn verify_params(params: &ModelParams, taus: &[Tau], config: &IntegratorConfig) -> (Vec<VerifyPoint>, Diagnostics) {
    let oracle = lindblad::oracle_sweep(params, taus, config);
    let mut points = Vec::new();
    for (i, &tau) in taus.iter().enumerate() {
        for &quantity in quantities(params) {
            let mut pt = base_point(params, tau.value(), quantity);
            let analytic_prob = model::conditioned_state(params, tau).map(|s| s.success_prob);
            match (&analytic_prob, &oracle) {
                (Err(e), _) => pt.error = Some(format!("analytic: {e}")),
                (_, Err(e)) => pt.error = Some(format!("oracle: {e}")),
                (Ok(prob), Ok(sweep)) => {
                    pt.success_prob = *prob;
                    if *prob > MIN_REPORTED_PROB {
                        let o = &sweep.points[i];
                        let analytic = match quantity {
                            Quantity::Q => model::mean_q(params, tau),
                            Quantity::P => model::mean_p(params, tau),
                        };
                        let oracle_value = match quantity {
                            Quantity::Q => o.q,
                            Quantity::P => o.p,
                        };
                        match (analytic, oracle_value) {
                            (Err(e), _) => pt.error = Some(format!("analytic: {e}")),
                            (_, None) => pt.error = Some(format!("oracle: dark port probability {:e}", o.success_prob)),
                            (Ok(a), Some(b)) => {
                                pt.analytic = Some(a);
                                pt.oracle = Some(b);
                                let d = (a - b).abs();
                                if d.is_finite() {
                                    pt.abs_diff = Some(d);
                                } else {
                                    pt.error = Some("non-finite difference".into());
                                }
                            }
                        }
                    }
                }
            }
            points.push(pt);
        }
    }
    let diagnostics = oracle.map(|s| s.diagnostics).unwrap_or_default();
    (points, diagnostics)
}

/// Compare at every grid point where the dark port fires with probability above 1e-12.
/// Passes when at least one point was compared, no point errored and the largest
/// difference is below `tolerance`.
pub fn verify(grid: &[ModelParams], taus: &[Tau], tolerance: f64, config: &IntegratorConfig) -> VerifyReport {
    let runs: Vec<(Vec<VerifyPoint>, Diagnostics)> = grid.par_iter().map(|p| verify_params(p, taus, config)).collect();
    let mut points = Vec::new();
    let mut diagnostics = Diagnostics::default();
    for (pts, diag) in runs {
        points.extend(pts);
        diagnostics.merge(&diag);
    }
    let compared = points.iter().filter(|p| p.abs_diff.is_some()).count();
    let errors = points.iter().filter(|p| p.error.is_some()).count();
    let max_abs_diff = points.iter().filter_map(|p| p.abs_diff).fold(0.0, f64::max);
    let pass = compared > 0 && errors == 0 && max_abs_diff < tolerance;
    VerifyReport { points, max_abs_diff, tolerance, pass, compared, errors, integrator: *config, diagnostics }
}

pub fn verify_default(tolerance: f64, config: &IntegratorConfig) -> VerifyReport {
    verify(&default_grid(), &tau_grid(DEFAULT_POINTS, DEFAULT_TAU_END), tolerance, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tolerance_fails_with_difference_reported() {
        let grid = [ModelParams::coupling(0.005).unwrap()];
        let cfg = IntegratorConfig::new(1e-2, 10).unwrap();
        let report = verify(&grid, &tau_grid(5, 2.0), 0.0, &cfg);
        assert!(!report.pass);
        assert!(report.compared > 0);
        assert!(report.max_abs_diff > 0.0 && report.max_abs_diff < 1e-6);
    }

    #[test]
    fn degenerate_start_is_skipped_not_failed() {
        let grid = [ModelParams::coupling(0.005).unwrap()];
        let report = verify(&grid, &tau_grid(3, 1.0), 1e-5, &IntegratorConfig::new(1e-2, 10).unwrap());
        assert!(report.pass);
        assert_eq!(report.points[0].abs_diff, None);
        assert_eq!(report.points[0].error, None);
        assert_eq!(report.compared, 4);
    }

    #[test]
    fn damped_grid_compares_position_only() {
        let grid = [ModelParams::new(0.005, 0.005, 0.001).unwrap()];
        let report = verify(&grid, &tau_grid(4, 3.0), 1e-5, &IntegratorConfig::new(1e-2, 10).unwrap());
        assert!(report.points.iter().all(|p| p.quantity == Quantity::Q));
        assert!(report.pass);
    }

    #[test]
    fn default_grid_shape() {
        assert_eq!(default_grid().len(), 6);
        let taus = tau_grid(DEFAULT_POINTS, DEFAULT_TAU_END);
        assert_eq!(taus.len(), 50);
        assert_eq!(taus[49].value(), 4.0 * PI);
    }
}
