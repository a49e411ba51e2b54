//! τ sweeps through the closed-form model and/or the master-equation oracle.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use optoweak::lindblad::{self, IntegratorConfig};
use optoweak::{model, ModelParams, Tau};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::MIN_REPORTED_PROB;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    Q,
    P,
    Both,
}

impl Observable {
    fn wants_q(self) -> bool {
        matches!(self, Observable::Q | Observable::Both)
    }

    fn wants_p(self) -> bool {
        matches!(self, Observable::P | Observable::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Analytic,
    Oracle,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub params: ModelParams,
    pub tau_start: Tau,
    pub tau_end: Tau,
    pub steps: usize,
    pub observable: Observable,
    pub engine: Engine,
    pub integrator: IntegratorConfig,
}

impl SweepConfig {
    pub fn new(params: ModelParams, tau_start: f64, tau_end: f64, steps: usize, observable: Observable, engine: Engine) -> Result<Self> {
        let cfg = SweepConfig {
            params,
            tau_start: Tau::new(tau_start)?,
            tau_end: Tau::new(tau_end)?,
            steps,
            observable,
            engine,
            integrator: IntegratorConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_start.value() < self.tau_end.value()) {
            bail!("tau_start ({}) must be below tau_end ({})", self.tau_start.value(), self.tau_end.value());
        }
        if self.steps < 2 {
            bail!("steps must be at least 2, got {}", self.steps);
        }
        self.integrator.validate()?;
        Ok(())
    }

    /// `steps` equally spaced times including both ends.
    pub fn taus(&self) -> Vec<Tau> {
        let (a, b) = (self.tau_start.value(), self.tau_end.value());
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                let t = if i == last { b } else { a + (b - a) * i as f64 / last as f64 };
                Tau::new(t).expect("grid inside a validated range")
            })
            .collect()
    }
}

/// Partial sweep configuration as read from a JSON file; CLI flags fill or override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub k: Option<f64>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub tau_start: Option<f64>,
    pub tau_end: Option<f64>,
    pub steps: Option<usize>,
    pub observable: Option<Observable>,
    pub engine: Option<Engine>,
    pub dt: Option<f64>,
    pub fock_dim: Option<usize>,
}

impl SweepFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: SweepFile) -> SweepFile {
        SweepFile {
            k: over.k.or(self.k),
            gamma: over.gamma.or(self.gamma),
            theta: over.theta.or(self.theta),
            tau_start: over.tau_start.or(self.tau_start),
            tau_end: over.tau_end.or(self.tau_end),
            steps: over.steps.or(self.steps),
            observable: over.observable.or(self.observable),
            engine: over.engine.or(self.engine),
            dt: over.dt.or(self.dt),
            fock_dim: over.fock_dim.or(self.fock_dim),
        }
    }

    /// Defaults: k = 0.005, γ = θ = 0, τ ∈ [0, 8π], 1000 points, both observables, analytic engine.
    pub fn resolve(self) -> Result<SweepConfig> {
        let params = ModelParams::new(self.k.unwrap_or(0.005), self.gamma.unwrap_or(0.0), self.theta.unwrap_or(0.0))?;
        let mut integrator = IntegratorConfig::default();
        if let Some(dt) = self.dt {
            integrator.dt = dt;
        }
        if let Some(n) = self.fock_dim {
            integrator.fock_dim = n;
        }
        let mut cfg = SweepConfig::new(
            params,
            self.tau_start.unwrap_or(0.0),
            self.tau_end.unwrap_or(8.0 * PI),
            self.steps.unwrap_or(1000),
            self.observable.unwrap_or(Observable::Both),
            self.engine.unwrap_or(Engine::Analytic),
        )?;
        cfg.integrator = integrator;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau: f64,
    pub q_over_sigma: Option<f64>,
    pub p_dimensionless: Option<f64>,
    pub success_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    fn extremum(&self, field: impl Fn(&SweepRow) -> Option<f64>, better: impl Fn(f64, f64) -> bool) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for row in &self.rows {
            if let Some(v) = field(row) {
                if best.is_none_or(|(_, b)| better(v, b)) {
                    best = Some((row.tau, v));
                }
            }
        }
        best
    }

    /// `(τ, value)` of the largest ⟨q⟩.
    pub fn max_q(&self) -> Option<(f64, f64)> {
        self.extremum(|r| r.q_over_sigma, |a, b| a > b)
    }

    pub fn min_q(&self) -> Option<(f64, f64)> {
        self.extremum(|r| r.q_over_sigma, |a, b| a < b)
    }

    pub fn max_abs_p(&self) -> Option<(f64, f64)> {
        self.extremum(|r| r.p_dimensionless.map(f64::abs), |a, b| a > b)
    }

    /// Rows with `τ` in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> SweepResult {
        SweepResult { rows: self.rows.iter().copied().filter(|r| r.tau >= lo && r.tau <= hi).collect() }
    }
}

/// One result per engine that was asked for.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutput {
    pub analytic: Option<SweepResult>,
    pub oracle: Option<SweepResult>,
}

fn analytic_row(params: &ModelParams, tau: Tau, observable: Observable) -> Result<SweepRow> {
    let state = model::conditioned_state(params, tau)?;
    let mut row = SweepRow { tau: tau.value(), q_over_sigma: None, p_dimensionless: None, success_prob: state.success_prob };
    if state.success_prob >= MIN_REPORTED_PROB {
        if observable.wants_q() {
            row.q_over_sigma = Some(model::mean_q(params, tau)?);
        }
        if observable.wants_p() {
            row.p_dimensionless = Some(model::mean_p(params, tau)?);
        }
    }
    Ok(row)
}

pub fn run_analytic(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let rows = config
        .taus()
        .par_iter()
        .map(|&tau| analytic_row(&config.params, tau, config.observable).with_context(|| format!("analytic point tau = {}", tau.value())))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

/// One checkpointed integration through the whole grid.
pub fn run_oracle(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let sweep = lindblad::oracle_sweep(&config.params, &config.taus(), &config.integrator)?;
    let rows = sweep
        .points
        .iter()
        .map(|pt| {
            let shown = pt.success_prob >= MIN_REPORTED_PROB;
            SweepRow {
                tau: pt.tau,
                q_over_sigma: pt.q.filter(|_| shown && config.observable.wants_q()),
                p_dimensionless: pt.p.filter(|_| shown && config.observable.wants_p()),
                success_prob: pt.success_prob.clamp(0.0, 1.0),
            }
        })
        .collect();
    Ok(SweepResult { rows })
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    let (analytic, oracle) = match config.engine {
        Engine::Analytic => (Some(run_analytic(config)?), None),
        Engine::Oracle => (None, Some(run_oracle(config)?)),
        Engine::Both => {
            let (a, o) = rayon::join(|| run_analytic(config), || run_oracle(config));
            (Some(a?), Some(o?))
        }
    };
    Ok(SweepOutput { analytic, oracle })
}
