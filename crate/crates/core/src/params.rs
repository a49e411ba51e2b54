//! Dimensionless configuration of one interferometer run.
//!
//! Displacements are measured in units of the mirror's zero-point
//! fluctuation σ, momenta in units of ħ/2σ and time as τ = ω_m t.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper edge of the weak-coupling regime.
pub const MAX_COUPLING: f64 = 0.25;

/// Coupling `k = g/ω_m`, damping `γ = γ_m/ω_m` and phase-shifter angle `θ`.
///
/// `θ > 0` means the shifter sits in arm A, `θ < 0` in arm B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    k: f64,
    gamma: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    k: f64,
    #[serde(default)]
    gamma: f64,
    #[serde(default)]
    theta: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.k, raw.gamma, raw.theta)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { k: p.k, gamma: p.gamma, theta: p.theta }
    }
}

impl ModelParams {
    pub fn new(k: f64, gamma: f64, theta: f64) -> Result<Self> {
        if !(k > 0.0 && k <= MAX_COUPLING) {
            return Err(Error::InvalidParams(format!(
                "coupling k = {k} outside (0, {MAX_COUPLING}]"
            )));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("damping gamma = {gamma} must be finite and >= 0")));
        }
        if !(theta > -PI && theta <= PI) {
            return Err(Error::InvalidParams(format!("phase shift theta = {theta} outside (-pi, pi]")));
        }
        Ok(ModelParams { k, gamma, theta })
    }

    /// Undamped, no phase shifter.
    pub fn coupling(k: f64) -> Result<Self> {
        Self::new(k, 0.0, 0.0)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.k, gamma, self.theta)
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        Self::new(self.k, self.gamma, theta)
    }
}

/// Dimensionless time `τ = ω_m t` in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Tau(f64);

impl Tau {
    pub const ZERO: Tau = Tau(0.0);

    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau >= 0.0 {
            Ok(Tau(tau))
        } else {
            Err(Error::InvalidParams(format!("tau = {tau} must be finite and >= 0")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Tau {
    type Error = Error;

    fn try_from(tau: f64) -> Result<Self> {
        Tau::new(tau)
    }
}

impl<'de> Deserialize<'de> for Tau {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(de)?;
        Tau::new(v).map_err(serde::de::Error::custom)
    }
}
