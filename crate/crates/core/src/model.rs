//! Closed-form observables of the dark-port conditioned mirror.
//!
//! A single photon is split between arm A (optomechanical cavity) and arm B
//! (rigid cavity). While the photon sits in A the mirror is driven into the
//! coherent state |ϕ(τ)⟩ and the A-branch picks up the Kerr phase φ(τ).
//! Projecting the photon onto the dark port leaves the mirror in
//!
//! ```text
//! ρ_os = ¼ ( |ϕ⟩⟨ϕ| − e^{iψ−D} |ϕ⟩⟨0| − e^{−iψ−D} |0⟩⟨ϕ| + |0⟩⟨0| ),   ψ = θ + φ
//! ```
//!
//! and every function here evaluates some property of that operator.
//!
//! With damping the relative phase ψ is not exactly the undamped Kerr phase:
//! [`ConditionedMirrorState::relative_phase`] carries the exact damped value
//! while [`ConditionedMirrorState::kerr_phase`] keeps φ(τ) = k²(τ − sin τ).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::params::{ModelParams, Tau};

/// Success probabilities below this are treated as "the dark port never fires".
pub const DEGENERATE_PROB: f64 = 1e-300;

/// Largest imaginary residue of the decoherence exponent we accept as round-off.
const RESIDUE_LIMIT: f64 = 1e-9;

/// `e^z − 1` without cancellation for small `|z|`.
pub(crate) fn expm1_c(z: C64) -> C64 {
    let (sin, cos) = z.im.sin_cos();
    let half = (z.im / 2.0).sin();
    let cos_m1 = -2.0 * half * half;
    C64::new(z.re.exp_m1() * cos + cos_m1, z.re.exp() * sin)
}

/// `a = i + γ/2`, the complex decay rate of the driven mirror amplitude.
fn decay_rate(params: &ModelParams) -> C64 {
    C64::new(params.gamma() / 2.0, 1.0)
}

/// Kerr phase φ(τ) = k²(τ − sin τ).
pub fn kerr_phase(params: &ModelParams, tau: Tau) -> f64 {
    let t = tau.value();
    params.k() * params.k() * (t - t.sin())
}

/// Coherent amplitude ϕ(γ,τ) = ik/(i+γ/2)·(1 − e^{−(i+γ/2)τ}).
pub fn coherent_amplitude(params: &ModelParams, tau: Tau) -> C64 {
    let a = decay_rate(params);
    C64::new(0.0, params.k()) / a * -expm1_c(-a * tau.value())
}

/// Decoherence exponent D(γ,τ) between the displaced and undisplaced mirror
/// branches.
///
/// The bracket's last two terms are complex conjugates of each other, so the
/// sum must be real; a residue above 1e-9 means the formula is wrong.
pub fn decoherence_factor(params: &ModelParams, tau: Tau) -> Result<f64> {
    let gamma = params.gamma();
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let t = tau.value();
    let k2 = params.k() * params.k();
    let prefactor = k2 * gamma / (2.0 * (1.0 + gamma * gamma / 4.0));

    let growing = C64::new(-gamma / 2.0, 1.0);
    let decaying = C64::new(gamma / 2.0, 1.0);
    let bracket = C64::from(t) + C64::from(-(-gamma * t).exp_m1() / gamma)
        - expm1_c(growing * t) / growing
        + expm1_c(-decaying * t) / decaying;

    let value = prefactor * bracket;
    if value.im.abs() > RESIDUE_LIMIT {
        return Err(Error::ImaginaryResidue { residue: value.im });
    }
    Ok(value.re)
}

/// Exact relative phase between the displaced and undisplaced branches.
///
/// Solving the master equation for the off-diagonal path block gives the
/// coherence `exp(ik∫₀^τ ϕ ds + |ϕ|²/2)`; its real part is −D(γ,τ) and its
/// imaginary part is this phase. Equal to [`kerr_phase`] when γ = 0 and
/// differs from it at order k²γ otherwise.
pub fn damped_kerr_phase(params: &ModelParams, tau: Tau) -> f64 {
    if params.gamma() == 0.0 {
        return kerr_phase(params, tau);
    }
    let t = tau.value();
    let k2 = params.k() * params.k();
    let inv = decay_rate(params).inv();
    let one_minus = -expm1_c(-decay_rate(params) * t);
    // ik∫ϕ = −k²/a·(τ − (1 − e^{−aτ})/a); |ϕ|²/2 adds nothing imaginary
    (-k2 * inv * (C64::from(t) - inv * one_minus)).im
}

/// Analytic summary of the post-selected mirror state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedMirrorState {
    /// Coherent amplitude ϕ(γ,τ) of the displaced branch.
    pub varphi: C64,
    /// Undamped Kerr phase k²(τ − sin τ).
    pub kerr_phase: f64,
    /// Phase actually carried by the coherence; equals `kerr_phase` at γ = 0.
    pub relative_phase: f64,
    /// θ + relative phase.
    pub total_phase: f64,
    /// D(γ,τ).
    pub decoherence: f64,
    /// Tr ρ_os, the probability that the dark port fires.
    pub success_prob: f64,
}

impl ConditionedMirrorState {
    /// `e^{iψ − D}`, the weight of |ϕ⟩⟨0| relative to the diagonal terms.
    pub fn coherence(&self) -> C64 {
        C64::from_polar((-self.decoherence).exp(), self.total_phase)
    }

    /// `e^{−|ϕ|²/2 − D}`.
    fn overlap_damping(&self) -> f64 {
        (-(self.varphi.norm_sqr() / 2.0 + self.decoherence)).exp()
    }

    fn require_postselection(&self) -> Result<()> {
        if self.success_prob < DEGENERATE_PROB {
            Err(Error::DegeneratePostselection { prob: self.success_prob })
        } else {
            Ok(())
        }
    }
}

/// Bundle ϕ, φ, θ + φ, D and the dark-port probability at `tau`.
pub fn conditioned_state(params: &ModelParams, tau: Tau) -> Result<ConditionedMirrorState> {
    let varphi = coherent_amplitude(params, tau);
    let decoherence = decoherence_factor(params, tau)?;
    let kerr = kerr_phase(params, tau);
    let relative_phase = damped_kerr_phase(params, tau);
    let total_phase = params.theta() + relative_phase;

    // ½[1 − e^{−s} cos ψ] written as ½[(1 − e^{−s}) + e^{−s}·2 sin²(ψ/2)]
    let s = varphi.norm_sqr() / 2.0 + decoherence;
    let half = (total_phase / 2.0).sin();
    let prob = 0.5 * (-(-s).exp_m1() + (-s).exp() * 2.0 * half * half);

    Ok(ConditionedMirrorState {
        varphi,
        kerr_phase: kerr,
        relative_phase,
        total_phase,
        decoherence,
        success_prob: prob.clamp(0.0, 1.0) + 0.0,
    })
}

/// Conditional mean displacement ⟨q⟩/σ of the mirror after a dark-port click.
///
/// Same value as the textbook ratio `[ϕ + ϕ* − e^{−|ϕ|²/2}(cϕ + c*ϕ*)] /
/// [2 − e^{−|ϕ|²/2}(c + c*)]` with `c = e^{iψ−D}`, rearranged so that neither
/// numerator nor denominator is a difference of nearly equal numbers.
pub fn mean_q(params: &ModelParams, tau: Tau) -> Result<f64> {
    let st = conditioned_state(params, tau)?;
    st.require_postselection()?;
    let w = st.overlap_damping();
    let denom = 2.0 * st.success_prob;
    Ok(st.varphi.re + w * st.total_phase.sin() * st.varphi.im / denom)
}

/// Conditional mean momentum ⟨p⟩·2σ/ħ, undamped only.
pub fn mean_p(params: &ModelParams, tau: Tau) -> Result<f64> {
    if params.gamma() != 0.0 {
        return Err(Error::DampingUnsupported { gamma: params.gamma() });
    }
    let st = conditioned_state(params, tau)?;
    st.require_postselection()?;
    let w = st.overlap_damping();
    let denom = 2.0 * st.success_prob;
    Ok(st.varphi.im - w * st.total_phase.sin() * st.varphi.re / denom)
}

/// Unnormalized amplitudes `(c0, c1)` on |0⟩ and |1⟩ of the conditioned state
/// expanded to second order around `T = 2nπ`:
/// `c0 = i(θ + k²T)`, `c1 = ik(τ − T)`.
///
/// Only meaningful for |τ − T| ≪ 1, k ≪ 1 and k²T ≪ 1; not checked.
pub fn approx_state_coeffs(params: &ModelParams, tau: Tau, n: u32) -> (C64, C64) {
    let k = params.k();
    let period = 2.0 * PI * f64::from(n);
    let c0 = C64::new(0.0, params.theta() + k * k * period);
    let c1 = C64::new(0.0, k * (tau.value() - period));
    (c0, c1)
}

/// ⟨q⟩/σ of the expanded state, `2 Re(c0* c1) / (|c0|² + |c1|²)`.
///
/// At θ = 0 this is `2Tk³(τ−T) / [T²k⁴ + k²(τ−T)²]`.
pub fn approx_mean_q(params: &ModelParams, tau: Tau, n: u32) -> Result<f64> {
    let (c0, c1) = approx_state_coeffs(params, tau, n);
    let norm = c0.norm_sqr() + c1.norm_sqr();
    if norm == 0.0 {
        return Err(Error::DegeneratePostselection { prob: 0.0 });
    }
    Ok(2.0 * (c0.conj() * c1).re / norm)
}

/// ⟨ϕ(τ)|(c + c†)|ϕ(τ)⟩ = 2k(1 − cos τ): the mirror displacement with the
/// photon certainly in arm A and no post-selection. Never exceeds 4k.
pub fn free_mirror_displacement(params: &ModelParams, tau: Tau) -> Result<f64> {
    if params.gamma() != 0.0 {
        return Err(Error::DampingUnsupported { gamma: params.gamma() });
    }
    let half = (tau.value() / 2.0).sin();
    Ok(4.0 * params.k() * half * half)
}

/// Ratio of the post-selected extremum σ to the free-displacement bound 4kσ.
pub fn amplification_factor(params: &ModelParams) -> f64 {
    1.0 / (4.0 * params.k())
}
