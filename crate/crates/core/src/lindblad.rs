//! Brute-force master-equation oracle.
//!
//! Integrates
//!
//! ```text
//! dρ/dτ = −i[H, ρ] + (γ/2)(2CρC† − C†Cρ − ρC†C),
//! H = I ⊗ c†c − k |A⟩⟨A| ⊗ (c + c†),   C = I ⊗ c
//! ```
//!
//! for the joint photon-path ⊗ mirror density matrix with fixed-step RK4,
//! then post-selects on an interferometer port. Nothing here uses the
//! closed-form coherent-state solution, so it can arbitrate the analytic
//! formulas in [`crate::model`].
//!
//! Joint indices are `path * N + m` with path 0 = arm A and path 1 = arm B.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{self, FockDensity, JointPureState, Port, DEFAULT_FOCK_DIM};
use crate::linalg;
use crate::model::DEGENERATE_PROB;
use crate::params::{ModelParams, Tau};

/// Trace drift beyond which a step is declared unstable.
const UNSTABLE_TRACE_DRIFT: f64 = 1e-6;

/// Allowed anti-Hermitian residue before the final symmetrization.
const HERMITICITY_LIMIT: f64 = 1e-9;

/// Steps between hygiene samples.
const SAMPLE_EVERY: usize = 100;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical fixed-step fourth-order Runge–Kutta.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub fock_dim: usize,
    #[serde(default = "default_method")]
    pub method: Method,
}

fn default_method() -> Method {
    Method::Rk4
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { dt: 1e-3, fock_dim: DEFAULT_FOCK_DIM, method: Method::Rk4 }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, fock_dim: usize) -> Result<Self> {
        let cfg = IntegratorConfig { dt, fock_dim, method: Method::Rk4 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(Error::InvalidParams(format!("dt = {} outside (0, 0.01]", self.dt)));
        }
        if self.fock_dim < 8 {
            return Err(Error::InvalidParams(format!("fock_dim = {} < 8", self.fock_dim)));
        }
        Ok(())
    }
}

/// Joint density matrix on span{|A⟩, |B⟩} ⊗ Fock(N).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDensity {
    fock_dim: usize,
    matrix: DMatrix<C64>,
}

impl JointDensity {
    /// Validates shape, Hermiticity (1e-10), unit trace (1e-9) and PSD (−1e-8).
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() % 2 != 0 || matrix.nrows() < 4 {
            return Err(Error::InvalidParams(format!(
                "joint density must be 2N x 2N, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dev = linalg::hermiticity_deviation(&matrix);
        if dev > 1e-10 {
            return Err(Error::InvalidParams(format!("joint density not Hermitian ({dev:e})")));
        }
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("joint density trace {tr} != 1")));
        }
        let min = linalg::min_eigenvalue(&matrix);
        if min < -1e-8 {
            return Err(Error::InvalidParams(format!("joint density eigenvalue {min:e}")));
        }
        Ok(JointDensity { fock_dim: matrix.nrows() / 2, matrix })
    }

    pub fn from_pure(state: &JointPureState) -> Self {
        let v = state.to_vector();
        JointDensity { fock_dim: state.dim(), matrix: &v * v.adjoint() }
    }

    /// `|ψ_i(θ)⟩⟨ψ_i(θ)| ⊗ |0⟩⟨0|`.
    pub fn initial(theta: f64, fock_dim: usize) -> Self {
        Self::from_pure(&JointPureState::input(theta, fock_dim))
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized joint pure state.
    pub fn fidelity_with_pure(&self, psi: &JointPureState) -> f64 {
        let v = psi.to_vector();
        (v.adjoint() * &self.matrix * &v)[(0, 0)].re
    }
}

/// `H/(ħω_m)` for a bare coupling value; `k = 0` gives the free oscillator.
pub fn hamiltonian_matrix(coupling: f64, fock_dim: usize) -> DMatrix<C64> {
    let n = fock_dim;
    let number = fockspace::number_matrix(n);
    let x = fockspace::position_matrix(n);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&(&number - x * C64::from(coupling)));
    h.view_mut((n, n), (n, n)).copy_from(&number);
    h
}

/// Rotating-frame Hamiltonian `I ⊗ c†c − k |A⟩⟨A| ⊗ (c + c†)` in units of ħω_m.
pub fn build_hamiltonian(params: &ModelParams, fock_dim: usize) -> DMatrix<C64> {
    hamiltonian_matrix(params.k(), fock_dim)
}

/// `exp(m)` by Taylor series with scaling and squaring.
fn expm(m: &DMatrix<C64>) -> DMatrix<C64> {
    let norm = m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 1.0 { norm.log2().ceil() as i32 } else { 0 };
    let a = m / C64::from(2f64.powi(squarings));
    let id = DMatrix::<C64>::identity(m.nrows(), m.ncols());
    let mut sum = id.clone();
    let mut term = id;
    for j in 1..=24 {
        term = &term * &a / C64::from(j as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(−iHτ)` for the undamped joint system, by brute-force matrix
/// exponential of [`build_hamiltonian`].
pub fn hamiltonian_propagator(params: &ModelParams, tau: Tau, fock_dim: usize) -> DMatrix<C64> {
    expm(&(build_hamiltonian(params, fock_dim) * C64::new(0.0, -tau.value())))
}

/// Path projector coupled to the mirror, `|A⟩⟨A|`, in the arm basis.
const ARM_COUPLING: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 0.0]];

/// The same projector in the port basis (bright, dark).
const PORT_COUPLING: [[f64; 2]; 2] = [[0.5, 0.5], [0.5, 0.5]];

/// Generator of the master equation with its band structure unrolled.
///
/// The path factor of the coupling is an arbitrary real symmetric 2×2 matrix
/// so the same generator serves the arm and the port basis.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    coupling: f64,
    gamma: f64,
    fock_dim: usize,
    path: [[f64; 2]; 2],
    sqrt: Vec<f64>,
}

impl Liouvillian {
    /// Generator in the arm basis (A, B).
    pub fn new(coupling: f64, gamma: f64, fock_dim: usize) -> Self {
        Self::with_path(coupling, gamma, fock_dim, ARM_COUPLING)
    }

    fn with_path(coupling: f64, gamma: f64, fock_dim: usize, path: [[f64; 2]; 2]) -> Self {
        Liouvillian { coupling, gamma, fock_dim, path, sqrt: (0..=fock_dim).map(|n| (n as f64).sqrt()).collect() }
    }

    fn in_port_basis(&self) -> Self {
        Self::with_path(self.coupling, self.gamma, self.fock_dim, PORT_COUPLING)
    }

    pub fn from_params(params: &ModelParams, fock_dim: usize) -> Self {
        Self::new(params.k(), params.gamma(), fock_dim)
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    /// `out = L[ρ]`.
    pub fn apply(&self, rho: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let n = self.fock_dim;
        let dim = 2 * n;
        let g = self.gamma;
        let s = &self.sqrt;
        // −i·(−k) = ik multiplies [P ⊗ X, ρ]
        let ik = C64::new(0.0, self.coupling);

        for j in 0..dim {
            let (pj, mj) = (j / n, j % n);
            for i in 0..dim {
                let (pi, mi) = (i / n, i % n);
                let (ni, nj) = (mi as f64, mj as f64);

                // diagonal part of H and the C†C terms
                let mut acc = rho[(i, j)] * C64::new(-g / 2.0 * (ni + nj), -(ni - nj));

                let mut comm = ZERO;
                for q in 0..2 {
                    let w = self.path[pi][q];
                    if w != 0.0 {
                        let row = q * n + mi;
                        let mut x = ZERO;
                        if mi + 1 < n {
                            x += rho[(row + 1, j)] * s[mi + 1];
                        }
                        if mi > 0 {
                            x += rho[(row - 1, j)] * s[mi];
                        }
                        comm += x * w;
                    }
                    let w = self.path[q][pj];
                    if w != 0.0 {
                        let col = q * n + mj;
                        let mut x = ZERO;
                        if mj > 0 {
                            x += rho[(i, col - 1)] * s[mj];
                        }
                        if mj + 1 < n {
                            x += rho[(i, col + 1)] * s[mj + 1];
                        }
                        comm -= x * w;
                    }
                }
                acc += ik * comm;

                // γ CρC†
                if g != 0.0 && mi + 1 < n && mj + 1 < n {
                    acc += rho[(i + 1, j + 1)] * (g * s[mi + 1] * s[mj + 1]);
                }
                out[(i, j)] = acc;
            }
        }
    }
}

/// Change the path factor between the arm basis (A, B) and the port basis
/// (bright, dark). The map is its own inverse.
fn swap_path_basis(m: &DMatrix<C64>) -> DMatrix<C64> {
    let n = m.nrows() / 2;
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let aa = m[(i, j)];
            let ab = m[(i, n + j)];
            let ba = m[(n + i, j)];
            let bb = m[(n + i, n + j)];
            out[(i, j)] = (aa + ab + ba + bb) * 0.5;
            out[(i, n + j)] = (aa - ab + ba - bb) * 0.5;
            out[(n + i, j)] = (aa + ab - ba - bb) * 0.5;
            out[(n + i, n + j)] = (aa - ab - ba + bb) * 0.5;
        }
    }
    out
}

/// `dρ/dτ` at `rho`.
pub fn lindblad_rhs(params: &ModelParams, rho: &JointDensity) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(rho.matrix.nrows(), rho.matrix.ncols());
    Liouvillian::from_params(params, rho.fock_dim).apply(&rho.matrix, &mut out);
    out
}

/// Physical-state hygiene observed along an integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub samples: usize,
    pub max_trace_drift: f64,
    pub max_hermiticity_deviation: f64,
    pub min_eigenvalue: f64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            steps: 0,
            samples: 0,
            max_trace_drift: 0.0,
            max_hermiticity_deviation: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.steps += other.steps;
        self.samples += other.samples;
        self.max_trace_drift = self.max_trace_drift.max(other.max_trace_drift);
        self.max_hermiticity_deviation = self.max_hermiticity_deviation.max(other.max_hermiticity_deviation);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }
}

/// RK4 integrator that can be advanced through a sequence of checkpoints.
///
/// The state is held in the port basis so that the dark-port block, which
/// can be of order 1e-8, is propagated directly instead of being recovered
/// from a cancellation between O(1) arm-basis entries.
#[derive(Debug, Clone)]
pub struct Integrator {
    liouvillian: Liouvillian,
    config: IntegratorConfig,
    rho: DMatrix<C64>,
    tau: f64,
    diagnostics: Diagnostics,
    k: [DMatrix<C64>; 4],
    scratch: DMatrix<C64>,
}

impl Integrator {
    pub fn new(params: &ModelParams, config: IntegratorConfig, initial: JointDensity) -> Result<Self> {
        Self::with_liouvillian(Liouvillian::from_params(params, config.fock_dim), config, initial)
    }

    pub fn with_liouvillian(liouvillian: Liouvillian, config: IntegratorConfig, initial: JointDensity) -> Result<Self> {
        config.validate()?;
        if initial.fock_dim != liouvillian.fock_dim {
            return Err(Error::InvalidParams(format!(
                "initial state has Fock dimension {}, integrator {}",
                initial.fock_dim, liouvillian.fock_dim
            )));
        }
        let dim = initial.matrix.nrows();
        let zeros = || DMatrix::zeros(dim, dim);
        let mut it = Integrator {
            liouvillian: liouvillian.in_port_basis(),
            config,
            rho: swap_path_basis(&initial.matrix),
            tau: 0.0,
            diagnostics: Diagnostics::default(),
            k: [zeros(), zeros(), zeros(), zeros()],
            scratch: zeros(),
        };
        it.sample();
        Ok(it)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    fn sample(&mut self) {
        let d = &mut self.diagnostics;
        d.samples += 1;
        d.max_trace_drift = d.max_trace_drift.max((linalg::trace(&self.rho).re - 1.0).abs());
        d.max_hermiticity_deviation = d.max_hermiticity_deviation.max(linalg::hermiticity_deviation(&self.rho));
        d.min_eigenvalue = d.min_eigenvalue.min(linalg::min_eigenvalue(&self.rho));
    }

    fn step(&mut self, h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        let l = &self.liouvillian;
        l.apply(&self.rho, k1);
        stage(&mut self.scratch, &self.rho, k1, h / 2.0);
        l.apply(&self.scratch, k2);
        stage(&mut self.scratch, &self.rho, k2, h / 2.0);
        l.apply(&self.scratch, k3);
        stage(&mut self.scratch, &self.rho, k3, h);
        l.apply(&self.scratch, k4);

        let w = h / 6.0;
        for idx in 0..self.rho.len() {
            self.rho[idx] += (k1[idx] + (k2[idx] + k3[idx]) * 2.0 + k4[idx]) * w;
        }
    }

    /// Integrate up to `tau_end` with equal steps no longer than `dt`.
    pub fn advance_to(&mut self, tau_end: f64) -> Result<()> {
        if !(tau_end >= self.tau) || !tau_end.is_finite() {
            return Err(Error::InvalidParams(format!("cannot integrate from {} back to {tau_end}", self.tau)));
        }
        let span = tau_end - self.tau;
        if span == 0.0 {
            return Ok(());
        }
        let steps = ((span / self.config.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let start = self.tau;
        for s in 1..=steps {
            self.step(h);
            self.tau = start + h * s as f64;
            self.diagnostics.steps += 1;
            let drift = (linalg::trace(&self.rho).re - 1.0).abs();
            if !(drift <= UNSTABLE_TRACE_DRIFT) {
                return Err(Error::StepUnstable { tau: self.tau, reason: format!("trace drifted by {drift:e}") });
            }
            if self.diagnostics.steps % SAMPLE_EVERY == 0 {
                self.sample();
            }
        }
        self.tau = tau_end;
        self.sample();
        Ok(())
    }

    fn checked_hermitian(&self, m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let dev = linalg::hermiticity_deviation(m);
        if dev > HERMITICITY_LIMIT {
            return Err(Error::StepUnstable { tau: self.tau, reason: format!("Hermiticity lost ({dev:e})") });
        }
        let mut out = m.clone();
        linalg::symmetrize(&mut out);
        Ok(out)
    }

    /// Current state in the arm basis, symmetrized after checking that it was
    /// already Hermitian to 1e-9.
    pub fn state(&self) -> Result<JointDensity> {
        let matrix = self.checked_hermitian(&swap_path_basis(&self.rho))?;
        Ok(JointDensity { fock_dim: self.liouvillian.fock_dim, matrix })
    }

    /// Unnormalized mirror operator conditioned on `port` (no extra shifter)
    /// and its trace.
    pub fn conditioned(&self, port: Port) -> Result<(FockDensity, f64)> {
        let n = self.liouvillian.fock_dim;
        let offset = match port {
            Port::Bright => 0,
            Port::Dark => n,
        };
        let block = self.checked_hermitian(&self.rho.view((offset, offset), (n, n)).into_owned())?;
        let prob = linalg::trace(&block).re;
        Ok((FockDensity::from_matrix_unchecked(block), prob))
    }
}

fn stage(out: &mut DMatrix<C64>, rho: &DMatrix<C64>, slope: &DMatrix<C64>, h: f64) {
    for ((o, r), d) in out.iter_mut().zip(rho.iter()).zip(slope.iter()) {
        *o = r + d * h;
    }
}

/// Result of one run from τ = 0.
#[derive(Debug, Clone)]
pub struct Evolved {
    pub state: JointDensity,
    pub diagnostics: Diagnostics,
}

pub fn integrate(params: &ModelParams, tau_end: Tau, config: &IntegratorConfig, initial: JointDensity) -> Result<Evolved> {
    let mut it = Integrator::new(params, *config, initial)?;
    it.advance_to(tau_end.value())?;
    Ok(Evolved { state: it.state()?, diagnostics: it.diagnostics })
}

/// Apply the shifter `e^{iθ}` to arm A and project the photon onto `port`:
/// returns `⟨f|SρS†|f⟩` as a mirror operator and its trace.
pub fn postselect_density(rho: &JointDensity, theta: f64, port: Port) -> (FockDensity, f64) {
    let n = rho.fock_dim;
    let m = &rho.matrix;
    let shift = C64::from_polar(1.0, theta) * port.b_sign();
    let mirror = DMatrix::from_fn(n, n, |i, j| {
        let aa = m[(i, j)];
        let bb = m[(n + i, n + j)];
        let ab = m[(i, n + j)];
        let ba = m[(n + i, j)];
        (aa + bb + ab * shift + ba * shift.conj()) * 0.5
    });
    let prob = linalg::trace(&mirror).re;
    (FockDensity::from_matrix_unchecked(mirror), prob)
}

/// Conditioned observables at one checkpoint of an oracle run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePoint {
    pub tau: f64,
    pub success_prob: f64,
    /// `None` when the dark port cannot fire.
    pub q: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OracleSweep {
    pub points: Vec<OraclePoint>,
    pub diagnostics: Diagnostics,
}

/// One integration from |ψ_i(θ)⟩ ⊗ |0⟩ through every τ in `taus` (non-decreasing),
/// post-selecting on the dark port at each.
pub fn oracle_sweep(params: &ModelParams, taus: &[Tau], config: &IntegratorConfig) -> Result<OracleSweep> {
    let mut it = Integrator::new(params, *config, JointDensity::initial(params.theta(), config.fock_dim))?;
    let mut points = Vec::with_capacity(taus.len());
    for &tau in taus {
        it.advance_to(tau.value())?;
        let (mirror, prob) = it.conditioned(Port::Dark)?;
        let (q, p) = if prob >= DEGENERATE_PROB {
            (Some(fockspace::expectation_q(&mirror)?), Some(fockspace::expectation_p(&mirror)?))
        } else {
            (None, None)
        };
        points.push(OraclePoint { tau: tau.value(), success_prob: prob, q, p });
    }
    Ok(OracleSweep { points, diagnostics: it.diagnostics })
}

fn oracle_conditioned(params: &ModelParams, tau: Tau, config: &IntegratorConfig) -> Result<FockDensity> {
    let mut it = Integrator::new(params, *config, JointDensity::initial(params.theta(), config.fock_dim))?;
    it.advance_to(tau.value())?;
    let (mirror, prob) = it.conditioned(Port::Dark)?;
    if prob < DEGENERATE_PROB {
        return Err(Error::DegeneratePostselection { prob });
    }
    Ok(mirror)
}

/// ⟨q⟩/σ of the dark-port conditioned mirror, by direct integration.
pub fn oracle_mean_q(params: &ModelParams, tau: Tau, config: &IntegratorConfig) -> Result<f64> {
    fockspace::expectation_q(&oracle_conditioned(params, tau, config)?)
}

/// ⟨p⟩·2σ/ħ of the dark-port conditioned mirror, by direct integration (any γ).
pub fn oracle_mean_p(params: &ModelParams, tau: Tau, config: &IntegratorConfig) -> Result<f64> {
    fockspace::expectation_p(&oracle_conditioned(params, tau, config)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const K: f64 = 0.005;

    fn t(x: f64) -> Tau {
        Tau::new(x).unwrap()
    }

    fn dense_rhs(coupling: f64, gamma: f64, n: usize, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let h = hamiltonian_matrix(coupling, n);
        let c1 = fockspace::annihilation_matrix(n);
        let mut c = DMatrix::zeros(2 * n, 2 * n);
        c.view_mut((0, 0), (n, n)).copy_from(&c1);
        c.view_mut((n, n), (n, n)).copy_from(&c1);
        let cd = c.adjoint();
        let i = C64::new(0.0, 1.0);
        let comm = (&h * rho - rho * &h) * (-i);
        let diss = (&c * rho * &cd * C64::from(2.0) - &cd * &c * rho - rho * &cd * &c) * C64::from(gamma / 2.0);
        comm + diss
    }

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        let h = &a + a.adjoint();
        let tr = linalg::trace(&h);
        h / tr
    }

    #[test]
    fn hamiltonian_examples() {
        let h0 = hamiltonian_matrix(0.0, 8);
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { (i % 8) as f64 } else { 0.0 };
                assert_eq!(h0[(i, j)], C64::from(want));
            }
        }
        let params = ModelParams::coupling(K).unwrap();
        let h = build_hamiltonian(&params, 8);
        assert_eq!(&h - h.adjoint(), DMatrix::zeros(16, 16));
        assert_eq!(h[(1, 0)], C64::from(-K));
        assert_eq!(h[(9, 8)], C64::from(0.0));
    }

    #[test]
    fn structured_rhs_matches_dense_products() {
        for &(k, g) in &[(0.0, 0.0), (0.005, 0.0), (0.1, 0.3), (0.25, 0.01)] {
            let n = 8;
            let rho = random_hermitian(2 * n, 7);
            let mut fast = DMatrix::zeros(2 * n, 2 * n);
            Liouvillian::new(k, g, n).apply(&rho, &mut fast);
            let slow = dense_rhs(k, g, n, &rho);
            assert!((fast - slow).norm() < 1e-12, "k={k} g={g}");
        }
    }

    #[test]
    fn rhs_preserves_trace_and_hermiticity() {
        let params = ModelParams::new(0.1, 0.2, 0.0).unwrap();
        for seed in 0..5 {
            let m = random_hermitian(16, seed);
            let rho = JointDensity { fock_dim: 8, matrix: m };
            let d = lindblad_rhs(&params, &rho);
            assert!(linalg::trace(&d).norm() < 1e-12);
            assert!(linalg::hermiticity_deviation(&d) < 1e-12);
        }
    }

    #[test]
    fn undamped_rhs_is_commutator() {
        let params = ModelParams::coupling(0.05).unwrap();
        let pure = JointPureState::input(0.2, 8);
        let rho = JointDensity::from_pure(&pure);
        let h = build_hamiltonian(&params, 8);
        let want = (&h * rho.matrix() - rho.matrix() * &h) * C64::new(0.0, -1.0);
        assert!((lindblad_rhs(&params, &rho) - want).norm() < 1e-14);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 16).is_err());
        assert!(IntegratorConfig::new(0.02, 16).is_err());
        assert!(IntegratorConfig::new(1e-3, 7).is_err());
        assert!(IntegratorConfig::new(1e-3, 8).is_ok());
    }

    #[test]
    fn zero_coupling_keeps_mirror_in_vacuum() {
        let liouv = Liouvillian::new(0.0, 0.05, 8);
        let mut it = Integrator::with_liouvillian(liouv, IntegratorConfig::new(1e-2, 8).unwrap(), JointDensity::initial(0.0, 8)).unwrap();
        it.advance_to(5.0).unwrap();
        let state = it.state().unwrap();
        let want = JointDensity::initial(0.0, 8);
        assert!((state.matrix() - want.matrix()).norm() < 1e-14);
    }

    #[test]
    fn undamped_run_matches_pure_propagator() {
        let params = ModelParams::coupling(K).unwrap();
        let cfg = IntegratorConfig::default();
        let tau = t(2.0 * PI);
        let run = integrate(&params, tau, &cfg, JointDensity::initial(0.0, 16)).unwrap();
        let pure = fockspace::evolve_pure(&params, tau, &JointPureState::input(0.0, 16)).unwrap();
        assert!(run.state.fidelity_with_pure(&pure) > 1.0 - 1e-8);
    }

    #[test]
    fn damping_suppresses_coherence_by_decoherence_factor() {
        let cfg = IntegratorConfig::default();
        let tau = t(2.0 * PI);
        let free = ModelParams::coupling(K).unwrap();
        let damped = ModelParams::new(K, K, 0.0).unwrap();
        let coherence = |p: &ModelParams| {
            let run = integrate(p, tau, &cfg, JointDensity::initial(0.0, 16)).unwrap();
            // ⟨A,ϕ|ρ|B,0⟩ summed over the A-branch mirror amplitudes: 2ρ_AB has trace e^{iφ−D}⟨0|ϕ⟩
            let m = run.state.matrix();
            let mut acc = ZERO;
            for i in 0..16 {
                acc += m[(i, 16 + i)];
            }
            acc * 2.0
        };
        let ratio = coherence(&damped).norm() / coherence(&free).norm();
        let d = model::decoherence_factor(&damped, tau).unwrap();
        let phi_d = model::coherent_amplitude(&damped, tau).norm_sqr();
        let phi_f = model::coherent_amplitude(&free, tau).norm_sqr();
        let want = (-d - (phi_d - phi_f) / 2.0).exp();
        assert!((ratio - want).abs() < 1e-6, "ratio {ratio} want {want}");
    }

    #[test]
    fn ports_are_complete() {
        let params = ModelParams::new(K, K, 0.001).unwrap();
        let run = integrate(&params, t(3.3), &IntegratorConfig::default(), JointDensity::initial(0.001, 16)).unwrap();
        let (_, dark) = postselect_density(&run.state, 0.0, Port::Dark);
        let (_, bright) = postselect_density(&run.state, 0.0, Port::Bright);
        assert!((dark + bright - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shifter_commutes_with_dynamics() {
        let params = ModelParams::new(K, K, 0.0).unwrap();
        let cfg = IntegratorConfig::new(5e-3, 12).unwrap();
        let tau = t(4.0);
        let early = integrate(&params, tau, &cfg, JointDensity::initial(0.3, 12)).unwrap();
        let late = integrate(&params, tau, &cfg, JointDensity::initial(0.0, 12)).unwrap();
        let (m1, p1) = postselect_density(&early.state, 0.0, Port::Dark);
        let (m2, p2) = postselect_density(&late.state, 0.3, Port::Dark);
        assert!((p1 - p2).abs() < 1e-14);
        assert!((m1.matrix() - m2.matrix()).norm() < 1e-13);
    }

    #[test]
    fn postselected_probability_examples() {
        let cfg = IntegratorConfig::default();
        let (_, p) = postselect_density(&JointDensity::initial(0.0, 16), 0.0, Port::Dark);
        assert!(p.abs() < 1e-16);
        let params = ModelParams::coupling(K).unwrap();
        let run = integrate(&params, t(2.0 * PI * (1.0 + K)), &cfg, JointDensity::initial(0.0, 16)).unwrap();
        let (_, p) = postselect_density(&run.state, 0.0, Port::Dark);
        assert_relative_eq!(p, 1.2336508198497761e-8, max_relative = 1e-5);
    }

    #[test]
    fn oracle_matches_closed_form_at_spot_points() {
        let cfg = IntegratorConfig::default();
        let params = ModelParams::coupling(K).unwrap();
        let tau = t(2.0 * PI * (1.0 + K));
        let q = oracle_mean_q(&params, tau, &cfg).unwrap();
        assert!((q - model::mean_q(&params, tau).unwrap()).abs() < 1e-4);
        assert!((q - 1.0).abs() < 1e-3);

        let tau = t(0.1);
        let q = oracle_mean_q(&params, tau, &cfg).unwrap();
        assert!((q - model::mean_q(&params, tau).unwrap()).abs() < 1e-6);
        let p = oracle_mean_p(&params, tau, &cfg).unwrap();
        assert!((p - model::mean_p(&params, tau).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn oracle_rejects_degenerate_point() {
        let params = ModelParams::coupling(K).unwrap();
        let err = oracle_mean_q(&params, Tau::ZERO, &IntegratorConfig::default());
        assert!(matches!(err, Err(Error::DegeneratePostselection { .. })));
    }

    #[test]
    fn sweep_requires_monotone_times() {
        let params = ModelParams::coupling(K).unwrap();
        let taus = [t(1.0), t(0.5)];
        assert!(oracle_sweep(&params, &taus, &IntegratorConfig::new(1e-2, 8).unwrap()).is_err());
    }

    #[test]
    fn diagnostics_track_hygiene() {
        let params = ModelParams::new(K, K, 0.001).unwrap();
        let taus: Vec<Tau> = (1..=10).map(|i| t(0.5 * i as f64)).collect();
        let sweep = oracle_sweep(&params, &taus, &IntegratorConfig::default()).unwrap();
        let d = sweep.diagnostics;
        assert!(d.samples >= d.steps / SAMPLE_EVERY);
        assert!(d.max_trace_drift < 1e-8);
        assert!(d.max_hermiticity_deviation < 1e-9);
        assert!(d.min_eigenvalue > -1e-8);
    }

    #[test]
    fn rk4_error_shrinks_sixteenfold_per_halving() {
        for &g in &[0.0, K] {
            let params = ModelParams::new(K, g, 0.0).unwrap();
            let tau = t(10.0);
            let exact = model::mean_q(&params, tau).unwrap();
            let err = |dt: f64| (oracle_mean_q(&params, tau, &IntegratorConfig::new(dt, 16).unwrap()).unwrap() - exact).abs();
            let ratio = err(0.01) / err(0.005);
            assert!((4.0..=64.0).contains(&ratio), "gamma {g}: ratio {ratio}");
        }
    }

    #[test]
    fn halving_default_step_is_invisible() {
        let fine = IntegratorConfig::new(5e-4, 16).unwrap();
        let base = IntegratorConfig::default();
        for &(g, theta) in &[(0.0, 0.0), (K, 0.0), (0.0, 0.001), (K, -0.001)] {
            let params = ModelParams::new(K, g, theta).unwrap();
            for &tau in &[2.0 * PI * (1.0 + K), 0.2, 7.5] {
                let a = oracle_mean_q(&params, t(tau), &base).unwrap();
                let b = oracle_mean_q(&params, t(tau), &fine).unwrap();
                assert!((a - b).abs() < 1e-7, "g={g} theta={theta} tau={tau}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn port_blocks_match_arm_basis_postselection() {
        let params = ModelParams::new(K, K, 0.0).unwrap();
        let mut it = Integrator::new(&params, IntegratorConfig::new(1e-3, 12).unwrap(), JointDensity::initial(0.02, 12)).unwrap();
        it.advance_to(1.7).unwrap();
        let state = it.state().unwrap();
        for port in [Port::Dark, Port::Bright] {
            let (direct, p1) = it.conditioned(port).unwrap();
            let (via_arms, p2) = postselect_density(&state, 0.0, port);
            assert!((p1 - p2).abs() < 1e-15);
            assert!((direct.matrix() - via_arms.matrix()).norm() < 1e-15);
        }
    }

    #[test]
    fn propagator_is_unitary_and_matches_free_rotation() {
        let params = ModelParams::coupling(0.2).unwrap();
        let u = hamiltonian_propagator(&params, t(7.3), 10);
        let id = DMatrix::<C64>::identity(20, 20);
        let err = (u.adjoint() * &u - id).norm();
        assert!(err < 1e-12, "{err:e}");
        // arm B is uncoupled: e^{−inτ} on its diagonal
        for m in 0..10 {
            let want = C64::from_polar(1.0, -(m as f64) * 7.3);
            assert!((u[(10 + m, 10 + m)] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn basis_swap_is_an_involution() {
        let m = random_hermitian(16, 3);
        assert!((swap_path_basis(&swap_path_basis(&m)) - &m).norm() < 1e-15);
    }
}
