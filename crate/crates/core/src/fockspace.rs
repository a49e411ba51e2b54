//! Truncated Fock space of the mirror and the single-photon path space.
//!
//! Mirror states live in span{|0⟩, …, |N−1⟩}. The photon is in exactly one
//! of the two interferometer arms, so joint states are pairs of mirror
//! vectors: the amplitude with the photon in arm A (`|1⟩_A|0⟩_B`) and the
//! amplitude with the photon in arm B (`|0⟩_A|1⟩_B`).
//!
//! Phase-space conventions follow the quadratures `x = c + c†` and
//! `y = −i(c − c†)`, i.e. `x = 2 Re α`, `y = 2 Im α`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, ConditionedMirrorState, DEGENERATE_PROB};
use crate::params::{ModelParams, Tau};

/// Default truncation of the mirror's Fock space.
pub const DEFAULT_FOCK_DIM: usize = 16;

/// Top-two-level population above which evolution is considered truncated.
const LEAKAGE_LIMIT: f64 = 1e-12;

/// Top-two-level population allowed in a displaced Wigner column.
const WIGNER_LEAKAGE_LIMIT: f64 = 1e-6;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Mode lowering operator: `√n` on the `(n−1, n)` superdiagonal.
pub fn annihilation_matrix(dim: usize) -> DMatrix<C64> {
    assert!(dim >= 2, "Fock dimension must be at least 2, got {dim}");
    DMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { C64::from((j as f64).sqrt()) } else { ZERO })
}

pub fn number_matrix(dim: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |i, j| if i == j { C64::from(i as f64) } else { ZERO })
}

/// Parity `(−1)^n` as a diagonal matrix.
pub fn parity_matrix(dim: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |i, j| match (i == j, i % 2) {
        (true, 0) => ONE,
        (true, _) => -ONE,
        _ => ZERO,
    })
}

/// Position quadrature `c + c†` (units of σ).
pub fn position_matrix(dim: usize) -> DMatrix<C64> {
    let c = annihilation_matrix(dim);
    &c + c.adjoint()
}

/// Momentum quadrature `−i(c − c†)` (units of ħ/2σ).
pub fn momentum_matrix(dim: usize) -> DMatrix<C64> {
    let c = annihilation_matrix(dim);
    (&c - c.adjoint()) * C64::new(0.0, -1.0)
}

/// Exponentials of the truncated displacement generator `βc† − β*c`.
///
/// Writing `β = r e^{iϑ}` and `U = e^{i(ϑ+π/2)c†c}`, the generator equals
/// `−ir U X U†` with `X = c + c†`. One eigendecomposition `X = V Λ Vᵀ` then
/// gives `D(β) = U V e^{−irΛ} Vᵀ U†` for every β.
#[derive(Debug, Clone)]
pub struct Displacer {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl Displacer {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "Fock dimension must be at least 2, got {dim}");
        let x = DMatrix::from_fn(dim, dim, |i, j| {
            if j == i + 1 {
                (j as f64).sqrt()
            } else if i == j + 1 {
                (i as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = x.symmetric_eigen();
        Displacer { vectors: eig.eigenvectors, values: eig.eigenvalues }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    fn frame(beta: C64) -> (f64, f64) {
        (beta.norm(), beta.arg() + PI / 2.0)
    }

    /// `D(β)|m⟩`.
    pub fn column(&self, beta: C64, m: usize) -> DVector<C64> {
        let dim = self.dim();
        let (r, angle) = Self::frame(beta);
        let weights: DVector<C64> = DVector::from_fn(dim, |l, _| {
            C64::from_polar(self.vectors[(m, l)], -r * self.values[l])
        });
        let shift = C64::from_polar(1.0, -angle * m as f64);
        DVector::from_fn(dim, |j, _| {
            let mut acc = ZERO;
            for l in 0..dim {
                acc += weights[l] * self.vectors[(j, l)];
            }
            acc * C64::from_polar(1.0, angle * j as f64) * shift
        })
    }

    /// Columns `0..=last` of `D(β)` with the row phases `e^{i(ϑ+π/2)j}` left
    /// out, as real and imaginary parts. Bilinear forms `⟨D(β)n|A|D(β)m⟩`
    /// with a diagonal `A` only need the phase `e^{i(ϑ+π/2)(n−m)}` back.
    fn unphased_columns(&self, beta: C64, last: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let dim = self.dim();
        let r = beta.norm();
        let head = self.vectors.rows(0, last + 1).transpose();
        let mut wr = head.clone();
        let mut wi = head;
        for l in 0..dim {
            let (sin, cos) = (r * self.values[l]).sin_cos();
            wr.row_mut(l).scale_mut(cos);
            wi.row_mut(l).scale_mut(-sin);
        }
        (&self.vectors * wr, &self.vectors * wi)
    }

    /// `D(β)` applied to an arbitrary vector.
    pub fn apply(&self, beta: C64, v: &DVector<C64>) -> DVector<C64> {
        let (r, angle) = Self::frame(beta);
        let rotated = DVector::from_fn(v.len(), |j, _| v[j] * C64::from_polar(1.0, -angle * j as f64));
        let v_c = self.vectors.map(C64::from);
        let mut coeffs = v_c.transpose() * rotated;
        for (l, c) in coeffs.iter_mut().enumerate() {
            *c *= C64::from_polar(1.0, -r * self.values[l]);
        }
        let out = v_c * coeffs;
        DVector::from_fn(out.len(), |j, _| out[j] * C64::from_polar(1.0, angle * j as f64))
    }

    /// Full matrix `D(β)`.
    pub fn matrix(&self, beta: C64) -> DMatrix<C64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for m in 0..dim {
            out.set_column(m, &self.column(beta, m));
        }
        out
    }
}

/// Displacement operator `exp(αc† − α*c)` in dimension `dim`.
pub fn displacement_matrix(alpha: C64, dim: usize) -> DMatrix<C64> {
    Displacer::new(dim).matrix(alpha)
}

fn top_population(v: &DVector<C64>) -> f64 {
    let n = v.len();
    v.rows(n - 2, 2).iter().map(C64::norm_sqr).sum()
}

/// Mirror state vector; may be unnormalized after post-selection.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: DVector<C64>,
}

impl FockVector {
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::InvalidParams(format!("Fock dimension {} < 2", amps.len())));
        }
        let norm = amps.norm_squared();
        if !(norm <= 1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!("state norm² {norm} exceeds 1")));
        }
        Ok(FockVector { amps })
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amps))
    }

    /// Fock state `|n⟩`.
    pub fn basis(n: usize, dim: usize) -> Self {
        assert!(n < dim && dim >= 2);
        let mut amps = DVector::zeros(dim);
        amps[n] = ONE;
        FockVector { amps }
    }

    /// `(|0⟩ + e^{iχ}|1⟩)/√2`.
    pub fn vacuum_one_superposition(relative_phase: f64, dim: usize) -> Self {
        let mut amps = DVector::zeros(dim);
        amps[0] = C64::from(FRAC_1_SQRT_2);
        amps[1] = C64::from_polar(FRAC_1_SQRT_2, relative_phase);
        FockVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// `|ψ⟩⟨ψ|`, carrying the vector's norm as its trace.
    pub fn to_density(&self) -> FockDensity {
        FockDensity { matrix: &self.amps * self.amps.adjoint() }
    }
}

/// Mirror density operator; trace ≤ 1 (post-selected operators are unnormalized).
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity {
    matrix: DMatrix<C64>,
}

impl FockDensity {
    /// Validates Hermiticity (1e-10), trace ∈ [0, 1+1e-10] and eigenvalues ≥ −1e-8.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::InvalidParams(format!(
                "density matrix must be square with dim >= 2, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dev = linalg::hermiticity_deviation(&matrix);
        if dev > 1e-10 {
            return Err(Error::InvalidParams(format!("density matrix not Hermitian (deviation {dev:e})")));
        }
        let tr = linalg::trace(&matrix).re;
        if !(-1e-10..=1.0 + 1e-10).contains(&tr) {
            return Err(Error::InvalidParams(format!("density trace {tr} outside [0, 1]")));
        }
        let min = linalg::min_eigenvalue(&matrix);
        if min < -1e-8 {
            return Err(Error::InvalidParams(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(FockDensity { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<C64>) -> Self {
        FockDensity { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    /// `⟨ψ|ρ|ψ⟩ / (Tr ρ · ⟨ψ|ψ⟩)`.
    pub fn fidelity_with(&self, psi: &FockVector) -> f64 {
        let v = psi.amps();
        let overlap = (v.adjoint() * &self.matrix * v)[(0, 0)].re;
        overlap / (self.trace() * psi.norm_sqr())
    }

    /// Highest Fock level with an entry in its row or column above
    /// `cutoff` times the largest entry.
    fn support(&self, cutoff: f64) -> usize {
        let n = self.dim();
        let floor = cutoff * self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (0..n)
            .rev()
            .find(|&s| (0..n).any(|j| self.matrix[(s, j)].norm() > floor || self.matrix[(j, s)].norm() > floor))
            .unwrap_or(0)
    }
}

/// Coherent state `e^{−|α|²/2} Σ αⁿ/√(n!) |n⟩`.
pub fn coherent_vector(alpha: C64, dim: usize) -> Result<FockVector> {
    if dim < 2 {
        return Err(Error::InvalidParams(format!("Fock dimension {dim} < 2")));
    }
    let mut amps = DVector::zeros(dim);
    let mut term = C64::from((-alpha.norm_sqr() / 2.0).exp());
    for n in 0..dim {
        amps[n] = term;
        term = term * alpha / ((n + 1) as f64).sqrt();
    }
    let norm = amps.norm_squared();
    if 1.0 - norm > 1e-8 {
        return Err(Error::TruncationInadequate(format!(
            "coherent state |{alpha}⟩ loses {:e} of its norm in {dim} levels",
            1.0 - norm
        )));
    }
    Ok(FockVector { amps })
}

/// Photon path of the single-excitation subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// `|1⟩_A|0⟩_B`, the optomechanical cavity.
    A,
    /// `|0⟩_A|1⟩_B`, the rigid cavity.
    B,
}

/// Output port of the second beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    /// `(|A⟩ − |B⟩)/√2`, silent for a balanced unperturbed interferometer.
    Dark,
    /// `(|A⟩ + |B⟩)/√2`.
    Bright,
}

impl Port {
    /// Coefficient of the arm-B amplitude in `⟨port|`.
    pub(crate) fn b_sign(self) -> f64 {
        match self {
            Port::Dark => -1.0,
            Port::Bright => 1.0,
        }
    }
}

/// Joint photon-path ⊗ mirror pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPureState {
    arm_a: DVector<C64>,
    arm_b: DVector<C64>,
}

impl JointPureState {
    pub fn new(arm_a: DVector<C64>, arm_b: DVector<C64>) -> Result<Self> {
        if arm_a.len() != arm_b.len() || arm_a.len() < 2 {
            return Err(Error::InvalidParams("arm amplitudes must share a Fock dimension >= 2".into()));
        }
        let state = JointPureState { arm_a, arm_b };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParams(format!("joint state norm² {norm} is not 1")));
        }
        Ok(state)
    }

    /// Photon after the first beam splitter (and the shifter θ on arm A), mirror in |0⟩.
    pub fn input(theta: f64, dim: usize) -> Self {
        let mut arm_a = DVector::zeros(dim);
        let mut arm_b = DVector::zeros(dim);
        arm_a[0] = C64::from_polar(FRAC_1_SQRT_2, theta);
        arm_b[0] = C64::from(FRAC_1_SQRT_2);
        JointPureState { arm_a, arm_b }
    }

    pub fn dim(&self) -> usize {
        self.arm_a.len()
    }

    pub fn branch(&self, arm: Arm) -> &DVector<C64> {
        match arm {
            Arm::A => &self.arm_a,
            Arm::B => &self.arm_b,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.arm_a.norm_squared() + self.arm_b.norm_squared()
    }

    /// Stacked `[arm A; arm B]` amplitudes, matching the ordering of the
    /// joint density matrices in [`crate::lindblad`].
    pub fn to_vector(&self) -> DVector<C64> {
        let n = self.dim();
        DVector::from_fn(2 * n, |i, _| if i < n { self.arm_a[i] } else { self.arm_b[i - n] })
    }

    pub fn from_vector(v: &DVector<C64>) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::InvalidParams("joint vector length must be even".into()));
        }
        let n = v.len() / 2;
        Self::new(v.rows(0, n).into_owned(), v.rows(n, n).into_owned())
    }
}

/// Exact factored propagator at γ = 0:
/// `U = e^{i n_A² φ} exp[n_A(ϕc† − ϕ*c)] e^{−ic†cτ}` in the frame without the
/// optical carrier. The rightmost factor acts first.
pub fn evolve_pure(params: &ModelParams, tau: Tau, input: &JointPureState) -> Result<JointPureState> {
    if params.gamma() != 0.0 {
        return Err(Error::DampingUnsupported { gamma: params.gamma() });
    }
    let norm_in = input.norm_sqr();
    if (norm_in - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParams(format!("input norm² {norm_in} is not 1")));
    }
    let t = tau.value();
    let rotate = |v: &DVector<C64>| DVector::from_fn(v.len(), |n, _| v[n] * C64::from_polar(1.0, -(n as f64) * t));

    let rotated_a = rotate(&input.arm_a);
    let arm_b = rotate(&input.arm_b);

    let varphi = model::coherent_amplitude(params, tau);
    let displaced = Displacer::new(input.dim()).apply(varphi, &rotated_a);
    let leak = top_population(&displaced) - top_population(&rotated_a);
    if leak > LEAKAGE_LIMIT {
        return Err(Error::TruncationInadequate(format!(
            "displacement by {varphi} pushes {leak:e} into the top two of {} levels",
            input.dim()
        )));
    }
    let arm_a = displaced * C64::from_polar(1.0, model::kerr_phase(params, tau));

    let out = JointPureState { arm_a, arm_b };
    let norm = out.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::TruncationInadequate(format!("evolved norm² {norm}")));
    }
    Ok(out)
}

/// Project the photon onto an output port after applying the shifter `e^{iθ}`
/// to arm A. Returns the unnormalized mirror state and its squared norm.
pub fn postselect_pure(joint: &JointPureState, port: Port, theta: f64) -> (FockVector, f64) {
    let shift = C64::from_polar(FRAC_1_SQRT_2, theta);
    let amps = &joint.arm_a * shift + &joint.arm_b * C64::from(port.b_sign() * FRAC_1_SQRT_2);
    let prob = amps.norm_squared();
    (FockVector { amps }, prob)
}

/// Unnormalized conditioned mirror operator reconstructed from its closed-form summary.
pub fn conditioned_density(state: &ConditionedMirrorState, dim: usize) -> Result<FockDensity> {
    let phi = coherent_vector(state.varphi, dim)?;
    let vac = FockVector::basis(0, dim);
    let outer = |a: &FockVector, b: &FockVector| a.amps() * b.amps().adjoint();
    let coh = state.coherence();
    let m = (outer(&phi, &phi) - outer(&phi, &vac) * coh - outer(&vac, &phi) * coh.conj() + outer(&vac, &vac))
        * C64::from(0.25);
    Ok(FockDensity::from_matrix_unchecked(m))
}

/// Anything with a trace and lowering-operator moments.
pub trait MirrorState {
    fn trace(&self) -> f64;
    /// Unnormalized `(⟨c⟩, ⟨c†⟩)`.
    fn ladder_moments(&self) -> (C64, C64);
}

impl MirrorState for FockVector {
    fn trace(&self) -> f64 {
        self.norm_sqr()
    }

    fn ladder_moments(&self) -> (C64, C64) {
        let a = &self.amps;
        let lower: C64 = (1..a.len()).map(|n| a[n - 1].conj() * a[n] * (n as f64).sqrt()).sum();
        (lower, lower.conj())
    }
}

impl MirrorState for FockDensity {
    fn trace(&self) -> f64 {
        FockDensity::trace(self)
    }

    fn ladder_moments(&self) -> (C64, C64) {
        let m = &self.matrix;
        let lower = (1..m.nrows()).map(|n| m[(n, n - 1)] * (n as f64).sqrt()).sum();
        let raise = (1..m.nrows()).map(|n| m[(n - 1, n)] * (n as f64).sqrt()).sum();
        (lower, raise)
    }
}

fn normalized_moments(state: &impl MirrorState) -> Result<(C64, C64)> {
    let tr = state.trace();
    if !(tr >= DEGENERATE_PROB) {
        return Err(Error::DegeneratePostselection { prob: tr });
    }
    let (lower, raise) = state.ladder_moments();
    Ok((lower / tr, raise / tr))
}

/// `⟨c + c†⟩` of the normalized state, in units of σ.
pub fn expectation_q(state: &impl MirrorState) -> Result<f64> {
    let (lower, raise) = normalized_moments(state)?;
    Ok((lower + raise).re)
}

/// `⟨−i(c − c†)⟩` of the normalized state, in units of ħ/2σ.
pub fn expectation_p(state: &impl MirrorState) -> Result<f64> {
    let (lower, raise) = normalized_moments(state)?;
    Ok((C64::new(0.0, -1.0) * (lower - raise)).re)
}

/// Rectangular sampling of the `(x, y)` phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        GridSpec { x_min: -half_width, x_max: half_width, nx: n, y_min: -half_width, y_max: half_width, ny: n }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
            && self.nx >= 2
            && self.ny >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("bad Wigner grid {self:?}")))
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.dy()
    }

    fn max_radius(&self) -> f64 {
        let xm = self.x_min.abs().max(self.x_max.abs());
        let ym = self.y_min.abs().max(self.y_max.abs());
        0.5 * xm.hypot(ym)
    }
}

/// Sampled Wigner function; `values[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.nx + ix]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ W dx dy / 4`, which approximates the state's trace.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.dx() * self.spec.dy() / 4.0
    }
}

/// Fock levels whose entries all lie below this fraction of the largest
/// entry are left out of the Wigner sum.
const WIGNER_SUPPORT_CUTOFF: f64 = 1e-20;

/// Wigner function `W(x, y) = (2/π) Tr[ρ D(α) Π D†(α)]` with `α = (x + iy)/2`.
///
/// The displaced-parity sum is evaluated in a working dimension large enough
/// for the grid's largest |α|; the state is zero-padded into it. Levels with
/// no entry above 1e-20 of the largest are skipped, which changes W by less
/// than `dim² · 1e-20` of that entry.
pub fn wigner(state: &FockDensity, grid: &GridSpec) -> Result<WignerGrid> {
    grid.validate()?;
    let tr = state.trace();
    if !(tr > 0.0 && tr <= 1.0 + 1e-10) {
        return Err(Error::InvalidParams(format!("state trace {tr} outside (0, 1]")));
    }
    let support = state.support(WIGNER_SUPPORT_CUTOFF);
    let r = grid.max_radius();
    let work_dim = state.dim().max(support + 1 + (r * r + 8.0 * r).ceil() as usize + 16);
    let displacer = Displacer::new(work_dim);
    let rho = state.matrix();

    let node = |x: f64, y: f64| -> Result<f64> {
        let alpha = C64::new(x / 2.0, y / 2.0);
        let beta = -alpha;
        let (re, im) = displacer.unphased_columns(beta, support);
        for m in 0..=support {
            let top = work_dim - 2;
            let leak: f64 = (top..work_dim).map(|j| re[(j, m)].powi(2) + im[(j, m)].powi(2)).sum();
            if leak > WIGNER_LEAKAGE_LIMIT {
                return Err(Error::TruncationInadequate(format!(
                    "D(-{alpha})|{m}⟩ leaves {leak:e} in the top levels of {work_dim}"
                )));
            }
        }
        let angle = beta.arg() + PI / 2.0;
        let mut acc = ZERO;
        for m in 0..=support {
            for n in 0..=support {
                let rho_mn = rho[(m, n)];
                if rho_mn == ZERO {
                    continue;
                }
                // Σ_j (−1)^j conj(d_jn) d_jm
                let mut overlap = ZERO;
                for j in 0..work_dim {
                    let term = C64::new(re[(j, n)], -im[(j, n)]) * C64::new(re[(j, m)], im[(j, m)]);
                    if j % 2 == 0 {
                        overlap += term;
                    } else {
                        overlap -= term;
                    }
                }
                acc += rho_mn * overlap * C64::from_polar(1.0, angle * (n as f64 - m as f64));
            }
        }
        Ok(2.0 / PI * acc.re)
    };

    let values = (0..grid.ny)
        .into_par_iter()
        .map(|iy| {
            let y = grid.y(iy);
            (0..grid.nx).map(|ix| node(grid.x(ix), y)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?
        .into_iter()
        .flatten()
        .collect();

    Ok(WignerGrid { spec: *grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const K: f64 = 0.005;

    fn t(x: f64) -> Tau {
        Tau::new(x).unwrap()
    }

    #[test]
    fn annihilation_examples() {
        let c = annihilation_matrix(2);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]));
        assert_relative_eq!(annihilation_matrix(3)[(1, 2)].re, 2f64.sqrt());
    }

    #[test]
    fn commutator_is_identity_except_corner() {
        let n = 16;
        let c = annihilation_matrix(n);
        let comm = &c * c.adjoint() - c.adjoint() * &c;
        for i in 0..n {
            for j in 0..n {
                let want = match (i == j, i == n - 1) {
                    (true, false) => 1.0,
                    (true, true) => -((n - 1) as f64),
                    _ => 0.0,
                };
                assert!((comm[(i, j)] - C64::from(want)).norm() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn parity_of_basis_states() {
        let p = parity_matrix(9);
        for n in 0..9 {
            let v = FockVector::basis(n, 9);
            let got = (v.amps().adjoint() * &p * v.amps())[(0, 0)].re;
            assert_eq!(got, if n % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn coherent_examples() {
        assert_eq!(coherent_vector(ZERO, 8).unwrap(), FockVector::basis(0, 8));
        let v = coherent_vector(C64::from(0.01), 8).unwrap();
        assert_relative_eq!(v.amps()[0].re, (-5e-5f64).exp(), max_relative = 1e-15);
        assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(matches!(coherent_vector(C64::from(3.0), 8), Err(Error::TruncationInadequate(_))));
    }

    #[test]
    fn displacement_of_vacuum_is_coherent() {
        let dim = 24;
        for &alpha in &[C64::new(0.3, -0.2), C64::new(-1.1, 0.7), C64::new(0.0, 0.01)] {
            let d = displacement_matrix(alpha, dim);
            let want = coherent_vector(alpha, dim).unwrap();
            for n in 0..10 {
                assert!((d[(n, 0)] - want.amps()[n]).norm() < 1e-10, "alpha={alpha} n={n}");
            }
            let unit = &d * d.adjoint();
            assert!((unit - DMatrix::identity(dim, dim)).norm() < 1e-10);
        }
    }

    #[test]
    fn displacer_apply_matches_matrix() {
        let disp = Displacer::new(12);
        let beta = C64::new(0.4, 0.9);
        let v = DVector::from_fn(12, |i, _| C64::new(1.0 / (1.0 + i as f64), 0.3 * i as f64).scale(0.1));
        let a = disp.apply(beta, &v);
        let b = disp.matrix(beta) * &v;
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn quadrature_examples() {
        let vac = FockVector::basis(0, 8);
        assert_eq!(expectation_q(&vac).unwrap(), 0.0);
        assert_eq!(expectation_p(&vac).unwrap(), 0.0);

        let plus = FockVector::vacuum_one_superposition(0.0, 8);
        assert_relative_eq!(expectation_q(&plus).unwrap(), 1.0, max_relative = 1e-15);
        let minus = FockVector::vacuum_one_superposition(PI, 8);
        assert!(expectation_p(&minus).unwrap().abs() < 1e-15);
        let quarter = FockVector::vacuum_one_superposition(PI / 2.0, 8);
        assert_relative_eq!(expectation_p(&quarter).unwrap(), 1.0, max_relative = 1e-15);

        let coh = coherent_vector(C64::from(0.01), 16).unwrap();
        assert!((expectation_q(&coh).unwrap() - 0.02).abs() < 1e-10);
        // density route agrees with vector route
        assert!((expectation_q(&coh.to_density()).unwrap() - 0.02).abs() < 1e-10);
    }

    #[test]
    fn expectation_rejects_zero_trace() {
        let zero = FockVector::new(DVector::zeros(4)).unwrap();
        assert!(matches!(expectation_q(&zero), Err(Error::DegeneratePostselection { .. })));
        assert!(matches!(expectation_p(&zero.to_density()), Err(Error::DegeneratePostselection { .. })));
    }

    #[test]
    fn evolve_identity_at_zero_time() {
        let params = ModelParams::coupling(K).unwrap();
        let input = JointPureState::input(0.3, 16);
        let out = evolve_pure(&params, Tau::ZERO, &input).unwrap();
        assert!((out.to_vector() - input.to_vector()).norm() < 1e-14);
    }

    #[test]
    fn arm_b_photon_leaves_mirror_in_vacuum() {
        let params = ModelParams::coupling(0.1).unwrap();
        let mut b = DVector::zeros(16);
        b[0] = ONE;
        let input = JointPureState::new(DVector::zeros(16), b).unwrap();
        let out = evolve_pure(&params, t(2.7), &input).unwrap();
        assert!(out.branch(Arm::A).norm() < 1e-15);
        assert!((out.branch(Arm::B)[0] - ONE).norm() < 1e-15);
    }

    #[test]
    fn evolve_rejects_damping() {
        let params = ModelParams::new(K, 0.01, 0.0).unwrap();
        assert!(evolve_pure(&params, t(1.0), &JointPureState::input(0.0, 16)).is_err());
    }

    #[test]
    fn postselection_probabilities() {
        let input = JointPureState::input(0.0, 16);
        let (_, p) = postselect_pure(&input, Port::Dark, 0.0);
        assert!(p < 1e-30);
        let (_, p) = postselect_pure(&input, Port::Dark, 0.001);
        assert_relative_eq!(p, (0.0005f64).sin().powi(2), max_relative = 1e-10);
        let (_, bright) = postselect_pure(&input, Port::Bright, 0.001);
        assert_relative_eq!(p + bright, 1.0, max_relative = 1e-14);

        let params = ModelParams::coupling(K).unwrap();
        let tau = t(2.0 * PI * (1.0 + K));
        let evolved = evolve_pure(&params, tau, &input).unwrap();
        let (_, p) = postselect_pure(&evolved, Port::Dark, 0.0);
        let want = model::conditioned_state(&params, tau).unwrap().success_prob;
        assert_relative_eq!(p, want, max_relative = 1e-7);
        assert_relative_eq!(p, 1.2336508198497761e-8, max_relative = 1e-7);
    }

    #[test]
    fn postselected_mirror_is_kerr_shifted_coherent_minus_vacuum() {
        let params = ModelParams::coupling(K).unwrap();
        for &x in &[0.4, 3.0, 6.3] {
            let tau = t(x);
            let evolved = evolve_pure(&params, tau, &JointPureState::input(0.0, 16)).unwrap();
            let (mirror, _) = postselect_pure(&evolved, Port::Dark, 0.0);
            let phi = coherent_vector(model::coherent_amplitude(&params, tau), 16).unwrap();
            let kerr = C64::from_polar(1.0, model::kerr_phase(&params, tau));
            let mut want = phi.amps() * kerr;
            want[0] -= ONE;
            want *= C64::from(0.5);
            assert!((mirror.amps() - want).norm() < 1e-13, "tau={x}");
        }
    }

    #[test]
    fn conditioned_density_trace_is_success_probability() {
        let params = ModelParams::new(K, K, 0.001).unwrap();
        let st = model::conditioned_state(&params, t(5.0)).unwrap();
        let rho = conditioned_density(&st, 16).unwrap();
        assert_relative_eq!(rho.trace(), st.success_prob, max_relative = 1e-6);
    }

    #[test]
    fn wigner_origin_values() {
        let origin = GridSpec { x_min: -0.5, x_max: 0.5, nx: 3, y_min: -0.5, y_max: 0.5, ny: 3 };
        let at_origin = |v: FockVector| wigner(&v.to_density(), &origin).unwrap().at(1, 1);
        assert!((at_origin(FockVector::basis(0, 8)) - 2.0 / PI).abs() < 1e-12);
        assert!((at_origin(FockVector::basis(1, 8)) + 2.0 / PI).abs() < 1e-12);
        assert!(at_origin(FockVector::vacuum_one_superposition(PI, 8)).abs() < 1e-12);
    }

    #[test]
    fn wigner_of_vacuum_is_gaussian() {
        let grid = GridSpec::square(3.0, 13);
        let w = wigner(&FockVector::basis(0, 8).to_density(), &grid).unwrap();
        for iy in 0..13 {
            for ix in 0..13 {
                let (x, y) = (grid.x(ix), grid.y(iy));
                let want = 2.0 / PI * (-(x * x + y * y) / 2.0).exp();
                assert!((w.at(ix, iy) - want).abs() < 1e-10, "({x},{y})");
            }
        }
    }

    #[test]
    fn wigner_of_coherent_state_is_shifted_gaussian() {
        let alpha = C64::new(0.5, -0.25);
        let grid = GridSpec::square(3.0, 7);
        let w = wigner(&coherent_vector(alpha, 20).unwrap().to_density(), &grid).unwrap();
        for iy in 0..7 {
            for ix in 0..7 {
                let (x, y) = (grid.x(ix), grid.y(iy));
                let d = C64::new(x / 2.0, y / 2.0) - alpha;
                let want = 2.0 / PI * (-2.0 * d.norm_sqr()).exp();
                assert!((w.at(ix, iy) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn wigner_integrates_to_trace() {
        let grid = GridSpec::square(4.0, 81);
        for v in [
            FockVector::basis(0, 8),
            FockVector::basis(1, 8),
            FockVector::vacuum_one_superposition(PI, 8),
            FockVector::vacuum_one_superposition(0.0, 8),
        ] {
            let w = wigner(&v.to_density(), &grid).unwrap();
            assert!((w.integral() - 1.0).abs() < 1e-2, "{}", w.integral());
        }
        let half = FockVector::from_slice(&[C64::from(0.5), C64::from(0.5)]).unwrap();
        let w = wigner(&half.to_density(), &grid).unwrap();
        assert!((w.integral() - 0.5).abs() < 1e-2);
    }

    #[test]
    fn wigner_negativity_of_superposition() {
        let w = wigner(&FockVector::vacuum_one_superposition(PI, 8).to_density(), &GridSpec::square(4.0, 41)).unwrap();
        assert!(w.min() < 0.0);
    }

    #[test]
    fn wigner_rejects_bad_inputs() {
        let rho = FockVector::basis(0, 4).to_density();
        assert!(wigner(&rho, &GridSpec { nx: 1, ..GridSpec::square(1.0, 3) }).is_err());
        let zero = FockVector::new(DVector::zeros(4)).unwrap().to_density();
        assert!(wigner(&zero, &GridSpec::square(1.0, 3)).is_err());
    }

    #[test]
    fn density_validation() {
        assert!(FockDensity::new(FockVector::basis(1, 4).to_density().matrix().clone()).is_ok());
        let mut m = DMatrix::<C64>::zeros(3, 3);
        m[(0, 1)] = ONE;
        assert!(FockDensity::new(m).is_err());
        let neg = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::from(1.1), C64::from(-0.1)]));
        assert!(FockDensity::new(neg).is_err());
    }
}
