//! Figure presets: fixed parameter sets rendered to CSV and SVG.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::ValueEnum;
use optoweak::fockspace::{self, FockDensity, FockVector, GridSpec, WignerGrid, DEFAULT_FOCK_DIM};
use optoweak::ModelParams;

use crate::export::{self, LinePlot, Series};
use crate::sweep::{self, Engine, Observable, SweepConfig, SweepResult, SweepRow};

pub const FIG_COUPLING: f64 = 0.005;
pub const FIG_DAMPING: f64 = 0.005;
pub const FIG_SHIFT: f64 = 0.001;
pub const FIG_TAU_END: f64 = 8.0 * PI;
pub const FIG_STEPS: usize = 4000;
pub const WIGNER_HALF_WIDTH: f64 = 4.0;
pub const WIGNER_POINTS: usize = 201;

pub const TIME_LABEL: &str = "ω_m t";
pub const Q_LABEL: &str = "⟨q⟩/σ";
pub const P_LABEL: &str = "⟨p⟩/(ħ/2σ)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// ⟨q⟩ without phase shifter, γ = 0 and γ = 0.005.
    Fig2,
    /// Wigner function of (|0⟩ − |1⟩)/√2.
    Fig3,
    /// ⟨p⟩ without damping.
    Fig4,
    /// ⟨q⟩ with θ = +0.001.
    Fig5a,
    /// ⟨q⟩ with θ = −0.001.
    Fig5b,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5a => "fig5a",
            Figure::Fig5b => "fig5b",
        }
    }
}

/// One curve of a line-plot preset.
#[derive(Debug, Clone)]
pub struct PresetCurve {
    pub file_stem: String,
    pub label: String,
    pub config: SweepConfig,
    pub dashed: bool,
}

fn curve(stem: String, label: String, gamma: f64, theta: f64, observable: Observable, dashed: bool) -> PresetCurve {
    let params = ModelParams::new(FIG_COUPLING, gamma, theta).expect("preset parameters are valid");
    let config = SweepConfig::new(params, 0.0, FIG_TAU_END, FIG_STEPS, observable, Engine::Analytic).expect("preset sweep is valid");
    PresetCurve { file_stem: stem, label, config, dashed }
}

fn damping_pair(name: &str, theta: f64) -> Vec<PresetCurve> {
    vec![
        curve(format!("{name}_gamma0"), "γ = 0".into(), 0.0, theta, Observable::Q, false),
        curve(format!("{name}_gamma0.005"), format!("γ = {FIG_DAMPING}"), FIG_DAMPING, theta, Observable::Q, true),
    ]
}

/// Curves of a line-plot figure; empty for the Wigner figure.
pub fn preset_curves(figure: Figure) -> Vec<PresetCurve> {
    match figure {
        Figure::Fig2 => damping_pair("fig2", 0.0),
        Figure::Fig4 => vec![curve("fig4".into(), "γ = 0".into(), 0.0, 0.0, Observable::P, false)],
        Figure::Fig5a => damping_pair("fig5a", FIG_SHIFT),
        Figure::Fig5b => damping_pair("fig5b", -FIG_SHIFT),
        Figure::Fig3 => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WignerState {
    /// |0⟩
    Vacuum,
    /// |1⟩
    OnePhonon,
    /// (|0⟩ − |1⟩)/√2
    MinusSuperposition,
    /// (|0⟩ + |1⟩)/√2
    PlusSuperposition,
}

impl WignerState {
    pub fn vector(self) -> FockVector {
        match self {
            WignerState::Vacuum => FockVector::basis(0, DEFAULT_FOCK_DIM),
            WignerState::OnePhonon => FockVector::basis(1, DEFAULT_FOCK_DIM),
            WignerState::MinusSuperposition => FockVector::vacuum_one_superposition(PI, DEFAULT_FOCK_DIM),
            WignerState::PlusSuperposition => FockVector::vacuum_one_superposition(0.0, DEFAULT_FOCK_DIM),
        }
    }

    pub fn density(self) -> FockDensity {
        self.vector().to_density()
    }

    pub fn label(self) -> &'static str {
        match self {
            WignerState::Vacuum => "|0⟩",
            WignerState::OnePhonon => "|1⟩",
            WignerState::MinusSuperposition => "(|0⟩ − |1⟩)/√2",
            WignerState::PlusSuperposition => "(|0⟩ + |1⟩)/√2",
        }
    }
}

pub fn wigner_grid(state: WignerState, spec: &GridSpec) -> Result<WignerGrid> {
    Ok(fockspace::wigner(&state.density(), spec)?)
}

/// Write `<stem>.csv` and `<stem>.svg` for a Wigner grid.
pub fn emit_wigner(grid: &WignerGrid, title: &str, stem: &Path) -> Result<Vec<PathBuf>> {
    let csv = stem.with_extension("csv");
    let svg = stem.with_extension("svg");
    export::write_text(&csv, &export::wigner_csv(grid)?)?;
    export::write_text(&svg, &export::heatmap_svg(grid, title, "q/σ", "p/(ħ/2σ)")?)?;
    Ok(vec![csv, svg])
}

fn y_of(observable: Observable) -> (fn(&SweepRow) -> Option<f64>, &'static str) {
    match observable {
        Observable::P => (|r| r.p_dimensionless, P_LABEL),
        _ => (|r| r.q_over_sigma, Q_LABEL),
    }
}

/// Sweep every curve of a line preset.
pub fn run_preset(figure: Figure) -> Result<Vec<(PresetCurve, SweepResult)>> {
    preset_curves(figure)
        .into_iter()
        .map(|c| {
            let res = sweep::run_analytic(&c.config)?;
            Ok((c, res))
        })
        .collect()
}

fn title(figure: Figure) -> String {
    match figure {
        Figure::Fig2 => format!("Mirror displacement, k = {FIG_COUPLING}, θ = 0"),
        Figure::Fig3 => "Wigner function of (|0⟩ − |1⟩)/√2".into(),
        Figure::Fig4 => format!("Mirror momentum, k = {FIG_COUPLING}, γ = 0"),
        Figure::Fig5a => format!("Mirror displacement, k = {FIG_COUPLING}, θ = {FIG_SHIFT}"),
        Figure::Fig5b => format!("Mirror displacement, k = {FIG_COUPLING}, θ = −{FIG_SHIFT}"),
    }
}

/// Render a preset into `out_dir`; returns the files written.
pub fn figure(figure: Figure, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if figure == Figure::Fig3 {
        let grid = wigner_grid(WignerState::MinusSuperposition, &GridSpec::square(WIGNER_HALF_WIDTH, WIGNER_POINTS))?;
        return emit_wigner(&grid, &title(figure), &out_dir.join(figure.name()));
    }
    let mut written = Vec::new();
    let mut series = Vec::new();
    let mut y_label = Q_LABEL;
    for (curve, result) in run_preset(figure)? {
        let path = out_dir.join(format!("{}.csv", curve.file_stem));
        export::emit_csv(&result, &path)?;
        written.push(path);
        let (field, label) = y_of(curve.config.observable);
        y_label = label;
        series.push(Series::from_sweep(curve.label.clone(), &result, field, curve.dashed));
    }
    let plot = LinePlot { title: title(figure), x_label: TIME_LABEL.into(), y_label: y_label.into(), series };
    let svg = out_dir.join(format!("{}.svg", figure.name()));
    export::write_text(&svg, &export::line_plot_svg(&plot)?)?;
    written.push(svg);
    Ok(written)
}
