use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use optoweak::fockspace::GridSpec;
use optoweak::lindblad::IntegratorConfig;
use optoweak_cli::export;
use optoweak_cli::figures::{self, Figure, WignerState};
use optoweak_cli::sweep::{self, Engine, Observable, SweepFile};
use optoweak_cli::verify;

#[derive(Parser)]
#[command(name = "optoweak", version, about = "Post-selected weak measurement of an optomechanical mirror")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate ⟨q⟩ and/or ⟨p⟩ of the dark-port conditioned mirror over a τ grid.
    Sweep {
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        #[arg(long)]
        tau_start: Option<f64>,
        #[arg(long)]
        tau_end: Option<f64>,
        /// Number of grid points, endpoints included.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum)]
        observable: Option<Observable>,
        #[arg(long, value_enum)]
        engine: Option<Engine>,
        /// Oracle time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Oracle Fock truncation.
        #[arg(long)]
        fock_dim: Option<usize>,
        /// JSON file with any of the above; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV output; an SVG plot is written next to it. With `--engine both`
        /// the oracle rows go to `<stem>.oracle.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a figure preset to CSV and SVG.
    Figure {
        #[arg(value_enum)]
        name: Figure,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sample the Wigner function of a mirror state; writes PATH.csv and PATH.svg.
    Wigner {
        #[arg(long, value_enum)]
        state: WignerState,
        /// `A:B:N` (N samples from A to B).
        #[arg(long, default_value = "-4:4:201", allow_hyphen_values = true)]
        x_range: String,
        #[arg(long, default_value = "-4:4:201", allow_hyphen_values = true)]
        y_range: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the closed form with the master-equation oracle; exit status 1 on failure.
    Verify {
        #[arg(long, default_value_t = verify::DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long, default_value_t = IntegratorConfig::default().dt)]
        dt: f64,
        #[arg(long, default_value_t = IntegratorConfig::default().fock_dim)]
        fock_dim: usize,
        /// JSON report path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_range(text: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        bail!("range '{text}' is not of the form A:B:N");
    };
    Ok((
        a.trim().parse().with_context(|| format!("range start in '{text}'"))?,
        b.trim().parse().with_context(|| format!("range end in '{text}'"))?,
        n.trim().parse().with_context(|| format!("sample count in '{text}'"))?,
    ))
}

fn sweep_plot(result: &sweep::SweepResult, title: String) -> Result<String> {
    let series = vec![
        export::Series::from_sweep(figures::Q_LABEL, result, |r| r.q_over_sigma, false),
        export::Series::from_sweep(figures::P_LABEL, result, |r| r.p_dimensionless, true),
    ];
    let y_label = match (series[0].points.is_empty(), series[1].points.is_empty()) {
        (false, true) => figures::Q_LABEL,
        (true, false) => figures::P_LABEL,
        _ => "conditioned mean",
    };
    export::line_plot_svg(&export::LinePlot { title, x_label: figures::TIME_LABEL.into(), y_label: y_label.into(), series })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep { k, gamma, theta, tau_start, tau_end, steps, observable, engine, dt, fock_dim, config, out } => {
            let base = match &config {
                Some(path) => SweepFile::load(path)?,
                None => SweepFile::default(),
            };
            let flags = SweepFile { k, gamma, theta, tau_start, tau_end, steps, observable, engine, dt, fock_dim };
            let cfg = base.overlay(flags).resolve()?;
            let output = sweep::run_sweep(&cfg)?;
            let title = format!("k = {}, γ = {}, θ = {}", cfg.params.k(), cfg.params.gamma(), cfg.params.theta());
            let oracle_path = out.with_extension("oracle.csv");
            let mut written = Vec::new();
            match (&output.analytic, &output.oracle) {
                (Some(a), oracle) => {
                    export::emit_csv(a, &out)?;
                    export::write_text(&out.with_extension("svg"), &sweep_plot(a, title.clone())?)?;
                    written.push(out.clone());
                    if let Some(o) = oracle {
                        export::emit_csv(o, &oracle_path)?;
                        written.push(oracle_path);
                    }
                }
                (None, Some(o)) => {
                    export::emit_csv(o, &out)?;
                    export::write_text(&out.with_extension("svg"), &sweep_plot(o, title)?)?;
                    written.push(out.clone());
                }
                (None, None) => unreachable!("run_sweep always evaluates an engine"),
            }
            for path in written {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Figure { name, out_dir } => {
            for path in figures::figure(name, &out_dir)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Wigner { state, x_range, y_range, out } => {
            let (x_min, x_max, nx) = parse_range(&x_range)?;
            let (y_min, y_max, ny) = parse_range(&y_range)?;
            let spec = GridSpec { x_min, x_max, nx, y_min, y_max, ny };
            let grid = figures::wigner_grid(state, &spec)?;
            let title = format!("Wigner function of {}", state.label());
            for path in figures::emit_wigner(&grid, &title, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { tolerance, dt, fock_dim, out } => {
            if !(tolerance >= 0.0) {
                bail!("tolerance must be non-negative, got {tolerance}");
            }
            let config = IntegratorConfig::new(dt, fock_dim)?;
            let report = verify::verify_default(tolerance, &config);
            export::write_text(&out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            println!(
                "{}: max |analytic - oracle| = {:e} over {} points ({} errors), tolerance {:e}",
                if report.pass { "PASS" } else { "FAIL" },
                report.max_abs_diff,
                report.compared,
                report.errors,
                report.tolerance
            );
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
