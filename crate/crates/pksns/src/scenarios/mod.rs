//! Scenario drivers. Each writes its tables into the configured output
//! directory and returns a serializable report.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use pksns_core::ic::{gaussian_blob, random_band_scalar, random_band_velocity, random_horizontal};
use pksns_core::{FlowState, Grid, SpectralField, VectorField, WaveIndex, C64};
use serde::Serialize;

use crate::config::{DensityIc, RunConfig, Scenario, VelocityIc, VelocityScale};
use crate::error::{io_err, Result};

pub mod critical;
pub mod full_run;
pub mod linear_decay;
pub mod lemmas;
pub mod sweep;

pub use critical::{twod_critical, CriticalReport};
pub use full_run::{full_run, run_member, FullRunReport, MemberOutcome};
pub use lemmas::{check_lemmas, LemmaSummary};
pub use linear_decay::{linear_decay, DecayReport, DecayRow};
pub use sweep::{sweep, SweepReport};

pub fn density(grid: &Arc<Grid>, ic: &DensityIc) -> Result<SpectralField> {
    let with_mean = |mut f: SpectralField, mean: f64| {
        let c = f.coeff(WaveIndex { k1: 0, m: 0, k3: 0 });
        f.set_coeff(WaveIndex { k1: 0, m: 0, k3: 0 }, c + C64::new(mean, 0.0));
        f
    };
    Ok(match *ic {
        DensityIc::GaussianBlob { center, width, mass } => gaussian_blob(grid, center.unwrap_or([PI, 0.0, PI]), width, mass)?,
        DensityIc::RandomBand { seed, band, amplitude, envelope, mean } => with_mean(random_band_scalar(grid, seed, band, amplitude, envelope)?, mean),
        DensityIc::HorizontalBand { seed, band, amplitude, envelope, mean } => with_mean(random_horizontal(grid, seed, band, amplitude, envelope)?, mean),
        DensityIc::Zero => SpectralField::zeros(grid, 0.0),
    })
}

/// Velocity initial condition at amplitude `a`.
pub fn velocity(grid: &Arc<Grid>, ic: &VelocityIc, a: f64) -> Result<VectorField> {
    Ok(match *ic {
        VelocityIc::RandomBand { seed, band, envelope, c0, scale } => {
            let factor = match scale {
                VelocityScale::AmplitudeScaled => c0 * a.powf(-2.0 / 3.0),
                VelocityScale::None => c0,
            };
            random_band_velocity(grid, seed, band, envelope)?.scaled(factor)
        }
        VelocityIc::Zero => VectorField::zeros(grid, 0.0),
    })
}

/// Initial state of a scenario member at amplitude `a`.
pub fn initial_state(cfg: &RunConfig, grid: &Arc<Grid>, a: f64) -> Result<FlowState> {
    let n = density(grid, &cfg.density_ic())?;
    let u = if cfg.physics().fluid { velocity(grid, &cfg.velocity_ic(), a)? } else { VectorField::zeros(grid, 0.0) };
    Ok(FlowState::new(0.0, n, u)?)
}

/// File-name fragment for an amplitude or mass, e.g. `1000` or `12.566`.
pub fn tag(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

/// Any scenario's report, for the command line.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Report {
    LinearDecay(DecayReport),
    Critical(CriticalReport),
    Sweep(SweepReport),
    FullRun(FullRunReport),
    Lemmas(LemmaSummary),
}

impl Report {
    /// One-line human summary.
    pub fn summary(&self) -> String {
        match self {
            Report::LinearDecay(r) => format!("linear-decay: slope {:.4} over {} amplitudes", r.slope, r.rows.len()),
            Report::Critical(r) => {
                let parts: Vec<String> = r.members.iter().map(|m| format!("mass {} {}", tag(m.mass), m.verdict)).collect();
                format!("twod-critical: {}", parts.join(", "))
            }
            Report::Sweep(r) => format!("sweep-A: {}", r.threshold.status),
            Report::FullRun(r) => format!("full-run: {} at t = {:.6} after {} steps", r.outcome.verdict, r.outcome.t_final, r.outcome.steps),
            Report::Lemmas(r) => format!("check-lemmas: {}", if r.passed { "all checks passed" } else { "some checks failed" }),
        }
    }
}

/// Runs the configured scenario; `resume` applies to `full-run` only.
pub fn run(cfg: &RunConfig, resume: Option<&Path>) -> Result<Report> {
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()?).map_err(io_err(&path))?;
    Ok(match cfg.scenario {
        Scenario::LinearDecay => Report::LinearDecay(linear_decay(cfg)?),
        Scenario::TwodCritical => Report::Critical(twod_critical(cfg)?),
        Scenario::SweepA => Report::Sweep(sweep(cfg)?),
        Scenario::FullRun => Report::FullRun(full_run(cfg, resume)?),
        Scenario::CheckLemmas => Report::Lemmas(check_lemmas(cfg)?),
    })
}
