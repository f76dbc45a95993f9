//! Two-dimensional blob runs at several masses, without fluid.

use pksns_core::{FlowState, Simulation, VectorField, Verdict};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DensityIc, RunConfig};
use crate::csvio::{fmt_f64, write_table, CsvWriter};
use crate::error::Result;
use crate::fft;

use super::full_run::{run_member, settings};
use super::{density, tag, write_json};

pub const COLUMNS: [&str; 6] = ["mass", "verdict", "t_final", "max_n_linf", "steps", "max_mass_drift"];

#[derive(Clone, Debug, Serialize)]
pub struct CriticalMember {
    pub mass: f64,
    pub verdict: Verdict,
    pub t_final: f64,
    pub max_n_linf: f64,
    pub steps: u64,
    pub max_mass_drift: f64,
    pub diag_csv: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalReport {
    pub members: Vec<CriticalMember>,
}

/// Writes `critical.csv` and one `diag_mass<M>.csv` trajectory per mass.
/// The amplitude is fixed to 1; it only enters through the time scale.
pub fn twod_critical(cfg: &RunConfig) -> Result<CriticalReport> {
    let grid = fft::grid(cfg.grid_spec())?;
    let params = cfg.core_params(1.0);
    let out = &cfg.output_dir;
    let base = cfg.density_ic();
    let members: Vec<CriticalMember> = cfg
        .critical
        .masses
        .par_iter()
        .map(|&mass| -> Result<CriticalMember> {
            let ic = match base {
                DensityIc::GaussianBlob { center, width, .. } => DensityIc::GaussianBlob { center, width, mass },
                ref other => other.clone(),
            };
            let st = FlowState::new(0.0, density(&grid, &ic)?, VectorField::zeros(&grid, 0.0))?;
            let name = format!("diag_mass{}.csv", tag(mass));
            let mut w = CsvWriter::create(&out.join(&name))?;
            let sim = Simulation::new(st, params.clone(), settings(cfg))?;
            let o = run_member(sim, cfg.sample_every, &[], Some(&mut w), None)?;
            Ok(CriticalMember { mass, verdict: o.verdict, t_final: o.t_final, max_n_linf: o.max_n_linf, steps: o.steps, max_mass_drift: o.max_mass_drift, diag_csv: name })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = members
        .iter()
        .map(|m| vec![fmt_f64(m.mass), m.verdict.to_string(), fmt_f64(m.t_final), fmt_f64(m.max_n_linf), m.steps.to_string(), fmt_f64(m.max_mass_drift)])
        .collect();
    write_table(&out.join("critical.csv"), &COLUMNS, &rows)?;
    let report = CriticalReport { members };
    write_json(&out.join("critical.json"), &report)?;
    Ok(report)
}
