//! Full runs of one initial-condition family over a list of amplitudes.

use pksns_core::{Simulation, Verdict};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::csvio::{fmt_f64, write_table, CsvWriter};
use crate::error::Result;
use crate::fft;

use super::full_run::{run_member, settings, MemberOutcome};
use super::{initial_state, tag, write_json};

pub const SWEEP_COLUMNS: [&str; 7] = ["A", "verdict", "t_final", "max_n_linf", "flags", "max_E_ratio", "max_linf_ratio"];
pub const THRESHOLD_COLUMNS: [&str; 3] = ["A_blowup_max", "A_global_min", "status"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Threshold {
    /// Largest amplitude that blew up.
    pub a_blowup_max: Option<f64>,
    /// Smallest amplitude that stayed global.
    pub a_global_min: Option<f64>,
    /// `OK`, `VERDICT_NONMONOTONE`, `NO_BLOWUP` or `NO_GLOBAL`.
    pub status: String,
}

/// Threshold interval of `(A, verdict)` pairs sorted by `A`.
pub fn threshold(table: &[(f64, Verdict)]) -> Threshold {
    let a_blowup_max = table.iter().filter(|(_, v)| *v == Verdict::Blowup).map(|(a, _)| *a).last();
    let a_global_min = table.iter().find(|(_, v)| *v == Verdict::Global).map(|(a, _)| *a);
    let status = match (a_blowup_max, a_global_min) {
        (Some(b), Some(g)) if b > g => "VERDICT_NONMONOTONE",
        (Some(_), Some(_)) => "OK",
        (None, _) => "NO_BLOWUP",
        (_, None) => "NO_GLOBAL",
    };
    Threshold { a_blowup_max, a_global_min, status: status.into() }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub members: Vec<MemberOutcome>,
    pub threshold: Threshold,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

/// Writes `sweep.csv`, `threshold.csv`, `sweep.json` and one `diag_A<A>.csv` per member.
pub fn sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let grid = fft::grid(cfg.grid_spec())?;
    let out = &cfg.output_dir;
    let mut amps = cfg.a_list.clone();
    amps.sort_by(f64::total_cmp);
    let members: Vec<MemberOutcome> = amps
        .par_iter()
        .map(|&a| -> Result<MemberOutcome> {
            let st = initial_state(cfg, &grid, a)?;
            let mut w = CsvWriter::create(&out.join(format!("diag_A{}.csv", tag(a))))?;
            let sim = Simulation::new(st, cfg.core_params(a), settings(cfg))?;
            run_member(sim, cfg.sample_every, &[], Some(&mut w), None)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = members
        .iter()
        .map(|m| {
            vec![fmt_f64(m.amplitude), m.verdict.to_string(), fmt_f64(m.t_final), fmt_f64(m.max_n_linf), m.flags_seen.to_string(), fmt_f64(m.max_e_ratio), fmt_f64(m.max_linf_ratio)]
        })
        .collect();
    write_table(&out.join("sweep.csv"), &SWEEP_COLUMNS, &rows)?;
    let th = threshold(&members.iter().map(|m| (m.amplitude, m.verdict)).collect::<Vec<_>>());
    write_table(&out.join("threshold.csv"), &THRESHOLD_COLUMNS, &[vec![opt(th.a_blowup_max), opt(th.a_global_min), th.status.clone()]])?;
    let report = SweepReport { members, threshold: th };
    write_json(&out.join("sweep.json"), &report)?;
    Ok(report)
}
