//! Single `(A, IC)` integration with diagnostics, checkpoints and resume.

use std::path::{Path, PathBuf};

use pksns_core::{DiagRecord, Params, RunSettings, Simulation, Verdict};
use serde::Serialize;

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::RunConfig;
use crate::csvio::{truncate_after, CsvWriter};
use crate::error::{Error, Result};
use crate::fft;

use super::{initial_state, write_json};

/// Run summary shared by `full-run` and the sweep members.
#[derive(Clone, Debug, Serialize)]
pub struct MemberOutcome {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub verdict: Verdict,
    pub t_final: f64,
    pub steps: u64,
    pub max_n_linf: f64,
    pub flags_seen: u32,
    pub e0: f64,
    pub e1: f64,
    /// `max E(t) / E0`.
    pub max_e_ratio: f64,
    /// `max ||n||_inf / E1`.
    pub max_linf_ratio: f64,
    pub first_violation_e: Option<f64>,
    pub first_violation_linf: Option<f64>,
    /// `max ||n0||_2 / ||n0(0)||_2`; absent when the initial value is zero.
    pub max_n0_ratio: Option<f64>,
    /// `max A^{2/3} ||u0||_inf` over its initial value; absent when that is zero.
    pub max_u0_ratio: Option<f64>,
    pub max_mass_drift: f64,
    pub max_div_rel: f64,
    pub remap_loss: f64,
    /// `remap_loss` relative to `||n||_2^2 + ||u||_2^2` where this invocation started.
    pub remap_loss_rel: f64,
}

#[derive(Default)]
struct Extremes {
    first: Option<DiagRecord>,
    max_n_linf: f64,
    max_e: f64,
    max_n0: f64,
    max_u0: f64,
}

impl Extremes {
    fn add(&mut self, r: &DiagRecord) {
        if self.first.is_none() {
            self.first = Some(r.clone());
        }
        self.max_n_linf = self.max_n_linf.max(r.n_linf);
        self.max_e = self.max_e.max(r.e_t);
        self.max_n0 = self.max_n0.max(r.n0_l2);
        self.max_u0 = self.max_u0.max(r.u0_linf);
    }
}

fn ratio(max: f64, initial: f64) -> Option<f64> {
    (initial > 0.0).then(|| max / initial)
}

/// Where and how often a member writes checkpoints.
#[derive(Clone, Debug)]
pub struct CheckpointPlan {
    pub dir: PathBuf,
    /// Every this many accepted steps; 0 writes only the final one.
    pub every: u64,
}

impl CheckpointPlan {
    pub fn path(&self, step: u64) -> PathBuf {
        self.dir.join(format!("checkpoint_{step:08}.bin"))
    }

    pub fn final_path(&self) -> PathBuf {
        self.dir.join("checkpoint_final.bin")
    }
}

/// Drives `sim` to its verdict. `prior` are rows already on record for this run
/// (a resumed run), which seed the extremes.
pub fn run_member(mut sim: Simulation, sample_every: u64, prior: &[DiagRecord], mut csv: Option<&mut CsvWriter>, checkpoints: Option<&CheckpointPlan>) -> Result<MemberOutcome> {
    let mut ext = Extremes::default();
    prior.iter().for_each(|r| ext.add(r));
    let energy0 = sim.state().n.l2_sq() + sim.state().u.l2_sq();
    let mut emit = |r: DiagRecord| -> Result<()> {
        ext.add(&r);
        match csv.as_deref_mut() {
            Some(w) => w.write(&r),
            None => Ok(()),
        }
    };
    if sim.context().step == 0 {
        emit(sim.record())?;
    }
    loop {
        let running = sim.advance()?;
        let step = sim.context().step;
        if !running || step % sample_every == 0 {
            emit(sim.record())?;
        }
        if !running {
            break;
        }
        if let Some(plan) = checkpoints {
            if plan.every > 0 && step % plan.every == 0 {
                write_checkpoint(sim.state(), Some(sim.context()), &plan.path(step))?;
            }
        }
    }
    if let Some(plan) = checkpoints {
        write_checkpoint(sim.state(), Some(sim.context()), &plan.final_path())?;
    }
    let ctx = sim.context();
    let first = ext.first.clone().unwrap_or_default();
    let m = &ctx.monitor;
    Ok(MemberOutcome {
        amplitude: sim.params().amplitude,
        verdict: ctx.verdict,
        t_final: sim.state().t,
        steps: ctx.step,
        max_n_linf: ext.max_n_linf,
        flags_seen: ctx.flags_seen,
        e0: m.e0,
        e1: m.e1,
        max_e_ratio: ext.max_e / m.e0,
        max_linf_ratio: ext.max_n_linf / m.e1,
        first_violation_e: m.first_violation_e,
        first_violation_linf: m.first_violation_linf,
        max_n0_ratio: ratio(ext.max_n0, first.n0_l2),
        max_u0_ratio: ratio(ext.max_u0, first.u0_linf),
        max_mass_drift: ctx.max_mass_drift,
        max_div_rel: ctx.max_div_rel,
        remap_loss: ctx.remap_loss,
        remap_loss_rel: if energy0 > 0.0 { ctx.remap_loss / energy0 } else { 0.0 },
    })
}

pub fn settings(cfg: &RunConfig) -> RunSettings {
    RunSettings { sample_every: cfg.sample_every, e1: cfg.monitor.e1, linf_multiple: cfg.monitor.linf_multiple }
}

#[derive(Clone, Debug, Serialize)]
pub struct FullRunReport {
    #[serde(flatten)]
    pub outcome: MemberOutcome,
    pub resumed_from: Option<PathBuf>,
    pub diag_csv: PathBuf,
}

/// Writes `diag.csv`, checkpoints and `report.json` into the output directory.
/// With `resume`, continues from a checkpoint written by an earlier run of the
/// same configuration: rows past the checkpoint time are dropped and new rows appended.
pub fn full_run(cfg: &RunConfig, resume: Option<&Path>) -> Result<FullRunReport> {
    let grid = fft::grid(cfg.grid_spec())?;
    let params: Params = cfg.core_params(cfg.params.amplitude);
    let out = &cfg.output_dir;
    let csv_path = out.join("diag.csv");
    let plan = CheckpointPlan { dir: out.clone(), every: cfg.checkpoint_every };
    let (sim, prior, mut writer) = match resume {
        None => {
            let st = initial_state(cfg, &grid, params.amplitude)?;
            (Simulation::new(st, params, settings(cfg))?, Vec::new(), CsvWriter::create(&csv_path)?)
        }
        Some(path) => {
            let ck = read_checkpoint(path)?;
            let ctx = ck.header.run.clone().ok_or_else(|| Error::Checkpoint { path: path.to_owned(), reason: "no run context; cannot resume".into() })?;
            if ctx.tracker.amplitude != params.amplitude || ctx.tracker.a_weight != params.a_weight {
                return Err(Error::Validation { field: "params.A".into(), reason: "differs from the checkpointed run".into() });
            }
            let st = ck.state(&grid)?;
            let prior = truncate_after(&csv_path, st.t)?;
            (Simulation::resume(st, params, ctx, settings(cfg))?, prior, CsvWriter::append(&csv_path)?)
        }
    };
    let outcome = run_member(sim, cfg.sample_every, &prior, Some(&mut writer), Some(&plan))?;
    let report = FullRunReport {
        outcome,
        resumed_from: resume.map(Path::to_owned),
        diag_csv: csv_path,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}
