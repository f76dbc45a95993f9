//! The simulation loop: adaptive stepping, per-step monitors and sampled diagnostics.

use crate::diagnostics::{blowup_check, flags, negativity_flag, DiagRecord, EnergyTracker, HypothesisMonitor, Verdict};
use crate::dynamics::{Params, StepReport, Stepper};
use crate::field::FlowState;
use crate::{Error, Result};

/// Everything besides the state that a resumed run needs to continue bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunContext {
    pub step: u64,
    pub dt_next: f64,
    pub drift_speed: f64,
    pub last_dt: f64,
    pub tracker: EnergyTracker,
    pub monitor: HypothesisMonitor,
    pub remap_loss: f64,
    /// `max |n|` on the collocation grid at `t = 0`; reference of the blow-up test.
    pub initial_max: f64,
    pub initial_linf: f64,
    pub mass0: f64,
    pub max_mass_drift: f64,
    pub max_div_rel: f64,
    pub flags_seen: u32,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    /// Emit a diagnostics row every this many accepted steps.
    pub sample_every: u64,
    /// `E1`; when absent, `linf_multiple * ||n_in||_inf`.
    pub e1: Option<f64>,
    pub linf_multiple: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { sample_every: 1, e1: None, linf_multiple: 4.0 }
    }
}

pub struct Simulation {
    state: FlowState,
    stepper: Stepper,
    ctx: RunContext,
    settings: RunSettings,
    last_report: StepReport,
}

impl Simulation {
    pub fn new(state: FlowState, params: Params, settings: RunSettings) -> Result<Self> {
        let stepper = Stepper::new(params.clone())?;
        if settings.sample_every == 0 {
            return Err(Error::InvalidParam { field: "sample_every", reason: "must be at least 1".into() });
        }
        let mut tracker = EnergyTracker::new(params.a_weight, params.amplitude);
        let e_initial = tracker.record(&state)?;
        let n_linf = state.n.linf();
        let monitor = match settings.e1 {
            Some(e1) => HypothesisMonitor::new(e_initial + 1.0, e1),
            None => HypothesisMonitor::from_initial(e_initial, n_linf, settings.linf_multiple),
        };
        let ctx = RunContext {
            step: 0,
            dt_next: stepper.dt_next(),
            drift_speed: 0.0,
            last_dt: 0.0,
            tracker,
            monitor,
            remap_loss: 0.0,
            initial_max: state.n.max_abs_value(),
            initial_linf: n_linf,
            mass0: state.n.integral(),
            max_mass_drift: 0.0,
            max_div_rel: state.u.divergence_relative(),
            flags_seen: 0,
            verdict: Verdict::Running,
        };
        Ok(Self { state, stepper, ctx, settings, last_report: StepReport::default() })
    }

    pub fn resume(state: FlowState, params: Params, ctx: RunContext, settings: RunSettings) -> Result<Self> {
        let stepper = Stepper::with_state(params, ctx.dt_next, ctx.drift_speed)?;
        Ok(Self { state, stepper, ctx, settings, last_report: StepReport::default() })
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn context(&self) -> &RunContext {
        &self.ctx
    }

    pub fn params(&self) -> &Params {
        self.stepper.params()
    }

    pub fn verdict(&self) -> Verdict {
        self.ctx.verdict
    }

    pub fn last_report(&self) -> &StepReport {
        &self.last_report
    }

    /// Diagnostics row of the current state.
    pub fn record(&self) -> DiagRecord {
        let mut r = DiagRecord::measure(&self.state);
        r.e_t = self.ctx.tracker.value();
        r.remap_loss = self.ctx.remap_loss;
        r.dt = self.ctx.last_dt;
        r.flags = self.current_flags(r.n_linf, r.e_t, r.min_n);
        r
    }

    fn current_flags(&self, n_linf: f64, e_t: f64, min_n: f64) -> u32 {
        let m = &self.ctx.monitor;
        let mut f = negativity_flag(min_n, n_linf);
        if !(e_t <= m.factor * m.e0) {
            f |= flags::HYPOTHESIS_E;
        }
        if !(n_linf <= m.factor * m.e1) {
            f |= flags::HYPOTHESIS_LINF;
        }
        if self.ctx.verdict == Verdict::Blowup {
            f |= flags::BLOWUP;
        }
        f
    }

    /// One accepted step with the per-step monitors. Returns `false` once a verdict is reached.
    pub fn advance(&mut self) -> Result<bool> {
        if self.ctx.verdict != Verdict::Running {
            return Ok(false);
        }
        let p = self.stepper.params().clone();
        match self.stepper.step(&self.state, p.t_end) {
            Ok((next, rep)) => {
                self.state = next;
                self.last_report = rep;
                self.ctx.step += 1;
                self.ctx.last_dt = rep.dt;
                self.ctx.dt_next = self.stepper.dt_next();
                self.ctx.drift_speed = self.stepper.drift_speed();
                self.ctx.remap_loss += rep.remap_loss;
                let e_t = self.ctx.tracker.record(&self.state)?;
                let n_max = self.state.n.max_abs_value();
                let hyp = self.ctx.monitor.check(self.state.t, e_t, n_max);
                self.ctx.flags_seen |= hyp;
                if self.ctx.mass0 != 0.0 {
                    let drift = (self.state.n.integral() - self.ctx.mass0).abs() / self.ctx.mass0.abs();
                    self.ctx.max_mass_drift = self.ctx.max_mass_drift.max(drift);
                }
                self.ctx.max_div_rel = self.ctx.max_div_rel.max(self.state.u.divergence_relative());
                self.ctx.verdict = blowup_check(self.state.t, n_max, self.ctx.initial_max, p.t_end, p.blowup_factor, false);
            }
            Err(Error::BlowupSuspected { .. }) => {
                self.ctx.verdict = Verdict::Blowup;
            }
            Err(e) => return Err(e),
        }
        if self.ctx.verdict == Verdict::Blowup {
            self.ctx.flags_seen |= flags::BLOWUP;
        }
        Ok(self.ctx.verdict == Verdict::Running)
    }

    /// Runs to a verdict, or until `max_steps` more steps were taken; every
    /// `sample_every`-th step and the final state are passed to `sink`.
    pub fn run(&mut self, max_steps: Option<u64>, sink: &mut dyn FnMut(&DiagRecord, &Simulation) -> Result<()>) -> Result<Verdict> {
        if self.ctx.step == 0 && self.ctx.tracker.history.len() == 1 {
            let r = self.record();
            sink(&r, self)?;
        }
        let start = self.ctx.step;
        loop {
            if let Some(m) = max_steps {
                if self.ctx.step - start >= m {
                    break;
                }
            }
            let running = self.advance()?;
            let step = self.ctx.step;
            if !running || step % self.settings.sample_every == 0 {
                let r = self.record();
                sink(&r, self)?;
            }
            if !running {
                break;
            }
        }
        Ok(self.ctx.verdict)
    }
}
