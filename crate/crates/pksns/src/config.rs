//! Run configuration in TOML.
//!
//! ```toml
//! scenario = "full-run"          # linear-decay | twod-critical | sweep-A | full-run | check-lemmas
//! output_dir = "out"
//! sample_every = 1               # diagnostics row every k accepted steps
//! checkpoint_every = 0           # 0 disables periodic checkpoints
//! A_list = [100.0, 1000.0, 10000.0] # sweep-A and linear-decay
//!
//! [params]
//! A = 1000.0
//! a_weight = 0.1
//! dt = 0.05
//! dt_min = 1e-8
//! cfl = 0.5
//! t_end = 10.0
//! blowup_factor = 100.0
//! max_linf_change = 0.1
//! physics = { shear = true, fluid = true, chemotaxis = true, nonlinear = true }
//!
//! [grid]
//! nx = 64
//! ny = 128
//! nz = 64
//! ly = 25.132741228718345
//! dealias_fraction = 0.6666666666666666
//!
//! [ic.n]
//! kind = "gaussian-blob"        # or random-band, horizontal-band, zero
//! center = [3.141592653589793, 0.0, 3.141592653589793]
//! width = 1.0
//! mass = 200.0
//!
//! [ic.u]
//! kind = "random-band"          # or zero
//! seed = 1
//! band = 3.0
//! envelope = 2.0
//! c0 = 0.5
//! scale = "A^-2/3"              # u_in = c0 A^{-2/3} v with ||v||_{H^2} = 1; or "none"
//!
//! [monitor]
//! linf_multiple = 4.0           # E1 = linf_multiple * ||n_in||_inf unless e1 is given
//!
//! [linear_decay]
//! window = [1.2, 2.0]           # fit window in units of A^{1/3}
//! horizon = 5.0                 # oracle comparison time in units of A^{1/3}
//! samples_per_window = 40
//!
//! [critical]
//! masses = [12.566370614359172, 37.69911184307752]
//!
//! [lemmas]
//! seed = 7
//! trials = 100
//! ```
//!
//! Every table is optional; absent keys take the defaults above, except that
//! `grid`, `ic` and the physics switches default per scenario (see [`RunConfig::grid_spec`],
//! [`RunConfig::density_ic`]).
//! Unknown keys are errors.

use std::f64::consts::PI;
use std::path::PathBuf;

use pksns_core::{GridSpec, Params, Physics};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "linear-decay")]
    LinearDecay,
    #[serde(rename = "twod-critical")]
    TwodCritical,
    #[serde(rename = "sweep-A")]
    SweepA,
    #[serde(rename = "full-run")]
    FullRun,
    #[serde(rename = "check-lemmas")]
    CheckLemmas,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::LinearDecay => "linear-decay",
            Scenario::TwodCritical => "twod-critical",
            Scenario::SweepA => "sweep-A",
            Scenario::FullRun => "full-run",
            Scenario::CheckLemmas => "check-lemmas",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub output_dir: PathBuf,
    pub sample_every: u64,
    pub checkpoint_every: u64,
    #[serde(rename = "A_list")]
    pub a_list: Vec<f64>,
    pub params: ParamsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    pub ic: IcConfig,
    pub monitor: MonitorConfig,
    pub linear_decay: LinearDecayConfig,
    pub critical: CriticalConfig,
    pub lemmas: LemmaConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::FullRun,
            output_dir: PathBuf::from("out"),
            sample_every: 1,
            checkpoint_every: 0,
            a_list: vec![100.0, 1000.0, 10000.0],
            params: ParamsConfig::default(),
            grid: None,
            ic: IcConfig::default(),
            monitor: MonitorConfig::default(),
            linear_decay: LinearDecayConfig::default(),
            critical: CriticalConfig::default(),
            lemmas: LemmaConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub a_weight: f64,
    pub dt: f64,
    pub dt_min: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub blowup_factor: f64,
    pub max_linf_change: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physics: Option<PhysicsConfig>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = Params::default();
        Self {
            amplitude: p.amplitude,
            a_weight: p.a_weight,
            dt: p.dt,
            dt_min: p.dt_min,
            cfl: p.cfl,
            t_end: p.t_end,
            blowup_factor: p.blowup_factor,
            max_linf_change: p.max_linf_change,
            physics: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub shear: bool,
    pub fluid: bool,
    pub chemotaxis: bool,
    pub nonlinear: bool,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Physics::FULL.into()
    }
}

impl From<Physics> for PhysicsConfig {
    fn from(p: Physics) -> Self {
        Self { shear: p.shear, fluid: p.fluid, chemotaxis: p.chemotaxis, nonlinear: p.nonlinear }
    }
}

impl From<PhysicsConfig> for Physics {
    fn from(p: PhysicsConfig) -> Self {
        Physics { shear: p.shear, fluid: p.fluid, chemotaxis: p.chemotaxis, nonlinear: p.nonlinear }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub ly: f64,
    #[serde(default = "default_dealias")]
    pub dealias_fraction: f64,
}

fn default_dealias() -> f64 {
    GridSpec::DEFAULT_DEALIAS
}

impl From<&GridConfig> for GridSpec {
    fn from(g: &GridConfig) -> Self {
        GridSpec { nx: g.nx, ny: g.ny, nz: g.nz, ly: g.ly, dealias_fraction: g.dealias_fraction }
    }
}

/// Absent tables fall back to the scenario default (see [`RunConfig::density_ic`]).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<DensityIc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<VelocityIc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityIc {
    /// Periodized Gaussian of total mass `mass`; `center` defaults to the box center.
    GaussianBlob {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<[f64; 3]>,
        #[serde(default = "one")]
        width: f64,
        mass: f64,
    },
    /// Flat spectrum on `0 < |k| <= band` with rms `amplitude`, plus `mean`.
    RandomBand {
        seed: u64,
        band: f64,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        envelope: Option<f64>,
        #[serde(default)]
        mean: f64,
    },
    /// Random horizontal waves `0 < k1^2 + k3^2 <= band^2`, constant in y before the envelope.
    HorizontalBand {
        seed: u64,
        band: f64,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        envelope: Option<f64>,
        #[serde(default)]
        mean: f64,
    },
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VelocityScale {
    /// `u_in = c0 A^{-2/3} v`.
    #[serde(rename = "A^-2/3")]
    AmplitudeScaled,
    /// `u_in = c0 v`.
    #[serde(rename = "none")]
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VelocityIc {
    /// Curl of a random band potential, normalized to unit `H^2` norm before scaling.
    RandomBand {
        seed: u64,
        band: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        envelope: Option<f64>,
        c0: f64,
        #[serde(default = "amplitude_scaled")]
        scale: VelocityScale,
    },
    Zero,
}

fn amplitude_scaled() -> VelocityScale {
    VelocityScale::AmplitudeScaled
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e1: Option<f64>,
    pub linf_multiple: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { e1: None, linf_multiple: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearDecayConfig {
    pub window: [f64; 2],
    pub horizon: f64,
    pub samples_per_window: u32,
}

impl Default for LinearDecayConfig {
    fn default() -> Self {
        Self { window: [1.2, 2.0], horizon: 5.0, samples_per_window: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalConfig {
    pub masses: Vec<f64>,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        Self { masses: vec![0.5 * 8.0 * PI, 1.5 * 8.0 * PI] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaConfig {
    pub seed: u64,
    pub trials: usize,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self { seed: 7, trials: 100 }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl RunConfig {
    /// Parses and validates; syntax and schema errors carry the line number.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`RunConfig::parse`], for a caller that already fixed the scenario:
    /// a missing `scenario` key means `scenario`, a different one is an error.
    pub fn parse_for(text: &str, scenario: Scenario) -> Result<Self> {
        let mut cfg = Self::parse_unchecked(text)?;
        let table: toml::Table = toml::from_str(text).expect("parsed above");
        if !table.contains_key("scenario") {
            cfg.scenario = scenario;
        } else if cfg.scenario != scenario {
            return Err(Error::Validation { field: "scenario".into(), reason: format!("config says {}, command says {}", cfg.scenario.name(), scenario.name()) });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn parse_unchecked(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(crate::error::io_err(path))?;
        Self::parse(&text)
    }

    /// TOML text that parses back to `self`. Integers above `i64::MAX` have no TOML form.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation { field: "config".into(), reason: e.to_string() })
    }

    /// Grid of the scenario: the `[grid]` table, or the scenario default.
    pub fn grid_spec(&self) -> GridSpec {
        if let Some(g) = &self.grid {
            return g.into();
        }
        match self.scenario {
            Scenario::TwodCritical => GridSpec::new(256, 256, 1, 2.0 * PI),
            Scenario::LinearDecay => GridSpec::new(8, 1280, 8, 16.0 * PI),
            Scenario::CheckLemmas => GridSpec::new(16, 32, 16, 8.0 * PI),
            Scenario::SweepA | Scenario::FullRun => GridSpec::new(64, 128, 64, 8.0 * PI),
        }
    }

    /// Physics switches: explicit `params.physics`, else the scenario's.
    pub fn physics(&self) -> Physics {
        if let Some(p) = self.params.physics {
            return p.into();
        }
        match self.scenario {
            Scenario::LinearDecay => Physics::FROZEN_LINEAR,
            Scenario::TwodCritical => Physics::CHEMOTAXIS_ONLY,
            _ => Physics::FULL,
        }
    }

    /// Density initial condition; for `twod-critical` the mass is replaced per member.
    pub fn density_ic(&self) -> DensityIc {
        if let Some(n) = &self.ic.n {
            return n.clone();
        }
        match self.scenario {
            Scenario::LinearDecay => DensityIc::HorizontalBand { seed: 3, band: 2.0, amplitude: 1.0, envelope: Some(4.0), mean: 0.0 },
            Scenario::TwodCritical => DensityIc::GaussianBlob { center: None, width: 0.5, mass: 0.0 },
            _ => DensityIc::GaussianBlob { center: None, width: 1.0, mass: 200.0 },
        }
    }

    pub fn velocity_ic(&self) -> VelocityIc {
        if let Some(u) = &self.ic.u {
            return u.clone();
        }
        match self.scenario {
            Scenario::LinearDecay | Scenario::TwodCritical => VelocityIc::Zero,
            _ => VelocityIc::RandomBand { seed: 1, band: 3.0, envelope: Some(2.0), c0: 0.5, scale: VelocityScale::AmplitudeScaled },
        }
    }

    /// Core parameters at amplitude `a`.
    pub fn core_params(&self, a: f64) -> Params {
        let p = &self.params;
        Params {
            amplitude: a,
            a_weight: p.a_weight,
            dt: p.dt,
            dt_min: p.dt_min,
            cfl: p.cfl,
            t_end: p.t_end,
            blowup_factor: p.blowup_factor,
            max_linf_change: p.max_linf_change,
            physics: self.physics(),
            forcing: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, reason: &str| Err(Error::Validation { field: field.into(), reason: reason.into() });
        if self.sample_every == 0 {
            return fail("sample_every", "must be at least 1");
        }
        if matches!(self.scenario, Scenario::SweepA | Scenario::LinearDecay) && self.a_list.is_empty() {
            return fail("A_list", "must be nonempty for this scenario");
        }
        if self.a_list.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return fail("A_list", "entries must be positive");
        }
        if let Err(e) = self.grid_spec().validate() {
            return fail("grid", &e.to_string());
        }
        if let Err(pksns_core::Error::InvalidParam { field, reason }) = self.core_params(self.params.amplitude).validate() {
            let name = if field == "amplitude" { "A" } else { field };
            return fail(&format!("params.{name}"), &reason);
        }
        match &self.density_ic() {
            DensityIc::GaussianBlob { width, mass, .. } => {
                if !(*width > 0.0) {
                    return fail("ic.n.width", "must be positive");
                }
                if !(mass.is_finite() && *mass >= 0.0) {
                    return fail("ic.n.mass", "must be nonnegative");
                }
            }
            DensityIc::RandomBand { band, amplitude, envelope, .. } | DensityIc::HorizontalBand { band, amplitude, envelope, .. } => {
                if !(*band > 0.0) {
                    return fail("ic.n.band", "must be positive");
                }
                if !(*amplitude >= 0.0) {
                    return fail("ic.n.amplitude", "must be nonnegative");
                }
                if envelope.is_some_and(|e| !(e > 0.0)) {
                    return fail("ic.n.envelope", "must be positive");
                }
            }
            DensityIc::Zero => {}
        }
        if let VelocityIc::RandomBand { band, envelope, c0, .. } = &self.velocity_ic() {
            if !(*band > 0.0) {
                return fail("ic.u.band", "must be positive");
            }
            if envelope.is_some_and(|e| !(e > 0.0)) {
                return fail("ic.u.envelope", "must be positive");
            }
            if !(c0.is_finite() && *c0 >= 0.0) {
                return fail("ic.u.c0", "must be nonnegative");
            }
        }
        if self.monitor.e1.is_some_and(|e| !(e > 0.0)) {
            return fail("monitor.e1", "must be positive");
        }
        if !(self.monitor.linf_multiple > 0.0) {
            return fail("monitor.linf_multiple", "must be positive");
        }
        let ld = &self.linear_decay;
        if !(ld.window[0] >= 0.0 && ld.window[1] > ld.window[0]) {
            return fail("linear_decay.window", "must be an increasing pair of nonnegative numbers");
        }
        if !(ld.horizon >= ld.window[1]) {
            return fail("linear_decay.horizon", "must not end before the fit window");
        }
        if ld.samples_per_window < 10 {
            return fail("linear_decay.samples_per_window", "must be at least 10");
        }
        if self.scenario == Scenario::TwodCritical {
            if !self.grid_spec().is_2d() {
                return fail("grid", "twod-critical needs nx = 1 or nz = 1");
            }
            if self.critical.masses.is_empty() {
                return fail("critical.masses", "must be nonempty");
            }
            if self.critical.masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                return fail("critical.masses", "entries must be nonnegative");
            }
        }
        if self.lemmas.trials == 0 {
            return fail("lemmas.trials", "must be at least 1");
        }
        Ok(())
    }
}
