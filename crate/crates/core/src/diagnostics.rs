//! X_a norms, the energy functional, bootstrap monitors, blow-up verdicts and
//! decay-rate fits.
//!
//! For a tracked field `f`,
//! `||f||_{X_a}^2 = sup_t e^{2 a A^{-1/3} t} ||f||^2 + A^{-1/3} int e^{2 a A^{-1/3} t} ||f||^2 dt
//!                 + A^{-1} int e^{2 a A^{-1/3} t} ||grad f||^2 dt`,
//! with the integrals taken by the trapezoid rule over the sampled times.

use alloc::{vec, vec::Vec};

use crate::dynamics::vorticity_omega2;
use crate::field::{FlowState, SpectralField};
use crate::grid::Axis;
use crate::{math, Error, Result};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct XaAccumulator {
    pub a_weight: f64,
    pub amplitude: f64,
    pub running_sup: f64,
    pub int_l2: f64,
    pub int_grad: f64,
    pub last_t: f64,
    last_w_l2: f64,
    last_w_grad: f64,
    samples: u64,
}

impl XaAccumulator {
    pub fn new(a_weight: f64, amplitude: f64) -> Self {
        Self {
            a_weight,
            amplitude,
            running_sup: 0.0,
            int_l2: 0.0,
            int_grad: 0.0,
            last_t: f64::NEG_INFINITY,
            last_w_l2: 0.0,
            last_w_grad: 0.0,
            samples: 0,
        }
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    fn weight(&self, t: f64) -> f64 {
        math::exp(2.0 * self.a_weight * math::cbrt(self.amplitude).recip() * t)
    }

    /// Adds the sample `(||f(t)||, ||grad f(t)||)`.
    pub fn update(&mut self, t: f64, l2: f64, grad_l2: f64) -> Result<()> {
        if self.samples > 0 && t < self.last_t {
            return Err(Error::TimeRegression { t, last: self.last_t });
        }
        let w = self.weight(t);
        let wl2 = w * l2 * l2;
        let wgrad = w * grad_l2 * grad_l2;
        if self.samples > 0 {
            let h = t - self.last_t;
            self.int_l2 += 0.5 * h * (self.last_w_l2 + wl2);
            self.int_grad += 0.5 * h * (self.last_w_grad + wgrad);
        }
        self.running_sup = self.running_sup.max(wl2);
        self.last_t = t;
        self.last_w_l2 = wl2;
        self.last_w_grad = wgrad;
        self.samples += 1;
        Ok(())
    }

    pub fn value(&self) -> f64 {
        let a = self.amplitude;
        math::sqrt(self.running_sup + self.int_l2 / math::cbrt(a) + self.int_grad / a)
    }
}

/// Free-function form of [`XaAccumulator::update`].
pub fn update_xa(mut acc: XaAccumulator, t: f64, l2: f64, grad_l2: f64) -> Result<XaAccumulator> {
    acc.update(t, l2, grad_l2)?;
    Ok(acc)
}

/// Names of the ten fields of the energy functional, in summation order.
pub const ENERGY_TERMS: [&str; 10] = [
    "n_neq",
    "delta_u2_neq",
    "omega2_neq",
    "dx_omega2_neq",
    "dz_omega2_neq",
    "dy_omega2_neq",
    "dx_n_neq",
    "dz_n_neq",
    "dxx_n_neq",
    "dzz_n_neq",
];

/// Weights `A^{2/3}`, `A^{1/3}` etc. of the ten summands.
pub fn energy_weights(amplitude: f64) -> [f64; 10] {
    let c = math::cbrt(amplitude);
    [1.0, c * c, c, c, c, 1.0, 1.0, 1.0, 1.0, 1.0]
}

/// The ten tracked fields of a state.
pub fn energy_fields(state: &FlowState) -> [SpectralField; 10] {
    let n = state.n.nonzero_modes();
    let om = vorticity_omega2(state).nonzero_modes();
    let du2 = state.u.c[1].laplacian().nonzero_modes();
    [
        n.clone(),
        du2,
        om.clone(),
        om.derivative(Axis::X),
        om.derivative(Axis::Z),
        om.derivative(Axis::Y),
        n.derivative(Axis::X),
        n.derivative(Axis::Z),
        n.second_derivative(Axis::X),
        n.second_derivative(Axis::Z),
    ]
}

/// `(||f||, ||grad f||)` for each energy field.
pub fn energy_samples(state: &FlowState) -> [(f64, f64); 10] {
    energy_fields(state).map(|f| {
        let l2sq = f.l2_sq();
        let h1sq = f.sobolev(1);
        (math::sqrt(l2sq), math::sqrt((h1sq * h1sq - l2sq).max(0.0)))
    })
}

/// Ten X_a accumulators plus the sampled history they were built from.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyTracker {
    pub amplitude: f64,
    pub a_weight: f64,
    pub acc: Vec<XaAccumulator>,
    /// `(t, [(l2, grad_l2); 10])` for every sample.
    pub history: Vec<(f64, Vec<(f64, f64)>)>,
}

impl EnergyTracker {
    pub fn new(a_weight: f64, amplitude: f64) -> Self {
        Self {
            amplitude,
            a_weight,
            acc: vec![XaAccumulator::new(a_weight, amplitude); 10],
            history: Vec::new(),
        }
    }

    pub fn last_t(&self) -> Option<f64> {
        self.history.last().map(|h| h.0)
    }

    pub fn record(&mut self, state: &FlowState) -> Result<f64> {
        let samples = energy_samples(state);
        self.record_samples(state.t, &samples)
    }

    pub fn record_samples(&mut self, t: f64, samples: &[(f64, f64); 10]) -> Result<f64> {
        for (acc, (l2, g)) in self.acc.iter_mut().zip(samples) {
            acc.update(t, *l2, *g)?;
        }
        self.history.push((t, samples.to_vec()));
        Ok(self.value())
    }

    pub fn value(&self) -> f64 {
        let w = energy_weights(self.amplitude);
        self.acc.iter().zip(w).map(|(a, w)| w * a.value()).sum()
    }

    /// E(t) with a currency check against the state time.
    pub fn energy_at(&self, state: &FlowState) -> Result<f64> {
        energy_functional_e(state, self)
    }

    /// E rebuilt from the stored history alone.
    pub fn recompute_from_history(&self) -> f64 {
        let mut fresh = EnergyTracker::new(self.a_weight, self.amplitude);
        for (t, s) in &self.history {
            let mut arr = [(0.0, 0.0); 10];
            arr.copy_from_slice(s);
            fresh.record_samples(*t, &arr).expect("history is time ordered");
        }
        fresh.value()
    }
}

/// The weighted sum of the ten X_a norms; fails if the accumulators are not current.
pub fn energy_functional_e(state: &FlowState, tracker: &EnergyTracker) -> Result<f64> {
    match tracker.last_t() {
        Some(t) if (t - state.t).abs() <= 1e-12 * (1.0 + t.abs()) => Ok(tracker.value()),
        Some(t) => Err(Error::StaleAccumulator { accumulated: t, state: state.t }),
        None => Err(Error::StaleAccumulator { accumulated: f64::NEG_INFINITY, state: state.t }),
    }
}

pub mod flags {
    pub const BLOWUP: u32 = 1;
    pub const HYPOTHESIS_E: u32 = 2;
    pub const HYPOTHESIS_LINF: u32 = 4;
    pub const NEGATIVITY: u32 = 8;
}

/// Bootstrap budgets `E(t) <= factor E0` and `||n||_inf <= factor E1`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HypothesisMonitor {
    pub e0: f64,
    pub e1: f64,
    pub factor: f64,
    pub first_violation_e: Option<f64>,
    pub first_violation_linf: Option<f64>,
}

impl HypothesisMonitor {
    pub fn new(e0: f64, e1: f64) -> Self {
        Self { e0, e1, factor: 2.0, first_violation_e: None, first_violation_linf: None }
    }

    /// `E0 = E(0) + 1` and `E1 = linf_multiple * ||n_in||_inf`.
    pub fn from_initial(e_initial: f64, n_linf: f64, linf_multiple: f64) -> Self {
        Self::new(e_initial + 1.0, linf_multiple * n_linf)
    }

    /// Returns the violated-bit flags and records the first violation times.
    pub fn check(&mut self, t: f64, e_t: f64, n_linf: f64) -> u32 {
        let mut f = 0;
        if !(e_t <= self.factor * self.e0) {
            f |= flags::HYPOTHESIS_E;
            self.first_violation_e.get_or_insert(t);
        }
        if !(n_linf <= self.factor * self.e1) {
            f |= flags::HYPOTHESIS_LINF;
            self.first_violation_linf.get_or_insert(t);
        }
        f
    }
}

pub fn hypothesis_check(monitor: &mut HypothesisMonitor, t: f64, e_t: f64, n_linf: f64) -> u32 {
    monitor.check(t, e_t, n_linf)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum Verdict {
    Blowup,
    Global,
    Running,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Blowup => "BLOWUP",
            Verdict::Global => "GLOBAL",
            Verdict::Running => "RUNNING",
        }
    }
}

impl core::fmt::Display for Verdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// BLOWUP on runaway `||n||_inf` or when the step controller gave up; GLOBAL at `t_end`.
/// A zero initial density is measured against 1 instead, so roundoff cannot trip it.
pub fn blowup_check(t: f64, n_linf: f64, initial_linf: f64, t_end: f64, blowup_factor: f64, dt_collapsed: bool) -> Verdict {
    let reference = if initial_linf > 0.0 { initial_linf } else { 1.0 };
    if dt_collapsed || !(n_linf <= blowup_factor * reference) {
        Verdict::Blowup
    } else if t >= t_end * (1.0 - 1e-12) {
        Verdict::Global
    } else {
        Verdict::Running
    }
}

/// Negativity flag: `min n < -1e-6 ||n||_inf`, ignoring values at roundoff level (`> -1e-14`).
pub fn negativity_flag(min_n: f64, n_linf: f64) -> u32 {
    if min_n < -1e-6 * n_linf && min_n < -1e-14 {
        flags::NEGATIVITY
    } else {
        0
    }
}

/// Least-squares decay rate `-d ln v / dt` over samples with `t` in `[t0, t1]`.
pub fn decay_rate_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= window.0 && *t <= window.1).collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientSamples { needed: 10, got: pts.len() });
    }
    if let Some(&(t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositiveSample { t, value: v });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| math::ln(p.1)).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, v) in &pts {
        let dt = t - mt;
        sxy += dt * (math::ln(*v) - ml);
        sxx += dt * dt;
    }
    Ok(-sxy / sxx)
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// One row of run diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagRecord {
    pub t: f64,
    pub mass: f64,
    pub n_l2: f64,
    pub n_linf: f64,
    pub n0_l2: f64,
    pub n_neq_l2_qnz: f64,
    pub n_neq_l2_qz: f64,
    pub omega2_neq_l2: f64,
    pub delta_u2_neq_l2: f64,
    pub u0_linf: f64,
    #[cfg_attr(feature = "serde", serde(rename = "E_t"))]
    pub e_t: f64,
    pub div_u_rel: f64,
    pub min_n: f64,
    pub remap_loss: f64,
    pub dt: f64,
    pub flags: u32,
}

impl DiagRecord {
    pub const COLUMNS: [&'static str; 16] = [
        "t",
        "mass",
        "n_l2",
        "n_linf",
        "n0_l2",
        "n_neq_l2_qnz",
        "n_neq_l2_qz",
        "omega2_neq_l2",
        "delta_u2_neq_l2",
        "u0_linf",
        "E_t",
        "div_u_rel",
        "min_n",
        "remap_loss",
        "dt",
        "flags",
    ];

    /// The fifteen float columns in header order (flags excluded).
    pub fn floats(&self) -> [f64; 15] {
        [
            self.t,
            self.mass,
            self.n_l2,
            self.n_linf,
            self.n0_l2,
            self.n_neq_l2_qnz,
            self.n_neq_l2_qz,
            self.omega2_neq_l2,
            self.delta_u2_neq_l2,
            self.u0_linf,
            self.e_t,
            self.div_u_rel,
            self.min_n,
            self.remap_loss,
            self.dt,
        ]
    }

    pub fn from_floats(v: [f64; 15], flags: u32) -> Self {
        Self {
            t: v[0],
            mass: v[1],
            n_l2: v[2],
            n_linf: v[3],
            n0_l2: v[4],
            n_neq_l2_qnz: v[5],
            n_neq_l2_qz: v[6],
            omega2_neq_l2: v[7],
            delta_u2_neq_l2: v[8],
            u0_linf: v[9],
            e_t: v[10],
            div_u_rel: v[11],
            min_n: v[12],
            remap_loss: v[13],
            dt: v[14],
            flags,
        }
    }

    /// Norm columns of a state; `e_t`, `remap_loss`, `dt` and `flags` are left to the caller.
    pub fn measure(state: &FlowState) -> Self {
        let n = &state.n;
        let (qnz, qz) = n.nonzero_l2_by_q();
        let u0 = state.u.map(|c| c.zero_mode());
        Self {
            t: state.t,
            mass: n.integral(),
            n_l2: n.l2(),
            n_linf: n.linf(),
            n0_l2: n.zero_mode().l2(),
            n_neq_l2_qnz: qnz,
            n_neq_l2_qz: qz,
            omega2_neq_l2: vorticity_omega2(state).nonzero_modes().l2(),
            delta_u2_neq_l2: state.u.c[1].laplacian().nonzero_modes().l2(),
            u0_linf: u0.linf(),
            div_u_rel: state.u.divergence_relative(),
            min_n: n.min_value(),
            ..Self::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_is_the_sup_term() {
        let mut acc = XaAccumulator::new(0.0, 1000.0);
        acc.update(0.0, 3.0, 0.0).unwrap();
        assert_eq!(acc.value(), 3.0);
    }

    #[test]
    fn constant_samples_integrate_exactly() {
        let a = 1000.0;
        let mut acc = XaAccumulator::new(0.0, a);
        let (l2, g, t_end) = (2.0, 5.0, 7.0);
        for i in 0..=70 {
            acc.update(i as f64 * 0.1, l2, g).unwrap();
        }
        let expected = l2 * l2 + t_end * l2 * l2 / libm::cbrt(a) + t_end * g * g / a;
        assert!((acc.value() * acc.value() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let (a, aw, lam, f0, g0) = (1000.0, 0.1, 0.05, 1.5, 4.0);
        let mut acc = XaAccumulator::new(aw, a);
        let r = 2.0 * aw / libm::cbrt(a) - 2.0 * lam;
        let t_end = 40.0;
        let n = 40_000;
        for i in 0..=n {
            let t = t_end * i as f64 / n as f64;
            let d = libm::exp(-lam * t);
            acc.update(t, f0 * d, g0 * d).unwrap();
        }
        let int = (libm::exp(r * t_end) - 1.0) / r;
        let expected = f0 * f0 + int * (f0 * f0 / libm::cbrt(a) + g0 * g0 / a);
        assert!((acc.value() - libm::sqrt(expected)).abs() < 1e-4 * libm::sqrt(expected));
    }

    #[test]
    fn time_regression_is_rejected() {
        let mut acc = XaAccumulator::new(0.1, 10.0);
        acc.update(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(acc.update(0.5, 1.0, 1.0), Err(Error::TimeRegression { .. })));
    }

    #[test]
    fn hypothesis_flags() {
        let mut m = HypothesisMonitor::new(1.0, 1.0);
        assert_eq!(m.check(0.0, 1.0, 1.0), 0);
        assert_eq!(m.check(1.0, 2.01, 1.0), flags::HYPOTHESIS_E);
        assert_eq!(m.first_violation_e, Some(1.0));
        assert_eq!(m.check(2.0, 3.0, 2.5), flags::HYPOTHESIS_E | flags::HYPOTHESIS_LINF);
        assert_eq!(m.first_violation_e, Some(1.0));
        assert_eq!(m.first_violation_linf, Some(2.0));
    }

    #[test]
    fn verdicts() {
        assert_eq!(blowup_check(1.0, 150.0, 1.0, 10.0, 100.0, false), Verdict::Blowup);
        assert_eq!(blowup_check(10.0, 2.0, 1.0, 10.0, 100.0, false), Verdict::Global);
        assert_eq!(blowup_check(5.0, 2.0, 1.0, 10.0, 100.0, false), Verdict::Running);
        assert_eq!(blowup_check(5.0, 2.0, 1.0, 10.0, 100.0, true), Verdict::Blowup);
        assert_eq!(blowup_check(5.0, 1e-24, 0.0, 10.0, 100.0, false), Verdict::Running);
        assert_eq!(negativity_flag(-7e-25, 8e-25), 0);
        assert_eq!(negativity_flag(-1e-3, 1.0), flags::NEGATIVITY);
    }

    #[test]
    fn decay_fits() {
        let s: Vec<(f64, f64)> = (0..200).map(|i| (i as f64, libm::exp(-0.01 * i as f64))).collect();
        assert!((decay_rate_fit(&s, (0.0, 1e9)).unwrap() - 0.01).abs() < 1e-6);
        let c: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0)).collect();
        assert!(decay_rate_fit(&c, (0.0, 100.0)).unwrap().abs() < 1e-15);
        assert!(matches!(decay_rate_fit(&c, (0.0, 3.0)), Err(Error::InsufficientSamples { .. })));
        let mut z = c.clone();
        z[4].1 = 0.0;
        assert!(matches!(decay_rate_fit(&z, (0.0, 100.0)), Err(Error::NonPositiveSample { .. })));
    }
}
