//! Time integration of the rescaled system in the shearing frame.
//!
//! With `tau = A t` the perturbation equations read
//!
//! ```text
//! d_t n + y (d_x + d_z) n - Delta n / A = -(1/A) div(n u) - (1/A) div(n grad c)
//! d_t u + y (d_x + d_z) u - Delta u / A = -(u2, 0, u2) - (1/A) u.grad u
//!                                         - (1/A) grad P + (1/A) (0, n, 0)
//! Delta P = -2 A (d_x + d_z) u2 + d_y n - div(u.grad u)
//! ```
//!
//! Transport by `y (d_x + d_z)` and diffusion are integrated exactly by the
//! frame: a stored coefficient keeps its label while its lab y-wavenumber
//! `m d_eta - q s` drifts with `ds/dt = 1`. Everything else is explicit.
//!
//! In frame coefficients the momentum tendency is
//! `F = -(u2, 0, u2) + 2 q k u2 / |k|^2 + (1/A) P_k [(0, n, 0) - N]`, where `P_k`
//! is the Leray projector and `N = div(u (x) u)`. The second term is the shear
//! pressure `-grad P1 / A`. `F` is not divergence-free in the current frame: its
//! divergence cancels the drift of `k` under the frame motion, so `k . u` stays
//! zero along the exact flow.

use alloc::{sync::Arc, vec, vec::Vec};
use core::fmt;

use crate::elliptic::solve_chemo;
use crate::field::{FlowState, SpectralField, VectorField};
use crate::grid::{Axis, Grid, WaveIndex};
use crate::{math, Error, Result, C64};

/// Which parts of the model are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Physics {
    /// Background shear `(Ay, 0, Ay)`: frame transport, lift and shear pressure.
    pub shear: bool,
    /// Evolve the velocity. When off the velocity is held at zero.
    pub fluid: bool,
    /// Chemotactic drift `div(n grad c)`.
    pub chemotaxis: bool,
    /// Quadratic terms. When off only the linear couplings remain.
    pub nonlinear: bool,
}

impl Physics {
    pub const FULL: Physics = Physics { shear: true, fluid: true, chemotaxis: true, nonlinear: true };
    /// Passive sheared drift-diffusion of `n`.
    pub const FROZEN_LINEAR: Physics = Physics { shear: true, fluid: false, chemotaxis: false, nonlinear: false };
    /// Parabolic-elliptic chemotaxis without flow.
    pub const CHEMOTAXIS_ONLY: Physics = Physics { shear: false, fluid: false, chemotaxis: true, nonlinear: true };
}

impl Default for Physics {
    fn default() -> Self {
        Self::FULL
    }
}

/// Manufactured source terms, given as frame coefficients at the frame of `template`.
pub trait Forcing: Send + Sync {
    fn sources(&self, t: f64, template: &FlowState) -> (SpectralField, VectorField);
}

#[derive(Clone)]
pub struct Params {
    /// Shear amplitude `A`.
    pub amplitude: f64,
    /// Exponential weight `a` of the X_a norms.
    pub a_weight: f64,
    /// Initial and maximal step.
    pub dt: f64,
    pub dt_min: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub blowup_factor: f64,
    /// Largest accepted relative change of `max |n|` over one step.
    pub max_linf_change: f64,
    pub physics: Physics,
    pub forcing: Option<Arc<dyn Forcing>>,
}

impl fmt::Debug for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Params")
            .field("amplitude", &self.amplitude)
            .field("a_weight", &self.a_weight)
            .field("dt", &self.dt)
            .field("dt_min", &self.dt_min)
            .field("cfl", &self.cfl)
            .field("t_end", &self.t_end)
            .field("blowup_factor", &self.blowup_factor)
            .field("max_linf_change", &self.max_linf_change)
            .field("physics", &self.physics)
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

impl Default for Params {
    fn default() -> Self {
        Self {
            amplitude: 1000.0,
            a_weight: 0.1,
            dt: 0.05,
            dt_min: 1e-8,
            cfl: 0.5,
            t_end: 10.0,
            blowup_factor: 100.0,
            max_linf_change: 0.1,
            physics: Physics::FULL,
            forcing: None,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| Err(Error::InvalidParam { field, reason: reason.into() });
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.amplitude) {
            return bad("amplitude", "must be positive");
        }
        if !(self.a_weight.is_finite() && self.a_weight >= 0.0) {
            return bad("a_weight", "must be nonnegative");
        }
        if !pos(self.dt) {
            return bad("dt", "must be positive");
        }
        if !pos(self.dt_min) || self.dt_min >= self.dt {
            return bad("dt_min", "must be positive and below dt");
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad("cfl", "must lie in (0, 1)");
        }
        if !pos(self.t_end) {
            return bad("t_end", "must be positive");
        }
        if !(self.blowup_factor > 1.0) {
            return bad("blowup_factor", "must exceed 1");
        }
        if !pos(self.max_linf_change) {
            return bad("max_linf_change", "must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Advective CFL number of the accepted step.
    pub cfl: f64,
    /// L2 energy of the nonlinear tendencies removed by the dealiasing mask.
    pub dealias_loss: f64,
    /// L2 energy discarded by a frame remap at the end of the step.
    pub remap_loss: f64,
    /// Relative change of `max |n|` over the step.
    pub linf_change: f64,
    pub rejected: u32,
}

/// Per-mode decay of `d_t f + y (d_x + d_z) f = Delta f / A` from frame shear
/// `s` over `dt`, the frame advancing with the flow.
#[inline]
fn decay_exponent(g: &Grid, w: WaveIndex, s: f64, dt: f64, inv_a: f64, shear: bool) -> f64 {
    let perp = (w.k1 * w.k1 + w.k3 * w.k3) as f64;
    let eta = g.lab_eta(w, s);
    let int_eta2 = if shear {
        let q = w.q() as f64;
        eta * eta * dt - eta * q * dt * dt + q * q * dt * dt * dt / 3.0
    } else {
        eta * eta * dt
    };
    -inv_a * (perp * dt + int_eta2)
}

/// Closed-form solution of the sheared drift-diffusion equation started from `f0`.
///
/// Returned at frame shear `s0 + t`, so a slot keeps its label; in lab terms
/// `f(t, k1, eta, k3) = f0(k1, eta + q t, k3) exp(-((k1^2 + k3^2) t + int_0^t (eta + q tau)^2 dtau) / A)`.
pub fn closed_form_linear_solution(f0: &SpectralField, a: f64, t: f64) -> SpectralField {
    propagate(f0, a, t, true)
}

/// One exact linear step (shear transport plus diffusion); advances the frame.
pub fn linear_propagator(f: &SpectralField, a: f64, dt: f64) -> SpectralField {
    propagate(f, a, dt, true)
}

/// Like [`linear_propagator`], optionally without the shear transport.
pub fn propagate(f: &SpectralField, a: f64, dt: f64, shear: bool) -> SpectralField {
    let g = f.grid().clone();
    let s = f.frame_shear();
    let inv_a = 1.0 / a;
    let mut out = f.map_modes(|w, c| c * math::exp(decay_exponent(&g, w, s, dt, inv_a, shear)));
    if shear {
        out.set_frame_shear(s + dt);
    }
    out
}

fn propagate_state(state: &FlowState, params: &Params, dt: f64) -> FlowState {
    let g = state.grid().clone();
    let s = state.frame_shear();
    let inv_a = 1.0 / params.amplitude;
    let shear = params.physics.shear;
    let mut out = state.clone();
    let fluid = params.physics.fluid;
    for (idx, w) in g.modes() {
        let f = math::exp(decay_exponent(&g, w, s, dt, inv_a, shear));
        out.n.coeffs_mut()[idx] *= f;
        if fluid {
            for c in out.u.c.iter_mut() {
                c.coeffs_mut()[idx] *= f;
            }
        }
    }
    if shear {
        out.set_frame_shear(s + dt);
    }
    out.t += dt;
    out
}

/// Tendencies of the non-stiff part, in frame coefficients.
#[derive(Clone, Debug)]
pub struct Tendency {
    pub dn: SpectralField,
    pub du: VectorField,
    /// `max |u + grad c| / A` on the collocation grid: the drift speed of `n`.
    pub drift_speed: f64,
    pub dealias_loss: f64,
}

fn zero_mask_loss(g: &Grid, coeffs: &mut [C64]) -> f64 {
    let lim = g.dealias_limits();
    let mut lost = 0.0;
    for (idx, w) in g.modes() {
        if w.k1.abs() > lim[0] || w.m.abs() > lim[1] || w.k3.abs() > lim[2] {
            lost += coeffs[idx].norm_sqr();
            coeffs[idx] = C64::new(0.0, 0.0);
        }
    }
    lost * g.volume()
}

#[inline]
fn times_ik(c: C64, k: f64) -> C64 {
    C64::new(-c.im * k, c.re * k)
}

struct Quadratic {
    /// `N_i = sum_j d_j (u_i u_j)`, dealiased.
    advection: Option<[Vec<C64>; 3]>,
    /// `div(n (u + grad c))`, dealiased.
    flux_div: Option<Vec<C64>>,
    drift_speed: f64,
    dealias_loss: f64,
}

fn quadratic_terms(state: &FlowState, physics: Physics) -> Result<Quadratic> {
    let g = state.grid().clone();
    let s = state.frame_shear();
    let fluid = physics.fluid;
    let chemo = physics.chemotaxis;
    if !physics.nonlinear || (!fluid && !chemo) {
        return Ok(Quadratic { advection: None, flux_div: None, drift_speed: 0.0, dealias_loss: 0.0 });
    }
    let grad_c = if chemo { Some(solve_chemo(&state.n).gradient()) } else { None };
    let mut spectra: Vec<&[C64]> = vec![state.n.coeffs()];
    if fluid {
        spectra.extend(state.u.c.iter().map(|f| f.coeffs()));
    }
    if let Some(gc) = &grad_c {
        spectra.extend(gc.c.iter().map(|f| f.coeffs()));
    }
    let phys = g.inverse_many(&spectra)?;
    let npts = g.len();
    let n_vals = &phys[0];
    let u_vals: Option<&[Vec<f64>]> = if fluid { Some(&phys[1..4]) } else { None };
    let gc_vals: Option<&[Vec<f64>]> = grad_c.as_ref().map(|_| if fluid { &phys[4..7] } else { &phys[1..4] });

    // Drift velocity v = u + grad c and the products to transform.
    let mut products: Vec<Vec<f64>> = Vec::new();
    let mut drift = 0.0f64;
    let mut v = [vec![0.0; npts], vec![0.0; npts], vec![0.0; npts]];
    for a in 0..3 {
        if let Some(u) = u_vals {
            v[a].copy_from_slice(&u[a]);
        }
        if let Some(gc) = gc_vals {
            for (x, y) in v[a].iter_mut().zip(&gc[a]) {
                *x += y;
            }
        }
    }
    for p in 0..npts {
        drift = drift.max(v[0][p] * v[0][p] + v[1][p] * v[1][p] + v[2][p] * v[2][p]);
    }
    for a in 0..3 {
        products.push(n_vals.iter().zip(&v[a]).map(|(x, y)| x * y).collect());
    }
    if let Some(u) = u_vals {
        for (i, j) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
            products.push(u[i].iter().zip(&u[j]).map(|(x, y)| x * y).collect());
        }
    }
    let refs: Vec<&[f64]> = products.iter().map(|p| p.as_slice()).collect();
    let mut hats = g.forward_many(&refs)?;
    let mut loss = 0.0;
    for h in hats.iter_mut() {
        loss += zero_mask_loss(&g, h);
    }

    let mut flux_div = vec![C64::new(0.0, 0.0); npts];
    let mut advection = if fluid { Some([vec![C64::new(0.0, 0.0); npts], vec![C64::new(0.0, 0.0); npts], vec![C64::new(0.0, 0.0); npts]]) } else { None };
    for (idx, w) in g.modes() {
        let k = g.lab_k(w, s);
        flux_div[idx] = times_ik(hats[0][idx], k[0]) + times_ik(hats[1][idx], k[1]) + times_ik(hats[2][idx], k[2]);
        if let Some(adv) = advection.as_mut() {
            let uu = |i: usize, j: usize| {
                let slot = match (i.min(j), i.max(j)) {
                    (0, 0) => 3,
                    (0, 1) => 4,
                    (0, 2) => 5,
                    (1, 1) => 6,
                    (1, 2) => 7,
                    _ => 8,
                };
                hats[slot][idx]
            };
            for i in 0..3 {
                adv[i][idx] = times_ik(uu(i, 0), k[0]) + times_ik(uu(i, 1), k[1]) + times_ik(uu(i, 2), k[2]);
            }
        }
    }
    Ok(Quadratic {
        advection,
        flux_div: Some(flux_div),
        drift_speed: math::sqrt(drift),
        dealias_loss: loss,
    })
}

fn check_divergence(u: &VectorField) -> Result<()> {
    let rel = u.divergence_relative();
    if rel > DIVERGENCE_TOL {
        return Err(Error::Divergence { relative: rel, tolerance: DIVERGENCE_TOL });
    }
    Ok(())
}

/// Inputs to the momentum and density tendencies must be divergence-free to this level.
pub const DIVERGENCE_TOL: f64 = 1e-8;

/// Full non-stiff tendency of a state, including forcing evaluated at `t`.
pub fn tendency(state: &FlowState, params: &Params, t: f64) -> Result<Tendency> {
    let physics = params.physics;
    let a = params.amplitude;
    let inv_a = 1.0 / a;
    let g = state.grid().clone();
    let s = state.frame_shear();
    let quad = quadratic_terms(state, physics)?;

    let mut dn = SpectralField::zeros(&g, s);
    if let Some(fd) = &quad.flux_div {
        for (o, f) in dn.coeffs_mut().iter_mut().zip(fd) {
            *o = -f * inv_a;
        }
    }

    let mut du = VectorField::zeros(&g, s);
    if physics.fluid {
        let n = state.n.coeffs();
        let u2 = state.u.c[1].coeffs();
        for (idx, w) in g.modes() {
            let k = g.lab_k(w, s);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                // The mean buoyancy is balanced hydrostatically and the mean
                // advection vanishes, so the mean flow is stationary.
                continue;
            }
            let mut b = [C64::new(0.0, 0.0), n[idx], C64::new(0.0, 0.0)];
            if let Some(adv) = &quad.advection {
                for i in 0..3 {
                    b[i] -= adv[i][idx];
                }
            }
            let kb = (b[0] * k[0] + b[1] * k[1] + b[2] * k[2]) / k2;
            let mut f = [0usize, 1, 2].map(|i| (b[i] - kb * k[i]) * inv_a);
            if physics.shear {
                let q = w.q() as f64;
                let shear_p = u2[idx] * (2.0 * q / k2);
                f[0] += shear_p * k[0] - u2[idx];
                f[1] += shear_p * k[1];
                f[2] += shear_p * k[2] - u2[idx];
            }
            for i in 0..3 {
                du.c[i].coeffs_mut()[idx] = f[i];
            }
        }
    }

    if let Some(forcing) = &params.forcing {
        let (sn, su) = forcing.sources(t, state);
        dn.axpy(1.0, &sn)?;
        if physics.fluid {
            du.axpy(1.0, &su)?;
        }
    }

    Ok(Tendency { dn, du, drift_speed: quad.drift_speed * inv_a, dealias_loss: quad.dealias_loss })
}

/// Non-stiff velocity tendency (everything except transport and diffusion).
pub fn momentum_rhs(state: &FlowState, params: &Params) -> Result<VectorField> {
    check_divergence(&state.u)?;
    let mut p = params.clone();
    p.physics.fluid = true;
    p.forcing = None;
    Ok(tendency(state, &p, state.t)?.du)
}

/// `-(1/A) div(n u) - (1/A) div(n grad c)` in conservative form.
pub fn density_rhs(state: &FlowState, params: &Params) -> Result<SpectralField> {
    let mut p = params.clone();
    p.forcing = None;
    Ok(tendency(state, &p, state.t)?.dn)
}

/// Linear lift `-(u2, 0, u2)` read off the momentum equation (before any projection).
pub fn lift_term(u: &VectorField) -> VectorField {
    let m = u.c[1].scaled(-1.0);
    VectorField::new([m.clone(), SpectralField::zeros(u.grid(), u.frame_shear()), m])
}

fn add_scaled(base: &FlowState, dt: f64, k: &Tendency, fluid: bool) -> Result<FlowState> {
    let mut out = base.clone();
    out.n.axpy(dt, &k.dn)?;
    if fluid {
        out.u.axpy(dt, &k.du)?;
    }
    Ok(out)
}

/// One fixed step: exact half step, explicit midpoint step on the frozen frame,
/// exact half step, projection, and a remap once the frame shear leaves
/// `[-d_eta/2, d_eta/2]`.
pub fn step_imex(state: &FlowState, params: &Params, dt: f64) -> Result<(FlowState, StepReport)> {
    let fluid = params.physics.fluid;
    let mut w = propagate_state(state, params, 0.5 * dt);
    let t_mid = w.t;
    let k1 = tendency(&w, params, t_mid)?;
    let mid = add_scaled(&w, 0.5 * dt, &k1, fluid)?;
    let k2 = tendency(&mid, params, t_mid)?;
    w = add_scaled(&w, dt, &k2, fluid)?;
    let mut out = propagate_state(&w, params, 0.5 * dt);
    out.t = state.t + dt;
    if fluid {
        out.u = out.u.leray();
    } else {
        out.u = VectorField::zeros(out.grid(), out.frame_shear());
    }
    let mut remap_loss = 0.0;
    if out.frame_shear().abs() > 0.5 * out.grid().d_eta() {
        remap_loss = out.canonicalize();
    }
    let speed = k1.drift_speed.max(k2.drift_speed);
    let h = out.grid().spacing();
    let report = StepReport {
        dt,
        cfl: speed * dt / h[0].min(h[1]).min(h[2]),
        dealias_loss: k2.dealias_loss,
        remap_loss,
        linf_change: 0.0,
        rejected: 0,
    };
    Ok((out, report))
}

/// Integrates with a fixed step from `state.t` to `t_end` (last step shortened).
pub fn advance_fixed(state: &FlowState, params: &Params, dt: f64, t_end: f64) -> Result<(FlowState, f64)> {
    let mut s = state.clone();
    let mut lost = 0.0;
    while s.t < t_end - 1e-12 * t_end.abs().max(1.0) {
        let h = dt.min(t_end - s.t);
        let (next, rep) = step_imex(&s, params, h)?;
        lost += rep.remap_loss;
        s = next;
    }
    Ok((s, lost))
}

/// Adaptive stepping with an advective CFL limit and a cap on the relative
/// change of `max |n|` per step.
#[derive(Clone, Debug)]
pub struct Stepper {
    params: Params,
    dt_next: f64,
    drift_speed: f64,
}

impl Stepper {
    pub fn new(params: Params) -> Result<Self> {
        params.validate()?;
        Ok(Self { dt_next: params.dt, params, drift_speed: 0.0 })
    }

    /// Resumes with the step size a previous run would have tried next.
    pub fn with_state(params: Params, dt_next: f64, drift_speed: f64) -> Result<Self> {
        let mut s = Self::new(params)?;
        s.dt_next = dt_next;
        s.drift_speed = drift_speed;
        Ok(s)
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn dt_next(&self) -> f64 {
        self.dt_next
    }

    pub fn drift_speed(&self) -> f64 {
        self.drift_speed
    }

    fn cfl_limit(&self, h: f64) -> f64 {
        if self.drift_speed > 0.0 {
            self.params.cfl * h / self.drift_speed
        } else {
            f64::INFINITY
        }
    }

    /// Takes one accepted step, not going past `t_stop`.
    pub fn step(&mut self, state: &FlowState, t_stop: f64) -> Result<(FlowState, StepReport)> {
        let spacing = state.grid().spacing();
        let h = spacing[0].min(spacing[1]).min(spacing[2]);
        let linf0 = state.n.max_abs_value();
        let mut rejected = 0;
        let mut dt = self.dt_next.min(self.params.dt).min(self.cfl_limit(h));
        // Signed relative change of the previous (rejected, twice as long) trial.
        let mut prev_change: Option<f64> = None;
        loop {
            let remaining = t_stop - state.t;
            let clipped = remaining < dt;
            let trial = if clipped { remaining } else { dt };
            if dt < self.params.dt_min {
                return Err(Error::BlowupSuspected { t: state.t, dt, n_linf: linf0 });
            }
            let (next, mut rep) = step_imex(state, &self.params, trial)?;
            let linf1 = next.n.max_abs_value();
            let signed = if linf0 > 0.0 { (linf1 - linf0) / linf0 } else { 0.0 };
            let change = signed.abs();
            // Sampling the sheared collocation grid gives max |n| a jump at frame
            // changes that does not shrink with dt; with change = jump + rate dt,
            // two trials at dt and dt/2 isolate the rate part.
            let growth = prev_change.map_or(change, |p| change.min((p - signed).abs()));
            let speed = rep.cfl * h / trial.max(f64::MIN_POSITIVE);
            let cfl_ok = rep.cfl <= self.params.cfl * 1.5;
            if !linf1.is_finite() || growth > self.params.max_linf_change || !cfl_ok {
                prev_change = Some(signed);
                dt = 0.5 * trial;
                rejected += 1;
                if speed > 0.0 {
                    self.drift_speed = self.drift_speed.max(speed);
                }
                continue;
            }
            self.drift_speed = speed;
            rep.linf_change = change;
            rep.rejected = rejected;
            let grown = if growth < 0.25 * self.params.max_linf_change { trial * 1.25 } else { trial };
            self.dt_next = if clipped { dt } else { grown.min(self.params.dt) };
            return Ok((next, rep));
        }
    }
}

/// `omega2 = d_z u1 - d_x u3`.
pub fn vorticity_omega2(state: &FlowState) -> SpectralField {
    let u = &state.u;
    let mut w = u.c[0].derivative(Axis::Z);
    w.axpy(-1.0, &u.c[2].derivative(Axis::X)).expect("components share a frame");
    w
}

/// Right sides of the `omega2` and `Delta u2` equations in the form
/// `d_t Q + y (d_x + d_z) Q - Delta Q / A = G`, evaluated from primitive fields.
fn vorticity_sources(state: &FlowState, params: &Params) -> Result<(Vec<C64>, Vec<C64>)> {
    let g = state.grid().clone();
    let s = state.frame_shear();
    let inv_a = 1.0 / params.amplitude;
    let mut physics = params.physics;
    physics.fluid = true;
    let quad = quadratic_terms(state, physics)?;
    let n = state.n.coeffs();
    let u2 = state.u.c[1].coeffs();
    let mut g_om = vec![C64::new(0.0, 0.0); g.len()];
    let mut g_du = vec![C64::new(0.0, 0.0); g.len()];
    for (idx, w) in g.modes() {
        let k = g.lab_k(w, s);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if params.physics.shear {
            // -d_z u2 + d_x u2
            g_om[idx] = times_ik(u2[idx], k[0] - k[2]);
        }
        // (1/A)(d_x^2 + d_z^2) n
        g_du[idx] = -n[idx] * ((k[0] * k[0] + k[2] * k[2]) * inv_a);
        if let Some(adv) = &quad.advection {
            g_om[idx] += (times_ik(adv[2][idx], k[0]) - times_ik(adv[0][idx], k[2])) * inv_a;
            // -(1/A)(Delta N2 - d_y div N)
            let kn = adv[0][idx] * k[0] + adv[1][idx] * k[1] + adv[2][idx] * k[2];
            g_du[idx] += (adv[1][idx] * k2 - kn * k[1]) * inv_a;
        }
    }
    Ok((g_om, g_du))
}

/// Trapezoidal residual of one of the two vorticity-form equations along a
/// step, in the frame labels of `before`. `select` picks `omega2` (0) or `Delta u2` (1).
fn vorticity_residual(before: &FlowState, after: &FlowState, dt: f64, params: &Params, select: usize) -> Result<f64> {
    let target = if params.physics.shear { before.frame_shear() + dt } else { before.frame_shear() };
    let mut aligned = after.clone();
    if (after.frame_shear() - target).abs() > 1e-12 {
        let r = |f: &SpectralField| f.relabel_to(target).map(|r| r.field);
        aligned.n = r(&after.n)?;
        aligned.u = VectorField::new([r(&after.u.c[0])?, r(&after.u.c[1])?, r(&after.u.c[2])?]);
    }
    let q = |st: &FlowState| -> SpectralField {
        if select == 0 {
            vorticity_omega2(st)
        } else {
            st.u.c[1].laplacian()
        }
    };
    let q0 = q(before);
    let q1 = q(&aligned);
    let (a0, b0) = vorticity_sources(before, params)?;
    let (a1, b1) = vorticity_sources(&aligned, params)?;
    let (g0, g1) = if select == 0 { (a0, a1) } else { (b0, b1) };
    let g = before.grid().clone();
    let inv_a = 1.0 / params.amplitude;
    let mut acc = 0.0;
    for (idx, w) in g.modes() {
        let k20 = g.lab_k2(w, before.frame_shear());
        let k21 = g.lab_k2(w, aligned.frame_shear());
        let c0 = q0.coeffs()[idx];
        let c1 = q1.coeffs()[idx];
        let r = (c1 - c0) / dt + (c0 * k20 + c1 * k21) * (0.5 * inv_a) - (g0[idx] + g1[idx]) * 0.5;
        acc += r.norm_sqr();
    }
    Ok(math::sqrt(acc * g.volume()))
}

/// Consistency residual of the `omega2` equation between two consecutive states.
pub fn residual_omega2_equation(before: &FlowState, after: &FlowState, dt: f64, params: &Params) -> Result<f64> {
    vorticity_residual(before, after, dt, params, 0)
}

/// Consistency residual of the `Delta u2` equation between two consecutive states.
pub fn residual_delta_u2_equation(before: &FlowState, after: &FlowState, dt: f64, params: &Params) -> Result<f64> {
    vorticity_residual(before, after, dt, params, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridSpec};
    use core::f64::consts::PI;

    fn grid() -> Arc<Grid> {
        make_grid(GridSpec::new(8, 32, 8, 4.0 * PI)).unwrap()
    }

    fn random_scalar(g: &Arc<Grid>, seed: u64, s: f64) -> SpectralField {
        let vals: Vec<f64> = (0..g.len())
            .map(|i| libm::sin(0.37 * i as f64 + seed as f64) * libm::cos(0.0013 * (i * i) as f64 + 0.5 * seed as f64))
            .collect();
        SpectralField::from_values(g, &vals, s).unwrap().dealiased()
    }

    fn random_velocity(g: &Arc<Grid>, seed: u64, s: f64, amp: f64) -> VectorField {
        let a = VectorField::new([random_scalar(g, seed, s), random_scalar(g, seed + 1, s), random_scalar(g, seed + 2, s)]);
        a.curl().leray().scaled(amp)
    }

    #[test]
    fn one_mode_decay_factor() {
        let g = grid();
        let mut f = SpectralField::zeros(&g, 0.0);
        let w = WaveIndex { k1: 1, m: 0, k3: 0 };
        f.set_coeff(w, C64::new(1.0, 0.0));
        let t = 3.0;
        let out = closed_form_linear_solution(&f, 1000.0, t);
        let expected = libm::exp(-(t + t * t * t / 3.0) / 1000.0);
        assert!((out.coeff(w).re - expected).abs() < 1e-15);
        assert!((out.frame_shear() - t).abs() < 1e-15);

        let mut h = SpectralField::zeros(&g, 0.0);
        let w0 = WaveIndex { k1: 1, m: 0, k3: -1 };
        h.set_coeff(w0, C64::new(1.0, 0.0));
        let out = closed_form_linear_solution(&h, 10.0, t);
        assert!((out.coeff(w0).re - libm::exp(-2.0 * t / 10.0)).abs() < 1e-15);
    }

    #[test]
    fn propagator_is_a_semigroup() {
        let g = grid();
        let f = random_scalar(&g, 3, 0.1);
        let a = linear_propagator(&linear_propagator(&f, 20.0, 0.7), 20.0, 1.1);
        let b = linear_propagator(&f, 20.0, 1.8);
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
        assert!((a.frame_shear() - b.frame_shear()).abs() < 1e-14);
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid();
        let st = FlowState::new(0.0, SpectralField::zeros(&g, 0.0), VectorField::zeros(&g, 0.0)).unwrap();
        let params = Params { amplitude: 10.0, ..Params::default() };
        let (out, _) = step_imex(&st, &params, 0.1).unwrap();
        assert!(out.n.coeffs().iter().all(|c| *c == C64::new(0.0, 0.0)));
        assert!(out.u.c.iter().all(|f| f.coeffs().iter().all(|c| *c == C64::new(0.0, 0.0))));
    }

    #[test]
    fn frozen_linear_step_matches_closed_form() {
        let g = grid();
        let n = random_scalar(&g, 5, 0.0);
        let st = FlowState::new(0.0, n.clone(), VectorField::zeros(&g, 0.0)).unwrap();
        let params = Params { amplitude: 100.0, physics: Physics::FROZEN_LINEAR, ..Params::default() };
        let (out, _) = step_imex(&st, &params, 0.05).unwrap();
        let exact = closed_form_linear_solution(&n, 100.0, 0.05);
        for (x, y) in out.n.coeffs().iter().zip(exact.coeffs()) {
            assert!((x - y).norm() <= 1e-15 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn density_rhs_has_zero_mean_and_vanishes_for_constants() {
        let g = grid();
        let n = random_scalar(&g, 9, 0.2);
        let u = random_velocity(&g, 11, 0.2, 0.3);
        let st = FlowState::new(0.0, n, u.clone()).unwrap();
        let params = Params { amplitude: 5.0, ..Params::default() };
        let rhs = density_rhs(&st, &params).unwrap();
        assert_eq!(rhs.coeffs()[0], C64::new(0.0, 0.0));

        let mut constant = SpectralField::zeros(&g, 0.2);
        constant.set_coeff(WaveIndex { k1: 0, m: 0, k3: 0 }, C64::new(2.0, 0.0));
        let st = FlowState::new(0.0, constant, u).unwrap();
        let rhs = density_rhs(&st, &params).unwrap();
        assert!(rhs.l2() < 1e-13);
    }

    #[test]
    fn lift_of_single_sine() {
        let g = grid();
        let mut u2 = SpectralField::zeros(&g, 0.0);
        u2.set_coeff(WaveIndex { k1: 1, m: 0, k3: 0 }, C64::new(0.0, -0.05));
        u2.set_coeff(WaveIndex { k1: -1, m: 0, k3: 0 }, C64::new(0.0, 0.05));
        let z = SpectralField::zeros(&g, 0.0);
        let u = VectorField::new([z.clone(), u2.clone(), z.clone()]);
        let lift = lift_term(&u);
        assert_eq!(lift.c[0].coeffs(), u2.scaled(-1.0).coeffs());
        assert_eq!(lift.c[2].coeffs(), u2.scaled(-1.0).coeffs());
        assert!(lift.c[1].l2() == 0.0);
        // With the shear pressure the x-component flips sign: F = (u2, 0, -u2).
        let st = FlowState::new(0.0, z.clone(), u).unwrap();
        let params = Params { amplitude: 10.0, physics: Physics { nonlinear: false, ..Physics::FULL }, ..Params::default() };
        let f = momentum_rhs(&st, &params).unwrap();
        for (x, y) in f.c[0].coeffs().iter().zip(u2.coeffs()) {
            assert!((x - y).norm() < 1e-15);
        }
        for (x, y) in f.c[2].coeffs().iter().zip(u2.coeffs()) {
            assert!((x + y).norm() < 1e-15);
        }
    }

    #[test]
    fn momentum_rhs_rejects_divergent_input() {
        let g = grid();
        let phi = random_scalar(&g, 1, 0.0);
        let st = FlowState::new(0.0, SpectralField::zeros(&g, 0.0), phi.gradient()).unwrap();
        let params = Params { amplitude: 10.0, ..Params::default() };
        assert!(matches!(momentum_rhs(&st, &params), Err(Error::Divergence { .. })));
    }

    #[test]
    fn steps_keep_divergence_mass_and_wall_mode() {
        let g = grid();
        let mut n = random_scalar(&g, 2, 0.0).scaled(0.2);
        n.set_coeff(WaveIndex { k1: 0, m: 0, k3: 0 }, C64::new(1.0, 0.0));
        let u = random_velocity(&g, 4, 0.0, 0.1);
        assert!(u.c[1].zero_mode().l2() == 0.0);
        assert!(u.c[0].zero_mode().l2() > 0.0);
        let mut st = FlowState::new(0.0, n, u).unwrap();
        let m0 = st.n.integral();
        let params = Params { amplitude: 10.0, ..Params::default() };
        for _ in 0..30 {
            st = step_imex(&st, &params, 0.05).unwrap().0;
            assert!(st.u.divergence_relative() < 1e-12);
            let wall = st.u.c[1].zero_mode().l2();
            assert!(wall < 1e-12, "u2 zero mode {wall}");
        }
        assert!((st.n.integral() - m0).abs() < 1e-12 * m0);
        assert!(st.frame_shear().abs() <= 0.5 * g.d_eta() + 1e-14);
    }

    #[test]
    fn adaptive_stepper_falls_back_to_blowup_error() {
        let g = grid();
        let n = random_scalar(&g, 2, 0.0);
        let st = FlowState::new(0.0, n, VectorField::zeros(&g, 0.0)).unwrap();
        // A cap of zero change cannot be met, so dt collapses below dt_min.
        let params = Params { max_linf_change: 1e-300, dt: 0.1, dt_min: 1e-3, ..Params::default() };
        let mut stepper = Stepper::new(params).unwrap();
        assert!(matches!(stepper.step(&st, 1.0), Err(Error::BlowupSuspected { .. })));
    }

    #[test]
    fn omega2_of_gradient_vanishes() {
        let g = grid();
        let phi = random_scalar(&g, 6, 0.3);
        let st = FlowState::new(0.0, SpectralField::zeros(&g, 0.3), phi.gradient()).unwrap();
        assert!(vorticity_omega2(&st).l2() < 1e-13);
    }
}
