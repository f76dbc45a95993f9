//! Elliptic solves: the chemical concentration and the three pressure parts.
//!
//! All operators are Fourier multipliers on lab wavenumbers at the field's frame
//! shear. The mean of every pressure is fixed to zero.

use crate::field::{pointwise_product, FlowState, SpectralField, VectorField};
use crate::grid::Axis;
use crate::{Error, Result, C64};

const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

/// Solves `-Delta c + c = n`.
pub fn solve_chemo(n: &SpectralField) -> SpectralField {
    let g = n.grid().clone();
    let s = n.frame_shear();
    n.map_modes(|w, c| c / (1.0 + g.lab_k2(w, s)))
}

/// Solves `Delta p = f` for zero-mean `f`; the result has zero mean.
pub fn solve_poisson_meanzero(f: &SpectralField) -> Result<SpectralField> {
    let mean = f.mean();
    let rms = f.l2() / libm::sqrt(f.grid().volume());
    if mean.abs() > 1e-10 * rms {
        return Err(Error::NonZeroMean { mean, norm: rms });
    }
    Ok(inverse_laplacian(f))
}

/// `Delta^{-1}` with the `k = 0` mode dropped.
pub fn inverse_laplacian(f: &SpectralField) -> SpectralField {
    let g = f.grid().clone();
    let s = f.frame_shear();
    f.map_modes(|w, c| {
        let k2 = g.lab_k2(w, s);
        if k2 == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            -c / k2
        }
    })
}

/// Shear pressure, `Delta P1 = -2 A (d_x + d_z) u2`.
pub fn pressure_shear(u2: &SpectralField, a: f64) -> SpectralField {
    let g = u2.grid().clone();
    let s = u2.frame_shear();
    u2.map_modes(|w, c| {
        let k2 = g.lab_k2(w, s);
        if k2 == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let f = 2.0 * a * w.q() as f64 / k2;
        C64::new(-c.im * f, c.re * f)
    })
}

/// Buoyancy pressure, `Delta P2 = d_y n`.
pub fn pressure_buoyancy(n: &SpectralField) -> SpectralField {
    let g = n.grid().clone();
    let s = n.frame_shear();
    n.map_modes(|w, c| {
        let k2 = g.lab_k2(w, s);
        if k2 == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let f = -g.lab_eta(w, s) / k2;
        C64::new(-c.im * f, c.re * f)
    })
}

/// Advection pressure from a precomputed `N = u . grad u`: `Delta P3 = -div N`.
pub fn pressure_advection(advection: &VectorField) -> SpectralField {
    inverse_laplacian(&advection.divergence()).scaled(-1.0)
}

/// The three pressure parts `(P1, P2, P3)` of a state, unscaled as in the
/// original time variable: shear, buoyancy and advection.
pub fn pressure_components(state: &FlowState, a: f64) -> Result<[SpectralField; 3]> {
    let u = &state.u;
    let mut adv = VectorField::zeros(u.grid(), u.frame_shear());
    for i in 0..3 {
        for j in 0..3 {
            let p = pointwise_product(&u.c[j], &u.c[i].derivative(AXES[j]))?;
            adv.c[i].axpy(1.0, &p)?;
        }
    }
    Ok([pressure_shear(&u.c[1], a), pressure_buoyancy(&state.n), pressure_advection(&adv)])
}

/// Leray projection onto divergence-free fields.
pub fn leray_project(v: &VectorField) -> VectorField {
    v.leray()
}
