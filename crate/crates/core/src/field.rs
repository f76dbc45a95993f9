//! Spectral scalar and vector fields in the shearing frame.
//!
//! A field is a coefficient array plus the frame shear `s` at which its labels
//! are read: the stored slot `(k1, m, k3)` represents the lab wave
//! `exp(i (k1 x + (m d_eta - (k1 + k3) s) y + k3 z))`. Collocation values are
//! therefore the lab field sampled at the sheared points `(x + s y, y, z + s y)`.

use alloc::{sync::Arc, vec, vec::Vec};

use crate::grid::{Axis, Grid, WaveIndex};
use crate::{math, Error, Result, C64};

const FRAME_TOL: f64 = 1e-12;

fn same_frame(a: f64, b: f64) -> bool {
    (a - b).abs() <= FRAME_TOL * (1.0 + a.abs().max(b.abs()))
}

#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid>,
    coeffs: Vec<C64>,
    shear: f64,
}

/// Result of a frame remap.
#[derive(Clone, Debug)]
pub struct Remapped {
    pub field: SpectralField,
    /// L2 energy of the coefficients pushed out of the resolved band.
    pub lost_energy: f64,
    pub periods: i64,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>, shear: f64) -> Self {
        Self { grid: grid.clone(), coeffs: vec![C64::new(0.0, 0.0); grid.len()], shear }
    }

    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<C64>, shear: f64) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), actual: coeffs.len() });
        }
        Ok(Self { grid: grid.clone(), coeffs, shear })
    }

    /// Transforms collocation values (sampled at the sheared points of frame `shear`).
    pub fn from_values(grid: &Arc<Grid>, values: &[f64], shear: f64) -> Result<Self> {
        let coeffs = grid.forward_real(values)?;
        Ok(Self { grid: grid.clone(), coeffs, shear })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn frame_shear(&self) -> f64 {
        self.shear
    }

    pub fn coeff(&self, w: WaveIndex) -> C64 {
        self.grid.index_of(w).map_or(C64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, w: WaveIndex, c: C64) {
        if let Some(i) = self.grid.index_of(w) {
            self.coeffs[i] = c;
        }
    }

    pub fn to_values(&self) -> Vec<f64> {
        self.grid.inverse_real(&self.coeffs).expect("coefficient length matches grid")
    }

    pub fn dealiased(mut self) -> Self {
        self.grid.apply_dealias(&mut self.coeffs);
        self
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid.spec() != other.grid.spec() {
            return Err(Error::ShapeMismatch { expected: self.grid.len(), actual: other.grid.len() });
        }
        if !same_frame(self.shear, other.shear) {
            return Err(Error::FrameMismatch { left: self.shear, right: other.shear });
        }
        Ok(())
    }

    /// Pointwise `self += a * other` on coefficients.
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    pub fn map_modes(&self, mut f: impl FnMut(WaveIndex, C64) -> C64) -> Self {
        let mut out = self.clone();
        for (idx, w) in self.grid.modes() {
            out.coeffs[idx] = f(w, self.coeffs[idx]);
        }
        out
    }

    /// Lab-frame partial derivative: multiplication by `i k_lab(s)`.
    pub fn derivative(&self, axis: Axis) -> Self {
        let g = self.grid.clone();
        let s = self.shear;
        self.map_modes(|w, c| {
            let k = g.lab_k(w, s)[axis as usize];
            C64::new(-c.im * k, c.re * k)
        })
    }

    pub fn second_derivative(&self, axis: Axis) -> Self {
        let g = self.grid.clone();
        let s = self.shear;
        self.map_modes(|w, c| {
            let k = g.lab_k(w, s)[axis as usize];
            -c * (k * k)
        })
    }

    pub fn gradient(&self) -> VectorField {
        VectorField::new([self.derivative(Axis::X), self.derivative(Axis::Y), self.derivative(Axis::Z)])
    }

    pub fn laplacian(&self) -> Self {
        let g = self.grid.clone();
        let s = self.shear;
        self.map_modes(|w, c| -c * g.lab_k2(w, s))
    }

    /// Spatial mean (the `k = 0` coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Integral over the box, evaluated spectrally.
    pub fn integral(&self) -> f64 {
        self.grid.volume() * self.coeffs[0].re
    }

    /// `P0`: average over x and z (keeps `k1 = k3 = 0`).
    pub fn zero_mode(&self) -> Self {
        self.map_modes(|w, c| if w.is_zero_mode() { c } else { C64::new(0.0, 0.0) })
    }

    /// `P_neq = I - P0`.
    pub fn nonzero_modes(&self) -> Self {
        self.map_modes(|w, c| if w.is_zero_mode() { C64::new(0.0, 0.0) } else { c })
    }

    pub fn l2_sq(&self) -> f64 {
        self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn l2(&self) -> f64 {
        math::sqrt(self.l2_sq())
    }

    pub fn l2_sq_where(&self, mut keep: impl FnMut(WaveIndex) -> bool) -> f64 {
        let mut acc = 0.0;
        for (idx, w) in self.grid.modes() {
            if keep(w) {
                acc += self.coeffs[idx].norm_sqr();
            }
        }
        acc * self.grid.volume()
    }

    /// L2 norms of the non-zero modes split into shear-coupled (`k1 + k3 != 0`)
    /// and shear-blind (`k1 + k3 = 0`) classes.
    pub fn nonzero_l2_by_q(&self) -> (f64, f64) {
        let mut qnz = 0.0;
        let mut qz = 0.0;
        for (idx, w) in self.grid.modes() {
            if w.is_zero_mode() {
                continue;
            }
            if w.q() == 0 {
                qz += self.coeffs[idx].norm_sqr();
            } else {
                qnz += self.coeffs[idx].norm_sqr();
            }
        }
        let v = self.grid.volume();
        (math::sqrt(qnz * v), math::sqrt(qz * v))
    }

    /// `H^k` norm with weight `sum_{j <= k} |k|^{2j}`.
    pub fn sobolev(&self, order: u32) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for (idx, w) in g.modes() {
            let k2 = g.lab_k2(w, self.shear);
            let mut weight = 0.0;
            let mut p = 1.0;
            for _ in 0..=order {
                weight += p;
                p *= k2;
            }
            acc += weight * self.coeffs[idx].norm_sqr();
        }
        math::sqrt(acc * g.volume())
    }

    /// Values on the 3/2-padded grid, used for the non-quadratic norms.
    pub fn padded_values(&self) -> Vec<f64> {
        self.grid.inverse_padded(&self.coeffs).expect("coefficient length matches grid")
    }

    pub fn linf(&self) -> f64 {
        self.padded_values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn padded_lp(&self, p: u32) -> f64 {
        let vals = self.padded_values();
        let n = vals.len() as f64;
        let sum: f64 = vals.iter().map(|v| {
            let a = v.abs();
            let mut r = 1.0;
            for _ in 0..p {
                r *= a;
            }
            r
        }).sum();
        math::powf(self.grid.volume() * sum / n, 1.0 / p as f64)
    }

    pub fn l1(&self) -> f64 {
        self.padded_lp(1)
    }

    pub fn l4(&self) -> f64 {
        self.padded_lp(4)
    }

    /// Minimum over the collocation points.
    pub fn min_value(&self) -> f64 {
        self.to_values().iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_abs_value(&self) -> f64 {
        self.to_values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Reads the same lab field in a frame whose shear differs by a whole number of
    /// remap periods. Fails if `target` is not such a frame.
    pub fn relabel_to(&self, target: f64) -> Result<Remapped> {
        let d = self.grid.d_eta();
        let periods_f = (self.shear - target) / d;
        let periods = math::round(periods_f) as i64;
        if (periods_f - periods as f64).abs() > 1e-9 {
            return Err(Error::FrameMismatch { left: self.shear, right: target });
        }
        let (coeffs, lost) = self.grid.relabel(&self.coeffs, periods);
        Ok(Remapped {
            field: Self { grid: self.grid.clone(), coeffs, shear: self.shear - periods as f64 * d },
            lost_energy: lost,
            periods,
        })
    }

    /// Moves to the frame with `|s| <= d_eta / 2` that represents the same lab field.
    pub fn canonical(&self) -> Remapped {
        let periods = self.grid.remap_periods(self.shear);
        let (coeffs, lost) = self.grid.relabel(&self.coeffs, periods);
        Remapped {
            field: Self {
                grid: self.grid.clone(),
                coeffs,
                shear: self.shear - periods as f64 * self.grid.d_eta(),
            },
            lost_energy: lost,
            periods,
        }
    }

    /// Frame coefficients reinterpreted at shear `shear + ds`: in the lab this is
    /// pure transport by the flow `(y, 0, y)` over time `ds`.
    pub fn sheared_by(&self, ds: f64) -> Self {
        Self { grid: self.grid.clone(), coeffs: self.coeffs.clone(), shear: self.shear + ds }
    }

    pub(crate) fn set_frame_shear(&mut self, s: f64) {
        self.shear = s;
    }
}

/// Pseudo-spectral product: both factors on the collocation grid, multiplied,
/// transformed back and dealiased.
pub fn pointwise_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.check_compatible(g)?;
    let grid = f.grid();
    let vals = grid.inverse_many(&[f.coeffs(), g.coeffs()])?;
    let prod: Vec<f64> = vals[0].iter().zip(&vals[1]).map(|(a, b)| a * b).collect();
    Ok(SpectralField::from_values(grid, &prod, f.frame_shear())?.dealiased())
}

/// Transport by the background shear over time `s` followed by a frame remap.
pub fn shear_remap(field: &SpectralField, s: f64) -> Remapped {
    field.sheared_by(s).canonical()
}

#[derive(Clone, Debug)]
pub struct VectorField {
    pub c: [SpectralField; 3],
}

impl VectorField {
    pub fn new(c: [SpectralField; 3]) -> Self {
        debug_assert!(c[0].check_compatible(&c[1]).is_ok() && c[0].check_compatible(&c[2]).is_ok());
        Self { c }
    }

    pub fn zeros(grid: &Arc<Grid>, shear: f64) -> Self {
        Self::new([0, 1, 2].map(|_| SpectralField::zeros(grid, shear)))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.c[0].grid()
    }

    pub fn frame_shear(&self) -> f64 {
        self.c[0].frame_shear()
    }

    pub fn divergence(&self) -> SpectralField {
        let g = self.grid().clone();
        let s = self.frame_shear();
        let mut out = SpectralField::zeros(&g, s);
        for (idx, w) in g.modes() {
            let k = g.lab_k(w, s);
            let d = self.c[0].coeffs[idx] * k[0] + self.c[1].coeffs[idx] * k[1] + self.c[2].coeffs[idx] * k[2];
            out.coeffs[idx] = C64::new(-d.im, d.re);
        }
        out
    }

    pub fn curl(&self) -> VectorField {
        let g = self.grid().clone();
        let s = self.frame_shear();
        let mut out = VectorField::zeros(&g, s);
        for (idx, w) in g.modes() {
            let k = g.lab_k(w, s);
            let u = [self.c[0].coeffs[idx], self.c[1].coeffs[idx], self.c[2].coeffs[idx]];
            let ik = |a: usize, b: usize| {
                let v = u[b] * k[a];
                C64::new(-v.im, v.re)
            };
            out.c[0].coeffs[idx] = ik(1, 2) - ik(2, 1);
            out.c[1].coeffs[idx] = ik(2, 0) - ik(0, 2);
            out.c[2].coeffs[idx] = ik(0, 1) - ik(1, 0);
        }
        out
    }

    /// Leray projection onto divergence-free fields; the `k = 0` mode is kept.
    pub fn leray(&self) -> VectorField {
        let g = self.grid().clone();
        let s = self.frame_shear();
        let mut out = self.clone();
        for (idx, w) in g.modes() {
            let k = g.lab_k(w, s);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                continue;
            }
            let u = [self.c[0].coeffs[idx], self.c[1].coeffs[idx], self.c[2].coeffs[idx]];
            let kdotu = (u[0] * k[0] + u[1] * k[1] + u[2] * k[2]) / k2;
            for a in 0..3 {
                out.c[a].coeffs[idx] = u[a] - kdotu * k[a];
            }
        }
        out
    }

    pub fn l2_sq(&self) -> f64 {
        self.c.iter().map(SpectralField::l2_sq).sum()
    }

    pub fn l2(&self) -> f64 {
        math::sqrt(self.l2_sq())
    }

    /// `sqrt(sum_i ||grad u_i||^2)`.
    pub fn gradient_l2(&self) -> f64 {
        math::sqrt(self.c.iter().map(|f| math::sq(f.sobolev(1)) - f.l2_sq()).sum::<f64>().max(0.0))
    }

    pub fn sobolev(&self, order: u32) -> f64 {
        math::sqrt(self.c.iter().map(|f| {
            let v = f.sobolev(order);
            v * v
        }).sum())
    }

    /// `||div u|| / ||grad u||`, zero for a vanishing field.
    pub fn divergence_relative(&self) -> f64 {
        let g = self.gradient_l2();
        if g == 0.0 {
            0.0
        } else {
            self.divergence().l2() / g
        }
    }

    /// Max over the padded grid of the Euclidean magnitude.
    pub fn linf(&self) -> f64 {
        let v: Vec<Vec<f64>> = self.c.iter().map(SpectralField::padded_values).collect();
        let mut m: f64 = 0.0;
        for i in 0..v[0].len() {
            m = m.max(v[0][i] * v[0][i] + v[1][i] * v[1][i] + v[2][i] * v[2][i]);
        }
        math::sqrt(m)
    }

    pub fn map(&self, mut f: impl FnMut(&SpectralField) -> SpectralField) -> VectorField {
        VectorField::new([f(&self.c[0]), f(&self.c[1]), f(&self.c[2])])
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) -> Result<()> {
        for i in 0..3 {
            self.c[i].axpy(a, &other.c[i])?;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> VectorField {
        self.map(|f| f.scaled(a))
    }

    pub(crate) fn set_frame_shear(&mut self, s: f64) {
        self.c.iter_mut().for_each(|f| f.set_frame_shear(s));
    }
}

/// Density and velocity perturbation at time `t`; all components share one frame.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub n: SpectralField,
    pub u: VectorField,
}

impl FlowState {
    pub fn new(t: f64, n: SpectralField, u: VectorField) -> Result<Self> {
        for c in &u.c {
            n.check_compatible(c)?;
        }
        Ok(Self { t, n, u })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.n.grid()
    }

    pub fn frame_shear(&self) -> f64 {
        self.n.frame_shear()
    }

    pub fn fields(&self) -> [&SpectralField; 4] {
        [&self.n, &self.u.c[0], &self.u.c[1], &self.u.c[2]]
    }

    /// Remaps every component to the canonical frame; returns the total lost energy.
    pub fn canonicalize(&mut self) -> f64 {
        let r = self.n.canonical();
        if r.periods == 0 {
            return 0.0;
        }
        let mut lost = r.lost_energy;
        self.n = r.field;
        for c in self.u.c.iter_mut() {
            let rc = c.canonical();
            lost += rc.lost_energy;
            *c = rc.field;
        }
        lost
    }

    pub(crate) fn set_frame_shear(&mut self, s: f64) {
        self.n.set_frame_shear(s);
        self.u.set_frame_shear(s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridSpec};
    use core::f64::consts::PI;

    fn plane_wave(g: &Arc<Grid>, w: WaveIndex, c: C64, s: f64) -> SpectralField {
        let mut f = SpectralField::zeros(g, s);
        f.set_coeff(w, c);
        f.set_coeff(WaveIndex { k1: -w.k1, m: -w.m, k3: -w.k3 }, c.conj());
        f
    }

    #[test]
    fn values_are_lab_field_at_sheared_points() {
        let g = make_grid(GridSpec::new(8, 16, 8, 4.0 * PI)).unwrap();
        let s = 0.37;
        let w = WaveIndex { k1: 1, m: 3, k3: 2 };
        let c = C64::new(0.2, -0.7);
        let f = plane_wave(&g, w, c, s);
        let vals = f.to_values();
        let xs = g.coordinates(Axis::X);
        let ys = g.coordinates(Axis::Y);
        let zs = g.coordinates(Axis::Z);
        let eta = g.lab_eta(w, s);
        for i in 0..8 {
            for j in 0..16 {
                for k in 0..8 {
                    let (x, y, z) = (xs[i] + s * ys[j], ys[j], zs[k] + s * ys[j]);
                    let ph = x + eta * y + 2.0 * z;
                    let expected = 2.0 * (c.re * libm::cos(ph) - c.im * libm::sin(ph));
                    assert!((vals[g.index(i, j, k)] - expected).abs() < 1e-13);
                }
            }
        }
        let back = SpectralField::from_values(&g, &vals, s).unwrap();
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn relabel_preserves_lab_wavenumbers() {
        let g = make_grid(GridSpec::new(8, 32, 8, 2.0 * PI)).unwrap();
        let w = WaveIndex { k1: 1, m: 2, k3: 1 };
        let f = plane_wave(&g, w, C64::new(1.0, 0.5), 1.2 * g.d_eta());
        let r = f.canonical();
        assert_eq!(r.periods, 1);
        assert!(r.field.frame_shear().abs() <= 0.5 * g.d_eta());
        // q = 2, so the label moves from m = 2 to m = 0.
        let moved = WaveIndex { m: 0, ..w };
        assert_eq!(r.field.coeff(moved), C64::new(1.0, 0.5));
        assert!((g.lab_eta(moved, r.field.frame_shear()) - g.lab_eta(w, f.frame_shear())).abs() < 1e-14);
        assert_eq!(r.lost_energy, 0.0);
        assert!((r.field.l2() - f.l2()).abs() < 1e-14);
    }

    #[test]
    fn relabel_out_of_band_counts_loss() {
        let g = make_grid(GridSpec::new(8, 16, 8, 2.0 * PI)).unwrap();
        let w = WaveIndex { k1: 2, m: -4, k3: 0 };
        let f = plane_wave(&g, w, C64::new(1.0, 0.0), g.d_eta());
        let r = f.canonical();
        // The mode and its conjugate land on m = -6 and m = 6, outside |m| <= 5.
        assert_eq!(g.dealias_limits()[1], 5);
        assert!((r.lost_energy - f.l2_sq()).abs() < 1e-12 * f.l2_sq());
        assert_eq!(r.field.l2(), 0.0);
    }

    #[test]
    fn shear_remap_of_single_mode() {
        let g = make_grid(GridSpec::new(8, 16, 8, 2.0 * PI)).unwrap();
        let w = WaveIndex { k1: 1, m: 0, k3: 0 };
        let f = plane_wave(&g, w, C64::new(1.0, 0.0), 0.0);
        let r = shear_remap(&f, g.d_eta());
        assert_eq!(r.field.coeff(WaveIndex { m: -1, ..w }), C64::new(1.0, 0.0));
        assert_eq!(r.field.coeff(w), C64::new(0.0, 0.0));
        assert!(r.field.frame_shear().abs() < 1e-15);
    }

    #[test]
    fn curl_is_divergence_free_and_leray_idempotent() {
        let g = make_grid(GridSpec::new(8, 8, 8, 3.0)).unwrap();
        let s = 0.21;
        let mut a = VectorField::zeros(&g, s);
        for (idx, w) in g.modes().collect::<Vec<_>>() {
            if g.is_resolved(w) {
                let t = idx as f64;
                a.c[0].coeffs_mut()[idx] = C64::new(libm::sin(t), libm::cos(2.0 * t));
                a.c[1].coeffs_mut()[idx] = C64::new(libm::cos(t), 0.3);
                a.c[2].coeffs_mut()[idx] = C64::new(0.1 * t.sqrt(), libm::sin(3.0 * t));
            }
        }
        let curl = a.curl();
        assert!(curl.divergence().l2() < 1e-12 * curl.gradient_l2());
        let p = a.leray();
        let pp = p.leray();
        for i in 0..3 {
            for (x, y) in p.c[i].coeffs().iter().zip(pp.c[i].coeffs()) {
                assert!((x - y).norm() < 1e-13);
            }
        }
        assert!(p.divergence_relative() < 1e-14);
    }

    #[test]
    fn frame_mismatch_is_an_error() {
        let g = make_grid(GridSpec::new(4, 4, 4, 1.0)).unwrap();
        let mut a = SpectralField::zeros(&g, 0.0);
        let b = SpectralField::zeros(&g, 0.1);
        assert!(matches!(a.axpy(1.0, &b), Err(Error::FrameMismatch { .. })));
    }

    #[test]
    fn zero_and_nonzero_projections_are_orthogonal() {
        let g = make_grid(GridSpec::new(8, 8, 8, 5.0)).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| libm::sin(i as f64 * 0.37) + 0.2).collect();
        let f = SpectralField::from_values(&g, &vals, 0.0).unwrap();
        let total = f.l2_sq();
        let split = f.zero_mode().l2_sq() + f.nonzero_modes().l2_sq();
        assert!((total - split).abs() < 1e-12 * total);
        let (a, b) = f.nonzero_l2_by_q();
        assert!((a * a + b * b - f.nonzero_modes().l2_sq()).abs() < 1e-12 * total);
    }
}
