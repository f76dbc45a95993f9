//! Collocation grids, 3D spectral transforms, dealiasing and shearing-frame
//! wavenumber bookkeeping.
//!
//! Coefficients are stored in a flat array with `k3` fastest, then the
//! y-mode index `m`, then `k1`: `index = (i * ny + j) * nz + k`. Along each axis
//! storage slot `i` holds wavenumber `i` for `i < n/2` and `i - n` otherwise,
//! so `nx = 8` gives `k1` in `{-4, ..., 3}`.
//!
//! The forward transform is normalized by `1/N` so that physical values are
//! `f = sum_k c_k exp(i k.x)` and the grid average of `|f|^2` equals
//! `sum_k |c_k|^2`. Phases refer to the lab origin `y = 0`, not to the first
//! collocation point `y = -Ly/2`, so odd `m` pick up a sign relative to a bare DFT.

use alloc::{format, sync::Arc, vec, vec::Vec};
use core::f64::consts::PI;

pub use crate::field::shear_remap;
use crate::fft::{BuiltinPlanner, Direction, Fft1d, FftPlanner};
use crate::{math, Error, Result, C64};

pub const TWO_PI: f64 = 2.0 * PI;

/// Grid description. `Lx = Lz = 2 pi`, so `k1` and `k3` are integers.
///
/// `nx` or `nz` may be 1, which collapses that direction (2D runs on the
/// `(x, y)` or `(y, z)` plane); the collapsed direction then carries unit
/// measure so integrals are planar.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub ly: f64,
    pub dealias_fraction: f64,
}

impl GridSpec {
    pub const DEFAULT_DEALIAS: f64 = 2.0 / 3.0;

    pub fn new(nx: usize, ny: usize, nz: usize, ly: f64) -> Self {
        Self { nx, ny, nz, ly, dealias_fraction: Self::DEFAULT_DEALIAS }
    }

    pub fn validate(&self) -> Result<()> {
        let even = |n: usize| n >= 4 && n % 2 == 0;
        if !(even(self.nx) || self.nx == 1) {
            return Err(Error::InvalidGrid(format!("nx = {} must be even and >= 4 (or 1 for 2D)", self.nx)));
        }
        if !even(self.ny) {
            return Err(Error::InvalidGrid(format!("ny = {} must be even and >= 4", self.ny)));
        }
        if !(even(self.nz) || self.nz == 1) {
            return Err(Error::InvalidGrid(format!("nz = {} must be even and >= 4 (or 1 for 2D)", self.nz)));
        }
        if self.nx == 1 && self.nz == 1 {
            return Err(Error::InvalidGrid("at most one of nx, nz may be collapsed".into()));
        }
        if !(self.ly.is_finite() && self.ly > 0.0) {
            return Err(Error::InvalidGrid(format!("ly = {} must be positive", self.ly)));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dealias_fraction = {} must lie in (0, 1]",
                self.dealias_fraction
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_2d(&self) -> bool {
        self.nx == 1 || self.nz == 1
    }
}

/// Frame wavenumbers of one stored mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WaveIndex {
    pub k1: i64,
    pub m: i64,
    pub k3: i64,
}

impl WaveIndex {
    /// Symbol of `d_x + d_z`: the coupling wavenumber of the shear.
    pub fn q(&self) -> i64 {
        self.k1 + self.k3
    }

    pub fn is_zero_mode(&self) -> bool {
        self.k1 == 0 && self.k3 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub struct Grid {
    spec: GridSpec,
    dims: [usize; 3],
    waves: [Vec<i64>; 3],
    kmax: [i64; 3],
    extent: [f64; 3],
    d_eta: f64,
    plans: [Arc<dyn Fft1d>; 3],
    padded_dims: [usize; 3],
    padded_plans: [Arc<dyn Fft1d>; 3],
}

impl core::fmt::Debug for Grid {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish_non_exhaustive()
    }
}

pub fn make_grid(spec: GridSpec) -> Result<Arc<Grid>> {
    make_grid_with(spec, &BuiltinPlanner)
}

pub fn make_grid_with(spec: GridSpec, planner: &dyn FftPlanner) -> Result<Arc<Grid>> {
    spec.validate()?;
    let dims = [spec.nx, spec.ny, spec.nz];
    let waves = dims.map(|n| (0..n).map(|i| wavenumber(i, n)).collect::<Vec<_>>());
    let kmax = dims.map(|n| {
        if n == 1 {
            0
        } else {
            math::floor(spec.dealias_fraction * (n / 2) as f64 + 1e-9) as i64
        }
    });
    let extent = [
        if spec.nx == 1 { 1.0 } else { TWO_PI },
        spec.ly,
        if spec.nz == 1 { 1.0 } else { TWO_PI },
    ];
    let padded_dims = dims.map(padded_len);
    let plans = dims.map(|n| planner.plan(n));
    let padded_plans = padded_dims.map(|n| planner.plan(n));
    Ok(Arc::new(Grid {
        d_eta: TWO_PI / spec.ly,
        spec,
        dims,
        waves,
        kmax,
        extent,
        plans,
        padded_dims,
        padded_plans,
    }))
}

fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 || n == 1 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn slot(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// 3/2 padding, rounded up to an even length.
fn padded_len(n: usize) -> usize {
    if n == 1 {
        1
    } else {
        let p = (3 * n + 1) / 2;
        p + p % 2
    }
}

impl Grid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Wavenumber table of an axis: integers for x and z, mode indices `m` for y.
    pub fn wavenumbers(&self, axis: Axis) -> &[i64] {
        &self.waves[axis as usize]
    }

    /// Largest retained `|k|` per axis under the dealiasing rule.
    pub fn dealias_limits(&self) -> [i64; 3] {
        self.kmax
    }

    /// y-wavenumber spacing `2 pi / Ly`; also the frame shear of one full remap period.
    pub fn d_eta(&self) -> f64 {
        self.d_eta
    }

    pub fn eta_table(&self) -> Vec<f64> {
        self.waves[1].iter().map(|&m| m as f64 * self.d_eta).collect()
    }

    /// Box measure; collapsed directions count as unit length.
    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.extent[a] / self.dims[a] as f64)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn index_of(&self, w: WaveIndex) -> Option<usize> {
        let [nx, ny, nz] = self.dims;
        let fits = |k: i64, n: usize| {
            let half = (n / 2) as i64;
            if n == 1 {
                k == 0
            } else {
                k >= -half && k < half
            }
        };
        if fits(w.k1, nx) && fits(w.m, ny) && fits(w.k3, nz) {
            Some(self.index(slot(w.k1, nx), slot(w.m, ny), slot(w.k3, nz)))
        } else {
            None
        }
    }

    pub fn wave(&self, i: usize, j: usize, k: usize) -> WaveIndex {
        WaveIndex { k1: self.waves[0][i], m: self.waves[1][j], k3: self.waves[2][k] }
    }

    pub fn wave_at(&self, idx: usize) -> WaveIndex {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        self.wave(i, j, k)
    }

    /// Every storage slot with its frame wavenumbers, in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (usize, WaveIndex)> + '_ {
        let [nx, ny, nz] = self.dims;
        (0..nx).flat_map(move |i| {
            (0..ny).flat_map(move |j| (0..nz).map(move |k| ((i * ny + j) * nz + k, self.wave(i, j, k))))
        })
    }

    /// Collocation coordinates; x and z in `[0, 2pi)`, y in `[-Ly/2, Ly/2)`.
    pub fn coordinates(&self, axis: Axis) -> Vec<f64> {
        let a = axis as usize;
        let n = self.dims[a];
        let h = self.extent[a] / n as f64;
        let origin = if axis == Axis::Y { -0.5 * self.spec.ly } else { 0.0 };
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|i| origin + i as f64 * h).collect()
    }

    /// Lab-frame y-wavenumber of a mode at frame shear `s`.
    #[inline]
    pub fn lab_eta(&self, w: WaveIndex, s: f64) -> f64 {
        w.m as f64 * self.d_eta - w.q() as f64 * s
    }

    #[inline]
    pub fn lab_k(&self, w: WaveIndex, s: f64) -> [f64; 3] {
        [w.k1 as f64, self.lab_eta(w, s), w.k3 as f64]
    }

    #[inline]
    pub fn lab_k2(&self, w: WaveIndex, s: f64) -> f64 {
        let [a, b, c] = self.lab_k(w, s);
        a * a + b * b + c * c
    }

    /// True when a mode survives the dealiasing mask.
    #[inline]
    pub fn is_resolved(&self, w: WaveIndex) -> bool {
        w.k1.abs() <= self.kmax[0] && w.m.abs() <= self.kmax[1] && w.k3.abs() <= self.kmax[2]
    }

    /// Boolean mask (true = retained) in storage order.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.len());
        for i in 0..self.dims[0] {
            for j in 0..self.dims[1] {
                for k in 0..self.dims[2] {
                    mask.push(self.is_resolved(self.wave(i, j, k)));
                }
            }
        }
        mask
    }

    pub fn apply_dealias(&self, coeffs: &mut [C64]) {
        let [nx, ny, nz] = self.dims;
        let [kx, ky, kz] = self.kmax;
        for i in 0..nx {
            let out_x = self.waves[0][i].abs() > kx;
            for j in 0..ny {
                let out_y = out_x || self.waves[1][j].abs() > ky;
                let row = self.index(i, j, 0);
                for k in 0..nz {
                    if out_y || self.waves[2][k].abs() > kz {
                        coeffs[row + k] = C64::new(0.0, 0.0);
                    }
                }
            }
        }
    }

    /// Storage index of the conjugate partner `-k` of every slot.
    pub(crate) fn conjugate_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, nz] = self.dims;
        self.index((nx - i) % nx, (ny - j) % ny, (nz - k) % nz)
    }

    fn flip_odd_y(&self, buf: &mut [C64]) {
        let [nx, ny, nz] = self.dims;
        for i in 0..nx {
            for j in 0..ny {
                if self.waves[1][j] % 2 != 0 {
                    let row = self.index(i, j, 0);
                    buf[row..row + nz].iter_mut().for_each(|c| *c = -*c);
                }
            }
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), actual: n });
        }
        Ok(())
    }

    /// Forward transform of real grid values (normalized by `1/N`).
    pub fn forward_real(&self, values: &[f64]) -> Result<Vec<C64>> {
        let mut out = self.forward_many(&[values])?;
        Ok(out.pop().unwrap_or_default())
    }

    /// Inverse transform to real grid values; the imaginary residue of a
    /// slightly non-Hermitian input is dropped.
    pub fn inverse_real(&self, coeffs: &[C64]) -> Result<Vec<f64>> {
        let mut out = self.inverse_many(&[coeffs])?;
        Ok(out.pop().unwrap_or_default())
    }

    /// Forward transforms of several real fields, two per complex FFT.
    pub fn forward_many(&self, values: &[&[f64]]) -> Result<Vec<Vec<C64>>> {
        let n = self.len();
        for v in values {
            self.check_len(v.len())?;
        }
        let scale = 1.0 / n as f64;
        let mut out = Vec::with_capacity(values.len());
        for pair in values.chunks(2) {
            let mut buf: Vec<C64> = match pair {
                [a, b] => a.iter().zip(b.iter()).map(|(&x, &y)| C64::new(x, y)).collect(),
                [a] => a.iter().map(|&x| C64::new(x, 0.0)).collect(),
                _ => unreachable!(),
            };
            fft3(&mut buf, self.dims, &self.plans, Direction::Forward);
            if pair.len() == 1 {
                buf.iter_mut().for_each(|c| *c *= scale);
                self.flip_odd_y(&mut buf);
                out.push(buf);
                continue;
            }
            let mut fa = vec![C64::new(0.0, 0.0); n];
            let mut fb = vec![C64::new(0.0, 0.0); n];
            let [nx, ny, nz] = self.dims;
            for i in 0..nx {
                for j in 0..ny {
                    for k in 0..nz {
                        let idx = self.index(i, j, k);
                        let z = buf[idx];
                        let zc = buf[self.conjugate_index(i, j, k)].conj();
                        fa[idx] = (z + zc) * (0.5 * scale);
                        fb[idx] = (z - zc) * C64::new(0.0, -0.5 * scale);
                    }
                }
            }
            self.flip_odd_y(&mut fa);
            self.flip_odd_y(&mut fb);
            out.push(fa);
            out.push(fb);
        }
        Ok(out)
    }

    /// Inverse transforms of several Hermitian spectra, two per complex FFT.
    pub fn inverse_many(&self, coeffs: &[&[C64]]) -> Result<Vec<Vec<f64>>> {
        for c in coeffs {
            self.check_len(c.len())?;
        }
        let mut out = Vec::with_capacity(coeffs.len());
        for pair in coeffs.chunks(2) {
            let mut buf: Vec<C64> = match pair {
                [a, b] => a.iter().zip(b.iter()).map(|(x, y)| x + C64::new(-y.im, y.re)).collect(),
                [a] => a.to_vec(),
                _ => unreachable!(),
            };
            self.flip_odd_y(&mut buf);
            fft3(&mut buf, self.dims, &self.plans, Direction::Inverse);
            out.push(buf.iter().map(|z| z.re).collect());
            if pair.len() == 2 {
                out.push(buf.iter().map(|z| z.im).collect());
            }
        }
        Ok(out)
    }

    pub fn padded_dims(&self) -> [usize; 3] {
        self.padded_dims
    }

    /// Values on the 3/2-padded collocation grid (spectral interpolation).
    pub fn inverse_padded(&self, coeffs: &[C64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        let [px, py, pz] = self.padded_dims;
        let mut buf = vec![C64::new(0.0, 0.0); px * py * pz];
        let [nx, ny, nz] = self.dims;
        for i in 0..nx {
            let pi = slot(self.waves[0][i], px);
            for j in 0..ny {
                let pj = slot(self.waves[1][j], py);
                let src = self.index(i, j, 0);
                let dst = (pi * py + pj) * pz;
                let sign = if self.waves[1][j] % 2 == 0 { 1.0 } else { -1.0 };
                for k in 0..nz {
                    buf[dst + slot(self.waves[2][k], pz)] = coeffs[src + k] * sign;
                }
            }
        }
        fft3(&mut buf, self.padded_dims, &self.padded_plans, Direction::Inverse);
        Ok(buf.into_iter().map(|z| z.re).collect())
    }

    /// Integer relabelling of the shearing frame by `periods` remap periods:
    /// frame index `m` becomes `m - q * periods` and the frame shear drops by
    /// `periods * d_eta`, which leaves every lab wavenumber unchanged.
    /// Coefficients that land outside the dealiased band are discarded; the
    /// return value carries their L2 energy.
    pub fn relabel(&self, coeffs: &[C64], periods: i64) -> (Vec<C64>, f64) {
        if periods == 0 {
            return (coeffs.to_vec(), 0.0);
        }
        let [nx, ny, nz] = self.dims;
        let mut out = vec![C64::new(0.0, 0.0); coeffs.len()];
        let mut lost = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let idx = self.index(i, j, k);
                    let c = coeffs[idx];
                    if c.re == 0.0 && c.im == 0.0 {
                        continue;
                    }
                    let w = self.wave(i, j, k);
                    let target = WaveIndex { m: w.m - w.q() * periods, ..w };
                    if target.m.abs() <= self.kmax[1] {
                        out[self.index(i, slot(target.m, ny), k)] = c;
                    } else {
                        lost += c.norm_sqr();
                    }
                }
            }
        }
        (out, lost * self.volume())
    }

    /// Number of whole remap periods that brings frame shear `s` into `[-d_eta/2, d_eta/2]`.
    pub fn remap_periods(&self, s: f64) -> i64 {
        math::round(s / self.d_eta) as i64
    }
}

/// In-place unnormalized 3D transform of a buffer laid out as `dims[0] x dims[1] x dims[2]`.
fn fft3(data: &mut [C64], dims: [usize; 3], plans: &[Arc<dyn Fft1d>; 3], dir: Direction) {
    let [n0, n1, n2] = dims;
    if n2 > 1 {
        plans[2].process(data, dir);
    }
    if n1 > 1 {
        let plane = n1 * n2;
        if n2 == 1 {
            plans[1].process(data, dir);
        } else {
            let mut scratch = vec![C64::new(0.0, 0.0); plane];
            for slab in data.chunks_exact_mut(plane) {
                transpose(slab, &mut scratch, n1, n2);
                plans[1].process(&mut scratch, dir);
                transpose(&scratch, slab, n2, n1);
            }
        }
    }
    if n0 > 1 {
        let plane = n1 * n2;
        if plane == 1 {
            plans[0].process(data, dir);
        } else {
            let mut scratch = vec![C64::new(0.0, 0.0); data.len()];
            transpose(data, &mut scratch, n0, plane);
            plans[0].process(&mut scratch, dir);
            transpose(&scratch, data, plane, n0);
        }
    }
}

/// `dst[c * rows + r] = src[r * cols + c]`, blocked for cache reuse.
fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
