//! Initial conditions: periodized Gaussian blobs and seeded random band-limited fields.

use alloc::{sync::Arc, vec, vec::Vec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{SpectralField, VectorField};
use crate::grid::{Axis, Grid, WaveIndex, TWO_PI};
use crate::{math, Error, Result, C64};

/// Gaussian `exp(-|x - center|^2 / (2 width^2))` summed over the nearest periodic
/// images and scaled to total mass `mass`. Collapsed axes are ignored.
pub fn gaussian_blob(grid: &Arc<Grid>, center: [f64; 3], width: f64, mass: f64) -> Result<SpectralField> {
    if !(width > 0.0) {
        return Err(Error::InvalidParam { field: "width", reason: "must be positive".into() });
    }
    if !(mass >= 0.0) {
        return Err(Error::InvalidParam { field: "mass", reason: "must be nonnegative".into() });
    }
    let [nx, ny, nz] = grid.dims();
    let coords = [grid.coordinates(Axis::X), grid.coordinates(Axis::Y), grid.coordinates(Axis::Z)];
    let periods = [TWO_PI, grid.spec().ly, TWO_PI];
    let active = [nx > 1, true, nz > 1];
    let profile = |a: usize| -> Vec<f64> {
        coords[a]
            .iter()
            .map(|&x| {
                if !active[a] {
                    return 1.0;
                }
                (-2..=2)
                    .map(|img| {
                        let d = x - center[a] + img as f64 * periods[a];
                        math::exp(-d * d / (2.0 * width * width))
                    })
                    .sum()
            })
            .collect()
    };
    let (px, py, pz) = (profile(0), profile(1), profile(2));
    let mut vals = vec![0.0; grid.len()];
    for i in 0..nx {
        for j in 0..ny {
            let row = grid.index(i, j, 0);
            for k in 0..nz {
                vals[row + k] = px[i] * py[j] * pz[k];
            }
        }
    }
    let f = SpectralField::from_values(grid, &vals, 0.0)?.dealiased();
    let m = f.integral();
    Ok(if m > 0.0 { f.scaled(mass / m) } else { f })
}

/// Seeded random field with flat spectrum on `0 < |k| <= band`, optionally
/// multiplied by a Gaussian y-envelope of width `envelope`, normalized to
/// root-mean-square `amplitude` over the box.
pub fn random_band_scalar(grid: &Arc<Grid>, seed: u64, band: f64, amplitude: f64, envelope: Option<f64>) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_band(grid, &mut rng, band, envelope)?;
    Ok(normalize_rms(f, amplitude))
}

/// Seeded divergence-free random velocity: the curl of a random band vector
/// potential, normalized to unit `H^2` norm. It carries zero-mode content in
/// `u1, u3` and none in `u2`.
pub fn random_band_velocity(grid: &Arc<Grid>, seed: u64, band: f64, envelope: Option<f64>) -> Result<VectorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = VectorField::new([
        random_band(grid, &mut rng, band, envelope)?,
        random_band(grid, &mut rng, band, envelope)?,
        random_band(grid, &mut rng, band, envelope)?,
    ]);
    let u = a.curl().leray();
    let h2 = u.sobolev(2);
    Ok(if h2 > 0.0 { u.scaled(1.0 / h2) } else { u })
}

/// Seeded field with random horizontal content on `0 < k1^2 + k3^2 <= band^2`,
/// constant in y before the optional envelope. With a wide envelope the
/// y-spectrum stays close to `eta = 0`, which isolates the shear-driven decay.
pub fn random_horizontal(grid: &Arc<Grid>, seed: u64, band: f64, amplitude: f64, envelope: Option<f64>) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = vec![C64::new(0.0, 0.0); grid.len()];
    for (idx, w) in grid.modes() {
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        let kh2 = (w.k1 * w.k1 + w.k3 * w.k3) as f64;
        if w.m == 0 && kh2 > 0.0 && kh2 <= band * band && grid.is_resolved(w) {
            raw[idx] = C64::new(re, im);
        }
    }
    let f = SpectralField::from_coeffs(grid, hermitian(grid, &raw), 0.0)?;
    Ok(normalize_rms(with_envelope(f, envelope)?, amplitude))
}

fn normalize_rms(f: SpectralField, amplitude: f64) -> SpectralField {
    let rms = f.l2() / math::sqrt(f.grid().volume());
    if rms > 0.0 {
        f.scaled(amplitude / rms)
    } else {
        f
    }
}

pub(crate) fn random_band(grid: &Arc<Grid>, rng: &mut ChaCha8Rng, band: f64, envelope: Option<f64>) -> Result<SpectralField> {
    let mut raw = vec![C64::new(0.0, 0.0); grid.len()];
    for (idx, w) in grid.modes() {
        // Draw for every slot so the stream does not depend on the band.
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        let k2 = grid.lab_k2(w, 0.0);
        if k2 > 0.0 && k2 <= band * band && grid.is_resolved(w) {
            raw[idx] = C64::new(re, im);
        }
    }
    let f = SpectralField::from_coeffs(grid, hermitian(grid, &raw), 0.0)?;
    with_envelope(f, envelope)
}

fn hermitian(grid: &Grid, raw: &[C64]) -> Vec<C64> {
    let mut sym = vec![C64::new(0.0, 0.0); grid.len()];
    for (idx, w) in grid.modes() {
        let neg = grid.index_of(WaveIndex { k1: -w.k1, m: -w.m, k3: -w.k3 });
        sym[idx] = neg.map_or(C64::new(0.0, 0.0), |n| (raw[idx] + raw[n].conj()) * 0.5);
    }
    sym
}

fn with_envelope(f: SpectralField, envelope: Option<f64>) -> Result<SpectralField> {
    let sigma = match envelope {
        None => return Ok(f),
        Some(sigma) => sigma,
    };
    let grid = f.grid().clone();
    let ys = grid.coordinates(Axis::Y);
    let env: Vec<f64> = ys.iter().map(|y| math::exp(-y * y / (2.0 * sigma * sigma))).collect();
    let mut vals = f.to_values();
    let [nx, ny, nz] = grid.dims();
    for i in 0..nx {
        for j in 0..ny {
            let row = grid.index(i, j, 0);
            vals[row..row + nz].iter_mut().for_each(|v| *v *= env[j]);
        }
    }
    Ok(SpectralField::from_values(&grid, &vals, 0.0)?.dealiased())
}
