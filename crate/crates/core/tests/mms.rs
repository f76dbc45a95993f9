//! Manufactured-solution convergence of the full stepper in `dt`.
//!
//! The exact solution is a smooth y-localized state whose sources are assembled
//! from primitive spectral operators, independently of the stepper's tendency.

use std::f64::consts::PI;
use std::sync::Arc;

use pksns_core::dynamics::{advance_fixed, Forcing};
use pksns_core::elliptic::solve_chemo;
use pksns_core::field::pointwise_product;
use pksns_core::{make_grid, Axis, FlowState, Grid, GridSpec, Params, SpectralField, VectorField, WaveIndex, C64};

const SIGMA: f64 = 1.5;
const A: f64 = 4.0;

fn env(y: f64) -> f64 {
    (-y * y / (2.0 * SIGMA * SIGMA)).exp()
}

fn alpha(t: f64) -> (f64, f64) {
    (0.6 + 0.3 * (2.0 * t).sin(), 0.6 * (2.0 * t).cos())
}

fn beta(t: f64) -> (f64, f64) {
    (0.3 * t.cos(), -0.3 * t.sin())
}

fn gamma(t: f64) -> (f64, f64) {
    (0.25 * (1.0 + t.sin()), 0.25 * t.cos())
}

fn sample(grid: &Arc<Grid>, s: f64, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
    let xs = grid.coordinates(Axis::X);
    let ys = grid.coordinates(Axis::Y);
    let zs = grid.coordinates(Axis::Z);
    let mut v = vec![0.0; grid.len()];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            for (k, &z) in zs.iter().enumerate() {
                v[grid.index(i, j, k)] = f(x + s * y, y, z + s * y);
            }
        }
    }
    v
}

fn field(grid: &Arc<Grid>, s: f64, f: impl Fn(f64, f64, f64) -> f64) -> SpectralField {
    SpectralField::from_values(grid, &sample(grid, s, f), s).unwrap()
}

/// `n = 1 + alpha G cos(x + 2z)`; `u = curl(0, -psi, phi)` with
/// `psi = beta G sin(x + z)`, `phi = gamma G sin(x - 2z)`. Index 1 selects the time derivative.
fn exact(grid: &Arc<Grid>, s: f64, t: f64, deriv: bool) -> (SpectralField, VectorField) {
    let pick = |p: (f64, f64)| if deriv { p.1 } else { p.0 };
    let (al, be, ga) = (pick(alpha(t)), pick(beta(t)), pick(gamma(t)));
    let mean = if deriv { 0.0 } else { 1.0 };
    let n = field(grid, s, |x, y, z| mean + al * env(y) * (x + 2.0 * z).cos());
    let psi = field(grid, s, |x, y, z| be * env(y) * (x + z).sin());
    let phi = field(grid, s, |x, y, z| ga * env(y) * (x - 2.0 * z).sin());
    let u = VectorField::new([SpectralField::zeros(grid, s), psi.scaled(-1.0), phi]).curl();
    (n, u)
}

/// `y (d/dx + d/dz) f` in physical space.
fn transport(f: &SpectralField) -> SpectralField {
    let g = f.grid().clone();
    let mut d = f.derivative(Axis::X);
    d.axpy(1.0, &f.derivative(Axis::Z)).unwrap();
    let mut v = d.to_values();
    let ys = g.coordinates(Axis::Y);
    let [nx, ny, nz] = g.dims();
    for i in 0..nx {
        for (j, y) in ys.iter().enumerate().take(ny) {
            let row = g.index(i, j, 0);
            v[row..row + nz].iter_mut().for_each(|e| *e *= y);
        }
    }
    SpectralField::from_values(&g, &v, f.frame_shear()).unwrap()
}

fn div_flux(n: &SpectralField, v: &VectorField) -> SpectralField {
    let mut out = pointwise_product(n, &v.c[0]).unwrap().derivative(Axis::X);
    out.axpy(1.0, &pointwise_product(n, &v.c[1]).unwrap().derivative(Axis::Y)).unwrap();
    out.axpy(1.0, &pointwise_product(n, &v.c[2]).unwrap().derivative(Axis::Z)).unwrap();
    out
}

struct Manufactured;

impl Forcing for Manufactured {
    fn sources(&self, t: f64, template: &FlowState) -> (SpectralField, VectorField) {
        let g = template.grid().clone();
        let s = template.frame_shear();
        let inv_a = 1.0 / A;
        let (n, u) = exact(&g, s, t, false);
        let (nt, ut) = exact(&g, s, t, true);

        let grad_c = solve_chemo(&n).gradient();
        let mut sn = nt;
        sn.axpy(1.0, &transport(&n)).unwrap();
        sn.axpy(-inv_a, &n.laplacian()).unwrap();
        sn.axpy(inv_a, &div_flux(&n, &u)).unwrap();
        sn.axpy(inv_a, &div_flux(&n, &grad_c)).unwrap();

        let mut su = ut;
        for i in 0..3 {
            su.c[i].axpy(1.0, &transport(&u.c[i])).unwrap();
            su.c[i].axpy(-inv_a, &u.c[i].laplacian()).unwrap();
            su.c[i].axpy(inv_a, &div_flux(&u.c[i], &u)).unwrap();
        }
        let u2 = u.c[1].clone();
        su.c[0].axpy(1.0, &u2).unwrap();
        su.c[2].axpy(1.0, &u2).unwrap();
        su.c[1].axpy(-inv_a, &n).unwrap();
        // The gradient part is absorbed by the pressure; the mean buoyancy is hydrostatic.
        let mut su = su.leray();
        for c in su.c.iter_mut() {
            c.set_coeff(WaveIndex { k1: 0, m: 0, k3: 0 }, C64::new(0.0, 0.0));
        }
        (sn, su)
    }
}

fn run(dt: f64, t_end: f64) -> (f64, f64) {
    let g = make_grid(GridSpec::new(16, 96, 16, 8.0 * PI)).unwrap();
    let (n0, u0) = exact(&g, 0.0, 0.0, false);
    let st = FlowState::new(0.0, n0, u0).unwrap();
    let params = Params { amplitude: A, forcing: Some(Arc::new(Manufactured)), ..Params::default() };
    let (end, lost) = advance_fixed(&st, &params, dt, t_end).unwrap();
    assert!(lost < 1e-12 * end.n.l2_sq());
    assert!((end.t - t_end).abs() < 1e-12);
    let (n, u) = exact(&g, end.frame_shear(), t_end, false);
    let mut en = end.n.clone();
    en.axpy(-1.0, &n).unwrap();
    let mut eu = end.u.clone();
    eu.axpy(-1.0, &u).unwrap();
    (en.l2() / n.l2(), eu.l2() / u.l2())
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let t_end = 1.0;
    let dts = [0.1, 0.05, 0.025, 0.0125];
    let errs: Vec<(f64, f64)> = dts.iter().map(|&dt| run(dt, t_end)).collect();
    for w in errs.windows(2) {
        let on = (w[0].0 / w[1].0).log2();
        let ou = (w[0].1 / w[1].1).log2();
        assert!(on >= 1.9 && ou >= 1.9, "orders n {on:.3} u {ou:.3}; errors {errs:?}");
    }
    assert!(errs[3].0 < 1e-4 && errs[3].1 < 1e-4, "{errs:?}");
}
