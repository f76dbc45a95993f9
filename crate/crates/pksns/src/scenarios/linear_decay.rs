//! Free decay under the frozen linear operator, per mode class.

use std::collections::BTreeMap;
use std::sync::Arc;

use pksns_core::diagnostics::{decay_rate_fit, linear_fit};
use pksns_core::dynamics::closed_form_linear_solution;
use pksns_core::{FlowState, Grid, Params, SpectralField, Stepper, VectorField};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{LinearDecayConfig, RunConfig};
use crate::csvio::{fmt_f64, write_table};
use crate::error::{Error, Result};
use crate::fft;

use super::{density, tag, write_json};

pub const RATE_COLUMNS: [&str; 8] = ["A", "lambda_qnz", "lambda_pred_qnz", "lambda_qz", "lambda_pred_qz", "oracle_rel_err", "t_horizon", "remap_loss"];
pub const SERIES_COLUMNS: [&str; 3] = ["t", "n_neq_l2_qnz", "n_neq_l2_qz"];

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    #[serde(rename = "A")]
    pub amplitude: f64,
    /// Fitted rate of `||n_{q!=0}||_2` over the window.
    pub lambda_qnz: f64,
    /// Same fit applied to the closed-form amplitude of the slowest q != 0 mode.
    pub lambda_pred_qnz: f64,
    /// Fitted rate of the `q = 0`, `(k1, k3) != 0` class over `[0, t_horizon]`.
    pub lambda_qz: f64,
    /// Heat rate `(k1^2 + k3^2) / A` of the slowest mode of that class.
    pub lambda_pred_qz: f64,
    /// Relative l2 distance of the stepped field from the closed form at `t_horizon`.
    pub oracle_rel_err: f64,
    pub t_horizon: f64,
    pub remap_loss: f64,
}

impl DecayRow {
    fn cells(&self) -> Vec<String> {
        [self.amplitude, self.lambda_qnz, self.lambda_pred_qnz, self.lambda_qz, self.lambda_pred_qz, self.oracle_rel_err, self.t_horizon, self.remap_loss]
            .iter()
            .map(|v| fmt_f64(*v))
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `ln lambda_qnz` against `ln A`; NaN with fewer than two amplitudes.
    pub slope: f64,
    pub intercept: f64,
    pub slope_pred: f64,
    /// Slowest horizontal modes present in the initial condition, as `(q, k1^2 + k3^2)`.
    pub dominant_qnz: (i64, i64),
    pub dominant_qz: Option<i64>,
}

/// Horizontal classes `(q, kh2)` carrying more than `1e-8` of the energy.
fn horizontal_classes(n: &SpectralField) -> Vec<(i64, i64)> {
    let mut energy: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for (idx, w) in n.grid().modes() {
        let c = n.coeffs()[idx];
        *energy.entry((w.q(), w.k1 * w.k1 + w.k3 * w.k3)).or_default() += c.norm_sqr();
    }
    let total: f64 = energy.iter().filter(|((_, kh2), _)| *kh2 > 0).map(|(_, e)| e).sum();
    energy.into_iter().filter(|((_, kh2), e)| *kh2 > 0 && *e > 1e-8 * total).map(|(k, _)| k).collect()
}

/// The q != 0 class decaying slowest by `t1`, ignoring vertical structure.
fn slowest_qnz(classes: &[(i64, i64)], t1: f64) -> Option<(i64, i64)> {
    let exponent = |&(q, kh2): &(i64, i64)| kh2 as f64 * t1 + (q * q) as f64 * t1.powi(3) / 3.0;
    classes.iter().filter(|(q, _)| *q != 0).copied().min_by(|a, b| exponent(a).total_cmp(&exponent(b)))
}

/// Sample times and class norms of one member.
pub struct DecayMember {
    pub row: DecayRow,
    pub series: Vec<(f64, f64, f64)>,
}

pub fn decay_member(grid: &Arc<Grid>, n0: &SpectralField, base: &Params, ld: &LinearDecayConfig, a: f64) -> Result<DecayMember> {
    let c = a.cbrt();
    let (w0, w1) = (ld.window[0] * c, ld.window[1] * c);
    let t_end = ld.horizon * c;
    let params = Params { amplitude: a, dt: (w1 - w0) / ld.samples_per_window as f64, t_end, forcing: None, ..base.clone() };
    params.validate()?;
    let classes = horizontal_classes(n0);
    let (q, kh2) = slowest_qnz(&classes, w1).ok_or_else(|| Error::Validation { field: "ic.n".into(), reason: "initial density has no q != 0 content".into() })?;
    let kh2_qz = classes.iter().filter(|(q, _)| *q == 0).map(|(_, k)| *k).min();

    let mut st = FlowState::new(0.0, n0.clone(), VectorField::zeros(grid, 0.0))?;
    let mut stepper = Stepper::new(params.clone())?;
    let mut series = vec![(0.0, n0.nonzero_l2_by_q().0, n0.nonzero_l2_by_q().1)];
    let mut lost = 0.0;
    while st.t < t_end * (1.0 - 1e-12) {
        let (next, rep) = stepper.step(&st, t_end)?;
        st = next;
        lost += rep.remap_loss;
        let (qnz, qz) = st.n.nonzero_l2_by_q();
        series.push((st.t, qnz, qz));
    }
    let qnz: Vec<(f64, f64)> = series.iter().map(|&(t, v, _)| (t, v)).collect();
    let lambda_qnz = decay_rate_fit(&qnz, (w0, w1))?;
    let (q, kh2) = (q as f64, kh2 as f64);
    let pred: Vec<(f64, f64)> = qnz.iter().map(|&(t, _)| (t, (-(kh2 * t + q * q * t.powi(3) / 3.0) / a).exp())).collect();
    let lambda_pred_qnz = decay_rate_fit(&pred, (w0, w1))?;
    let (lambda_qz, lambda_pred_qz) = match kh2_qz {
        Some(k) => {
            let qz: Vec<(f64, f64)> = series.iter().map(|&(t, _, v)| (t, v)).collect();
            (decay_rate_fit(&qz, (0.0, t_end))?, k as f64 / a)
        }
        None => (f64::NAN, f64::NAN),
    };
    let oracle = closed_form_linear_solution(n0, a, st.t).relabel_to(st.frame_shear())?.field;
    let mut diff = st.n.clone();
    diff.axpy(-1.0, &oracle)?;
    let oracle_rel_err = diff.l2() / oracle.l2();
    Ok(DecayMember {
        row: DecayRow { amplitude: a, lambda_qnz, lambda_pred_qnz, lambda_qz, lambda_pred_qz, oracle_rel_err, t_horizon: st.t, remap_loss: lost },
        series,
    })
}

/// Writes `rates.csv`, one `decay_A<A>.csv` series per amplitude and `linear_decay.json`.
pub fn linear_decay(cfg: &RunConfig) -> Result<DecayReport> {
    let grid = fft::grid(cfg.grid_spec())?;
    let n0 = density(&grid, &cfg.density_ic())?;
    let base = cfg.core_params(cfg.params.amplitude);
    let mut amps = cfg.a_list.clone();
    amps.sort_by(f64::total_cmp);
    let members: Vec<DecayMember> = amps.par_iter().map(|&a| decay_member(&grid, &n0, &base, &cfg.linear_decay, a)).collect::<Result<_>>()?;
    let out = &cfg.output_dir;
    for m in &members {
        let rows: Vec<Vec<String>> = m.series.iter().map(|&(t, a, b)| vec![fmt_f64(t), fmt_f64(a), fmt_f64(b)]).collect();
        write_table(&out.join(format!("decay_A{}.csv", tag(m.row.amplitude))), &SERIES_COLUMNS, &rows)?;
    }
    let rows: Vec<DecayRow> = members.into_iter().map(|m| m.row).collect();
    write_table(&out.join("rates.csv"), &RATE_COLUMNS, &rows.iter().map(DecayRow::cells).collect::<Vec<_>>())?;
    let fit = |f: fn(&DecayRow) -> f64| -> (f64, f64) {
        if rows.len() < 2 {
            return (f64::NAN, f64::NAN);
        }
        linear_fit(&rows.iter().map(|r| (r.amplitude.ln(), f(r).ln())).collect::<Vec<_>>())
    };
    let (slope, intercept) = fit(|r| r.lambda_qnz);
    let (slope_pred, _) = fit(|r| r.lambda_pred_qnz);
    let classes = horizontal_classes(&n0);
    let report = DecayReport {
        slope,
        intercept,
        slope_pred,
        dominant_qnz: slowest_qnz(&classes, cfg.linear_decay.window[1]).unwrap_or((0, 0)),
        dominant_qz: classes.iter().filter(|(q, _)| *q == 0).map(|(_, k)| *k).min(),
        rows,
    };
    write_json(&out.join("linear_decay.json"), &report)?;
    Ok(report)
}
