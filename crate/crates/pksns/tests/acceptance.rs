//! Acceptance criteria AC-1 to AC-9, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Arguments that do not start with
//! `-` select criteria by id, e.g. `cargo test --test acceptance -- AC-2 AC-3`.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use pksns::csvio::read_csv;
use pksns::scenarios::{self, MemberOutcome, Report};
use pksns::{fft, RunConfig, Scenario};
use pksns_core::diagnostics::flags;
use pksns_core::dynamics::{closed_form_linear_solution, residual_delta_u2_equation, residual_omega2_equation, step_imex};
use pksns_core::ic::{gaussian_blob, random_band_scalar, random_band_velocity};
use pksns_core::{FlowState, GridSpec, Params, Physics, Stepper, VectorField, Verdict};

type Check = anyhow::Result<(bool, String)>;

/// Runs shared between criteria.
#[derive(Default)]
struct Shared {
    decay: Option<scenarios::DecayReport>,
    suppression: Option<Vec<MemberOutcome>>,
    critical: Option<scenarios::CriticalReport>,
}

fn config(scenario: Scenario, text: &str, out: &Path) -> anyhow::Result<RunConfig> {
    let mut c = RunConfig::parse_for(text, scenario)?;
    c.output_dir = out.to_owned();
    Ok(c)
}

fn ac1(_: &mut Shared, _: &Path) -> Check {
    let g = fft::grid(GridSpec::new(64, 128, 64, 8.0 * PI))?;
    let n0 = random_band_scalar(&g, 5, 3.0, 1.0, Some(2.0))?;
    let mut parts = Vec::new();
    let mut ok = true;
    for a in [10.0, 100.0, 1000.0f64] {
        let t0 = Instant::now();
        let t_end = 5.0 * a.cbrt();
        let p = Params { amplitude: a, dt: t_end / 100.0, t_end, physics: Physics::FROZEN_LINEAR, ..Params::default() };
        let mut st = FlowState::new(0.0, n0.clone(), VectorField::zeros(&g, 0.0))?;
        let mut stepper = Stepper::new(p)?;
        while st.t < t_end * (1.0 - 1e-12) {
            st = stepper.step(&st, t_end)?.0;
        }
        let oracle = closed_form_linear_solution(&n0, a, st.t).relabel_to(st.frame_shear())?.field;
        let mut d = st.n.clone();
        d.axpy(-1.0, &oracle)?;
        let err = d.l2() / oracle.l2();
        let secs = t0.elapsed().as_secs_f64();
        ok &= err <= 1e-8 && secs <= 60.0;
        parts.push(format!("A={a}: rel err {err:.2e} in {secs:.1}s"));
    }
    Ok((ok, format!("{} (tol 1e-8, 60 s each)", parts.join("; "))))
}

fn decay<'a>(sh: &'a mut Shared, out: &Path) -> anyhow::Result<&'a scenarios::DecayReport> {
    if sh.decay.is_none() {
        let cfg = config(Scenario::LinearDecay, "A_list = [100.0, 1000.0, 10000.0]\n", &out.join("linear_decay"))?;
        let Report::LinearDecay(r) = scenarios::run(&cfg, None)? else { unreachable!() };
        sh.decay = Some(r);
    }
    Ok(sh.decay.as_ref().expect("set above"))
}

fn ac2(sh: &mut Shared, out: &Path) -> Check {
    let t0 = Instant::now();
    let r = decay(sh, out)?;
    let secs = t0.elapsed().as_secs_f64();
    let oracle = r.rows.iter().map(|x| x.oracle_rel_err).fold(0.0, f64::max);
    let ok = (-0.38..=-0.28).contains(&r.slope) && oracle <= 1e-8 && secs <= 300.0;
    let rates: Vec<String> = r.rows.iter().map(|x| format!("{:.3e}", x.lambda_qnz)).collect();
    Ok((ok, format!("slope {:.4} in [-0.38, -0.28]; lambda_qnz [{}]; oracle err {oracle:.1e}; {secs:.1}s (5 min)", r.slope, rates.join(", "))))
}

fn ac3(sh: &mut Shared, out: &Path) -> Check {
    let t0 = Instant::now();
    let r = decay(sh, out)?;
    let secs = t0.elapsed().as_secs_f64();
    let devs: Vec<f64> = r.rows.iter().map(|x| x.lambda_qz / x.lambda_pred_qz - 1.0).collect();
    let worst = devs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let ok = worst <= 0.05 && r.dominant_qz == Some(2) && secs <= 60.0;
    let devs: Vec<String> = devs.iter().map(|d| format!("{:+.2}%", 100.0 * d)).collect();
    Ok((ok, format!("q=0 class rate vs (k1^2+k3^2)/A = 2/A: [{}] (5%)", devs.join(", "))))
}

fn ac4(_: &mut Shared, out: &Path) -> Check {
    let t0 = Instant::now();
    let cfg = config(Scenario::CheckLemmas, "[lemmas]\nseed = 7\ntrials = 100\n", &out.join("lemmas"))?;
    let Report::Lemmas(r) = scenarios::run(&cfg, None)? else { unreachable!() };
    let secs = t0.elapsed().as_secs_f64();
    let want = [
        ("elliptic symbol identity", 1e-12),
        ("P0 / P_neq Parseval", 1e-12),
        ("Leray idempotence", 1e-12),
        ("pressure decomposition", 1e-10),
    ];
    let mut ok = r.passed && r.trials == 100 && secs <= 30.0;
    let mut parts = Vec::new();
    for (name, tol) in want {
        match r.identities.iter().find(|c| c.name == name) {
            Some(c) => {
                ok &= c.max_error <= tol;
                parts.push(format!("{name} {:.1e}", c.max_error));
            }
            None => {
                ok = false;
                parts.push(format!("{name} missing"));
            }
        }
    }
    let poincare = r.constants.iter().find(|c| c.name.starts_with("Poincare"));
    ok &= poincare.is_some_and(|c| c.passed);
    let failed = r.identities.iter().filter(|c| !c.passed).count() + r.constants.iter().filter(|c| !c.passed).count();
    Ok((ok, format!("{}; Poincare max C {:.4}; {failed} failed checks; {secs:.1}s (30 s)", parts.join(", "), poincare.map_or(f64::NAN, |c| c.max_ratio))))
}

fn ac5(sh: &mut Shared, out: &Path) -> Check {
    let t0 = Instant::now();
    let cfg = config(Scenario::TwodCritical, "[params]\nt_end = 50.0\n", &out.join("critical"))?;
    let Report::Critical(r) = scenarios::run(&cfg, None)? else { unreachable!() };
    let secs = t0.elapsed().as_secs_f64();
    let verdict = |m: f64| r.members.iter().find(|x| (x.mass - m).abs() < 1e-9).map(|x| (x.verdict, x.t_final));
    let sup = verdict(1.5 * 8.0 * PI);
    let sub = verdict(0.5 * 8.0 * PI);
    let ok = sup.is_some_and(|v| v.0 == Verdict::Blowup) && sub.is_some_and(|v| v.0 == Verdict::Global && v.1 >= 50.0 * (1.0 - 1e-12)) && secs <= 600.0;
    let show = |v: Option<(Verdict, f64)>| v.map_or("missing".into(), |(v, t)| format!("{v} at t={t:.3}"));
    sh.critical = Some(r);
    Ok((ok, format!("mass 12pi {}; mass 4pi {}; {secs:.0}s (10 min)", show(sup), show(sub))))
}

const SUPPRESSION: &str = "A_list = [1.0, 1000.0]\n[params]\nt_end = 10.0\n[ic.n]\nkind = \"gaussian-blob\"\nwidth = 1.0\nmass = 200.0\n";

fn suppression<'a>(sh: &'a mut Shared, out: &Path) -> anyhow::Result<(&'a [MemberOutcome], f64)> {
    let t0 = Instant::now();
    if sh.suppression.is_none() {
        let cfg = config(Scenario::SweepA, SUPPRESSION, &out.join("suppression"))?;
        let Report::Sweep(r) = scenarios::run(&cfg, None)? else { unreachable!() };
        sh.suppression = Some(r.members);
    }
    Ok((sh.suppression.as_deref().expect("set above"), t0.elapsed().as_secs_f64()))
}

fn member(ms: &[MemberOutcome], a: f64) -> anyhow::Result<&MemberOutcome> {
    ms.iter().find(|m| m.amplitude == a).ok_or_else(|| anyhow::anyhow!("no member at A = {a}"))
}

fn ac6(sh: &mut Shared, out: &Path) -> Check {
    let (ms, secs) = suppression(sh, out)?;
    let weak = member(ms, 1.0)?;
    let strong = member(ms, 1000.0)?;
    let ok = weak.verdict == Verdict::Blowup && strong.verdict == Verdict::Global && strong.max_linf_ratio <= 2.0 && secs <= 1800.0;
    Ok((
        ok,
        format!(
            "A=1 {} at t={:.3}; A=1000 {} at t={:.2}, max |n|_inf / E1 = {:.3} (<= 2); {secs:.0}s (30 min)",
            weak.verdict, weak.t_final, strong.verdict, strong.t_final, strong.max_linf_ratio
        ),
    ))
}

fn ac7(sh: &mut Shared, out: &Path) -> Check {
    let (ms, _) = suppression(sh, out)?;
    let m = member(ms, 1000.0)?;
    let hyp = m.flags_seen & (flags::HYPOTHESIS_E | flags::HYPOTHESIS_LINF);
    let n0 = m.max_n0_ratio.unwrap_or(f64::NAN);
    let u0 = m.max_u0_ratio.unwrap_or(f64::NAN);
    let ok = m.verdict == Verdict::Global && hyp == 0 && n0 < 10.0 && u0 < 10.0;
    Ok((
        ok,
        format!("hypothesis flags {hyp}; max E/E0 {:.3} (<= 2); max n0 ratio {n0:.3} (< 10); max A^2/3 u0_inf ratio {u0:.3} (< 10)", m.max_e_ratio),
    ))
}

fn ac8(sh: &mut Shared, out: &Path) -> Check {
    let (ms, _) = suppression(sh, out)?;
    let mut drift = ms.iter().map(|m| m.max_mass_drift).fold(0.0, f64::max);
    let div = ms.iter().map(|m| m.max_div_rel).fold(0.0, f64::max);
    if let Some(c) = &sh.critical {
        drift = c.members.iter().map(|m| m.max_mass_drift).fold(drift, f64::max);
    }
    // Step residuals of the vorticity-form equations under dt halving.
    let g = fft::grid(GridSpec::new(16, 64, 16, 8.0 * PI))?;
    let n = gaussian_blob(&g, [3.0, 0.0, 3.0], 1.0, 0.5)?;
    let u = random_band_velocity(&g, 1, 3.0, Some(2.0))?.scaled(0.5);
    let st = FlowState::new(0.0, n, u)?;
    let mut ratios = Vec::new();
    for a in [10.0, 1000.0] {
        let p = Params { amplitude: a, ..Params::default() };
        let res = |dt: f64| -> anyhow::Result<(f64, f64)> {
            let (next, _) = step_imex(&st, &p, dt)?;
            Ok((residual_omega2_equation(&st, &next, dt, &p)?, residual_delta_u2_equation(&st, &next, dt, &p)?))
        };
        let r = [res(0.05)?, res(0.025)?, res(0.0125)?];
        for w in r.windows(2) {
            ratios.push(w[0].0 / w[1].0);
            ratios.push(w[0].1 / w[1].1);
        }
    }
    let ok = drift <= 1e-6 && div <= 1e-12 && ratios.iter().all(|r| (3.5..=4.5).contains(r));
    let rs: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    Ok((ok, format!("mass drift {drift:.1e} (1e-6); div/grad {div:.1e} (1e-12); residual ratios [{}] in [3.5, 4.5]", rs.join(", "))))
}

const RESTART: &str = "checkpoint_every = 10\nsample_every = 1\n[params]\nA = 100.0\nt_end = 1.5\n[grid]\nnx = 16\nny = 32\nnz = 16\nly = 25.132741228718345\n[ic.n]\nkind = \"gaussian-blob\"\nmass = 20.0\n";

fn ac9(_: &mut Shared, out: &Path) -> Check {
    let a = out.join("restart_a");
    let b = out.join("restart_b");
    let cfg_a = config(Scenario::FullRun, RESTART, &a)?;
    let cfg_b = config(Scenario::FullRun, RESTART, &b)?;
    scenarios::run(&cfg_a, None)?;
    scenarios::run(&cfg_b, None)?;
    let first = std::fs::read(a.join("diag.csv"))?;
    let identical = first == std::fs::read(b.join("diag.csv"))?;
    let reference = read_csv(&a.join("diag.csv"))?;
    scenarios::run(&cfg_b, Some(&b.join("checkpoint_00000010.bin")))?;
    let resumed = read_csv(&b.join("diag.csv"))?;
    let mut worst = 0.0f64;
    let same_rows = reference.len() == resumed.len();
    for (x, y) in reference.iter().zip(&resumed) {
        for (u, v) in x.floats().iter().zip(y.floats()) {
            let scale = u.abs().max(v.abs());
            if scale > 0.0 {
                worst = worst.max((u - v).abs() / scale);
            }
        }
        worst = if x.flags == y.flags { worst } else { f64::INFINITY };
    }
    let ok = identical && same_rows && worst <= 1e-10 && reference.len() > 20;
    Ok((ok, format!("{} rows; rerun CSV identical: {identical}; resumed from step 10, max rel diff {worst:.1e} (1e-10)", reference.len())))
}

fn main() -> ExitCode {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(&str, &str, fn(&mut Shared, &Path) -> Check); 9] = [
        ("AC-1", "linear oracle agreement", ac1),
        ("AC-2", "enhanced-dissipation scaling", ac2),
        ("AC-3", "q=0 heat-rate class", ac3),
        ("AC-4", "exact identity suite", ac4),
        ("AC-5", "2D criticality detector", ac5),
        ("AC-6", "suppression demonstration", ac6),
        ("AC-7", "bootstrap monitors", ac7),
        ("AC-8", "conservation and structure", ac8),
        ("AC-9", "restart and determinism", ac9),
    ];
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut shared = Shared::default();
    let mut failed = 0;
    for (id, title, f) in checks {
        if !wanted.is_empty() && !wanted.iter().any(|w| w.eq_ignore_ascii_case(id)) {
            continue;
        }
        let t0 = Instant::now();
        let (ok, detail) = match f(&mut shared, dir.path()) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e:#}")),
        };
        failed += usize::from(!ok);
        println!("{id} {} {title}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, t0.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
