use std::path::PathBuf;

use pksns::config::{CriticalConfig, DensityIc, GridConfig, LemmaConfig, LinearDecayConfig, MonitorConfig, PhysicsConfig, VelocityIc, VelocityScale};
use pksns::{Error, RunConfig, Scenario};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = Scenario> {
    prop_oneof![Just(Scenario::LinearDecay), Just(Scenario::SweepA), Just(Scenario::FullRun), Just(Scenario::CheckLemmas)]
}

fn density() -> impl Strategy<Value = DensityIc> {
    prop_oneof![
        (prop::option::of(prop::array::uniform3(0.0..6.0f64)), 0.1..3.0f64, 0.0..500.0f64).prop_map(|(center, width, mass)| DensityIc::GaussianBlob { center, width, mass }),
        (0..=i64::MAX as u64, 1.0..5.0f64, 0.0..2.0f64, prop::option::of(0.5..5.0f64), -1.0..1.0f64)
            .prop_map(|(seed, band, amplitude, envelope, mean)| DensityIc::RandomBand { seed, band, amplitude, envelope, mean }),
        (0..=i64::MAX as u64, 1.0..5.0f64, 0.0..2.0f64, prop::option::of(0.5..5.0f64), -1.0..1.0f64)
            .prop_map(|(seed, band, amplitude, envelope, mean)| DensityIc::HorizontalBand { seed, band, amplitude, envelope, mean }),
        Just(DensityIc::Zero),
    ]
}

fn velocity() -> impl Strategy<Value = VelocityIc> {
    prop_oneof![
        (0..=i64::MAX as u64, 1.0..5.0f64, prop::option::of(0.5..5.0f64), 0.0..2.0f64, prop_oneof![Just(VelocityScale::AmplitudeScaled), Just(VelocityScale::None)])
            .prop_map(|(seed, band, envelope, c0, scale)| VelocityIc::RandomBand { seed, band, envelope, c0, scale }),
        Just(VelocityIc::Zero),
    ]
}

fn config() -> impl Strategy<Value = RunConfig> {
    (
        (scenario(), 1u64..50, 0u64..50, prop::collection::vec(1.0..1e5f64, 1..5)),
        (1.0..1e4f64, 0.0..1.0f64, 1e-3..0.2f64, 1e-3..1.0f64, 0.1..100.0f64, prop::option::of(any::<(bool, bool, bool, bool)>())),
        prop::option::of((1usize..5, 1usize..6, 1usize..5, 1.0..40.0f64)),
        (prop::option::of(density()), prop::option::of(velocity())),
        (prop::option::of(0.1..10.0f64), 0.5..10.0f64, 0.0..1.0f64, 0.5..2.0f64, 10u32..80, 1u64..1000, 1usize..200),
    )
        .prop_map(|(top, params, grid, ic, rest)| {
            let mut c = RunConfig { scenario: top.0, sample_every: top.1, checkpoint_every: top.2, a_list: top.3, output_dir: PathBuf::from("runs/x"), ..RunConfig::default() };
            c.params.amplitude = params.0;
            c.params.a_weight = params.1;
            c.params.dt = params.2;
            c.params.cfl = params.3;
            c.params.t_end = params.4;
            c.params.physics = params.5.map(|(shear, fluid, chemotaxis, nonlinear)| PhysicsConfig { shear, fluid, chemotaxis, nonlinear });
            c.grid = grid.map(|(x, y, z, ly)| GridConfig { nx: 1 << x, ny: 1 << y, nz: 1 << z, ly, dealias_fraction: 2.0 / 3.0 });
            c.ic.n = ic.0;
            c.ic.u = ic.1;
            c.monitor = MonitorConfig { e1: rest.0, linf_multiple: rest.1 };
            c.linear_decay = LinearDecayConfig { window: [rest.2, rest.2 + rest.3], horizon: rest.2 + rest.3 + 1.0, samples_per_window: rest.4 };
            c.critical = CriticalConfig { masses: vec![1.0, 2.5] };
            c.lemmas = LemmaConfig { seed: rest.5, trials: rest.6 };
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn serialize_then_parse_is_identity(c in config()) {
        prop_assume!(c.validate().is_ok());
        let text = c.to_toml().unwrap();
        let back = RunConfig::parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}

#[test]
fn documented_example_parses() {
    let doc = include_str!("../src/config.rs");
    let start = doc.find("//! ```toml").unwrap();
    let body: String = doc[start..].lines().skip(1).take_while(|l| !l.starts_with("//! ```")).map(|l| l.trim_start_matches("//!").trim_start().to_string() + "\n").collect();
    let c = RunConfig::parse(&body).unwrap();
    assert_eq!(c.scenario, Scenario::FullRun);
    assert_eq!(c.params.amplitude, 1000.0);
    assert_eq!(c.grid_spec().ny, 128);
}

#[test]
fn parse_for_fills_in_or_checks_the_scenario() {
    let c = RunConfig::parse_for("", Scenario::CheckLemmas).unwrap();
    assert_eq!(c.scenario, Scenario::CheckLemmas);
    let e = RunConfig::parse_for("scenario = \"sweep-A\"\n", Scenario::FullRun).unwrap_err();
    assert!(matches!(e, Error::Validation { ref field, .. } if field == "scenario"));
    let e = RunConfig::parse_for("A_list = []\n", Scenario::SweepA).unwrap_err();
    assert!(matches!(e, Error::Validation { ref field, .. } if field == "A_list"));
}

#[test]
fn oversized_seed_cannot_be_written() {
    let mut c = RunConfig::default();
    c.lemmas.seed = u64::MAX;
    assert!(matches!(c.to_toml(), Err(Error::Validation { .. })));
}

#[test]
fn unknown_scenario_is_a_parse_error() {
    let e = RunConfig::parse("output_dir = \"x\"\nscenario = \"full\"\n").unwrap_err();
    assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
}
