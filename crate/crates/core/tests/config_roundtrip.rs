use lamsa::config::{parse_config_str, ScenarioConfig};
use lamsa::optimize::CalibrationResult;
use lamsa::Error;
use proptest::prelude::*;

fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
    (
        (30.0..40.0f64, 10.0..16.0f64, 0.5..1.0f64, 4.0..4.5f64),
        (0.2..2.0f64, 5.0..40.0f64, 120.0..200.0f64, 2000.0..5000.0f64),
        (0.2..1.0f64, -0.5..0.5f64, 1..4usize, 0..=i64::MAX as u64),
    )
        .prop_map(|((d1, h, latch, t), (cn, cc, rpm, area), (cd, w, stride, seed))| {
            let mut c = ScenarioConfig::default();
            c.geometry.d1 = d1;
            c.geometry.h = h;
            c.geometry.crank_radius = h / 2.0;
            c.geometry.latch_fraction = latch;
            c.beam.thickness = t;
            c.fin.normal_coefficient = cn;
            c.connector.damping = cc;
            c.drive.speed_rpm = rpm;
            c.fin.area = area;
            c.body.drag_coefficient = cd;
            c.body.buoyancy_offset = w;
            c.sim.output_stride = stride;
            c.seed.value = seed;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn canonical_text_round_trips(cfg in arb_config()) {
        prop_assume!(cfg.validate().is_ok());
        let text = cfg.to_canonical_string();
        let back = parse_config_str(&text).unwrap();
        prop_assert_eq!(back.config.hash(), cfg.hash());
        prop_assert!(back.defaulted.is_empty());
    }
}

#[test]
fn oversized_seed_is_rejected() {
    let mut c = ScenarioConfig::default();
    c.seed.value = u64::MAX;
    assert!(c.validate().is_err());
}

#[test]
fn empty_file_is_all_defaults() {
    let p = parse_config_str("").unwrap();
    assert_eq!(p.config.hash(), ScenarioConfig::default().hash());
    assert!(p.defaulted.iter().any(|k| k == "geometry.d1_mm"));
}

#[test]
fn errors_carry_line_numbers() {
    let cases = [
        ("[beam]\nlength = 40\n", 2, "unit-suffix"),
        ("[fin]\narea_mm2 = 4000\ncolour = 1\n", 3, "unknown key"),
        ("\n[hull]\nx = 1\n", 2, "unknown section"),
        ("[sim]\n\ndt_s = -1.0\n", 3, "dt_s"),
    ];
    for (text, want_line, want_msg) in cases {
        match parse_config_str(text) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, want_line, "{text:?}: {msg}");
                assert!(msg.contains(want_msg), "{text:?}: {msg}");
            }
            other => panic!("{text:?}: expected config error, got {other:?}"),
        }
    }
}

#[test]
fn shipped_scenarios_match_defaults() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let parsed = lamsa::config::parse_config(&root.join("default.toml")).unwrap();
    assert_eq!(parsed.config, ScenarioConfig::default());

    let start = lamsa::config::parse_config(&root.join("calibration_start.toml")).unwrap();
    let fit = CalibrationResult::load(&root.join("calibration.json")).unwrap();
    assert_eq!(fit.config_hash, start.config.hash());
    let mut applied = start.config.clone();
    fit.apply(&mut applied).unwrap();
    assert_eq!(applied, ScenarioConfig::default());
}
