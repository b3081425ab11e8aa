use std::f64::consts::TAU;
use std::path::PathBuf;

use msgate::config::{Catalog, Observable, Variant};
use msgate::plot::render_svg;
use msgate::sweep::{run_single, run_sweep, SweepOptions, SweepResult, SweepRow};
use proptest::prelude::*;
use toml::Value;

fn small_spec() -> msgate::config::SweepSpec {
    let mut c = Catalog::builtin();
    c.load_str(
        "t.toml",
        r#"
[sweep.small]
base = "fast-gate-n1"
axis = "zeeman_shift"
values = ["-200 Hz", "0 Hz", "300 Hz"]
seed = 11

[[sweep.small.variant]]
name = "plain"

[[sweep.small.variant]]
name = "detuned"
detuning_error = "50 Hz"
closed = false
"#,
        None,
    )
    .unwrap();
    c.sweep("small").unwrap()
}

#[test]
fn ideal_point_has_no_error() {
    let mut spec = small_spec();
    spec.values = vec![0.0];
    spec.variants.truncate(1);
    let r = run_sweep(&spec, &SweepOptions::default()).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.rows[0].value < 1e-8, "{}", r.rows[0].value);
    assert!(r.rows[0].error.is_none());
}

#[test]
fn csv_independent_of_worker_count() {
    let spec = small_spec();
    let one = run_sweep(&spec, &SweepOptions { jobs: 1, checkpoint: None }).unwrap();
    let four = run_sweep(&spec, &SweepOptions { jobs: 4, checkpoint: None }).unwrap();
    assert_eq!(one.to_csv_string(), four.to_csv_string());
    assert_eq!(one.rows.len(), 6);
    // ordered by axis value, then by declared variant
    let order: Vec<(f64, &str)> = one.rows.iter().map(|r| (r.axis_value, r.variant.as_str())).collect();
    assert_eq!(order[0].1, "plain");
    assert_eq!(order[1].1, "detuned");
    assert!(order.windows(2).all(|w| w[0].0 <= w[1].0));
}

#[test]
fn tomographic_observable_is_seeded() {
    let mut spec = small_spec();
    spec.observable = Observable::BellErrorTomographic;
    spec.values.truncate(2);
    let a = run_sweep(&spec, &SweepOptions { jobs: 2, checkpoint: None }).unwrap();
    let b = run_sweep(&spec, &SweepOptions { jobs: 3, checkpoint: None }).unwrap();
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    spec.seed += 1;
    let c = run_sweep(&spec, &SweepOptions { jobs: 2, checkpoint: None }).unwrap();
    assert_ne!(a.to_csv_string(), c.to_csv_string());
}

#[test]
fn resume_reuses_checkpointed_rows() {
    let spec = small_spec();
    let dir = tempfile::tempdir().unwrap();
    let ckpt: PathBuf = dir.path().join("small.csv.partial");
    let full = run_sweep(&spec, &SweepOptions { jobs: 2, checkpoint: Some(ckpt.clone()) }).unwrap();
    let written = SweepResult::read_csv(std::fs::File::open(&ckpt).unwrap()).unwrap();
    assert_eq!(written.rows.len(), full.rows.len());

    // an interrupted run: two rows done (one doctored to prove reuse) and a torn last line
    let mut partial = full.clone();
    partial.rows.truncate(2);
    partial.rows[0].value = 0.125;
    let mut text = partial.to_csv_string();
    text.push_str("3.0e2,pla");
    std::fs::write(&ckpt, text).unwrap();

    let resumed = run_sweep(&spec, &SweepOptions { jobs: 3, checkpoint: Some(ckpt) }).unwrap();
    assert_eq!(resumed.rows.len(), full.rows.len());
    assert_eq!(resumed.rows[0].value, 0.125);
    assert_eq!(resumed.rows[1..], full.rows[1..]);
}

#[test]
fn failing_point_recorded_in_row() {
    let mut spec = small_spec();
    spec.variants.push(Variant { name: "long-ramp".into(), overrides: vec![("ramp_time".into(), Value::String("1 ms".into()))] });
    let r = run_sweep(&spec, &SweepOptions::default()).unwrap();
    let bad: Vec<&SweepRow> = r.rows.iter().filter(|r| r.variant == "long-ramp").collect();
    assert_eq!(bad.len(), 3);
    assert!(bad.iter().all(|r| r.value.is_nan() && r.error.as_deref().is_some_and(|e| e.contains("ramp_time"))));
    assert!(r.rows.iter().filter(|r| r.variant == "plain").all(|r| r.value.is_finite()));
    let back = SweepResult::read_csv(r.to_csv_string().as_bytes()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn fast_preset_duration_and_error() {
    let cfg = Catalog::builtin().gate("fast-gate-n1").unwrap();
    let rep = run_single(&cfg, 1).unwrap();
    assert!((rep.total_duration / 154e-6 - 1.0).abs() < 0.02, "{}", rep.total_duration);
    assert!((rep.gate_time / 154e-6 - 1.0).abs() < 0.02);
    assert!(rep.bell_error_exact < 1e-6, "{}", rep.bell_error_exact);
    assert!(!rep.leakage_flag);
    assert_eq!(rep.net_dd_rotation, None);
    assert!(rep.tomography.bell_error.abs() < 5.0 * rep.tomography.uncertainty + 1e-3);
}

#[test]
fn decoupling_helps_at_the_calibrated_shift_scale() {
    let mut cfg = Catalog::builtin().gate("slow-gate-dd").unwrap();
    cfg.set_real("zeeman_shift", TAU * 26e3);
    let on = run_single(&cfg, 1).unwrap();
    cfg.set_assignment("dd_mode=off").unwrap();
    let off = run_single(&cfg, 1).unwrap();
    assert!(on.bell_error_exact.is_finite() && on.bell_error_exact > 0.0);
    assert!(on.bell_error_exact < off.bell_error_exact, "{} vs {}", on.bell_error_exact, off.bell_error_exact);
    assert!(on.net_dd_rotation.unwrap().abs() < 1e-6);
}

#[test]
fn detuning_offset_error_is_symmetric() {
    let mut spec = Catalog::builtin().sweep("detuning-offset").unwrap();
    spec.values = vec![TAU * -200.0, TAU * 200.0];
    let r = run_sweep(&spec, &SweepOptions::default()).unwrap();
    let (m, p) = (r.rows[0].value, r.rows[1].value);
    assert!(m > 1e-4 && p > 1e-4);
    assert!((m - p).abs() / (0.5 * (m + p)) < 0.10, "{m} vs {p}");
}

#[test]
fn leakage_raises_the_cutoff() {
    let mut cfg = Catalog::builtin().gate("fast-gate-n1").unwrap();
    cfg.params.fock_cutoff = 3;
    let rep = run_single(&cfg, 0).unwrap();
    assert!(rep.n_max > 3);
    assert!(!rep.leakage_flag);
    assert!(rep.bell_error_exact < 1e-6);
}

fn golden_fixture() -> SweepResult {
    let rows = [(-2.0, "dd-off", 0.3), (-1.0, "dd-off", 0.08), (0.0, "dd-off", 1e-9), (1.0, "dd-off", 0.08), (2.0, "dd-off", 0.31)]
        .into_iter()
        .chain([(-2.0, "walsh-7", 2e-4), (-1.0, "walsh-7", 5e-5), (0.0, "walsh-7", 0.0), (1.0, "walsh-7", 5e-5)])
        .chain([(0.5, "single", 1e-2)])
        .map(|(x, v, y)| SweepRow {
            axis_value: TAU * 1e3 * x,
            variant: v.into(),
            value: y,
            n_max: 12,
            tol: 1e-10,
            leakage_flag: false,
            error: None,
        })
        .collect();
    SweepResult { axis: "zeeman_shift".into(), observable: Observable::BellErrorExact, rows }
}

#[test]
fn plot_matches_golden_file() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/sweep_plot.svg");
    let svg = render_svg(&golden_fixture()).unwrap();
    if std::env::var_os("MSGATE_BLESS").is_some() {
        std::fs::write(&path, &svg).unwrap();
    }
    let want = std::fs::read_to_string(&path).expect("golden file present");
    assert_eq!(svg, want);
}

fn arb_row() -> impl Strategy<Value = SweepRow> {
    (
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        "[a-z0-9,\" -]{1,12}",
        prop_oneof![any::<f64>(), Just(f64::NAN)],
        1usize..200,
        1e-14f64..1e-3,
        any::<bool>(),
        proptest::option::of("[a-z :=,]{1,20}"),
    )
        .prop_map(|(axis_value, variant, value, n_max, tol, leakage_flag, error)| SweepRow {
            axis_value,
            variant,
            value,
            n_max,
            tol,
            leakage_flag,
            error,
        })
}

proptest! {
    #[test]
    fn csv_round_trips(rows in proptest::collection::vec(arb_row(), 0..20)) {
        let r = SweepResult { axis: "dd_drift.a2".into(), observable: Observable::BellErrorTomographic, rows };
        let back = SweepResult::read_csv(r.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back, r);
    }
}
