use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_SWEEP: &str = r#"
[sweep.tiny]
base = "fast-gate-n1"
axis = "zeeman_shift"
values = ["-300 Hz", "0 Hz", "150 Hz", "300 Hz"]
seed = 5

[[sweep.tiny.variant]]
name = "plain"

[[sweep.tiny.variant]]
name = "detuned"
detuning_error = "40 Hz"
closed = false
"#;

fn msgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msgate")).args(args).env_remove("MSGATE_CONFIG_DIR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("{key} missing")).parse().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn invalid_walsh_order_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = msgate(&["--out", p(dir.path()), "--preset", "slow-gate-dd", "simulate", "--set", "walsh_order=5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Walsh order 5"));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn unknown_preset_and_bad_override_exit_2() {
    assert_eq!(msgate(&["--preset", "nope", "simulate"]).status.code(), Some(2));
    assert_eq!(msgate(&["simulate", "--set", "zeeman_shift"]).status.code(), Some(2));
    assert_eq!(msgate(&["simulate", "--set", "no_such_field=1"]).status.code(), Some(2));
    assert_eq!(msgate(&["walsh-check", "--order", "2"]).status.code(), Some(2));
}

#[test]
fn broken_config_file_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[gate.x]\nextends = \"fast-gate-n1\"\nloops = \"many\"\n").unwrap();
    let o = msgate(&["--config", p(&cfg), "--preset", "x", "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml") && err.contains("loops"), "{err}");
}

#[test]
fn simulate_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = msgate(&["--out", p(dir.path()), "--seed", "3", "simulate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("fast-gate-n1.report.txt")).unwrap();
    assert_eq!(report, stdout(&o));
    assert!(field(&report, "bell_error_exact") < 1e-6);
    assert!((field(&report, "total_duration_s") / 154e-6 - 1.0).abs() < 0.02);
    assert!(dir.path().join("fast-gate-n1.bell.txt").exists());
}

#[test]
fn sweep_csv_is_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, SMALL_SWEEP).unwrap();
    let mut csvs = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("j{jobs}"));
        let o = msgate(&["--config", p(&cfg), "--preset", "tiny", "--jobs", jobs, "--out", p(&out), "--plot", "sweep"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.join("tiny.csv.partial").exists());
        assert!(out.join("tiny.svg").exists());
        csvs.push(std::fs::read(out.join("tiny.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.remove(0)).unwrap();
    assert!(text.starts_with("zeeman_shift,variant,bell_error_exact,n_max,tol,leakage_flag,error\n"), "{text}");
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn config_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("extra.toml"), "[gate.env-gate]\nextends = \"fast-gate-n2\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_msgate")).arg("list").env("MSGATE_CONFIG_DIR", dir.path()).output().unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("env-gate"));
    assert!(!stdout(&msgate(&["list"])).contains("env-gate"));
}

#[test]
fn walsh_check_prints_exact_moments() {
    let o = msgate(&["walsh-check", "--order", "7", "--max-moment", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "order 7: m0=0 m1=0 m2=0 m3=-3/256");
}

#[test]
fn mpm_plan_balances_the_budget() {
    let o = msgate(&["mpm-plan"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let injected = field(&s, "injected_energy_j");
    assert!((injected / field(&s, "energy_budget_j") - 1.0).abs() < 1e-9);
    let e = field(&s, "experiment_energy_j") + field(&s, "dummy_power_w") * field(&s, "dummy_duration_s");
    assert!((e / injected - 1.0).abs() < 1e-9);
}

#[test]
fn parity_fit_recovers_a_noise_free_fringe() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("scan.csv");
    let (c, off) = (0.9, 0.3);
    let mut text = String::from("phi_rad,shots,count_odd\n");
    for k in 0..16 {
        let phi = PI * k as f64 / 16.0;
        let q = 0.5 - 0.5 * c * (2.0 * (phi - off)).cos();
        text.push_str(&format!("{phi},100000,{}\n", (q * 1e5).round()));
    }
    std::fs::write(&data, text).unwrap();
    let o = msgate(&["--out", p(dir.path()), "parity-fit", p(&data), "--populations", "0.49", "0.49"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = std::fs::read_to_string(dir.path().join("parity_fit.txt")).unwrap();
    assert!((field(&s, "contrast") - c).abs() < 1e-3);
    assert!((field(&s, "phase_offset_rad") - off).abs() < 1e-3);
    assert!(s.contains("bell_error="), "{s}");

    std::fs::write(&data, "phase,shots\n0,1\n").unwrap();
    assert_eq!(msgate(&["--out", p(dir.path()), "parity-fit", p(&data)]).status.code(), Some(2));
}
