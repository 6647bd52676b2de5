use std::io::Write;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otfs-ra"))
        .args(args)
        .env_remove("OTFS_RA_FORCE_SINGLE_THREAD")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

/// Data rows of a CSV body, header comments and column line stripped.
fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_config(text: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().expect("temp file");
    file.write_all(text.as_bytes()).expect("write config");
    file
}

const SMOKE_SIM: &str = "\
b_c = 1.08e6
t_c = 1.6e-3
g = 15e-6
nu_max = 300
lambda = 1
t_a = 0.01
r_c = 1500
r_a = 100
window = rectangular
n1 = 5
rho_db = -5
p_fa = 0.05
frames = 300
calibration_frames = 1
seed = 42
";

#[test]
fn design_preset_reproduces_the_reference_grid() {
    let out = run(&["design", "--config", "fig1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for line in ["m = 18", "n = 96", "delta_f_hz = 60000", "n1 = 5", "r = 19"] {
        assert!(text.contains(line), "missing `{line}` in:\n{text}");
    }
}

#[test]
fn zero_guard_designs_a_single_delay_bin_with_a_warning() {
    let out = run(&["design", "--config", "fig1", "--set", "g=0"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("m = 1"));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("warning"), "expected a degenerate-range warning, got: {err}");
}

#[test]
fn bound_preset_reproduces_the_reference_floors() {
    let out = run(&["bound", "--config", "table2-bounds"]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    let expected = [
        (96, 1.8537839989379468e-4),
        (48, 3.7069606714413903e-4),
        (19, 9.3602722441746414e-4),
    ];
    assert_eq!(rows.len(), expected.len());
    for (row, (r, bound)) in rows.iter().zip(expected) {
        assert_eq!(row[0].parse::<usize>().unwrap(), r);
        let got: f64 = row[2].parse().unwrap();
        assert!((got - bound).abs() / bound < 1e-5, "R={r}: {got} vs {bound}");
    }
}

#[test]
fn bound_sweep_grows_with_cell_radius() {
    let out = run(&[
        "bound",
        "--config",
        "fig21",
        "--set",
        "radii_m=1000,2000,3000",
        "--set",
        "speeds_kmh=120",
    ]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    let bounds: Vec<f64> = rows.iter().map(|r| r[9].parse().unwrap()).collect();
    assert_eq!(bounds.len(), 3);
    assert!(bounds[0] < bounds[1] && bounds[1] < bounds[2], "{bounds:?}");
}

#[test]
fn unknown_keys_exit_with_the_config_code() {
    let out = run(&["simulate", "--config", "fig9", "--set", "typo_key=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("typo_key"));
}

#[test]
fn infeasible_budget_exits_with_the_infeasible_code() {
    // Three delay bins cannot fit inside two bins of time-bandwidth product.
    let out = run(&[
        "design",
        "--set",
        "b_c=1e3",
        "--set",
        "t_c=2e-3",
        "--set",
        "g=1.001e-3",
        "--set",
        "nu_max=0",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn zero_frame_simulations_are_rejected() {
    let cfg = write_config(SMOKE_SIM);
    let out = run(&["simulate", "--config", cfg.path().to_str().unwrap(), "--frames", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_seeds_give_byte_identical_output() {
    let cfg = write_config(SMOKE_SIM);
    let path = cfg.path().to_str().unwrap();
    let first = run(&["simulate", "--config", path]);
    let second = run(&["simulate", "--config", path]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn worker_count_does_not_change_output_bytes() {
    let cfg = write_config(SMOKE_SIM);
    let path = cfg.path().to_str().unwrap();
    let serial = run(&["simulate", "--config", path, "--workers", "1"]);
    let parallel = run(&["simulate", "--config", path, "--workers", "3"]);
    assert!(serial.status.success());
    assert_eq!(serial.stdout, parallel.stdout);
}

#[test]
fn single_thread_env_var_is_honored() {
    let cfg = write_config(SMOKE_SIM);
    let out = Command::new(env!("CARGO_BIN_EXE_otfs-ra"))
        .args(["simulate", "--config", cfg.path().to_str().unwrap()])
        .env("OTFS_RA_FORCE_SINGLE_THREAD", "1")
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    assert_eq!(out.stdout, run(&["simulate", "--config", cfg.path().to_str().unwrap()]).stdout);
}

#[test]
fn simulate_resolves_policy_widths_per_doppler() {
    let cfg = write_config(SMOKE_SIM);
    let out = run(&[
        "simulate",
        "--config",
        cfg.path().to_str().unwrap(),
        "--set",
        "nu_max=0,300",
        "--set",
        "n1=0",
    ]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][4], "1", "policy width at 0 Hz");
    assert_eq!(rows[1][4], "5", "policy width at 300 Hz");
}

#[test]
fn threshold_matches_the_closed_form_for_the_rectangular_window() {
    let out = run(&["threshold", "--config", "fig1", "--set", "window=rect"]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    let mu: f64 = rows[0][5].parse().unwrap();
    let expected = 15724.825456526962;
    assert!((mu - expected).abs() / expected < 1e-5, "mu = {mu}");
}

#[test]
fn leakage_profile_matches_the_reference_side_lobe_levels() {
    let out = run(&["leakage", "--config", "fig1"]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 96);
    let k73 = &rows[73];
    let rect: f64 = k73[1].parse().unwrap();
    let hamming: f64 = k73[2].parse().unwrap();
    assert!((hamming + 17.0).abs() < 1.5, "hamming at k=73: {hamming} dB");
    assert!(rect > hamming, "rectangular should leak more: {rect} vs {hamming}");
}

#[test]
fn leakage_without_doppler_stays_on_the_anchor_row_for_rect() {
    let out = run(&[
        "leakage",
        "--config",
        "fig1",
        "--set",
        "nu=0",
        "--set",
        "windows=rect",
    ]);
    assert!(out.status.success());
    for (k, row) in data_rows(&stdout(&out)).iter().enumerate() {
        let db: f64 = row[1].parse().unwrap();
        if k == 71 {
            assert_eq!(db, 0.0);
        } else {
            assert!(db < -200.0, "row {k} holds energy: {db} dB");
        }
    }
}

#[test]
fn output_file_headers_carry_the_resolved_config() {
    let cfg = write_config(SMOKE_SIM);
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("result.csv");
    let out = run(&[
        "simulate",
        "--config",
        cfg.path().to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(header[0].contains(env!("CARGO_PKG_VERSION")));
    assert!(header[1].contains("seed=7"), "seed override missing: {}", header[1]);
    assert!(header[1].contains("rho_db=-5"));
    assert!(!header[1].contains("workers"), "worker count must stay out of headers");
    assert!(text.lines().any(|l| l.starts_with("scenario_id,")));
}
