//! End-to-end checks of the command-line interface: exit codes, CSV output,
//! diagnostics on bad input, and override flags.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beamjam-cli"))
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "beamjam-cli-test-{}-{tag}",
        std::process::id()
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

const DETECTION_TOML: &str = "
scenario = \"roc_theory\"
trials = 60

[system]
m_bs = 4
m_ue = 2
n_bs = 3
n_ue = 2
tau = 2
rho = 0.6

[power]
jnr_db = 3.0

[sweep]
p_fa = [0.05, 0.2]
";

const ESTIMATION_TOML: &str = "
scenario = \"jammer_nmse\"
trials = 30

[system]
m_bs = 4
m_ue = 2
n_bs = 3
n_ue = 2
tau = 3
rho = 0.5

[power]
jnr_db = 5.0
";

fn write_config(dir: &PathBuf, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn stdout_csv(out: &Output) -> Vec<csv::StringRecord> {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        vec![
            "scenario", "tau", "rho", "jnr_db", "snr_db", "x_name", "x_value", "metric",
            "value", "trials", "se"
        ]
    );
    reader.records().map(|r| r.unwrap()).collect()
}

#[test]
fn theory_subcommand_writes_csv_to_stdout() {
    let dir = scratch_dir("theory");
    let config = write_config(&dir, "det.toml", DETECTION_TOML);
    let out = bin().args(["theory", "--config"]).arg(&config).output().unwrap();
    let rows = stdout_csv(&out);
    assert_eq!(rows.len(), 4); // two targets × (p_fa_theory, p_d_theory)
    for row in &rows {
        assert_eq!(&row[0], "roc_theory");
        assert_eq!(&row[9], "0"); // theory rows carry no trials
    }
}

#[test]
fn threshold_subcommand_reports_calibrated_operating_points() {
    let dir = scratch_dir("threshold");
    let config = write_config(&dir, "det.toml", DETECTION_TOML);
    let out = bin()
        .args(["threshold", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    let rows = stdout_csv(&out);
    let gammas: Vec<f64> = rows
        .iter()
        .filter(|r| &r[7] == "gamma_star")
        .map(|r| r[8].parse().unwrap())
        .collect();
    assert_eq!(gammas.len(), 2);
    assert!(gammas[0] > gammas[1], "tighter target, higher threshold");
}

#[test]
fn roc_subcommand_honors_out_seed_and_workers_flags() {
    let dir = scratch_dir("roc");
    let config = write_config(&dir, "det.toml", DETECTION_TOML);
    let out_path = dir.join("roc.csv");
    let out = bin()
        .args(["roc", "--trials", "40", "--seed", "3", "--workers", "2", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty(), "CSV should go to the file, not stdout");
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("scenario,tau,rho"));
    // 2 targets × 4 metrics data lines + header.
    assert_eq!(text.lines().count(), 9);
    assert!(text.contains(",40,"), "trial override should reach the rows");
}

#[test]
fn estimate_subcommand_runs_estimation_scenarios_only() {
    let dir = scratch_dir("estimate");
    let est = write_config(&dir, "est.toml", ESTIMATION_TOML);
    let out = bin()
        .args(["estimate", "--trials", "20", "--config"])
        .arg(&est)
        .output()
        .unwrap();
    let rows = stdout_csv(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().any(|r| &r[7] == "nmse_jam_known_db"));

    // A detection scenario under `estimate` is refused with a diagnostic.
    let det = write_config(&dir, "det.toml", DETECTION_TOML);
    let out = bin().args(["estimate", "--config"]).arg(&det).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("estimate"), "{err}");
    assert!(err.contains("roc_theory"), "{err}");
}

#[test]
fn bad_inputs_exit_nonzero_with_diagnostics() {
    let dir = scratch_dir("bad");

    // Unknown config key, named in the diagnostic.
    let bad = write_config(
        &dir,
        "bad.toml",
        &format!("{DETECTION_TOML}\n[sweep.subtable]\nfrobnicate = 1\n"),
    );
    let out = bin().args(["roc", "--config"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());

    // Missing config file.
    let out = bin()
        .args(["roc", "--config"])
        .arg(dir.join("missing.toml"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));

    // Unknown preset name.
    let out = bin().args(["reproduce", "fig99"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig99"));

    // Unknown subcommand (clap's own diagnostic, still nonzero).
    let out = bin().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn reproduce_preset_runs_at_reduced_trials() {
    let dir = scratch_dir("reproduce");
    let out_path = dir.join("fig2.csv");
    let out = bin()
        .args(["reproduce", "fig2", "--trials", "50"])
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_path).unwrap();
    // 2 sweep points (τ ∈ {2, 5}) × 12 default targets × 4 metrics + header.
    assert_eq!(text.lines().count(), 1 + 2 * 12 * 4);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("96 rows"), "{stderr}");
}
