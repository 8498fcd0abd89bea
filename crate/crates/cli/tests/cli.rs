use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use magnetomech::dynamics::read_snapshot;

fn run_lib(args: &[&str]) -> Result<String, magnetomech_cli::CliError> {
    let mut out = Vec::new();
    let mut full = vec!["magnetomech"];
    full.extend(args);
    magnetomech_cli::run(full, &mut out)?;
    Ok(String::from_utf8(out).expect("utf8"))
}

fn stable(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# command:") && !l.starts_with("# magnetomech ") && !l.starts_with("# config: output"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, stable(actual) + "\n").unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {}", path.display()));
    assert_eq!(stable(actual), expected.trim_end(), "golden mismatch for {name}");
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    let idx = header.split(',').position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    data_rows(text).into_iter().map(|r| r[idx].clone()).collect()
}

#[test]
fn lsa_golden() {
    golden("lsa_default.csv", &run_lib(&["lsa"]).unwrap());
}

#[test]
fn sweep_golden() {
    let out = run_lib(&["sweep", "--sweep-from", "100", "--sweep-to", "300", "--sweep-points", "3"]).unwrap();
    golden("sweep_temperature.csv", &out);
}

#[test]
fn sweep_reproduces_quoted_intensities() {
    let out = run_lib(&["sweep", "--sweep-from", "100", "--sweep-to", "300", "--sweep-points", "3"]).unwrap();
    let om: Vec<f64> = column(&out, "I_optomech_mW_cm2").iter().map(|v| v.parse().unwrap()).collect();
    for (got, want) in om.iter().zip([6.4, 13.0, 19.0]) {
        assert!((got - want).abs() / want < 0.1, "{got} vs {want}");
    }
    let mag: Vec<f64> = column(&out, "I_combined_neg_mW_cm2").iter().map(|v| v.parse().unwrap()).collect();
    for (got, want) in mag.iter().zip([0.2, 0.4, 0.6]) {
        assert!((got - want).abs() / want < 0.15, "{got} vs {want}");
    }
}

#[test]
fn missing_thresholds_are_empty_fields() {
    // Below the optical density cutoff the magnetic threshold vanishes.
    let out = run_lib(&["sweep", "--b0", "60", "--sweep-points", "2"]).unwrap();
    for row in data_rows(&out) {
        let s0_mag = &row[1];
        let exists = &row[9];
        assert!(s0_mag.is_empty());
        assert_eq!(exists, "0");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "# scan\ntemperature_uK = 100\nb0 = 80.0\nsin_theta = \"optimal\"\n").unwrap();
    let out = run_lib(&["lsa", "--config", cfg.to_str().unwrap(), "--temperature-uK", "200"]).unwrap();
    assert!(out.contains("# config: temperature_uK = 200 (flag)"));
    assert!(out.contains("# config: b0 = 80 (file)"));
    assert!(out.contains("# config: delta = -8.6 (default)"));
    let s0: f64 = column(&out, "s0_th")[0].parse().unwrap();
    assert!((s0 - 0.02585).abs() / 0.02585 < 2e-3);
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "b0 = 80\nlattice_period = 3\n").unwrap();
    let err = run_lib(&["lsa", "--config", cfg.to_str().unwrap()]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains(":2"), "{err}");
    assert!(err.to_string().contains("lattice_period"));

    let err = run_lib(&["lsa", "--reflectivity", "0"]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let err = run_lib(&["lsa", "--temperature-uK", "-5"]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let err = run_lib(&["lsa", "--sin-theta", "2"]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn figures_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_lib(&["figures", "--output-dir", dir.path().to_str().unwrap()]).unwrap();
    for name in ["fig4.csv", "fig5a_b0_80.csv", "fig5a_b0_70.csv", "fig5b.csv", "fig6.csv", "fig7.csv"] {
        assert!(out.contains(name), "{name} not reported");
        assert!(dir.path().join(name).exists());
    }
    golden("fig5b.csv", &read(&dir.path().join("fig5b.csv")));

    let fig6 = read(&dir.path().join("fig6.csv"));
    let line = fig6.lines().find(|l| l.starts_with("# crossover_period_um (combined)")).unwrap();
    let l: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((13.0..=20.0).contains(&l));
    let fig7 = read(&dir.path().join("fig7.csv"));
    let line = fig7.lines().find(|l| l.starts_with("# crossover_molasses_sat")).unwrap();
    let s: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((3e-4..=3e-3).contains(&s));

    let fig4 = read(&dir.path().join("fig4.csv"));
    let rows = data_rows(&fig4);
    let at100 = rows.iter().find(|r| r[0].parse::<f64>().unwrap() == 100.0).unwrap();
    let (r, d): (f64, f64) = (at100[1].parse().unwrap(), at100[2].parse().unwrap());
    assert!((r - d).abs() / d < 0.05);
}

#[test]
fn simulate_writes_diagnostics_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_lib(&[
        "simulate",
        "--pump-reference",
        "orientation",
        "--pump-factor",
        "3",
        "--steps",
        "200",
        "--snapshot-every",
        "100",
        "--grid-points",
        "64",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ])
    .unwrap();
    assert!(out.contains("final.dat"));
    let diag = read(&dir.path().join("diagnostics.csv"));
    assert!(diag.lines().any(|l| l == magnetomech::dynamics::DIAGNOSTICS_COLUMNS));
    assert_eq!(data_rows(&diag).len(), 21);
    let bytes = fs::read(dir.path().join("snapshot_0000100.dat")).unwrap();
    let snap = read_snapshot(&bytes[..]).unwrap();
    assert_eq!(snap.shape, vec![64]);
    assert_eq!(snap.state.rho.len(), 64);
    assert!(snap.state.time > 0.0);
}

#[test]
fn growth_matches_analytic() {
    let out = run_lib(&[
        "growth",
        "--pump-reference",
        "orientation",
        "--pump-factor",
        "2",
        "--steps",
        "3000",
        "--diagnostics-every",
        "150",
    ])
    .unwrap();
    let err: f64 = column(&out, "relative_error")[0].parse().unwrap();
    assert!(err < 0.02, "{out}");
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_magnetomech"))
}

#[test]
fn exit_codes() {
    let ok = binary().args(["lsa"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));

    let bad = binary().args(["lsa", "--b0", "lots"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let unknown = binary().args(["lsa", "--no-such-key", "1"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));

    // Negative sublevel populations in the initial noise abort the run,
    // but partial output is still written.
    let dir = tempfile::tempdir().unwrap();
    let abort = binary()
        .args(["simulate", "--perturbation", "noise", "--perturbation-amplitude", "0.9", "--steps", "5"])
        .args(["--grid-points", "64", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(abort.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&abort.stderr).contains("invariant"));
    assert!(dir.path().join("diagnostics.csv").exists());
}
