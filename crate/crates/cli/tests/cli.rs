use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spinebk(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_spinebk"))
        .current_dir(dir)
        .arg("--config")
        .arg(&cfg)
        .args(args)
        .output()
        .expect("spawn spinebk")
}

fn ok_csv(dir: &Path, args: &[&str], config: &str) -> Vec<BTreeMap<String, String>> {
    let out = spinebk(dir, args, config);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    parse_csv(&String::from_utf8(out.stdout).unwrap())
}

fn parse_csv(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines();
    let head: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| head.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

#[test]
fn kepler_doublet_n_le_2() {
    let dir = TempDir::new().unwrap();
    let rows = ok_csv(dir.path(), &["spectrum"], "spin = 0.5\n[spectrum]\nn_max = 2\n");
    assert_eq!(rows.len(), 8);
    let mut groups: BTreeMap<(i64, String), usize> = BTreeMap::new();
    for r in &rows {
        *groups.entry((r["n"].parse().unwrap(), r["j"].clone())).or_default() += 1;
        let mult: usize = r["multiplicity"].parse().unwrap();
        let twice_j = (2.0 * num(r, "j")).round() as usize;
        assert_eq!(mult, twice_j + 1);
    }
    let want: BTreeMap<(i64, String), usize> =
        [((1, "0.5".into()), 2), ((2, "0.5".into()), 2), ((2, "1.5".into()), 4)].into_iter().collect();
    assert_eq!(groups, want);
    let e: Vec<f64> = rows.iter().map(|r| num(r, "energy")).collect();
    assert!(e.windows(2).all(|w| w[0] <= w[1]));
    // fine-structure splitting at n = 2 is tiny against the gross structure
    let (e1, e2s, e2p) = (e[0], e[2], e[4]);
    assert!(e2p > e2s && (e2p - e2s) < 1e-3 * (e2s - e1));
}

#[test]
fn ho_spinless_ladder() {
    let dir = TempDir::new().unwrap();
    let cfg = "spin = 0.0\n[model]\nname = \"ho\"\nomega = 1.5\n[spectrum]\nn_r_max = 3\nl_max = 6\n";
    let rows = ok_csv(dir.path(), &["spectrum"], cfg);
    for r in &rows {
        let (n_r, l) = (num(r, "n_r"), num(r, "l"));
        let want = 1.5 * (2.0 * n_r + l + 1.5);
        assert!((num(r, "energy") - want).abs() <= 1e-10 * want, "{r:?}");
    }
    // shells N = 2 n_r + l ≤ 6 are complete: (N + 1)(N + 2)/2 states
    for shell in 0..=6 {
        let e = 1.5 * (shell as f64 + 1.5);
        let count = rows.iter().filter(|r| (num(r, "energy") - e).abs() < 1e-8).count();
        assert_eq!(count, (shell + 1) * (shell + 2) / 2, "shell {shell}");
    }
}

fn distinct_energies(rows: &[BTreeMap<String, String>]) -> Vec<f64> {
    let mut e: Vec<f64> = rows.iter().map(|r| num(r, "energy")).collect();
    e.sort_by(f64::total_cmp);
    e.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    e
}

#[test]
fn sommerfeld_levels_coincide_with_spin_half_levels() {
    let dir = TempDir::new().unwrap();
    let som = ok_csv(dir.path(), &["spectrum"], "[spectrum]\nn_r_max = 3\nl_max = 4\nn_max = 3\nsommerfeld = true\n");
    let quad = ok_csv(dir.path(), &["spectrum"], "spin = 0.5\n[spectrum]\nn_r_max = 3\nl_max = 4\nn_max = 3\n");
    assert!(som.iter().all(|r| r["multiplicity"] == "1"));
    let (a, b) = (distinct_energies(&som), distinct_energies(&quad));
    assert_eq!(a.len(), 6);
    assert_eq!(a.len(), b.len());
    for (ea, eb) in a.iter().zip(&b) {
        assert!((ea - eb).abs() <= 1e-12 * ea, "{ea} vs {eb}");
    }
}

#[test]
fn unknown_model_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = spinebk(dir.path(), &["spectrum"], "[model]\nname = \"yukawa\"\n");
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.name") && err.contains("yukawa"), "{err}");
}

#[test]
fn unknown_key_and_bad_values_are_rejected() {
    let dir = TempDir::new().unwrap();
    assert_eq!(spinebk(dir.path(), &["spectrum"], "colour = 3\n").status.code(), Some(1));
    assert_eq!(spinebk(dir.path(), &["spectrum"], "spin = 0.3\n").status.code(), Some(1));
    assert_eq!(spinebk(dir.path(), &["spectrum", "--tol", "-1"], "").status.code(), Some(1));
    assert_eq!(spinebk(dir.path(), &["bogus"], "").status.code(), Some(1));
}

#[test]
fn verify_passes_for_the_spin_extended_kepler_problem() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("verify.csv");
    let out = spinebk(
        dir.path(),
        &["verify", "--out", out_path.to_str().unwrap()],
        "[model]\nunits = \"atomic\"\n[verify]\nsamples = 30\n",
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], Value::Bool(true));
    let rows = parse_csv(&std::fs::read_to_string(&out_path).unwrap());
    assert_eq!(rows.len(), 90);
    for r in &rows {
        assert!(num(r, "residual") < 1e-6 && num(r, "delta") < 1e-6, "{r:?}");
    }
}

#[test]
fn broken_field_reports_failures() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("broken.json");
    let out = spinebk(
        dir.path(),
        &["verify", "--out", out_path.to_str().unwrap()],
        "[model]\nname = \"ho\"\nkappa = 0.3\n[verify]\nsamples = 12\nbroken = true\n",
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("broken.csv").exists());
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(summary["pass"], Value::Bool(false));
    let pairs = summary["pairs"].as_array().unwrap();
    let failing: Vec<String> = pairs
        .iter()
        .filter(|p| !p["failures"].as_array().unwrap().is_empty())
        .map(|p| format!("{}{}", p["pair"][0].as_str().unwrap(), p["pair"][1].as_str().unwrap()))
        .collect();
    assert!(failing.contains(&"HM".to_string()) && failing.contains(&"LM".to_string()), "{failing:?}");
    assert!(!failing.contains(&"HL".to_string()));
}

#[test]
fn empty_sample_box_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = "[verify.box]\np_lo = [-1.0, -1.0, -1.0]\np_hi = [1.0, 1.0, 1.0]\n\
               x_lo = [0.0, -1.0, -1.0]\nx_hi = [0.0, 1.0, 1.0]\n";
    let out = spinebk(dir.path(), &["verify"], cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verify.box"));
}

#[test]
fn orbit_traces_a_precessing_rosette() {
    let dir = TempDir::new().unwrap();
    let (e, l) = (0.97f64, 0.02f64);
    let cfg = format!("[orbit]\nenergy = {e}\nl = {l}\nperiods = 3.0\n");
    let rows = ok_csv(dir.path(), &["orbit"], &cfg);
    assert!(rows.len() > 100);
    // natural units: coupling e² = α, so γ² = 1 − (α/L)²
    let a = 0.0072973525693f64;
    let gamma = (1.0 - (a / l) * (a / l)).sqrt();
    // least-squares fit of 1/r = C + A cos(γ φ)
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let data: Vec<(f64, f64)> = rows.iter().map(|r| (num(r, "phi"), 1.0 / num(r, "r"))).collect();
    for &(phi, u) in &data {
        let c = (gamma * phi).cos();
        s11 += 1.0;
        s12 += c;
        s22 += c * c;
        b1 += u;
        b2 += u * c;
    }
    let det = s11 * s22 - s12 * s12;
    let cc = (b1 * s22 - b2 * s12) / det;
    let aa = (s11 * b2 - s12 * b1) / det;
    assert!(aa > 0.0);
    let worst = data.iter().map(|&(phi, u)| (u - cc - aa * (gamma * phi).cos()).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-8 * cc, "rosette deviation {worst:e}");
    for r in &rows {
        assert!((num(r, "energy") - e).abs() < 1e-9);
        let s: f64 = ["s1", "s2", "s3"].iter().map(|k| num(r, k).powi(2)).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn zero_duration_orbit_has_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = "[orbit]\np = [0.0, 0.01, 0.0]\nx = [1.0, 0.0, 0.0]\nt_final = 0.0\n";
    let rows = ok_csv(dir.path(), &["orbit"], cfg);
    assert_eq!(rows.len(), 1);
    assert_eq!(num(&rows[0], "t"), 0.0);
    assert_eq!(num(&rows[0], "q0"), 1.0);
}

#[test]
fn orbit_needs_a_consistent_start() {
    let dir = TempDir::new().unwrap();
    let out = spinebk(dir.path(), &["orbit"], "[orbit]\nenergy = 0.97\nt_final = 1.0\n");
    assert_eq!(out.status.code(), Some(1));
    let both = "[orbit]\nenergy = 0.97\nl = 0.02\nt_final = 1.0\nperiods = 1.0\n";
    assert_eq!(spinebk(dir.path(), &["orbit"], both).status.code(), Some(1));
}

#[test]
fn radial_plunge_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = "[orbit]\np = [0.0, 0.0, 0.0]\nx = [1.0, 0.0, 0.0]\nt_final = 1.0e6\n";
    let out = spinebk(dir.path(), &["orbit"], cfg);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn kepler_angle_grid_has_full_spin_rotation() {
    let dir = TempDir::new().unwrap();
    let rows = ok_csv(dir.path(), &["angles"], "");
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert!((num(r, "alpha_r") - TAU).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn ho_angle_grid_with_coupling_rotates_less() {
    let dir = TempDir::new().unwrap();
    let cfg = "[model]\nname = \"ho\"\nkappa = 0.1\n[angles]\nenergies = [3.0]\nl_values = [1.0]\n";
    let rows = ok_csv(dir.path(), &["angles"], cfg);
    assert_eq!(rows.len(), 1);
    let a = num(&rows[0], "alpha_r");
    assert!(a > 0.0 && a < TAU && (a - TAU).abs() > 1e-3);
}

#[test]
fn runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = "[model]\nname = \"ho\"\nkappa = 0.2\n[verify]\nsamples = 8\n[spectrum]\nn_r_max = 2\nl_max = 2\n";
    for cmd in ["spectrum", "verify"] {
        let a = spinebk(dir.path(), &[cmd, "--seed", "5"], cfg);
        let b = spinebk(dir.path(), &[cmd, "--seed", "5"], cfg);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}
