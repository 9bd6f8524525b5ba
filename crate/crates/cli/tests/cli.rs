//! End-to-end runs of the `yamabe` binary on small configurations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const FLAT8: &str = "[grid]\nnodes = [8, 8, 8]\nscheme = \"spectral\"\n[solver]\nk = 10\n";

fn yamabe(dir: &Path, config: &str, args: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_yamabe"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (output, out)
}

/// Data rows of a CSV as string fields, skipping comment lines and the header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn flat_spectrum_starts_at_zero_then_four_pi_squared() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = yamabe(tmp.path(), FLAT8, &["spectrum"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(text.starts_with("# yamabe "));
    assert!(text.contains("config-sha256="));
    let r = rows(&out.join("spectrum.csv"));
    let four_pi2 = 4.0 * std::f64::consts::PI.powi(2);
    assert!(num(&r[0][1]).abs() < 1e-9);
    for row in &r[1..7] {
        assert!((num(&row[1]) - four_pi2).abs() < 1e-8 * four_pi2);
    }
    let counts = rows(&out.join("counts.csv"));
    assert_eq!(&counts[0][1..4], ["0", "1", "9"]);
}

#[test]
fn dense_flag_matches_iterative_on_coarse_grid() {
    let cfg = "seed = 2\n[grid]\nnodes = [8, 8, 8]\n[metric]\nkind = \"random-traceless\"\namplitude = 0.2\n[solver]\nk = 6\n";
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (oa, out_a) = yamabe(a.path(), cfg, &["spectrum"]);
    let (ob, out_b) = yamabe(b.path(), cfg, &["spectrum", "--dense"]);
    assert!(oa.status.success() && ob.status.success());
    for (x, y) in rows(&out_a.join("spectrum.csv")).iter().zip(rows(&out_b.join("spectrum.csv"))) {
        let (x, y) = (num(&x[1]), num(&y[1]));
        assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{x} {y}");
    }
}

#[test]
fn unknown_keys_exit_with_config_code() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = yamabe(tmp.path(), "[grid]\nnodes = [4, 4, 4]\nshape = 2\n", &["spectrum"]);
    assert_eq!(o.status.code(), Some(2));
    let err = fs::read_to_string(out.join("error.json")).unwrap();
    assert!(err.contains("\"kind\": \"Config\""), "{err}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("\"exit_code\": 2"));
}

#[test]
fn excluded_coupling_is_rejected_for_breaking() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = yamabe(tmp.path(), "[grid]\nnodes = [4, 4, 4]\n[solver]\ncoupling = 0.0\n", &["break-kernel"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(fs::read_to_string(out.join("error.json")).unwrap().contains("c ≠ 0, c ≠ 1/2"));
}

#[test]
fn flat_torus_breaking_is_degenerate() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = yamabe(tmp.path(), FLAT8, &["break-kernel"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(fs::read_to_string(out.join("error.json")).unwrap().contains("FirstOrderDegenerate"));
}

#[test]
fn empty_kernel_breaks_trivially() {
    let cfg = "seed = 3\n[grid]\nnodes = [8, 8, 8]\nscheme = \"spectral\"\n[metric]\nkind = \"random-traceless\"\namplitude = 0.2\n[solver]\ntol = 1e-6\n";
    let tmp = TempDir::new().unwrap();
    let (o, out) = yamabe(tmp.path(), cfg, &["break-kernel"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = rows(&out.join("trace.csv"));
    assert_eq!(trace.len(), 1);
    assert_eq!(trace[0][1], "0");
    assert!(out.join("metric.csf").exists());
}

#[test]
fn zero_direction_gives_zero_q_and_flat_branches() {
    let cfg = format!("{FLAT8}[perturb]\ndirection = {{ kind = \"zero\" }}\nts = [0.0, 0.1, 0.2]\n");
    let tmp = TempDir::new().unwrap();
    let (o, out) = yamabe(tmp.path(), &cfg, &["perturb"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for r in rows(&out.join("q_matrix.csv")) {
        assert_eq!(num(&r[2]), 0.0);
    }
    let branches = rows(&out.join("branches.csv"));
    let at = |t: &str, b: &str| branches.iter().find(|r| num(&r[0]) == num(t) && r[1] == b).map(|r| num(&r[2])).unwrap();
    for b in ["0", "1", "2", "3"] {
        assert_eq!(at("0", b), at("0.2", b));
    }
}

#[test]
fn homothety_branches_scale_inversely() {
    let cfg = format!("{FLAT8}[perturb]\ndirection = {{ kind = \"homothety\" }}\nts = [0.0, 0.5, 1.0]\n");
    let tmp = TempDir::new().unwrap();
    let (o, out) = yamabe(tmp.path(), &cfg, &["perturb"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let branches = rows(&out.join("branches.csv"));
    let base: Vec<f64> = branches.iter().filter(|r| num(&r[0]) == 0.0).map(|r| num(&r[2])).collect();
    for r in &branches {
        let (t, b, v) = (num(&r[0]), r[1].parse::<usize>().unwrap(), num(&r[2]));
        assert!((v - base[b] / (1.0 + t)).abs() < 1e-8 * base[b].abs().max(1.0), "{r:?}");
    }
}

#[test]
fn product_rows_and_rescaled_constant_mode() {
    let cfg = "[product]\nks = [3]\nsweep = { start = 1.0, stop = 20.0, step = 1.0 }\n";
    let tmp = TempDir::new().unwrap();
    let (o, out) = yamabe(tmp.path(), cfg, &["product"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = rows(&out.join("sweep_k3.csv"));
    // t = R_G/2 = 1 has zero curvature and is not admissible.
    assert_eq!(sweep[0][0], "1");
    assert_eq!(sweep[0][3], "false");
    assert!(sweep.iter().filter(|r| num(&r[0]) > 10.0).all(|r| r[3] == "true"));
    let rescaled = rows(&out.join("rescaled_k3.csv"));
    let lowest = num(&rescaled[0][1]);
    assert!((lowest + 1.0 / 6.0).abs() < 1e-14, "{lowest}");
}

#[test]
fn curvature_check_matches_closed_form() {
    let cfg = "[grid]\nnodes = [16, 16, 16]\nscheme = \"spectral\"\n[metric]\nkind = \"conformal-fourier\"\nmodes = [{ wave = [1, 0, 0], amplitude = 0.1 }, { wave = [0, 1, 1], amplitude = 0.05, phase = 1.0 }]\n";
    let tmp = TempDir::new().unwrap();
    let (o, out) = yamabe(tmp.path(), cfg, &["curvature-check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = rows(&out.join("summary.csv"));
    assert!(num(&s[0][4]) < 1e-8, "{:?}", s);
    assert!(num(&s[0][3]) < 1e-6, "{:?}", s);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let cfg = "[product]\nks = [1, 3]\nsweep = { start = 1.0, stop = 12.0, step = 0.5 }\n";
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (oa, out_a) = yamabe(a.path(), cfg, &["product", "--threads", "1"]);
    let (ob, out_b) = yamabe(b.path(), cfg, &["product", "--threads", "3"]);
    assert!(oa.status.success() && ob.status.success());
    for name in ["sweep_k1.csv", "sweep_k3.csv", "bounds.csv", "family.csv", "precompactness.csv"] {
        assert_eq!(fs::read(out_a.join(name)).unwrap(), fs::read(out_b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_override_changes_the_hash() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (_, out_a) = yamabe(a.path(), FLAT8, &["spectrum"]);
    let (_, out_b) = yamabe(b.path(), FLAT8, &["spectrum", "--seed", "7"]);
    let first = |p: &Path| fs::read_to_string(p.join("counts.csv")).unwrap().lines().next().unwrap().to_string();
    assert_ne!(first(&out_a), first(&out_b));
}
