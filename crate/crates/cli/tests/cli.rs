use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use wiretap_cli::{parse_config, parse_config_with, Overrides};
use wiretap_core::optimizer::oracle::{boundary_distance, scalar_grid_region};
use wiretap_core::{convex_closure, RatePair, RegionPointSet};

const SCALAR_REGION: &str = r#"{
    "command": "region",
    "seed": 1,
    "channel": {
        "receivers": [{"noise": [[1.0]]}, {"noise": [[1.5]]}],
        "eavesdropper": {"noise": [[2.0]]},
        "constraint": {"covariance": [[2.0]]}
    }
}"#;

const T2_REGION: &str = r#"{
    "command": "region",
    "seed": 5,
    "channel": {
        "receivers": [
            {"noise": [[1.0, 0.3], [0.3, 0.8]]},
            {"noise": [[1.2, -0.2], [-0.2, 2.0]]}
        ],
        "eavesdropper": {"noise": [[2.5, 0.0], [0.0, 2.2]]},
        "constraint": {"covariance": [[1.0, 0.0], [0.0, 1.0]]}
    },
    "solver": {"restarts": 6, "max_iterations": 2000},
    "grids": {"mu_points": 5, "mu_max": 50.0}
}"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn wiretap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wiretap"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_rates(text: &str, r1_col: usize) -> Vec<RatePair> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            RatePair::new(f[r1_col].parse().unwrap(), f[r1_col + 1].parse().unwrap())
        })
        .collect()
}

#[test]
fn round_trip_through_json() {
    let cfg = parse_config(T2_REGION).unwrap();
    let text = cfg.to_json();
    let again = parse_config(&text).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(text, again.to_json());
}

#[test]
fn scalar_region_matches_grid_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SCALAR_REGION);
    let out = wiretap(&["--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("weight_mu,permutation,R1_bits,R2_bits,B1_rowmajor,B2_rowmajor,converged\n"));
    let rates = csv_rates(&text, 2);
    assert!(rates.len() > 32);
    let hull = convex_closure(&RegionPointSet::from_rates(rates)).unwrap();
    let parsed = parse_config(SCALAR_REGION).unwrap();
    let oracle = scalar_grid_region(&parsed.channel, 1e-3).unwrap();
    let d = boundary_distance(&hull, &oracle);
    assert!(d <= 1e-3, "Hausdorff distance {d}");
}

#[test]
fn rejects_indefinite_noise_with_json_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SCALAR_REGION.replace("[[1.0]]", "[[-0.5]]");
    let cfg = write(dir.path(), "bad.json", &bad);
    let out = wiretap(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    let msg = v["error"].as_str().unwrap();
    assert!(msg.contains("N1") && msg.contains("-5e-1"), "{msg}");
    assert_eq!(v["kind"], "config");
}

#[test]
fn schema_error_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SCALAR_REGION.replace(r#""seed": 1"#, r#""seed": "one""#);
    let cfg = write(dir.path(), "bad.json", &bad);
    let out = wiretap(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert!(v["error"].as_str().unwrap().starts_with("seed:"), "{v}");
}

#[test]
fn missing_config_file_is_io_error() {
    let out = wiretap(&["--config", "/nonexistent/wiretap.json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(v["kind"], "io");
}

#[test]
fn highsnr_scalar_constants_match_hand_values() {
    let h1: f64 = 2.0;
    let h2: f64 = 1.6;
    let h3: f64 = 1.0;
    let text = format!(
        r#"{{
        "command": "misome-highsnr",
        "channel": {{
            "receivers": [{{"gain": [[{h1}]], "noise": [[1.0]]}}, {{"gain": [[{h2}]], "noise": [[1.0]]}}],
            "eavesdropper": {{"gain": [[{h3}]], "noise": [[1.0]]}},
            "constraint": {{"power": 100.0}}
        }}
    }}"#
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.json", &text);
    let out = wiretap(&["--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let f = |k: &str| v[k].as_f64().unwrap();
    // ψ = 1, so λ_k = h_k²/h3², a = h1²/h3², b = h2²/h3².
    let (l1, l2) = (h1 * h1 / (h3 * h3), h2 * h2 / (h3 * h3));
    assert!((f("lambda1") - l1).abs() < 1e-12);
    assert!((f("lambda2") - l2).abs() < 1e-12);
    assert!((f("a") - l1).abs() < 1e-12);
    assert!((f("b") - l2).abs() < 1e-12);
    let c12 = &v["rectangle_12"];
    assert!((c12["R1_bits"].as_f64().unwrap() - 0.5 * l1.log2()).abs() < 1e-12);
    assert!(c12["R2_bits"].as_f64().unwrap().abs() < 1e-12);
    let c21 = &v["rectangle_21"];
    assert!(c21["R1_bits"].as_f64().unwrap().abs() < 1e-12);
    assert!((c21["R2_bits"].as_f64().unwrap() - 0.5 * l2.log2()).abs() < 1e-12);
}

#[test]
fn highsnr_orthogonal_gain_writes_inf() {
    let text = r#"{
        "command": "misome-highsnr",
        "channel": {
            "receivers": [{"gain": [[1.0, 0.0]], "noise": [[1.0]]}, {"gain": [[0.0, 1.0]], "noise": [[1.0]]}],
            "eavesdropper": {"gain": [[1.0, 0.0], [0.0, 1.0]], "noise": [[1.0, 0.0], [0.0, 1.0]]},
            "constraint": {"power": 10.0}
        }
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.json", text);
    let out = wiretap(&["--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["rectangle_12"]["R2_bits"], "inf");
    assert!(v["hull"].is_null());
}

#[test]
fn check_on_eavesdropper_dominant_channel() {
    let text = r#"{
        "command": "check",
        "channel": {
            "receivers": [
                {"noise": [[2.0, 0.0], [0.0, 3.0]]},
                {"noise": [[2.5, 0.5], [0.5, 2.0]]}
            ],
            "eavesdropper": {"noise": [[1.0, 0.0], [0.0, 0.5]]},
            "constraint": {"covariance": [[1.0, 0.0], [0.0, 2.0]]}
        },
        "solver": {"restarts": 4, "max_iterations": 1000},
        "grids": {"mu_points": 4, "mu_max": 100.0}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", text);
    let report = dir.path().join("report.json");
    let out = wiretap(&["--config", cfg.to_str().unwrap(), "--output", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}\n{}", stdout(&out), stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("region = origin"), "{table}");
    assert!(table.ends_with("result: PASS\n"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn check_on_degraded_channel_passes() {
    let text = T2_REGION
        .replace(r#""command": "region""#, r#""command": "check""#)
        .replace("[[1.2, -0.2], [-0.2, 2.0]]", "[[1.6, 0.2], [0.2, 1.5]]");
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &text);
    let out = wiretap(&["--config", cfg.to_str().unwrap()]);
    let table = stdout(&out);
    assert!(table.starts_with("channel: SADBC"), "{table}");
    assert!(table.contains("enhancement"), "{table}");
    assert_eq!(out.status.code(), Some(0), "{table}");
}

#[test]
fn region_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", T2_REGION);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = wiretap(&["--config", cfg.to_str().unwrap(), "--output", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", T2_REGION);
    let out = wiretap(&[
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
        "--mu-grid",
        "2",
        "--restarts",
        "2",
        "--seed",
        "9",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    // Swapped order is swept too because the channel is not degraded.
    assert!(v["points"].as_array().unwrap().len() >= 4);
    let o = Overrides {
        mu_points: Some(2),
        ..Default::default()
    };
    let grid = parse_config_with(T2_REGION, &o).unwrap().mu_grid;
    assert_eq!(grid[0], 1.0);
    assert!((grid[1] - 50.0).abs() < 1e-12);
}

#[test]
fn misome_csv_rows_cover_both_orders() {
    let text = r#"{
        "command": "misome",
        "channel": {
            "receivers": [
                {"gain": [[1.0, 0.2, -0.4]], "noise": [[1.0]]},
                {"gain": [[0.3, 1.1, 0.5]], "noise": [[2.0]]}
            ],
            "eavesdropper": {"gain": [[0.5, 0.1, 0.0], [0.0, 0.4, 0.2]], "noise": [[1.0, 0.0], [0.0, 1.0]]},
            "constraint": {"power": 10.0}
        },
        "grids": {"alpha_points": 5}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", text);
    let out = wiretap(&["--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("alpha_split,permutation,R1_bits,R2_bits"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.iter().filter(|r| r[1] == "2-1").count(), 5);
    // α = 0 gives user 1 nothing.
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn enhance_verify_reports_every_mu() {
    let text = r#"{
        "command": "enhance-verify",
        "seed": 3,
        "channel": {
            "receivers": [
                {"noise": [[1.0, 0.3], [0.3, 0.8]]},
                {"noise": [[1.6, 0.2], [0.2, 1.5]]}
            ],
            "eavesdropper": {"noise": [[2.5, 0.0], [0.0, 2.2]]},
            "constraint": {"covariance": [[1.0, 0.0], [0.0, 1.0]]}
        },
        "solver": {"restarts": 8},
        "grids": {"mu_points": 3, "mu_max": 10.0}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.json", text);
    let out = wiretap(&["--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for e in entries {
        match e["status"].as_str().unwrap() {
            "certified" => assert_eq!(e["certificate"]["passed"], true),
            "non-stationary" => assert_eq!(e["diagnostic"]["kind"], "non-stationary"),
            other => panic!("unexpected status {other}: {e}"),
        }
    }
    // μ = 1 has no proportionality constant.
    assert!(entries[0]["certificate"]["proportionality"]["not_evaluated"].is_string());
}

#[test]
fn enhance_verify_rejects_non_degraded_channel() {
    let text = T2_REGION.replace(r#""command": "region""#, r#""command": "enhance-verify""#);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.json", &text);
    let out = wiretap(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("SAMBC"));
}
