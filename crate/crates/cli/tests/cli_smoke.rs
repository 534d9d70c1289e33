//! End-to-end smoke tests: every subcommand runs against the built binary
//! and emits parseable JSON. The whole file is budgeted to finish in well
//! under a minute.

use std::process::Command;
use std::time::Instant;

fn corrsim(args: &[&str]) -> (bool, serde_json::Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_corrsim"))
        .args(args)
        .env("CORRSIM_THREADS", "4")
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let stderr = String::from_utf8_lossy(&out.stderr).to_string();
    let value = serde_json::from_str(&stdout).unwrap_or(serde_json::Value::Null);
    (out.status.success(), value, stderr)
}

#[test]
fn all_cli_paths_complete_quickly() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("scaling.csv");
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{"experiment": "oracle", "source": {"standard": "perf"}, "n": 2, "p": 0.5, "ell": 1, "k_max": 1}"#,
    )
    .unwrap();
    let custom_src = dir.path().join("half.json");
    std::fs::write(
        &custom_src,
        r#"{"label": "custom", "u_size": 2, "v_size": 2,
            "probs": [[0.4, 0.1], [0.1, 0.4]]}"#,
    )
    .unwrap();

    // source
    let (ok, v, err) = corrsim(&["source", "info", "--source", "disj"]);
    assert!(ok, "{err}");
    assert_eq!(v["support_size"], 3);
    let (ok, v, err) = corrsim(&[
        "source", "sample", "--source", "perf", "--count", "500", "--seed", "7",
    ]);
    assert!(ok, "{err}");
    assert_eq!(v["count"], 500);
    let (ok, v, _) = corrsim(&["source", "info", "--source", custom_src.to_str().unwrap()]);
    assert!(ok);
    assert_eq!(v["label"], "custom");

    // measure
    let (ok, v, _) = corrsim(&["measure", "cor", "--source", "bsc:0.25"]);
    assert!(ok);
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    let (ok, v, _) = corrsim(&["measure", "entropy", "--source", "perf"]);
    assert!(ok);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let (ok, v, _) = corrsim(&[
        "measure", "hc", "--source", "disj", "--q", "3", "--p", "1.5", "--grid", "40",
    ]);
    assert!(ok);
    assert_eq!(v["value"], true);
    let (ok, v, _) = corrsim(&[
        "measure", "hc", "--source", "perf", "--q", "3", "--p", "1.5", "--random", "500",
        "--seed", "3",
    ]);
    assert!(ok);
    assert_eq!(v["value"], false);

    // agr
    let (ok, v, _) = corrsim(&["agr", "construct", "--source", "disj", "--p", "0.027"]);
    assert!(ok);
    assert!((v["cost"].as_f64().unwrap() - 2.0 / 9.0).abs() < 1e-12);
    let (ok, v, _) = corrsim(&[
        "agr", "optimize", "--source", "bsc:0.2", "--ell", "2", "--p", "0.1", "--seed", "5",
    ]);
    assert!(ok);
    assert!(v["success"].as_f64().unwrap() >= 0.1 - 1e-9);

    // col
    let (ok, v, _) = corrsim(&[
        "col", "birthday", "--source", "priv", "--n", "16", "--k", "4", "--seed", "2",
        "--trials", "20000",
    ]);
    assert!(ok);
    assert!((v["min_prob"].as_f64().unwrap() - 1.0 / 16.0).abs() < 0.01);
    let (ok, v, _) = corrsim(&[
        "col", "from-agr", "--source", "disj", "--n", "8", "--seed", "3", "--trials", "20000",
    ]);
    assert!(ok);
    assert!(v["min_prob"].as_f64().unwrap() >= 1.0 / 16.0);
    let (ok, v, _) = corrsim(&[
        "col", "symmetrize", "--source", "disj", "--n", "8", "--s-param", "0.5", "--seed", "4",
        "--trials", "4000",
    ]);
    assert!(ok);
    assert!(v["uniformity_p_value"].as_f64().unwrap() > 0.001);
    assert!(v["empty_rate"].as_f64().unwrap() <= 0.5);

    // smp
    let (ok, v, err) = corrsim(&[
        "smp", "eq", "--source", "disj", "--n", "8", "--trials", "1500", "--seed", "7",
    ]);
    assert!(ok, "{err}");
    assert!(v["success_equal"]["value"].as_f64().unwrap() >= 2.0 / 3.0);
    assert_eq!(v["cost"]["rho_samples"].as_u64().unwrap(), 356 * 256);
    let (ok, v, err) = corrsim(&[
        "smp", "gapip", "--n", "64", "--b", "0", "--trials", "300", "--seed", "11",
    ]);
    assert!(ok, "{err}");
    assert_eq!(v["m"], 48);
    assert!(v["success"]["value"].as_f64().unwrap() >= 0.6);
    let (ok, v, err) = corrsim(&[
        "smp", "simulate", "--base", "eq-perf", "--source", "disj", "--eps", "0.3333",
        "--n", "8", "--trials", "400", "--seed", "13",
    ]);
    assert!(ok, "{err}");
    assert!(v["success_equal"]["value"].as_f64().unwrap() >= 2.0 / 3.0);
    assert!(v["cost"]["per_rep_bound"].as_u64().unwrap() > 0);
    let (ok, v, err) = corrsim(&[
        "smp", "influence", "--source", "disj", "--toy", "verbatim", "--n-bits", "6",
        "--trials", "100", "--seed", "1",
    ]);
    assert!(ok, "{err}");
    assert_eq!(v["pr_in_la"][0], 1.0);

    // bounds
    let (ok, v, _) = corrsim(&["bounds", "hyp", "--p", "1.5", "--q", "3", "--z", "1"]);
    assert!(ok);
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    let (ok, v, _) = corrsim(&[
        "bounds", "oracle", "--source", "disj", "--n", "2", "--p", "0.5", "--ell", "1",
        "--kmax", "2",
    ]);
    assert!(ok);
    assert_eq!(v["value"], 2);
    let (ok, v, _) = corrsim(&[
        "bounds", "scaling", "--source", "disj", "--n", "8,16,32,64,128", "--seed", "7",
        "--csv", csv_path.to_str().unwrap(),
    ]);
    assert!(ok);
    let exponent = v["value"].as_f64().unwrap();
    assert!(exponent > 0.1 && exponent < 0.5);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("n,p,achieved_max_out,hyp_floor,cor_floor"));
    assert_eq!(csv.lines().count(), 6);
    let (ok, v, _) = corrsim(&["bounds", "sigma-cor", "--m", "6", "--b", "1"]);
    assert!(ok);
    assert_eq!(v["ok"], true);
    let (ok, v, _) = corrsim(&["bounds", "shift", "--rho", "disj", "--sigma", "priv", "--z", "0.25"]);
    assert!(ok);
    assert_eq!(v["uninformative"], false);

    // experiment runner + report shape
    let (ok, v, err) = corrsim(&["experiment", "--config", cfg_path.to_str().unwrap()]);
    assert!(ok, "{err}");
    assert_eq!(v["rng_algorithm"], "splitmix64");
    assert_eq!(v["metrics"]["best_size"], 1);

    // invalid configs exit nonzero with a diagnostic
    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"experiment": "equality", "n": 8}"#).unwrap();
    let (ok, _, err) = corrsim(&["experiment", "--config", bad_cfg.to_str().unwrap()]);
    assert!(!ok);
    assert!(err.contains("source") || err.contains("seed"), "{err}");

    assert!(
        t0.elapsed().as_secs() < 60,
        "smoke suite took {:?}",
        t0.elapsed()
    );
}

#[test]
fn seed_is_mandatory_for_monte_carlo_paths() {
    let out = Command::new(env!("CARGO_BIN_EXE_corrsim"))
        .args(["smp", "eq", "--source", "disj", "--n", "8", "--trials", "100"])
        .output()
        .expect("binary runs");
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--seed"), "{err}");
}

#[test]
fn identical_seeds_reproduce_identical_reports() {
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_corrsim"))
            .args([
                "col", "birthday", "--source", "priv", "--n", "8", "--k", "3", "--seed", "42",
                "--trials", "5000",
            ])
            .output()
            .expect("binary runs");
        assert!(out.status.success());
        String::from_utf8_lossy(&out.stdout).to_string()
    };
    assert_eq!(run(), run());
}
