use std::process::Command;

use mflab::harness::{self, fit_rate, registry_list, Cell, ExperimentConfig, ResultTable, ALIASES};
use serde_json::json;

fn quick(id: &str) -> ExperimentConfig {
    ExperimentConfig::new(id).with_seed(11)
}

#[test]
fn registry_is_sorted_nonempty_and_stable() {
    let a = registry_list();
    let b = registry_list();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let ids: Vec<_> = a.iter().map(|d| d.id).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(ids, sorted);
    for id in [
        "counterexample.nonclassical",
        "counterexample.comparison",
        "counterexample.w2-blowup",
        "nash.rate",
    ] {
        assert!(ids.contains(&id), "{id} missing");
    }
    for (alias, id) in ALIASES {
        assert!(ids.contains(&id), "alias {alias} points at {id}");
    }
}

#[test]
fn registry_claims() {
    let w2 = harness::descriptor("counterexample.w2-blowup").unwrap();
    assert!(w2.claim.contains("{\\sqrt{m}\\over C}{\\cal W}_2"));
    assert!(w2.description.ends_with(w2.claim));
    assert!(harness::descriptor("nash.rate").unwrap().claim.contains("|U^N-V|"));
    for d in registry_list() {
        assert!(!d.claim.is_empty() && !d.description.is_empty(), "{}", d.id);
    }
}

#[test]
fn unknown_id_is_an_experiment_error() {
    let e = harness::run(&quick("nash.nope")).unwrap_err();
    assert_eq!(e.kind(), "experiment");
    assert_eq!(harness::exit_code(&e), 2);
    assert_eq!(harness::descriptor("").unwrap_err().kind(), "experiment");
}

#[test]
fn schema_violation_names_the_field() {
    let cfg = quick("counterexample.gradient-gap").with_param("n", json!("four"));
    match harness::run(&cfg).unwrap_err() {
        mflab::MflabError::Config { path, .. } => assert_eq!(path, "counterexample.n"),
        e => panic!("unexpected {e}"),
    }
    let cfg = quick("counterexample.gradient-gap").with_param("bogus", json!(1));
    let e = harness::run(&cfg).unwrap_err();
    assert_eq!(e.kind(), "config");
    assert!(e.to_string().contains("bogus"), "{e}");
    let e = ExperimentConfig::from_json_str(r#"{"id":"mfg.value","nash":{}}"#).unwrap_err();
    match e {
        mflab::MflabError::Config { path, .. } => assert_eq!(path, "nash"),
        e => panic!("unexpected {e}"),
    }
    let e = quick("nash.grid2p").with_overrides(&["nash.options.nx=\"x\""]).unwrap();
    match harness::run(&e).unwrap_err() {
        mflab::MflabError::Config { path, .. } => assert!(path.starts_with("nash.options"), "{path}"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn dot_path_overrides() {
    let c = quick("nash.empirical-rate")
        .with_overrides(&["nash.N_grid=[16,32,64,128]", "nash.trials=20", "seed=5", "nash.law.kind=uniform"])
        .unwrap();
    assert_eq!(c.seed, 5);
    assert_eq!(c.params["N_grid"], json!([16, 32, 64, 128]));
    assert_eq!(c.params["law"]["kind"], json!("uniform"));
    let c = c.with_overrides(&["nash.N_grid.1=48"]).unwrap();
    assert_eq!(c.params["N_grid"], json!([16, 48, 64, 128]));
    assert_eq!(c.with_overrides(&["nash.N_grid.9=1"]).unwrap_err().kind(), "config");
    assert_eq!(c.with_overrides(&["no-equals"]).unwrap_err().kind(), "config");
}

#[test]
fn saved_runs_reload_with_the_same_hash_and_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick("counterexample.w2-blowup").with_param("mc_samples", json!(32));
    cfg.out = Some(dir.path().join("a"));
    let a = harness::run(&cfg).unwrap();
    cfg.out = Some(dir.path().join("b"));
    let b = harness::run(&cfg).unwrap();
    assert_eq!(a.provenance.config_hash, b.provenance.config_hash);
    let ca = std::fs::read(dir.path().join("a/table.csv")).unwrap();
    let cb = std::fs::read(dir.path().join("b/table.csv")).unwrap();
    assert_eq!(ca, cb);
    assert!(!ca.contains(&b'\r'));
    assert!(ca.starts_with(b"m,ratio_w2,ratio_w1\n"));

    let back = ResultTable::load(&dir.path().join("a")).unwrap();
    assert_eq!(back.provenance, a.provenance);
    assert_eq!(back.rows, a.rows);
    assert_eq!(back.config, a.config);
    assert_eq!(harness::config_hash(&back.config), a.provenance.config_hash);

    // the saved config reruns to the same hash
    let text = std::fs::read_to_string(dir.path().join("a/config.json")).unwrap();
    let again = harness::run(&ExperimentConfig::from_json_str(&text).unwrap()).unwrap();
    assert_eq!(again.provenance.config_hash, a.provenance.config_hash);

    // a different seed changes the hash
    let other = harness::run(&quick("counterexample.w2-blowup").with_seed(12).with_param("mc_samples", json!(32))).unwrap();
    assert_ne!(other.provenance.config_hash, a.provenance.config_hash);

    // tampering is detected
    std::fs::write(dir.path().join("a/config.json"), text.replace("\"seed\": 11", "\"seed\": 13")).unwrap();
    assert_eq!(ResultTable::load(&dir.path().join("a")).unwrap_err().kind(), "config");
}

#[test]
fn csv_requires_a_header() {
    assert!(ResultTable::read_csv(&b""[..]).is_err());
    let (cols, rows) = ResultTable::read_csv(&b"N,statistic,stderr\n4,0.5,0.01\n8,x,1e-3\n"[..]).unwrap();
    assert_eq!(cols, ["N", "statistic", "stderr"]);
    assert_eq!(rows[0], vec![Cell::Int(4), Cell::Float(0.5), Cell::Float(0.01)]);
    assert_eq!(rows[1][1], Cell::Text("x".into()));
}

fn table(f: impl Fn(f64) -> f64) -> (Vec<String>, Vec<Vec<Cell>>) {
    let cols = vec!["N".to_string(), "stat".to_string()];
    let rows = [4usize, 8, 16, 32, 64].iter().map(|&n| vec![n.into(), f(n as f64).into()]).collect();
    (cols, rows)
}

#[test]
fn rate_fits() {
    let (c, r) = table(|n| 3.0 / n);
    let f = fit_rate(&c, &r, "N", "stat").unwrap();
    assert!((f.slope + 1.0).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    let (c, r) = table(|n| 1.0 / n.sqrt());
    assert!((fit_rate(&c, &r, "N", "stat").unwrap().slope + 0.5).abs() < 1e-12);
    let (c, r) = table(|n| n - 4.0);
    assert_eq!(fit_rate(&c, &r, "N", "stat").unwrap_err().kind(), "log-domain");
    let (c, r) = table(|n| n);
    assert_eq!(fit_rate(&c, &r[..3], "N", "stat").unwrap_err().kind(), "empty");
    assert!(fit_rate(&c, &r, "N", "missing").is_err());
}

fn mflab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mflab"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gap");
    let st = mflab()
        .args(["run", "counterexample.gradient-gap", "--set", "counterexample.n=[4,8]", "--assert", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(out.join("table.csv").exists() && out.join("summary.json").exists());

    let o = mflab().args(["run", "nash.nope"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment"));

    let o = mflab()
        .args(["run", "counterexample.gradient-gap", "--set", "counterexample.n=\"x\"", "--out"])
        .arg(dir.path().join("bad"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("config") && err.contains("counterexample.n"), "{err}");

    // quadratic data past its blowup horizon is a numerical failure
    let o = mflab()
        .args(["run", "nash.grid2p", "--set", "nash.T=0.3", "--out"])
        .arg(dir.path().join("blow"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    // a threshold the data cannot meet fails only with --assert
    let args = ["run", "nash.empirical-rate", "--set", "nash.law={\"kind\":\"dirac\",\"x\":0}", "--set", "nash.trials=4", "--out"];
    let o = mflab().args(args).arg(dir.path().join("e1")).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = mflab().args(args).arg(dir.path().join("e2")).arg("--assert").output().unwrap();
    assert_eq!(o.status.code(), Some(4));

    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"id":"counterexample.gradient-gap","seed":1,"counterexample":{"n":[4]}}"#).unwrap();
    let o = mflab().args(["run", "counterexample.gradient-gap", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("c")).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = mflab().args(["run", "counterexample.w2-blowup", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let list = mflab().arg("list").output().unwrap();
    assert!(list.status.success());
    assert_eq!(String::from_utf8_lossy(&list.stdout).lines().count(), registry_list().len());
}

#[test]
fn cli_fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    std::fs::write(&csv, "N,statistic,stderr\n4,0.25,0\n16,0.0625,0\n64,0.015625,0\n256,0.00390625,0\n").unwrap();
    let o = mflab().arg("fit").arg(&csv).args(["N", "statistic"]).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["slope"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!(v.get("intercept").is_some() && v.get("r2").is_some());
}

#[test]
fn published_schema_is_current() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/schema/config.schema.json");
    let published: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(published, harness::config_schema().unwrap(), "regenerate with `cargo run --example config_schema`");
    let ids: Vec<_> = published["properties"]["id"]["enum"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(ids, registry_list().iter().map(|d| d.id).collect::<Vec<_>>());
    // defaults in the schema resolve unchanged
    let nash = &published["allOf"][ids.iter().position(|i| *i == "nash.rate").unwrap()]["then"]["properties"]["nash"];
    assert_eq!(nash["properties"]["N_grid"]["default"], json!([4, 8, 16, 32, 64, 128, 256]));
    assert_eq!(nash["additionalProperties"], json!(false));
}
