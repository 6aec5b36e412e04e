use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
    "modality": "point_cloud",
    "seed": 5,
    "n_obs": 10,
    "datasets": [{"id": "prim", "recipe": "primitives", "n_train": 32, "pool_size": 4}],
    "architectures": [{"id": "pmlp", "epochs": 5}],
    "methods": [{"method": "IxG"}, {"method": "VG"}, {"method": "IG", "n_steps": 8}],
    "metrics": ["FC", "PF", "SP", "CP"],
    "metric_config": {"n_runs": 8, "n_steps": 8},
    "output_dir": "out"
}"#;

fn salbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salbench"))
        .args(args)
        .current_dir(dir)
        .env_remove("SALBENCH_OUTPUT_DIR")
        .env_remove("SALBENCH_THREADS")
        .output()
        .unwrap()
}

fn stderr_line(out: &Output) -> String {
    let s = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(s.lines().count(), 1, "{s}");
    s.trim_end().to_string()
}

#[test]
fn stages_run_in_order_and_errors_are_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.json"), CONFIG).unwrap();

    let out = salbench(tmp.path(), &["rank", "--config", "run.json"]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("salbench: error[MissingStageInput]: "));

    for stage in ["generate", "explain", "evaluate", "rank", "meta", "report"] {
        let out = salbench(tmp.path(), &[stage, "--config", "run.json", "--threads", "1"]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let report = fs::read_to_string(tmp.path().join("out/report/report.txt")).unwrap();
    assert!(report.contains("IxG") && report.contains("sigma_hat"));

    let out = salbench(tmp.path(), &["rank", "--config", "run.json", "--seed", "6"]);
    assert!(stderr_line(&out).starts_with("salbench: error[ConfigHashMismatch]: "));
    let out = salbench(tmp.path(), &["rank", "--config", "run.json", "--seed", "6", "--force"]);
    assert!(out.status.success());
}

#[test]
fn bad_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), r#"{"modality": "image"}"#).unwrap();
    let out = salbench(tmp.path(), &["generate", "--config", "bad.json"]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("salbench: error[Config]: "));

    let out = salbench(tmp.path(), &["generate"]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("salbench: error[Usage]: "));

    let out = salbench(tmp.path(), &["frobnicate", "--config", "bad.json"]);
    assert!(stderr_line(&out).starts_with("salbench: error[Usage]: "));
}

#[test]
fn output_dir_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.json"), CONFIG).unwrap();
    let elsewhere = tmp.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_salbench"))
        .args(["generate", "--config", "run.json"])
        .current_dir(tmp.path())
        .env("SALBENCH_OUTPUT_DIR", &elsewhere)
        .env("SALBENCH_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(elsewhere.join("manifest.json").exists());
    assert!(!tmp.path().join("out").exists());
}
