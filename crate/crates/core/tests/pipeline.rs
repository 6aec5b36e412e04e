use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use salbench_core::data::{Criterion, MetricAxis, MetricId, ScoreTensor};
use salbench_core::io::{self, RunConfig, RunOptions, Stage};
use salbench_core::Error;

fn config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_json(
        r#"{
            "modality": "image",
            "seed": 11,
            "n_obs": 12,
            "datasets": [{"id": "quad", "recipe": "bright_quadrant", "n_train": 48, "pool_size": 4}],
            "architectures": [
                {"id": "cnn", "epochs": 8},
                {"id": "mlp", "kind": "mlp", "hidden": 8, "epochs": 8}
            ],
            "methods": [{"method": "IG", "n_steps": 16}, {"method": "VG"}, {"method": "GC"}, {"method": "OC"}],
            "metrics": ["FC", "PF", "INS", "LLE", "MS", "SP", "CP"],
            "metric_config": {"n_runs": 8, "n_steps": 8, "n_samples": 8}
        }"#,
    )
    .unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn full_run_is_reproducible_and_guarded() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let opts = RunOptions::default();
    io::run_all(&config(&a), &opts).unwrap();
    io::run_all(&config(&b), &opts).unwrap();
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(v == &tb[k], "{} differs", k.display());
    }

    // GradCAM needs a conv stage, so the MLP has no GC maps
    assert!(ta.contains_key(Path::new("maps/quad/cnn/GC.npy")));
    assert!(!ta.contains_key(Path::new("maps/quad/mlp/GC.npy")));

    let tables = io::read_rankings(&a).unwrap();
    assert_eq!(tables.iter().map(|t| t.criterion).collect::<Vec<_>>(), Criterion::ALL.to_vec());
    let report = String::from_utf8(ta[Path::new("report/report.txt")].clone()).unwrap();
    for col in ["mu_hat", "median_rank", "sigma_hat", "IG", "VG", "GC", "OC"] {
        assert!(report.contains(col), "{col}");
    }
    let csv = String::from_utf8(ta[Path::new("report/ranking_faithfulness.csv")].clone()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "method,FC,PF,INS,mu_hat,median_rank,sigma_hat,flag");
    assert_eq!(csv.lines().count(), 5);

    // a different config may not reuse the directory without --force
    let mut other = config(&a);
    other.seed = 12;
    let err = io::run_stage(&other, Stage::Rank, &opts).unwrap_err();
    assert!(matches!(err, Error::ConfigHashMismatch { .. }));
    io::run_stage(&other, Stage::Rank, &RunOptions { force: true, ..opts }).unwrap();
}

#[test]
fn later_stages_need_earlier_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path());
    for stage in [Stage::Explain, Stage::Evaluate, Stage::Rank, Stage::Meta, Stage::Report] {
        let err = io::run_stage(&cfg, stage, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingStageInput(_)), "{stage:?}: {err}");
    }
}

#[test]
fn ingested_scores_skip_model_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let metrics: Vec<MetricAxis> = vec![
        MetricId::Fc.into(),
        MetricId::Pf.into(),
        MetricAxis {
            id: "external".into(),
            criterion: Criterion::Faithfulness,
            orientation: salbench_core::data::Orientation::HigherIsBetter,
        },
    ];
    let methods: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let mut t = ScoreTensor::new(vec!["d0".into(), "d1".into()], vec!["net".into()], methods, metrics, 6);
    for d in 0..2 {
        for f in 0..3 {
            for e in 0..3 {
                for o in 0..6 {
                    // A best, C worst on every metric
                    let good = (3 - f) as f64 + 0.01 * o as f64;
                    let v = if e == 1 { -good } else { good };
                    t.set(d, 0, f, e, o, Some(v));
                }
            }
        }
    }
    t.set(1, 0, 2, 0, 3, None);
    let scores_dir = tmp.path().join("external");
    io::write_scores(&scores_dir, &t, "volume").unwrap();
    let (back, modality) = io::read_scores(&scores_dir.join("manifest.json")).unwrap();
    assert_eq!((back, modality.as_str()), (t.clone(), "volume"));

    let mut cfg = RunConfig::from_json(
        r#"{"modality": "volume", "seed": 1, "n_obs": 6, "ingest": {"scores": "external/manifest.json"}}"#,
    )
    .unwrap();
    cfg.output_dir = tmp.path().join("out");
    cfg.ingest.scores = Some(tmp.path().join("external/manifest.json"));
    io::run_all(&cfg, &RunOptions::default()).unwrap();
    assert!(!cfg.output_dir.join("data").exists());
    let tables = io::read_rankings(&cfg.output_dir).unwrap();
    assert_eq!(tables.len(), 1);
    assert_eq!(tables[0].metric_ids, vec!["FC", "PF", "external"]);
    for row in &tables[0].ranks {
        assert_eq!(row, &vec![1.0, 2.0, 3.0]);
    }
    assert!(cfg.output_dir.join("meta/meta.json").exists());
}

#[test]
fn ingested_maps_replace_explain() {
    let tmp = tempfile::tempdir().unwrap();
    let own = tmp.path().join("own");
    let mut cfg = config(&own);
    cfg.metrics = vec!["SP".into(), "CP".into()];
    cfg.architectures.truncate(1);
    let opts = RunOptions::default();
    for stage in [Stage::Generate, Stage::Explain] {
        io::run_stage(&cfg, stage, &opts).unwrap();
    }
    let mut ext = cfg.clone();
    ext.output_dir = tmp.path().join("ext");
    ext.ingest.maps = Some(own.join("maps/manifest.json"));
    io::run_stage(&ext, Stage::Generate, &opts).unwrap();
    io::run_stage(&ext, Stage::Evaluate, &opts).unwrap();
    io::run_stage(&cfg, Stage::Evaluate, &opts).unwrap();
    assert_eq!(fs::read(own.join("scores/scores.npy")).unwrap(), fs::read(ext.output_dir.join("scores/scores.npy")).unwrap());
}
