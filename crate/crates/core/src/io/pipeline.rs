use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{stable_label, RunConfig};
use super::npy::{read_array, read_i64, write_array, write_i64};
use super::report;
use crate::data::{MetricAxis, ModelOracle, ScoreTensor};
use crate::error::{Error, Result};
use crate::exec::{with_threads, Executor};
use crate::meta::{meta_stats, MetaStatsResult, RankHypercube};
use crate::metrics::{evaluate_batch, Observation};
use crate::ranking::{equalize_architecture_rankings, RankingTable};
use crate::rng;
use crate::tensor::Tensor;
use crate::tinynet::{train, Network, SyntheticDataset};
use crate::xai::{explain, Explain, MethodExplainer, XaiConfig};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generate,
    Explain,
    Evaluate,
    Rank,
    Meta,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Generate, Stage::Explain, Stage::Evaluate, Stage::Rank, Stage::Meta, Stage::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Explain => "explain",
            Stage::Evaluate => "evaluate",
            Stage::Rank => "rank",
            Stage::Meta => "meta",
            Stage::Report => "report",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Overwrite artifacts written under a different config.
    pub force: bool,
    pub threads: Option<usize>,
    pub executor: Executor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunManifest {
    format: u32,
    config_hash: String,
    seed: u64,
}

/// Saliency maps of one run, or of an external source with the same
/// layout: one `(n_obs, *map_shape)` array per `(dataset, architecture,
/// method)` and one target array per `(dataset, architecture)`. Paths are
/// relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapsManifest {
    pub n_obs: usize,
    pub maps: Vec<MapEntry>,
    pub targets: Vec<TargetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub dataset: String,
    pub architecture: String,
    pub method: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub dataset: String,
    pub architecture: String,
    pub path: PathBuf,
}

/// Axis names of a score array `(dataset, architecture, method, metric,
/// observation)`. `mask` (int64, 1 = present) is optional; without it every
/// score counts as present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreManifest {
    pub modality: String,
    pub datasets: Vec<String>,
    pub architectures: Vec<String>,
    pub methods: Vec<String>,
    pub metrics: Vec<MetricAxis>,
    pub n_obs: usize,
    pub values: PathBuf,
    #[serde(default)]
    pub mask: Option<PathBuf>,
}

/// File locations under the output directory.
struct Layout {
    root: PathBuf,
}

impl Layout {
    fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
    fn data(&self, d: &str) -> PathBuf {
        self.root.join("data").join(d)
    }
    fn model(&self, d: &str, a: &str) -> PathBuf {
        self.root.join("models").join(d).join(a)
    }
    fn maps(&self) -> PathBuf {
        self.root.join("maps")
    }
    fn scores(&self) -> PathBuf {
        self.root.join("scores")
    }
    fn rankings(&self) -> PathBuf {
        self.root.join("rankings")
    }
    fn meta(&self) -> PathBuf {
        self.root.join("meta")
    }
    fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn require(path: &Path, stage: Stage) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingStageInput(format!("{} not found (run `{}` first)", path.display(), stage.as_str())))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Refuses to write into a directory that holds artifacts of another
/// config unless forced.
fn claim_output(cfg: &RunConfig, layout: &Layout, force: bool) -> Result<()> {
    let expected = cfg.hash();
    let path = layout.manifest();
    if path.exists() {
        let found: RunManifest = read_json(&path)?;
        if found.config_hash != expected && !force {
            return Err(Error::ConfigHashMismatch {
                expected,
                found: found.config_hash,
            });
        }
    }
    write_json(
        &path,
        &RunManifest {
            format: FORMAT_VERSION,
            config_hash: expected,
            seed: cfg.seed,
        },
    )?;
    let mut effective = cfg.clone();
    effective.output_dir = PathBuf::new();
    write_json(&layout.root.join("config.json"), &effective)
}

/// Runs one stage. Inputs of earlier stages must already be on disk.
pub fn run_stage(cfg: &RunConfig, stage: Stage, opts: &RunOptions) -> Result<()> {
    cfg.validate()?;
    let layout = Layout {
        root: cfg.output_dir.clone(),
    };
    with_threads(opts.threads, || {
        claim_output(cfg, &layout, opts.force)?;
        log::info!("stage {}", stage.as_str());
        match stage {
            Stage::Generate => generate(cfg, &layout, opts.executor),
            Stage::Explain => explain_stage(cfg, &layout, opts.executor),
            Stage::Evaluate => evaluate_stage(cfg, &layout, opts.executor),
            Stage::Rank => rank_stage(cfg, &layout),
            Stage::Meta => meta_stage(cfg, &layout),
            Stage::Report => report_stage(cfg, &layout),
        }
    })
}

/// Runs every stage in order. Ingested scores skip the first three stages
/// and ingested maps skip `explain`.
pub fn run_all(cfg: &RunConfig, opts: &RunOptions) -> Result<()> {
    for stage in Stage::ALL {
        let skip = match stage {
            Stage::Generate | Stage::Evaluate => cfg.ingest.scores.is_some(),
            Stage::Explain => cfg.ingest.scores.is_some() || cfg.ingest.maps.is_some(),
            _ => false,
        };
        if !skip {
            run_stage(cfg, stage, opts)?;
        }
    }
    Ok(())
}

fn stack(tensors: &[Tensor]) -> Result<Tensor> {
    let inner = tensors.first().map_or(Vec::new(), |t| t.shape().to_vec());
    let mut shape = vec![tensors.len()];
    shape.extend(&inner);
    let mut data = Vec::with_capacity(tensors.iter().map(Tensor::len).sum());
    for t in tensors {
        if t.shape() != inner.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: inner.clone(),
                actual: t.shape().to_vec(),
            });
        }
        data.extend_from_slice(t.data());
    }
    Tensor::new(shape, data)
}

fn unstack(t: Tensor) -> Result<Vec<Tensor>> {
    let shape = t.shape().to_vec();
    let Some((&n, inner)) = shape.split_first() else {
        return Err(Error::ShapeMismatch {
            expected: vec![0],
            actual: shape,
        });
    };
    let size: usize = inner.iter().product();
    (0..n).map(|i| Tensor::new(inner.to_vec(), t.data()[i * size..(i + 1) * size].to_vec())).collect()
}

fn to_i64(v: &[usize]) -> Vec<i64> {
    v.iter().map(|&x| x as i64).collect()
}

fn to_usize(v: &[i64], what: &str) -> Result<Vec<usize>> {
    v.iter()
        .map(|&x| usize::try_from(x).map_err(|_| Error::InvalidSpec(format!("negative {what} {x}"))))
        .collect()
}

fn dataset_seed(cfg: &RunConfig, id: &str) -> u64 {
    rng::derive(cfg.seed, stable_label(&format!("data/{id}")))
}

fn model_seed(cfg: &RunConfig, d: &str, a: &str) -> u64 {
    rng::derive(cfg.seed, stable_label(&format!("model/{d}/{a}")))
}

/// The method configuration for observation `i`: its seed mixes the run
/// seed, the method id, the configured seed and the observation index.
fn method_config(cfg: &RunConfig, method: &XaiConfig, i: usize) -> XaiConfig {
    let base = rng::derive(cfg.seed, stable_label(&format!("explain/{}", method.method_id())));
    XaiConfig {
        seed: rng::derive(rng::derive(base, method.seed), i as u64),
        ..method.clone()
    }
}

fn generate(cfg: &RunConfig, layout: &Layout, exec: Executor) -> Result<()> {
    let combos: Vec<(usize, usize)> = (0..cfg.datasets.len())
        .flat_map(|d| (0..cfg.architectures.len()).map(move |a| (d, a)))
        .collect();
    let mut train_sets = Vec::new();
    for spec in &cfg.datasets {
        let seed = dataset_seed(cfg, &spec.id);
        let train_set = SyntheticDataset::generate(spec.recipe, spec.n_train, rng::derive(seed, 1))?;
        let test = SyntheticDataset::generate(spec.recipe, cfg.n_obs, rng::derive(seed, 2))?;
        let dir = layout.data(&spec.id);
        let inputs: Vec<Tensor> = test.samples.iter().map(|s| s.data.clone()).collect();
        let labels: Vec<usize> = test.samples.iter().map(|s| s.label).collect();
        let pool: Vec<Tensor> = train_set.samples.iter().take(spec.pool_size.max(1)).map(|s| s.data.clone()).collect();
        write_array(&dir.join("inputs.npy"), &stack(&inputs)?)?;
        write_i64(&dir.join("labels.npy"), vec![labels.len()], to_i64(&labels))?;
        write_array(&dir.join("pool.npy"), &stack(&pool)?)?;
        train_sets.push(train_set);
    }
    let nets = exec.try_map_range(combos.len(), |k| {
        let (d, a) = combos[k];
        let (dspec, aspec) = (&cfg.datasets[d], &cfg.architectures[a]);
        let seed = model_seed(cfg, &dspec.id, &aspec.id);
        let net = aspec.build(dspec.recipe).build(seed)?;
        train(&net, &train_sets[d], &aspec.train_config(dspec.recipe, seed))
    })?;
    for (&(d, a), net) in combos.iter().zip(&nets) {
        let dir = layout.model(&cfg.datasets[d].id, &cfg.architectures[a].id);
        write_json(&dir.join("architecture.json"), &cfg.architectures[a].build(cfg.datasets[d].recipe))?;
        write_array(&dir.join("weights.npy"), &Tensor::from_vec(net.weights.clone()))?;
    }
    Ok(())
}

struct DatasetArtifacts {
    inputs: Vec<Tensor>,
    labels: Vec<usize>,
    pool: Vec<Tensor>,
}

fn load_dataset(cfg: &RunConfig, layout: &Layout, id: &str) -> Result<DatasetArtifacts> {
    let dir = layout.data(id);
    require(&dir.join("inputs.npy"), Stage::Generate)?;
    let inputs = unstack(read_array(&dir.join("inputs.npy"))?)?;
    let (_, labels) = read_i64(&dir.join("labels.npy"))?;
    let labels = to_usize(&labels, "label")?;
    if inputs.len() != cfg.n_obs || labels.len() != cfg.n_obs {
        return Err(Error::ShapeMismatch {
            expected: vec![cfg.n_obs],
            actual: vec![inputs.len(), labels.len()],
        });
    }
    for x in &inputs {
        cfg.modality.check_input_shape(x.shape())?;
    }
    Ok(DatasetArtifacts {
        inputs,
        labels,
        pool: unstack(read_array(&dir.join("pool.npy"))?)?,
    })
}

fn load_model(layout: &Layout, d: &str, a: &str) -> Result<Network> {
    let dir = layout.model(d, a);
    require(&dir.join("weights.npy"), Stage::Generate)?;
    let arch: crate::tinynet::Architecture = read_json(&dir.join("architecture.json"))?;
    let weights = read_array(&dir.join("weights.npy"))?.into_data();
    Network::with_weights(arch.input_shape, arch.layout, arch.layers, weights)
}

fn explain_stage(cfg: &RunConfig, layout: &Layout, exec: Executor) -> Result<()> {
    let root = layout.maps();
    let mut manifest = MapsManifest {
        n_obs: cfg.n_obs,
        maps: Vec::new(),
        targets: Vec::new(),
    };
    for dspec in &cfg.datasets {
        let data = load_dataset(cfg, layout, &dspec.id)?;
        for aspec in &cfg.architectures {
            let net = load_model(layout, &dspec.id, &aspec.id)?;
            let targets = data.inputs.iter().map(|x| net.predicted_class(x)).collect::<Result<Vec<_>>>()?;
            let rel = PathBuf::from(&dspec.id).join(&aspec.id);
            let target_path = rel.join("targets.npy");
            write_i64(&root.join(&target_path), vec![targets.len()], to_i64(&targets))?;
            manifest.targets.push(TargetEntry {
                dataset: dspec.id.clone(),
                architecture: aspec.id.clone(),
                path: target_path,
            });
            for method in &cfg.methods {
                let id = method.method_id();
                let maps = exec.try_map_range(cfg.n_obs, |i| {
                    explain(&net, &data.inputs[i], cfg.modality, targets[i], &method_config(cfg, method, i), &data.pool)
                        .map(|m| m.values)
                });
                let maps = match maps {
                    Ok(m) => m,
                    Err(e) => {
                        log::warn!("{}/{}/{id}: no saliency maps ({e})", dspec.id, aspec.id);
                        continue;
                    }
                };
                let path = rel.join(format!("{id}.npy"));
                write_array(&root.join(&path), &stack(&maps)?)?;
                manifest.maps.push(MapEntry {
                    dataset: dspec.id.clone(),
                    architecture: aspec.id.clone(),
                    method: id,
                    path,
                });
            }
        }
    }
    write_json(&root.join("manifest.json"), &manifest)
}

fn evaluate_stage(cfg: &RunConfig, layout: &Layout, exec: Executor) -> Result<()> {
    let maps_manifest_path = cfg.ingest.maps.clone().unwrap_or_else(|| layout.maps().join("manifest.json"));
    require(&maps_manifest_path, Stage::Explain)?;
    let maps_manifest: MapsManifest = read_json(&maps_manifest_path)?;
    let maps_root = maps_manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    if maps_manifest.n_obs != cfg.n_obs {
        return Err(Error::ShapeMismatch {
            expected: vec![cfg.n_obs],
            actual: vec![maps_manifest.n_obs],
        });
    }
    let metric_ids = cfg.metric_ids()?;
    let mut tensor = ScoreTensor::new(
        cfg.datasets.iter().map(|d| d.id.clone()).collect(),
        cfg.architectures.iter().map(|a| a.id.clone()).collect(),
        cfg.method_ids(),
        metric_ids.iter().map(|&m| m.into()).collect(),
        cfg.n_obs,
    );
    for (d, dspec) in cfg.datasets.iter().enumerate() {
        let data = load_dataset(cfg, layout, &dspec.id)?;
        for (a, aspec) in cfg.architectures.iter().enumerate() {
            let net = load_model(layout, &dspec.id, &aspec.id)?;
            let target_entry = maps_manifest
                .targets
                .iter()
                .find(|t| t.dataset == dspec.id && t.architecture == aspec.id)
                .ok_or_else(|| Error::MissingStageInput(format!("no targets for {}/{}", dspec.id, aspec.id)))?;
            let (_, targets) = read_i64(&maps_root.join(&target_entry.path))?;
            let targets = to_usize(&targets, "target")?;
            if targets.len() != cfg.n_obs {
                return Err(Error::ShapeMismatch {
                    expected: vec![cfg.n_obs],
                    actual: vec![targets.len()],
                });
            }
            for (f, method) in cfg.methods.iter().enumerate() {
                let id = method.method_id();
                let Some(entry) = maps_manifest
                    .maps
                    .iter()
                    .find(|m| m.dataset == dspec.id && m.architecture == aspec.id && m.method == id)
                else {
                    log::warn!("{}/{}/{id}: no saliency maps, scores stay missing", dspec.id, aspec.id);
                    continue;
                };
                let maps = unstack(read_array(&maps_root.join(&entry.path))?)?;
                if maps.len() != cfg.n_obs {
                    return Err(Error::ShapeMismatch {
                        expected: vec![cfg.n_obs],
                        actual: vec![maps.len()],
                    });
                }
                let explainers: Vec<MethodExplainer> = (0..cfg.n_obs)
                    .map(|i| MethodExplainer {
                        model: &net,
                        modality: cfg.modality,
                        target: targets[i],
                        cfg: method_config(cfg, method, i),
                        pool: &data.pool,
                    })
                    .collect();
                let batch: Vec<Observation> = (0..cfg.n_obs)
                    .map(|i| Observation {
                        model: &net as &dyn ModelOracle,
                        x: &data.inputs[i],
                        modality: cfg.modality,
                        map: &maps[i],
                        target: targets[i],
                        label: data.labels[i],
                        explainer: Some(&explainers[i] as &dyn Explain),
                    })
                    .collect();
                for (e, &metric) in metric_ids.iter().enumerate() {
                    let mut mcfg = cfg.metric_config.clone();
                    let label = stable_label(&format!("metric/{}/{}/{id}/{metric}", dspec.id, aspec.id));
                    mcfg.seed = rng::derive(rng::derive(cfg.seed, label), cfg.metric_config.seed);
                    match evaluate_batch(metric, &batch, &mcfg, exec) {
                        Ok(scores) => {
                            for (o, s) in scores.iter().enumerate() {
                                tensor.set(d, a, f, e, o, Some(s.value));
                            }
                        }
                        Err(err) => log::warn!("{}/{}/{id}/{metric}: {err}", dspec.id, aspec.id),
                    }
                }
            }
        }
    }
    write_scores(&layout.scores(), &tensor, cfg.modality.as_str())
}

/// Writes `scores.npy`, `mask.npy` and `manifest.json` into `dir`.
pub fn write_scores(dir: &Path, tensor: &ScoreTensor, modality: &str) -> Result<()> {
    let shape = tensor.shape().to_vec();
    let values: Vec<f64> = tensor.values().iter().map(|v| v.unwrap_or(0.0)).collect();
    let mask: Vec<i64> = tensor.values().iter().map(|v| v.is_some() as i64).collect();
    write_array(&dir.join("scores.npy"), &Tensor::new(shape.clone(), values)?)?;
    write_i64(&dir.join("mask.npy"), shape, mask)?;
    write_json(
        &dir.join("manifest.json"),
        &ScoreManifest {
            modality: modality.to_string(),
            datasets: tensor.datasets.clone(),
            architectures: tensor.architectures.clone(),
            methods: tensor.methods.clone(),
            metrics: tensor.metrics.clone(),
            n_obs: tensor.n_obs,
            values: "scores.npy".into(),
            mask: Some("mask.npy".into()),
        },
    )
}

/// Loads a score tensor from its manifest and checks the array shapes
/// against the axes.
pub fn read_scores(manifest_path: &Path) -> Result<(ScoreTensor, String)> {
    let m: ScoreManifest = read_json(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let values = read_array(&root.join(&m.values))?;
    let expected = vec![m.datasets.len(), m.architectures.len(), m.methods.len(), m.metrics.len(), m.n_obs];
    if values.shape() != expected.as_slice() {
        return Err(Error::ShapeMismatch {
            expected,
            actual: values.shape().to_vec(),
        });
    }
    let present = match &m.mask {
        Some(p) => {
            let (shape, mask) = read_i64(&root.join(p))?;
            if shape != expected {
                return Err(Error::ShapeMismatch { expected, actual: shape });
            }
            mask.into_iter().map(|v| v != 0).collect()
        }
        None => vec![true; values.len()],
    };
    let cells = values.data().iter().zip(&present).map(|(&v, &p)| p.then_some(v)).collect();
    let tensor = ScoreTensor::from_values(m.datasets, m.architectures, m.methods, m.metrics, m.n_obs, cells)?;
    Ok((tensor, m.modality))
}

fn load_scores(cfg: &RunConfig, layout: &Layout) -> Result<ScoreTensor> {
    let path = cfg.ingest.scores.clone().unwrap_or_else(|| layout.scores().join("manifest.json"));
    require(&path, Stage::Evaluate)?;
    let (tensor, modality) = read_scores(&path)?;
    if modality != cfg.modality.as_str() {
        return Err(Error::ModalityMismatch(format!("scores are for {modality}, run is {}", cfg.modality.as_str())));
    }
    Ok(tensor)
}

fn rank_stage(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let tensor = load_scores(cfg, layout)?.standardize_scores()?;
    let tables = equalize_architecture_rankings(&tensor, cfg.modality.as_str())?;
    let dir = layout.rankings();
    for t in &tables {
        write_text(&dir.join(format!("{}.csv", t.criterion.as_str())), &report::ranking_csv(t)?)?;
    }
    write_json(&dir.join("tables.json"), &tables)
}

fn load_tables(layout: &Layout) -> Result<Vec<RankingTable>> {
    let path = layout.rankings().join("tables.json");
    require(&path, Stage::Rank)?;
    read_json(&path)
}

fn meta_stage(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let tables = load_tables(layout)?;
    let tensor = load_scores(cfg, layout)?;
    let cube = RankHypercube::from_complete_methods(&tensor, cfg.modality.as_str())?;
    let meta = meta_stats(&cube, &tables, &cfg.meta)?;
    let dir = layout.meta();
    write_json(&dir.join("meta.json"), &meta)?;
    for (name, text) in report::meta_csvs(&meta)? {
        write_text(&dir.join(name), &text)?;
    }
    Ok(())
}

fn report_stage(_cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let tables = load_tables(layout)?;
    let meta_path = layout.meta().join("meta.json");
    let meta: Option<MetaStatsResult> = if meta_path.exists() { Some(read_json(&meta_path)?) } else { None };
    let dir = layout.report();
    for t in &tables {
        write_text(&dir.join(format!("ranking_{}.csv", t.criterion.as_str())), &report::ranking_csv(t)?)?;
    }
    if let Some(m) = &meta {
        for (name, text) in report::meta_csvs(m)? {
            write_text(&dir.join(format!("meta_{name}")), &text)?;
        }
    }
    write_text(&dir.join("report.txt"), &report::render_text(&tables, meta.as_ref()))
}

/// Ranking tables of a finished run, in criterion order.
pub fn read_rankings(output_dir: &Path) -> Result<Vec<RankingTable>> {
    load_tables(&Layout {
        root: output_dir.to_path_buf(),
    })
}
