//! Branch execution: stage assembly, per-collection caching, parallel
//! dispatch and the on-disk LogDir tree.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use dashmap::DashMap;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{split_train_test, ImputeParams, TabularDataset};
use crate::error::{Error, Result};
use crate::metrics::{score_binary, MetricReport, METRIC_NAMES};
use crate::models::{classify, train, ModelKind, ModelSpec};
use crate::search_space::{
    branch_id, data_collection_key, enumerate_branches, format_fraction, group_by_collection,
    logdir_path, Augmentation, FeatureCount, FsMethod, Imbalance, PipelineConfig, ScalerKind,
    SearchSpaceSpec,
};
use crate::transform::{self, ClassProvenance, TransformSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "test")]
    Test,
}

/// One data-side step of a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Impute,
    Select { method: FsMethod, k: FeatureCount },
    Scale(ScalerKind),
    Augment(Augmentation),
    Rebalance(Imbalance),
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Impute => "impute",
            Stage::Select { .. } => "select_features",
            Stage::Scale(_) => "scaler",
            Stage::Augment(_) => "augmentation",
            Stage::Rebalance(_) => "imbalance",
        }
    }

    pub fn method(&self) -> String {
        match self {
            Stage::Impute => "mean".to_string(),
            Stage::Select { method, k } => format!("{method}:{k}"),
            Stage::Scale(s) => s.to_string(),
            Stage::Augment(a) => a.to_string(),
            Stage::Rebalance(i) => i.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelinePlan {
    pub train: Vec<Stage>,
    pub test: Vec<Stage>,
}

pub fn assemble_pipeline(config: &PipelineConfig) -> PipelinePlan {
    let select = Stage::Select {
        method: config.fs_method,
        k: config.k,
    };
    let scale = Stage::Scale(config.scaler);
    let mut train = vec![Stage::Impute, select];
    if config.norm_first {
        train.push(scale);
    }
    train.push(Stage::Augment(config.augmentation));
    train.push(Stage::Rebalance(config.imbalance));
    if !config.norm_first {
        train.push(scale);
    }
    PipelinePlan {
        train,
        test: vec![Stage::Impute, select, scale],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub side: Side,
    pub stage: String,
    pub method: String,
    pub input_shape: [usize; 2],
    pub output_shape: [usize; 2],
}

/// A split after every data-side stage: the unit shared by all branches
/// of one data collection.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedSplit {
    pub train_x: Array2<f64>,
    pub train_y: Vec<u8>,
    pub test_x: Array2<f64>,
    pub test_y: Vec<u8>,
    pub selected_features: Vec<String>,
    pub trace: Vec<StageTrace>,
    pub resampling: Option<[ClassProvenance; 2]>,
}

/// Shared settings for every branch of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecContext {
    pub transform: TransformSettings,
    pub model_specs: BTreeMap<ModelKind, ModelSpec>,
}

impl Default for ExecContext {
    fn default() -> Self {
        Self {
            transform: TransformSettings::default(),
            model_specs: ModelKind::ALL
                .iter()
                .map(|k| (*k, ModelSpec::new(*k)))
                .collect(),
        }
    }
}

impl ExecContext {
    fn spec(&self, kind: ModelKind) -> ModelSpec {
        self.model_specs
            .get(&kind)
            .cloned()
            .unwrap_or_else(|| ModelSpec::new(kind))
    }
}

fn shape(x: &Array2<f64>) -> [usize; 2] {
    [x.nrows(), x.ncols()]
}

/// Runs the data side of a pipeline: split, fit every stage on training
/// rows, and carry the fitted parameters over to the test rows.
pub fn process_split(
    config: &PipelineConfig,
    dataset: &TabularDataset,
    ctx: &ExecContext,
) -> Result<ProcessedSplit> {
    let plan = assemble_pipeline(config);
    let split = split_train_test(dataset, config.split_ratio, config.seed)?;
    let mut trace = Vec::new();
    let mut train_x = split.train.features.clone();
    let mut train_y = split.train.labels.clone();
    let mut test_x = split.test.features.clone();
    let test_y = split.test.labels.clone();
    let mut selected_features = Vec::new();
    let mut resampling = None;
    let mut scaler = None;
    let mut impute = None;
    let mut projection: Option<Vec<usize>> = None;

    for stage in &plan.train {
        let before = shape(&train_x);
        match *stage {
            Stage::Impute => {
                let p = ImputeParams::fit(&split.train, &dataset.invalid_zero_flags)?;
                train_x = p.apply(&split.train)?.features;
                impute = Some(p);
            }
            Stage::Select { method, k } => {
                let k = match k {
                    FeatureCount::Top(k) => k,
                    FeatureCount::All => train_x.ncols(),
                };
                let ranking = transform::select_features(
                    train_x.view(),
                    &train_y,
                    method,
                    k,
                    ctx.transform.ig_bins,
                )?;
                selected_features = ranking
                    .selected
                    .iter()
                    .map(|&j| dataset.column_names[j].clone())
                    .collect();
                let cols = ranking.projection();
                train_x = train_x.select(ndarray::Axis(1), &cols);
                projection = Some(cols);
            }
            Stage::Scale(kind) => {
                let p = transform::fit_scaler(train_x.view(), kind);
                train_x = transform::apply_scaler(&p, train_x.view())?;
                scaler = Some(p);
            }
            Stage::Augment(aug) => {
                let r = match aug {
                    Augmentation::NoAug => None,
                    Augmentation::GaussianNoise => Some(transform::gaussian_noise(
                        train_x.view(),
                        &train_y,
                        ctx.transform.noise_scale,
                        config.seed,
                    )?),
                    Augmentation::Mixup => Some(transform::mixup(
                        train_x.view(),
                        &train_y,
                        ctx.transform.mixup_alpha,
                        config.seed,
                    )?),
                };
                if let Some(r) = r {
                    train_x = r.features;
                    train_y = r.labels;
                }
            }
            Stage::Rebalance(imb) => {
                let (x, y) = (train_x.view(), train_y.as_slice());
                let seed = config.seed;
                let r = match imb {
                    Imbalance::NoImbl => None,
                    Imbalance::Smote => Some(transform::smote(x, y, ctx.transform.smote_k, seed)?),
                    Imbalance::Adasyn => {
                        Some(transform::adasyn(x, y, ctx.transform.adasyn_k, seed)?)
                    }
                    Imbalance::RandomUnderSampler => {
                        Some(transform::random_undersample(x, y, seed)?)
                    }
                    Imbalance::TomekLinks => Some(transform::tomek_links(x, y)?),
                };
                if let Some(r) = r {
                    train_x = r.features;
                    train_y = r.labels;
                    resampling = Some(r.provenance);
                }
            }
        }
        trace.push(StageTrace {
            side: Side::Train,
            stage: stage.name().to_string(),
            method: stage.method(),
            input_shape: before,
            output_shape: shape(&train_x),
        });
    }

    for stage in &plan.test {
        let before = shape(&test_x);
        match stage {
            Stage::Impute => {
                let p = impute.as_ref().expect("impute fitted on train");
                test_x = p.apply(&split.test)?.features;
            }
            Stage::Select { .. } => {
                let cols = projection.as_ref().expect("selection fitted on train");
                test_x = test_x.select(ndarray::Axis(1), cols);
            }
            Stage::Scale(_) => {
                let p = scaler.as_ref().expect("scaler fitted on train");
                test_x = transform::apply_scaler(p, test_x.view())?;
            }
            Stage::Augment(_) | Stage::Rebalance(_) => unreachable!("test side never resamples"),
        }
        trace.push(StageTrace {
            side: Side::Test,
            stage: stage.name().to_string(),
            method: stage.method(),
            input_shape: before,
            output_shape: shape(&test_x),
        });
    }

    Ok(ProcessedSplit {
        train_x,
        train_y,
        test_x,
        test_y,
        selected_features,
        trace,
        resampling,
    })
}

type Shared<T> = Arc<std::result::Result<T, String>>;

/// In-memory cache of processed splits keyed by data-collection key, and of
/// test-set probabilities keyed by (data-collection key, model). Inserts are
/// idempotent: concurrent first writers compute identical values and the
/// first insert wins.
#[derive(Default)]
pub struct BranchCache {
    data: DashMap<String, Shared<ProcessedSplit>>,
    probs: DashMap<(String, ModelKind), Shared<Vec<f64>>>,
}

impl BranchCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn data(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<ProcessedSplit>,
    ) -> Shared<ProcessedSplit> {
        if let Some(v) = self.data.get(key) {
            return v.clone();
        }
        let v = Arc::new(compute().map_err(|e| e.to_string()));
        self.data.entry(key.to_string()).or_insert(v).clone()
    }

    fn probs(
        &self,
        key: &str,
        model: ModelKind,
        compute: impl FnOnce() -> Result<Vec<f64>>,
    ) -> Shared<Vec<f64>> {
        let k = (key.to_string(), model);
        if let Some(v) = self.probs.get(&k) {
            return v.clone();
        }
        let v = Arc::new(compute().map_err(|e| e.to_string()));
        self.probs.entry(k).or_insert(v).clone()
    }

    pub fn evict(&self, key: &str) {
        self.data.remove(key);
        self.probs.retain(|(k, _), _| k != key);
    }
}

/// Everything logged about one branch. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub run_id: String,
    pub branch_id: String,
    pub logdir: String,
    pub config: PipelineConfig,
    pub status: BranchStatus,
    pub error: Option<String>,
    pub metrics: Option<MetricReport>,
    pub stage_trace: Vec<StageTrace>,
    pub selected_features: Vec<String>,
    pub resampling: Option<[ClassProvenance; 2]>,
    pub test_labels: Vec<u8>,
    pub test_probabilities: Vec<f64>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchStatus {
    Ok,
    Failed,
}

impl BranchRecord {
    /// Equality ignoring wall time.
    pub fn same_result(&self, other: &BranchRecord) -> bool {
        let mut a = self.clone();
        a.wall_time_ms = other.wall_time_ms;
        a == *other
    }

    pub fn is_ok(&self) -> bool {
        self.status == BranchStatus::Ok
    }
}

/// Runs one branch. Stage and model errors become a failed record.
pub fn run_branch(
    run_id: &str,
    config: &PipelineConfig,
    dataset: &TabularDataset,
    ctx: &ExecContext,
    cache: Option<&BranchCache>,
) -> BranchRecord {
    let start = Instant::now();
    let key = data_collection_key(config);
    let local;
    let cache = match cache {
        Some(c) => c,
        None => {
            local = BranchCache::new();
            &local
        }
    };
    let data = cache.data(&key, || process_split(config, dataset, ctx));
    let mut record = BranchRecord {
        run_id: run_id.to_string(),
        branch_id: branch_id(config),
        logdir: logdir_path(config),
        config: config.clone(),
        status: BranchStatus::Failed,
        error: None,
        metrics: None,
        stage_trace: Vec::new(),
        selected_features: Vec::new(),
        resampling: None,
        test_labels: Vec::new(),
        test_probabilities: Vec::new(),
        wall_time_ms: 0.0,
    };
    let outcome = match data.as_ref() {
        Err(e) => Err(e.clone()),
        Ok(split) => {
            record.stage_trace = split.trace.clone();
            record.selected_features = split.selected_features.clone();
            record.resampling = split.resampling;
            record.test_labels = split.test_y.clone();
            let probs = cache.probs(&key, config.model, || {
                let model = train(
                    &ctx.spec(config.model),
                    split.train_x.view(),
                    &split.train_y,
                    config.seed,
                )?;
                model.predict_proba(split.test_x.view())
            });
            match probs.as_ref() {
                Err(e) => Err(e.clone()),
                Ok(p) => {
                    record.test_probabilities = p.clone();
                    let pred = classify(p, config.prob_threshold);
                    score_binary(&split.test_y, &pred).map_err(|e| e.to_string())
                }
            }
        }
    };
    match outcome {
        Ok(m) => {
            record.status = BranchStatus::Ok;
            record.metrics = Some(m);
        }
        Err(e) => record.error = Some(e),
    }
    record.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    record
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

/// Executes branches in memory with up to `workers` concurrent collection
/// groups; `sink` sees every record as it completes. Output is in input
/// order regardless of schedule.
pub fn execute_branches(
    run_id: &str,
    configs: &[PipelineConfig],
    dataset: &TabularDataset,
    ctx: &ExecContext,
    workers: usize,
    sink: &(dyn Fn(&BranchRecord) -> Result<()> + Sync),
) -> Result<Vec<BranchRecord>> {
    let groups = group_by_collection(configs);
    let cache = BranchCache::new();
    let done: Vec<Vec<(usize, BranchRecord)>> = pool(workers)?.install(|| {
        groups
            .par_iter()
            .map(|(key, members)| {
                let mut out = Vec::with_capacity(members.len());
                for &i in members {
                    let r = run_branch(run_id, &configs[i], dataset, ctx, Some(&cache));
                    sink(&r)?;
                    out.push((i, r));
                }
                cache.evict(key);
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut slots: Vec<Option<BranchRecord>> = vec![None; configs.len()];
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    Ok(slots
        .into_iter()
        .map(|r| r.expect("every branch ran"))
        .collect())
}

pub fn record_file_name(branch_id: &str) -> String {
    let digest = Sha256::digest(branch_id.as_bytes());
    format!("branch-{}.json", &hex::encode(digest)[..16])
}

pub fn record_path(run_dir: &Path, record: &BranchRecord) -> PathBuf {
    run_dir
        .join(&record.logdir)
        .join(record_file_name(&record.branch_id))
}

/// Write-then-rename so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_record(path: &Path) -> Result<BranchRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub const CONFIG_COLUMNS: [&str; 13] = [
    "RunID",
    "BranchID",
    "LogDir",
    "Features",
    "FSMethod",
    "Scaler",
    "NormFirst",
    "AugMethod",
    "ImblMethod",
    "Model",
    "SplitRatio",
    "ProbThreshold",
    "Seed",
];

pub fn merged_header() -> Vec<&'static str> {
    CONFIG_COLUMNS
        .iter()
        .chain(METRIC_NAMES.iter())
        .copied()
        .collect()
}

/// Config cells of a merged-CSV row, in `CONFIG_COLUMNS` order.
pub fn config_cells(run_id: &str, config: &PipelineConfig) -> Vec<String> {
    vec![
        run_id.to_string(),
        branch_id(config),
        logdir_path(config),
        config.k.to_string(),
        config.fs_method.to_string(),
        config.scaler.to_string(),
        config.norm_first.to_string(),
        config.augmentation.to_string(),
        config.imbalance.to_string(),
        config.model.id().to_string(),
        format_fraction(config.split_ratio),
        format_fraction(config.prob_threshold),
        config.seed.to_string(),
    ]
}

/// Successful records as CSV, sorted by branch id. Wall time is excluded.
pub fn merged_csv(records: &[BranchRecord]) -> Result<Vec<u8>> {
    let mut ok: Vec<&BranchRecord> = records.iter().filter(|r| r.is_ok()).collect();
    ok.sort_by(|a, b| (&a.run_id, &a.branch_id).cmp(&(&b.run_id, &b.branch_id)));
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
    w.write_record(merged_header()).map_err(csv_err)?;
    for r in ok {
        let mut row = config_cells(&r.run_id, &r.config);
        let m = r.metrics.as_ref().expect("ok record has metrics");
        row.extend(m.values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchFailure {
    pub branch_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub branch_count: usize,
    pub reused: usize,
    pub failures: Vec<BranchFailure>,
    pub merged_csv: PathBuf,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExistingRun {
    /// Refuse to touch an existing run directory.
    #[default]
    Refuse,
    /// Delete it and start over.
    Overwrite,
    /// Keep valid records and run only the missing branches.
    Resume,
}

pub const MERGED_CSV: &str = "merged.csv";
pub const FAILURES_CSV: &str = "failures.csv";

pub fn run_dir(log_root: &Path, run_id: &str) -> PathBuf {
    log_root.join(run_id)
}

/// Executes every enumerated branch and writes the LogDir tree plus the
/// merged CSV under `<log_root>/<run_id>`.
pub fn run_all(
    spec: &SearchSpaceSpec,
    dataset: &TabularDataset,
    ctx: &ExecContext,
    run_id: &str,
    log_root: &Path,
    workers: usize,
    existing: ExistingRun,
) -> Result<RunSummary> {
    let start = Instant::now();
    crate::config::validate_run_id(run_id)?;
    spec.validate_for_features(dataset.n_features())?;
    ctx.transform.validate()?;
    for s in ctx.model_specs.values() {
        s.validate()?;
    }
    let configs = enumerate_branches(spec)?;
    let dir = run_dir(log_root, run_id);
    if dir.exists() {
        match existing {
            ExistingRun::Refuse => return Err(Error::RunExists(run_id.to_string())),
            ExistingRun::Overwrite => fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?,
            ExistingRun::Resume => {}
        }
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let mut reused = Vec::new();
    let mut todo = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        let id = branch_id(c);
        let path = dir.join(logdir_path(c)).join(record_file_name(&id));
        let prior = (existing == ExistingRun::Resume && path.exists())
            .then(|| read_record(&path).ok())
            .flatten()
            .filter(|r| r.branch_id == id && r.run_id == run_id && r.config == *c && r.is_ok());
        match prior {
            Some(r) => reused.push((i, r)),
            None => todo.push(i),
        }
    }
    let pending: Vec<PipelineConfig> = todo.iter().map(|&i| configs[i].clone()).collect();
    let write = |r: &BranchRecord| -> Result<()> {
        let bytes = serde_json::to_vec_pretty(r).map_err(|e| Error::Data(e.to_string()))?;
        write_atomic(&record_path(&dir, r), &bytes)
    };
    let fresh = execute_branches(run_id, &pending, dataset, ctx, workers, &write)?;

    let mut all: Vec<Option<BranchRecord>> = vec![None; configs.len()];
    for (i, r) in reused.iter() {
        all[*i] = Some(r.clone());
    }
    for (i, r) in todo.iter().zip(fresh) {
        all[*i] = Some(r);
    }
    let records: Vec<BranchRecord> = all.into_iter().map(|r| r.expect("complete")).collect();

    let merged = dir.join(MERGED_CSV);
    write_atomic(&merged, &merged_csv(&records)?)?;
    let mut failures: Vec<BranchFailure> = records
        .iter()
        .filter(|r| !r.is_ok())
        .map(|r| BranchFailure {
            branch_id: r.branch_id.clone(),
            error: r.error.clone().unwrap_or_default(),
        })
        .collect();
    failures.sort_by(|a, b| a.branch_id.cmp(&b.branch_id));
    let mut text = String::from("BranchID,Error\n");
    for f in &failures {
        let _ = writeln!(text, "{},\"{}\"", f.branch_id, f.error.replace('"', "\"\""));
    }
    write_atomic(&dir.join(FAILURES_CSV), text.as_bytes())?;

    Ok(RunSummary {
        run_id: run_id.to_string(),
        branch_count: records.len(),
        reused: reused.len(),
        failures,
        merged_csv: merged,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
