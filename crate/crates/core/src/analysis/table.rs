use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::executor::{config_cells, merged_header, read_record, BranchRecord};
use crate::ident::string_enum;
use crate::metrics::{metric_index, METRIC_NAMES};
use crate::search_space::{branch_id, format_fraction, logdir_path, PipelineConfig};

string_enum! {
    /// A configuration column of the merged table.
    pub enum Component {
        Features => "Features",
        FsMethod => "FSMethod",
        Scaler => "Scaler",
        NormFirst => "NormFirst",
        AugMethod => "AugMethod",
        ImblMethod => "ImblMethod",
        Model => "Model",
        SplitRatio => "SplitRatio",
        ProbThreshold => "ProbThreshold",
        Seed => "Seed",
    }
}

impl Component {
    /// The pipeline dimensions proper; the seed is a replicate index.
    pub const PIPELINE: [Component; 9] = [
        Component::Features,
        Component::FsMethod,
        Component::Scaler,
        Component::NormFirst,
        Component::AugMethod,
        Component::ImblMethod,
        Component::Model,
        Component::SplitRatio,
        Component::ProbThreshold,
    ];

    pub fn value(self, c: &PipelineConfig) -> String {
        match self {
            Component::Features => c.k.to_string(),
            Component::FsMethod => c.fs_method.to_string(),
            Component::Scaler => c.scaler.to_string(),
            Component::NormFirst => c.norm_first.to_string(),
            Component::AugMethod => c.augmentation.to_string(),
            Component::ImblMethod => c.imbalance.to_string(),
            Component::Model => c.model.id().to_string(),
            Component::SplitRatio => format_fraction(c.split_ratio),
            Component::ProbThreshold => format_fraction(c.prob_threshold),
            Component::Seed => c.seed.to_string(),
        }
    }
}

/// Orders cell values numerically when both parse as numbers, otherwise
/// numbers before text and text lexically.
pub fn value_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub run_id: String,
    pub branch_id: String,
    pub logdir: String,
    pub config: PipelineConfig,
    /// In `METRIC_NAMES` order.
    pub metrics: [f64; 13],
}

impl TableRow {
    pub fn metric(&self, idx: usize) -> f64 {
        self.metrics[idx]
    }
}

/// One row per successful branch, ordered by (RunID, BranchID).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergedTable {
    pub rows: Vec<TableRow>,
    pub run_ids: Vec<String>,
}

pub(crate) fn metric_idx(name: &str) -> Result<usize> {
    metric_index(name).ok_or_else(|| {
        Error::Analysis(format!(
            "unknown metric `{name}` (expected one of: {})",
            METRIC_NAMES.join(", ")
        ))
    })
}

impl MergedTable {
    pub fn from_records(records: &[BranchRecord]) -> Result<Self> {
        let mut rows = Vec::new();
        for r in records.iter().filter(|r| r.is_ok()) {
            let m = r.metrics.as_ref().expect("ok record has metrics");
            rows.push(TableRow {
                run_id: r.run_id.clone(),
                branch_id: r.branch_id.clone(),
                logdir: r.logdir.clone(),
                config: r.config.clone(),
                metrics: m.values(),
            });
        }
        Self::from_rows(rows)
    }

    pub fn from_rows(mut rows: Vec<TableRow>) -> Result<Self> {
        rows.sort_by(|a, b| (&a.run_id, &a.branch_id).cmp(&(&b.run_id, &b.branch_id)));
        for w in rows.windows(2) {
            if w[0].run_id == w[1].run_id && w[0].branch_id == w[1].branch_id {
                return Err(Error::Analysis(format!(
                    "duplicate branch `{}` in run `{}`",
                    w[0].branch_id, w[0].run_id
                )));
            }
        }
        for r in &rows {
            if r.metrics.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Analysis(format!(
                    "metric outside [0, 1] in branch `{}`",
                    r.branch_id
                )));
            }
        }
        let run_ids: BTreeSet<String> = rows.iter().map(|r| r.run_id.clone()).collect();
        Ok(MergedTable {
            rows,
            run_ids: run_ids.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, metric: &str) -> Result<Vec<f64>> {
        let i = metric_idx(metric)?;
        Ok(self.rows.iter().map(|r| r.metrics[i]).collect())
    }

    /// Rows whose config satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(&TableRow) -> bool) -> MergedTable {
        let rows: Vec<TableRow> = self.rows.iter().filter(|r| keep(r)).cloned().collect();
        let run_ids: BTreeSet<String> = rows.iter().map(|r| r.run_id.clone()).collect();
        MergedTable {
            rows,
            run_ids: run_ids.into_iter().collect(),
        }
    }

    /// Distinct values of a component in `value_order`.
    pub fn values_of(&self, component: Component) -> Vec<String> {
        let mut v: Vec<String> = self
            .rows
            .iter()
            .map(|r| component.value(&r.config))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        v.sort_by(|a, b| value_order(a, b));
        v
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(merged_header()).map_err(csv_err)?;
        for r in &self.rows {
            let mut row = config_cells(&r.run_id, &r.config);
            row.extend(r.metrics.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| Error::Analysis(format!("csv: {e}")))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Analysis(format!("csv: {e}"))
}

fn branch_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            branch_files(&p, out)?;
        } else if p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("branch-") && n.ends_with(".json"))
        {
            out.push(p);
        }
    }
    Ok(())
}

/// Run directories under the log root, sorted.
pub fn list_runs(log_root: &Path) -> Result<Vec<String>> {
    let mut runs = Vec::new();
    for e in fs::read_dir(log_root).map_err(|e| Error::io(log_root, e))? {
        let e = e.map_err(|err| Error::io(log_root, err))?;
        if e.path().is_dir() {
            if let Some(name) = e.file_name().to_str() {
                if name != "analysis" && !name.starts_with('.') {
                    runs.push(name.to_string());
                }
            }
        }
    }
    runs.sort();
    Ok(runs)
}

fn check_record(path: &Path, run_dir: &Path, run_id: &str, r: &BranchRecord) -> Result<()> {
    let bad = |message: String| Error::MalformedRecord {
        path: path.to_path_buf(),
        message,
    };
    if r.run_id != run_id {
        return Err(bad(format!(
            "run id `{}` inside run directory `{run_id}`",
            r.run_id
        )));
    }
    if r.branch_id != branch_id(&r.config) || r.logdir != logdir_path(&r.config) {
        return Err(bad(
            "branch id or LogDir does not match the config echo".into()
        ));
    }
    if path.parent() != Some(run_dir.join(&r.logdir).as_path()) {
        return Err(bad("record is not under its LogDir".into()));
    }
    if r.is_ok() && r.metrics.is_none() {
        return Err(bad("successful record without metrics".into()));
    }
    Ok(())
}

/// Reads branch records of the selected runs (all runs when `run_ids` is
/// `None`). Malformed records are errors unless `lenient`, which skips them
/// with a warning. Failed branches are not table rows.
pub fn merge_logs(
    log_root: &Path,
    run_ids: Option<&[String]>,
    lenient: bool,
) -> Result<MergedTable> {
    let available = list_runs(log_root)?;
    let selected: Vec<String> = match run_ids {
        Some(ids) => {
            for id in ids {
                if !available.contains(id) {
                    return Err(Error::UnknownRun(id.clone()));
                }
            }
            let set: BTreeSet<&String> = ids.iter().collect();
            set.into_iter().cloned().collect()
        }
        None => available,
    };
    if selected.is_empty() {
        return Err(Error::Analysis(format!(
            "no runs under {}",
            log_root.display()
        )));
    }
    let mut records = Vec::new();
    for run in &selected {
        let dir = log_root.join(run);
        let mut files = Vec::new();
        branch_files(&dir, &mut files)?;
        for f in files {
            let parsed = read_record(&f).and_then(|r| check_record(&f, &dir, run, &r).map(|_| r));
            match parsed {
                Ok(r) => records.push(r),
                Err(e @ Error::MalformedRecord { .. }) if lenient => log::warn!("skipping {e}"),
                Err(e) => return Err(e),
            }
        }
    }
    let mut table = MergedTable::from_records(&records)?;
    if table.is_empty() {
        return Err(Error::Analysis(
            "selected runs contain no successful branches".into(),
        ));
    }
    table.run_ids = selected;
    Ok(table)
}
