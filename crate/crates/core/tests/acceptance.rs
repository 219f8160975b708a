//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use branchwise::analysis::{
    critical_difference, cross_seed_summary, friedman_test, rf_importance, rms_value_similarity,
    seed_blocks, wilcoxon_signed_rank, Component, ImportanceLevel, MergedTable, TableRow,
};
use branchwise::dataset::{load_dataset, Schema, TabularDataset};
use branchwise::executor::{execute_branches, run_all, BranchRecord, ExecContext, ExistingRun};
use branchwise::metrics::{metric_index, METRIC_NAMES};
use branchwise::models::ModelKind;
use branchwise::search_space::{
    branch_id, enumerate_branches, group_by_collection, logdir_path, Augmentation, FeatureCount,
    FsMethod, Imbalance, PipelineConfig, ScalerKind, SearchSpaceSpec,
};
use branchwise::transform::{adasyn, random_undersample, smote, tomek_links, tomek_pairs};
use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const IDENTITY_TOL: f64 = 1e-12;
const C1_TIME_LIMIT_S: f64 = 1.0;
const C2_TIME_LIMIT_S: f64 = 120.0;
const C3_MIN_WEIGHTED_F1: f64 = 0.78;
const C3_MIN_MACRO_F1: f64 = 0.75;
const C3_TIME_LIMIT_S: f64 = 900.0;
const C4_MIN_WEIGHTED_F1: f64 = 0.88;
const C4_MAX_MACRO_F1: f64 = 0.80;
const C4_PRIOR: f64 = 0.951;
const C4_PRIOR_TOL: f64 = 0.005;
const C4_TIME_LIMIT_S: f64 = 1200.0;
const C6_MIN_IMPORTANCE: f64 = 0.8;
const C6_SUM_TOL: f64 = 1e-9;
const C6_TIME_LIMIT_S: f64 = 10.0;
const C7_CHI2_TOL: f64 = 1e-9;
const C7_P_TOL: f64 = 1e-9;
const C7_CD_TARGET: f64 = 2.513;
const C7_CD_TOL: f64 = 0.01;
const C7_CD_REPORTED: f64 = 2.53;
const C7_CD_REL_TOL: f64 = 0.01;
const C9_ALPHA: f64 = 0.05;
const DESK_SEEDS: [u64; 9] = [7, 126, 1919, 42, 2024, 1, 2, 3, 4];

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn pima() -> &'static TabularDataset {
    static DS: OnceLock<TabularDataset> = OnceLock::new();
    DS.get_or_init(|| {
        load_dataset(data_dir().join("diabetes.csv"), Schema::Pima).expect("pima csv")
    })
}

fn metric(name: &str) -> usize {
    metric_index(name).expect("known metric")
}

fn desk_spec(seeds: &[u64]) -> SearchSpaceSpec {
    SearchSpaceSpec {
        feature_selection_methods: vec![
            FsMethod::InfGain,
            FsMethod::BiMaxInfGain,
            FsMethod::BiMeanInfGain,
            FsMethod::NoSelect,
        ],
        feature_counts: vec![FeatureCount::Top(4), FeatureCount::Top(6)],
        scalers: vec![ScalerKind::Standard, ScalerKind::MinMax],
        norm_first: vec![true, false],
        augmentations: vec![
            Augmentation::NoAug,
            Augmentation::GaussianNoise,
            Augmentation::Mixup,
        ],
        imbalance_methods: vec![
            Imbalance::NoImbl,
            Imbalance::Smote,
            Imbalance::Adasyn,
            Imbalance::RandomUnderSampler,
            Imbalance::TomekLinks,
        ],
        models: ModelKind::ALL.to_vec(),
        split_ratios: vec![0.1],
        prob_thresholds: vec![0.35, 0.5],
        seeds: seeds.to_vec(),
    }
}

struct DeskGrid {
    records: Vec<BranchRecord>,
    table: MergedTable,
    seconds_per_seed: f64,
}

/// The nine-seed Pima desk grid, executed once in memory and shared.
fn desk_grid() -> Result<&'static DeskGrid, String> {
    static GRID: OnceLock<Result<DeskGrid, String>> = OnceLock::new();
    GRID.get_or_init(|| {
        let start = Instant::now();
        let configs = enumerate_branches(&desk_spec(&DESK_SEEDS)).map_err(|e| e.to_string())?;
        let records = execute_branches(
            "desk",
            &configs,
            pima(),
            &ExecContext::default(),
            1,
            &|_| Ok(()),
        )
        .map_err(|e| e.to_string())?;
        let table = MergedTable::from_records(&records).map_err(|e| e.to_string())?;
        Ok(DeskGrid {
            records,
            table,
            seconds_per_seed: start.elapsed().as_secs_f64() / DESK_SEEDS.len() as f64,
        })
    })
    .as_ref()
    .map_err(|e| e.clone())
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn identity_violations(records: &[BranchRecord]) -> usize {
    let ids = [
        "Micro_Precision",
        "Micro_Recall",
        "Micro_F1",
        "Accuracy",
        "Weighted_Recall",
    ];
    records
        .iter()
        .filter_map(|r| r.metrics.as_ref())
        .filter(|m| {
            let v = m.values();
            let first = v[metric(ids[0])];
            ids.iter()
                .any(|n| (v[metric(n)] - first).abs() > IDENTITY_TOL)
        })
        .count()
}

fn criterion_1() -> Outcome {
    let spec = SearchSpaceSpec {
        feature_selection_methods: vec![FsMethod::BiMaxInfGain, FsMethod::NoSelect],
        feature_counts: vec![FeatureCount::Top(4)],
        scalers: vec![ScalerKind::Standard, ScalerKind::MinMax],
        norm_first: vec![true, false],
        augmentations: vec![Augmentation::NoAug, Augmentation::GaussianNoise],
        imbalance_methods: vec![Imbalance::NoImbl, Imbalance::Smote, Imbalance::TomekLinks],
        models: vec![ModelKind::Lr, ModelKind::Dt],
        split_ratios: vec![0.1],
        prob_thresholds: vec![0.5],
        seeds: vec![7],
    };
    let start = Instant::now();
    let configs = enumerate_branches(&spec).map_err(|e| e.to_string())?;
    let records = execute_branches("c1", &configs, pima(), &ExecContext::default(), 1, &|_| {
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    let bad = identity_violations(&records);
    let secs = start.elapsed().as_secs_f64();
    let ok = records.iter().filter(|r| r.is_ok()).count();
    check(
        ok == records.len(),
        format!(
            "{} of {} branches failed",
            records.len() - ok,
            records.len()
        ),
    )?;
    check(
        bad == 0,
        format!("{bad} of {} records violate the identity", records.len()),
    )?;
    check(
        secs < C1_TIME_LIMIT_S,
        format!("{} branches took {secs:.2}s", records.len()),
    )?;
    let desk = desk_grid()?;
    let desk_bad = identity_violations(&desk.records);
    check(
        desk_bad == 0,
        format!("{desk_bad} desk-grid records violate the identity"),
    )?;
    Ok(format!(
        "{} branches in {secs:.2}s and {} desk-grid records, max deviation <= {IDENTITY_TOL:e}",
        records.len(),
        desk.records.len()
    ))
}

fn criterion_2() -> Outcome {
    let spec = SearchSpaceSpec {
        feature_selection_methods: vec![FsMethod::InfGain, FsMethod::BiMaxInfGain],
        feature_counts: vec![FeatureCount::Top(4), FeatureCount::Top(6)],
        scalers: vec![ScalerKind::Standard, ScalerKind::MinMax],
        norm_first: vec![true],
        augmentations: vec![
            Augmentation::NoAug,
            Augmentation::GaussianNoise,
            Augmentation::Mixup,
        ],
        imbalance_methods: vec![
            Imbalance::NoImbl,
            Imbalance::Smote,
            Imbalance::Adasyn,
            Imbalance::RandomUnderSampler,
            Imbalance::TomekLinks,
        ],
        models: vec![ModelKind::Lr, ModelKind::Xgb],
        split_ratios: vec![0.1],
        prob_thresholds: vec![0.5],
        seeds: vec![126],
    };
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let ctx = ExecContext::default();
    let start = Instant::now();
    let mut csvs = Vec::new();
    let mut branches = 0;
    for (workers, existing) in [
        (1, ExistingRun::Refuse),
        (8, ExistingRun::Overwrite),
        (1, ExistingRun::Overwrite),
    ] {
        let s = run_all(&spec, pima(), &ctx, "det", tmp.path(), workers, existing)
            .map_err(|e| e.to_string())?;
        branches = s.branch_count;
        csvs.push(std::fs::read(&s.merged_csv).map_err(|e| e.to_string())?);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        csvs[0] == csvs[1],
        "workers 1 and 8 produced different merged CSVs",
    )?;
    check(
        csvs[0] == csvs[2],
        "overwrite rerun produced a different merged CSV",
    )?;
    check(
        secs < C2_TIME_LIMIT_S,
        format!("three runs took {secs:.1}s"),
    )?;
    Ok(format!(
        "{branches} branches, 3 runs (workers 1, 8, 1) byte-identical ({} bytes) in {secs:.1}s",
        csvs[0].len()
    ))
}

fn best(rows: &[&TableRow], name: &str) -> f64 {
    rows.iter()
        .map(|r| r.metrics[metric(name)])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_3() -> Outcome {
    let desk = desk_grid()?;
    let seeds = &DESK_SEEDS[..3];
    let rows: Vec<&TableRow> = desk
        .table
        .rows
        .iter()
        .filter(|r| seeds.contains(&r.config.seed))
        .collect();
    let expected = desk_spec(seeds).branch_count();
    check(
        rows.len() == expected,
        format!("{} of {expected} branches succeeded", rows.len()),
    )?;
    let w = best(&rows, "Weighted_F1");
    let m = best(&rows, "Macro_F1");
    let est = desk.seconds_per_seed * seeds.len() as f64;
    check(
        w >= C3_MIN_WEIGHTED_F1,
        format!("best Weighted_F1 {w:.4} < {C3_MIN_WEIGHTED_F1}"),
    )?;
    check(
        m >= C3_MIN_MACRO_F1,
        format!("best Macro_F1 {m:.4} < {C3_MIN_MACRO_F1}"),
    )?;
    check(est < C3_TIME_LIMIT_S, format!("grid took {est:.0}s"))?;
    Ok(format!(
        "{} branches, best Weighted_F1 {w:.4} >= {C3_MIN_WEIGHTED_F1}, best Macro_F1 {m:.4} >= {C3_MIN_MACRO_F1}, {est:.0}s",
        rows.len()
    ))
}

fn stroke_path() -> PathBuf {
    std::env::var_os("STROKE_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| data_dir().join("healthcare-dataset-stroke-data.csv"))
}

fn criterion_4() -> Outcome {
    let path = stroke_path();
    if !path.exists() {
        return Err(format!(
            "stroke dataset not found at {} (set STROKE_CSV to the public CSV)",
            path.display()
        ));
    }
    let start = Instant::now();
    let ds = load_dataset(&path, Schema::Stroke).map_err(|e| e.to_string())?;
    let [n0, n1] = ds.class_counts();
    let prior = n0.max(n1) as f64 / (n0 + n1) as f64;
    let spec = SearchSpaceSpec {
        feature_selection_methods: vec![FsMethod::InfGain, FsMethod::NoSelect],
        feature_counts: vec![FeatureCount::Top(6)],
        scalers: vec![ScalerKind::Standard],
        norm_first: vec![true, false],
        augmentations: vec![Augmentation::NoAug, Augmentation::GaussianNoise],
        imbalance_methods: vec![
            Imbalance::NoImbl,
            Imbalance::Smote,
            Imbalance::RandomUnderSampler,
            Imbalance::TomekLinks,
        ],
        models: ModelKind::ALL.to_vec(),
        split_ratios: vec![0.1],
        prob_thresholds: vec![0.35, 0.5],
        seeds: vec![7, 126],
    };
    let configs = enumerate_branches(&spec).map_err(|e| e.to_string())?;
    let records = execute_branches("stroke", &configs, &ds, &ExecContext::default(), 1, &|_| {
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    let table = MergedTable::from_records(&records).map_err(|e| e.to_string())?;
    let rows: Vec<&TableRow> = table.rows.iter().collect();
    let w = best(&rows, "Weighted_F1");
    let m = best(&rows, "Macro_F1");
    let secs = start.elapsed().as_secs_f64();
    check(
        w >= C4_MIN_WEIGHTED_F1,
        format!("best Weighted_F1 {w:.4} < {C4_MIN_WEIGHTED_F1}"),
    )?;
    check(
        m <= C4_MAX_MACRO_F1,
        format!("best Macro_F1 {m:.4} > {C4_MAX_MACRO_F1}"),
    )?;
    check(
        (prior - C4_PRIOR).abs() <= C4_PRIOR_TOL,
        format!("majority baseline accuracy {prior:.4} outside {C4_PRIOR} +/- {C4_PRIOR_TOL}"),
    )?;
    check(secs < C4_TIME_LIMIT_S, format!("grid took {secs:.0}s"))?;
    Ok(format!(
        "{} branches, best Weighted_F1 {w:.4}, best Macro_F1 {m:.4}, baseline {prior:.4}, {secs:.0}s",
        rows.len()
    ))
}

fn criterion_5() -> Outcome {
    let desk = desk_grid()?;
    let mut entries = Vec::new();
    for (component, a, b) in [
        (Component::FsMethod, "biMaxInfgain", "biMeanInfgain"),
        (Component::AugMethod, "gaussian_noise", "noAug"),
    ] {
        let s = rms_value_similarity(&desk.table, component, &METRIC_NAMES, false)
            .map_err(|e| e.to_string())?;
        for i in 0..s.values.len() {
            check(
                s.entries[i][i] == Some(0.0),
                format!("{component}: non-zero diagonal"),
            )?;
            for j in 0..s.values.len() {
                check(
                    s.entries[i][j] == s.entries[j][i],
                    format!("{component}: asymmetric"),
                )?;
            }
        }
        entries.push(
            s.get(a, b)
                .ok_or_else(|| format!("{component}: {a}/{b} never matched"))?,
        );
    }
    let (fs, aug) = (entries[0], entries[1]);
    check(
        fs < aug,
        format!("RMS(biMax, biMean) {fs:.4} >= RMS(gaussian_noise, noAug) {aug:.4}"),
    )?;
    Ok(format!(
        "symmetric, zero diagonal; RMS(biMax, biMean) {fs:.4} < RMS(gaussian_noise, noAug) {aug:.4}"
    ))
}

fn synthetic_table(n: usize, seed: u64) -> MergedTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let augs = [
        Augmentation::NoAug,
        Augmentation::GaussianNoise,
        Augmentation::Mixup,
    ];
    let effect = [0.55, 0.72, 0.86];
    let fs = [
        FsMethod::InfGain,
        FsMethod::BiMaxInfGain,
        FsMethod::BiMeanInfGain,
    ];
    let imb = [
        Imbalance::NoImbl,
        Imbalance::Smote,
        Imbalance::Adasyn,
        Imbalance::TomekLinks,
    ];
    let mut rows = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    while rows.len() < n {
        let a = rng.random_range(0..augs.len());
        let config = PipelineConfig {
            k: FeatureCount::Top(rng.random_range(3..=6)),
            fs_method: *fs.choose(&mut rng).unwrap(),
            scaler: *[ScalerKind::Standard, ScalerKind::MinMax]
                .choose(&mut rng)
                .unwrap(),
            norm_first: rng.random(),
            augmentation: augs[a],
            imbalance: *imb.choose(&mut rng).unwrap(),
            model: *ModelKind::ALL.choose(&mut rng).unwrap(),
            split_ratio: 0.1,
            prob_threshold: *[0.35, 0.5].choose(&mut rng).unwrap(),
            seed: rng.random_range(0..4),
        };
        let id = branch_id(&config);
        if !seen.insert(id.clone()) {
            continue;
        }
        let mut metrics = [0.0; 13];
        for m in metrics.iter_mut() {
            *m = rng.random_range(0.4..0.9);
        }
        metrics[metric("Macro_F1")] = effect[a];
        rows.push(TableRow {
            run_id: "synthetic".into(),
            branch_id: id,
            logdir: logdir_path(&config),
            config,
            metrics,
        });
    }
    MergedTable::from_rows(rows).expect("valid synthetic table")
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let table = synthetic_table(500, 11);
    let mut parts = Vec::new();
    for level in [ImportanceLevel::Component, ImportanceLevel::Part] {
        let imp = rf_importance(&table, "Macro_F1", level, 100, 5).map_err(|e| e.to_string())?;
        let sum: f64 = imp.importance.iter().sum();
        check(
            (sum - 1.0).abs() <= C6_SUM_TOL,
            format!("{level:?}: importances sum to {sum}"),
        )?;
        check(
            imp.importance.iter().all(|v| *v >= 0.0),
            format!("{level:?}: negative importance"),
        )?;
        let aug: f64 = imp
            .features
            .iter()
            .zip(&imp.importance)
            .filter(|(f, _)| f.starts_with("AugMethod"))
            .map(|(_, v)| v)
            .sum();
        check(
            aug >= C6_MIN_IMPORTANCE,
            format!("{level:?}: AugMethod importance {aug:.4}"),
        )?;
        parts.push(format!("{level:?} {aug:.4}"));
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < C6_TIME_LIMIT_S, format!("took {secs:.1}s"))?;
    Ok(format!(
        "500 rows, AugMethod importance: {}; {secs:.2}s",
        parts.join(", ")
    ))
}

fn brute_force_friedman(blocks: &[Vec<f64>]) -> f64 {
    let n = blocks.len() as f64;
    let k = blocks[0].len();
    let mut sums = vec![0.0; k];
    for b in blocks {
        for j in 0..k {
            let better = b.iter().filter(|v| **v > b[j]).count() as f64;
            let tied = b.iter().filter(|v| **v == b[j]).count() as f64;
            sums[j] += better + (tied + 1.0) / 2.0;
        }
    }
    let kf = k as f64;
    let stat = 12.0 / (n * kf * (kf + 1.0)) * sums.iter().map(|r| r * r).sum::<f64>()
        - 3.0 * n * (kf + 1.0);
    stat.max(0.0)
}

fn enumerated_wilcoxon(d: &[f64]) -> (f64, f64) {
    let n = d.len();
    let ranks: Vec<f64> = (0..n)
        .map(|i| {
            let below = d.iter().filter(|v| v.abs() < d[i].abs()).count() as f64;
            let tied = d.iter().filter(|v| v.abs() == d[i].abs()).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let (mut ge, mut le) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        ge += u64::from(s >= observed - 1e-9);
        le += u64::from(s <= observed + 1e-9);
    }
    let total = (1u64 << n) as f64;
    (
        ge as f64 / total,
        (2.0 * ge.min(le) as f64 / total).min(1.0),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_chi = 0.0f64;
    for _ in 0..5 {
        let blocks: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                (0..4)
                    .map(|_| f64::from(rng.random_range(0..8u8)) / 8.0)
                    .collect()
            })
            .collect();
        let f = friedman_test(&blocks).map_err(|e| e.to_string())?;
        worst_chi = worst_chi.max((f.chi2 - brute_force_friedman(&blocks)).abs());
    }
    check(
        worst_chi <= C7_CHI2_TOL,
        format!("friedman chi2 off by {worst_chi:e}"),
    )?;

    let mut worst_p = 0.0f64;
    let mut cases = 0;
    for n in 5..=12 {
        for _ in 0..4 {
            let d: Vec<f64> = (0..n)
                .map(|_| {
                    let mag = f64::from(rng.random_range(1..=6u8));
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            let zeros = vec![0.0; n];
            let w = wilcoxon_signed_rank(&d, &zeros).map_err(|e| e.to_string())?;
            let (pg, p2) = enumerated_wilcoxon(&d);
            worst_p = worst_p
                .max((w.p_greater - pg).abs())
                .max((w.p_two_sided - p2).abs());
            cases += 1;
        }
    }
    check(
        worst_p <= C7_P_TOL,
        format!("wilcoxon p off by {worst_p:e}"),
    )?;

    let cd = critical_difference(6, 9, 0.05).map_err(|e| e.to_string())?;
    check(
        (cd - C7_CD_TARGET).abs() <= C7_CD_TOL,
        format!("CD(6, 9) = {cd:.4}"),
    )?;
    let rel = (cd - C7_CD_REPORTED).abs() / C7_CD_REPORTED;
    check(
        rel <= C7_CD_REL_TOL,
        format!(
            "CD(6, 9) = {cd:.4} is {:.2}% from {C7_CD_REPORTED}",
            rel * 100.0
        ),
    )?;
    Ok(format!(
        "friedman max |dchi2| {worst_chi:.1e} over 5 blocks, wilcoxon max |dp| {worst_p:.1e} over {cases} cases, CD(6, 9, 0.05) = {cd:.4} ({:.2}% from {C7_CD_REPORTED})",
        rel * 100.0
    ))
}

fn point_cloud(seed: u64, n0: usize, n1: usize) -> (Array2<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<u8> = (0..n0 + n1).map(|i| u8::from(i >= n0)).collect();
    let x = Array2::from_shape_fn((n0 + n1, 2), |(i, _)| {
        rng.random::<f64>() + f64::from(y[i]) * 0.4
    });
    (x, y)
}

fn mutual_nn_oracle(x: &Array2<f64>, y: &[u8]) -> Vec<(usize, usize)> {
    let n = y.len();
    let d = |a: usize, b: usize| -> f64 {
        (0..x.ncols())
            .map(|j| (x[[a, j]] - x[[b, j]]).powi(2))
            .sum()
    };
    let nn: Vec<usize> = (0..n)
        .map(|a| {
            (0..n)
                .filter(|&b| b != a)
                .min_by(|&p, &q| d(a, p).total_cmp(&d(a, q)).then(p.cmp(&q)))
                .unwrap()
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .filter(|&a| nn[nn[a]] == a && a < nn[a] && y[a] != y[nn[a]])
        .map(|a| (a, nn[a]))
        .collect();
    pairs.sort_unstable();
    pairs
}

fn criterion_8() -> Outcome {
    let mut smote_ok = 0;
    let mut worst_adasyn = 0i64;
    let mut tomek_removed = 0;
    for seed in 0..20u64 {
        let (n0, n1) = (30 + seed as usize % 7, 20 - seed as usize % 5);
        let (x, y) = point_cloud(seed, n0, n1);

        for r in [
            smote(x.view(), &y, 5, seed).map_err(|e| e.to_string())?,
            random_undersample(x.view(), &y, seed).map_err(|e| e.to_string())?,
        ] {
            let c = r.class_counts();
            check(
                c[0] == c[1],
                format!("seed {seed}: unbalanced output {c:?}"),
            )?;
            smote_ok += 1;
        }
        let a = adasyn(x.view(), &y, 5, seed).map_err(|e| e.to_string())?;
        let c = a.class_counts();
        let gap = c[0] as i64 - c[1] as i64;
        // each minority row's share is rounded once
        let slack = (n1 as i64 + 1) / 2;
        check(
            gap.abs() <= slack,
            format!("seed {seed}: ADASYN counts {c:?} exceed slack {slack}"),
        )?;
        worst_adasyn = worst_adasyn.max(gap.abs());

        let oracle = mutual_nn_oracle(&x, &y);
        check(
            tomek_pairs(x.view(), &y) == oracle,
            format!("seed {seed}: Tomek pairs differ from oracle"),
        )?;
        let t = tomek_links(x.view(), &y).map_err(|e| e.to_string())?;
        let major = if n0 >= n1 { 0u8 } else { 1u8 };
        let mut drop: Vec<usize> = oracle
            .iter()
            .map(|&(a, b)| if y[a] == major { a } else { b })
            .collect();
        drop.sort_unstable();
        drop.dedup();
        let kept: Vec<usize> = (0..y.len()).filter(|i| !drop.contains(i)).collect();
        check(
            t.labels.len() == kept.len(),
            format!("seed {seed}: Tomek kept {} rows", t.labels.len()),
        )?;
        for (out, &src) in kept.iter().enumerate() {
            check(
                t.features.row(out) == x.row(src) && t.labels[out] == y[src],
                format!("seed {seed}: Tomek output row {out} is not input row {src}"),
            )?;
        }
        tomek_removed += drop.len();

        check(
            smote(x.view(), &y, 5, seed).unwrap() == smote(x.view(), &y, 5, seed).unwrap()
                && adasyn(x.view(), &y, 5, seed).unwrap() == a
                && random_undersample(x.view(), &y, seed).unwrap()
                    == random_undersample(x.view(), &y, seed).unwrap()
                && tomek_links(x.view(), &y).unwrap() == t,
            format!("seed {seed}: rerun differs"),
        )?;
    }
    Ok(format!(
        "20 point sets of 50: {smote_ok} SMOTE/RUS outputs balanced, ADASYN max gap {worst_adasyn}, {tomek_removed} Tomek removals match the oracle, reruns bit-identical"
    ))
}

fn criterion_9() -> Outcome {
    let desk = desk_grid()?;
    let s = cross_seed_summary(&desk.table, "Macro_F1", 1.0).map_err(|e| e.to_string())?;
    let mi = metric("Macro_F1");
    let mut sigmas = Vec::new();
    for m in &s.models {
        let sd = m.std[mi].ok_or_else(|| format!("{}: no multi-seed groups", m.model))?;
        check(sd > 0.0, format!("{}: Macro_F1 sigma is 0", m.model))?;
        sigmas.push(format!("{} {sd:.4}", m.model.short_id()));
    }
    check(s.models.len() == 6, format!("{} models", s.models.len()))?;
    let blocks = seed_blocks(&desk.table, "Macro_F1")
        .and_then(|b| b.complete())
        .map_err(|e| e.to_string())?;
    let f = friedman_test(&blocks).map_err(|e| e.to_string())?;
    check(
        f.p_value < C9_ALPHA,
        format!(
            "friedman chi2 {:.3}, p {:.3e} does not reject at {C9_ALPHA}",
            f.chi2, f.p_value
        ),
    )?;
    Ok(format!(
        "sigma(Macro_F1): {}; friedman over {} seeds x {} models: chi2 {:.3}, p {:.2e} < {C9_ALPHA}",
        sigmas.join(", "),
        f.n_blocks,
        f.k,
        f.chi2,
        f.p_value
    ))
}

fn random_spec(rng: &mut ChaCha8Rng) -> SearchSpaceSpec {
    fn subset<T: Copy>(rng: &mut ChaCha8Rng, all: &[T]) -> Vec<T> {
        let mut v = all.to_vec();
        v.shuffle(rng);
        v.truncate(rng.random_range(1..=all.len()));
        v
    }
    SearchSpaceSpec {
        feature_selection_methods: subset(
            rng,
            &[
                FsMethod::InfGain,
                FsMethod::BiMaxInfGain,
                FsMethod::BiMeanInfGain,
                FsMethod::NoSelect,
            ],
        ),
        feature_counts: subset(rng, &(1..=8).map(FeatureCount::Top).collect::<Vec<_>>()),
        scalers: subset(rng, &[ScalerKind::Standard, ScalerKind::MinMax]),
        norm_first: subset(rng, &[true, false]),
        augmentations: subset(
            rng,
            &[
                Augmentation::NoAug,
                Augmentation::GaussianNoise,
                Augmentation::Mixup,
            ],
        ),
        imbalance_methods: subset(
            rng,
            &[
                Imbalance::NoImbl,
                Imbalance::Smote,
                Imbalance::Adasyn,
                Imbalance::RandomUnderSampler,
                Imbalance::TomekLinks,
            ],
        ),
        models: subset(rng, ModelKind::ALL),
        split_ratios: subset(rng, &[0.1, 0.2, 0.3]),
        prob_thresholds: subset(rng, &[0.35, 0.5, 0.65]),
        seeds: subset(rng, &[1, 7, 42, 126, 1919]),
    }
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut total = 0;
    for i in 0..20 {
        let s = random_spec(&mut rng);
        let selecting = s
            .feature_selection_methods
            .iter()
            .filter(|f| **f != FsMethod::NoSelect)
            .count();
        let no_select = usize::from(s.feature_selection_methods.contains(&FsMethod::NoSelect));
        let expected = (selecting * s.feature_counts.len() + no_select)
            * s.scalers.len()
            * s.norm_first.len()
            * s.augmentations.len()
            * s.imbalance_methods.len()
            * s.models.len()
            * s.split_ratios.len()
            * s.prob_thresholds.len()
            * s.seeds.len();
        let configs = enumerate_branches(&s).map_err(|e| format!("spec {i}: {e}"))?;
        check(
            configs.len() == expected,
            format!("spec {i}: {} branches, expected {expected}", configs.len()),
        )?;
        let groups = group_by_collection(&configs);
        let per = s.models.len() * s.prob_thresholds.len();
        check(
            groups.len() * per == configs.len() && groups.iter().all(|(_, g)| g.len() == per),
            format!("spec {i}: collections do not partition into groups of {per}"),
        )?;
        total += configs.len();
    }
    Ok(format!(
        "20 random specs, {total} branches, counts and collection sizes exact"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric identities", criterion_1),
        ("determinism", criterion_2),
        ("Pima performance band", criterion_3),
        ("Stroke imbalance signature", criterion_4),
        ("RMS similarity structure", criterion_5),
        ("RF-importance oracle", criterion_6),
        ("statistics oracles", criterion_7),
        ("resampler postconditions", criterion_8),
        ("cross-seed trade-off", criterion_9),
        ("search-space arithmetic", criterion_10),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} {name}: PASS ({detail}) [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} {name}: FAIL ({detail}) [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
