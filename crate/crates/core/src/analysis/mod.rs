//! Statistics over merged branch logs.

mod artifacts;
mod hypothesis;
mod importance;
mod report;
mod similarity;
mod stats;
mod table;

pub use artifacts::{paired_by_model, write_analyses, AnalysisKind, AnalysisOptions, ANALYSIS_DIR};
pub use hypothesis::{
    critical_difference, friedman_test, wilcoxon_signed_rank, FriedmanResult, WilcoxonResult,
    WILCOXON_MIN_N,
};
pub use importance::{rf_importance, Importance, ImportanceLevel};
pub use report::{render_report, REPORT_SECTIONS};
pub use similarity::{part_correlation, rms_value_similarity, PartCorrelation, SimilarityMatrix};
pub use stats::{
    aggregate_stats, component_stats, cross_seed_summary, descending_ranks, mean_std, nrrs,
    rank_pipelines, seed_blocks, ComponentStats, GroupSummary, ModelRobustness, RankedRow,
    RobustnessSummary, SeedBlocks, ValueStats,
};
pub use table::{list_runs, merge_logs, value_order, Component, MergedTable, TableRow};
