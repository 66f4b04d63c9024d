//! Error metric, evaluation protocols and report emission.

mod jobs;
mod metrics;
mod protocol;
mod report;

pub use jobs::parallel_map;
pub use metrics::compute_rmse;
pub use protocol::{
    default_filter_grid, default_split, run_ablation, run_loocv, run_size_sweep, split_by_prior_error,
    train_and_evaluate, AblationResult, AblationRow, AblationVariant, FoldResult, LoocvResult, SizeRow,
    SizeSweepResult, Split,
};
pub use report::{config_hash, emit_report, median, quantile, EmitOptions, EvalEntry, EvalReport, MethodSummary};
