//! Multi-run sweeps and survival statistics over their outcomes.

pub mod report;
pub mod stats;
pub mod sweep;

pub use report::{emit_report, summarize, ConditionSummary, PairwiseTest, Report, DEFAULT_PERMUTATIONS};
pub use stats::{
    fisher_exact_one_sided, kaplan_meier, log_rank_one_sided, log_rank_statistic, mean_std, permutation_test_rmst, rmst,
    SurvivalData,
};
pub use sweep::{load_records, run_sweep, SweepJob};
