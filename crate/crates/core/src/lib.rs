//! Statistical tooling for pairwise comparison of systems scored by noisy
//! 0-100 human judgments: rank-sum testing, evaluation sensitivity, simulated
//! power, control-variates efficiency, and group sequential procedures with
//! bootstrap benchmarking.

pub mod data;
pub mod error;
pub mod harness;
pub mod power;
pub mod rank;
pub mod seed;
pub mod sequential;

pub use data::{load_judgments, summarize, write_judgments, ComparisonData, Judgment, Pool, SummaryStats, System};
pub use error::{Error, Result};
pub use power::{
    estimate_power, fit_gamma_model, observed_mde, pairwise_accuracy, required_sample_size,
    GammaJudgmentModel, MdeResult, PowerEstimate,
};
pub use rank::{
    data_efficiency, exact_rank_sum_p, gamma_from_reducible, rank_sum_test, variance_decomposition,
    EfficiencyInputs, TestResult, VarianceDecomposition,
};
pub use sequential::{
    evaluate_peek, make_plan, pocock_per_look_alpha, run_procedure, PeekAction, PeekDecision,
    PlanKind, ProcedureResult, SequentialPlan,
};
