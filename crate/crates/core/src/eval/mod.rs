//! Evaluation statistics over answer pools: AUROC, empirical reproduction
//! rates, budget-matched cost-accuracy curves, token-efficiency ratios,
//! adaptive-stopping operating points, the logistic GLM and bootstraps.

pub mod auroc;
pub mod budget;
pub mod curve;
pub mod glm;
pub mod resample;
pub mod stopping;

pub use auroc::{empirical_rates, macro_auroc, per_problem_auroc, MissingScores, ReproductionRates, ScoreSource};
pub use budget::{
    benchmark_pass1, budget_trial, cost_accuracy_curve, BudgetGrid, CostAccuracyCurve, CurvePoint, EvalConfig,
    GroupSpec, Method, PreparedProblem,
};
pub use curve::{
    budget_at_accuracy, monotone_envelope, parametric_bootstrap_ratio, token_efficiency_ratio, OperatingPoint,
    RatioEstimate,
};
pub use glm::{fit_logistic_glm, GlmFit};
pub use resample::{binned_rates, cluster_bootstrap, cluster_bootstrap_many, BinRecord, BootstrapSummary, PValue};
pub use stopping::{ac_esc_curve, StoppingPoint, StoppingRule};
