//! Finite-sum composite optimization with variance-reduced accelerated
//! gradient methods.

pub mod baselines;
pub mod data;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod prox;
pub mod run;
pub mod sampling;
pub mod schedule;
pub mod stochastic;
pub mod trace;
pub mod varag;
pub mod verify;

pub use error::{Error, Result};
pub use problem::{
    aggregate_lipschitz, ComponentKind, FeasibleSet, FeatureVec, FiniteSumProblem, LipschitzSummary, Regularizer,
    SmoothComponent, SmoothFunction,
};
pub use prox::{solve_prox, BregmanGeometry, ProxRequest};
pub use sampling::{IndexSampler, RNG_ALGORITHM};
pub use schedule::{make_batch_schedule, make_epoch_schedule, restart_length, EpochSchedule, Regime, ScheduleConfig, ThetaRule};
pub use run::{GapReference, RunOptions, RunOutput};
pub use trace::{EpochRecord, RunTrace, TraceHeader};
pub use varag::{estimator_diagnostics, varag_restarted_run, varag_run, varag_run_with, AnchorMode, VaragOptions};
pub use stochastic::{sfo_query, stochastic_varag_run, SfoModel};
pub use baselines::{nesterov_agd_run, prox_svrg_run, svrg_pp_run, BaselineConfig};
pub use data::{make_eb_quadratic, make_lasso_problem, make_logistic_problem, make_ridge_problem, read_libsvm, Dataset, EbInstance};
pub use oracle::{compute_psi_star, d0, PsiStar};
pub use verify::{verify_bounds, BoundReport};
