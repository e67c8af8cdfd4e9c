//! Parameter estimation by expectation maximization.

pub mod em;
pub mod features;
pub mod objective;
pub mod optim;

pub use em::{
    apply_gauge, e_step, e_step_data, expected_complete_loglik, feasible, fit, fit_data, initial_params,
    log_likelihood, m_step, EMConfig, EventResponsibility, FitResult, MStep, Responsibilities, SpatialGauge,
};
pub use features::{TrainingData, UserEvent};
pub use objective::{user_objective, ThetaLayout, UserProblem};
pub use optim::{maximize, OptimConfig, OptimResult};
