//! Stable estimator of dynamical systems: a mixture of stable linear maps
//! sharing one attractor, fitted to demonstrated velocities.

mod fit;
mod model;
mod optim;

pub use fit::{
    gate_residuals, seds_fit, seds_fit_with, FailureReport, Gate, GateResiduals, SedsFit,
    SedsFitOptions, SedsOutcome,
};
pub use model::{
    seds_integrate, seds_param_count, seds_predict, seds_stability_check, IntegrationMode,
    SedsModel, SedsRollout, StabilityReport, ARRIVAL_RADIUS, CAP_FACTOR,
};
pub use optim::{Lbfgs, Objective, OptimResult, OptimStatus, Optimizer};
