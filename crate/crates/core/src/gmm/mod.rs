//! Gaussian mixtures: EM fitting, regression, time-based trajectory encoding
//! and the task-parameterized extension.

mod em;
mod gaussian;
mod gmr;
mod mixture;
mod tbgmr;
mod tpgmm;

pub use em::{em_fit, EmFit, EmInit, EmOptions};
pub use gaussian::{Density, Gaussian};
pub use gmr::{gmr_condition, Conditioner};
pub use mixture::{mixture_param_count, Gmm, TpGmm};
pub use tbgmr::{tbgmr_encode, tbgmr_reconstruct, time_position_samples, GmrTrajectory};
pub use tpgmm::{
    frame_params_from_endpoints, tpgmm_combine, tpgmm_fit, tpgmm_generalize, TaskParams, TpGmmFit,
    POST_FILTER_HZ,
};
