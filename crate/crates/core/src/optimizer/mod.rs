//! Stochastic gradient ascent on the evidence lower bound.
//!
//! Only the newest mixture component (and the weights) is optimised. The
//! factor moves along reparameterisation gradients; the mean and the weights
//! move along natural gradients. All three use bias-corrected ADAM steps.

mod adam;
mod gradients;
mod mask;
mod sga;

pub use adam::Adam;
pub use gradients::{
    draw_and_evaluate, evaluate, factor_noise, mean_gradient, natgrad_mean_update,
    natgrad_weight_update, reparam_grad_l, reparam_grad_l_samples, score_grad_l,
    split_weight_gradient, weight_gradient, ControlVariate, SampleEval,
};
pub use mask::FreeMask;
pub use sga::{estimate_elbo, run_sga, EarlyStop, ElboEstimate, SgaConfig, SgaReport, TracePoint};
