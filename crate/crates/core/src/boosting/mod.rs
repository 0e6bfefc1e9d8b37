//! Growing the mixture one component at a time.
//!
//! Each boost splits the highest-weight component, places the copy with a
//! grid search and optimises only the parameters freed by the chosen move.
//! Per-latent scores measure how far each latent conditional is from the
//! target and decide which latents a local move frees.

mod controller;
mod diagnostics;
mod init;
mod moves;
mod psis;

pub use controller::{
    boost_step, run_boosting, BoostOutcome, BoostRecord, BoostingConfig, BoostingResult, Schedule,
};
pub use diagnostics::{
    rank_descending, score_latents, score_latents_hier, score_latents_markov, select_subset,
    DiagnosticsReport, GridConfig, ScoreConfig, SubsetRule,
};
pub use init::{init_new_component, InitConfig};
pub use moves::BoostMove;
pub use psis::{gpd_fit, psis_khat};
