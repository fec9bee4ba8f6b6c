//! The BraiNCA update rule: pairwise attention over local and long-range
//! neighborhoods, message formation, GRU update and task-specific heads.

mod attention;
pub mod checkpoint;
mod config;
mod field;
mod params;
mod step;

pub use attention::{attention_aggregate, attention_domain, attention_weights, Neighborhood};
pub use checkpoint::{config_digest, digest_hex, read_checkpoint, write_checkpoint, Checkpoint};
pub use config::{CompositionMode, ModelConfig, UpdateProfile, ACTION_DIM, OBS_DIM};
pub use field::{extended_state, extended_states, CellField};
pub use params::ModelParams;
pub use step::{
    compose_interaction, message_input, nca_step, nca_step_backward, nca_step_cached, StepCache, StepGrad,
    StepOutput,
};
