//! Attention-based neural cellular automata with optional long-range wiring,
//! trained on pattern formation and lunar lander control.

pub mod config;
pub mod control;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod harness;
pub mod math;
pub mod model;
pub mod morph;
pub mod record;
pub mod topology;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scalar::Scalar;

/// Double-precision tensor.
pub type Tensor = math::Tensor<f64>;
/// Double-precision model parameters.
pub type Params = model::ModelParams<f64>;
/// Double-precision cell field.
pub type Field = model::CellField<f64>;
pub type Tensor32 = math::Tensor<f32>;
pub type Params32 = model::ModelParams<f32>;
pub type Field32 = model::CellField<f32>;
