//! Knowledge graph embedding with attentive propagation over relation and
//! attribute triples, translational scoring, and link-prediction and
//! entity-classification evaluation.

pub mod autodiff;
pub mod checkpoint;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod kg;
pub mod model;
pub mod training;

pub use error::{KaneError, Result};
