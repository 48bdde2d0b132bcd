//! Data plane for autoregressive models over structured 3D scenes.
//!
//! A scene is an ordered list of typed objects. This crate turns scenes into
//! token sequences over a unified vocabulary (text words, marker tokens,
//! quantized numbers, image codes and shape codes), assembles full task
//! sequences with loss weights, and scores model output with the scene
//! Jaccard index and QA accuracy.
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file pin the common concrete choices.

pub mod error;
pub mod eval;
pub mod gen;
pub mod image_order;
pub mod num;
pub mod number_encoding;
pub mod quantizer;
pub mod scene;
pub mod sequence;
pub mod serializer;
pub mod stats;
pub mod stream;
pub mod vocab;

pub use error::{Error, Result};
pub use eval::{EvalReport, MatchCriteria};
pub use gen::{EditOp, GenConfig};
pub use image_order::ReorderPlan;
pub use num::Real;
pub use number_encoding::{EncodingMode, EncodingTable};
pub use quantizer::QuantizerConfig;
pub use scene::{AnswerType, DatasetStyle, QaItem, Scene, SceneObject};
pub use sequence::{ModalityOrder, Role, SequenceOptions, TaskSequence};
pub use serializer::{ParseDiagnostic, ParseMode, TokenString};
pub use vocab::Vocabulary;

/// Sine-cosine table in double precision.
pub type EncodingTableF64 = EncodingTable<f64>;
/// Sine-cosine table in single precision.
pub type EncodingTableF32 = EncodingTable<f32>;
