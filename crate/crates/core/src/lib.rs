//! Weakly supervised breast-lesion segmentation for ultrasound images.
//!
//! Stages run in order: contrast enhancement ([`enhance`]), morphology
//! candidates ([`morphseg`]), CAM localization ([`camloc`]), candidate
//! fusion and prompting ([`fuse`]), mask refinement ([`refine`]) and
//! evaluation ([`eval`]). [`pipeline`] wires them together over a dataset
//! with file-based providers for the neural stages.
//!
//! Numeric stages are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod camloc;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod fuse;
pub mod imagecore;
pub mod morphseg;
pub mod pipeline;
pub mod refine;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ImageF32 = imagecore::Image<f32>;
pub type ImageF64 = imagecore::Image<f64>;
pub type GridF32 = imagecore::Grid<f32>;
pub type GridF64 = imagecore::Grid<f64>;
pub type HeatmapF32 = camloc::Heatmap<f32>;
pub type HeatmapF64 = camloc::Heatmap<f64>;
pub type CamTensorsF32 = camloc::CamTensors<f32>;
pub type CamTensorsF64 = camloc::CamTensors<f64>;
pub type AceParamsF32 = enhance::AceParams<f32>;
pub type AceParamsF64 = enhance::AceParams<f64>;
pub type MorphParamsF32 = morphseg::MorphParams<f32>;
pub type MorphParamsF64 = morphseg::MorphParams<f64>;
