//! Single-image novel view and depth prediction.
//!
//! A viewpoint-conditioned encoder-decoder network is trained on
//! procedurally generated objects rendered on the fly by a software
//! rasterizer. Predicted depth maps from several viewpoints are fused into a
//! colored point cloud. Nearest-neighbour baselines, a shape-similarity
//! train/test split, and the normalized error metrics support evaluation.

pub mod config;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod image;
pub mod pnm;
pub mod render;
pub mod rng;
pub mod tensor;
pub mod viewnet;
pub mod weights;

pub use error::{Error, Result};
