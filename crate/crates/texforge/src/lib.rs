//! Synthetic paired-texture data forging and diffusion-based texture
//! normalization.
//!
//! The pipeline turns flat material descriptions into paired training data
//! (distorted garment-surface captures alongside the flat textures that
//! produced them), trains a small conditional denoising-diffusion model that
//! maps captures back to flat tileable textures, and post-processes model
//! output into transparent prints and tiled UV textures.
//!
//! Module map:
//! - [`image`]: CPU image buffers plus PNG (display) and PFM (linear) I/O.
//! - [`pbr`]: material maps, microfacet BRDF, and Monte Carlo shading.
//! - [`render`]: meshes, cameras, environment lights, garment/flat renders,
//!   and patch capture.
//! - [`forge`]: procedural assets and paired-example dataset construction.
//! - [`diffusion`]: noise schedule, conditional denoiser, training, guided
//!   sampling, and checkpoints.
//! - [`postprocess`]: alpha extraction, tiling, and tiling-scale estimation.
//! - [`metrics`]: image-similarity and seam metrics with aggregate reports.

pub mod diffusion;
pub mod error;
pub mod forge;
pub mod image;
pub mod math;
pub mod metrics;
pub mod pbr;
pub mod postprocess;
pub mod render;
pub mod rng;

pub use error::{Error, Result};
