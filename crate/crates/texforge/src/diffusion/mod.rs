//! Conditional denoising-diffusion model that maps distorted garment-surface
//! captures to flat, tileable texture estimates.
//!
//! The model lives in pixel space at a fixed small resolution: images are
//! converted to [-1, 1] tensors, noised with a cosine schedule, and a compact
//! convolutional denoiser with circular padding predicts the injected noise.
//! Sampling is ancestral with classifier-free guidance; checkpoints are
//! versioned binary files carrying the architecture hash.

pub mod checkpoint;
pub mod net;
pub mod sample;
pub mod schedule;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use net::{roll, Arch, Denoiser, DenoiserCache, PadMode};
pub use sample::{cfg_predict, combine_guidance, sample, SampleParams};
pub use schedule::{add_noise, NoiseSchedule};
pub use tensor::{image_to_model, model_to_image, Scalar, Tensor};
pub use train::{
    mse_loss, pairs_from_dataset, train, training_step, Adam, TrainConfig, TrainLogEntry, TrainPair,
};
