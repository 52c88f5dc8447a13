//! Pipeline configuration: one JSON file covering every stage, merged with
//! command-line overrides and echoed back fully resolved.
//!
//! Each field has a built-in default, so an empty config (or none at all) is
//! a runnable pipeline. The resolved config printed by every command can be
//! written back to a file and passed via `--config` to reproduce a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use texforge::diffusion::{Arch, NoiseSchedule, PadMode, TrainConfig};
use texforge::forge::{ForgeConfig, Split, ALBEDO_PRESETS, PRINT_PRESETS};
use texforge::pbr::BrdfLobes;
use texforge::render::ENV_PRESETS;
use texforge::{Error, Result};

use crate::commands::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,
    /// Output root: datasets, checkpoints, reports, and the lockfile.
    pub out_dir: PathBuf,

    // Forging.
    pub patch_size: usize,
    pub render_size: usize,
    pub spp: u32,
    pub texture_materials: usize,
    pub print_materials: usize,
    pub pairs_per_material: usize,
    pub texture_presets: Vec<String>,
    pub print_presets: Vec<String>,
    pub env_presets: Vec<String>,
    pub env_height: usize,
    /// OBJ files to render on; empty means procedural wrinkled sheets.
    pub mesh_paths: Vec<PathBuf>,
    pub mesh_count: usize,
    pub mesh_cells: usize,
    pub mesh_amplitude: f32,
    pub tiling_range: (f32, f32),
    /// Crop side-length range in garment-render pixels.
    pub crop_range: (usize, usize),

    // Model and training.
    pub widths: [usize; 3],
    pub groups: usize,
    pub temb_dim: usize,
    pub temb_hidden: usize,
    pub pad: PadMode,
    pub timesteps: usize,
    pub train_steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub p_uncond: f64,
    /// Progress cadence in steps (stderr only).
    pub log_every: usize,

    // Inference and evaluation.
    pub sample_steps: usize,
    pub guidance: f64,
    /// Cap on evaluated pairs; 0 means all.
    pub eval_limit: usize,

    // Tiling and rendering.
    pub chart_extent: (f32, f32),
    pub camera: String,
    pub env: String,
    /// BRDF lobes for renders: "all", "diffuse", or "specular".
    pub lobes: String,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            seed: 7,
            out_dir: PathBuf::from("texforge-out"),
            patch_size: 32,
            render_size: 96,
            spp: 12,
            texture_materials: 8,
            print_materials: 2,
            pairs_per_material: 4,
            texture_presets: vec!["solid".into(), "stripes".into()],
            print_presets: vec!["circle".into(), "star".into()],
            env_presets: vec!["gradient".into(), "window".into()],
            env_height: 16,
            mesh_paths: Vec::new(),
            mesh_count: 2,
            mesh_cells: 24,
            mesh_amplitude: 0.08,
            tiling_range: (1.0, 2.5),
            // The framing camera leaves the garment ~60% of the frame, so
            // crops above ~0.4x the render rarely reach full coverage.
            crop_range: (24, 36),
            widths: [32, 64, 96],
            groups: 8,
            temb_dim: 32,
            temb_hidden: 128,
            pad: PadMode::Circular,
            timesteps: 100,
            train_steps: 2000,
            batch_size: 2,
            lr: 1e-3,
            p_uncond: 0.15,
            log_every: 25,
            sample_steps: 25,
            guidance: 1.5,
            eval_limit: 0,
            chart_extent: (1.0, 1.0),
            camera: "front".into(),
            env: "window".into(),
            lobes: "all".into(),
        }
    }
}

impl PipelineConfig {
    /// Cross-field checks the individual stages would only catch later.
    pub fn validate(&self) -> Result<()> {
        if self.patch_size % 4 != 0 {
            return Err(Error::invalid(format!(
                "patch size must be a multiple of 4 (the denoiser downsamples twice), got {}",
                self.patch_size
            )));
        }
        if self.texture_materials > 0 && self.texture_presets.is_empty() {
            return Err(Error::invalid("texture_presets must not be empty"));
        }
        if self.print_materials > 0 && self.print_presets.is_empty() {
            return Err(Error::invalid("print_presets must not be empty"));
        }
        for kind in &self.texture_presets {
            if !ALBEDO_PRESETS.contains(&kind.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown texture preset '{kind}', expected one of {ALBEDO_PRESETS:?}"
                )));
            }
        }
        for kind in &self.print_presets {
            if !PRINT_PRESETS.contains(&kind.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown print preset '{kind}', expected one of {PRINT_PRESETS:?}"
                )));
            }
        }
        for name in self.env_presets.iter().chain(std::iter::once(&self.env)) {
            if !ENV_PRESETS.contains(&name.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown environment preset '{name}', expected one of {ENV_PRESETS:?}"
                )));
            }
        }
        if self.env_presets.is_empty() {
            return Err(Error::invalid("env_presets must not be empty"));
        }
        if self.mesh_paths.is_empty() && self.mesh_count == 0 {
            return Err(Error::invalid("either mesh_paths or a positive mesh_count is required"));
        }
        if self.log_every == 0 {
            return Err(Error::invalid("log_every must be positive"));
        }
        if !(self.guidance.is_finite() && self.guidance >= 1.0) {
            return Err(Error::invalid(format!("guidance scale must be finite and >= 1, got {}", self.guidance)));
        }
        let (cu, cv) = self.chart_extent;
        if !(cu.is_finite() && cu > 0.0 && cv.is_finite() && cv > 0.0) {
            return Err(Error::invalid(format!("chart extent must be positive, got ({cu}, {cv})")));
        }
        self.brdf_lobes()?;
        self.arch().validate()?;
        Ok(())
    }

    pub fn arch(&self) -> Arch {
        Arch {
            image_channels: 3,
            image_size: self.patch_size,
            widths: self.widths,
            groups: self.groups,
            temb_dim: self.temb_dim,
            temb_hidden: self.temb_hidden,
            pad: self.pad,
        }
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::cosine(self.timesteps)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            lr: self.lr,
            steps: self.train_steps,
            p_uncond: self.p_uncond,
            seed: self.seed,
            timesteps: self.timesteps,
            image_size: self.patch_size,
        }
    }

    pub fn forge_config(&self, split: Split, seed: u64) -> ForgeConfig {
        ForgeConfig {
            patch_size: self.patch_size,
            pairs_per_material: self.pairs_per_material,
            tiling_range: self.tiling_range,
            crop_range: self.crop_range,
            render_size: self.render_size,
            spp: self.spp,
            split,
            seed,
        }
    }

    pub fn brdf_lobes(&self) -> Result<BrdfLobes> {
        match self.lobes.as_str() {
            "all" => Ok(BrdfLobes::All),
            "diffuse" => Ok(BrdfLobes::Diffuse),
            "specular" => Ok(BrdfLobes::Specular),
            other => Err(Error::invalid(format!(
                "unknown lobe selection '{other}', expected all, diffuse, or specular"
            ))),
        }
    }
}

/// Load a config file, or the defaults when no path is given.
pub fn load(path: Option<&Path>) -> CliResult<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Lib(Error::MissingFile { path: path.to_path_buf(), msg: e.to_string() })
    })?;
    let cfg: PipelineConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Lib(Error::invalid(format!("config {}: {e}", path.display()))))?;
    Ok(cfg)
}
