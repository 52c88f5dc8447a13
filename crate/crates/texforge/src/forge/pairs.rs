//! Paired-example construction: render a material on a draped garment, crop a
//! distorted capture, and pair it with the normalized flat target.
//!
//! All randomness for example (mi, pi) derives from (seed, mi, pi), so output
//! is independent of scheduling and partial failures elsewhere.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pbr::{BrdfLobes, MaterialSet};
use crate::postprocess::RgbaPrint;
use crate::render::{
    capture_patch, render_flat, render_garment, Camera, CropRect, EnvironmentMap,
    FlatRenderParams, GarmentMesh, GarmentRenderParams,
};
use crate::rng;

/// How many crop positions to try before recording a skip.
const CROP_ATTEMPTS: usize = 20;
/// Abort when more than this fraction of examples fail.
pub const MAX_SKIP_RATE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Texture,
    Print,
}

impl PairKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairKind::Texture => "texture",
            PairKind::Print => "print",
        }
    }
}

/// Forging parameters. Ranges are inclusive and must be nonempty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForgeConfig {
    pub patch_size: usize,
    pub pairs_per_material: usize,
    pub tiling_range: (f32, f32),
    /// Crop side length range, in garment-render pixels.
    pub crop_range: (usize, usize),
    pub render_size: usize,
    pub spp: u32,
    pub split: Split,
    pub seed: u64,
}

impl ForgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 8 {
            return Err(Error::invalid(format!("patch size must be at least 8, got {}", self.patch_size)));
        }
        if self.pairs_per_material == 0 {
            return Err(Error::invalid("pairs per material must be positive"));
        }
        let (tl, th) = self.tiling_range;
        if !(tl.is_finite() && th.is_finite() && 0.0 < tl && tl <= th) {
            return Err(Error::invalid(format!("tiling range ({tl}, {th}) is empty or invalid")));
        }
        let (cl, ch) = self.crop_range;
        if cl == 0 || cl > ch {
            return Err(Error::invalid(format!("crop range ({cl}, {ch}) is empty or invalid")));
        }
        if ch > self.render_size {
            return Err(Error::invalid(format!(
                "crop size {ch} exceeds the {}px render",
                self.render_size
            )));
        }
        if self.render_size == 0 || self.spp == 0 {
            return Err(Error::invalid("render size and spp must be positive"));
        }
        Ok(())
    }
}

/// One material entering the forge; `print: Some` marks a print pair whose
/// target is the RGBA print itself rather than a flat render.
#[derive(Debug, Clone)]
pub struct ForgeAsset {
    pub id: String,
    pub material: MaterialSet,
    pub print: Option<RgbaPrint>,
}

/// A finished training pair. Condition and target share resolution; print
/// targets carry an alpha channel.
#[derive(Debug, Clone)]
pub struct PairedExample {
    pub id: String,
    pub kind: PairKind,
    pub condition: Image,
    pub target: Image,
    pub material_id: String,
    pub mesh_id: String,
    pub env_id: String,
    pub tiling_scale: f32,
    pub crop: CropRect,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipRecord {
    pub material_id: String,
    pub pair_index: usize,
    pub reason: String,
}

#[derive(Debug)]
pub struct ForgeOutput {
    pub examples: Vec<PairedExample>,
    pub skipped: Vec<SkipRecord>,
}

/// SHA-256 over dimensions and sample bytes; used to verify re-renders.
pub fn hash_image(img: &Image) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((img.width() as u64).to_le_bytes());
    h.update((img.height() as u64).to_le_bytes());
    h.update((img.channels() as u64).to_le_bytes());
    for v in img.data() {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

fn range_f32(rng: &mut impl Rng, lo: f32, hi: f32) -> f32 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn forge_one(
    asset: &ForgeAsset,
    mi: usize,
    pi: usize,
    meshes: &[(String, GarmentMesh)],
    envs: &[(String, EnvironmentMap)],
    cfg: &ForgeConfig,
) -> Result<PairedExample> {
    let mut r = rng::stream(cfg.seed, &[mi as u64, pi as u64]);
    let (mesh_id, mesh) = &meshes[r.random_range(0..meshes.len())];
    let (env_id, env) = &envs[r.random_range(0..envs.len())];
    let tiling = range_f32(&mut r, cfg.tiling_range.0, cfg.tiling_range.1);
    let example_seed = r.random::<u64>();

    let (lo, hi) = mesh.bounds();
    let cam = Camera::framing(lo, hi, 0.7)?;
    let mut params = GarmentRenderParams::new(cfg.render_size, cfg.spp, example_seed);
    params.tiling_scale = tiling;
    params.lobes = BrdfLobes::All;
    let view = render_garment(mesh, &asset.material, env, &cam, &params)?;

    let crop_size = r.random_range(cfg.crop_range.0..=cfg.crop_range.1);
    let mut patch = None;
    let mut last_err = None;
    for _ in 0..CROP_ATTEMPTS {
        let x = r.random_range(0..=cfg.render_size - crop_size);
        let y = r.random_range(0..=cfg.render_size - crop_size);
        let rect = CropRect::new(x, y, crop_size, crop_size);
        match capture_patch(&view, rect, cfg.patch_size) {
            Ok(img) => {
                patch = Some((img, rect));
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (condition, crop) = patch.ok_or_else(|| {
        Error::Capture(format!(
            "no usable {crop_size}px crop in {CROP_ATTEMPTS} attempts: {}",
            last_err.map_or_else(|| "no attempt ran".to_string(), |e| e.to_string())
        ))
    })?;

    let (kind, target) = match &asset.print {
        None => {
            let flat_params = FlatRenderParams::new(cfg.patch_size);
            let mut target = render_flat(&asset.material, &flat_params)?;
            // Re-render and hash: the target must be a pure function of the
            // material, or the pair would silently decouple.
            let verify = render_flat(&asset.material, &flat_params)?;
            if hash_image(&target) != hash_image(&verify) {
                return Err(Error::Forge(format!(
                    "flat target re-render hash mismatch for material {}",
                    asset.id
                )));
            }
            // The calibrated light makes a Lambertian surface render exactly
            // its albedo; the specular lobe of bright materials can overshoot
            // 1 by a hair. Targets are normalized display-range images, so
            // clip to [0, 1].
            for v in target.data_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            (PairKind::Texture, target)
        }
        Some(print) => {
            let target = if print.width() == cfg.patch_size && print.height() == cfg.patch_size {
                print.to_image()
            } else {
                let rgba = print.to_image();
                Image::from_fn(cfg.patch_size, cfg.patch_size, 4, |x, y| {
                    let sx = (x as f32 + 0.5) * print.width() as f32 / cfg.patch_size as f32;
                    let sy = (y as f32 + 0.5) * print.height() as f32 / cfg.patch_size as f32;
                    rgba.sample_bilinear_clamp(sx, sy)
                })
            };
            (PairKind::Print, target)
        }
    };

    Ok(PairedExample {
        id: format!("{}-{}-p{:03}", cfg.split.as_str(), asset.id, pi),
        kind,
        condition,
        target,
        material_id: asset.id.clone(),
        mesh_id: mesh_id.clone(),
        env_id: env_id.clone(),
        tiling_scale: tiling,
        crop,
        seed: example_seed,
    })
}

/// Forge `pairs_per_material` examples for every asset. Failed examples are
/// skipped and recorded; a skip rate above [`MAX_SKIP_RATE`] is an error.
pub fn forge_pairs(
    assets: &[ForgeAsset],
    meshes: &[(String, GarmentMesh)],
    envs: &[(String, EnvironmentMap)],
    cfg: &ForgeConfig,
) -> Result<ForgeOutput> {
    cfg.validate()?;
    if assets.is_empty() || meshes.is_empty() || envs.is_empty() {
        return Err(Error::invalid("forge needs at least one material, mesh, and environment"));
    }
    let per_material: Vec<(Vec<PairedExample>, Vec<SkipRecord>)> = assets
        .par_iter()
        .enumerate()
        .map(|(mi, asset)| {
            let mut examples = Vec::new();
            let mut skipped = Vec::new();
            for pi in 0..cfg.pairs_per_material {
                match forge_one(asset, mi, pi, meshes, envs, cfg) {
                    Ok(ex) => examples.push(ex),
                    Err(e) => skipped.push(SkipRecord {
                        material_id: asset.id.clone(),
                        pair_index: pi,
                        reason: e.to_string(),
                    }),
                }
            }
            (examples, skipped)
        })
        .collect();

    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    for (ex, sk) in per_material {
        examples.extend(ex);
        skipped.extend(sk);
    }
    let total = assets.len() * cfg.pairs_per_material;
    let rate = skipped.len() as f64 / total as f64;
    if rate > MAX_SKIP_RATE {
        let first = skipped
            .first()
            .map_or_else(String::new, |s| format!(" (first: {} pair {}: {})", s.material_id, s.pair_index, s.reason));
        return Err(Error::Forge(format!(
            "{} of {} examples skipped ({:.0}% > {:.0}% budget){first}",
            skipped.len(),
            total,
            rate * 100.0,
            MAX_SKIP_RATE * 100.0
        )));
    }
    Ok(ForgeOutput { examples, skipped })
}
