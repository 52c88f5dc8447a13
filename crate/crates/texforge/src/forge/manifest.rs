//! Dataset manifest I/O.
//!
//! A forged split is a directory of images plus `manifest.json` describing
//! every pair: conditions as 8-bit sRGB PNG, texture targets as linear PFM,
//! print targets as RGBA PNG. Loading validates the whole manifest and names
//! the offending entry on failure.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forge::pairs::{PairKind, PairedExample, Split};
use crate::image::{read_pfm, read_png, write_display_png, write_pfm, Image, Transfer};
use crate::render::CropRect;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: PairKind,
    pub condition_path: String,
    pub target_path: String,
    pub material_id: String,
    pub mesh_id: String,
    pub env_id: String,
    pub tiling_scale: f32,
    pub crop: CropRect,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub split: String,
    pub examples: Vec<ManifestEntry>,
}

/// One fully loaded pair. `target` is the 3-channel model target: texture
/// targets verbatim, print targets composited onto black (RGB x alpha).
#[derive(Debug, Clone)]
pub struct LoadedPair {
    pub entry: ManifestEntry,
    pub condition: Image,
    pub target: Image,
    /// Original 4-channel print target, present for print pairs only.
    pub target_rgba: Option<Image>,
}

#[derive(Debug)]
pub struct LoadedDataset {
    pub split: String,
    pub pairs: Vec<LoadedPair>,
}

impl LoadedDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Write images and `manifest.json` for one split into `dir`; returns the
/// manifest path.
pub fn write_manifest(examples: &[PairedExample], split: Split, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(examples.len());
    for ex in examples {
        let condition_path = format!("{}_cond.png", ex.id);
        write_display_png(&ex.condition, &dir.join(&condition_path))?;
        let target_path = match ex.kind {
            PairKind::Texture => {
                let name = format!("{}_target.pfm", ex.id);
                write_pfm(&ex.target, &dir.join(&name))?;
                name
            }
            PairKind::Print => {
                let name = format!("{}_target.png", ex.id);
                write_display_png(&ex.target, &dir.join(&name))?;
                name
            }
        };
        entries.push(ManifestEntry {
            id: ex.id.clone(),
            kind: ex.kind,
            condition_path,
            target_path,
            material_id: ex.material_id.clone(),
            mesh_id: ex.mesh_id.clone(),
            env_id: ex.env_id.clone(),
            tiling_scale: ex.tiling_scale,
            crop: ex.crop,
            seed: ex.seed,
        });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        split: split.as_str().to_string(),
        examples: entries,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Manifest(format!("serialize: {e}")))?;
    std::fs::write(&path, json + "\n")?;
    Ok(path)
}

/// Parse `manifest.json` without loading any images.
pub fn read_manifest_file(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MissingFile {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported schema version {} (this build reads version {MANIFEST_SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

fn entry_err(entry: &ManifestEntry, msg: impl std::fmt::Display) -> Error {
    Error::Manifest(format!("entry {}: {msg}", entry.id))
}

/// Load and validate a full dataset from its manifest path. Every referenced
/// image must exist, decode, and agree in resolution with its pair.
pub fn load_dataset(path: &Path) -> Result<LoadedDataset> {
    let manifest = read_manifest_file(path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let mut pairs = Vec::with_capacity(manifest.examples.len());
    for entry in &manifest.examples {
        let condition = read_png(&root.join(&entry.condition_path), Transfer::Srgb)
            .map_err(|e| entry_err(entry, e))?;
        if condition.channels() != 3 {
            return Err(entry_err(
                entry,
                format!("condition {} has {} channels, expected 3", entry.condition_path, condition.channels()),
            ));
        }
        let (target, target_rgba) = match entry.kind {
            PairKind::Texture => {
                let t = read_pfm(&root.join(&entry.target_path)).map_err(|e| entry_err(entry, e))?;
                if t.channels() != 3 {
                    return Err(entry_err(
                        entry,
                        format!("target {} has {} channels, expected 3", entry.target_path, t.channels()),
                    ));
                }
                (t, None)
            }
            PairKind::Print => {
                let rgba = read_png(&root.join(&entry.target_path), Transfer::Srgb)
                    .map_err(|e| entry_err(entry, e))?;
                if rgba.channels() != 4 {
                    return Err(entry_err(
                        entry,
                        format!("target {} has {} channels, expected 4", entry.target_path, rgba.channels()),
                    ));
                }
                // Composite onto black so the model sees an unambiguous RGB
                // target; transparency is recovered later from brightness.
                let rgb = Image::from_fn(rgba.width(), rgba.height(), 3, |x, y| {
                    let a = rgba.get(x, y, 3);
                    [rgba.get(x, y, 0) * a, rgba.get(x, y, 1) * a, rgba.get(x, y, 2) * a, 0.0]
                });
                (rgb, Some(rgba))
            }
        };
        if condition.width() != target.width() || condition.height() != target.height() {
            return Err(entry_err(
                entry,
                format!(
                    "condition is {}x{} but target is {}x{}",
                    condition.width(),
                    condition.height(),
                    target.width(),
                    target.height()
                ),
            ));
        }
        pairs.push(LoadedPair { entry: entry.clone(), condition, target, target_rgba });
    }
    Ok(LoadedDataset { split: manifest.split, pairs })
}

/// Error when any material id appears in both manifests (train/test leakage).
pub fn check_material_disjointness(a: &Manifest, b: &Manifest) -> Result<()> {
    let ids: HashSet<&str> = a.examples.iter().map(|e| e.material_id.as_str()).collect();
    for e in &b.examples {
        if ids.contains(e.material_id.as_str()) {
            return Err(Error::Manifest(format!(
                "material {} appears in both the {} and {} splits",
                e.material_id, a.split, b.split
            )));
        }
    }
    Ok(())
}
