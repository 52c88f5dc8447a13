//! `texforge forge`: build procedural assets and forge paired dataset
//! splits, keeping train and test materials disjoint.

use clap::Args;
use rand::Rng;
use serde_json::json;

use texforge::forge::{
    albedo_preset, check_material_disjointness, forge_pairs, make_print_material, make_pseudo_brdf,
    print_preset, read_manifest_file, write_manifest, wrinkled_mesh, ForgeAsset, PairKind, Split,
    UvRect,
};
use texforge::render::{load_mesh, EnvironmentMap, GarmentMesh};
use texforge::rng::{self, mix_seed};
use texforge::{Error, Result};

use crate::commands::{echo, emit, progress, require_file, CliResult};
use crate::config::PipelineConfig;
use crate::lock::OutputLock;

/// Stream tag for asset construction draws.
const ASSET_STREAM: u64 = 0x6173_7374;
/// Stream tag for the forge pass itself.
const FORGE_STREAM: u64 = 0x666f_7267;
/// Stream tag for procedural meshes (shared across splits).
const MESH_STREAM: u64 = 0x6d65_7368;
/// Print materials index into the asset stream above this offset.
const PRINT_OFFSET: u64 = 1 << 32;

#[derive(Args, Debug)]
pub struct ForgeArgs {
    /// Split(s) to forge.
    #[arg(long, value_enum, default_value_t = SplitArg::Both)]
    pub split: SplitArg,
    /// Pairs per material (overrides the config).
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Number of texture materials (overrides the config).
    #[arg(long)]
    pub materials: Option<usize>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitArg {
    Train,
    Test,
    Both,
}

impl SplitArg {
    fn as_str(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Test => "test",
            SplitArg::Both => "both",
        }
    }

    fn splits(self) -> Vec<Split> {
        match self {
            SplitArg::Train => vec![Split::Train],
            SplitArg::Test => vec![Split::Test],
            SplitArg::Both => vec![Split::Train, Split::Test],
        }
    }
}

fn split_tag(split: Split) -> u64 {
    match split {
        Split::Train => 0,
        Split::Test => 1,
    }
}

/// Short split marker for material ids; example ids already carry the full
/// split name.
fn split_marker(split: Split) -> &'static str {
    match split {
        Split::Train => "tr",
        Split::Test => "te",
    }
}

/// Texture and print materials for one split. Ids and rng streams are both
/// salted with the split, so splits never share a material.
fn build_assets(cfg: &PipelineConfig, split: Split) -> Result<Vec<ForgeAsset>> {
    let stag = split_tag(split);
    let marker = split_marker(split);
    let mut assets = Vec::with_capacity(cfg.texture_materials + cfg.print_materials);
    for i in 0..cfg.texture_materials {
        let kind = &cfg.texture_presets[i % cfg.texture_presets.len()];
        let mut r = rng::stream(cfg.seed, &[ASSET_STREAM, stag, i as u64]);
        let albedo = albedo_preset(kind, cfg.patch_size, r.random())?;
        let material = make_pseudo_brdf(albedo, &mut r)?;
        assets.push(ForgeAsset { id: format!("{kind}-{marker}{i:03}"), material, print: None });
    }
    for j in 0..cfg.print_materials {
        let kind = &cfg.print_presets[j % cfg.print_presets.len()];
        let mut r = rng::stream(cfg.seed, &[ASSET_STREAM, stag, PRINT_OFFSET + j as u64]);
        let print = print_preset(kind, cfg.patch_size, r.random())?;
        let background = make_pseudo_brdf(albedo_preset("solid", cfg.patch_size, r.random())?, &mut r)?;
        let placement = UvRect::new(r.random_range(0.1..0.3), r.random_range(0.1..0.3), 0.5, 0.5)?;
        let (material, used) = make_print_material(&print, &background, placement, &mut r)?;
        assets.push(ForgeAsset {
            id: format!("print-{kind}-{marker}{j:03}"),
            material,
            print: Some(used),
        });
    }
    Ok(assets)
}

/// Meshes from config paths, or procedural wrinkled sheets.
pub fn build_meshes(cfg: &PipelineConfig) -> Result<Vec<(String, GarmentMesh)>> {
    if !cfg.mesh_paths.is_empty() {
        let mut meshes = Vec::with_capacity(cfg.mesh_paths.len());
        for path in &cfg.mesh_paths {
            let text = std::fs::read_to_string(path).map_err(|e| Error::MissingFile {
                path: path.clone(),
                msg: e.to_string(),
            })?;
            let id = path.file_stem().map_or_else(|| "mesh".to_string(), |s| s.to_string_lossy().into_owned());
            meshes.push((id, load_mesh(&text)?));
        }
        return Ok(meshes);
    }
    (0..cfg.mesh_count)
        .map(|k| {
            let seed = mix_seed(cfg.seed, MESH_STREAM, k as u64, 0);
            Ok((format!("wrinkle-{k:02}"), wrinkled_mesh(cfg.mesh_cells, cfg.mesh_amplitude, seed)?))
        })
        .collect()
}

pub fn build_envs(cfg: &PipelineConfig) -> Result<Vec<(String, EnvironmentMap)>> {
    cfg.env_presets
        .iter()
        .map(|name| Ok((name.clone(), EnvironmentMap::preset(name, cfg.env_height)?)))
        .collect()
}

pub fn run(mut cfg: PipelineConfig, args: ForgeArgs) -> CliResult<()> {
    if let Some(p) = args.pairs {
        cfg.pairs_per_material = p;
    }
    if let Some(m) = args.materials {
        cfg.texture_materials = m;
    }
    cfg.validate()?;
    for path in &cfg.mesh_paths {
        require_file(path, "mesh")?;
    }
    echo("forge", &cfg, json!({ "split": args.split.as_str() }));
    let _lock = OutputLock::acquire(&cfg.out_dir)?;

    let meshes = build_meshes(&cfg)?;
    let envs = build_envs(&cfg)?;
    let mut splits = serde_json::Map::new();
    let mut manifests = Vec::new();
    for split in args.split.splits() {
        let assets = build_assets(&cfg, split)?;
        progress(format!(
            "forging {} split: {} materials x {} pairs",
            split.as_str(),
            assets.len(),
            cfg.pairs_per_material
        ));
        let fcfg = cfg.forge_config(split, mix_seed(cfg.seed, FORGE_STREAM, split_tag(split), 0));
        let out = forge_pairs(&assets, &meshes, &envs, &fcfg)?;
        let dir = cfg.out_dir.join("dataset").join(split.as_str());
        let manifest = write_manifest(&out.examples, split, &dir)?;
        let total = assets.len() * cfg.pairs_per_material;
        let texture = out.examples.iter().filter(|e| e.kind == PairKind::Texture).count();
        splits.insert(
            split.as_str().into(),
            json!({
                "manifest": manifest,
                "examples": out.examples.len(),
                "texture": texture,
                "print": out.examples.len() - texture,
                "skipped": out.skipped.len(),
                "skip_rate": out.skipped.len() as f64 / total as f64,
            }),
        );
        manifests.push(manifest);
    }
    let disjoint = if manifests.len() == 2 {
        let a = read_manifest_file(&manifests[0])?;
        let b = read_manifest_file(&manifests[1])?;
        check_material_disjointness(&a, &b)?;
        Some(true)
    } else {
        None
    };
    emit(json!({ "splits": splits, "disjoint_materials": disjoint }));
    Ok(())
}
