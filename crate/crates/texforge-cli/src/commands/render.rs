//! `texforge render`: draw one material draped on a garment next to its
//! flat reference, for visual inspection and calibration checks.

use std::path::PathBuf;

use clap::Args;
use rand::Rng;
use serde_json::json;

use texforge::forge::{albedo_preset, make_print_material, make_pseudo_brdf, print_preset, UvRect};
use texforge::image::{write_mask_png, Image};
use texforge::math::Vec3;
use texforge::pbr::MaterialSet;
use texforge::render::{
    load_mesh, render_flat, render_garment, Camera, EnvironmentMap, FlatRenderParams,
    GarmentRenderParams, Projection,
};
use texforge::rng::{self, mix_seed};
use texforge::{Error, Result};

use crate::commands::forge::build_meshes;
use crate::commands::{echo, emit, progress, require_file, write_image, CliError, CliResult};
use crate::config::PipelineConfig;
use crate::lock::OutputLock;

/// Stream tag for render-time material draws.
const RENDER_STREAM: u64 = 0x726e_6472;

pub const CAMERA_PRESETS: [&str; 4] = ["front", "oblique", "side", "close"];

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Albedo preset for the material.
    #[arg(long, default_value = "stripes")]
    pub material: String,
    /// Constant albedo "r,g,b" in [0,1); replaces the preset material.
    #[arg(long)]
    pub albedo: Option<String>,
    /// Print preset composited onto the material.
    #[arg(long)]
    pub print: Option<String>,
    /// Environment preset (overrides the config).
    #[arg(long)]
    pub env: Option<String>,
    /// Camera preset: front, oblique, side, or close.
    #[arg(long)]
    pub camera: Option<String>,
    /// OBJ mesh to drape (default: procedural wrinkled sheet).
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Samples per pixel (overrides the config).
    #[arg(long)]
    pub spp: Option<u32>,
    /// BRDF lobes: all, diffuse, or specular (overrides the config).
    #[arg(long)]
    pub lobes: Option<String>,
    /// Material repeats across the UV chart.
    #[arg(long, default_value_t = 1.0)]
    pub tiling: f32,
}

/// Perspective camera for a named viewpoint around the mesh bounds.
fn camera_for(preset: &str, lo: Vec3, hi: Vec3) -> CliResult<Camera> {
    let fov = 0.7f32;
    let center = (lo + hi) * 0.5;
    let half = (hi - lo) * 0.5;
    let radius = half.length().max(1e-4);
    let dist = radius / (fov / 2.0).tan() * 1.12;
    let eye = match preset {
        "front" => return Ok(Camera::framing(lo, hi, fov)?),
        "oblique" => center + Vec3::new(0.55, -0.5, 0.75).normalized() * (dist + half.z),
        "side" => center + Vec3::new(0.95, 0.0, 0.35).normalized() * (dist + half.x),
        "close" => center + Vec3::new(0.0, 0.0, dist * 0.55 + half.z),
        other => {
            return Err(CliError::usage(format!(
                "unknown camera preset '{other}', expected one of {CAMERA_PRESETS:?}"
            )))
        }
    };
    Ok(Camera::look_at(eye, center, Vec3::new(0.0, 1.0, 0.0), Projection::Perspective { fov_y: fov })?)
}

fn parse_albedo(spec: &str) -> CliResult<Vec3> {
    let vals: Vec<f32> = spec.split(',').filter_map(|p| p.trim().parse().ok()).collect();
    if vals.len() != 3 || !vals.iter().all(|v| (0.0..1.0).contains(v)) {
        return Err(CliError::usage(format!(
            "--albedo expects three components in [0,1), got '{spec}'"
        )));
    }
    Ok(Vec3::new(vals[0], vals[1], vals[2]))
}

/// The rendered material: a constant-albedo reference, or a seeded pseudo
/// material from the named preset, optionally carrying a print.
fn build_material(cfg: &PipelineConfig, args: &RenderArgs, albedo: Option<Vec3>) -> Result<(String, MaterialSet)> {
    let res = cfg.patch_size;
    let mut r = rng::stream(cfg.seed, &[RENDER_STREAM]);
    let (mut id, mut material) = match albedo {
        Some(a) => {
            let map = Image::from_fn(res, res, 3, |_, _| [a.x, a.y, a.z, 0.0]);
            let mat = MaterialSet::new(
                map,
                MaterialSet::flat_normal_map(res),
                MaterialSet::constant_map(res, 0.7),
                MaterialSet::constant_map(res, 0.0),
            )?;
            ("flat-albedo".to_string(), mat)
        }
        None => {
            let map = albedo_preset(&args.material, res, r.random())?;
            (args.material.clone(), make_pseudo_brdf(map, &mut r)?)
        }
    };
    if let Some(kind) = &args.print {
        let print = print_preset(kind, res, r.random())?;
        let placement = UvRect::new(0.2, 0.2, 0.6, 0.6)?;
        let (printed, _used) = make_print_material(&print, &material, placement, &mut r)?;
        material = printed;
        id = format!("{id}+{kind}");
    }
    Ok((id, material))
}

pub fn run(mut cfg: PipelineConfig, args: RenderArgs) -> CliResult<()> {
    if let Some(env) = &args.env {
        cfg.env = env.clone();
    }
    if let Some(camera) = &args.camera {
        cfg.camera = camera.clone();
    }
    if let Some(spp) = args.spp {
        cfg.spp = spp;
    }
    if let Some(lobes) = &args.lobes {
        cfg.lobes = lobes.clone();
    }
    if !CAMERA_PRESETS.contains(&cfg.camera.as_str()) {
        return Err(CliError::usage(format!(
            "unknown camera preset '{}', expected one of {CAMERA_PRESETS:?}",
            cfg.camera
        )));
    }
    if !(args.tiling.is_finite() && args.tiling > 0.0) {
        return Err(CliError::usage(format!("--tiling must be positive, got {}", args.tiling)));
    }
    let albedo = args.albedo.as_deref().map(parse_albedo).transpose()?;
    cfg.validate()?;
    if let Some(mesh) = &args.mesh {
        require_file(mesh, "mesh")?;
    }
    echo(
        "render",
        &cfg,
        json!({
            "material": args.material,
            "albedo": args.albedo,
            "print": args.print,
            "mesh": args.mesh,
            "tiling": args.tiling,
        }),
    );
    let _lock = OutputLock::acquire(&cfg.out_dir)?;

    let (mesh_id, mesh) = match &args.mesh {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::MissingFile {
                path: path.clone(),
                msg: e.to_string(),
            })?;
            let id = path.file_stem().map_or_else(|| "mesh".to_string(), |s| s.to_string_lossy().into_owned());
            (id, load_mesh(&text)?)
        }
        None => build_meshes(&cfg)?.swap_remove(0),
    };
    let (material_id, material) = build_material(&cfg, &args, albedo)?;
    let env = EnvironmentMap::preset(&cfg.env, cfg.env_height)?;
    let (lo, hi) = mesh.bounds();
    let camera = camera_for(&cfg.camera, lo, hi)?;
    let lobes = cfg.brdf_lobes()?;

    progress(format!(
        "rendering {material_id} on {mesh_id} under {} ({} camera, {} spp)",
        cfg.env, cfg.camera, cfg.spp
    ));
    let mut params = GarmentRenderParams::new(cfg.render_size, cfg.spp, mix_seed(cfg.seed, RENDER_STREAM, 1, 0));
    params.tiling_scale = args.tiling;
    params.lobes = lobes;
    let view = render_garment(&mesh, &material, &env, &camera, &params)?;

    let mut flat_params = FlatRenderParams::new(cfg.render_size);
    flat_params.lobes = lobes;
    let flat = render_flat(&material, &flat_params)?;

    let dir = cfg.out_dir.join("render");
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let garment_png = dir.join("garment.png");
    let garment_pfm = dir.join("garment.pfm");
    let coverage_png = dir.join("coverage.png");
    let flat_png = dir.join("flat.png");
    let flat_pfm = dir.join("flat.pfm");
    let albedo_pfm = dir.join("albedo.pfm");
    write_image(&view.image, &garment_png)?;
    write_image(&view.image, &garment_pfm)?;
    write_mask_png(&view.coverage, cfg.render_size, cfg.render_size, &coverage_png)?;
    write_image(&flat, &flat_png)?;
    write_image(&flat, &flat_pfm)?;
    write_image(material.albedo(), &albedo_pfm)?;

    emit(json!({
        "garment_png": garment_png,
        "garment_pfm": garment_pfm,
        "coverage_png": coverage_png,
        "flat_png": flat_png,
        "flat_pfm": flat_pfm,
        "albedo_pfm": albedo_pfm,
        "coverage": view.coverage_fraction(),
        "camera": cfg.camera,
        "env": cfg.env,
        "material": material_id,
        "mesh": mesh_id,
    }));
    Ok(())
}
