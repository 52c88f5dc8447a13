//! `texforge tile`: repeat a texture by explicit counts or by proportions
//! estimated from a garment mask.

use std::path::PathBuf;

use clap::{ArgGroup, Args};
use serde_json::json;

use texforge::image::read_mask_png;
use texforge::postprocess::{estimate_tiling_scale, tile_texture, GarmentMask};
use texforge::render::CropRect;

use crate::commands::{echo, emit, parse_pair, progress, read_image, require_file, write_image, CliError, CliResult};
use crate::config::PipelineConfig;
use crate::lock::OutputLock;

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true)))]
pub struct TileArgs {
    /// Texture to tile (PNG or PFM by extension).
    #[arg(long)]
    pub texture: PathBuf,
    /// Garment mask PNG; repeats come from its proportions.
    #[arg(long, group = "source", requires = "capture")]
    pub mask: Option<PathBuf>,
    /// Capture rectangle "x,y,w,h" inside the mask frame (with --mask).
    #[arg(long)]
    pub capture: Option<String>,
    /// Explicit repeats "rx,ry".
    #[arg(long, group = "source")]
    pub repeats: Option<String>,
    /// Output image (default: <out>/tile/<stem>_tiled.<ext>).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(cfg: PipelineConfig, args: TileArgs) -> CliResult<()> {
    // Flag-value errors are usage errors, so parse before touching files.
    let explicit = match &args.repeats {
        Some(s) => {
            let (rx, ry) = parse_pair::<f32>(s, "repeats")?;
            if !(rx.is_finite() && rx > 0.0 && ry.is_finite() && ry > 0.0) {
                return Err(CliError::usage(format!("--repeats must be positive, got {rx},{ry}")));
            }
            Some((rx, ry))
        }
        None => None,
    };
    let capture = match &args.capture {
        Some(s) => {
            let parts: Vec<&str> = s.split(',').collect();
            let nums: Vec<usize> = parts.iter().filter_map(|p| p.trim().parse().ok()).collect();
            if parts.len() != 4 || nums.len() != 4 {
                return Err(CliError::usage(format!("--capture expects 'x,y,w,h', got '{s}'")));
            }
            Some(CropRect::new(nums[0], nums[1], nums[2], nums[3]))
        }
        None => None,
    };
    cfg.validate()?;
    require_file(&args.texture, "texture")?;
    if let Some(mask) = &args.mask {
        require_file(mask, "mask")?;
    }
    let ext = if args.texture.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm")) {
        "pfm"
    } else {
        "png"
    };
    let stem = args
        .texture
        .file_stem()
        .map_or_else(|| "texture".to_string(), |s| s.to_string_lossy().into_owned());
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("tile").join(format!("{stem}_tiled.{ext}")));
    echo(
        "tile",
        &cfg,
        json!({
            "texture": args.texture,
            "mask": args.mask,
            "capture": args.capture,
            "repeats": args.repeats,
            "output": output,
        }),
    );
    let _lock = OutputLock::acquire(&cfg.out_dir)?;

    let tex = read_image(&args.texture)?;
    let (rx, ry) = match (&args.mask, explicit) {
        (Some(mask_path), None) => {
            let (mask, w, h) = read_mask_png(mask_path)?;
            let rect = capture.expect("clap enforces --capture with --mask");
            let garment = GarmentMask::new(w, h, mask, rect)?;
            let repeats = estimate_tiling_scale(&garment, cfg.chart_extent)?;
            progress(format!("estimated repeats {:.3} x {:.3} from {}", repeats.0, repeats.1, mask_path.display()));
            repeats
        }
        (None, Some(r)) => r,
        // clap's arg group guarantees exactly one source.
        _ => unreachable!("source group"),
    };
    let tiled = tile_texture(&tex, rx, ry)?;
    write_image(&tiled, &output)?;
    emit(json!({
        "repeats": [rx, ry],
        "output": output,
        "width": tiled.width(),
        "height": tiled.height(),
    }));
    Ok(())
}
