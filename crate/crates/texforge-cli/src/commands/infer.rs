//! `texforge infer`: normalize one garment capture with a trained
//! checkpoint, optionally extracting a transparent print.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use texforge::diffusion::{image_to_model, load_checkpoint, model_to_image, sample, SampleParams};
use texforge::postprocess::extract_alpha;
use texforge::Error;

use crate::commands::{echo, emit, progress, read_image, require_file, write_image, CliResult};
use crate::config::PipelineConfig;
use crate::lock::OutputLock;

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Garment capture to normalize (PNG, sRGB).
    #[arg(long)]
    pub input: PathBuf,
    /// Trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output image (default: <out>/infer/<stem>_normalized.png).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Additionally extract a transparent RGBA print from the result.
    #[arg(long)]
    pub print_mode: bool,
    /// Guidance scale >= 1 (overrides the config).
    #[arg(long)]
    pub guidance: Option<f64>,
    /// Denoising steps (overrides the config).
    #[arg(long)]
    pub steps: Option<usize>,
}

pub fn run(mut cfg: PipelineConfig, args: InferArgs) -> CliResult<()> {
    if let Some(g) = args.guidance {
        cfg.guidance = g;
    }
    if let Some(s) = args.steps {
        cfg.sample_steps = s;
    }
    cfg.validate()?;
    require_file(&args.input, "input capture")?;
    require_file(&args.checkpoint, "checkpoint")?;
    let stem = args
        .input
        .file_stem()
        .map_or_else(|| "capture".to_string(), |s| s.to_string_lossy().into_owned());
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("infer").join(format!("{stem}_normalized.png")));
    echo(
        "infer",
        &cfg,
        json!({
            "input": args.input,
            "checkpoint": args.checkpoint,
            "output": output,
            "print_mode": args.print_mode,
        }),
    );
    let _lock = OutputLock::acquire(&cfg.out_dir)?;

    let (net, _adam) = load_checkpoint(&args.checkpoint, None)?;
    let size = net.arch().image_size;
    let img = read_image(&args.input)?;
    if img.channels() != 3 {
        return Err(Error::invalid(format!("input must have 3 channels, got {}", img.channels())).into());
    }
    if img.width() != size || img.height() != size {
        return Err(Error::invalid(format!(
            "input is {}x{} but the checkpoint expects {size}x{size}",
            img.width(),
            img.height()
        ))
        .into());
    }

    let cond = image_to_model::<f32>(&img);
    let sched = cfg.schedule()?;
    let params = SampleParams { steps: cfg.sample_steps, guidance: cfg.guidance, seed: cfg.seed };
    progress(format!("sampling {} steps at guidance {}", params.steps, params.guidance));
    let x = sample(&net, &sched, Some(&cond), size, size, &params)?;
    let normalized = model_to_image(&x);
    write_image(&normalized, &output)?;

    let print_path = if args.print_mode {
        let print = extract_alpha(&normalized)?;
        let path = output.with_file_name(format!(
            "{}_print.png",
            output.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned())
        ));
        write_image(&print.to_image(), &path)?;
        Some(path)
    } else {
        None
    };

    emit(json!({
        "output": output,
        "print": print_path,
        "steps": cfg.sample_steps,
        "guidance": cfg.guidance,
        "seed": cfg.seed,
    }));
    Ok(())
}
