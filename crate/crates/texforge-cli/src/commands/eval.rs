//! `texforge eval`: run inference across a test split, score it against the
//! targets, and report aggregate metrics plus tiled seam quality.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use texforge::diffusion::{image_to_model, load_checkpoint, model_to_image, sample, SampleParams};
use texforge::forge::load_dataset;
use texforge::image::Image;
use texforge::metrics::{seam_score, MetricReport, PairMetrics};
use texforge::postprocess::tile_texture;
use texforge::rng::mix_seed;
use texforge::{Error, Result};

use crate::commands::{echo, emit, progress, require_file, CliResult};
use crate::config::PipelineConfig;
use crate::lock::OutputLock;

/// Stream tag for per-pair sampling seeds.
const EVAL_STREAM: u64 = 0x6576_616c;
/// Highest tolerable failure fraction before the command exits nonzero.
const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Test manifest (default: <out>/dataset/test/manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Trained checkpoint (required unless --self-test).
    #[arg(long, required_unless_present = "self_test")]
    pub checkpoint: Option<PathBuf>,
    /// Score targets against themselves instead of running the model.
    #[arg(long)]
    pub self_test: bool,
    /// Guidance scale >= 1 (overrides the config).
    #[arg(long)]
    pub guidance: Option<f64>,
    /// Cap on evaluated pairs, 0 = all (overrides the config).
    #[arg(long)]
    pub limit: Option<usize>,
}

fn tiled_seam(img: &Image) -> Result<f64> {
    seam_score(&tile_texture(img, 2.0, 2.0)?)
}

pub fn run(mut cfg: PipelineConfig, args: EvalArgs) -> CliResult<()> {
    if let Some(g) = args.guidance {
        cfg.guidance = g;
    }
    if let Some(l) = args.limit {
        cfg.eval_limit = l;
    }
    cfg.validate()?;
    let manifest = args
        .manifest
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("dataset").join("test").join("manifest.json"));
    require_file(&manifest, "test manifest")?;
    if let Some(ckpt) = &args.checkpoint {
        require_file(ckpt, "checkpoint")?;
    }
    echo(
        "eval",
        &cfg,
        json!({ "manifest": manifest, "checkpoint": args.checkpoint, "self_test": args.self_test }),
    );
    let _lock = OutputLock::acquire(&cfg.out_dir)?;

    let mut dataset = load_dataset(&manifest)?;
    if cfg.eval_limit > 0 {
        dataset.pairs.truncate(cfg.eval_limit);
    }
    if dataset.is_empty() {
        return Err(Error::invalid("the test manifest has no examples").into());
    }
    let model = match (&args.checkpoint, args.self_test) {
        (Some(path), false) => Some(load_checkpoint(path, None)?.0),
        _ => None,
    };
    let sched = cfg.schedule()?;
    let total = dataset.len();
    progress(format!("evaluating {total} pairs{}", if args.self_test { " (self-test)" } else { "" }));

    let mut scored = Vec::new();
    let mut seams = Vec::new();
    let mut failures = Vec::new();
    for (i, pair) in dataset.pairs.iter().enumerate() {
        let id = pair.entry.id.clone();
        let evaluate = || -> Result<(PairMetrics, f64)> {
            let output = match &model {
                None => pair.target.clone(),
                Some(net) => {
                    let size = net.arch().image_size;
                    if pair.condition.width() != size || pair.condition.height() != size {
                        return Err(Error::invalid(format!(
                            "condition is {}x{} but the checkpoint expects {size}x{size}",
                            pair.condition.width(),
                            pair.condition.height()
                        )));
                    }
                    let cond = image_to_model::<f32>(&pair.condition);
                    let params = SampleParams {
                        steps: cfg.sample_steps,
                        guidance: cfg.guidance,
                        seed: mix_seed(cfg.seed, EVAL_STREAM, i as u64, 0),
                    };
                    model_to_image(&sample(net, &sched, Some(&cond), size, size, &params)?)
                }
            };
            Ok((PairMetrics::compute(&id, &output, &pair.target)?, tiled_seam(&output)?))
        };
        match evaluate() {
            Ok((pm, seam)) => {
                scored.push(pm);
                seams.push(seam);
            }
            Err(e) => {
                progress(format!("pair {id} failed: {e}"));
                failures.push(json!({ "id": id, "error": e.to_string() }));
            }
        }
    }

    let report = MetricReport::from_pairs(scored);
    let eval_dir = cfg.out_dir.join("eval");
    std::fs::create_dir_all(&eval_dir).map_err(Error::from)?;
    let json_path = eval_dir.join("report.json");
    let table_path = eval_dir.join("report.txt");
    std::fs::write(&json_path, report.to_json() + "\n").map_err(Error::from)?;
    let mut table = report.to_table();
    table.push_str(&format!("\nfailures: {}/{}\n", failures.len(), total));
    for f in &failures {
        table.push_str(&format!("  {}: {}\n", f["id"].as_str().unwrap_or("?"), f["error"].as_str().unwrap_or("?")));
    }
    std::fs::write(&table_path, table).map_err(Error::from)?;

    let mean_of = |name: &str| {
        report
            .summary
            .iter()
            .find(|s| s.metric == name)
            .map(|s| s.mean)
            .filter(|m| m.is_finite())
    };
    let seam_mean = if seams.is_empty() { None } else { Some(seams.iter().sum::<f64>() / seams.len() as f64) };
    let failure_rate = failures.len() as f64 / total as f64;
    emit(json!({
        "report_json": json_path,
        "report_table": table_path,
        "pairs": total,
        "failed": failures.len(),
        "failures": failures,
        "mean": {
            "mse": mean_of("mse"),
            "ssim": mean_of("ssim"),
            "ms_ssim": mean_of("ms_ssim"),
            "seam_score": mean_of("seam_score"),
        },
        "tiled_seam_mean": seam_mean,
        "self_test": args.self_test,
    }));
    if failure_rate > MAX_FAILURE_RATE {
        return Err(Error::invalid(format!(
            "{} of {total} pairs failed ({:.0}% > {:.0}% budget)",
            failures.len(),
            failure_rate * 100.0,
            MAX_FAILURE_RATE * 100.0
        ))
        .into());
    }
    Ok(())
}
