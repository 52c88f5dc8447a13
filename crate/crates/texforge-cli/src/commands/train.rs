//! `texforge train`: fit the texture normalizer on a forged split, logging
//! per-step losses and writing a resumable checkpoint.

use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use texforge::diffusion::{load_checkpoint, pairs_from_dataset, save_checkpoint, train, Adam, Denoiser};
use texforge::forge::load_dataset;
use texforge::Error;

use crate::commands::{echo, emit, progress, require_file, CliResult};
use crate::config::PipelineConfig;
use crate::lock::OutputLock;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training manifest (default: <out>/dataset/train/manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Total optimizer steps to reach (overrides the config).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Resume from an existing checkpoint; the step counter continues.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Zero wall-clock fields so repeated runs produce identical logs.
    #[arg(long)]
    pub deterministic: bool,
}

pub fn run(mut cfg: PipelineConfig, args: TrainArgs) -> CliResult<()> {
    if let Some(s) = args.steps {
        cfg.train_steps = s;
    }
    cfg.validate()?;
    let manifest = args
        .manifest
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("dataset").join("train").join("manifest.json"));
    require_file(&manifest, "training manifest")?;
    if let Some(resume) = &args.resume {
        require_file(resume, "resume checkpoint")?;
    }
    echo(
        "train",
        &cfg,
        json!({ "manifest": manifest, "resume": args.resume, "deterministic": args.deterministic }),
    );
    let _lock = OutputLock::acquire(&cfg.out_dir)?;

    let dataset = load_dataset(&manifest)?;
    progress(format!("loaded {} pairs from {}", dataset.len(), manifest.display()));
    let pairs = pairs_from_dataset::<f32>(&dataset)?;
    let arch = cfg.arch();
    let sched = cfg.schedule()?;
    let (mut net, mut adam) = match &args.resume {
        Some(path) => {
            let (net, adam) = load_checkpoint(path, Some(&arch))?;
            progress(format!("resumed at step {} from {}", adam.step(), path.display()));
            (net, adam)
        }
        None => {
            let net = Denoiser::<f32>::init(&arch, cfg.seed)?;
            let adam = Adam::new(&net);
            (net, adam)
        }
    };

    let train_dir = cfg.out_dir.join("train");
    std::fs::create_dir_all(&train_dir).map_err(Error::from)?;
    let log_path = train_dir.join("loss.jsonl");
    // A fresh run truncates the log; resuming appends so the file stays a
    // complete per-step history.
    let file = OpenOptions::new()
        .create(true)
        .append(args.resume.is_some())
        .truncate(args.resume.is_none())
        .write(true)
        .open(&log_path)
        .map_err(Error::from)?;
    let mut log = BufWriter::new(file);
    let mut log_err: Option<std::io::Error> = None;
    let mut first_loss = None;
    let mut final_loss = None;
    let total = cfg.train_steps;
    let every = cfg.log_every;

    train(&mut net, &mut adam, &sched, &cfg.train_config(), &pairs, args.deterministic, |e| {
        if log_err.is_none() {
            let line = serde_json::to_string(e).expect("log entry serializes");
            if let Err(err) = writeln!(log, "{line}") {
                log_err = Some(err);
            }
        }
        first_loss.get_or_insert(e.loss);
        final_loss = Some(e.loss);
        let done = e.step as usize + 1;
        if done % every == 0 || done == total {
            progress(format!("step {done}/{total}  loss {:.6}", e.loss));
        }
    })?;
    if let Some(err) = log_err {
        return Err(Error::from(err).into());
    }
    log.flush().map_err(Error::from)?;

    let ckpt = train_dir.join("model.ckpt");
    save_checkpoint(&ckpt, &net, &adam)?;
    emit(json!({
        "checkpoint": ckpt,
        "loss_log": log_path,
        "steps": adam.step(),
        "first_loss": first_loss,
        "final_loss": final_loss,
    }));
    Ok(())
}
