//! Noise-prediction training loop: uniform timesteps, condition dropout for
//! classifier-free guidance, Adam updates, and bit-reproducible logs.
//!
//! All per-step randomness is drawn from a stream keyed by (seed, step), so a
//! run resumed from a checkpoint is bit-identical to one that never stopped.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffusion::net::Denoiser;
use crate::diffusion::schedule::{add_noise, NoiseSchedule};
use crate::diffusion::tensor::{image_to_model, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::forge::LoadedDataset;
use crate::rng;

const TRAIN_STREAM_TAG: u64 = 0x7472_6e00; // "trn"

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    /// Total optimizer steps to reach (resuming continues toward this).
    pub steps: usize,
    /// Probability of replacing the condition with the null (all-zeros) one.
    pub p_uncond: f64,
    pub seed: u64,
    pub timesteps: usize,
    pub image_size: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::invalid(format!("learning rate {} must be finite and positive", self.lr)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("step count must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_uncond) || !self.p_uncond.is_finite() {
            return Err(Error::invalid(format!(
                "condition dropout probability {} must lie in [0, 1]",
                self.p_uncond
            )));
        }
        if self.timesteps < 2 {
            return Err(Error::invalid("timestep count must be at least 2"));
        }
        if self.image_size < 4 || self.image_size % 4 != 0 {
            return Err(Error::invalid(format!(
                "image size {} must be a positive multiple of 4",
                self.image_size
            )));
        }
        Ok(())
    }
}

/// One (condition, target) example in model space ([-1, 1] tensors).
#[derive(Debug, Clone)]
pub struct TrainPair<S> {
    pub id: String,
    pub cond: Tensor<S>,
    pub target: Tensor<S>,
}

/// Convert a loaded dataset into model-space training pairs.
pub fn pairs_from_dataset<S: Scalar>(ds: &LoadedDataset) -> Result<Vec<TrainPair<S>>> {
    if ds.pairs.is_empty() {
        return Err(Error::invalid(format!("dataset split '{}' has no examples", ds.split)));
    }
    let mut out = Vec::with_capacity(ds.pairs.len());
    for p in &ds.pairs {
        out.push(TrainPair {
            id: p.entry.id.clone(),
            cond: image_to_model(&p.condition),
            target: image_to_model(&p.target),
        });
    }
    let shape = out[0].cond.shape();
    for p in &out {
        if p.cond.shape() != shape || p.target.shape() != shape {
            return Err(Error::invalid(format!(
                "example '{}' has shape {:?}, expected {:?}",
                p.id,
                p.cond.shape(),
                shape
            )));
        }
    }
    Ok(out)
}

/// Mean squared error between two same-shaped tensors, accumulated in f64.
pub fn mse_loss<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "mse over mismatched shapes");
    let n = a.data().len() as f64;
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = x.into_f64() - y.into_f64();
            d * d
        })
        .sum::<f64>()
        / n
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Adam optimizer state; moments mirror the model's tensor layout.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    pub(crate) m: Denoiser<S>,
    pub(crate) v: Denoiser<S>,
    pub(crate) step: u64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(net: &Denoiser<S>) -> Adam<S> {
        Adam { m: net.zeros_like(), v: net.zeros_like(), step: 0 }
    }

    pub(crate) fn from_state(m: Denoiser<S>, v: Denoiser<S>, step: u64) -> Adam<S> {
        Adam { m, v, step }
    }

    /// Completed optimizer updates.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// One update; moment math runs in f64 for precision and reproducibility.
    pub fn update(&mut self, net: &mut Denoiser<S>, grads: &Denoiser<S>, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        let mut pt = net.tensors_mut();
        let mut mt = self.m.tensors_mut();
        let mut vt = self.v.tensors_mut();
        let gt = grads.tensors();
        for i in 0..pt.len() {
            let p = &mut pt[i].2;
            let m = &mut mt[i].2;
            let v = &mut vt[i].2;
            let g = gt[i].2;
            for j in 0..p.len() {
                let gj = g[j].into_f64();
                let mj = BETA1 * m[j].into_f64() + (1.0 - BETA1) * gj;
                let vj = BETA2 * v[j].into_f64() + (1.0 - BETA2) * gj * gj;
                m[j] = S::from_f64(mj);
                v[j] = S::from_f64(vj);
                let upd = lr * (mj / bc1) / ((vj / bc2).sqrt() + ADAM_EPS);
                p[j] = S::from_f64(p[j].into_f64() - upd);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    /// Wall-clock seconds for the step; zeroed in deterministic mode so logs
    /// are byte-reproducible.
    pub seconds: f64,
}

/// One optimizer step at global index `step`. Returns the pre-update batch
/// loss. All randomness comes from a stream keyed by (seed, step).
pub fn training_step<S: Scalar>(
    net: &mut Denoiser<S>,
    adam: &mut Adam<S>,
    sched: &NoiseSchedule,
    cfg: &TrainConfig,
    pairs: &[TrainPair<S>],
    step: u64,
) -> Result<f64> {
    let mut r = rng::stream(cfg.seed, &[TRAIN_STREAM_TAG, step]);
    let mut grads = net.zeros_like();
    let mut loss = 0.0f64;
    let mut bad: Vec<String> = Vec::new();
    let batch = cfg.batch_size;
    for _ in 0..batch {
        let pair = &pairs[r.random_range(0..pairs.len())];
        let t = r.random_range(0..sched.len());
        let drop_cond = r.random::<f64>() < cfg.p_uncond;
        let (c, h, w) = pair.target.shape();
        let eps = Tensor::from_fn(c, h, w, |_, _, _| {
            let z: f64 = StandardNormal.sample(&mut r);
            S::from_f64(z)
        });
        let x_t = add_noise(&pair.target, t, &eps, sched)?;
        let cond = if drop_cond { None } else { Some(&pair.cond) };
        let (eps_hat, cache) = net.forward(&x_t, t, cond)?;
        let example_loss = mse_loss(&eps_hat, &eps);
        if !example_loss.is_finite() {
            bad.push(pair.id.clone());
            continue;
        }
        loss += example_loss / batch as f64;
        let scale = 2.0 / (eps.data().len() as f64 * batch as f64);
        let d_out = Tensor::from_vec(
            c,
            h,
            w,
            eps_hat
                .data()
                .iter()
                .zip(eps.data())
                .map(|(a, b)| S::from_f64((a.into_f64() - b.into_f64()) * scale))
                .collect(),
        )?;
        net.backward(&cache, &d_out, &mut grads);
    }
    if !bad.is_empty() {
        return Err(Error::Training {
            step: step as usize,
            msg: format!("non-finite loss for example(s) {}", bad.join(", ")),
        });
    }
    if !loss.is_finite() {
        return Err(Error::Training { step: step as usize, msg: "non-finite batch loss".into() });
    }
    adam.update(net, &grads, cfg.lr);
    if !net.is_finite() {
        return Err(Error::Training {
            step: step as usize,
            msg: "parameters became non-finite after update".into(),
        });
    }
    Ok(loss)
}

/// Run training from the optimizer's current step up to `cfg.steps`.
/// `on_step` receives one log entry per optimizer update.
pub fn train<S: Scalar>(
    net: &mut Denoiser<S>,
    adam: &mut Adam<S>,
    sched: &NoiseSchedule,
    cfg: &TrainConfig,
    pairs: &[TrainPair<S>],
    deterministic: bool,
    mut on_step: impl FnMut(&TrainLogEntry),
) -> Result<()> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("training requires at least one example"));
    }
    if sched.len() != cfg.timesteps {
        return Err(Error::invalid(format!(
            "schedule has {} levels but config specifies {}",
            sched.len(),
            cfg.timesteps
        )));
    }
    for p in pairs {
        let (c, h, w) = p.cond.shape();
        if c != net.arch().image_channels || h != cfg.image_size || w != cfg.image_size {
            return Err(Error::invalid(format!(
                "example '{}' has shape {:?}, expected ({}, {}, {})",
                p.id,
                p.cond.shape(),
                net.arch().image_channels,
                cfg.image_size,
                cfg.image_size
            )));
        }
        if p.target.shape() != p.cond.shape() {
            return Err(Error::invalid(format!("example '{}' has mismatched condition/target shapes", p.id)));
        }
    }
    while adam.step() < cfg.steps as u64 {
        let step = adam.step();
        let t0 = Instant::now();
        let loss = training_step(net, adam, sched, cfg, pairs, step)?;
        let seconds = if deterministic { 0.0 } else { t0.elapsed().as_secs_f64() };
        on_step(&TrainLogEntry { step, loss, lr: cfg.lr, seconds });
    }
    Ok(())
}
