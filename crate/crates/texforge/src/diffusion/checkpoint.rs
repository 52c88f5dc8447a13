//! Versioned binary checkpoints: model weights, Adam moments, and the step
//! counter, guarded by an architecture hash and a whole-file checksum.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "TXFCKPT1" | version u32 | arch_json_len u32 | arch JSON
//! | arch sha256 (32 bytes) | step u64 | tensor_count u32
//! | per tensor: name_len u16, name, ndims u8, dims u32 each, f32 data
//! | sha256 of everything above (32 bytes)
//! ```
//!
//! Tensors appear in the model's canonical order, followed by the Adam first
//! and second moments under `adam.m.*` / `adam.v.*`. Loading validates the
//! checksum, magic, version, architecture, every name and shape, finiteness
//! of every value, and that no bytes trail the payload.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::diffusion::net::{Arch, Denoiser};
use crate::diffusion::train::Adam;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TXFCKPT1";
const VERSION: u32 = 1;

fn arch_digest(arch: &Arch) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(arch.canonical_json().as_bytes());
    h.finalize().into()
}

fn push_tensor(buf: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f32]) -> Result<()> {
    if name.len() > u16::MAX as usize {
        return Err(Error::Checkpoint(format!("tensor name '{name}' too long")));
    }
    let count: usize = shape.iter().product();
    if count != data.len() {
        return Err(Error::Checkpoint(format!(
            "tensor '{name}' shape {shape:?} does not cover {} values",
            data.len()
        )));
    }
    buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.push(shape.len() as u8);
    for &d in shape {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

/// Serialize model and optimizer state. Refuses non-finite values.
pub fn save_checkpoint(path: &Path, net: &Denoiser<f32>, adam: &Adam<f32>) -> Result<()> {
    let named: Vec<(String, Vec<usize>, &[f32])> = net
        .tensors()
        .into_iter()
        .chain(adam.m.tensors().into_iter().map(|(n, s, d)| (format!("adam.m.{n}"), s, d)))
        .chain(adam.v.tensors().into_iter().map(|(n, s, d)| (format!("adam.v.{n}"), s, d)))
        .collect();
    for (name, _, data) in &named {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("tensor '{name}' contains non-finite values")));
        }
    }
    let arch_json = net.arch().canonical_json();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(arch_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(arch_json.as_bytes());
    buf.extend_from_slice(&arch_digest(net.arch()));
    buf.extend_from_slice(&adam.step.to_le_bytes());
    buf.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, shape, data) in &named {
        push_tensor(&mut buf, name, shape, data)?;
    }
    let digest: [u8; 32] = Sha256::digest(&buf).into();
    buf.extend_from_slice(&digest);
    let tmp = path.with_extension("ckpt.tmp");
    fs::write(&tmp, &buf)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "truncated checkpoint: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

/// Load a checkpoint, optionally enforcing an expected architecture (e.g.
/// the one implied by the run configuration).
pub fn load_checkpoint(path: &Path, expected: Option<&Arch>) -> Result<(Denoiser<f32>, Adam<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::MissingFile {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    if bytes.len() < MAGIC.len() + 32 {
        return Err(Error::Checkpoint("file too short to be a checkpoint".into()));
    }
    let (payload, footer) = bytes.split_at(bytes.len() - 32);
    let digest: [u8; 32] = Sha256::digest(payload).into();
    if digest.as_slice() != footer {
        return Err(Error::Checkpoint(
            "integrity check failed: checksum mismatch (corrupted or tampered file)".into(),
        ));
    }
    let mut r = Reader { buf: payload, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC.as_slice() {
        return Err(Error::Checkpoint("bad magic: not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}, this build reads {VERSION}"
        )));
    }
    let arch_len = r.u32()? as usize;
    let arch_json = std::str::from_utf8(r.take(arch_len)?)
        .map_err(|_| Error::Checkpoint("architecture JSON is not UTF-8".into()))?;
    let arch: Arch = serde_json::from_str(arch_json)
        .map_err(|e| Error::Checkpoint(format!("bad architecture JSON: {e}")))?;
    arch.validate()?;
    let stored_digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    if stored_digest != arch_digest(&arch) {
        return Err(Error::Checkpoint("architecture hash does not match its JSON".into()));
    }
    if let Some(exp) = expected {
        if exp != &arch {
            return Err(Error::Checkpoint(format!(
                "architecture mismatch: checkpoint has {}, expected {}",
                arch.canonical_json(),
                exp.canonical_json()
            )));
        }
    }
    let step = r.u64()?;
    let tensor_count = r.u32()? as usize;

    let mut net: Denoiser<f32> = Denoiser::init(&arch, 0)?;
    let mut m = net.zeros_like();
    let mut v = net.zeros_like();
    {
        let mut slots: Vec<(String, Vec<usize>, &mut [f32])> = net
            .tensors_mut()
            .into_iter()
            .chain(m.tensors_mut().into_iter().map(|(n, s, d)| (format!("adam.m.{n}"), s, d)))
            .chain(v.tensors_mut().into_iter().map(|(n, s, d)| (format!("adam.v.{n}"), s, d)))
            .collect();
        if tensor_count != slots.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {tensor_count} tensors, model needs {}",
                slots.len()
            )));
        }
        for (name, shape, dst) in slots.iter_mut() {
            let name_len = r.u16()? as usize;
            let got_name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            if got_name != name.as_str() {
                return Err(Error::Checkpoint(format!(
                    "tensor order mismatch: found '{got_name}', expected '{name}'"
                )));
            }
            let ndims = r.u8()? as usize;
            let mut got_shape = Vec::with_capacity(ndims);
            for _ in 0..ndims {
                got_shape.push(r.u32()? as usize);
            }
            if got_shape != *shape {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}' has shape {got_shape:?}, expected {shape:?}"
                )));
            }
            let raw = r.take(4 * dst.len())?;
            for (slot, chunk) in dst.iter_mut().zip(raw.chunks_exact(4)) {
                let val = f32::from_le_bytes(chunk.try_into().unwrap());
                if !val.is_finite() {
                    return Err(Error::Checkpoint(format!(
                        "tensor '{name}' contains a non-finite value"
                    )));
                }
                *slot = val;
            }
        }
        if r.pos != payload.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after the last tensor",
                payload.len() - r.pos
            )));
        }
    }
    Ok((net, Adam::from_state(m, v, step)))
}
