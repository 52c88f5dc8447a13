//! Subcommand implementations plus the plumbing they share: error-to-exit
//! mapping, config echo, result emission, and extension-dispatched image I/O.

pub mod eval;
pub mod forge;
pub mod infer;
pub mod render;
pub mod tile;
pub mod train;

use std::fmt;
use std::path::Path;

use serde_json::{json, Value};

use texforge::image::{read_pfm, read_png, write_display_png, write_pfm, Image, Transfer};
use texforge::Error;

use crate::config::PipelineConfig;

/// A CLI failure: `Usage` problems exit 2, library errors exit 3 for bad
/// data and 4 for numerical breakdown.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) if e.is_numerical() => 4,
            CliError::Lib(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        CliError::Lib(e)
    }
}

/// Echo the fully resolved config and per-invocation inputs as one JSON
/// line on stdout, before any side effect.
pub fn echo(command: &str, cfg: &PipelineConfig, inputs: Value) {
    println!("{}", json!({ "command": command, "config": cfg, "inputs": inputs }));
}

/// Emit the machine-readable result line on stdout.
pub fn emit(result: Value) {
    println!("{result}");
}

/// Progress note on stderr; stdout stays machine-readable.
pub fn progress(msg: impl fmt::Display) {
    eprintln!("[texforge] {msg}");
}

/// Error out early when a referenced input file is absent.
pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Lib(Error::MissingFile {
            path: path.to_path_buf(),
            msg: format!("{what} not found"),
        }))
    }
}

fn is_pfm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

/// Read `.pfm` as linear float, anything else as sRGB PNG.
pub fn read_image(path: &Path) -> texforge::Result<Image> {
    if is_pfm(path) {
        read_pfm(path)
    } else {
        read_png(path, Transfer::Srgb)
    }
}

/// Write `.pfm` as linear float, anything else as display PNG, creating
/// parent directories as needed.
pub fn write_image(img: &Image, path: &Path) -> texforge::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    if is_pfm(path) {
        write_pfm(img, path)
    } else {
        write_display_png(img, path)
    }
}

/// Parse "a,b" into two values, with a usage error naming the flag.
pub fn parse_pair<T: std::str::FromStr>(s: &str, flag: &str) -> CliResult<(T, T)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() == 2 {
        if let (Ok(a), Ok(b)) = (parts[0].trim().parse(), parts[1].trim().parse()) {
            return Ok((a, b));
        }
    }
    Err(CliError::usage(format!("--{flag} expects two comma-separated values, got '{s}'")))
}
