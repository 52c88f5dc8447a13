//! Output-root lockfile: one writer per output directory at a time.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use texforge::{Error, Result};

const LOCK_NAME: &str = ".texforge.lock";

/// Held for the lifetime of a command; dropping releases the lock.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    /// Create the output root if needed and claim its lockfile. Fails when
    /// another run already holds it (or a crashed run left it behind).
    pub fn acquire(root: &Path) -> Result<OutputLock> {
        fs::create_dir_all(root)?;
        let path = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::invalid(format!(
                "output root {} is locked by another run; remove {} if that run is gone",
                root.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
