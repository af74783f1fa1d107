//! Output destinations. Files are written to a sibling temporary and renamed
//! into place, so a failed run never leaves a partial file behind.

use std::io::Write;
use std::path::PathBuf;

use tempfile::NamedTempFile;

use crate::CliError;

pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(path: Option<PathBuf>) -> Self {
        Self { path }
    }

    pub fn write(&self, text: &str) -> Result<(), CliError> {
        let Some(path) = &self.path else {
            let mut out = std::io::stdout().lock();
            let res = out.write_all(text.as_bytes()).and_then(|_| {
                if text.ends_with('\n') {
                    Ok(())
                } else {
                    out.write_all(b"\n")
                }
            });
            // a closed pipe (`| head`) is not an error
            return match res {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Internal(format!("stdout: {e}"))),
                _ => Ok(()),
            };
        };
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        if !dir.is_dir() {
            return Err(CliError::Validation(format!("output directory {} does not exist", dir.display())));
        }
        let io = |e: std::io::Error| CliError::Internal(format!("{}: {e}", path.display()));
        let mut tmp = NamedTempFile::new_in(&dir).map_err(io)?;
        tmp.write_all(text.as_bytes()).map_err(io)?;
        if !text.ends_with('\n') {
            tmp.write_all(b"\n").map_err(io)?;
        }
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }
}
