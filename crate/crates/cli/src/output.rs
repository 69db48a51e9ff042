//! Atomic file output: everything is written to a temporary file in the
//! target directory and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ces_core::{Error, Result};

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Writes `name` under `dir` through `fill`, replacing any previous file in one step.
pub fn write_atomic(dir: &Path, name: &str, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(|e| io_err(&target, e))?;
    }
    tmp.persist(&target).map_err(|e| io_err(&target, e.error))?;
    Ok(target)
}

pub fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    write_atomic(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Internal(format!("json: {e}")))?;
        writeln!(w).map_err(|e| io_err(&dir.join(name), e))
    })
}

/// One JSON document per line.
pub fn write_json_lines<T: serde::Serialize>(dir: &Path, name: &str, items: &[T]) -> Result<PathBuf> {
    write_atomic(dir, name, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item).map_err(|e| Error::Internal(format!("json: {e}")))?;
            writeln!(w).map_err(|e| io_err(&dir.join(name), e))?;
        }
        Ok(())
    })
}

/// Moves every file of `from` into `to`, each by a single rename.
pub fn move_files(from: &Path, to: &Path) -> Result<()> {
    for entry in fs::read_dir(from).map_err(|e| io_err(from, e))? {
        let entry = entry.map_err(|e| io_err(from, e))?;
        let dest = to.join(entry.file_name());
        fs::rename(entry.path(), &dest).map_err(|e| io_err(&dest, e))?;
    }
    Ok(())
}
