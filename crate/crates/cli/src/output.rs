use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{io_at, Result};

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_at(dir))
}

pub(crate) fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io_at(&path))?;
    Ok(path)
}

pub(crate) fn write_jsonl<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_at(&path))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(io_at(&path))?;
    }
    w.flush().map_err(io_at(&path))?;
    Ok(path)
}

pub(crate) fn csv_writer(dir: &Path, name: &str) -> Result<(csv::Writer<File>, PathBuf)> {
    let path = dir.join(name);
    let w = csv::Writer::from_path(&path)?;
    Ok((w, path))
}

/// Shortest round-trip representation, so CSV values reload bit-exactly.
pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}
