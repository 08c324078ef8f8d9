//! CSV tables and run metadata.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Version string of this build, `git describe` style when available.
pub const VERSION: &str = env!("DPR_VERSION");

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `key = value` lines, in the given order, preceded by the version.
pub fn write_meta(dir: &Path, entries: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut text = format!("version = {VERSION}\n");
    for (k, v) in entries {
        text.push_str(&format!("{k} = {v}\n"));
    }
    let path = dir.join("meta.txt");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
