//! File formats, configuration and synthetic data.
//!
//! Every writer goes through [`write_atomic`], which writes a sibling
//! temporary file and renames it over the destination.

mod checkpoint;
mod config;
mod edgelist;
mod rollcall;
mod scatter;
mod synthetic;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use config::{AnalysisConfig, DataConfig, RollcallConfig, RunConfig};
pub use edgelist::{format_edgelist, load_edgelist, parse_edgelist, write_edgelist, EDGELIST_HEADER};
pub use rollcall::{load_rollcall, parse_rollcall, RollCall, RollcallOptions, UnknownCast};
pub use scatter::{emit_scatter, scatter_csv, scatter_svg, ScatterPoint, SCATTER_HEADER};
pub use synthetic::{generate_synthetic, Synthetic, SYNTHETIC_RELATION};
pub use tables::{
    format_labels, format_values, load_ideology, load_labels, parse_labels, parse_values,
    IDEOLOGY_HEADER, LABELS_HEADER,
};

use crate::error::{Error, Result};

/// Writes `contents` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Data(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Data lines of a tab-separated file: `(line_number, fields)`, skipping
/// blank lines and lines starting with `#`. A trailing `\r` is dropped.
pub(crate) fn tsv_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

/// Rejects strings the tab-separated formats cannot carry.
pub(crate) fn check_field(value: &str, what: &str) -> Result<()> {
    if value.is_empty() {
        return Err(Error::Data(format!("{what} is empty")));
    }
    if value.contains(['\t', '\n', '\r']) {
        return Err(Error::Data(format!("{what} {value:?} contains a tab or line break")));
    }
    Ok(())
}
