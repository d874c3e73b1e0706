//! File formats, synthetic data and run configuration.

mod config;
mod csv;
mod json;
mod toy;

use std::io::Write;
use std::path::Path;

pub use self::config::{load_run_config, RunConfig};
pub use self::csv::{load_csv, read_csv, save_csv, write_csv};
pub use self::json::{
    coords_trace_doc, load_gmm, read_json, save_gmm, to_json_bytes, write_json, DictionaryDoc, GmmDoc, PlanDoc,
};
pub use self::toy::{make_toy, ToyConfig};

use crate::error::Result;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
