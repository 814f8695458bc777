//! File formats. Byte layouts are documented in `FORMATS.md` at the
//! repository root.
//!
//! Every writer goes through [`write_atomic`]: the bytes land in a temporary
//! file next to the target and are renamed into place, so a failed command
//! never leaves a truncated output behind.

mod pgm;
mod ply;
mod trajectory;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use pgm::{decode_pgm, encode_pgm, read_mask, write_mask};
pub use ply::{decode_points, encode_changes, encode_cloud, read_changes, read_cloud, write_changes, write_cloud, PlyPoints};
pub use trajectory::{decode_trajectory, encode_trajectory, read_trajectory, write_trajectory};

use crate::error::{Error, Result};
use crate::optim::LossRecord;
use crate::warp::WarpParams;

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    // Temporary files are created private; outputs get ordinary permissions.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o644)).map_err(|e| Error::io(tmp.path(), e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// JSON form of [`WarpParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WarpFile {
    k: usize,
    centers: Vec<[f64; 2]>,
    sigmas: Vec<f64>,
    weights: Vec<[f64; 3]>,
}

pub fn encode_params(params: &WarpParams<f64>) -> Result<String> {
    let file = WarpFile {
        k: params.k(),
        centers: params.centers.clone(),
        sigmas: params.sigmas.clone(),
        weights: params.weights.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)? + "\n")
}

pub fn decode_params(text: &str) -> Result<WarpParams<f64>> {
    let file: WarpFile = serde_json::from_str(text)?;
    if file.centers.len() != file.k {
        return Err(Error::ShapeMismatch {
            expected: file.k,
            actual: file.centers.len(),
        });
    }
    WarpParams::new(file.centers, file.sigmas, file.weights)
}

pub fn write_params(params: &WarpParams<f64>, path: &Path) -> Result<()> {
    write_atomic(path, encode_params(params)?.as_bytes())
}

pub fn read_params(path: &Path) -> Result<WarpParams<f64>> {
    decode_params(&read_text(path)?)
}

/// `step,chamfer,regularizer,total`, one row per optimizer step.
pub fn encode_trace(trace: &[LossRecord]) -> String {
    let mut out = String::from("step,chamfer,regularizer,total\n");
    for (i, r) in trace.iter().enumerate() {
        out += &format!("{i},{},{},{}\n", r.chamfer, r.regularizer, r.total);
    }
    out
}

pub fn write_trace(trace: &[LossRecord], path: &Path) -> Result<()> {
    write_atomic(path, encode_trace(trace).as_bytes())
}
