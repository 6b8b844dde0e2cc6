//! File formats: binary netpbm images, Middlebury `.flo` flow, `Pf` float
//! depth maps, the refinement state directory, configs and CSV reports.

mod config;
mod flo;
mod netpbm;
mod pfm;
mod state;

pub use config::{
    load_run_config, load_scene, metrics_csv, trace_csv, write_metrics_csv, write_trace_csv, RunConfig,
};
pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC};
pub use netpbm::{decode_pnm, encode_pnm, read_image, write_image};
pub use pfm::{decode_pfm, encode_pfm, read_depth, write_depth};
pub use state::{
    format_intrinsics, format_pose, parse_intrinsics, parse_pose, read_calibration, read_state, write_state,
    DEPTH_FILE, FLOW_BWD_FILE, FLOW_FWD_FILE, INTRINSICS_FILE, POSE_FILE,
};

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

fn staging_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = staging_path(path);
    if let Err(e) = fs::write(&tmp, bytes) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Writes every `(name, bytes)` into `dir`. Files are staged in a sibling
/// directory first, so a failure leaves `dir` without partial files.
pub fn write_dir_atomic(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<()> {
    let tmp = staging_path(dir);
    let _ = fs::remove_dir_all(&tmp);
    let staged = (|| -> Result<()> {
        fs::create_dir_all(&tmp)?;
        for (name, bytes) in files {
            fs::write(tmp.join(name), bytes)?;
        }
        Ok(())
    })();
    if let Err(e) = staged {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if !dir.exists() {
        fs::rename(&tmp, dir)?;
        return Ok(());
    }
    for (name, _) in files {
        fs::rename(tmp.join(name), dir.join(name))?;
    }
    fs::remove_dir_all(&tmp)?;
    Ok(())
}
