//! The refinement state directory and the small text formats inside it.
//!
//! ```text
//! depth.pfm        center-frame depth
//! flow_fwd.flo     flow center → next
//! flow_bwd.flo     flow next → center
//! pose.txt         "euler a b c" and "translation x y z" lines
//! intrinsics.txt   "fx = …", "fy = …", "width = …", "height = …"
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips `f64`.

use std::path::Path;

use super::{decode_flo, decode_pfm, encode_flo, encode_pfm, write_dir_atomic};
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, RigidMotion};
use crate::refine::OutputState;

pub const DEPTH_FILE: &str = "depth.pfm";
pub const FLOW_FWD_FILE: &str = "flow_fwd.flo";
pub const FLOW_BWD_FILE: &str = "flow_bwd.flo";
pub const POSE_FILE: &str = "pose.txt";
pub const INTRINSICS_FILE: &str = "intrinsics.txt";

/// Non-empty, non-comment lines with their byte offsets.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |l| {
        let at = offset;
        offset += l.len();
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((at, l))
    })
}

fn real(tok: &str, at: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::format(at, format!("expected a finite number, found {tok:?}")))
}

pub fn format_pose(m: &RigidMotion) -> String {
    let e = m.euler;
    let t = m.translation;
    format!(
        "euler {:.16e} {:.16e} {:.16e}\ntranslation {:.16e} {:.16e} {:.16e}\n",
        e[0], e[1], e[2], t[0], t[1], t[2]
    )
}

pub fn parse_pose(text: &str) -> Result<RigidMotion> {
    let mut euler = None;
    let mut translation = None;
    for (at, line) in lines(text) {
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        let vals: Vec<&str> = toks.collect();
        if vals.len() != 3 {
            return Err(Error::format(at, format!("{key:?} needs 3 values, found {}", vals.len())));
        }
        let v = [real(vals[0], at)?, real(vals[1], at)?, real(vals[2], at)?];
        let slot = match key {
            "euler" => &mut euler,
            "translation" => &mut translation,
            _ => return Err(Error::format(at, format!("unknown pose key {key:?}"))),
        };
        if slot.replace(v).is_some() {
            return Err(Error::format(at, format!("duplicate pose key {key:?}")));
        }
    }
    match (euler, translation) {
        (Some(e), Some(t)) => Ok(RigidMotion::new(e, t)),
        _ => Err(Error::format(text.len(), "pose needs both euler and translation lines")),
    }
}

pub fn format_intrinsics(k: &Intrinsics) -> String {
    format!(
        "fx = {:.16e}\nfy = {:.16e}\nwidth = {}\nheight = {}\n",
        k.fx, k.fy, k.width, k.height
    )
}

/// Parses `key = value` intrinsics (also the calibration file format).
pub fn parse_intrinsics(text: &str) -> Result<Intrinsics> {
    let (mut fx, mut fy, mut w, mut h) = (None, None, None, None);
    for (at, line) in lines(text) {
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::format(at, format!("expected key = value, found {line:?}")));
        };
        let (key, value) = (key.trim(), value.trim());
        let size = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::format(at, format!("{key} must be a positive integer, found {v:?}")))
        };
        let dup = match key {
            "fx" => fx.replace(real(value, at)?).is_some(),
            "fy" => fy.replace(real(value, at)?).is_some(),
            "width" => w.replace(size(value)?).is_some(),
            "height" => h.replace(size(value)?).is_some(),
            _ => return Err(Error::format(at, format!("unknown intrinsics key {key:?}"))),
        };
        if dup {
            return Err(Error::format(at, format!("duplicate intrinsics key {key:?}")));
        }
    }
    match (fx, fy, w, h) {
        (Some(fx), Some(fy), Some(w), Some(h)) => Intrinsics::new(fx, fy, w, h),
        _ => Err(Error::format(text.len(), "intrinsics need fx, fy, width and height")),
    }
}

pub fn read_calibration(path: &Path) -> Result<Intrinsics> {
    parse_intrinsics(&std::fs::read_to_string(path)?)
}

/// Writes all five files; nothing is left half-written on failure.
pub fn write_state(dir: &Path, state: &OutputState) -> Result<()> {
    write_dir_atomic(
        dir,
        &[
            (DEPTH_FILE, encode_pfm(&state.depth)),
            (FLOW_FWD_FILE, encode_flo(&state.flow_fwd)),
            (FLOW_BWD_FILE, encode_flo(&state.flow_bwd)),
            (POSE_FILE, format_pose(&state.motion).into_bytes()),
            (INTRINSICS_FILE, format_intrinsics(&state.intrinsics).into_bytes()),
        ],
    )
}

/// Reads a state directory and checks that every field has the same size.
pub fn read_state(dir: &Path) -> Result<OutputState> {
    let read = |name: &str| std::fs::read(dir.join(name));
    let text = |name: &str| std::fs::read_to_string(dir.join(name));
    let state = OutputState {
        depth: decode_pfm(&read(DEPTH_FILE)?, true)?,
        flow_fwd: decode_flo(&read(FLOW_FWD_FILE)?)?,
        flow_bwd: decode_flo(&read(FLOW_BWD_FILE)?)?,
        motion: parse_pose(&text(POSE_FILE)?)?,
        intrinsics: parse_intrinsics(&text(INTRINSICS_FILE)?)?,
    };
    state.check_shape(state.width(), state.height())?;
    Ok(state)
}
