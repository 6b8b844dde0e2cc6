//! Regularizers: edge-aware first-order smoothness and forward-backward flow
//! consistency.

use super::{check_same_size, pairwise_sum};
use crate::error::{Error, Result};
use crate::geometry::PixelCoord;
use crate::image::{image_gradient, stencil, DepthMap, FlowField, Image};

#[derive(Debug, Clone)]
pub struct SmoothnessResult {
    pub loss: f64,
    /// Gradient with respect to the field as passed in (depth in meters, or
    /// interleaved flow).
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FlowPairResult {
    pub loss: f64,
    pub valid: usize,
    pub grad_fwd: Vec<f64>,
    pub grad_bwd: Vec<f64>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `exp(−|∂guide|)` per pixel and direction, channel-averaged.
fn edge_weights(guide: &Image) -> (Vec<f64>, Vec<f64>) {
    let g = image_gradient(guide);
    let c = g.channels;
    let n = g.width * g.height;
    let avg = |d: &[f64], i: usize| d[i * c..(i + 1) * c].iter().map(|v| v.abs()).sum::<f64>() / c as f64;
    let wu = (0..n).map(|i| (-avg(&g.du, i)).exp()).collect();
    let wv = (0..n).map(|i| (-avg(&g.dv, i)).exp()).collect();
    (wu, wv)
}

/// Edge-aware total variation of an interleaved `c`-channel field.
fn edge_aware_tv(field: &[f64], c: usize, guide: &Image) -> (f64, Vec<f64>) {
    let (w, h) = (guide.width(), guide.height());
    let n = w * h;
    let (wu, wv) = edge_weights(guide);
    let inv_n = 1.0 / n as f64;
    let mut per_pixel = vec![0.0; n];
    let mut grad = vec![0.0; n * c];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut acc = 0.0;
            for ch in 0..c {
                if x + 1 < w {
                    let diff = field[(i + 1) * c + ch] - field[i * c + ch];
                    acc += diff.abs() * wu[i];
                    let g = sign(diff) * wu[i] * inv_n;
                    grad[(i + 1) * c + ch] += g;
                    grad[i * c + ch] -= g;
                }
                if y + 1 < h {
                    let diff = field[(i + w) * c + ch] - field[i * c + ch];
                    acc += diff.abs() * wv[i];
                    let g = sign(diff) * wv[i] * inv_n;
                    grad[(i + w) * c + ch] += g;
                    grad[i * c + ch] -= g;
                }
            }
            per_pixel[i] = acc;
        }
    }
    (pairwise_sum(&per_pixel) * inv_n, grad)
}

/// Edge-aware smoothness of inverse depth, weighted by `exp(−|∇guide|)`.
pub fn smoothness_depth(depth: &DepthMap, guide: &Image) -> Result<SmoothnessResult> {
    check_same_size("depth smoothness", (depth.width(), depth.height()), (guide.width(), guide.height()))?;
    depth.require_positive("depth smoothness")?;
    let inv: Vec<f64> = depth.data().iter().map(|d| 1.0 / d).collect();
    let (loss, g_inv) = edge_aware_tv(&inv, 1, guide);
    let grad = g_inv.iter().zip(depth.data()).map(|(g, d)| -g / (d * d)).collect();
    Ok(SmoothnessResult { loss, grad })
}

/// Edge-aware smoothness of both flow components.
pub fn smoothness_flow(flow: &FlowField, guide: &Image) -> Result<SmoothnessResult> {
    check_same_size("flow smoothness", (flow.width(), flow.height()), (guide.width(), guide.height()))?;
    let (loss, grad) = edge_aware_tv(flow.data(), 2, guide);
    Ok(SmoothnessResult { loss, grad })
}

/// Mean over valid pixels of `‖F_fwd(p) + F_bwd(p + F_fwd(p))‖₁`, with
/// `F_bwd` interpolated bilinearly. Pixels whose forward target leaves
/// `[0, w−1] × [0, h−1]` are skipped; with no valid pixel the loss is 0.
pub fn forward_backward_flow(fwd: &FlowField, bwd: &FlowField) -> Result<FlowPairResult> {
    let (w, h) = (fwd.width(), fwd.height());
    check_same_size("forward-backward flows", (w, h), (bwd.width(), bwd.height()))?;
    if w < 2 || h < 2 {
        return Err(Error::InvalidInput("flow fields must be at least 2x2".into()));
    }
    let n = w * h;
    let mut grad_fwd = vec![0.0; 2 * n];
    let mut grad_bwd = vec![0.0; 2 * n];
    let mut values = Vec::with_capacity(n);
    let mut taps = Vec::with_capacity(n);
    for y in 0..h {
        for x in 0..w {
            let f = fwd.get(x, y);
            let q = PixelCoord::new(x as f64 + f[0], y as f64 + f[1]);
            let Some(st) = stencil(w, h, q.u, q.v) else { continue };
            let s = bwd.sample(q);
            let res = [f[0] + s.value[0], f[1] + s.value[1]];
            values.push(res[0].abs() + res[1].abs());
            taps.push((y * w + x, st, [sign(res[0]), sign(res[1])], s));
        }
    }
    let valid = values.len();
    if valid == 0 {
        return Ok(FlowPairResult { loss: 0.0, valid, grad_fwd, grad_bwd });
    }
    let inv_n = 1.0 / valid as f64;
    for (i, st, sg, s) in taps {
        for c in 0..2 {
            grad_fwd[2 * i + c] += sg[c] * inv_n;
            grad_fwd[2 * i] += sg[c] * s.d_du[c] * inv_n;
            grad_fwd[2 * i + 1] += sg[c] * s.d_dv[c] * inv_n;
            for j in 0..4 {
                grad_bwd[2 * st.idx[j] + c] += sg[c] * st.w[j] * inv_n;
            }
        }
    }
    Ok(FlowPairResult {
        loss: pairwise_sum(&values) * inv_n,
        valid,
        grad_fwd,
        grad_bwd,
    })
}
