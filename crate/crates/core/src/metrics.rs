//! Depth error/accuracy statistics, flow end-point error and trajectory error.

use crate::error::{Error, Result};
use crate::image::{DepthMap, FlowField};

/// Conventional cap on ground-truth depth, meters.
pub const DEFAULT_DEPTH_CAP: f64 = 80.0;
pub const DEFAULT_ATE_SNIPPET: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl DepthMetrics {
    pub const COLUMNS: [&'static str; 7] = ["abs_rel", "sq_rel", "rmse", "rmse_log", "a1", "a2", "a3"];

    pub fn as_array(&self) -> [f64; 7] {
        [self.abs_rel, self.sq_rel, self.rmse, self.rmse_log, self.a1, self.a2, self.a3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMetrics {
    pub epe_all: f64,
    pub epe_noc: f64,
}

impl FlowMetrics {
    pub const COLUMNS: [&'static str; 2] = ["epe_all", "epe_noc"];

    pub fn as_array(&self) -> [f64; 2] {
        [self.epe_all, self.epe_noc]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseMetrics {
    pub ate_mean: f64,
    pub ate_std: f64,
}

impl PoseMetrics {
    pub const COLUMNS: [&'static str; 2] = ["ate_mean", "ate_std"];

    pub fn as_array(&self) -> [f64; 2] {
        [self.ate_mean, self.ate_std]
    }
}

fn check_mask(mask: Option<&[bool]>, n: usize) -> Result<()> {
    match mask {
        Some(m) if m.len() != n => Err(Error::InvalidInput(format!("mask has {} entries, expected {n}", m.len()))),
        _ => Ok(()),
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard monocular depth statistics over `mask` (all pixels when `None`),
/// restricted to ground truth in `(0, cap]`.
///
/// With `median_scale`, predictions are first multiplied by
/// `median(gt) / median(pred)` over the evaluated pixels.
pub fn depth_metrics(
    pred: &DepthMap,
    gt: &DepthMap,
    mask: Option<&[bool]>,
    median_scale: bool,
    cap: f64,
) -> Result<DepthMetrics> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::InvalidInput("prediction and ground truth differ in shape".into()));
    }
    check_mask(mask, gt.data().len())?;
    let mut pairs = Vec::new();
    for (i, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if mask.is_some_and(|m| !m[i]) || !(g > 0.0 && g <= cap) {
            continue;
        }
        if !(p > 0.0) {
            return Err(Error::InvalidInput(format!("predicted depth at pixel {i} is {p}")));
        }
        pairs.push((p, g));
    }
    if pairs.is_empty() {
        return Err(Error::EmptySupport("depth metrics"));
    }
    if median_scale {
        let mp = median(&mut pairs.iter().map(|x| x.0).collect::<Vec<_>>());
        let mg = median(&mut pairs.iter().map(|x| x.1).collect::<Vec<_>>());
        let s = mg / mp;
        for x in &mut pairs {
            x.0 *= s;
        }
    }
    let n = pairs.len() as f64;
    let mean = |f: &dyn Fn(f64, f64) -> f64| pairs.iter().map(|&(p, g)| f(p, g)).sum::<f64>() / n;
    let within = |t: f64| pairs.iter().filter(|&&(p, g)| (p / g).max(g / p) < t).count() as f64 / n;
    Ok(DepthMetrics {
        abs_rel: mean(&|p, g| (p - g).abs() / g),
        sq_rel: mean(&|p, g| (p - g) * (p - g) / g),
        rmse: mean(&|p, g| (p - g) * (p - g)).sqrt(),
        rmse_log: mean(&|p, g| (p.ln() - g.ln()).powi(2)).sqrt(),
        a1: within(1.25),
        a2: within(1.25 * 1.25),
        a3: within(1.25 * 1.25 * 1.25),
    })
}

fn mean_epe(pred: &FlowField, gt: &FlowField, mask: Option<&[bool]>, what: &'static str) -> Result<f64> {
    let (p, g) = (pred.data(), gt.data());
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..g.len() / 2 {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        sum += (p[2 * i] - g[2 * i]).hypot(p[2 * i + 1] - g[2 * i + 1]);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySupport(what));
    }
    Ok(sum / n as f64)
}

/// Mean end-point error over `all` (every pixel when `None`) and over the
/// non-occluded mask `noc` (falls back to `all` when `None`).
pub fn flow_epe(pred: &FlowField, gt: &FlowField, all: Option<&[bool]>, noc: Option<&[bool]>) -> Result<FlowMetrics> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::InvalidInput("prediction and ground truth differ in shape".into()));
    }
    let n = gt.width() * gt.height();
    check_mask(all, n)?;
    check_mask(noc, n)?;
    Ok(FlowMetrics {
        epe_all: mean_epe(pred, gt, all, "flow epe (all)")?,
        epe_noc: mean_epe(pred, gt, noc.or(all), "flow epe (noc)")?,
    })
}

/// Error of one snippet: both trajectories are expressed relative to their
/// first position, the prediction is scaled by the least-squares factor, and
/// the result is `sqrt(Σ‖e‖²) / len`.
pub fn snippet_ate(pred: &[[f64; 3]], gt: &[[f64; 3]]) -> f64 {
    let rel = |t: &[[f64; 3]]| -> Vec<[f64; 3]> { t.iter().map(|p| std::array::from_fn(|c| p[c] - t[0][c])).collect() };
    let (shifted, gt) = (rel(pred), rel(gt));
    let gt = &gt[..];
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, g) in shifted.iter().zip(gt) {
        for c in 0..3 {
            num += g[c] * p[c];
            den += p[c] * p[c];
        }
    }
    let scale = if den > 0.0 { num / den } else { 1.0 };
    let mut sq = 0.0;
    for (p, g) in shifted.iter().zip(gt) {
        for c in 0..3 {
            let e = p[c] * scale - g[c];
            sq += e * e;
        }
    }
    sq.sqrt() / gt.len() as f64
}

/// Trajectory error over every window of `snippet` consecutive camera
/// positions (one window when the sequence is shorter); mean and population
/// standard deviation across windows.
pub fn ate(pred: &[[f64; 3]], gt: &[[f64; 3]], snippet: usize) -> Result<PoseMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidInput(format!("trajectories have {} and {} poses", pred.len(), gt.len())));
    }
    if gt.len() < 2 || snippet < 2 {
        return Err(Error::InvalidInput("ate needs at least two poses per snippet".into()));
    }
    if pred.iter().chain(gt).flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("trajectory has non-finite positions".into()));
    }
    let len = snippet.min(gt.len());
    let errs: Vec<f64> = (0..=gt.len() - len)
        .map(|s| snippet_ate(&pred[s..s + len], &gt[s..s + len]))
        .collect();
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(PoseMetrics {
        ate_mean: mean,
        ate_std: var.sqrt(),
    })
}
