//! Loss components and their assembly into the total snippet loss.
//!
//! Every component returns its value together with gradients for each output
//! variable it touches. Depth gradients are with respect to depth in meters,
//! flow gradients with respect to pixel displacements, focal gradients with
//! respect to `fx`/`fy` in pixels.
//!
//! Per-pixel terms are evaluated in parallel and reduced in pixel order with
//! pairwise summation, so results do not depend on the worker count.

mod epipolar;
mod photometric;
mod regularize;
mod structure;
mod suite;

pub use epipolar::{epipolar_loss, EpipolarResult};
pub use photometric::{
    adaptive_photometric, flow_photometric, rigid_photometric, BranchResult, PhotometricResult,
};
pub use regularize::{forward_backward_flow, smoothness_depth, smoothness_flow, FlowPairResult, SmoothnessResult};
pub use structure::{multiview_structure, StructureResult};
pub use suite::{check_gradients, gradient_suite, random_problem, SUITE_STEP, SUITE_TOLERANCE};

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Intrinsics, Motion, RigidMotion};
use crate::grad::{Dual, EULER, FOCAL, N_GLOBAL, TRANSLATION};
use crate::image::{DepthMap, Image};
use crate::refine::OutputState;
use crate::ssim::DEFAULT_SIMILARITY_R;

/// Which motion model explains a pixel in the adaptive photometric loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Rigid,
    Flow,
    Invalid,
}

pub type BranchMask = Vec<Branch>;

/// Component weights of the total loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_apc: f64,
    pub w_mvs: f64,
    pub w_e: f64,
    pub w_smooth_depth: f64,
    pub w_smooth_flow: f64,
    pub w_fb: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_apc: 1.0,
            w_mvs: 0.1,
            w_e: 0.01,
            w_smooth_depth: 0.1,
            w_smooth_flow: 0.1,
            w_fb: 0.01,
        }
    }
}

impl LossWeights {
    pub fn ones() -> Self {
        LossWeights {
            w_apc: 1.0,
            w_mvs: 1.0,
            w_e: 1.0,
            w_smooth_depth: 1.0,
            w_smooth_flow: 1.0,
            w_fb: 1.0,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.w_apc, self.w_mvs, self.w_e, self.w_smooth_depth, self.w_smooth_flow, self.w_fb]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("loss weights must be finite and non-negative: {w:?}")));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidInput("at least one loss weight must be positive".into()));
        }
        Ok(())
    }
}

/// Weights plus the SSIM/L1 trade-off `r` of the similarity function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub similarity_r: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            weights: LossWeights::default(),
            similarity_r: DEFAULT_SIMILARITY_R,
        }
    }
}

/// Gradient with respect to the 8 global variables (pose and focal lengths).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseGrad {
    pub euler: [f64; 3],
    pub translation: [f64; 3],
    pub focal: [f64; 2],
}

impl PoseGrad {
    pub(crate) fn from_tangent(d: &[f64]) -> Self {
        PoseGrad {
            euler: [d[EULER], d[EULER + 1], d[EULER + 2]],
            translation: [d[TRANSLATION], d[TRANSLATION + 1], d[TRANSLATION + 2]],
            focal: [d[FOCAL], d[FOCAL + 1]],
        }
    }

    pub fn to_array(&self) -> [f64; N_GLOBAL] {
        let mut a = [0.0; N_GLOBAL];
        a[EULER..EULER + 3].copy_from_slice(&self.euler);
        a[TRANSLATION..TRANSLATION + 3].copy_from_slice(&self.translation);
        a[FOCAL..FOCAL + 2].copy_from_slice(&self.focal);
        a
    }

    pub(crate) fn scaled(&self, s: f64) -> Self {
        PoseGrad::from_tangent(&self.to_array().map(|v| v * s))
    }
}

impl AddAssign for PoseGrad {
    fn add_assign(&mut self, o: Self) {
        let a = self.to_array();
        let b = o.to_array();
        let mut c = [0.0; N_GLOBAL];
        for i in 0..N_GLOBAL {
            c[i] = a[i] + b[i];
        }
        *self = PoseGrad::from_tangent(&c);
    }
}

/// Gradient blocks of the total loss, shaped like the variables of
/// [`OutputState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub depth: Vec<f64>,
    pub pose: PoseGrad,
    pub flow_fwd: Vec<f64>,
    pub flow_bwd: Vec<f64>,
}

impl Gradients {
    fn zeros(n: usize) -> Self {
        Gradients {
            depth: vec![0.0; n],
            pose: PoseGrad::default(),
            flow_fwd: vec![0.0; 2 * n],
            flow_bwd: vec![0.0; 2 * n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Components {
    pub apc: f64,
    pub mvs: f64,
    pub epipolar: f64,
    pub smooth_depth: f64,
    pub smooth_flow: f64,
    pub forward_backward: f64,
}

impl Components {
    pub const NAMES: [&'static str; 6] = ["apc", "mvs", "epipolar", "smooth_depth", "smooth_flow", "forward_backward"];

    pub fn as_array(&self) -> [f64; 6] {
        [self.apc, self.mvs, self.epipolar, self.smooth_depth, self.smooth_flow, self.forward_backward]
    }

    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        self.as_array().iter().zip(w.as_array()).map(|(c, w)| c * w).sum()
    }
}

#[derive(Debug, Clone)]
pub struct LossReport {
    pub total: f64,
    pub components: Components,
    /// Per-pixel adaptive photometric error of the forward pair (NaN where invalid).
    pub per_pixel_apc: Option<Vec<f64>>,
    pub gradients: Gradients,
}

/// A test frame with its two temporal neighbours.
///
/// Pairs evaluated by [`total_loss`], with `m` the state motion (center → next)
/// and constant ego-velocity, so that center → prev is `m⁻¹`:
///
/// * center → next: adaptive photometric (rigid `m` vs. `flow_fwd`),
///   structure consistency against `next_depth`, epipolar on `flow_fwd`;
/// * center → prev: rigid photometric under `m⁻¹`, structure consistency
///   against `prev_depth`;
/// * next → center: flow photometric and epipolar (`m⁻¹`) on `flow_bwd`.
///
/// Neighbour depths are fixed observations; when absent their structure term
/// is skipped.
#[derive(Debug, Clone)]
pub struct Snippet {
    pub prev: Option<Image>,
    pub center: Image,
    pub next: Image,
    pub prev_depth: Option<DepthMap>,
    pub next_depth: Option<DepthMap>,
}

impl Snippet {
    pub fn pair(center: Image, next: Image) -> Self {
        Snippet {
            prev: None,
            center,
            next,
            prev_depth: None,
            next_depth: None,
        }
    }

    pub fn width(&self) -> usize {
        self.center.width()
    }

    pub fn height(&self) -> usize {
        self.center.height()
    }

    fn validate(&self) -> Result<()> {
        let (w, h) = (self.width(), self.height());
        let same = |img: &Image| img.width() == w && img.height() == h && img.channels() == self.center.channels();
        if !same(&self.next) || !self.prev.as_ref().is_none_or(same) {
            return Err(Error::InvalidInput("snippet frames differ in shape".into()));
        }
        for d in [&self.prev_depth, &self.next_depth].into_iter().flatten() {
            if d.width() != w || d.height() != h {
                return Err(Error::InvalidInput("neighbour depth shape does not match frames".into()));
            }
            d.require_positive("neighbour depth")?;
        }
        Ok(())
    }
}

/// Weighted sum of all components over the snippet, with gradients.
pub fn total_loss(state: &OutputState, snippet: &Snippet, cfg: &LossConfig) -> Result<LossReport> {
    snippet.validate()?;
    state.check_shape(snippet.width(), snippet.height())?;
    cfg.weights.validate()?;
    let w = &cfg.weights;
    let r = cfg.similarity_r;
    let k = &state.intrinsics;
    let m = &state.motion;
    let n = snippet.width() * snippet.height();
    let mut comps = Components::default();
    let mut g = Gradients::zeros(n);

    let add = |dst: &mut [f64], src: &[f64], s: f64| {
        for (a, b) in dst.iter_mut().zip(src) {
            *a += s * b;
        }
    };

    // photometric
    let fwd = adaptive_photometric(&snippet.center, &snippet.next, &state.depth, k, m, &state.flow_fwd, r)?;
    comps.apc += fwd.loss;
    add(&mut g.depth, &fwd.grad_depth, w.w_apc);
    add(&mut g.flow_fwd, &fwd.grad_flow, w.w_apc);
    g.pose += fwd.grad_pose.scaled(w.w_apc);
    if let Some(prev) = &snippet.prev {
        let back = photometric::rigid_photometric_dir(&snippet.center, prev, &state.depth, k, m, true, r)?;
        comps.apc += back.loss;
        add(&mut g.depth, &back.grad_dense, w.w_apc);
        g.pose += back.grad_pose.scaled(w.w_apc);
    }
    let bwd = flow_photometric(&snippet.next, &snippet.center, &state.flow_bwd, r)?;
    comps.apc += bwd.loss;
    add(&mut g.flow_bwd, &bwd.grad_dense, w.w_apc);

    // multi-view structure
    for (depth_t, inverse) in [(&snippet.next_depth, false), (&snippet.prev_depth, true)] {
        if let Some(dt) = depth_t {
            let s = structure::multiview_structure_dir(&state.depth, dt, k, m, inverse)?;
            comps.mvs += s.loss;
            add(&mut g.depth, &s.grad_source, w.w_mvs);
            g.pose += s.grad_pose.scaled(w.w_mvs);
        }
    }

    // epipolar
    let e = epipolar_loss(&state.flow_fwd, k, m)?;
    comps.epipolar += e.loss;
    add(&mut g.flow_fwd, &e.grad_flow, w.w_e);
    g.pose += e.grad_pose.scaled(w.w_e);
    let e = epipolar::epipolar_loss_dir(&state.flow_bwd, k, m, true)?;
    comps.epipolar += e.loss;
    add(&mut g.flow_bwd, &e.grad_flow, w.w_e);
    g.pose += e.grad_pose.scaled(w.w_e);

    // regularizers
    let sd = smoothness_depth(&state.depth, &snippet.center)?;
    comps.smooth_depth = sd.loss;
    add(&mut g.depth, &sd.grad, w.w_smooth_depth);
    let sf = smoothness_flow(&state.flow_fwd, &snippet.center)?;
    comps.smooth_flow += sf.loss;
    add(&mut g.flow_fwd, &sf.grad, w.w_smooth_flow);
    let sf = smoothness_flow(&state.flow_bwd, &snippet.next)?;
    comps.smooth_flow += sf.loss;
    add(&mut g.flow_bwd, &sf.grad, w.w_smooth_flow);

    for (a, b, swap) in [(&state.flow_fwd, &state.flow_bwd, false), (&state.flow_bwd, &state.flow_fwd, true)] {
        let fb = forward_backward_flow(a, b)?;
        comps.forward_backward += fb.loss;
        let (ga, gb) = if swap { (&mut g.flow_bwd, &fb.grad_fwd) } else { (&mut g.flow_fwd, &fb.grad_fwd) };
        add(ga, gb, w.w_fb);
        let (ga, gb) = if swap { (&mut g.flow_fwd, &fb.grad_bwd) } else { (&mut g.flow_bwd, &fb.grad_bwd) };
        add(ga, gb, w.w_fb);
    }

    Ok(LossReport {
        total: comps.weighted_total(w),
        components: comps,
        per_pixel_apc: Some(fwd.per_pixel),
        gradients: g,
    })
}

/// Pairwise (tree) summation; deterministic for a given input order.
pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Element-wise pairwise sum of fixed-width vectors.
pub(crate) fn pairwise_sum_arrays<const N: usize>(v: &[[f64; N]]) -> [f64; N] {
    if v.len() <= 8 {
        let mut acc = [0.0; N];
        for a in v {
            for i in 0..N {
                acc[i] += a[i];
            }
        }
        return acc;
    }
    let mid = v.len() / 2;
    let a = pairwise_sum_arrays(&v[..mid]);
    let b = pairwise_sum_arrays(&v[mid..]);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = a[i] + b[i];
    }
    out
}

/// Motion and camera with the 8 globals seeded in tangent slots `0..8`.
pub(crate) fn seeded_globals<const N: usize>(
    m: &RigidMotion,
    k: &Intrinsics,
    inverse: bool,
) -> (Motion<Dual<N>>, Camera<Dual<N>>) {
    let var = |v: f64, slot: usize| Dual::<N>::variable(v, slot);
    let euler = [0, 1, 2].map(|i| var(m.euler[i], EULER + i));
    let t = [0, 1, 2].map(|i| var(m.translation[i], TRANSLATION + i));
    let mut motion = Motion::from_params(euler, t);
    if inverse {
        motion = motion.inverse();
    }
    let cam = k.camera(var(k.fx, FOCAL), var(k.fy, FOCAL + 1));
    (motion, cam)
}

pub(crate) fn check_same_size(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!("{what}: shapes {}x{} and {}x{} differ", a.0, a.1, b.0, b.1)));
    }
    Ok(())
}

pub(crate) fn check_intrinsics(k: &Intrinsics, w: usize, h: usize) -> Result<()> {
    k.validate()?;
    if k.width != w || k.height != h {
        return Err(Error::InvalidInput(format!(
            "intrinsics are for {}x{} but data is {}x{}",
            k.width, k.height, w, h
        )));
    }
    Ok(())
}
