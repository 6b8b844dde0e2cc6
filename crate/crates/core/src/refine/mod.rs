//! Output finetuning: Adam on the prediction variables themselves.

mod adam;

pub use adam::{adam_step, AdamParams, AdamState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, RigidMotion};
use crate::image::{DepthMap, FlowField};
use crate::losses::{total_loss, Components, LossConfig, Snippet};

/// The joint output variables: center-frame depth, ego-motion center → next,
/// intrinsics and the two flow fields (center → next, next → center).
#[derive(Debug, Clone, PartialEq)]
pub struct OutputState {
    pub depth: DepthMap,
    pub motion: RigidMotion,
    pub intrinsics: Intrinsics,
    pub flow_fwd: FlowField,
    pub flow_bwd: FlowField,
}

impl OutputState {
    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    /// Checks that every field is `w`×`h`, depth positive and intrinsics valid.
    pub fn check_shape(&self, w: usize, h: usize) -> Result<()> {
        let dims = [
            ("depth", self.depth.width(), self.depth.height()),
            ("flow_fwd", self.flow_fwd.width(), self.flow_fwd.height()),
            ("flow_bwd", self.flow_bwd.width(), self.flow_bwd.height()),
            ("intrinsics", self.intrinsics.width, self.intrinsics.height),
        ];
        for (name, dw, dh) in dims {
            if (dw, dh) != (w, h) {
                return Err(Error::InvalidInput(format!("{name} is {dw}x{dh}, expected {w}x{h}")));
            }
        }
        self.intrinsics.validate()?;
        self.depth.require_positive("depth")
    }
}

/// Per-block weights of the squared-L2 pull towards the prior.
///
/// Dense blocks (depth, flow) use the mean squared deviation so their weight
/// does not scale with image size; depth deviation is measured in log-depth and
/// focal deviation in log-focal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProximalWeights {
    pub depth: f64,
    pub rotation: f64,
    pub translation: f64,
    pub intrinsics: f64,
    pub flow: f64,
}

impl Default for ProximalWeights {
    fn default() -> Self {
        ProximalWeights {
            depth: 1e-2,
            rotation: 0.0,
            translation: 0.0,
            intrinsics: 0.0,
            flow: 1e-2,
        }
    }
}

impl ProximalWeights {
    pub fn uniform(w: f64) -> Self {
        ProximalWeights {
            depth: w,
            rotation: w,
            translation: w,
            intrinsics: w,
            flow: w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.depth, self.rotation, self.translation, self.intrinsics, self.flow];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!("proximal weights must be finite and >= 0, got {all:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximalPrior {
    pub anchor: OutputState,
    pub weights: ProximalWeights,
}

/// Which variable blocks receive updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariableMask {
    pub depth: bool,
    pub pose: bool,
    pub intrinsics: bool,
    pub flow: bool,
}

impl Default for VariableMask {
    fn default() -> Self {
        VariableMask::all()
    }
}

impl VariableMask {
    pub fn all() -> Self {
        VariableMask {
            depth: true,
            pose: true,
            intrinsics: true,
            flow: true,
        }
    }

    pub fn none() -> Self {
        VariableMask {
            depth: false,
            pose: false,
            intrinsics: false,
            flow: false,
        }
    }

    pub fn depth_only() -> Self {
        VariableMask { depth: true, ..Self::none() }
    }

    pub fn pose_only() -> Self {
        VariableMask { pose: true, ..Self::none() }
    }

    pub fn is_empty(&self) -> bool {
        !(self.depth || self.pose || self.intrinsics || self.flow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub iterations: usize,
    pub adam: AdamParams,
    pub loss: LossConfig,
    pub variables: VariableMask,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            iterations: 50,
            adam: AdamParams::default(),
            loss: LossConfig::default(),
            variables: VariableMask::all(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", a.learning_rate)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::Config(format!("adam betas must lie in [0, 1), got {} and {}", a.beta1, a.beta2)));
        }
        if !(a.eps > 0.0) {
            return Err(Error::Config(format!("adam eps must be > 0, got {}", a.eps)));
        }
        if !(0.0..=1.0).contains(&self.loss.similarity_r) {
            return Err(Error::Config(format!("similarity_r must lie in [0, 1], got {}", self.loss.similarity_r)));
        }
        self.loss.weights.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// Returns the active-variable mask of `config`, warning when nothing is free.
pub fn select_variables(config: &RefineConfig) -> VariableMask {
    let mask = config.variables;
    if mask.is_empty() {
        log::warn!("all variables are frozen; refinement is a no-op");
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Weighted loss without the proximal term.
    pub total: f64,
    /// Loss plus proximal term: the quantity being minimized.
    pub objective: f64,
    pub components: Components,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub state: OutputState,
    /// One entry per evaluated state: the prior first, the final state last.
    pub trace: Vec<TraceEntry>,
}

impl RefineOutcome {
    pub fn initial(&self) -> &TraceEntry {
        &self.trace[0]
    }

    pub fn last(&self) -> &TraceEntry {
        self.trace.last().expect("trace is never empty")
    }
}

/// Offsets of the active blocks in the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    mask: VariableMask,
}

impl Layout {
    fn len(&self) -> usize {
        let m = self.mask;
        (m.depth as usize) * self.n + (m.pose as usize) * 6 + (m.intrinsics as usize) * 2 + (m.flow as usize) * 4 * self.n
    }
}

/// Reparameterized, flattened view of the active variables.
fn pack(state: &OutputState, prior_k: &Intrinsics, layout: Layout) -> Vec<f64> {
    let mut p = Vec::with_capacity(layout.len());
    let m = layout.mask;
    if m.depth {
        p.extend(state.depth.data().iter().map(|d| d.ln()));
    }
    if m.pose {
        p.extend_from_slice(&state.motion.euler);
        p.extend_from_slice(&state.motion.translation);
    }
    if m.intrinsics {
        p.push((state.intrinsics.fx / prior_k.fx).ln());
        p.push((state.intrinsics.fy / prior_k.fy).ln());
    }
    if m.flow {
        p.extend_from_slice(state.flow_fwd.data());
        p.extend_from_slice(state.flow_bwd.data());
    }
    p
}

/// Writes the active blocks of `p` back into `state`; frozen blocks are untouched.
fn unpack(p: &[f64], prior_k: &Intrinsics, layout: Layout, state: &mut OutputState) -> Result<()> {
    let n = layout.n;
    let m = layout.mask;
    let mut o = 0;
    if m.depth {
        for (i, (d, lp)) in state.depth.data_mut().iter_mut().zip(&p[o..o + n]).enumerate() {
            *d = lp.exp();
            if !(*d > 0.0 && d.is_finite()) {
                return Err(Error::NonFinite { what: "refined depth", index: i });
            }
        }
        o += n;
    }
    if m.pose {
        state.motion.euler.copy_from_slice(&p[o..o + 3]);
        state.motion.translation.copy_from_slice(&p[o + 3..o + 6]);
        o += 6;
    }
    if m.intrinsics {
        state.intrinsics.fx = prior_k.fx * p[o].exp();
        state.intrinsics.fy = prior_k.fy * p[o + 1].exp();
        if !(state.intrinsics.fx > 0.0 && state.intrinsics.fy > 0.0)
            || !state.intrinsics.fx.is_finite()
            || !state.intrinsics.fy.is_finite()
        {
            return Err(Error::NonFinite { what: "refined focal length", index: 0 });
        }
        o += 2;
    }
    if m.flow {
        state.flow_fwd.data_mut().copy_from_slice(&p[o..o + 2 * n]);
        state.flow_bwd.data_mut().copy_from_slice(&p[o + 2 * n..o + 4 * n]);
    }
    Ok(())
}

/// Objective value and gradient with respect to the flat parameters.
fn evaluate(
    state: &OutputState,
    snippet: &Snippet,
    prior: &ProximalPrior,
    config: &RefineConfig,
    layout: Layout,
    iteration: usize,
) -> Result<(TraceEntry, Vec<f64>)> {
    let report = total_loss(state, snippet, &config.loss)?;
    let a = &prior.anchor;
    let w = &prior.weights;
    let n = layout.n as f64;
    let g = &report.gradients;

    let log_dev: Vec<f64> = state
        .depth
        .data()
        .iter()
        .zip(a.depth.data())
        .map(|(d, p)| d.ln() - p.ln())
        .collect();
    let fwd_dev: Vec<f64> = state.flow_fwd.data().iter().zip(a.flow_fwd.data()).map(|(x, y)| x - y).collect();
    let bwd_dev: Vec<f64> = state.flow_bwd.data().iter().zip(a.flow_bwd.data()).map(|(x, y)| x - y).collect();
    let rot_dev: [f64; 3] = std::array::from_fn(|i| state.motion.euler[i] - a.motion.euler[i]);
    let tr_dev: [f64; 3] = std::array::from_fn(|i| state.motion.translation[i] - a.motion.translation[i]);
    let foc_dev = [
        (state.intrinsics.fx / a.intrinsics.fx).ln(),
        (state.intrinsics.fy / a.intrinsics.fy).ln(),
    ];
    let sq = |v: &[f64]| crate::losses::pairwise_sum(&v.iter().map(|x| x * x).collect::<Vec<_>>());

    let proximal = w.depth * sq(&log_dev) / n
        + w.rotation * sq(&rot_dev)
        + w.translation * sq(&tr_dev)
        + w.intrinsics * sq(&foc_dev)
        + w.flow * (sq(&fwd_dev) + sq(&bwd_dev)) / (2.0 * n);

    let entry = TraceEntry {
        iteration,
        total: report.total,
        objective: report.total + proximal,
        components: report.components,
    };

    let mut grad = Vec::with_capacity(layout.len());
    let m = layout.mask;
    if m.depth {
        grad.extend(
            g.depth
                .iter()
                .zip(state.depth.data())
                .zip(&log_dev)
                .map(|((gd, d), dev)| gd * d + 2.0 * w.depth * dev / n),
        );
    }
    if m.pose {
        grad.extend((0..3).map(|i| g.pose.euler[i] + 2.0 * w.rotation * rot_dev[i]));
        grad.extend((0..3).map(|i| g.pose.translation[i] + 2.0 * w.translation * tr_dev[i]));
    }
    if m.intrinsics {
        grad.push(g.pose.focal[0] * state.intrinsics.fx + 2.0 * w.intrinsics * foc_dev[0]);
        grad.push(g.pose.focal[1] * state.intrinsics.fy + 2.0 * w.intrinsics * foc_dev[1]);
    }
    if m.flow {
        grad.extend(g.flow_fwd.iter().zip(&fwd_dev).map(|(gf, dev)| gf + w.flow * dev / n));
        grad.extend(g.flow_bwd.iter().zip(&bwd_dev).map(|(gf, dev)| gf + w.flow * dev / n));
    }
    Ok((entry, grad))
}

/// Minimizes the total loss plus the proximal pull towards `prior.anchor`
/// with `config.iterations` Adam steps, starting at the anchor.
///
/// Depth is optimized as log-depth and focal lengths as log ratios to the
/// prior, so both stay positive. Frozen blocks are returned bit-identical.
pub fn oft_refine(snippet: &Snippet, prior: &ProximalPrior, config: &RefineConfig) -> Result<RefineOutcome> {
    config.validate()?;
    prior.weights.validate()?;
    let anchor = &prior.anchor;
    anchor.check_shape(snippet.width(), snippet.height())?;

    let mask = select_variables(config);
    let layout = Layout { n: anchor.width() * anchor.height(), mask };
    let mut state = anchor.clone();

    let (first, mut grad) = evaluate(&state, snippet, prior, config, layout, 0)?;
    if !first.objective.is_finite() {
        return Err(Error::InvalidPrior(format!("initial loss is {}", first.objective)));
    }
    let mut trace = vec![first];
    if mask.is_empty() {
        return Ok(RefineOutcome { state, trace });
    }

    let mut params = pack(&state, &anchor.intrinsics, layout);
    let mut adam = AdamState::new(params.len());
    for it in 1..=config.iterations {
        adam_step(&mut params, &grad, &mut adam, &config.adam)?;
        unpack(&params, &anchor.intrinsics, layout, &mut state)?;
        let (entry, g) = evaluate(&state, snippet, prior, config, layout, it)?;
        if !entry.objective.is_finite() {
            return Err(Error::NonFinite { what: "objective", index: it });
        }
        log::debug!("iteration {it}: total {:.6e} objective {:.6e}", entry.total, entry.objective);
        trace.push(entry);
        grad = g;
    }
    Ok(RefineOutcome { state, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;

    const W: usize = 32;
    const H: usize = 16;

    fn texture(x: f64, y: f64) -> f64 {
        0.5 + 0.2 * (0.7 * x + 0.3 * y).sin() + 0.1 * (0.4 * y - 0.2 * x).cos()
    }

    /// Lateral motion with power-of-two camera and depth: the true flow is
    /// exactly 2 px and every loss term is exactly zero at the true state.
    fn exact() -> (OutputState, Snippet) {
        let frame = |dx: f64| Image::from_fn(W, H, |x, y| texture(x as f64 - dx, y as f64));
        let snippet = Snippet {
            prev: Some(frame(-2.0)),
            center: frame(0.0),
            next: frame(2.0),
            prev_depth: Some(DepthMap::constant(W, H, 4.0)),
            next_depth: Some(DepthMap::constant(W, H, 4.0)),
        };
        let state = OutputState {
            depth: DepthMap::constant(W, H, 4.0),
            motion: RigidMotion::new([0.0; 3], [0.125, 0.0, 0.0]),
            intrinsics: Intrinsics::new(64.0, 64.0, W, H).unwrap(),
            flow_fwd: FlowField::constant(W, H, [2.0, 0.0]),
            flow_bwd: FlowField::constant(W, H, [-2.0, 0.0]),
        };
        (state, snippet)
    }

    fn perturbed() -> (OutputState, OutputState, Snippet) {
        let (gt, snippet) = exact();
        let mut p = gt.clone();
        p.motion.euler = [0.01, -0.01, 0.005];
        p.motion.translation[0] *= 1.1;
        for (i, d) in p.depth.data_mut().iter_mut().enumerate() {
            *d *= 1.0 + 0.05 * ((i * 7919) % 13) as f64 / 13.0;
        }
        (gt, p, snippet)
    }

    fn prior(anchor: &OutputState) -> ProximalPrior {
        ProximalPrior {
            anchor: anchor.clone(),
            weights: ProximalWeights::default(),
        }
    }

    fn max_dev(a: &OutputState, b: &OutputState) -> f64 {
        let mut m = 0.0f64;
        for (x, y) in a.depth.data().iter().zip(b.depth.data()) {
            m = m.max((x - y).abs());
        }
        for (x, y) in a.flow_fwd.data().iter().zip(b.flow_fwd.data()).chain(a.flow_bwd.data().iter().zip(b.flow_bwd.data())) {
            m = m.max((x - y).abs());
        }
        for i in 0..3 {
            m = m.max((a.motion.euler[i] - b.motion.euler[i]).abs());
            m = m.max((a.motion.translation[i] - b.motion.translation[i]).abs());
        }
        m.max((a.intrinsics.fx - b.intrinsics.fx).abs()).max((a.intrinsics.fy - b.intrinsics.fy).abs())
    }

    #[test]
    fn exact_state_has_zero_loss() {
        let (gt, snippet) = exact();
        let r = total_loss(&gt, &snippet, &LossConfig::default()).unwrap();
        assert!(r.total.abs() < 1e-15, "{:?}", r.components);
    }

    #[test]
    fn ground_truth_prior_is_stationary() {
        let (gt, snippet) = exact();
        let out = oft_refine(&snippet, &prior(&gt), &RefineConfig::default()).unwrap();
        assert_eq!(out.trace.len(), 51);
        assert!(max_dev(&out.state, &gt) < 1e-4);
    }

    #[test]
    fn depth_only_leaves_other_blocks_bit_identical() {
        let (_, p, snippet) = perturbed();
        let cfg = RefineConfig {
            iterations: 10,
            variables: VariableMask::depth_only(),
            ..RefineConfig::default()
        };
        let out = oft_refine(&snippet, &prior(&p), &cfg).unwrap();
        assert_eq!(out.state.motion, p.motion);
        assert_eq!(out.state.intrinsics, p.intrinsics);
        assert_eq!(out.state.flow_fwd, p.flow_fwd);
        assert_eq!(out.state.flow_bwd, p.flow_bwd);
        assert_ne!(out.state.depth, p.depth);
    }

    #[test]
    fn explicit_all_mask_matches_default() {
        let (_, p, snippet) = perturbed();
        let a = oft_refine(&snippet, &prior(&p), &RefineConfig { iterations: 5, ..RefineConfig::default() }).unwrap();
        let cfg = RefineConfig {
            iterations: 5,
            variables: VariableMask::all(),
            ..RefineConfig::default()
        };
        let b = oft_refine(&snippet, &prior(&p), &cfg).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn pose_only_moves_only_pose() {
        let (gt, p, snippet) = perturbed();
        let mut start = gt.clone();
        start.motion = p.motion;
        let cfg = RefineConfig {
            iterations: 30,
            variables: VariableMask::pose_only(),
            ..RefineConfig::default()
        };
        let out = oft_refine(&snippet, &prior(&start), &cfg).unwrap();
        assert!(out.last().objective < out.initial().objective);
        assert_ne!(out.state.motion, start.motion);
        assert_eq!(out.state.depth, start.depth);
        assert_eq!(out.state.intrinsics, start.intrinsics);
        assert_eq!(out.state.flow_fwd, start.flow_fwd);
    }

    #[test]
    fn strong_proximal_weight_pins_state() {
        let (_, p, snippet) = perturbed();
        let pr = ProximalPrior {
            anchor: p.clone(),
            weights: ProximalWeights::uniform(1e6),
        };
        let out = oft_refine(&snippet, &pr, &RefineConfig::default()).unwrap();
        assert!(max_dev(&out.state, &p) < 1e-3, "{}", max_dev(&out.state, &p));
    }

    #[test]
    fn refinement_is_deterministic_and_descends() {
        let (_, p, snippet) = perturbed();
        let cfg = RefineConfig { iterations: 20, ..RefineConfig::default() };
        let a = oft_refine(&snippet, &prior(&p), &cfg).unwrap();
        let b = oft_refine(&snippet, &prior(&p), &cfg).unwrap();
        let bits = |o: &RefineOutcome| o.trace.iter().map(|e| e.objective.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(a.last().objective <= a.initial().objective);
        assert!(a.state.depth.data().iter().all(|d| *d > 0.0));
    }

    #[test]
    fn empty_mask_returns_prior() {
        let (_, p, snippet) = perturbed();
        let cfg = RefineConfig {
            variables: VariableMask::none(),
            ..RefineConfig::default()
        };
        let out = oft_refine(&snippet, &prior(&p), &cfg).unwrap();
        assert_eq!(out.state, p);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn non_finite_prior_is_rejected() {
        let (_, mut p, snippet) = perturbed();
        p.flow_fwd.data_mut()[40] = f64::NAN;
        assert!(matches!(
            oft_refine(&snippet, &prior(&p), &RefineConfig::default()),
            Err(Error::InvalidPrior(_))
        ));
    }

    #[test]
    fn bad_config_is_rejected() {
        let (_, p, snippet) = perturbed();
        let mut cfg = RefineConfig::default();
        cfg.adam.learning_rate = 0.0;
        assert!(matches!(oft_refine(&snippet, &prior(&p), &cfg), Err(Error::Config(_))));
        let pr = ProximalPrior {
            anchor: p,
            weights: ProximalWeights::uniform(-1.0),
        };
        assert!(matches!(oft_refine(&snippet, &pr, &RefineConfig::default()), Err(Error::Config(_))));
    }
}
