use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::{rigid_reproject, Intrinsics, PixelCoord, RigidMotion};
use crate::grad::{finite_diff_check, GradCheckReport};
use crate::image::{DepthMap, FlowField, Image};
use crate::refine::OutputState;

use super::{total_loss, LossConfig, LossWeights, Snippet};

/// Relative probe step used by [`gradient_suite`].
pub const SUITE_STEP: f64 = 1e-6;
/// Relative error bound used by [`gradient_suite`].
pub const SUITE_TOLERANCE: f64 = 1e-4;

fn smooth_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    let terms: Vec<[f64; 4]> = (0..4)
        .map(|_| {
            [
                rng.random_range(0.05..0.12),
                rng.random_range(-0.9..0.9),
                rng.random_range(-0.9..0.9),
                rng.random_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    Image::from_fn(w, h, |x, y| {
        0.5 + terms
            .iter()
            .map(|t| t[0] * (t[1] * x as f64 + t[2] * y as f64 + t[3]).sin())
            .sum::<f64>()
    })
}

fn noisy_depth(rng: &mut ChaCha8Rng, w: usize, h: usize, base: f64) -> DepthMap {
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            base + 0.3 * (0.4 * x + 0.2 * y).sin() + rng.random_range(-0.2..0.2)
        })
        .collect();
    DepthMap::new(w, h, data).expect("positive depth of matching size")
}

/// A random, internally inconsistent problem for gradient checking.
///
/// Frames are independent smooth textures and the flows are a rigid flow plus
/// a smooth offset, so both photometric branches are valid on most pixels
/// without tying.
pub fn random_problem(width: usize, height: usize, seed: u64) -> Result<(OutputState, Snippet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width, height);
    let f = 0.9 * w.max(h) as f64;
    let intrinsics = Intrinsics::new(f * rng.random_range(0.9..1.1), f * rng.random_range(0.9..1.1), w, h)?;
    let mut r = |a: f64| rng.random_range(-a..a);
    let motion = RigidMotion::new([r(0.03), r(0.03), r(0.03)], [r(0.15), r(0.1), r(0.1)]);
    let depth = noisy_depth(&mut rng, w, h, 4.0);
    // smooth offsets keep the flow regularizers small, which keeps the
    // rounding floor of the total well below the dense gradients
    let flow = |m: &RigidMotion, rng: &mut ChaCha8Rng| -> Result<FlowField> {
        let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let mut data = Vec::with_capacity(2 * w * h);
        for i in 0..w * h {
            let p = PixelCoord::new((i % w) as f64, (i / w) as f64);
            let q = rigid_reproject(p, depth.data()[i], &intrinsics, m)?;
            let s = (0.3 * p.u + c[4]).sin() * (0.25 * p.v + c[5]).cos();
            data.push(q.u - p.u + c[0] + 0.6 * c[1] * s + rng.random_range(-0.05..0.05));
            data.push(q.v - p.v + c[2] + 0.6 * c[3] * s + rng.random_range(-0.05..0.05));
        }
        FlowField::new(w, h, data)
    };
    let flow_fwd = flow(&motion, &mut rng)?;
    let flow_bwd = flow(&motion.inverse(), &mut rng)?;
    let snippet = Snippet {
        prev: Some(smooth_image(&mut rng, w, h)),
        center: smooth_image(&mut rng, w, h),
        next: smooth_image(&mut rng, w, h),
        prev_depth: Some(noisy_depth(&mut rng, w, h, 4.2)),
        next_depth: Some(noisy_depth(&mut rng, w, h, 3.8)),
    };
    let state = OutputState {
        depth,
        motion,
        intrinsics,
        flow_fwd,
        flow_bwd,
    };
    Ok((state, snippet))
}

/// Checks every gradient block of [`total_loss`] against central differences.
///
/// Blocks: depth, euler, translation, focal, flow_fwd, flow_bwd.
pub fn check_gradients(
    state: &OutputState,
    snippet: &Snippet,
    cfg: &LossConfig,
    step: f64,
    tolerance: f64,
) -> Result<Vec<GradCheckReport>> {
    let report = total_loss(state, snippet, cfg)?;
    let g = &report.gradients;
    let eval = |s: &OutputState| total_loss(s, snippet, cfg).map_or(f64::NAN, |r| r.total);
    let mut out = Vec::with_capacity(6);

    let (w, h) = (state.width(), state.height());
    let with_depth = |x: &[f64]| {
        let mut s = state.clone();
        match DepthMap::new(w, h, x.to_vec()) {
            Ok(d) => s.depth = d,
            Err(_) => return f64::NAN,
        }
        eval(&s)
    };
    out.push(finite_diff_check("depth", with_depth, state.depth.data(), &g.depth, step, tolerance));

    let m = state.motion;
    out.push(finite_diff_check(
        "euler",
        |x: &[f64]| {
            let mut s = state.clone();
            s.motion.euler = [x[0], x[1], x[2]];
            eval(&s)
        },
        &m.euler,
        &g.pose.euler,
        step,
        tolerance,
    ));
    out.push(finite_diff_check(
        "translation",
        |x: &[f64]| {
            let mut s = state.clone();
            s.motion.translation = [x[0], x[1], x[2]];
            eval(&s)
        },
        &m.translation,
        &g.pose.translation,
        step,
        tolerance,
    ));
    let k = state.intrinsics;
    out.push(finite_diff_check(
        "focal",
        |x: &[f64]| {
            let mut s = state.clone();
            s.intrinsics.fx = x[0];
            s.intrinsics.fy = x[1];
            eval(&s)
        },
        &[k.fx, k.fy],
        &g.pose.focal,
        step,
        tolerance,
    ));
    for (name, bwd) in [("flow_fwd", false), ("flow_bwd", true)] {
        let (x0, grad) = if bwd {
            (state.flow_bwd.data(), &g.flow_bwd)
        } else {
            (state.flow_fwd.data(), &g.flow_fwd)
        };
        let with_flow = |x: &[f64]| {
            let mut s = state.clone();
            let f = FlowField::new(w, h, x.to_vec()).expect("flow of matching size");
            if bwd {
                s.flow_bwd = f;
            } else {
                s.flow_fwd = f;
            }
            eval(&s)
        };
        out.push(finite_diff_check(name, with_flow, x0, grad, step, tolerance));
    }
    Ok(out)
}

/// The standard suite: a random problem of the given size, every component
/// weighted 1, probe step [`SUITE_STEP`] and tolerance [`SUITE_TOLERANCE`].
pub fn gradient_suite(width: usize, height: usize, seed: u64) -> Result<Vec<GradCheckReport>> {
    let (state, snippet) = random_problem(width, height, seed)?;
    let cfg = LossConfig {
        weights: LossWeights {
            w_apc: 1.0,
            w_mvs: 1.0,
            w_e: 1.0,
            w_smooth_depth: 1.0,
            w_smooth_flow: 1.0,
            w_fb: 1.0,
        },
        ..LossConfig::default()
    };
    check_gradients(&state, &snippet, &cfg, SUITE_STEP, SUITE_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_small_problem() {
        for seed in 0..2 {
            for r in gradient_suite(10, 8, seed).unwrap() {
                assert!(r.passed(), "seed {seed}: {r}");
            }
        }
    }

    #[test]
    fn suite_catches_a_wrong_gradient() {
        let (state, snippet) = random_problem(8, 8, 3).unwrap();
        let cfg = LossConfig::default();
        let mut report = total_loss(&state, &snippet, &cfg).unwrap();
        report.gradients.pose.euler[1] *= 1.01;
        let g = report.gradients.pose.euler;
        let r = finite_diff_check(
            "euler",
            |x: &[f64]| {
                let mut s = state.clone();
                s.motion.euler = [x[0], x[1], x[2]];
                total_loss(&s, &snippet, &cfg).unwrap().total
            },
            &state.motion.euler,
            &g,
            SUITE_STEP,
            SUITE_TOLERANCE,
        );
        assert_eq!(r.failing, vec![1]);
    }
}
