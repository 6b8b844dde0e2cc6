//! Adaptive photometric loss: per pixel, the smaller of the rigid-warp and
//! flow-warp similarity errors.
//!
//! The target is first warped into the source frame: every source pixel `q`
//! looks up the target bilinearly at its own correspondence (rigid:
//! through `D(q)`, `K` and the motion; flow: `q + F(q)`). `S` then compares
//! the 3×3 source window around `p` with the 3×3 window of the warped target.
//! A branch is valid at `p` when `p` is not a border pixel and all nine
//! warped samples of its window land inside the target (and, for the rigid
//! branch, in front of the camera). Pixel `p`'s error therefore depends on
//! the depth (or flow) of its eight neighbours as well.

use rayon::prelude::*;

use super::{check_intrinsics, check_same_size, pairwise_sum, pairwise_sum_arrays, seeded_globals, Branch, BranchMask, PoseGrad};
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, PixelCoord, RigidMotion, MIN_Z};
use crate::grad::{Dual, Real, N_GLOBAL};
use crate::image::{DepthMap, FlowField, Image};
use crate::ssim::similarity_generic;

const RIGID_N: usize = N_GLOBAL + 1;
const DEPTH_SLOT: usize = N_GLOBAL;

#[derive(Debug, Clone)]
pub struct PhotometricResult {
    pub loss: f64,
    pub mask: BranchMask,
    /// Selected-branch error per pixel, NaN where invalid.
    pub per_pixel: Vec<f64>,
    pub valid: usize,
    pub grad_depth: Vec<f64>,
    pub grad_pose: PoseGrad,
    pub grad_flow: Vec<f64>,
}

/// Single-branch photometric loss. `grad_dense` is per-pixel depth for the
/// rigid branch and interleaved flow for the flow branch.
#[derive(Debug, Clone)]
pub struct BranchResult {
    pub loss: f64,
    pub per_pixel: Vec<f64>,
    pub valid: usize,
    pub grad_dense: Vec<f64>,
    pub grad_pose: PoseGrad,
}

/// The target looked up at each source pixel's correspondence, per channel,
/// as duals over that pixel's variables; `None` where the lookup is invalid.
type Warp<const N: usize> = Vec<Option<[Dual<N>; 3]>>;

/// Offsets of the 3×3 window in row-major order.
const WINDOW: [(isize, isize); 9] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

fn lookup<const N: usize>(tgt: &Image, pu: Dual<N>, pv: Dual<N>) -> Option<[Dual<N>; 3]> {
    let s = tgt.sample(PixelCoord::new(pu.v, pv.v));
    if !s.valid {
        return None;
    }
    let mut out = [Dual::constant(0.0); 3];
    for (c, o) in out.iter_mut().enumerate().take(s.channels) {
        *o = Dual::lift2(s.value[c], [s.d_du[c], s.d_dv[c]], [pu, pv]);
    }
    Some(out)
}

fn rigid_warp(tgt: &Image, depth: &DepthMap, k: &Intrinsics, m: &RigidMotion, inverse: bool) -> Warp<RIGID_N> {
    let (motion, cam) = seeded_globals::<RIGID_N>(m, k, inverse);
    let w = depth.width();
    (0..w * depth.height())
        .into_par_iter()
        .map(|i| {
            let d = Dual::variable(depth.data()[i], DEPTH_SLOT);
            let p = cam.backproject(Dual::constant((i % w) as f64), Dual::constant((i / w) as f64), d);
            let q = motion.apply(&p);
            if !(q.z.v > MIN_Z) {
                return None;
            }
            let pp = cam.project(&q);
            lookup(tgt, pp.u, pp.v)
        })
        .collect()
}

fn flow_warp(tgt: &Image, flow: &FlowField) -> Warp<2> {
    let w = flow.width();
    (0..w * flow.height())
        .into_par_iter()
        .map(|i| {
            let f = flow.get(i % w, i / w);
            let u = Dual::constant((i % w) as f64) + Dual::variable(f[0], 0);
            let v = Dual::constant((i / w) as f64) + Dual::variable(f[1], 1);
            lookup(tgt, u, v)
        })
        .collect()
}

/// Error of one pixel and its derivatives: with respect to the dense
/// variables (first `D` tangent slots) of each window member, and the globals.
#[derive(Debug, Clone, Copy)]
struct PixelTerm<const D: usize> {
    value: f64,
    dense: [[f64; D]; 9],
    global: [f64; N_GLOBAL],
}

/// Window error at `(x, y)` against a warped target; see [`dense_slot`] for
/// the tangent layout.
fn window_term<const N: usize, const D: usize>(src: &Image, warp: &Warp<N>, x: usize, y: usize, r: f64) -> Option<PixelTerm<D>> {
    let (w, h) = (src.width(), src.height());
    if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
        return None;
    }
    let mut members = [[Dual::<N>::constant(0.0); 3]; 9];
    for (k, (dx, dy)) in WINDOW.iter().enumerate() {
        let q = (y as isize + dy) as usize * w + (x as isize + dx) as usize;
        members[k] = warp[q]?;
    }
    let c = src.channels();
    let inv_c = 1.0 / c as f64;
    let mut term = PixelTerm {
        value: 0.0,
        dense: [[0.0; D]; 9],
        global: [0.0; N_GLOBAL],
    };
    for ch in 0..c {
        let sw = src.window3(x, y, ch).map(Dual::<9>::constant);
        let tw: [Dual<9>; 9] = std::array::from_fn(|k| Dual::variable(members[k][ch].v, k));
        let s = similarity_generic(&sw, &tw, r);
        term.value += s.v * inv_c;
        for k in 0..9 {
            let g = s.d[k] * inv_c;
            let md = &members[k][ch].d;
            for j in 0..D {
                term.dense[k][j] += g * md[dense_slot::<N, D>(j)];
            }
            if N > D {
                for j in 0..N_GLOBAL {
                    term.global[j] += g * md[j];
                }
            }
        }
    }
    Some(term)
}

/// Rigid warps carry the globals in slots `0..N_GLOBAL` and depth after them;
/// flow warps carry only the two flow slots.
const fn dense_slot<const N: usize, const D: usize>(j: usize) -> usize {
    if N > D {
        N_GLOBAL + j
    } else {
        j
    }
}

fn terms<const N: usize, const D: usize>(src: &Image, warp: &Warp<N>, r: f64) -> Vec<Option<PixelTerm<D>>> {
    let w = src.width();
    (0..w * src.height())
        .into_par_iter()
        .map(|i| window_term::<N, D>(src, warp, i % w, i / w, r))
        .collect()
}

/// Gathers the selected, scaled per-window derivatives onto the pixels they
/// belong to, in a fixed order.
fn scatter<const D: usize>(terms: &[Option<&PixelTerm<D>>], w: usize, h: usize, scale: f64) -> Vec<f64> {
    let per_pixel: Vec<[f64; D]> = (0..w * h)
        .into_par_iter()
        .map(|q| {
            let (qx, qy) = ((q % w) as isize, (q / w) as isize);
            let mut acc = [0.0; D];
            for (k, (dx, dy)) in WINDOW.iter().enumerate() {
                // q is member k of the window centred at q − δ_k
                let (px, py) = (qx - dx, qy - dy);
                if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                    continue;
                }
                if let Some(t) = terms[py as usize * w + px as usize] {
                    for j in 0..D {
                        acc[j] += t.dense[k][j] * scale;
                    }
                }
            }
            acc
        })
        .collect();
    per_pixel.into_iter().flatten().collect()
}

fn check_images(src: &Image, tgt: &Image) -> Result<()> {
    check_same_size("photometric images", (src.width(), src.height()), (tgt.width(), tgt.height()))?;
    if src.channels() != tgt.channels() {
        return Err(Error::InvalidInput("photometric images differ in channel count".into()));
    }
    if src.width() < 3 || src.height() < 3 {
        return Err(Error::InvalidInput("photometric loss needs images of at least 3x3".into()));
    }
    Ok(())
}

/// Adaptive photometric loss of `src → tgt` per pixel: the
/// minimum of the rigid-warp error (depth, intrinsics, motion) and the
/// flow-warp error, averaged over pixels where at least one branch is valid.
/// Exact ties select the rigid branch; gradients flow only through the
/// selected branch.
pub fn adaptive_photometric(
    src: &Image,
    tgt: &Image,
    depth: &DepthMap,
    k: &Intrinsics,
    m: &RigidMotion,
    flow: &FlowField,
    r: f64,
) -> Result<PhotometricResult> {
    check_images(src, tgt)?;
    let (w, h) = (src.width(), src.height());
    check_same_size("depth", (w, h), (depth.width(), depth.height()))?;
    check_same_size("flow", (w, h), (flow.width(), flow.height()))?;
    check_intrinsics(k, w, h)?;
    depth.require_positive("adaptive photometric depth")?;
    let n = w * h;

    let rigid = terms::<RIGID_N, 1>(src, &rigid_warp(tgt, depth, k, m, false), r);
    let flows = terms::<2, 2>(src, &flow_warp(tgt, flow), r);

    let mask: BranchMask = (0..n)
        .map(|i| match (&rigid[i], &flows[i]) {
            (Some(a), Some(b)) if b.value < a.value => Branch::Flow,
            (Some(_), _) => Branch::Rigid,
            (None, Some(_)) => Branch::Flow,
            (None, None) => Branch::Invalid,
        })
        .collect();
    let per_pixel: Vec<f64> = (0..n)
        .map(|i| match mask[i] {
            Branch::Rigid => rigid[i].unwrap().value,
            Branch::Flow => flows[i].unwrap().value,
            Branch::Invalid => f64::NAN,
        })
        .collect();
    let valid = mask.iter().filter(|b| **b != Branch::Invalid).count();
    if valid == 0 {
        return Err(Error::EmptySupport("adaptive photometric loss"));
    }
    let inv_n = 1.0 / valid as f64;

    let values: Vec<f64> = per_pixel.iter().copied().filter(|v| !v.is_nan()).collect();
    let chosen_rigid: Vec<Option<&PixelTerm<1>>> =
        (0..n).map(|i| rigid[i].as_ref().filter(|_| mask[i] == Branch::Rigid)).collect();
    let chosen_flow: Vec<Option<&PixelTerm<2>>> =
        (0..n).map(|i| flows[i].as_ref().filter(|_| mask[i] == Branch::Flow)).collect();
    let pose_terms: Vec<[f64; N_GLOBAL]> = chosen_rigid.iter().flatten().map(|t| t.global).collect();
    Ok(PhotometricResult {
        loss: pairwise_sum(&values) * inv_n,
        per_pixel,
        valid,
        grad_depth: scatter(&chosen_rigid, w, h, inv_n),
        grad_pose: PoseGrad::from_tangent(&pairwise_sum_arrays(&pose_terms)).scaled(inv_n),
        grad_flow: scatter(&chosen_flow, w, h, inv_n),
        mask,
    })
}

fn branch_result<const D: usize>(terms: &[Option<PixelTerm<D>>], w: usize, h: usize, what: &'static str) -> Result<BranchResult> {
    let valid = terms.iter().filter(|t| t.is_some()).count();
    if valid == 0 {
        return Err(Error::EmptySupport(what));
    }
    let inv_n = 1.0 / valid as f64;
    let values: Vec<f64> = terms.iter().flatten().map(|t| t.value).collect();
    let pose_terms: Vec<[f64; N_GLOBAL]> = terms.iter().flatten().map(|t| t.global).collect();
    let refs: Vec<Option<&PixelTerm<D>>> = terms.iter().map(|t| t.as_ref()).collect();
    Ok(BranchResult {
        loss: pairwise_sum(&values) * inv_n,
        per_pixel: terms.iter().map(|t| t.map_or(f64::NAN, |t| t.value)).collect(),
        valid,
        grad_dense: scatter(&refs, w, h, inv_n),
        grad_pose: PoseGrad::from_tangent(&pairwise_sum_arrays(&pose_terms)).scaled(inv_n),
    })
}

pub(crate) fn rigid_photometric_dir(
    src: &Image,
    tgt: &Image,
    depth: &DepthMap,
    k: &Intrinsics,
    m: &RigidMotion,
    inverse: bool,
    r: f64,
) -> Result<BranchResult> {
    check_images(src, tgt)?;
    let (w, h) = (src.width(), src.height());
    check_same_size("depth", (w, h), (depth.width(), depth.height()))?;
    check_intrinsics(k, w, h)?;
    depth.require_positive("rigid photometric depth")?;
    let t = terms::<RIGID_N, 1>(src, &rigid_warp(tgt, depth, k, m, inverse), r);
    branch_result(&t, w, h, "rigid photometric loss")
}

/// Photometric loss using the rigid branch alone.
pub fn rigid_photometric(
    src: &Image,
    tgt: &Image,
    depth: &DepthMap,
    k: &Intrinsics,
    m: &RigidMotion,
    r: f64,
) -> Result<BranchResult> {
    rigid_photometric_dir(src, tgt, depth, k, m, false, r)
}

/// Photometric loss using the flow branch alone.
pub fn flow_photometric(src: &Image, tgt: &Image, flow: &FlowField, r: f64) -> Result<BranchResult> {
    check_images(src, tgt)?;
    let (w, h) = (src.width(), src.height());
    check_same_size("flow", (w, h), (flow.width(), flow.height()))?;
    let t = terms::<2, 2>(src, &flow_warp(tgt, flow), r);
    branch_result(&t, w, h, "flow photometric loss")
}
