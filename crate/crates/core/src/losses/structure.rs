//! Multi-view structure consistency: the source back-projection moved into the
//! target frame should agree with the target's own back-projection at the
//! reprojected pixel.
//!
//! The target depth is interpolated in inverse-depth space. Inverse depth of a
//! plane is affine in pixel coordinates, so bilinear interpolation is exact on
//! planar geometry.

use rayon::prelude::*;

use super::{check_intrinsics, check_same_size, pairwise_sum, pairwise_sum_arrays, seeded_globals, PoseGrad};
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, RigidMotion, MIN_Z};
use crate::grad::{Dual, Real, N_GLOBAL};
use crate::image::{stencil, DepthMap, Stencil};

const N: usize = N_GLOBAL + 2;
const DEPTH_SLOT: usize = N_GLOBAL;
const INV_DEPTH_PROBE: usize = N_GLOBAL + 1;

#[derive(Debug, Clone)]
pub struct StructureResult {
    pub loss: f64,
    /// L1 3-D discrepancy per source pixel, NaN where invalid.
    pub per_pixel: Vec<f64>,
    pub valid: usize,
    pub grad_source: Vec<f64>,
    pub grad_target: Vec<f64>,
    pub grad_pose: PoseGrad,
}

struct PixelTerm {
    value: Dual<N>,
    stencil: Stencil,
}

/// Mean over valid pixels of `‖x' − M·x‖₁`, where `x` back-projects the
/// source depth, and `x'` back-projects the target depth at `p' = π(M·x)`.
/// A pixel is valid when `M·x` is in front of the camera and `p'` lies in
/// `[0, w−1] × [0, h−1]`.
pub fn multiview_structure(
    depth_s: &DepthMap,
    depth_t: &DepthMap,
    k: &Intrinsics,
    m: &RigidMotion,
) -> Result<StructureResult> {
    multiview_structure_dir(depth_s, depth_t, k, m, false)
}

pub(crate) fn multiview_structure_dir(
    depth_s: &DepthMap,
    depth_t: &DepthMap,
    k: &Intrinsics,
    m: &RigidMotion,
    inverse: bool,
) -> Result<StructureResult> {
    let (w, h) = (depth_s.width(), depth_s.height());
    check_same_size("structure depths", (w, h), (depth_t.width(), depth_t.height()))?;
    check_intrinsics(k, w, h)?;
    depth_s.require_positive("source depth")?;
    depth_t.require_positive("target depth")?;
    let (motion, cam) = seeded_globals::<N>(m, k, inverse);
    let dt = depth_t.data();

    let terms: Vec<Option<PixelTerm>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let d = Dual::<N>::variable(depth_s.data()[i], DEPTH_SLOT);
            let moved = motion.apply(&cam.backproject(Dual::cst(x), Dual::cst(y), d));
            if !(moved.z.v > MIN_Z) {
                return None;
            }
            let pp = cam.project(&moved);
            let st = stencil(w, h, pp.u.v, pp.v.v)?;
            let (mut rho, mut drho_du, mut drho_dv) = (0.0, 0.0, 0.0);
            for j in 0..4 {
                let inv = 1.0 / dt[st.idx[j]];
                rho += st.w[j] * inv;
                drho_du += st.dw_du[j] * inv;
                drho_dv += st.dw_dv[j] * inv;
            }
            let rho = Dual::lift2(rho, [drho_du, drho_dv], [pp.u, pp.v]) + Dual::variable(0.0, INV_DEPTH_PROBE);
            let other = cam.backproject(pp.u, pp.v, Dual::cst(1.0) / rho);
            Some(PixelTerm {
                value: (other - moved).l1(),
                stencil: st,
            })
        })
        .collect();

    let valid = terms.iter().filter(|t| t.is_some()).count();
    if valid == 0 {
        return Err(Error::EmptySupport("multi-view structure loss"));
    }
    let inv_n = 1.0 / valid as f64;
    let values: Vec<f64> = terms.iter().flatten().map(|t| t.value.v).collect();
    let pose_terms: Vec<[f64; N_GLOBAL]> = terms.iter().flatten().map(|t| std::array::from_fn(|j| t.value.d[j])).collect();
    let mut grad_source = vec![0.0; w * h];
    let mut grad_target = vec![0.0; w * h];
    for (i, t) in terms.iter().enumerate() {
        let Some(t) = t else { continue };
        grad_source[i] = t.value.d[DEPTH_SLOT] * inv_n;
        let g_rho = t.value.d[INV_DEPTH_PROBE] * inv_n;
        for j in 0..4 {
            let q = t.stencil.idx[j];
            grad_target[q] -= g_rho * t.stencil.w[j] / (dt[q] * dt[q]);
        }
    }
    Ok(StructureResult {
        loss: pairwise_sum(&values) * inv_n,
        per_pixel: terms.iter().map(|t| t.as_ref().map_or(f64::NAN, |t| t.value.v)).collect(),
        valid,
        grad_source,
        grad_target,
        grad_pose: PoseGrad::from_tangent(&pairwise_sum_arrays(&pose_terms)).scaled(inv_n),
    })
}
