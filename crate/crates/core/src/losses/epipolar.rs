//! Dense epipolar penalty on flow correspondences.

use rayon::prelude::*;

use super::{check_intrinsics, pairwise_sum, pairwise_sum_arrays, seeded_globals, PoseGrad};
use crate::error::Result;
use crate::geometry::{epipolar_form, Intrinsics, PixelCoord, RigidMotion};
use crate::grad::{Dual, Real, N_GLOBAL};
use crate::image::FlowField;

const N: usize = N_GLOBAL + 2;
const FLOW_SLOT: usize = N_GLOBAL;

#[derive(Debug, Clone)]
pub struct EpipolarResult {
    pub loss: f64,
    /// Signed residual per pixel.
    pub residual: Vec<f64>,
    pub grad_flow: Vec<f64>,
    pub grad_pose: PoseGrad,
}

/// Mean over all pixels of `|n(p + F(p))ᵀ [t̂]× R n(p)|`. With `t = 0` the
/// essential matrix vanishes and so do the loss and its gradients.
pub fn epipolar_loss(flow: &FlowField, k: &Intrinsics, m: &RigidMotion) -> Result<EpipolarResult> {
    epipolar_loss_dir(flow, k, m, false)
}

pub(crate) fn epipolar_loss_dir(flow: &FlowField, k: &Intrinsics, m: &RigidMotion, inverse: bool) -> Result<EpipolarResult> {
    let (w, h) = (flow.width(), flow.height());
    check_intrinsics(k, w, h)?;
    let (motion, cam) = seeded_globals::<N>(m, k, inverse);
    let essential = motion.essential();
    let terms: Vec<Dual<N>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let f = flow.get(i % w, i / w);
            let p = PixelCoord::new(Dual::cst(x), Dual::cst(y));
            let q = PixelCoord::new(
                Dual::cst(x) + Dual::variable(f[0], FLOW_SLOT),
                Dual::cst(y) + Dual::variable(f[1], FLOW_SLOT + 1),
            );
            epipolar_form(&cam, essential.as_ref(), p, q)
        })
        .collect();
    let inv_n = 1.0 / terms.len() as f64;
    let abs: Vec<Dual<N>> = terms.iter().map(|r| r.abs()).collect();
    let values: Vec<f64> = abs.iter().map(|a| a.v).collect();
    let pose_terms: Vec<[f64; N_GLOBAL]> = abs.iter().map(|a| std::array::from_fn(|j| a.d[j])).collect();
    let mut grad_flow = vec![0.0; 2 * terms.len()];
    for (i, a) in abs.iter().enumerate() {
        grad_flow[2 * i] = a.d[FLOW_SLOT] * inv_n;
        grad_flow[2 * i + 1] = a.d[FLOW_SLOT + 1] * inv_n;
    }
    Ok(EpipolarResult {
        loss: pairwise_sum(&values) * inv_n,
        residual: terms.iter().map(|r| r.v).collect(),
        grad_flow,
        grad_pose: PoseGrad::from_tangent(&pairwise_sum_arrays(&pose_terms)).scaled(inv_n),
    })
}
