//! Windowed structural similarity and the photometric similarity `S`.
//!
//! Windows are 3×3 box neighbourhoods (population statistics, weight 1/9).

use crate::error::{Error, Result};
use crate::grad::Real;

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Trade-off between the SSIM and L1 parts of `S`.
pub const DEFAULT_SIMILARITY_R: f64 = 0.85;

pub(crate) fn ssim_generic<T: Real>(a: &[T], b: &[T]) -> T {
    let n = T::cst(1.0 / a.len() as f64);
    let mut ma = T::zero();
    let mut mb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        ma += x;
        mb += y;
    }
    ma *= n;
    mb *= n;
    let mut vaa = T::zero();
    let mut vbb = T::zero();
    let mut vab = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        vaa += dx * dx;
        vbb += dy * dy;
        vab += dx * dy;
    }
    vaa *= n;
    vbb *= n;
    vab *= n;
    let two = T::cst(2.0);
    let c1 = T::cst(SSIM_C1);
    let c2 = T::cst(SSIM_C2);
    (two * ma * mb + c1) * (two * vab + c2) / ((ma * ma + mb * mb + c1) * (vaa + vbb + c2))
}

/// `r·(1 − SSIM)/2 + (1 − r)·mean|a − b|` for one channel.
pub(crate) fn similarity_generic<T: Real>(a: &[T], b: &[T], r: f64) -> T {
    let mut l1 = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        l1 += (x - y).abs();
    }
    l1 *= T::cst(1.0 / a.len() as f64);
    T::cst(r * 0.5) * (T::cst(1.0) - ssim_generic(a, b)) + T::cst(1.0 - r) * l1
}

fn check_shapes(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput(format!(
            "window shapes differ or are empty ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// SSIM of two equally shaped windows with `C1 = 0.01²`, `C2 = 0.03²`.
pub fn ssim(a: &[f64], b: &[f64]) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(ssim_generic(a, b))
}

/// The photometric similarity `S(a, b)`; zero iff the windows are identical.
pub fn similarity(a: &[f64], b: &[f64], r: f64) -> Result<f64> {
    check_shapes(a, b)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidInput(format!("similarity trade-off r must lie in [0, 1], got {r}")));
    }
    Ok(similarity_generic(a, b, r))
}
