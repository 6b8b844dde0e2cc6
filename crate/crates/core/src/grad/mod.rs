//! Differentiation substrate.
//!
//! Pose and intrinsics derivatives come from forward-mode [`Dual`] numbers with
//! a small fixed tangent width. Dense depth and flow derivatives are assembled
//! per pixel: every per-pixel loss term touches one depth value or one flow
//! vector, which is carried as one extra tangent slot (the "probe") of the same
//! dual number. [`finite_diff_check`] verifies both against central differences.

mod check;
mod dual;

pub use check::{finite_diff_check, relative_error, GradCheckReport};
pub use dual::{Dual, DualError, Real};

/// Tangent slots shared by all kernels: 3 Euler angles, 3 translation
/// components, then fx and fy.
pub const EULER: usize = 0;
pub const TRANSLATION: usize = 3;
pub const FOCAL: usize = 6;
pub const N_GLOBAL: usize = 8;
