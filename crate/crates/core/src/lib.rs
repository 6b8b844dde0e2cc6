//! Differentiable geometric losses and dense test-time refinement of depth,
//! camera motion, intrinsics and optical flow for monocular frame snippets.

// `!(x > 0.0)` is the NaN-rejecting form; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod grad;
pub mod image;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod refine;
pub mod ssim;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{Intrinsics, PixelCoord, Point3, RigidMotion};
pub use image::{DepthMap, FlowField, Image};
pub use losses::{total_loss, LossConfig, LossReport, LossWeights, Snippet};
pub use refine::{oft_refine, OutputState, ProximalPrior, ProximalWeights, RefineConfig, VariableMask};
