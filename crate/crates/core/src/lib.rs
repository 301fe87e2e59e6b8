//! Multi-view 3D human pose fusion with a tree-structured limb-length prior.
//!
//! Per-view 2D joint heatmaps are backprojected into a voxel grid and
//! combined with a skeleton prior; exact sum-product inference yields a
//! marginal per joint. Marginal means are the pose estimate and the
//! covariance determinants rank confidence, which drives harvesting of
//! reliable joints as training annotations.
//!
//! The modules follow the pipeline: [`geometry`] and [`skeleton`] describe
//! the rig and the body, [`heatmaps`] holds the evidence (and a synthetic
//! generator), [`inference`] fuses it, [`selection`] and [`annotate`]
//! harvest targets, and [`metrics`] evaluates.

pub mod annotate;
pub mod error;
pub mod geometry;
pub mod heatmaps;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod records;
pub mod selection;
pub mod skeleton;

pub use error::{Error, ErrorClass, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/skeleton.md")]
    mod skeleton {}
    #[doc = include_str!("../../../book/src/heatmaps.md")]
    mod heatmaps {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/targets.md")]
    mod targets {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
