//! Multi-view 3D pictorial-structures inference.
//!
//! The posterior over joint positions factorizes as the product of per-view
//! heatmap evidence for every joint and a limb-length indicator for every
//! skeleton edge. On the voxel grid this is a tree-structured discrete model,
//! and its exact marginals come from [`sum_product`]. The pose estimate is the
//! per-joint marginal mean.

mod shell;
mod sum_product;
mod unary;

pub use shell::{build_shell_kernel, build_shell_kernel_with, shell_aggregate, ShellKernel};
pub use sum_product::{marginal_moments, sum_product, sum_product_rooted, JointMarginal};
pub use unary::{compute_unaries, UnaryField};

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{default_volume, triangulate_rays, CameraRig, VolumeGrid, VolumeSettings};
use crate::heatmaps::HeatmapStack;
use crate::skeleton::{Pose3D, Skeleton, Tolerance};

pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    /// Lower clamp on sampled heatmap values before taking logs.
    pub floor: f64,
    /// Overrides the skeleton's limb-length tolerance when set.
    pub tolerance: Option<Tolerance>,
    /// Root of the message schedule; the hub joint when `None`.
    pub root: Option<usize>,
    pub volume: VolumeSettings,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            floor: DEFAULT_FLOOR,
            tolerance: None,
            root: None,
            volume: VolumeSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoseEstimate {
    pub pose: Pose3D,
    pub marginals: Vec<JointMarginal>,
    pub grid: VolumeGrid,
}

/// Fuses one frame's heatmaps on a given grid.
pub fn estimate_pose(
    rig: &CameraRig,
    stacks: &[HeatmapStack],
    skeleton: &Skeleton,
    grid: &VolumeGrid,
    config: &InferenceConfig,
) -> Result<PoseEstimate> {
    let unaries = compute_unaries(rig, stacks, grid, config.floor)?;
    if unaries.len() != skeleton.num_joints() {
        return Err(Error::InvalidInput(format!(
            "heatmaps carry {} joints but the skeleton has {}",
            unaries.len(),
            skeleton.num_joints()
        )));
    }
    let tolerance = config.tolerance.unwrap_or(skeleton.tolerance()).resolve(grid);
    let kernels = skeleton
        .edges()
        .iter()
        .map(|&e| build_shell_kernel_with(skeleton, e, grid, tolerance))
        .collect::<Result<Vec<_>>>()?;
    let root = config.root.unwrap_or_else(|| skeleton.hub_joint());
    let marginals = sum_product_rooted(skeleton, &unaries, &kernels, root)?;
    let pose = Pose3D::complete(marginals.iter().map(|m| m.mean).collect());
    Ok(PoseEstimate {
        pose,
        marginals,
        grid: grid.clone(),
    })
}

/// Picks the inference volume: the configured center if any, else a cube
/// around the bounding-box center of the triangulated joints.
pub fn choose_volume(
    rig: &CameraRig,
    stacks: &[HeatmapStack],
    skeleton: &Skeleton,
    config: &InferenceConfig,
) -> Result<VolumeGrid> {
    if config.volume.center.is_some() {
        return default_volume(&config.volume, None);
    }
    let rough = triangulation_baseline(rig, stacks, skeleton, config.floor)?;
    let present: Vec<&Vector3<f64>> = (0..rough.len()).filter_map(|j| rough.get(j)).collect();
    let seed = (!present.is_empty()).then(|| {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in present {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo + hi) / 2.0
    });
    default_volume(&config.volume, seed)
}

/// [`choose_volume`] followed by [`estimate_pose`].
pub fn fuse_frame(
    rig: &CameraRig,
    stacks: &[HeatmapStack],
    skeleton: &Skeleton,
    config: &InferenceConfig,
) -> Result<PoseEstimate> {
    let grid = choose_volume(rig, stacks, skeleton, config)?;
    estimate_pose(rig, stacks, skeleton, &grid, config)
}

/// Structure-free baseline: triangulates each joint's per-view heatmap argmax.
///
/// A view contributes a ray only when its peak exceeds `floor`; joints with
/// fewer than two such views are marked not present.
pub fn triangulation_baseline(
    rig: &CameraRig,
    stacks: &[HeatmapStack],
    skeleton: &Skeleton,
    floor: f64,
) -> Result<Pose3D> {
    let joints = unary::check_views(rig, stacks)?;
    if joints != skeleton.num_joints() {
        return Err(Error::InvalidInput(format!(
            "heatmaps carry {joints} joints but the skeleton has {}",
            skeleton.num_joints()
        )));
    }
    let mut positions = vec![Vector3::zeros(); joints];
    let mut present = vec![false; joints];
    for joint in 0..joints {
        let rays: Vec<_> = rig
            .cameras()
            .iter()
            .zip(stacks)
            .filter_map(|(cam, stack)| {
                let (x, y, peak) = stack.argmax(joint);
                (f64::from(peak) > floor).then(|| cam.pixel_ray(&Vector2::new(x as f64, y as f64)))
            })
            .collect();
        if let Some(p) = triangulate_rays(&rays) {
            positions[joint] = p;
            present[joint] = true;
        }
    }
    Pose3D::new(positions, present)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmaps::{random_pose, render_synthetic, SyntheticScenario};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario() -> SyntheticScenario {
        let rig = CameraRig::ring(3, 4500.0, 1000.0, Vector3::zeros(), 300.0, 256, 256).unwrap();
        let sk = Skeleton::body14();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let poses = vec![random_pose(&sk, &mut rng)];
        SyntheticScenario::new(rig, sk, poses, 5)
    }

    #[test]
    fn coarse_fusion_recovers_pose() {
        let s = scenario();
        let stacks = s.render_frame(0).unwrap();
        let config = InferenceConfig {
            volume: VolumeSettings {
                resolution: 24,
                ..Default::default()
            },
            ..Default::default()
        };
        let est = fuse_frame(&s.rig, &stacks, &s.skeleton, &config).unwrap();
        let pitch = est.grid.pitch().max();
        for (j, m) in est.marginals.iter().enumerate() {
            let sum: f64 = m.probabilities.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            let err = (est.pose.positions[j] - s.true_poses[0].positions[j]).norm();
            assert!(err < 2.0 * pitch, "joint {j} off by {err} mm");
        }
    }

    #[test]
    fn baseline_handles_missing_views() {
        let mut s = scenario();
        for cam in 0..2 {
            s.occlusions.push(crate::heatmaps::Occlusion { frame: 0, camera: cam, joint: 3 });
        }
        let stacks: Vec<_> = (0..3).map(|c| render_synthetic(&s, 0, c).unwrap()).collect();
        let pose = triangulation_baseline(&s.rig, &stacks, &s.skeleton, DEFAULT_FLOOR).unwrap();
        assert!(!pose.present[3]);
        for j in (0..14).filter(|&j| j != 3) {
            assert!(pose.present[j]);
            assert!((pose.positions[j] - s.true_poses[0].positions[j]).norm() < 31.25);
        }
    }

    #[test]
    fn joint_count_mismatch_is_rejected() {
        let s = scenario();
        let stacks: Vec<_> = s
            .rig
            .cameras()
            .iter()
            .map(|c| HeatmapStack::filled(3, 8, 8, 0.5, c.id(), "f").unwrap())
            .collect();
        let grid = VolumeGrid::cube(Vector3::zeros(), 2000.0, 8).unwrap();
        assert!(estimate_pose(&s.rig, &stacks, &s.skeleton, &grid, &InferenceConfig::default()).is_err());
        assert!(triangulation_baseline(&s.rig, &stacks, &s.skeleton, DEFAULT_FLOOR).is_err());
    }
}
