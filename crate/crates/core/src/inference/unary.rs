use nalgebra::Vector2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CameraRig, Projection, VolumeGrid};
use crate::heatmaps::HeatmapStack;

/// Log-domain multi-view evidence for one joint over every voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryField {
    pub joint: usize,
    pub grid: VolumeGrid,
    pub log_values: Vec<f64>,
}

/// Checks that `stacks` pair one-to-one with the rig cameras and agree in joint count.
pub(crate) fn check_views(rig: &CameraRig, stacks: &[HeatmapStack]) -> Result<usize> {
    if stacks.len() != rig.len() {
        return Err(Error::InvalidInput(format!(
            "{} heatmap stacks for a {}-camera rig",
            stacks.len(),
            rig.len()
        )));
    }
    for (cam, stack) in rig.cameras().iter().zip(stacks) {
        if stack.camera_id != cam.id() {
            return Err(Error::InvalidInput(format!(
                "heatmap stack for camera `{}` given where `{}` was expected",
                stack.camera_id,
                cam.id()
            )));
        }
    }
    let joints = stacks[0].joints();
    if let Some(s) = stacks.iter().find(|s| s.joints() != joints) {
        return Err(Error::InvalidInput(format!(
            "camera `{}` has {} heatmaps, expected {joints}",
            s.camera_id,
            s.joints()
        )));
    }
    Ok(joints)
}

/// Backprojects every view's heatmaps into the grid.
///
/// For joint `i` and voxel `v` the log-unary is
/// `Σ_k ln max(sample_k(i, π_k(v)), floor)`; voxels behind a camera or
/// outside its image contribute `ln floor` for that view.
pub fn compute_unaries(
    rig: &CameraRig,
    stacks: &[HeatmapStack],
    grid: &VolumeGrid,
    floor: f64,
) -> Result<Vec<UnaryField>> {
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::Config(format!("evidence floor {floor} must be positive")));
    }
    let joints = check_views(rig, stacks)?;
    let centers = grid.centers();
    let projections: Vec<Vec<Option<Vector2<f64>>>> = rig
        .cameras()
        .iter()
        .map(|cam| {
            centers
                .par_iter()
                .map(|c| match cam.project_finite(c) {
                    Projection::Pixel(p) => Some(p),
                    Projection::BehindCamera => None,
                })
                .collect()
        })
        .collect();
    let log_floor = floor.ln();
    Ok((0..joints)
        .into_par_iter()
        .map(|joint| {
            let mut log_values = vec![0.0; centers.len()];
            for (stack, proj) in stacks.iter().zip(&projections) {
                for (out, p) in log_values.iter_mut().zip(proj) {
                    *out += match p {
                        Some(p) => stack.sample_finite(joint, p.x, p.y, floor).max(floor).ln(),
                        None => log_floor,
                    };
                }
            }
            UnaryField {
                joint,
                grid: grid.clone(),
                log_values,
            }
        })
        .collect())
}
