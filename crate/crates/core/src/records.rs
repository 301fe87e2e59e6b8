//! Per-frame pose documents (JSON Lines, one record per frame).
//!
//! The same record type carries fused estimates (with covariance and grid
//! metadata) and ground-truth poses (positions only).

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VolumeGrid;
use crate::inference::PoseEstimate;
use crate::skeleton::{Pose3D, Skeleton};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub center: [f64; 3],
    pub extent: [f64; 3],
    pub resolution: usize,
    pub pitch: [f64; 3],
}

impl From<&VolumeGrid> for GridRecord {
    fn from(g: &VolumeGrid) -> Self {
        let p = g.pitch();
        GridRecord {
            center: [g.center().x, g.center().y, g.center().z],
            extent: [g.extent().x, g.extent().y, g.extent().z],
            resolution: g.resolution(),
            pitch: [p.x, p.y, p.z],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRecord {
    pub name: String,
    /// Marginal mean or ground-truth position (mm); `null` when missing.
    pub mean: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_det: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_probability: Option<f64>,
}

impl JointRecord {
    pub fn covariance_matrix(&self) -> Option<Matrix3<f64>> {
        self.covariance
            .map(|rows| Matrix3::from_fn(|r, c| rows[r][c]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub frame_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridRecord>,
    pub joints: Vec<JointRecord>,
}

impl PoseRecord {
    pub fn from_estimate(frame_id: impl Into<String>, skeleton: &Skeleton, est: &PoseEstimate) -> Self {
        let joints = est
            .marginals
            .iter()
            .map(|m| {
                let c = &m.covariance;
                JointRecord {
                    name: skeleton.joint_names()[m.joint].clone(),
                    mean: Some([m.mean.x, m.mean.y, m.mean.z]),
                    covariance: Some([
                        [c[(0, 0)], c[(0, 1)], c[(0, 2)]],
                        [c[(1, 0)], c[(1, 1)], c[(1, 2)]],
                        [c[(2, 0)], c[(2, 1)], c[(2, 2)]],
                    ]),
                    cov_det: Some(m.cov_det),
                    peak_probability: Some(m.peak_probability()),
                }
            })
            .collect();
        PoseRecord {
            frame_id: frame_id.into(),
            grid: Some(GridRecord::from(&est.grid)),
            joints,
        }
    }

    pub fn from_pose(frame_id: impl Into<String>, skeleton: &Skeleton, pose: &Pose3D) -> Self {
        let joints = (0..pose.len())
            .map(|j| JointRecord {
                name: skeleton.joint_names()[j].clone(),
                mean: pose.get(j).map(|p| [p.x, p.y, p.z]),
                covariance: None,
                cov_det: None,
                peak_probability: None,
            })
            .collect();
        PoseRecord {
            frame_id: frame_id.into(),
            grid: None,
            joints,
        }
    }

    /// Joint records reordered to the skeleton's joint order; absent names are `None`.
    pub fn joints_by_skeleton<'a>(&'a self, skeleton: &Skeleton) -> Result<Vec<Option<&'a JointRecord>>> {
        let by_name: HashMap<&str, &JointRecord> = self.joints.iter().map(|j| (j.name.as_str(), j)).collect();
        if let Some(unknown) = self.joints.iter().find(|j| skeleton.joint_index(&j.name).is_none()) {
            return Err(Error::InvalidInput(format!(
                "frame `{}` names unknown joint `{}`",
                self.frame_id, unknown.name
            )));
        }
        Ok(skeleton
            .joint_names()
            .iter()
            .map(|n| by_name.get(n.as_str()).copied())
            .collect())
    }

    pub fn to_pose(&self, skeleton: &Skeleton) -> Result<Pose3D> {
        let joints = self.joints_by_skeleton(skeleton)?;
        let mut positions = Vec::with_capacity(joints.len());
        let mut present = Vec::with_capacity(joints.len());
        for j in joints {
            match j.and_then(|j| j.mean) {
                Some(m) => {
                    positions.push(Vector3::from(m));
                    present.push(true);
                }
                None => {
                    positions.push(Vector3::zeros());
                    present.push(false);
                }
            }
        }
        Pose3D::new(positions, present)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_round_trip_through_json() {
        let sk = Skeleton::body14();
        let mut pose = Pose3D::complete((0..14).map(|j| Vector3::new(j as f64, 0.5, -1.25)).collect());
        pose.present[3] = false;
        let rec = PoseRecord::from_pose("f1", &sk, &pose);
        let text = serde_json::to_string(&rec).unwrap();
        let back: PoseRecord = serde_json::from_str(&text).unwrap();
        let restored = back.to_pose(&sk).unwrap();
        assert_eq!(restored.present, pose.present);
        for j in (0..14).filter(|&j| j != 3) {
            assert_eq!(restored.positions[j], pose.positions[j]);
        }
    }

    #[test]
    fn unknown_joint_name_is_an_error() {
        let sk = Skeleton::body14();
        let mut rec = PoseRecord::from_pose("f", &sk, &Pose3D::complete(vec![Vector3::zeros(); 14]));
        rec.joints[0].name = "tail".into();
        assert!(rec.to_pose(&sk).is_err());
    }
}
