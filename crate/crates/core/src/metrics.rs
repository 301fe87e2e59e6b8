//! Evaluation against ground truth: per-joint error, PCP, and the
//! coordinate regression loss. No rigid alignment is applied anywhere.

use std::collections::BTreeMap;

use nalgebra::{SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraRig;
use crate::skeleton::{Part, Pose3D, Skeleton};

pub const DEFAULT_PCP_ALPHA: f64 = 0.5;

/// Joint positions of one frame in one image, with presence flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose2D {
    pub positions: Vec<Vector2<f64>>,
    pub present: Vec<bool>,
}

impl Pose2D {
    pub fn complete(positions: Vec<Vector2<f64>>) -> Self {
        let present = vec![true; positions.len()];
        Pose2D { positions, present }
    }

    /// Projects a 3D pose; joints behind the camera or missing are absent.
    pub fn project(pose: &Pose3D, camera: &crate::geometry::Camera) -> Result<Self> {
        let mut positions = Vec::with_capacity(pose.len());
        let mut present = Vec::with_capacity(pose.len());
        for j in 0..pose.len() {
            let px = match pose.get(j) {
                Some(p) => camera.project(p)?.pixel(),
                None => None,
            };
            positions.push(px.unwrap_or_else(Vector2::zeros));
            present.push(px.is_some());
        }
        Ok(Pose2D { positions, present })
    }
}

trait Joints<const D: usize> {
    fn joint(&self, j: usize) -> Option<SVector<f64, D>>;
    fn count(&self) -> usize;
}

impl Joints<3> for Pose3D {
    fn joint(&self, j: usize) -> Option<Vector3<f64>> {
        self.get(j).copied()
    }
    fn count(&self) -> usize {
        self.len()
    }
}

impl Joints<2> for Pose2D {
    fn joint(&self, j: usize) -> Option<Vector2<f64>> {
        (self.present.get(j).copied().unwrap_or(false)).then(|| self.positions[j])
    }
    fn count(&self) -> usize {
        self.positions.len()
    }
}

fn check_aligned<T>(pred: &[T], gt: &[T]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidInput(format!(
            "{} predicted frames against {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Per-joint mean error (mm) over frames where the joint is present in
/// both; `None` for joints never jointly present.
pub fn per_joint_errors(pred: &[Pose3D], gt: &[Pose3D]) -> Result<Vec<Option<f64>>> {
    check_aligned(pred, gt)?;
    let n = gt.iter().map(Pose3D::len).max().unwrap_or(0);
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (p, g) in pred.iter().zip(gt) {
        if p.len() != g.len() {
            return Err(Error::InvalidInput("predicted and ground-truth poses differ in joint count".into()));
        }
        for j in 0..g.len() {
            if let (Some(a), Some(b)) = (p.get(j), g.get(j)) {
                sum[j] += (a - b).norm();
                count[j] += 1;
            }
        }
    }
    Ok(sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect())
}

/// Mean Euclidean error (mm) over all frames and mutually present joints.
pub fn mpjpe(pred: &[Pose3D], gt: &[Pose3D]) -> Result<f64> {
    check_aligned(pred, gt)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        if p.len() != g.len() {
            return Err(Error::InvalidInput("predicted and ground-truth poses differ in joint count".into()));
        }
        for j in 0..g.len() {
            if let (Some(a), Some(b)) = (p.get(j), g.get(j)) {
                sum += (a - b).norm();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidInput("no joint is present in both prediction and ground truth".into()));
    }
    Ok(sum / count as f64)
}

/// Per-part PCP percentages with their average over evaluated parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcpTable {
    pub alpha: f64,
    /// `None` for parts that could not be evaluated in any frame.
    pub parts: BTreeMap<String, Option<f64>>,
    pub average: Option<f64>,
}

fn pcp_generic<const D: usize, P: Joints<D>>(pred: &[P], gt: &[P], parts: &[Part], alpha: f64) -> Result<PcpTable> {
    check_aligned(pred, gt)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Config(format!("PCP alpha {alpha} must be non-negative")));
    }
    let mut table = BTreeMap::new();
    for part in parts {
        let (a, b) = part.joints;
        let mut evaluated = 0usize;
        let mut correct = 0usize;
        for (frame, (p, g)) in pred.iter().zip(gt).enumerate() {
            if p.count() != g.count() {
                return Err(Error::InvalidInput("predicted and ground-truth poses differ in joint count".into()));
            }
            let (Some(ga), Some(gb), Some(pa), Some(pb)) = (g.joint(a), g.joint(b), p.joint(a), p.joint(b)) else {
                continue;
            };
            let length = (ga - gb).norm();
            if length <= 0.0 {
                log::warn!("part `{}` has zero length in ground-truth frame {frame}; excluded", part.name);
                continue;
            }
            evaluated += 1;
            let limit = alpha * length;
            if (pa - ga).norm() <= limit && (pb - gb).norm() <= limit {
                correct += 1;
            }
        }
        let pct = (evaluated > 0).then(|| 100.0 * correct as f64 / evaluated as f64);
        table.insert(part.name.clone(), pct);
    }
    let scored: Vec<f64> = table.values().flatten().copied().collect();
    let average = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);
    Ok(PcpTable {
        alpha,
        parts: table,
        average,
    })
}

/// A part is correct when both predicted endpoints lie within
/// `alpha · (ground-truth part length)` of their true positions (inclusive).
pub fn pcp3d(pred: &[Pose3D], gt: &[Pose3D], parts: &[Part], alpha: f64) -> Result<PcpTable> {
    pcp_generic(pred, gt, parts, alpha)
}

/// [`pcp3d`] in pixel units.
pub fn pcp2d(pred: &[Pose2D], gt: &[Pose2D], parts: &[Part], alpha: f64) -> Result<PcpTable> {
    pcp_generic(pred, gt, parts, alpha)
}

/// `Σ_n ‖gt_n − pred_n‖²` over `3N` coordinate vectors.
pub fn l2_coordinate_loss(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() || !pred.len().is_multiple_of(3) {
        return Err(Error::InvalidInput(format!(
            "coordinate vectors of length {} and {} must match and be a multiple of 3",
            pred.len(),
            gt.len()
        )));
    }
    Ok(pred
        .chunks_exact(3)
        .zip(gt.chunks_exact(3))
        .map(|(p, g)| (Vector3::from_column_slice(g) - Vector3::from_column_slice(p)).norm_squared())
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames_evaluated: usize,
    pub mpjpe: f64,
    pub per_joint_errors: BTreeMap<String, Option<f64>>,
    pub pcp3d: PcpTable,
    /// Over all views, when a calibration was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcp2d: Option<PcpTable>,
}

/// Full report for aligned prediction and ground-truth sequences.
pub fn evaluate(
    pred: &[Pose3D],
    gt: &[Pose3D],
    skeleton: &Skeleton,
    alpha: f64,
    rig: Option<&CameraRig>,
) -> Result<EvalReport> {
    let mpjpe = mpjpe(pred, gt)?;
    let per_joint_errors = skeleton
        .joint_names()
        .iter()
        .cloned()
        .zip(per_joint_errors(pred, gt)?)
        .collect();
    let pcp3d = pcp3d(pred, gt, skeleton.parts(), alpha)?;
    let pcp2d = match rig {
        Some(rig) => {
            let mut p2 = Vec::new();
            let mut g2 = Vec::new();
            for cam in rig.cameras() {
                for (p, g) in pred.iter().zip(gt) {
                    p2.push(Pose2D::project(p, cam)?);
                    g2.push(Pose2D::project(g, cam)?);
                }
            }
            Some(pcp2d(&p2, &g2, skeleton.parts(), alpha)?)
        }
        None => None,
    };
    Ok(EvalReport {
        frames_evaluated: gt.len(),
        mpjpe,
        per_joint_errors,
        pcp3d,
        pcp2d,
    })
}
