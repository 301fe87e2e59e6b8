//! Harvesting the reliable part of the fused estimates.
//!
//! Every fused joint becomes an [`AnnotationCandidate`]. For each joint
//! separately, candidates are ranked by a confidence score (the covariance
//! determinant by default, smaller is better) and the top fraction is kept.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraRig, Projection};
use crate::inference::PoseEstimate;
use crate::records::PoseRecord;
use crate::skeleton::Skeleton;

pub const DEFAULT_FRACTION: f64 = 0.7;

/// Guards `ceil` against `0.7 * 10 = 7.000000000000001`.
const COUNT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reprojection {
    pub camera_id: String,
    /// `None` when the point is behind the camera.
    pub pixel: Option<Vector2<f64>>,
    pub in_image: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationCandidate {
    pub frame_id: String,
    pub joint: usize,
    pub position3d: Vector3<f64>,
    pub cov_det: f64,
    pub cov_trace: f64,
    pub peak_probability: f64,
    pub reprojections: Vec<Reprojection>,
}

impl AnnotationCandidate {
    /// Builds a candidate and reprojects it into every camera of `rig`.
    pub fn new(
        frame_id: impl Into<String>,
        joint: usize,
        position3d: Vector3<f64>,
        cov_det: f64,
        cov_trace: f64,
        peak_probability: f64,
        rig: &CameraRig,
    ) -> Result<Self> {
        if cov_det.is_nan() || cov_det < 0.0 {
            return Err(Error::InvalidInput(format!("covariance determinant {cov_det} is negative or NaN")));
        }
        let reprojections = rig
            .cameras()
            .iter()
            .map(|cam| {
                let pixel = match cam.project(&position3d)? {
                    Projection::Pixel(p) => Some(p),
                    Projection::BehindCamera => None,
                };
                Ok(Reprojection {
                    camera_id: cam.id().to_string(),
                    in_image: pixel.is_some_and(|p| cam.in_image(&p)),
                    pixel,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AnnotationCandidate {
            frame_id: frame_id.into(),
            joint,
            position3d,
            cov_det,
            cov_trace,
            peak_probability,
            reprojections,
        })
    }

    pub fn reprojection(&self, camera_id: &str) -> Option<&Reprojection> {
        self.reprojections.iter().find(|r| r.camera_id == camera_id)
    }
}

/// One candidate per joint of a fused frame.
pub fn candidates_from_estimate(
    frame_id: &str,
    estimate: &PoseEstimate,
    rig: &CameraRig,
) -> Result<Vec<AnnotationCandidate>> {
    estimate
        .marginals
        .iter()
        .map(|m| {
            AnnotationCandidate::new(
                frame_id,
                m.joint,
                m.mean,
                m.cov_det,
                m.covariance.trace(),
                m.peak_probability(),
                rig,
            )
        })
        .collect()
}

/// Candidates from a stored pose record. Joints lacking a mean or a
/// covariance determinant are skipped.
pub fn candidates_from_record(
    record: &PoseRecord,
    skeleton: &Skeleton,
    rig: &CameraRig,
) -> Result<Vec<AnnotationCandidate>> {
    let mut out = Vec::new();
    for (joint, rec) in record.joints_by_skeleton(skeleton)?.into_iter().enumerate() {
        let Some(rec) = rec else { continue };
        let (Some(mean), Some(cov_det)) = (rec.mean, rec.cov_det) else {
            continue;
        };
        let trace = rec.covariance_matrix().map_or(f64::NAN, |c| c.trace());
        out.push(AnnotationCandidate::new(
            record.frame_id.clone(),
            joint,
            Vector3::from(mean),
            cov_det,
            trace,
            rec.peak_probability.unwrap_or(f64::NAN),
            rig,
        )?);
    }
    Ok(out)
}

/// Ranking score; smaller is more confident for every variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceScore {
    #[default]
    CovDet,
    CovTrace,
    /// Ranked by the negated peak marginal probability.
    PeakProbability,
}

impl ConfidenceScore {
    pub fn score(self, c: &AnnotationCandidate) -> f64 {
        match self {
            ConfidenceScore::CovDet => c.cov_det,
            ConfidenceScore::CovTrace => c.cov_trace,
            ConfidenceScore::PeakProbability => -c.peak_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub selected: Vec<AnnotationCandidate>,
    pub fraction: f64,
    pub score: ConfidenceScore,
    /// Score of the least confident kept candidate, per joint.
    pub per_joint_thresholds: BTreeMap<usize, f64>,
}

impl AnnotationSet {
    pub fn contains(&self, frame_id: &str, joint: usize) -> bool {
        self.get(frame_id, joint).is_some()
    }

    pub fn get(&self, frame_id: &str, joint: usize) -> Option<&AnnotationCandidate> {
        self.selected.iter().find(|c| c.frame_id == frame_id && c.joint == joint)
    }

    /// Distinct frame ids among the selected candidates, sorted.
    pub fn frame_ids(&self) -> Vec<String> {
        self.selected
            .iter()
            .map(|c| c.frame_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Number of candidates kept out of `count` at `fraction`.
pub fn kept_count(count: usize, fraction: f64) -> usize {
    if count == 0 {
        return 0;
    }
    ((fraction * count as f64 - COUNT_SLACK).ceil() as usize).clamp(1, count)
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("selection fraction {fraction} is outside (0, 1]")))
    }
}

/// Per candidate, whether it is kept. Also returns the per-joint thresholds.
pub fn selection_mask(
    candidates: &[AnnotationCandidate],
    fraction: f64,
    score: ConfidenceScore,
) -> Result<(Vec<bool>, BTreeMap<usize, f64>)> {
    check_fraction(fraction)?;
    let mut by_joint: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, c) in candidates.iter().enumerate() {
        if score.score(c).is_nan() {
            return Err(Error::InvalidInput(format!(
                "candidate ({}, joint {}) has no {score:?} score",
                c.frame_id, c.joint
            )));
        }
        by_joint.entry(c.joint).or_default().push(k);
    }
    let mut keep = vec![false; candidates.len()];
    let mut thresholds = BTreeMap::new();
    for (joint, mut idx) in by_joint {
        idx.sort_by(|&a, &b| {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            score
                .score(ca)
                .total_cmp(&score.score(cb))
                .then_with(|| ca.frame_id.cmp(&cb.frame_id))
                .then_with(|| ca.joint.cmp(&cb.joint))
                .then(Ordering::Equal)
        });
        let n = kept_count(idx.len(), fraction);
        for &k in &idx[..n] {
            keep[k] = true;
        }
        thresholds.insert(joint, score.score(&candidates[idx[n - 1]]));
    }
    Ok((keep, thresholds))
}

/// Keeps the `ceil(fraction · count)` most confident candidates of each joint.
pub fn select_by(candidates: &[AnnotationCandidate], fraction: f64, score: ConfidenceScore) -> Result<AnnotationSet> {
    let (keep, per_joint_thresholds) = selection_mask(candidates, fraction, score)?;
    Ok(AnnotationSet {
        selected: candidates
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(c, _)| c.clone())
            .collect(),
        fraction,
        score,
        per_joint_thresholds,
    })
}

/// [`select_by`] ranked by covariance determinant.
pub fn select(candidates: &[AnnotationCandidate], fraction: f64) -> Result<AnnotationSet> {
    select_by(candidates, fraction, ConfidenceScore::CovDet)
}

/// Fraction of the known-bad `(frame_id, joint)` pairs that selection rejects.
///
/// `None` when no candidate is marked bad.
pub fn confidence_rank_audit(
    candidates: &[AnnotationCandidate],
    corrupted: &BTreeSet<(String, usize)>,
    fraction: f64,
) -> Result<Option<f64>> {
    let (keep, _) = selection_mask(candidates, fraction, ConfidenceScore::CovDet)?;
    let mut bad = 0usize;
    let mut rejected = 0usize;
    for (c, kept) in candidates.iter().zip(keep) {
        if corrupted.contains(&(c.frame_id.clone(), c.joint)) {
            bad += 1;
            rejected += usize::from(!kept);
        }
    }
    Ok((bad > 0).then(|| rejected as f64 / bad as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprojectionRecord {
    pub camera_id: String,
    pub pixel: Option<[f64; 2]>,
    pub in_image: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub frame_id: String,
    pub joint: String,
    pub position: [f64; 3],
    pub cov_det: f64,
    pub cov_trace: f64,
    pub peak_probability: f64,
    pub reprojections: Vec<ReprojectionRecord>,
    pub selected: bool,
    /// The joint's cutoff score.
    pub threshold: f64,
}

/// Selection output: every candidate with its selected flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDocument {
    pub fraction: f64,
    pub score: ConfidenceScore,
    pub candidates: Vec<CandidateRecord>,
}

impl SelectionDocument {
    pub fn build(
        candidates: &[AnnotationCandidate],
        fraction: f64,
        score: ConfidenceScore,
        skeleton: &Skeleton,
    ) -> Result<Self> {
        let (keep, thresholds) = selection_mask(candidates, fraction, score)?;
        let candidates = candidates
            .iter()
            .zip(keep)
            .map(|(c, selected)| {
                let joint = skeleton
                    .joint_names()
                    .get(c.joint)
                    .ok_or_else(|| Error::InvalidInput(format!("joint index {} not in skeleton", c.joint)))?;
                Ok(CandidateRecord {
                    frame_id: c.frame_id.clone(),
                    joint: joint.clone(),
                    position: [c.position3d.x, c.position3d.y, c.position3d.z],
                    cov_det: c.cov_det,
                    cov_trace: c.cov_trace,
                    peak_probability: c.peak_probability,
                    reprojections: c
                        .reprojections
                        .iter()
                        .map(|r| ReprojectionRecord {
                            camera_id: r.camera_id.clone(),
                            pixel: r.pixel.map(|p| [p.x, p.y]),
                            in_image: r.in_image,
                        })
                        .collect(),
                    selected,
                    threshold: thresholds[&c.joint],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SelectionDocument {
            fraction,
            score,
            candidates,
        })
    }

    /// The selected candidates as an [`AnnotationSet`].
    pub fn annotation_set(&self, skeleton: &Skeleton) -> Result<AnnotationSet> {
        let mut selected = Vec::new();
        let mut per_joint_thresholds = BTreeMap::new();
        for r in &self.candidates {
            let joint = skeleton
                .joint_index(&r.joint)
                .ok_or_else(|| Error::InvalidInput(format!("selection names unknown joint `{}`", r.joint)))?;
            per_joint_thresholds.insert(joint, r.threshold);
            if !r.selected {
                continue;
            }
            selected.push(AnnotationCandidate {
                frame_id: r.frame_id.clone(),
                joint,
                position3d: Vector3::from(r.position),
                cov_det: r.cov_det,
                cov_trace: r.cov_trace,
                peak_probability: r.peak_probability,
                reprojections: r
                    .reprojections
                    .iter()
                    .map(|p| Reprojection {
                        camera_id: p.camera_id.clone(),
                        pixel: p.pixel.map(Vector2::from),
                        in_image: p.in_image,
                    })
                    .collect(),
            });
        }
        Ok(AnnotationSet {
            selected,
            fraction: self.fraction,
            score: self.score,
            per_joint_thresholds,
        })
    }

    /// Distinct frame ids in candidate order of first appearance.
    pub fn frame_ids(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.candidates
            .iter()
            .filter(|c| seen.insert(c.frame_id.clone()))
            .map(|c| c.frame_id.clone())
            .collect()
    }
}
