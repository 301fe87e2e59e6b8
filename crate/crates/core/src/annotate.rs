//! Training targets from harvested annotations.
//!
//! Per view, every selected and visible joint gets a peak-normalized Gaussian
//! target heatmap; every other joint gets an all-zero raster and a `false`
//! mask entry, which a trainer reads as "ignore this joint's loss". The 3D
//! target stores pixel `x, y` and depth relative to a root joint.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraRig};
use crate::heatmaps::{splat_gaussian, write_heatmaps, HeatmapStack};
use crate::io::write_json;
use crate::selection::AnnotationSet;
use crate::skeleton::Skeleton;

pub const DEFAULT_TARGET_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetHeatmapConfig {
    pub sigma: f64,
    pub out_height: usize,
    pub out_width: usize,
}

impl TargetHeatmapConfig {
    /// Targets at the camera's full image size with the default sigma.
    pub fn matching(camera: &Camera) -> Self {
        TargetHeatmapConfig {
            sigma: DEFAULT_TARGET_SIGMA,
            out_height: camera.height() as usize,
            out_width: camera.width() as usize,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!("target sigma {} must be positive", self.sigma)));
        }
        if self.out_height == 0 || self.out_width == 0 {
            return Err(Error::Config("target heatmap size must be positive".into()));
        }
        Ok(())
    }
}

/// Maps an image pixel to the output raster. Pixel centers sit on integer
/// coordinates in both, so the scaling pivots on `-0.5`.
fn to_output(pixel: &Vector2<f64>, camera: &Camera, config: &TargetHeatmapConfig) -> Vector2<f64> {
    let sx = config.out_width as f64 / f64::from(camera.width());
    let sy = config.out_height as f64 / f64::from(camera.height());
    Vector2::new((pixel.x + 0.5) * sx - 0.5, (pixel.y + 0.5) * sy - 0.5)
}

/// Renders one view's target heatmaps and ignore mask for `frame_id`.
pub fn render_targets(
    annotations: &AnnotationSet,
    camera: &Camera,
    frame_id: &str,
    num_joints: usize,
    config: &TargetHeatmapConfig,
) -> Result<(HeatmapStack, Vec<bool>)> {
    config.validate()?;
    let (h, w) = (config.out_height, config.out_width);
    let mut stack = HeatmapStack::filled(num_joints, h, w, 0.0, camera.id(), frame_id)?;
    let mut mask = vec![false; num_joints];
    for c in annotations.selected.iter().filter(|c| c.frame_id == frame_id) {
        if c.joint >= num_joints {
            return Err(Error::InvalidInput(format!(
                "annotation for joint {} in a {num_joints}-joint target",
                c.joint
            )));
        }
        let r = c.reprojection(camera.id()).ok_or_else(|| {
            Error::InvalidInput(format!(
                "annotation ({frame_id}, joint {}) has no reprojection for camera `{}`",
                c.joint,
                camera.id()
            ))
        })?;
        let Some(pixel) = r.pixel.filter(|_| r.in_image) else {
            continue;
        };
        let p = to_output(&pixel, camera, config);
        if p.x < 0.0 || p.y < 0.0 || p.x > (w - 1) as f64 || p.y > (h - 1) as f64 {
            continue;
        }
        splat_gaussian(stack.raster_mut(c.joint), w, &p, config.sigma);
        mask[c.joint] = true;
    }
    Ok((stack, mask))
}

/// 3D target of one frame in one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target3D {
    pub frame_id: String,
    pub camera_id: String,
    pub root_joint: usize,
    /// `(x px, y px, depth − root depth mm)`; `None` where masked out.
    pub values: Vec<Option<[f64; 3]>>,
    pub mask: Vec<bool>,
}

impl Target3D {
    /// Flattened `3N` vector, zeros where masked out.
    pub fn to_vector(&self) -> Vec<f64> {
        self.values
            .iter()
            .flat_map(|v| v.unwrap_or([0.0; 3]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFrame {
    pub frame_id: String,
    pub camera_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExportReport {
    pub targets: Vec<Target3D>,
    pub skipped: Vec<SkippedFrame>,
}

/// 3D targets for each of `frames` in one view. Frames whose root joint is
/// not selected (or lies behind the camera) are skipped and reported.
pub fn export_3d_targets(
    annotations: &AnnotationSet,
    camera: &Camera,
    skeleton: &Skeleton,
    root: usize,
    frames: &[String],
) -> Result<ExportReport> {
    let n = skeleton.num_joints();
    if root >= n {
        return Err(Error::Config(format!("root joint {root} outside a {n}-joint skeleton")));
    }
    let mut report = ExportReport::default();
    for frame_id in frames {
        let skip = |reason: String| SkippedFrame {
            frame_id: frame_id.clone(),
            camera_id: camera.id().to_string(),
            reason,
        };
        let Some(root_c) = annotations.get(frame_id, root) else {
            let reason = format!("root joint `{}` not selected", skeleton.joint_names()[root]);
            log::info!("skipping frame {frame_id}: {reason}");
            report.skipped.push(skip(reason));
            continue;
        };
        let root_depth = camera.depth(&root_c.position3d);
        if root_depth <= crate::geometry::MIN_DEPTH_MM {
            let reason = "root joint behind the camera".to_string();
            log::info!("skipping frame {frame_id} in {}: {reason}", camera.id());
            report.skipped.push(skip(reason));
            continue;
        }
        let mut values = vec![None; n];
        for c in annotations.selected.iter().filter(|c| &c.frame_id == frame_id && c.joint < n) {
            let pixel = camera.project(&c.position3d)?.pixel();
            if let Some(p) = pixel {
                values[c.joint] = Some([p.x, p.y, camera.depth(&c.position3d) - root_depth]);
            }
        }
        report.targets.push(Target3D {
            frame_id: frame_id.clone(),
            camera_id: camera.id().to_string(),
            root_joint: root,
            mask: values.iter().map(Option::is_some).collect(),
            values,
        });
    }
    Ok(report)
}

/// One (frame, view) training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    /// Placeholder id for the source image, `"<frame>/<camera>"`.
    pub image_id: String,
    pub frame_id: String,
    pub camera_id: String,
    /// Target heatmap file, relative to the manifest.
    pub target_heatmaps: PathBuf,
    pub mask: Vec<bool>,
    /// `3N` target vector; absent when the frame was skipped for 3D.
    pub target_3d: Option<Vec<f64>>,
    pub target_3d_mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub joints: Vec<String>,
    pub root_joint: String,
    pub sigma: f64,
    pub samples: Vec<TrainingSample>,
    pub skipped_3d: Vec<SkippedFrame>,
}

/// Writes target heatmaps for every (frame, camera) pair under
/// `out_dir/targets/` and the manifest to `out_dir/training_manifest.json`.
///
/// `out_size` is `(height, width)`; each camera's image size when `None`.
#[allow(clippy::too_many_arguments)]
pub fn export_training_set(
    annotations: &AnnotationSet,
    rig: &CameraRig,
    skeleton: &Skeleton,
    frames: &[String],
    root: usize,
    sigma: f64,
    out_size: Option<(usize, usize)>,
    out_dir: &Path,
) -> Result<TrainingManifest> {
    let target_dir = out_dir.join("targets");
    std::fs::create_dir_all(&target_dir).map_err(|e| Error::io(&target_dir, e))?;
    let n = skeleton.num_joints();
    let mut samples = Vec::new();
    let mut skipped_3d = Vec::new();
    for camera in rig.cameras() {
        let mut config = TargetHeatmapConfig::matching(camera);
        config.sigma = sigma;
        if let Some((h, w)) = out_size {
            config.out_height = h;
            config.out_width = w;
        }
        let report = export_3d_targets(annotations, camera, skeleton, root, frames)?;
        let by_frame: BTreeMap<&str, &Target3D> =
            report.targets.iter().map(|t| (t.frame_id.as_str(), t)).collect();
        skipped_3d.extend(report.skipped.iter().cloned());
        for frame_id in frames {
            let (stack, mask) = render_targets(annotations, camera, frame_id, n, &config)?;
            let rel = PathBuf::from("targets").join(format!("{frame_id}_{}.hms", camera.id()));
            write_heatmaps(&stack, out_dir.join(&rel))?;
            let t3 = by_frame.get(frame_id.as_str());
            samples.push(TrainingSample {
                image_id: format!("{frame_id}/{}", camera.id()),
                frame_id: frame_id.clone(),
                camera_id: camera.id().to_string(),
                target_heatmaps: rel,
                mask,
                target_3d: t3.map(|t| t.to_vector()),
                target_3d_mask: t3.map(|t| t.mask.clone()),
            });
        }
    }
    samples.sort_by(|a, b| (&a.frame_id, &a.camera_id).cmp(&(&b.frame_id, &b.camera_id)));
    skipped_3d.sort_by(|a, b| (&a.frame_id, &a.camera_id).cmp(&(&b.frame_id, &b.camera_id)));
    let manifest = TrainingManifest {
        joints: skeleton.joint_names().to_vec(),
        root_joint: skeleton.joint_names()[root].clone(),
        sigma,
        samples,
        skipped_3d,
    };
    write_json(out_dir.join("training_manifest.json"), &manifest)?;
    Ok(manifest)
}
