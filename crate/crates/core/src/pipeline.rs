//! Sequence-level plumbing shared by front ends: writing synthetic
//! scenarios to disk, loading a frame's views from a manifest, and fusing
//! many frames with bounded parallelism.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::CameraRig;
use crate::heatmaps::{read_heatmaps, write_heatmaps, HeatmapManifest, HeatmapStack, ManifestFrame, ManifestView, SyntheticScenario};
use crate::inference::{fuse_frame, InferenceConfig, PoseEstimate};
use crate::io::write_jsonl;
use crate::records::PoseRecord;
use crate::skeleton::Skeleton;

pub const CALIBRATION_FILE: &str = "calibration.json";
pub const SKELETON_FILE: &str = "skeleton.json";
pub const GROUND_TRUTH_FILE: &str = "gt_poses.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes calibration, skeleton, ground truth, heatmaps and the manifest
/// into `dir`. Heatmaps go to `dir/heatmaps/<frame>_<camera>.hms`.
pub fn write_scenario(scenario: &SyntheticScenario, dir: &Path) -> Result<HeatmapManifest> {
    scenario.validate()?;
    let heat_dir = dir.join("heatmaps");
    std::fs::create_dir_all(&heat_dir).map_err(|e| Error::io(&heat_dir, e))?;
    scenario.rig.save(dir.join(CALIBRATION_FILE))?;
    scenario.skeleton.save(dir.join(SKELETON_FILE))?;
    let gt: Vec<PoseRecord> = scenario
        .true_poses
        .iter()
        .enumerate()
        .map(|(f, p)| PoseRecord::from_pose(scenario.frame_id(f), &scenario.skeleton, p))
        .collect();
    write_jsonl(dir.join(GROUND_TRUTH_FILE), &gt)?;
    let mut frames = Vec::with_capacity(scenario.frames());
    for f in 0..scenario.frames() {
        let mut views = Vec::with_capacity(scenario.rig.len());
        for stack in scenario.render_frame(f)? {
            let rel = PathBuf::from("heatmaps").join(format!("{}_{}.hms", stack.frame_id, stack.camera_id));
            write_heatmaps(&stack, dir.join(&rel))?;
            views.push(ManifestView {
                camera_id: stack.camera_id.clone(),
                path: rel,
            });
        }
        frames.push(ManifestFrame {
            frame_id: scenario.frame_id(f),
            views,
        });
    }
    let manifest = HeatmapManifest { frames };
    manifest.save(dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Reads one frame's heatmaps in rig camera order.
pub fn load_frame(frame: &ManifestFrame, base: &Path, rig: &CameraRig) -> Result<Vec<HeatmapStack>> {
    rig.cameras()
        .iter()
        .map(|cam| {
            let ctx = || format!("frame `{}`, camera `{}`", frame.frame_id, cam.id());
            let view = frame
                .views
                .iter()
                .find(|v| v.camera_id == cam.id())
                .ok_or_else(|| Error::InvalidInput("no heatmap listed in the manifest".into()).context(ctx()))?;
            let stack = read_heatmaps(base.join(&view.path)).map_err(|e| e.context(ctx()))?;
            if stack.camera_id != cam.id() || stack.frame_id != frame.frame_id {
                return Err(Error::InvalidInput(format!(
                    "file is labelled ({}, {})",
                    stack.frame_id, stack.camera_id
                ))
                .context(ctx()));
            }
            Ok(stack)
        })
        .collect()
}

/// Runs `per_frame` over every manifest frame on at most `width` threads.
/// Results come back in manifest order whatever the completion order.
pub fn fuse_sequence<T, F>(
    rig: &CameraRig,
    skeleton: &Skeleton,
    manifest: &HeatmapManifest,
    base: &Path,
    config: &InferenceConfig,
    width: usize,
    per_frame: F,
) -> Result<Vec<(String, Result<T>)>>
where
    T: Send,
    F: Fn(&str, PoseEstimate) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(width.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        manifest
            .frames
            .par_iter()
            .map(|frame| {
                let result = load_frame(frame, base, rig)
                    .and_then(|stacks| fuse_frame(rig, &stacks, skeleton, config))
                    .and_then(|est| per_frame(&frame.frame_id, est))
                    .map_err(|e| match e {
                        e @ Error::Context { .. } => e,
                        e => e.context(format!("frame `{}`", frame.frame_id)),
                    });
                (frame.frame_id.clone(), result)
            })
            .collect()
    }))
}
