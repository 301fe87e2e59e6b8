use std::io::Write;
use std::path::Path;
use std::time::Instant;

use mvpose::annotate::export_training_set;
use mvpose::geometry::{CameraRig, VolumeSettings};
use mvpose::heatmaps::{Corruption, HeatmapManifest, Occlusion, PoseSampler, SyntheticScenario};
use mvpose::inference::InferenceConfig;
use mvpose::io::{read_json, read_jsonl, write_json, write_jsonl};
use mvpose::metrics::evaluate;
use mvpose::pipeline::{fuse_sequence, write_scenario};
use mvpose::records::PoseRecord;
use mvpose::selection::{candidates_from_record, ConfidenceScore, SelectionDocument};
use mvpose::skeleton::{Pose3D, Skeleton, Tolerance};
use mvpose::{Error, ErrorClass, Result};
use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;

use crate::{EvalArgs, ExportArgs, FuseArgs, Score, SelectArgs, SynthArgs};

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist", path.display())))
    }
}

fn numbers(text: &str, sep: char, count: usize, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(sep)
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("cannot parse {what} `{text}`")))?;
    if parts.len() != count {
        return Err(Error::Config(format!("{what} `{text}` needs {count} values")));
    }
    Ok(parts)
}

fn index(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("{what} must be a non-negative integer, got {v}")))
    }
}

fn load_skeleton(name: &str) -> Result<Skeleton> {
    match name {
        "body14" => Ok(Skeleton::body14()),
        "body15" => Ok(Skeleton::body15()),
        path => {
            require(Path::new(path))?;
            Skeleton::load(path)
        }
    }
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let skeleton = load_skeleton(&a.skeleton)?;
    let rig = CameraRig::ring(a.cameras, a.radius, a.height, Vector3::zeros(), a.focal, a.image_size, a.image_size)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
    let sampler = PoseSampler::new(skeleton.clone());
    let poses = (0..a.frames).map(|_| sampler.sample(&mut rng)).collect();
    let mut scenario = SyntheticScenario::new(rig, skeleton, poses, a.seed);
    scenario.heatmap_sigma = a.sigma;
    scenario.noise = a.noise;
    for o in &a.occlusions {
        let v = numbers(o, ':', 3, "occlusion")?;
        scenario.occlusions.push(Occlusion {
            frame: index(v[0], "occlusion frame")?,
            camera: index(v[1], "occlusion camera")?,
            joint: index(v[2], "occlusion joint")?,
        });
    }
    for c in &a.corruptions {
        let v = numbers(c, ':', 5, "corruption")?;
        scenario.corruptions.push(Corruption {
            frame: index(v[0], "corruption frame")?,
            camera: index(v[1], "corruption camera")?,
            joint: index(v[2], "corruption joint")?,
            offset: Vector2::new(v[3], v[4]),
        });
    }
    scenario.validate()?;
    let manifest = write_scenario(&scenario, &a.out)?;
    println!(
        "wrote {} frames x {} cameras to {}",
        manifest.frames.len(),
        scenario.rig.len(),
        a.out.display()
    );
    Ok(())
}

pub fn fuse(a: &FuseArgs) -> Result<()> {
    for p in [&a.calibration, &a.skeleton, &a.manifest] {
        require(p)?;
    }
    if a.grid < 4 {
        return Err(Error::Config(format!("grid resolution {} is below 4", a.grid)));
    }
    let rig = CameraRig::load(&a.calibration)?;
    let skeleton = Skeleton::load(&a.skeleton)?;
    let (manifest, base) = HeatmapManifest::load(&a.manifest)?;
    let center = a
        .center
        .as_deref()
        .map(|c| numbers(c, ',', 3, "volume center").map(|v| Vector3::new(v[0], v[1], v[2])))
        .transpose()?;
    let tolerance = match a.epsilon {
        Some(e) if !(e.is_finite() && e >= 0.0) => {
            return Err(Error::Config(format!("epsilon {e} must be non-negative")))
        }
        Some(e) => Some(Tolerance::Millimeters(e)),
        None => None,
    };
    let config = InferenceConfig {
        floor: a.floor,
        tolerance,
        root: None,
        volume: VolumeSettings {
            center,
            side: a.side,
            resolution: a.grid,
        },
    };
    let width = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let start = Instant::now();
    let results = fuse_sequence(&rig, &skeleton, &manifest, &base, &config, width, |frame, est| {
        Ok(PoseRecord::from_estimate(frame, &skeleton, &est))
    })?;
    let mut records = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for (frame, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) if a.skip_bad_frames && e.class() != ErrorClass::Config => {
                log::warn!("skipping frame {frame}: {e}");
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    write_jsonl(&a.out, &records)?;
    println!(
        "fused {} frames ({skipped} skipped) in {:.2} s",
        records.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn select(a: &SelectArgs) -> Result<()> {
    for p in [&a.calibration, &a.skeleton, &a.poses] {
        require(p)?;
    }
    let rig = CameraRig::load(&a.calibration)?;
    let skeleton = Skeleton::load(&a.skeleton)?;
    let records: Vec<PoseRecord> = read_jsonl(&a.poses)?;
    let mut candidates = Vec::new();
    for r in &records {
        candidates.extend(candidates_from_record(r, &skeleton, &rig).map_err(|e| e.context(format!("frame `{}`", r.frame_id)))?);
    }
    let score = match a.score {
        Score::CovDet => ConfidenceScore::CovDet,
        Score::Trace => ConfidenceScore::CovTrace,
        Score::Peak => ConfidenceScore::PeakProbability,
    };
    let doc = SelectionDocument::build(&candidates, a.fraction, score, &skeleton)?;
    write_json(&a.out, &doc)?;
    let kept = doc.candidates.iter().filter(|c| c.selected).count();
    println!("selected {kept} of {} candidates from {} frames", doc.candidates.len(), records.len());
    Ok(())
}

pub fn export(a: &ExportArgs) -> Result<()> {
    for p in [&a.calibration, &a.skeleton, &a.selection] {
        require(p)?;
    }
    let rig = CameraRig::load(&a.calibration)?;
    let skeleton = Skeleton::load(&a.skeleton)?;
    let doc: SelectionDocument = read_json(&a.selection)?;
    let set = doc.annotation_set(&skeleton)?;
    let root = match &a.root {
        Some(name) => skeleton
            .joint_index(name)
            .ok_or_else(|| Error::Config(format!("unknown root joint `{name}`")))?,
        None => skeleton.default_root(),
    };
    let size = a
        .size
        .as_deref()
        .map(|s| {
            let v = numbers(s, 'x', 2, "target size")?;
            Ok::<_, Error>((index(v[0], "target height")?, index(v[1], "target width")?))
        })
        .transpose()?;
    let manifest = export_training_set(&set, &rig, &skeleton, &doc.frame_ids(), root, a.sigma, size, &a.out)?;
    println!(
        "exported {} samples; {} (frame, camera) pairs skipped for 3D targets",
        manifest.samples.len(),
        manifest.skipped_3d.len()
    );
    for s in &manifest.skipped_3d {
        println!("  skipped {} {}: {}", s.frame_id, s.camera_id, s.reason);
    }
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    for p in [&a.skeleton, &a.pred, &a.gt] {
        require(p)?;
    }
    let skeleton = Skeleton::load(&a.skeleton)?;
    let rig = match &a.calibration {
        Some(p) => {
            require(p)?;
            Some(CameraRig::load(p)?)
        }
        None => None,
    };
    let pred: Vec<PoseRecord> = read_jsonl(&a.pred)?;
    let gt: Vec<PoseRecord> = read_jsonl(&a.gt)?;
    // Pair frames by id; frames missing from the prediction count as absent joints.
    let mut pred_poses = Vec::with_capacity(gt.len());
    let mut gt_poses = Vec::with_capacity(gt.len());
    for g in &gt {
        let truth = g.to_pose(&skeleton)?;
        let p = match pred.iter().find(|p| p.frame_id == g.frame_id) {
            Some(p) => p.to_pose(&skeleton)?,
            None => {
                log::warn!("frame {} has no prediction", g.frame_id);
                Pose3D::new(vec![Vector3::zeros(); truth.len()], vec![false; truth.len()])?
            }
        };
        pred_poses.push(p);
        gt_poses.push(truth);
    }
    let report = evaluate(&pred_poses, &gt_poses, &skeleton, a.alpha, rig.as_ref())?;
    match &a.out {
        Some(path) => {
            write_json(path, &report)?;
            println!("mpjpe {:.3} mm over {} frames", report.mpjpe, report.frames_evaluated);
        }
        None => {
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::InvalidInput(format!("cannot serialize report: {e}")))?;
            // a closed pipe (e.g. `| head`) is not an error worth reporting
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
    Ok(())
}
