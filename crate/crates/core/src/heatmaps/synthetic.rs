//! Synthetic scenarios with known ground truth: random poses of a skeleton
//! seen by a calibrated rig, rendered as Gaussian heatmaps with optional
//! noise, occlusions and displaced (corrupted) detections.

use nalgebra::{Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{splat_gaussian, HeatmapStack};
use crate::error::{Error, Result};
use crate::geometry::{CameraRig, Projection};
use crate::skeleton::{Pose3D, Skeleton};

/// A blanked `(frame, camera, joint)` heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occlusion {
    pub frame: usize,
    pub camera: usize,
    pub joint: usize,
}

/// A heatmap whose peak is rendered `offset` pixels away from the true projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corruption {
    pub frame: usize,
    pub camera: usize,
    pub joint: usize,
    pub offset: Vector2<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub rig: CameraRig,
    pub skeleton: Skeleton,
    pub true_poses: Vec<Pose3D>,
    /// Gaussian standard deviation (pixels).
    pub heatmap_sigma: f64,
    /// Amplitude of additive uniform noise in `[0, noise]`.
    pub noise: f64,
    /// Value of blanked rasters and lower clamp of rendered ones.
    pub floor: f32,
    pub occlusions: Vec<Occlusion>,
    pub corruptions: Vec<Corruption>,
    pub seed: u64,
}

impl SyntheticScenario {
    pub fn new(rig: CameraRig, skeleton: Skeleton, true_poses: Vec<Pose3D>, seed: u64) -> Self {
        SyntheticScenario {
            rig,
            skeleton,
            true_poses,
            heatmap_sigma: 2.0,
            noise: 0.0,
            floor: 0.0,
            occlusions: Vec::new(),
            corruptions: Vec::new(),
            seed,
        }
    }

    pub fn frames(&self) -> usize {
        self.true_poses.len()
    }

    pub fn frame_id(&self, frame: usize) -> String {
        format!("frame{frame:05}")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.heatmap_sigma.is_finite() && self.heatmap_sigma > 0.0) {
            return Err(Error::Config(format!("heatmap sigma {} must be positive", self.heatmap_sigma)));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!("noise {} must be non-negative", self.noise)));
        }
        let (frames, cameras, joints) = (self.frames(), self.rig.len(), self.skeleton.num_joints());
        let check = |kind: &str, f: usize, c: usize, j: usize| {
            if f >= frames || c >= cameras || j >= joints {
                Err(Error::Config(format!(
                    "{kind} ({f}, {c}, {j}) out of range for {frames} frames, {cameras} cameras, {joints} joints"
                )))
            } else {
                Ok(())
            }
        };
        for o in &self.occlusions {
            check("occlusion", o.frame, o.camera, o.joint)?;
        }
        for c in &self.corruptions {
            check("corruption", c.frame, c.camera, c.joint)?;
        }
        if let Some(p) = self.true_poses.iter().find(|p| p.len() != joints) {
            return Err(Error::Config(format!("pose with {} joints for a {joints}-joint skeleton", p.len())));
        }
        Ok(())
    }

    /// Renders every view of one frame in rig order.
    pub fn render_frame(&self, frame: usize) -> Result<Vec<HeatmapStack>> {
        (0..self.rig.len()).map(|c| render_synthetic(self, frame, c)).collect()
    }
}

/// Renders the heatmaps of one `(frame, camera)` view.
///
/// Each joint gets a peak-1.0 Gaussian at its projection (shifted by any
/// corruption offset), plus uniform noise drawn from a stream keyed by
/// `(seed, frame, camera)`. Occluded joints and joints behind the camera
/// yield all-floor rasters.
pub fn render_synthetic(scenario: &SyntheticScenario, frame: usize, camera: usize) -> Result<HeatmapStack> {
    scenario.validate()?;
    if frame >= scenario.frames() || camera >= scenario.rig.len() {
        return Err(Error::InvalidInput(format!("no view ({frame}, {camera}) in scenario")));
    }
    let cam = &scenario.rig.cameras()[camera];
    let (w, h) = (cam.width() as usize, cam.height() as usize);
    let joints = scenario.skeleton.num_joints();
    let pose = &scenario.true_poses[frame];
    let mut stack = HeatmapStack::filled(joints, h, w, scenario.floor, cam.id(), scenario.frame_id(frame))?;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(((frame as u64) << 32) | camera as u64);

    for joint in 0..joints {
        let occluded = scenario
            .occlusions
            .iter()
            .any(|o| (o.frame, o.camera, o.joint) == (frame, camera, joint));
        let projection = match pose.get(joint) {
            Some(p) if !occluded => cam.project(p)?,
            _ => Projection::BehindCamera,
        };
        let Projection::Pixel(mut center) = projection else {
            continue;
        };
        for c in &scenario.corruptions {
            if (c.frame, c.camera, c.joint) == (frame, camera, joint) {
                center += c.offset;
            }
        }
        let raster = stack.raster_mut(joint);
        splat_gaussian(raster, w, &center, scenario.heatmap_sigma);
        for v in raster.iter_mut() {
            let noise = if scenario.noise > 0.0 {
                rng.gen_range(0.0..=scenario.noise) as f32
            } else {
                0.0
            };
            *v = (*v + noise).max(scenario.floor);
        }
    }
    Ok(stack)
}

/// Draws plausible random poses of a skeleton by forward kinematics from its
/// hub joint, perturbing a rest direction per limb.
#[derive(Debug, Clone)]
pub struct PoseSampler {
    pub skeleton: Skeleton,
    /// Nominal world position of the hub joint (mm).
    pub anchor: Vector3<f64>,
    /// Uniform jitter of the hub position per axis (mm).
    pub anchor_jitter: f64,
    /// Magnitude of the random bend applied to each rest direction.
    pub bend: f64,
}

impl PoseSampler {
    pub fn new(skeleton: Skeleton) -> Self {
        PoseSampler {
            skeleton,
            anchor: Vector3::new(0.0, 0.0, 400.0),
            anchor_jitter: 150.0,
            bend: 0.6,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Pose3D {
        let sk = &self.skeleton;
        let hub = sk.hub_joint();
        let traversal = sk.traversal(hub);
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), rng.gen_range(0.0..std::f64::consts::TAU));
        let mut positions = vec![Vector3::zeros(); sk.num_joints()];
        let j = self.anchor_jitter;
        positions[hub] = self.anchor
            + Vector3::new(rng.gen_range(-j..=j), rng.gen_range(-j..=j), rng.gen_range(-j..=j));
        for &joint in &traversal.order[1..] {
            let (parent, edge) = traversal.parent[joint].expect("non-root joint has a parent");
            let rest = rest_direction(&sk.joint_names()[joint]).unwrap_or_else(|| unit_ball(rng).normalize());
            let dir = (rest + unit_ball(rng) * self.bend).normalize();
            positions[joint] = positions[parent] + yaw * dir * sk.limb_lengths()[edge];
        }
        Pose3D::complete(positions)
    }
}

/// Random pose of `skeleton` around the default anchor.
pub fn random_pose<R: Rng>(skeleton: &Skeleton, rng: &mut R) -> Pose3D {
    PoseSampler::new(skeleton.clone()).sample(rng)
}

fn unit_ball<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n <= 1.0 && n > 1e-3 {
            return v;
        }
    }
}

fn rest_direction(name: &str) -> Option<Vector3<f64>> {
    let side = if name.starts_with("right") {
        -1.0
    } else if name.starts_with("left") {
        1.0
    } else {
        0.0
    };
    let v = match name.trim_start_matches("right_").trim_start_matches("left_") {
        "head" => Vector3::new(0.0, 0.0, 1.0),
        "shoulder" => Vector3::new(0.0, side, 0.0),
        "hip" => Vector3::new(0.0, 0.2 * side, -1.0),
        "pelvis" => Vector3::new(0.0, 0.0, -1.0),
        "elbow" | "wrist" | "knee" | "ankle" => Vector3::new(0.0, 0.0, -1.0),
        _ => return None,
    };
    Some(v.normalize())
}
