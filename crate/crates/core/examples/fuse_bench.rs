//! Times single-frame fusion at full resolution.
//!
//! cargo run --release -p mvpose --example fuse_bench -- [resolution] [frames]

use std::time::Instant;

use mvpose::geometry::{CameraRig, VolumeSettings};
use mvpose::heatmaps::{random_pose, SyntheticScenario};
use mvpose::inference::{fuse_frame, InferenceConfig};
use mvpose::skeleton::Skeleton;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mvpose::Result<()> {
    let mut args = std::env::args().skip(1);
    let resolution: usize = args.next().map_or(64, |a| a.parse().expect("resolution"));
    let frames: usize = args.next().map_or(3, |a| a.parse().expect("frame count"));

    let skeleton = Skeleton::body14();
    let rig = CameraRig::ring(3, 4500.0, 1000.0, Vector3::zeros(), 300.0, 256, 256)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let poses = (0..frames).map(|_| random_pose(&skeleton, &mut rng)).collect();
    let scenario = SyntheticScenario::new(rig, skeleton, poses, 0);
    let config = InferenceConfig {
        volume: VolumeSettings {
            resolution,
            ..Default::default()
        },
        ..Default::default()
    };

    println!(
        "grid {resolution}^3, {} joints, {} edges, {} views, {} threads",
        scenario.skeleton.num_joints(),
        scenario.skeleton.edges().len(),
        scenario.rig.len(),
        rayon::current_num_threads()
    );
    let mut worst: f64 = 0.0;
    for frame in 0..frames {
        let stacks = scenario.render_frame(frame)?;
        let start = Instant::now();
        let est = fuse_frame(&scenario.rig, &stacks, &scenario.skeleton, &config)?;
        let secs = start.elapsed().as_secs_f64();
        worst = worst.max(secs);
        let err: f64 = est
            .pose
            .positions
            .iter()
            .zip(&scenario.true_poses[frame].positions)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>()
            / est.pose.len() as f64;
        println!("frame {frame}: {secs:.2} s, mean joint error {err:.1} mm");
    }
    println!("slowest frame: {worst:.2} s");
    Ok(())
}
