#![allow(dead_code)]

use mvpose::geometry::{CameraRig, VolumeGrid};
use mvpose::heatmaps::{PoseSampler, SyntheticScenario};
use mvpose::inference::UnaryField;
use mvpose::skeleton::{Skeleton, Tolerance};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn ring_rig() -> CameraRig {
    CameraRig::ring(3, 4500.0, 1000.0, Vector3::zeros(), 300.0, 256, 256).unwrap()
}

pub fn scenario(frames: usize, seed: u64) -> SyntheticScenario {
    let skeleton = Skeleton::body14();
    let sampler = PoseSampler::new(skeleton.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poses = (0..frames).map(|_| sampler.sample(&mut rng)).collect();
    SyntheticScenario::new(ring_rig(), skeleton, poses, seed)
}

/// A random tree on `n` joints (each joint hangs off an earlier one) with
/// limb lengths between 1.2 and 3.2 pitches and a tolerance of half a pitch.
pub fn random_tree(n: usize, pitch: f64, rng: &mut ChaCha8Rng) -> Skeleton {
    let names = (0..n).map(|k| format!("j{k}")).collect();
    let edges: Vec<_> = (1..n).map(|k| (rng.gen_range(0..k), k)).collect();
    let lengths = edges.iter().map(|_| pitch * rng.gen_range(1.2..3.2)).collect();
    Skeleton::new(names, edges, lengths, Tolerance::Millimeters(0.5 * pitch), vec![]).unwrap()
}

pub fn random_unaries(n: usize, grid: &VolumeGrid, rng: &mut ChaCha8Rng) -> Vec<UnaryField> {
    (0..n)
        .map(|joint| UnaryField {
            joint,
            grid: grid.clone(),
            log_values: (0..grid.voxel_count()).map(|_| rng.gen_range(-6.0..0.0)).collect(),
        })
        .collect()
}

/// Exact marginals by enumerating every joint configuration. The limb prior
/// is evaluated pair by pair with `pairwise_compatibility` on voxel-center
/// distances; nothing from the message-passing code is used.
pub fn brute_force_marginals(skeleton: &Skeleton, unaries: &[UnaryField], grid: &VolumeGrid, tol: f64) -> Vec<Vec<f64>> {
    let n = skeleton.num_joints();
    let v = grid.voxel_count();
    let centers = grid.centers();
    let compat: Vec<Vec<f64>> = skeleton
        .edges()
        .iter()
        .map(|&e| {
            let mut m = vec![0.0; v * v];
            for a in 0..v {
                for b in 0..v {
                    m[a * v + b] = skeleton
                        .pairwise_compatibility(e, (centers[a] - centers[b]).norm(), tol)
                        .unwrap();
                }
            }
            m
        })
        .collect();
    let weights: Vec<Vec<f64>> = unaries
        .iter()
        .map(|u| {
            let max = u.log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            u.log_values.iter().map(|l| (l - max).exp()).collect()
        })
        .collect();
    let mut marg = vec![vec![0.0; v]; n];
    let mut config = vec![0usize; n];
    loop {
        let mut w = 1.0;
        for (e, &(i, j)) in skeleton.edges().iter().enumerate() {
            w *= compat[e][config[i] * v + config[j]];
            if w == 0.0 {
                break;
            }
        }
        if w != 0.0 {
            for (j, &c) in config.iter().enumerate() {
                w *= weights[j][c];
            }
            for (j, &c) in config.iter().enumerate() {
                marg[j][c] += w;
            }
        }
        // odometer increment
        let mut k = 0;
        while k < n {
            config[k] += 1;
            if config[k] < v {
                break;
            }
            config[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    for m in &mut marg {
        let z: f64 = m.iter().sum();
        m.iter_mut().for_each(|p| *p /= z);
    }
    marg
}

/// Largest per-voxel relative difference; exact zeros must match exactly.
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            if x == y {
                0.0
            } else {
                (x - y).abs() / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}
