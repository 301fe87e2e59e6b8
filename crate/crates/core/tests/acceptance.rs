//! Acceptance suite. Run with
//! `cargo test --release -p mvpose --test acceptance`.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::*;
use mvpose::annotate::export_training_set;
use mvpose::geometry::{CameraRig, VolumeGrid, VolumeSettings};
use mvpose::heatmaps::{read_heatmaps, write_heatmaps, Corruption, HeatmapManifest, HeatmapStack, Occlusion};
use mvpose::inference::{
    build_shell_kernel_with, fuse_frame, shell_aggregate, sum_product_rooted, triangulation_baseline, InferenceConfig,
    PoseEstimate, DEFAULT_FLOOR,
};
use mvpose::io::{read_jsonl, write_json, write_jsonl};
use mvpose::metrics::{evaluate, l2_coordinate_loss, mpjpe, pcp2d, pcp3d, Pose2D};
use mvpose::pipeline::{fuse_sequence, write_scenario, CALIBRATION_FILE, GROUND_TRUTH_FILE, MANIFEST_FILE};
use mvpose::records::PoseRecord;
use mvpose::selection::{candidates_from_estimate, confidence_rank_audit, ConfidenceScore, SelectionDocument};
use mvpose::skeleton::{Part, Pose3D, Skeleton, Tolerance};
use nalgebra::{Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn config(resolution: usize) -> InferenceConfig {
    InferenceConfig {
        volume: VolumeSettings {
            resolution,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// Largest `|Σp − 1|` over all marginals of an estimate.
fn normalization_gap(est: &PoseEstimate) -> f64 {
    est.marginals
        .iter()
        .map(|m| (m.probabilities.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

#[derive(Default)]
struct Shared {
    /// Worst normalization gap over every marginal computed by the suite.
    worst_gap: f64,
    marginals_checked: usize,
}

impl Shared {
    fn record(&mut self, est: &PoseEstimate) {
        self.worst_gap = self.worst_gap.max(normalization_gap(est));
        self.marginals_checked += est.marginals.len();
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let shapes = [(2usize, 8usize), (3, 6), (4, 4)];
    let mut instances = 0;
    for round in 0..7 {
        for &(n, res) in &shapes {
            let pitch = Vector3::new(rng.gen_range(80.0..120.0), rng.gen_range(80.0..120.0), rng.gen_range(80.0..120.0));
            let grid = VolumeGrid::new(Vector3::new(0.0, 0.0, 900.0), pitch * res as f64, res).unwrap();
            let sk = random_tree(n, pitch.max(), &mut rng);
            let sk = if round % 2 == 0 { sk.with_tolerance(Tolerance::VoxelPitch).unwrap() } else { sk };
            let tol = sk.tolerance().resolve(&grid);
            let unaries = random_unaries(n, &grid, &mut rng);
            let kernels: Vec<_> = sk
                .edges()
                .iter()
                .map(|&e| build_shell_kernel_with(&sk, e, &grid, tol).unwrap())
                .collect();
            let root = rng.gen_range(0..n);
            let got = sum_product_rooted(&sk, &unaries, &kernels, root).unwrap();
            let exact = brute_force_marginals(&sk, &unaries, &grid, tol);
            for (m, e) in got.iter().zip(&exact) {
                worst = worst.max(max_rel_diff(&m.probabilities, e));
            }
            instances += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        instances >= 20 && worst <= 1e-9 && elapsed < Duration::from_secs(60),
        format!("{instances} instances, max relative difference {worst:.2e} (limit 1e-9), {:.1} s (limit 60 s)", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for k in 0..10 {
        let res = 8;
        let pitch = Vector3::new(rng.gen_range(60.0..140.0), rng.gen_range(60.0..140.0), rng.gen_range(60.0..140.0));
        let grid = VolumeGrid::new(Vector3::zeros(), pitch * res as f64, res).unwrap();
        let length = rng.gen_range(1.0..5.0) * pitch.mean();
        let tol = if k % 2 == 0 { pitch.max() } else { rng.gen_range(0.2..1.0) * pitch.max() };
        let sk = Skeleton::new(vec!["a".into(), "b".into()], vec![(0, 1)], vec![length], Tolerance::Millimeters(tol), vec![]).unwrap();
        let kernel = build_shell_kernel_with(&sk, (0, 1), &grid, tol).unwrap();
        let v = grid.voxel_count();
        let mu: Vec<f64> = (0..v)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0) })
            .collect();
        let sparse = shell_aggregate(&mu, res, &kernel);
        let centers = grid.centers();
        for a in 0..v {
            let dense: f64 = (0..v)
                .map(|b| sk.pairwise_compatibility((0, 1), (centers[a] - centers[b]).norm(), tol).unwrap() * mu[b])
                .sum();
            let d = (sparse[a] - dense).abs() / dense.abs().max(1.0);
            worst = worst.max(d);
        }
    }
    check(worst <= 1e-12, format!("10 edges on 8^3 grids, max difference {worst:.2e} (limit 1e-12)"))
}

fn fused_mpjpe(s: &mvpose::heatmaps::SyntheticScenario, resolution: usize, shared: &mut Shared) -> (f64, Duration) {
    let mut preds = Vec::new();
    let mut worst = Duration::ZERO;
    for f in 0..s.frames() {
        let stacks = s.render_frame(f).unwrap();
        let t = Instant::now();
        let est = fuse_frame(&s.rig, &stacks, &s.skeleton, &config(resolution)).unwrap();
        worst = worst.max(t.elapsed());
        shared.record(&est);
        preds.push(est.pose);
    }
    (mpjpe(&preds, &s.true_poses).unwrap(), worst)
}

fn criterion_3(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let s = scenario(20, 7);
    let (e64, _) = fused_mpjpe(&s, 64, shared);
    let (e32, _) = fused_mpjpe(&s, 32, shared);
    let elapsed = start.elapsed();
    let (b64, b32) = (2.0 * 2000.0 / 64.0, 2.0 * 2000.0 / 32.0);
    check(
        e64 <= b64 && e32 <= b32 && elapsed < Duration::from_secs(300),
        format!(
            "MPJPE {e64:.2} mm at G=64 (limit {b64}), {e32:.2} mm at G=32 (limit {b32}), {:.0} s (limit 300 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4(shared: &mut Shared) -> Outcome {
    let mut wins = 0;
    let mut details = Vec::new();
    for trial in 0..20u64 {
        let mut s = scenario(1, 1000 + trial);
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + trial);
        let camera = rng.gen_range(0..s.rig.len());
        let n = s.skeleton.num_joints();
        let count = (0.3 * n as f64).ceil() as usize;
        let mut joints: Vec<usize> = (0..n).collect();
        joints.shuffle(&mut rng);
        for &joint in &joints[..count] {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let mag = rng.gen_range(20.0..40.0);
            s.corruptions.push(Corruption {
                frame: 0,
                camera,
                joint,
                offset: Vector2::new(angle.cos(), angle.sin()) * mag,
            });
        }
        let stacks = s.render_frame(0).unwrap();
        let est = fuse_frame(&s.rig, &stacks, &s.skeleton, &config(64)).unwrap();
        shared.record(&est);
        let base = triangulation_baseline(&s.rig, &stacks, &s.skeleton, DEFAULT_FLOOR).unwrap();
        let e_ps = mpjpe(&[est.pose], &s.true_poses).unwrap();
        let e_base = mpjpe(&[base], &s.true_poses).unwrap();
        if e_ps < e_base {
            wins += 1;
        }
        details.push((e_ps, e_base));
    }
    let mean_ps = details.iter().map(|d| d.0).sum::<f64>() / 20.0;
    let mean_base = details.iter().map(|d| d.1).sum::<f64>() / 20.0;
    check(
        wins >= 18,
        format!("fusion beats triangulation in {wins}/20 trials (need 18); mean MPJPE {mean_ps:.1} vs {mean_base:.1} mm"),
    )
}

fn criterion_5(shared: &mut Shared) -> Outcome {
    let frames = 20;
    let mut s = scenario(frames, 55);
    let mut rng = ChaCha8Rng::seed_from_u64(56);
    let n = s.skeleton.num_joints();
    let per_joint = frames / 10;
    let mut hidden = BTreeSet::new();
    for joint in 0..n {
        let mut fs: Vec<usize> = (0..frames).collect();
        fs.shuffle(&mut rng);
        for &frame in &fs[..per_joint] {
            let mut cams: Vec<usize> = (0..s.rig.len()).collect();
            cams.shuffle(&mut rng);
            for &camera in &cams[..2] {
                s.occlusions.push(Occlusion { frame, camera, joint });
            }
            hidden.insert((s.frame_id(frame), joint));
        }
    }
    let mut candidates = Vec::new();
    for f in 0..frames {
        let stacks = s.render_frame(f).unwrap();
        let est = fuse_frame(&s.rig, &stacks, &s.skeleton, &config(64)).unwrap();
        shared.record(&est);
        candidates.extend(candidates_from_estimate(&s.frame_id(f), &est, &s.rig).unwrap());
    }
    let recall = confidence_rank_audit(&candidates, &hidden, 0.7).unwrap().unwrap();
    check(
        recall >= 0.8,
        format!("{} of {} pairs occluded in 2 of 3 views, recall {recall:.3} at fraction 0.7 (need 0.8)", hidden.len(), frames * n),
    )
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

/// Synthesis, fusion, selection, export and evaluation into `dir`.
fn end_to_end(dir: &Path, shared: &mut Shared) -> mvpose::Result<()> {
    let mut s = scenario(4, 31);
    s.noise = 0.05;
    s.occlusions.push(Occlusion { frame: 1, camera: 0, joint: 4 });
    write_scenario(&s, dir)?;
    let rig = CameraRig::load(dir.join(CALIBRATION_FILE))?;
    let sk = Skeleton::load(dir.join(mvpose::pipeline::SKELETON_FILE))?;
    let (manifest, base) = HeatmapManifest::load(dir.join(MANIFEST_FILE))?;
    let gaps = std::sync::Mutex::new(Vec::new());
    let fused = fuse_sequence(&rig, &sk, &manifest, &base, &config(32), 2, |frame, est| {
        gaps.lock().unwrap().push(normalization_gap(&est));
        Ok((PoseRecord::from_estimate(frame, &sk, &est), candidates_from_estimate(frame, &est, &rig)?))
    })?;
    for g in gaps.into_inner().unwrap() {
        shared.worst_gap = shared.worst_gap.max(g);
        shared.marginals_checked += sk.num_joints();
    }
    let mut records = Vec::new();
    let mut candidates = Vec::new();
    for (_, r) in fused {
        let (rec, cands) = r?;
        records.push(rec);
        candidates.extend(cands);
    }
    write_jsonl(dir.join("poses.jsonl"), &records)?;
    let doc = SelectionDocument::build(&candidates, 0.7, ConfidenceScore::CovDet, &sk)?;
    write_json(dir.join("selection.json"), &doc)?;
    let set = doc.annotation_set(&sk)?;
    export_training_set(&set, &rig, &sk, &doc.frame_ids(), sk.default_root(), 1.0, Some((64, 64)), &dir.join("training"))?;
    let gt: Vec<PoseRecord> = read_jsonl(dir.join(GROUND_TRUTH_FILE))?;
    let gt: Vec<Pose3D> = gt.iter().map(|r| r.to_pose(&sk)).collect::<mvpose::Result<_>>()?;
    let pred: Vec<Pose3D> = records.iter().map(|r| r.to_pose(&sk)).collect::<mvpose::Result<_>>()?;
    write_json(dir.join("report.json"), &evaluate(&pred, &gt, &sk, 0.5, Some(&rig))?)?;
    Ok(())
}

fn criterion_6(shared: &mut Shared) -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    end_to_end(a.path(), shared).map_err(|e| e.to_string())?;
    end_to_end(b.path(), shared).map_err(|e| e.to_string())?;
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    let identical = fa == fb
        && fa
            .iter()
            .all(|f| std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap());
    check(
        identical && shared.worst_gap <= 1e-9,
        format!(
            "{} output files byte-identical: {identical}; worst |sum - 1| {:.2e} over {} marginals (limit 1e-9)",
            fa.len(),
            shared.worst_gap,
            shared.marginals_checked
        ),
    )
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut stacks_ok = true;
    for k in 0..25 {
        let (j, h, w) = (rng.gen_range(1..6), rng.gen_range(1..40), rng.gen_range(1..40));
        let values: Vec<f32> = (0..j * h * w)
            .map(|_| match rng.gen_range(0..4) {
                0 => f32::from_bits(rng.gen_range(1..0x0080_0000)),
                1 => -rng.gen::<f32>() * 1e30,
                _ => rng.gen::<f32>(),
            })
            .collect();
        let stack = HeatmapStack::new(j, h, w, values, format!("cam{k}"), format!("frame-é-{k}")).unwrap();
        let path = dir.path().join(format!("{k}.hms"));
        write_heatmaps(&stack, &path).unwrap();
        let back = read_heatmaps(&path).unwrap();
        let bits = |s: &HeatmapStack| s.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        stacks_ok &= bits(&back) == bits(&stack) && back == stack;
    }
    let rig = CameraRig::ring(4, 3700.0, 800.0, Vector3::new(10.0, -30.0, 500.0), 431.7, 640, 480).unwrap();
    rig.save(dir.path().join("cal.json")).unwrap();
    let rig_ok = CameraRig::load(dir.path().join("cal.json")).unwrap() == rig;
    let mut doc = rig.to_document();
    doc.cameras[1].rotation[0] = 0.5;
    write_json(dir.path().join("bad_cal.json"), &doc).unwrap();
    let bad_rig_rejected = CameraRig::load(dir.path().join("bad_cal.json")).is_err();
    let sk = Skeleton::body15().with_tolerance(Tolerance::Millimeters(12.5)).unwrap();
    sk.save(dir.path().join("sk.json")).unwrap();
    let sk_ok = Skeleton::load(dir.path().join("sk.json")).unwrap() == sk;
    let mut sdoc = sk.to_document();
    sdoc.edges[0].from = sdoc.edges[0].to.clone();
    write_json(dir.path().join("bad_sk.json"), &sdoc).unwrap();
    let bad_sk_rejected = Skeleton::load(dir.path().join("bad_sk.json")).is_err();
    check(
        stacks_ok && rig_ok && bad_rig_rejected && sk_ok && bad_sk_rejected,
        format!(
            "25 heatmap stacks bit-exact: {stacks_ok}; calibration {rig_ok}, invalid rejected {bad_rig_rejected}; skeleton {sk_ok}, invalid rejected {bad_sk_rejected}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut examples = 0;
    let mut expect = |name: &str, got: f64, want: f64| {
        examples += 1;
        if got != want {
            failures.push(format!("{name}: {got} != {want}"));
        }
    };
    let gt = Pose3D::complete(vec![Vector3::zeros(), Vector3::new(0.0, 0.0, 300.0), Vector3::new(0.0, 0.0, 500.0)]);
    let shift = |p: &Pose3D, v: Vector3<f64>| Pose3D::complete(p.positions.iter().map(|x| x + v).collect());
    expect("mpjpe identical", mpjpe(std::slice::from_ref(&gt), std::slice::from_ref(&gt)).unwrap(), 0.0);
    expect("mpjpe 3-4-5", mpjpe(&[shift(&gt, Vector3::new(30.0, 40.0, 0.0))], std::slice::from_ref(&gt)).unwrap(), 50.0);
    expect(
        "mpjpe mean of frames",
        mpjpe(&[shift(&gt, Vector3::new(10.0, 0.0, 0.0)), shift(&gt, Vector3::new(0.0, 0.0, 30.0))], &[gt.clone(), gt.clone()]).unwrap(),
        20.0,
    );
    let parts = vec![Part { name: "upper".into(), joints: (0, 1) }, Part { name: "lower".into(), joints: (1, 2) }];
    let upper = |p: &Pose3D, alpha: f64| pcp3d(std::slice::from_ref(p), std::slice::from_ref(&gt), &parts, alpha).unwrap().parts["upper"].unwrap();
    expect("pcp3d identical", pcp3d(std::slice::from_ref(&gt), std::slice::from_ref(&gt), &parts, 0.5).unwrap().average.unwrap(), 100.0);
    let mut edge = gt.clone();
    edge.positions[0].x += 150.0;
    expect("pcp3d boundary inclusive", upper(&edge, 0.5), 100.0);
    let mut far = gt.clone();
    far.positions[0].x += 300.0;
    expect("pcp3d twice alpha", upper(&far, 0.5), 0.0);
    let p2 = vec![Part { name: "p".into(), joints: (0, 1) }];
    let g2 = Pose2D::complete(vec![Vector2::new(0.0, 0.0), Vector2::new(10.0, 0.0)]);
    let off = Pose2D::complete(vec![Vector2::new(500.0, 0.0), Vector2::new(510.0, 0.0)]);
    let pcp2 = |p: &[Pose2D], g: &[Pose2D]| pcp2d(p, g, &p2, 0.5).unwrap().parts["p"].unwrap();
    expect("pcp2d identical", pcp2(std::slice::from_ref(&g2), std::slice::from_ref(&g2)), 100.0);
    expect("pcp2d all wrong", pcp2(std::slice::from_ref(&off), std::slice::from_ref(&g2)), 0.0);
    expect("pcp2d half", pcp2(&[g2.clone(), off], &[g2.clone(), g2.clone()]), 50.0);
    expect("l2 identical", l2_coordinate_loss(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    expect("l2 one joint", l2_coordinate_loss(&[1.0, 2.0, 2.0], &[0.0; 3]).unwrap(), 9.0);
    expect("l2 two joints", l2_coordinate_loss(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], &[0.0; 6]).unwrap(), 2.0);

    // monotonicity on noisy predictions of a synthetic sequence
    let s = scenario(30, 17);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let preds: Vec<Pose3D> = s
        .true_poses
        .iter()
        .map(|p| Pose3D::complete(p.positions.iter().map(|x| x + Vector3::from_fn(|_, _| rng.gen_range(-120.0..120.0))).collect()))
        .collect();
    let tables: Vec<_> = [0.3, 0.5, 0.7]
        .iter()
        .map(|&a| pcp3d(&preds, &s.true_poses, s.skeleton.parts(), a).unwrap())
        .collect();
    let monotone = tables.windows(2).all(|w| {
        w[0].parts
            .iter()
            .all(|(k, v)| v.unwrap_or(0.0) <= w[1].parts[k].unwrap_or(0.0))
            && w[0].average <= w[1].average
    });
    let examples = examples;
    let averages: Vec<String> = tables.iter().map(|t| format!("{:.1}", t.average.unwrap())).collect();
    check(
        failures.is_empty() && monotone,
        format!(
            "{examples} examples exact{}; PCP averages at alpha 0.3/0.5/0.7 = {} (monotone: {monotone})",
            if failures.is_empty() { String::new() } else { format!(" FAILED {failures:?}") },
            averages.join("/")
        ),
    )
}

fn criterion_9() -> Outcome {
    let s = scenario(3, 90);
    let mut worst = Duration::ZERO;
    for f in 0..s.frames() {
        let stacks = s.render_frame(f).unwrap();
        let t = Instant::now();
        let est = fuse_frame(&s.rig, &stacks, &s.skeleton, &config(64)).unwrap();
        worst = worst.max(t.elapsed());
        assert_eq!(est.grid.resolution(), 64);
    }
    let threads = rayon::current_num_threads();
    check(
        worst <= Duration::from_secs(10),
        format!(
            "slowest of 3 frames {:.2} s at G=64, 14 joints, 13 edges, 3 views (limit 10 s) on {threads} thread(s)",
            worst.as_secs_f64()
        ),
    )
}

fn main() {
    let mut shared = Shared::default();
    let mut all_pass = true;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n} ({name}): PASS  {d}  [{secs:.1} s]"),
            Err(d) => {
                all_pass = false;
                println!("criterion {n} ({name}): FAIL  {d}  [{secs:.1} s]");
            }
        }
    };
    report(1, "brute-force marginals", &mut criterion_1);
    report(2, "shell-kernel equivalence", &mut criterion_2);
    report(3, "synthetic accuracy", &mut || criterion_3(&mut shared));
    report(4, "robustness ordering", &mut || criterion_4(&mut shared));
    report(5, "selection audit", &mut || criterion_5(&mut shared));
    report(6, "normalization and determinism", &mut || criterion_6(&mut shared));
    report(7, "format round-trips", &mut criterion_7);
    report(8, "metric sanity", &mut criterion_8);
    report(9, "performance budget", &mut criterion_9);
    if !all_pass {
        std::process::exit(1);
    }
}
