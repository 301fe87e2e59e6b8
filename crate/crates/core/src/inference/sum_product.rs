//! Exact marginals of the tree-structured posterior by two-pass sum-product.
//!
//! Messages live in the log domain. Before a message crosses an edge the
//! sender's belief is shifted by its maximum and exponentiated, aggregated
//! over the limb shell in the linear domain, and taken back to logs. Voxels
//! with no in-grid shell partner receive `-inf`.

use nalgebra::{Matrix3, Vector3};

use super::shell::{shell_aggregate, ShellKernel};
use super::unary::UnaryField;
use crate::error::{Error, Result};
use crate::geometry::VolumeGrid;
use crate::skeleton::Skeleton;

/// Posterior marginal of one joint over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMarginal {
    pub joint: usize,
    pub probabilities: Vec<f64>,
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub cov_det: f64,
}

impl JointMarginal {
    pub fn peak_probability(&self) -> f64 {
        self.probabilities.iter().cloned().fold(0.0, f64::max)
    }
}

/// Mean, covariance and covariance determinant of a distribution over voxel centers.
pub fn marginal_moments(probabilities: &[f64], grid: &VolumeGrid) -> Result<(Vector3<f64>, Matrix3<f64>, f64)> {
    if probabilities.len() != grid.voxel_count() {
        return Err(Error::InvalidInput(format!(
            "{} probabilities for {} voxels",
            probabilities.len(),
            grid.voxel_count()
        )));
    }
    if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidInput("probabilities must be finite and non-negative".into()));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
    }
    let mut mean = Vector3::zeros();
    for (l, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            mean += grid.center_of(grid.unravel(l)) * p;
        }
    }
    let mut cov = Matrix3::zeros();
    for (l, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            let d = grid.center_of(grid.unravel(l)) - mean;
            cov += d * d.transpose() * p;
        }
    }
    cov = (cov + cov.transpose()) * 0.5;
    // Roundoff can push the determinant of a singular covariance below zero.
    let det = cov.determinant().max(0.0);
    Ok((mean, cov, det))
}

/// Sum-product rooted at the skeleton's hub joint.
pub fn sum_product(skeleton: &Skeleton, unaries: &[UnaryField], kernels: &[ShellKernel]) -> Result<Vec<JointMarginal>> {
    sum_product_rooted(skeleton, unaries, kernels, skeleton.hub_joint())
}

/// Sum-product with an explicit root for the two-pass schedule.
///
/// `kernels[k]` must be the shell of `skeleton.edges()[k]`.
pub fn sum_product_rooted(
    skeleton: &Skeleton,
    unaries: &[UnaryField],
    kernels: &[ShellKernel],
    root: usize,
) -> Result<Vec<JointMarginal>> {
    let n = skeleton.num_joints();
    if unaries.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} unary fields for a {n}-joint skeleton",
            unaries.len()
        )));
    }
    if kernels.len() != skeleton.edges().len() {
        return Err(Error::InvalidInput(format!(
            "{} shell kernels for {} edges",
            kernels.len(),
            skeleton.edges().len()
        )));
    }
    if root >= n {
        return Err(Error::InvalidInput(format!("root {root} out of range")));
    }
    let grid = &unaries[0].grid;
    let voxels = grid.voxel_count();
    for (j, u) in unaries.iter().enumerate() {
        if u.joint != j || u.log_values.len() != voxels || &u.grid != grid {
            return Err(Error::InvalidInput(format!("unary field {j} does not match joint or grid")));
        }
    }
    for (k, kernel) in kernels.iter().enumerate() {
        let (i, j) = skeleton.edges()[k];
        if kernel.edge != (i, j) && kernel.edge != (j, i) {
            return Err(Error::InvalidInput(format!("kernel {k} is not for edge ({i}, {j})")));
        }
    }

    let g = grid.resolution();
    let tree = skeleton.traversal(root);
    let degenerate = |joint: usize| Error::DegeneratePosterior {
        joint,
        name: skeleton.joint_names()[joint].clone(),
    };

    // up[k]: message from the child end of edge k to its parent (parent's voxels).
    // down[k]: message from the parent end of edge k to its child.
    let mut up: Vec<Option<Vec<f64>>> = vec![None; kernels.len()];
    let mut down: Vec<Option<Vec<f64>>> = vec![None; kernels.len()];

    for &joint in tree.order.iter().rev() {
        let Some((_, edge)) = tree.parent[joint] else {
            continue;
        };
        let mut belief = unaries[joint].log_values.clone();
        for &(_, child_edge) in &tree.children[joint] {
            add_assign(&mut belief, up[child_edge].as_ref().expect("children first"));
        }
        up[edge] = Some(pass_message(&belief, g, &kernels[edge]).ok_or_else(|| degenerate(joint))?);
    }

    for &joint in &tree.order {
        let children = &tree.children[joint];
        if children.is_empty() {
            continue;
        }
        let mut base = unaries[joint].log_values.clone();
        if let Some((_, edge)) = tree.parent[joint] {
            add_assign(&mut base, down[edge].as_ref().expect("parents first"));
        }
        for &(_, edge) in children {
            let mut belief = base.clone();
            for &(_, other) in children {
                if other != edge {
                    add_assign(&mut belief, up[other].as_ref().expect("upward pass done"));
                }
            }
            down[edge] = Some(pass_message(&belief, g, &kernels[edge]).ok_or_else(|| degenerate(joint))?);
        }
    }

    (0..n)
        .map(|joint| {
            let mut belief = unaries[joint].log_values.clone();
            if let Some((_, edge)) = tree.parent[joint] {
                add_assign(&mut belief, down[edge].as_ref().expect("downward pass done"));
            }
            for &(_, edge) in &tree.children[joint] {
                add_assign(&mut belief, up[edge].as_ref().expect("upward pass done"));
            }
            let probabilities = normalize_log(&belief).ok_or_else(|| degenerate(joint))?;
            let (mean, covariance, cov_det) = marginal_moments(&probabilities, grid)?;
            Ok(JointMarginal {
                joint,
                probabilities,
                mean,
                covariance,
                cov_det,
            })
        })
        .collect()
}

fn add_assign(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += *b;
    }
}

/// Sends a log-domain belief through a shell. `None` when the belief has no mass.
fn pass_message(log_belief: &[f64], resolution: usize, kernel: &ShellKernel) -> Option<Vec<f64>> {
    let max = log_belief.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let linear: Vec<f64> = log_belief.iter().map(|v| (v - max).exp()).collect();
    let mut msg = shell_aggregate(&linear, resolution, kernel);
    for m in msg.iter_mut() {
        *m = if *m > 0.0 { m.ln() + max } else { f64::NEG_INFINITY };
    }
    if msg.iter().all(|m| *m == f64::NEG_INFINITY) {
        return None;
    }
    Some(msg)
}

/// `exp(x - logsumexp(x))`, or `None` when every entry is `-inf`.
pub(crate) fn normalize_log(log_values: &[f64]) -> Option<Vec<f64>> {
    let max = log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut p: Vec<f64> = log_values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v /= total;
    }
    Some(p)
}
