//! The limb-length prior discretized on the voxel grid.
//!
//! For an edge with length `L` and tolerance `ε`, the pairwise term is 1
//! exactly for voxel pairs whose center distance lies in `[L - ε, L + ε]`.
//! On a regular grid that distance depends only on the integer offset
//! between the two voxels, so the term is a fixed set of offsets (a shell)
//! and passing a message through the edge is a sparse correlation with it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::VolumeGrid;
use crate::skeleton::{in_limb_band, Skeleton};

#[derive(Debug, Clone, PartialEq)]
pub struct ShellKernel {
    pub edge: (usize, usize),
    /// Integer voxel offsets inside the band, sorted by `(dx, dy, dz)`.
    pub offsets: Vec<[i32; 3]>,
}

impl ShellKernel {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Enumerates the shell for `edge` with the given tolerance (mm).
pub fn build_shell_kernel_with(
    skeleton: &Skeleton,
    edge: (usize, usize),
    grid: &VolumeGrid,
    tolerance_mm: f64,
) -> Result<ShellKernel> {
    let length = skeleton.limb_length(edge)?;
    let pitch = grid.pitch();
    let radius = ((length + tolerance_mm) / pitch.min()).ceil() as i32;
    let mut offsets = Vec::new();
    for dx in -radius..=radius {
        for dy in -radius..=radius {
            for dz in -radius..=radius {
                let d = nalgebra::Vector3::new(
                    f64::from(dx) * pitch.x,
                    f64::from(dy) * pitch.y,
                    f64::from(dz) * pitch.z,
                )
                .norm();
                if in_limb_band(length, tolerance_mm, d) {
                    offsets.push([dx, dy, dz]);
                }
            }
        }
    }
    if offsets.is_empty() {
        return Err(Error::EmptyShell { i: edge.0, j: edge.1 });
    }
    Ok(ShellKernel { edge, offsets })
}

/// Shell for `edge` using the skeleton's own tolerance.
pub fn build_shell_kernel(skeleton: &Skeleton, edge: (usize, usize), grid: &VolumeGrid) -> Result<ShellKernel> {
    let tol = skeleton.tolerance().resolve(grid);
    build_shell_kernel_with(skeleton, edge, grid, tol)
}

/// A maximal run of shell offsets sharing `(dx, dy)` with consecutive `dz`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Run {
    dx: i64,
    dy: i64,
    dz: i64,
    len: usize,
}

fn runs(offsets: &[[i32; 3]]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for &[dx, dy, dz] in offsets {
        let (dx, dy, dz) = (i64::from(dx), i64::from(dy), i64::from(dz));
        match out.last_mut() {
            Some(r) if r.dx == dx && r.dy == dy && r.dz + r.len as i64 == dz => r.len += 1,
            _ => out.push(Run { dx, dy, dz, len: 1 }),
        }
    }
    out
}

/// Sums of `width` consecutive values along the last axis, for every start
/// position in `[-(width-1), G-1]`, treating values outside the grid as zero.
/// Row `r` occupies `[r·(G+width-1), (r+1)·(G+width-1))`.
fn window_sums(mu: &[f64], g: usize, max_width: usize, needed: &[bool]) -> Vec<Option<Vec<f64>>> {
    let rows = mu.len() / g;
    let mut out: Vec<Option<Vec<f64>>> = vec![None; max_width + 1];
    let mut prev: Vec<f64> = mu.to_vec();
    for w in 1..=max_width {
        let stride = g + w - 1;
        let cur = if w == 1 {
            std::mem::take(&mut prev)
        } else {
            let prev_stride = g + w - 2;
            let mut cur = vec![0.0; rows * stride];
            cur.par_chunks_mut(stride).enumerate().for_each(|(r, row)| {
                let src = &mu[r * g..(r + 1) * g];
                let before = &prev[r * prev_stride..(r + 1) * prev_stride];
                // start s sits at row[s + w - 1]; W_w(s) = W_{w-1}(s) + mu[s + w - 1]
                row[1..].copy_from_slice(before);
                for (s_idx, v) in row.iter_mut().enumerate() {
                    let last = s_idx as i64; // s + w - 1
                    if last < g as i64 {
                        *v += src[last as usize];
                    }
                }
            });
            cur
        };
        if w < max_width {
            prev = cur.clone();
        }
        if needed[w] {
            out[w] = Some(cur);
        }
    }
    out
}

/// `out(v) = Σ_{o ∈ shell} mu(v + o)`, reading zero outside the grid.
///
/// Offsets sharing `(dx, dy)` with consecutive `dz` are folded into a single
/// read of a precomputed window sum, so the cost is `O(G³ · runs)` rather
/// than `O(G³ · |shell|)`. Output slabs along the first axis are computed
/// independently in parallel. All partial sums add non-negative inputs.
pub fn shell_aggregate(mu: &[f64], resolution: usize, kernel: &ShellKernel) -> Vec<f64> {
    let g = resolution;
    let plane = g * g;
    assert_eq!(mu.len(), plane * g, "message length does not match grid");
    let runs = runs(&kernel.offsets);
    let max_width = runs.iter().map(|r| r.len).max().unwrap_or(0);
    let mut needed = vec![false; max_width + 1];
    for r in &runs {
        needed[r.len] = true;
    }
    let windows = window_sums(mu, g, max_width, &needed);
    let gi = g as i64;
    let mut out = vec![0.0; mu.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(a, slab)| {
        for run in &runs {
            let src_a = a as i64 + run.dx;
            if src_a < 0 || src_a >= gi {
                continue;
            }
            let w = run.len as i64;
            let stride = (gi + w - 1) as usize;
            let table = windows[run.len].as_ref().expect("width prepared");
            // output c reads the window starting at s = c + dz, valid for s in [-(w-1), G-1]
            let c_lo = (-(w - 1) - run.dz).max(0);
            let c_hi = (gi - run.dz).min(gi);
            let b_lo = (-run.dy).max(0);
            let b_hi = (gi - run.dy).min(gi);
            if c_lo >= c_hi || b_lo >= b_hi {
                continue;
            }
            let width = (c_hi - c_lo) as usize;
            let col = (c_lo + run.dz + w - 1) as usize;
            for b in b_lo..b_hi {
                let src_row = (src_a * gi + b + run.dy) as usize;
                let src = &table[src_row * stride + col..src_row * stride + col + width];
                let dst_start = b as usize * g + c_lo as usize;
                let dst = &mut slab[dst_start..dst_start + width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += *s;
                }
            }
        }
    });
    out
}
