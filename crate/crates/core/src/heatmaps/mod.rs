//! Per-view joint heatmaps: container, sampling, and the `HMS1` binary format.
//!
//! Layout of an `HMS1` file (all integers little-endian):
//!
//! | bytes            | content                                   |
//! |------------------|-------------------------------------------|
//! | 4                | magic `HMS1`                              |
//! | 4, 4, 4          | `u32` joints `J`, height `H`, width `W`   |
//! | 4·J·H·W          | `f32` values, joint-major then row-major  |
//! | 2 + n            | `u16` length, then UTF-8 camera id        |
//! | 2 + n            | `u16` length, then UTF-8 frame id         |

mod synthetic;

pub use synthetic::{
    random_pose, render_synthetic, Corruption, Occlusion, PoseSampler, SyntheticScenario,
};

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HMS1";

/// `J` rasters of `H × W` values for one camera and frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    joints: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
    pub camera_id: String,
    pub frame_id: String,
}

impl HeatmapStack {
    pub fn new(
        joints: usize,
        height: usize,
        width: usize,
        values: Vec<f32>,
        camera_id: impl Into<String>,
        frame_id: impl Into<String>,
    ) -> Result<Self> {
        if joints == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "heatmap dimensions {joints}x{height}x{width} must be positive"
            )));
        }
        if values.len() != joints * height * width {
            return Err(Error::InvalidInput(format!(
                "{} values for a {joints}x{height}x{width} stack",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let plane = height * width;
            return Err(Error::NonFinite {
                joint: k / plane,
                row: (k % plane) / width,
                col: k % width,
            });
        }
        Ok(HeatmapStack {
            joints,
            height,
            width,
            values,
            camera_id: camera_id.into(),
            frame_id: frame_id.into(),
        })
    }

    /// A stack with every value equal to `value`.
    pub fn filled(
        joints: usize,
        height: usize,
        width: usize,
        value: f32,
        camera_id: impl Into<String>,
        frame_id: impl Into<String>,
    ) -> Result<Self> {
        HeatmapStack::new(
            joints,
            height,
            width,
            vec![value; joints * height * width],
            camera_id,
            frame_id,
        )
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn raster(&self, joint: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.values[joint * plane..(joint + 1) * plane]
    }

    pub fn raster_mut(&mut self, joint: usize) -> &mut [f32] {
        let plane = self.height * self.width;
        &mut self.values[joint * plane..(joint + 1) * plane]
    }

    #[inline]
    pub fn get(&self, joint: usize, row: usize, col: usize) -> f32 {
        self.values[(joint * self.height + row) * self.width + col]
    }

    /// Bilinear sample of one joint's raster at pixel `p = (x, y)`.
    ///
    /// Points outside `[0, W-1] × [0, H-1]` return `floor`.
    pub fn sample(&self, joint: usize, p: &Vector2<f64>, floor: f64) -> Result<f64> {
        if joint >= self.joints {
            return Err(Error::InvalidInput(format!(
                "joint {joint} out of range for {} heatmaps",
                self.joints
            )));
        }
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidInput("cannot sample at a non-finite pixel".into()));
        }
        Ok(self.sample_finite(joint, p.x, p.y, floor))
    }

    #[inline]
    pub(crate) fn sample_finite(&self, joint: usize, x: f64, y: f64, floor: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y) {
            return floor;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let raster = self.raster(joint);
        let at = |r: usize, c: usize| f64::from(raster[r * self.width + c]);
        let top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x1);
        let bottom = (1.0 - fx) * at(y1, x0) + fx * at(y1, x1);
        (1.0 - fy) * top + fy * bottom
    }

    /// Integer pixel `(x, y)` of the largest value of a joint's raster
    /// together with that value. The first maximum in row-major order wins.
    pub fn argmax(&self, joint: usize) -> (usize, usize, f32) {
        let raster = self.raster(joint);
        let mut best = 0;
        for (k, &v) in raster.iter().enumerate() {
            if v > raster[best] {
                best = k;
            }
        }
        (best % self.width, best / self.width, raster[best])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.values.len() + 4 + self.camera_id.len() + self.frame_id.len());
        out.extend_from_slice(MAGIC);
        for dim in [self.joints, self.height, self.width] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for s in [&self.camera_id, &self.frame_id] {
            let bytes = s.as_bytes();
            let len = u16::try_from(bytes.len()).expect("id longer than 65535 bytes");
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(bytes);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let joints = r.u32("header")? as usize;
        let height = r.u32("header")? as usize;
        let width = r.u32("header")? as usize;
        let count = joints
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::InvalidInput("heatmap dimensions overflow".into()))?;
        let payload = r.take(count.checked_mul(4).ok_or(Error::Truncated { what: "values" })?, "values")?;
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let camera_id = r.string("camera id")?;
        let frame_id = r.string("frame id")?;
        HeatmapStack::new(joints, height, width, values, camera_id, frame_id)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(Error::Truncated { what })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self, what: &'static str) -> Result<String> {
        let len = u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes"));
        let raw = self.take(usize::from(len), what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::InvalidInput(format!("{what} is not UTF-8")))
    }
}

pub fn read_heatmaps(path: impl AsRef<Path>) -> Result<HeatmapStack> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    HeatmapStack::from_bytes(&bytes).map_err(|e| e.context(format!("reading {}", path.display())))
}

pub fn write_heatmaps(stack: &HeatmapStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, stack.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes an unnormalized Gaussian with peak 1.0 centered at `center` (pixels)
/// into a `height × width` raster.
pub(crate) fn splat_gaussian(raster: &mut [f32], width: usize, center: &Vector2<f64>, sigma: f64) {
    let denom = 2.0 * sigma * sigma;
    for (k, out) in raster.iter_mut().enumerate() {
        let dx = (k % width) as f64 - center.x;
        let dy = (k / width) as f64 - center.y;
        *out = (-(dx * dx + dy * dy) / denom).exp() as f32;
    }
}

/// One heatmap file of a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub camera_id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub frame_id: String,
    pub views: Vec<ManifestView>,
}

/// Maps each (frame, camera) pair to a heatmap file. Relative paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapManifest {
    pub frames: Vec<ManifestFrame>,
}

impl HeatmapManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let manifest: HeatmapManifest = crate::io::read_json(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_json(path, self)
    }
}
