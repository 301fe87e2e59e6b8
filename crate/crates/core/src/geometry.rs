//! Calibrated pinhole cameras, projection, and the voxel volume that hosts
//! inference.
//!
//! World coordinates are millimeters, image coordinates are pixels. A camera
//! maps a world point `X` to the camera frame with `R·X + t` and then to
//! pixels with the intrinsic matrix `K` followed by the perspective divide.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Camera-frame depths at or below this value (mm) count as behind the camera.
pub const MIN_DEPTH_MM: f64 = 1e-6;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Outcome of projecting a world point into an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel(Vector2<f64>),
    BehindCamera,
}

impl Projection {
    pub fn pixel(self) -> Option<Vector2<f64>> {
        match self {
            Projection::Pixel(p) => Some(p),
            Projection::BehindCamera => None,
        }
    }
}

/// A calibrated pinhole camera without lens distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    id: String,
    intrinsics: Matrix3<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    width: u32,
    height: u32,
}

impl Camera {
    pub fn new(
        id: impl Into<String>,
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| Error::InvalidCamera {
            id: id.clone(),
            reason,
        };
        if width == 0 || height == 0 {
            return Err(invalid(format!("image size {width}x{height} must be positive")));
        }
        if intrinsics.iter().chain(rotation.iter()).chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite calibration entry".into()));
        }
        if intrinsics[(0, 0)] <= 0.0 || intrinsics[(1, 1)] <= 0.0 {
            return Err(invalid("focal lengths must be positive".into()));
        }
        if intrinsics[(2, 0)] != 0.0 || intrinsics[(2, 1)] != 0.0 || intrinsics[(2, 2)] != 1.0 {
            return Err(invalid("intrinsics bottom row must be [0, 0, 1]".into()));
        }
        let gram = rotation.transpose() * rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        if off > ORTHONORMAL_TOL {
            return Err(invalid(format!("rotation is not orthonormal (max |RᵀR - I| = {off:e})")));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(invalid(format!("rotation determinant {det} is not +1")));
        }
        Ok(Camera {
            id,
            intrinsics,
            rotation,
            translation,
            width,
            height,
        })
    }

    /// Builds a camera at `position` looking at `target`, with world +z as up.
    ///
    /// The camera frame is x right, y down, z forward.
    pub fn look_at(
        id: impl Into<String>,
        focal: f64,
        width: u32,
        height: u32,
        position: Vector3<f64>,
        target: Vector3<f64>,
    ) -> Result<Self> {
        let forward = (target - position).normalize();
        let mut up = Vector3::z();
        if forward.cross(&up).norm() < 1e-9 {
            up = Vector3::y();
        }
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let intrinsics = Matrix3::new(
            focal,
            0.0,
            f64::from(width) / 2.0,
            0.0,
            focal,
            f64::from(height) / 2.0,
            0.0,
            0.0,
            1.0,
        );
        Camera::new(id, intrinsics, rotation, -(rotation * position), width, height)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera_frame(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// Depth of a world point along the principal axis (mm).
    pub fn depth(&self, point: &Vector3<f64>) -> f64 {
        self.to_camera_frame(point).z
    }

    /// Perspective projection. Rejects non-finite coordinates.
    pub fn project(&self, point: &Vector3<f64>) -> Result<Projection> {
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cannot project non-finite point {:?}",
                point.as_slice()
            )));
        }
        Ok(self.project_finite(point))
    }

    /// Projection for points already known to be finite.
    #[inline]
    pub(crate) fn project_finite(&self, point: &Vector3<f64>) -> Projection {
        let cam = self.to_camera_frame(point);
        if cam.z <= MIN_DEPTH_MM {
            return Projection::BehindCamera;
        }
        let h = self.intrinsics * cam;
        Projection::Pixel(Vector2::new(h.x / h.z, h.y / h.z))
    }

    /// Whether a pixel lies inside `[0, W-1] × [0, H-1]`.
    pub fn in_image(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x <= f64::from(self.width - 1)
            && pixel.y <= f64::from(self.height - 1)
    }

    /// Viewing ray through a pixel: (origin, unit direction) in world space.
    pub fn pixel_ray(&self, pixel: &Vector2<f64>) -> (Vector3<f64>, Vector3<f64>) {
        let k_inv = self
            .intrinsics
            .try_inverse()
            .expect("validated intrinsics are invertible");
        let dir_cam = k_inv * Vector3::new(pixel.x, pixel.y, 1.0);
        let dir = (self.rotation.transpose() * dir_cam).normalize();
        (self.center(), dir)
    }
}

/// An ordered set of at least two cameras with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<Camera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        if cameras.len() < 2 {
            return Err(Error::Config(format!(
                "multi-view fusion needs at least 2 cameras, got {}",
                cameras.len()
            )));
        }
        let mut seen = HashSet::new();
        for cam in &cameras {
            if !seen.insert(cam.id()) {
                return Err(Error::Config(format!("duplicate camera id `{}`", cam.id())));
            }
        }
        Ok(CameraRig { cameras })
    }

    /// `count` cameras evenly spaced on a horizontal circle, all aimed at `target`.
    pub fn ring(
        count: usize,
        radius: f64,
        height: f64,
        target: Vector3<f64>,
        focal: f64,
        width: u32,
        height_px: u32,
    ) -> Result<Self> {
        let cameras = (0..count)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                let position = Vector3::new(radius * angle.cos(), radius * angle.sin(), height);
                Camera::look_at(format!("cam{k}"), focal, width, height_px, position, target)
            })
            .collect::<Result<Vec<_>>>()?;
        CameraRig::new(cameras)
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Camera> {
        self.cameras.iter().find(|c| c.id() == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.cameras.iter().position(|c| c.id() == id)
    }
}

/// Least-squares intersection of viewing rays.
///
/// Minimizes the summed squared perpendicular distance to each ray. Returns
/// `None` with fewer than two rays or when the rays are (near) parallel.
pub fn triangulate_rays(rays: &[(Vector3<f64>, Vector3<f64>)]) -> Option<Vector3<f64>> {
    if rays.len() < 2 {
        return None;
    }
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for (origin, dir) in rays {
        let d = dir.normalize();
        let proj = Matrix3::identity() - d * d.transpose();
        a += proj;
        b += proj * origin;
    }
    let svd = a.svd(false, false);
    let smallest = svd.singular_values.min();
    if smallest < 1e-9 * svd.singular_values.max() {
        return None;
    }
    a.lu().solve(&b)
}

/// The axis-aligned box of voxels where joints may lie.
///
/// Voxel `(a, b, c)` indexes the x, y and z axes; linear storage order puts
/// `c` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeGrid {
    center: Vector3<f64>,
    extent: Vector3<f64>,
    resolution: usize,
}

impl VolumeGrid {
    pub fn new(center: Vector3<f64>, extent: Vector3<f64>, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("grid center must be finite".into()));
        }
        if extent.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::Config(format!(
                "grid extent must be positive, got {:?}",
                extent.as_slice()
            )));
        }
        Ok(VolumeGrid {
            center,
            extent,
            resolution,
        })
    }

    /// A cube of side `side` mm.
    pub fn cube(center: Vector3<f64>, side: f64, resolution: usize) -> Result<Self> {
        VolumeGrid::new(center, Vector3::repeat(side), resolution)
    }

    pub fn center(&self) -> &Vector3<f64> {
        &self.center
    }

    pub fn extent(&self) -> &Vector3<f64> {
        &self.extent
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Voxel side length per axis (mm).
    pub fn pitch(&self) -> Vector3<f64> {
        self.extent / self.resolution as f64
    }

    pub fn voxel_count(&self) -> usize {
        self.resolution.pow(3)
    }

    pub fn voxel_center(&self, index: [usize; 3]) -> Result<Vector3<f64>> {
        let g = self.resolution;
        if index.iter().any(|&i| i >= g) {
            return Err(Error::InvalidInput(format!(
                "voxel index {index:?} out of range for resolution {g}"
            )));
        }
        Ok(self.center_of(index))
    }

    #[inline]
    pub(crate) fn center_of(&self, index: [usize; 3]) -> Vector3<f64> {
        let pitch = self.pitch();
        let origin = self.center - self.extent / 2.0;
        Vector3::new(
            origin.x + (index[0] as f64 + 0.5) * pitch.x,
            origin.y + (index[1] as f64 + 0.5) * pitch.y,
            origin.z + (index[2] as f64 + 0.5) * pitch.z,
        )
    }

    #[inline]
    pub fn linear_index(&self, index: [usize; 3]) -> usize {
        let g = self.resolution;
        (index[0] * g + index[1]) * g + index[2]
    }

    #[inline]
    pub fn unravel(&self, linear: usize) -> [usize; 3] {
        let g = self.resolution;
        [linear / (g * g), (linear / g) % g, linear % g]
    }

    /// Voxel containing `point`, if inside the volume.
    pub fn voxel_of(&self, point: &Vector3<f64>) -> Option<[usize; 3]> {
        let rel = point - (self.center - self.extent / 2.0);
        let pitch = self.pitch();
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let f = (rel[axis] / pitch[axis]).floor();
            if !(0.0..self.resolution as f64).contains(&f) {
                return None;
            }
            out[axis] = f as usize;
        }
        Some(out)
    }

    /// All voxel centers in linear storage order.
    pub fn centers(&self) -> Vec<Vector3<f64>> {
        (0..self.voxel_count())
            .map(|l| self.center_of(self.unravel(l)))
            .collect()
    }
}

/// How the inference volume is chosen when none is given explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeSettings {
    /// Fixed cube center; when absent a seed point is required.
    pub center: Option<Vector3<f64>>,
    /// Cube side (mm).
    pub side: f64,
    pub resolution: usize,
}

impl Default for VolumeSettings {
    fn default() -> Self {
        VolumeSettings {
            center: None,
            side: 2000.0,
            resolution: 64,
        }
    }
}

/// Cube of `settings.side` mm around the explicit center, or else the seed.
pub fn default_volume(settings: &VolumeSettings, seed: Option<Vector3<f64>>) -> Result<VolumeGrid> {
    let center = settings.center.or(seed).ok_or_else(|| {
        Error::Config("no volume center given and no seed point available".into())
    })?;
    VolumeGrid::cube(center, settings.side, settings.resolution)
}

/// On-disk calibration record for one camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub id: String,
    /// Row-major 3×3 intrinsic matrix.
    pub intrinsics: [f64; 9],
    /// Row-major 3×3 world-to-camera rotation.
    pub rotation: [f64; 9],
    /// World-to-camera translation (mm).
    pub translation: [f64; 3],
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDocument {
    pub cameras: Vec<CameraRecord>,
}

impl From<&Camera> for CameraRecord {
    fn from(cam: &Camera) -> Self {
        let row_major = |m: &Matrix3<f64>| {
            let mut out = [0.0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    out[r * 3 + c] = m[(r, c)];
                }
            }
            out
        };
        CameraRecord {
            id: cam.id.clone(),
            intrinsics: row_major(&cam.intrinsics),
            rotation: row_major(&cam.rotation),
            translation: [cam.translation.x, cam.translation.y, cam.translation.z],
            width: cam.width,
            height: cam.height,
        }
    }
}

impl TryFrom<&CameraRecord> for Camera {
    type Error = Error;

    fn try_from(rec: &CameraRecord) -> Result<Self> {
        Camera::new(
            rec.id.clone(),
            Matrix3::from_row_slice(&rec.intrinsics),
            Matrix3::from_row_slice(&rec.rotation),
            Vector3::from(rec.translation),
            rec.width,
            rec.height,
        )
    }
}

impl CameraRig {
    pub fn to_document(&self) -> CalibrationDocument {
        CalibrationDocument {
            cameras: self.cameras.iter().map(CameraRecord::from).collect(),
        }
    }

    pub fn from_document(doc: &CalibrationDocument) -> Result<Self> {
        let cameras = doc
            .cameras
            .iter()
            .map(Camera::try_from)
            .collect::<Result<Vec<_>>>()?;
        CameraRig::new(cameras)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: CalibrationDocument = crate::io::read_json(path)?;
        CameraRig::from_document(&doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_json(path, &self.to_document())
    }
}
