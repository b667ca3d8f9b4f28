//! Pinhole camera model and ray generation.
//!
//! Convention: right-handed world, camera looks down -z, y up. Pose is a
//! camera-to-world transform stored as axis-angle rotation plus translation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Column-major 3x3 rotation helper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    /// Columns of the matrix (images of the basis vectors).
    pub cols: [Vec3; 3],
}

impl Mat3 {
    pub fn identity() -> Self {
        Mat3 {
            cols: [
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
        }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        self.cols[0] * v.x + self.cols[1] * v.y + self.cols[2] * v.z
    }

    /// Multiplies by the transpose (inverse, for rotations).
    pub fn tr_mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.cols[0].dot(v), self.cols[1].dot(v), self.cols[2].dot(v))
    }

    /// Rodrigues formula: rotation matrix for an axis-angle vector.
    pub fn from_axis_angle(w: Vec3) -> Self {
        let theta = w.norm();
        if theta < 1e-12 {
            return Mat3::identity();
        }
        let k = w * (1.0 / theta);
        let (s, c) = (theta.sin(), theta.cos());
        let one_c = 1.0 - c;
        let col = |b: Vec3| b * c + k.cross(b) * s + k * (k.dot(b) * one_c);
        Mat3 {
            cols: [
                col(Vec3::new(1.0, 0.0, 0.0)),
                col(Vec3::new(0.0, 1.0, 0.0)),
                col(Vec3::new(0.0, 0.0, 1.0)),
            ],
        }
    }

    /// Axis-angle vector of a rotation matrix, |result| <= pi. Goes through a
    /// quaternion so the branch near pi stays stable.
    pub fn to_axis_angle(&self) -> Vec3 {
        let m = |r: usize, c: usize| -> f64 {
            let col = self.cols[c].to_array();
            col[r]
        };
        let trace = m(0, 0) + m(1, 1) + m(2, 2);
        let (w, x, y, z);
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m(2, 1) - m(1, 2)) / s;
            y = (m(0, 2) - m(2, 0)) / s;
            z = (m(1, 0) - m(0, 1)) / s;
        } else if m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2) {
            let s = (1.0 + m(0, 0) - m(1, 1) - m(2, 2)).sqrt() * 2.0;
            w = (m(2, 1) - m(1, 2)) / s;
            x = 0.25 * s;
            y = (m(0, 1) + m(1, 0)) / s;
            z = (m(0, 2) + m(2, 0)) / s;
        } else if m(1, 1) > m(2, 2) {
            let s = (1.0 + m(1, 1) - m(0, 0) - m(2, 2)).sqrt() * 2.0;
            w = (m(0, 2) - m(2, 0)) / s;
            x = (m(0, 1) + m(1, 0)) / s;
            y = 0.25 * s;
            z = (m(1, 2) + m(2, 1)) / s;
        } else {
            let s = (1.0 + m(2, 2) - m(0, 0) - m(1, 1)).sqrt() * 2.0;
            w = (m(1, 0) - m(0, 1)) / s;
            x = (m(0, 2) + m(2, 0)) / s;
            y = (m(1, 2) + m(2, 1)) / s;
            z = 0.25 * s;
        }
        let (w, v) = if w < 0.0 {
            (-w, Vec3::new(-x, -y, -z))
        } else {
            (w, Vec3::new(x, y, z))
        };
        let vn = v.norm();
        if vn < 1e-12 {
            return Vec3::ZERO;
        }
        let theta = 2.0 * vn.atan2(w);
        v * (theta / vn)
    }
}

/// 6-dof pose plus pinhole intrinsics; the unit of camera-only storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    /// Axis-angle rotation followed by translation, camera-to-world.
    pub pose: [f64; 6],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew: Option<f64>,
    pub width: usize,
    pub height: usize,
    pub image_id: u64,
    pub timestep: usize,
    /// Cameras sharing a group id store one set of intrinsics between them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics_group: Option<u32>,
}

impl CameraParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::domain(format!(
                "camera {}: focal lengths must be positive (fx={}, fy={})",
                self.image_id, self.fx, self.fy
            )));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f64)
            || !(0.0 <= self.cy && self.cy < self.height as f64)
        {
            return Err(Error::domain(format!(
                "camera {}: principal point ({}, {}) outside the {}x{} image",
                self.image_id, self.cx, self.cy, self.width, self.height
            )));
        }
        let rot = Vec3::new(self.pose[0], self.pose[1], self.pose[2]);
        if !rot.is_finite() || rot.norm() >= std::f64::consts::PI {
            return Err(Error::domain(format!(
                "camera {}: axis-angle norm {} must be finite and < pi",
                self.image_id,
                rot.norm()
            )));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Mat3 {
        Mat3::from_axis_angle(Vec3::new(self.pose[0], self.pose[1], self.pose[2]))
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.pose[3], self.pose[4], self.pose[5])
    }

    /// Number of stored intrinsic scalars (fx, fy, cx, cy and optional skew).
    pub fn intrinsics_count(&self) -> usize {
        4 + usize::from(self.skew.is_some())
    }

    /// Casts the ray through the center of pixel `(row, col)`.
    pub fn ray(&self, row: usize, col: usize) -> Result<Ray> {
        if row >= self.height || col >= self.width {
            return Err(Error::domain(format!(
                "pixel ({row}, {col}) outside {}x{} image of camera {}",
                self.width, self.height, self.image_id
            )));
        }
        let u = col as f64 + 0.5;
        let v = row as f64 + 0.5;
        let yc = (self.cy - v) / self.fy;
        let xc = (u - self.cx - self.skew.unwrap_or(0.0) * yc) / self.fx;
        let dir_cam = Vec3::new(xc, yc, -1.0);
        let dir = self.rotation().mul_vec(dir_cam).normalized();
        Ok(Ray {
            origin: self.position(),
            dir,
            near: DEFAULT_NEAR,
            far: DEFAULT_FAR,
            pixel: (row as u32, col as u32),
            source: RaySource::New,
        })
    }

    /// Projects a world point to fractional pixel coordinates `(row, col)`;
    /// `None` when the point is behind the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let cam = self.rotation().tr_mul_vec(p - self.position());
        if cam.z >= -1e-12 {
            return None;
        }
        let xp = cam.x / -cam.z;
        let yp = cam.y / -cam.z;
        let u = self.fx * xp + self.skew.unwrap_or(0.0) * yp + self.cx;
        let v = self.cy - self.fy * yp;
        Some((v - 0.5, u - 0.5))
    }

    /// Pose looking from `eye` toward `target` with `up` resolving roll.
    pub fn look_at_pose(eye: Vec3, target: Vec3, up: Vec3) -> [f64; 6] {
        let forward = (target - eye).normalized();
        let zc = -forward;
        let xc = up.cross(zc).normalized();
        let yc = zc.cross(xc);
        let rot = Mat3 { cols: [xc, yc, zc] }.to_axis_angle();
        [rot.x, rot.y, rot.z, eye.x, eye.y, eye.z]
    }
}

pub const DEFAULT_NEAR: f64 = 1e-3;
pub const DEFAULT_FAR: f64 = 1e4;

/// Where a training ray's supervision comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RaySource {
    New,
    ExperienceReplay,
    GenerativeReplay,
}

/// A camera ray with its sampling interval and originating pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction (|dir| = 1 within 1e-6).
    pub dir: Vec3,
    pub near: f64,
    pub far: f64,
    pub pixel: (u32, u32),
    pub source: RaySource,
}

impl Ray {
    pub fn point_at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }

    /// Restricts [near, far] to the intersection with `aabb`; `None` when the
    /// ray misses it entirely.
    pub fn clipped_to(&self, aabb: &crate::math::Aabb) -> Option<Ray> {
        let (t0, t1) = aabb.clip_ray(self.origin, self.dir)?;
        let near = self.near.max(t0).max(1e-6);
        let far = self.far.min(t1);
        if far <= near {
            return None;
        }
        Some(Ray {
            near,
            far,
            ..*self
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_cam(pose: [f64; 6]) -> CameraParams {
        CameraParams {
            pose,
            fx: 80.0,
            fy: 80.0,
            cx: 32.0,
            cy: 24.0,
            skew: None,
            width: 64,
            height: 48,
            image_id: 0,
            timestep: 0,
            intrinsics_group: None,
        }
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        // Principal point on the center of pixel (23, 31); identity pose.
        let mut cam = test_cam([0.0; 6]);
        cam.cx = 31.5;
        cam.cy = 23.5;
        let ray = cam.ray(23, 31).unwrap();
        assert!((ray.dir - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert_eq!(ray.origin, Vec3::ZERO);
    }

    #[test]
    fn translation_moves_origin_not_direction() {
        let mut cam = test_cam([0.0; 6]);
        cam.cx = 31.5;
        cam.cy = 23.5;
        let base = cam.ray(10, 20).unwrap();
        let mut cam_t = cam.clone();
        cam_t.pose = [0.0, 0.0, 0.0, 1.0, -2.0, 3.0];
        let moved = cam_t.ray(10, 20).unwrap();
        assert_eq!(moved.origin, Vec3::new(1.0, -2.0, 3.0));
        assert!((moved.dir - base.dir).norm() < 1e-15);
    }

    #[test]
    fn ray_passes_through_unprojected_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let axis = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalized();
            let angle: f64 = rng.random_range(0.0..3.0);
            let mut cam = test_cam([
                axis.x * angle,
                axis.y * angle,
                axis.z * angle,
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]);
            cam.skew = Some(rng.random_range(-2.0..2.0));
            let row = rng.random_range(0..cam.height);
            let col = rng.random_range(0..cam.width);
            let ray = cam.ray(row, col).unwrap();

            // Independent unprojection of the pixel center at camera depth 1.
            let u = col as f64 + 0.5;
            let v = row as f64 + 0.5;
            let yp = (cam.cy - v) / cam.fy;
            let xp = (u - cam.cx - cam.skew.unwrap() * yp) / cam.fx;
            let world = cam.rotation().mul_vec(Vec3::new(xp, yp, -1.0)) + cam.position();

            let rel = world - ray.origin;
            let along = ray.dir * rel.dot(ray.dir);
            let dist = (rel - along).norm();
            assert!(dist < 1e-6, "ray misses unprojected point by {dist}");
        }
    }

    #[test]
    fn out_of_bounds_pixel_is_domain_error() {
        let cam = test_cam([0.0; 6]);
        assert!(cam.ray(48, 0).is_err());
        assert!(cam.ray(0, 64).is_err());
    }

    #[test]
    fn axis_angle_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let axis = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalized();
            // Stay below pi, where the axis-angle chart is unique.
            let w = axis * rng.random_range(0.0..3.1);
            let back = Mat3::from_axis_angle(w).to_axis_angle();
            assert!((back - w).norm() < 1e-9, "{w:?} -> {back:?}");
        }
    }

    #[test]
    fn look_at_points_camera_at_target() {
        let eye = Vec3::new(2.0, 1.5, 3.0);
        let target = Vec3::new(0.0, 0.0, 0.0);
        let pose = CameraParams::look_at_pose(eye, target, Vec3::new(0.0, 1.0, 0.0));
        let mut cam = test_cam(pose);
        cam.cx = 31.5;
        cam.cy = 23.5;
        cam.validate().unwrap();
        let ray = cam.ray(23, 31).unwrap();
        let expect = (target - eye).normalized();
        assert!((ray.dir - expect).norm() < 1e-9);
    }

    #[test]
    fn validation_rejects_bad_cameras() {
        let mut cam = test_cam([0.0; 6]);
        cam.fx = -1.0;
        assert!(cam.validate().is_err());
        let mut cam = test_cam([0.0; 6]);
        cam.cx = 64.0;
        assert!(cam.validate().is_err());
        let mut cam = test_cam([3.2, 0.0, 0.0, 0.0, 0.0, 0.0]);
        cam.validate().unwrap_err();
        cam.pose = [3.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(cam.validate().is_ok());
    }
}
