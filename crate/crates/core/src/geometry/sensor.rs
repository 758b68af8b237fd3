//! Pinhole sensor with two-term radial distortion, shared by camera and
//! projector (a projector is treated as a camera whose pixels emit light).

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::pose::Pose;
use super::triangulate::Ray;
use crate::error::{Error, Result};

const UNDISTORT_MAX_ITERS: usize = 50;
const UNDISTORT_STEP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
}

impl SensorModel {
    pub fn pinhole(width: u32, height: u32, fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        SensorModel {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            k1: 0.0,
            k2: 0.0,
        }
    }

    pub fn with_distortion(mut self, k1: f64, k2: f64) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.k1, self.k2]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::OutOfRange("non-finite sensor parameter".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::OutOfRange("sensor size must be positive".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::OutOfRange(format!(
                "principal point ({}, {}) outside {}x{} sensor",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn has_distortion(&self) -> bool {
        self.k1 != 0.0 || self.k2 != 0.0
    }

    /// Same intrinsics with distortion removed.
    pub fn undistorted(&self) -> Self {
        self.with_distortion(0.0, 0.0)
    }

    #[inline]
    pub fn distort(&self, x: Vector2<f64>) -> Vector2<f64> {
        distort_normalized(self.k1, self.k2, x)
    }

    /// Normalized (distorted) coordinates to pixels.
    #[inline]
    pub fn to_pixel(&self, xd: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * xd.x + self.cx, self.fy * xd.y + self.cy)
    }

    #[inline]
    pub fn to_normalized(&self, pixel: Vector2<f64>) -> Vector2<f64> {
        Vector2::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy)
    }

    /// Projects a point given in this sensor's own frame.
    pub fn project_local(&self, p: &Vector3<f64>) -> Result<Vector2<f64>> {
        if !(p.z > 0.0) {
            return Err(Error::NonPositiveDepth(p.z));
        }
        let x = Vector2::new(p.x / p.z, p.y / p.z);
        Ok(self.to_pixel(self.distort(x)))
    }

    /// Unit direction (sensor frame) of the ray through a pixel.
    pub fn local_direction(&self, pixel: Vector2<f64>) -> Result<Vector3<f64>> {
        let x = undistort_normalized(self.k1, self.k2, self.to_normalized(pixel))?;
        Ok(Vector3::new(x.x, x.y, 1.0).normalize())
    }

    pub fn contains(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x <= (self.width - 1) as f64
            && pixel.y <= (self.height - 1) as f64
    }
}

#[inline]
pub fn distort_normalized(k1: f64, k2: f64, x: Vector2<f64>) -> Vector2<f64> {
    let r2 = x.norm_squared();
    x * (1.0 + k1 * r2 + k2 * r2 * r2)
}

/// Inverts [`distort_normalized`] by fixed-point iteration.
pub fn undistort_normalized(k1: f64, k2: f64, xd: Vector2<f64>) -> Result<Vector2<f64>> {
    if k1 == 0.0 && k2 == 0.0 {
        return Ok(xd);
    }
    let mut x = xd;
    for _ in 0..UNDISTORT_MAX_ITERS {
        let r2 = x.norm_squared();
        let next = xd / (1.0 + k1 * r2 + k2 * r2 * r2);
        if !next.iter().all(|v| v.is_finite()) {
            break;
        }
        let step = (next - x).norm();
        x = next;
        if step < UNDISTORT_STEP_TOL {
            return Ok(x);
        }
    }
    Err(Error::UndistortDiverged(UNDISTORT_MAX_ITERS))
}

/// World point to pixel: `X_s = R X_w + t`, perspective divide, radial
/// distortion, then intrinsics.
pub fn project(model: &SensorModel, pose: &Pose, point: &Vector3<f64>) -> Result<Vector2<f64>> {
    model.project_local(&pose.transform(point))
}

/// World-frame ray through a pixel, starting at the sensor center.
pub fn pixel_to_ray(model: &SensorModel, pose: &Pose, pixel: Vector2<f64>) -> Result<Ray> {
    let local = model.local_direction(pixel)?;
    let dir = pose.rotation().transpose() * local;
    Ok(Ray::new(pose.center(), dir))
}

/// Intrinsics of Table-I style used throughout fixtures and tests.
pub mod reference {
    use super::SensorModel;

    /// 1600×1200 camera; `fx, fy, cx, cy, k1, k2` from the reference rig.
    pub fn camera() -> SensorModel {
        SensorModel::pinhole(1600, 1200, 1362.2, 1372.2, 803.9, 590.1).with_distortion(0.07, -0.14)
    }

    /// 1024×768 projector with upward throw (principal point near the bottom).
    pub fn projector() -> SensorModel {
        SensorModel::pinhole(1024, 768, 2261.7, 2262.8, 522.7, 713.8)
    }
}
