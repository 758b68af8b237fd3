use nalgebra::{Vector2, Vector3};

use super::pose::Pose;
use super::sensor::{pixel_to_ray, project, SensorModel};
use super::triangulate::{triangulate_midpoint, Ray, Triangulation};
use crate::error::Result;

/// Camera + projector pair. The camera frame is the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoRig {
    pub camera: SensorModel,
    pub projector: SensorModel,
    /// Maps projector-frame coordinates into the camera frame.
    pub projector_to_camera: Pose,
}

impl StereoRig {
    pub fn camera_pose(&self) -> Pose {
        Pose::identity()
    }

    /// World (camera frame) → projector frame.
    pub fn projector_pose(&self) -> Pose {
        self.projector_to_camera.inverse()
    }

    pub fn baseline(&self) -> f64 {
        self.projector_to_camera.translation().norm()
    }

    pub fn projector_center(&self) -> Vector3<f64> {
        *self.projector_to_camera.translation()
    }

    pub fn camera_ray(&self, pixel: Vector2<f64>) -> Result<Ray> {
        pixel_to_ray(&self.camera, &Pose::identity(), pixel)
    }

    pub fn projector_ray(&self, pixel: Vector2<f64>) -> Result<Ray> {
        pixel_to_ray(&self.projector, &self.projector_pose(), pixel)
    }

    pub fn project_to_camera(&self, p: &Vector3<f64>) -> Result<Vector2<f64>> {
        project(&self.camera, &Pose::identity(), p)
    }

    pub fn project_to_projector(&self, p: &Vector3<f64>) -> Result<Vector2<f64>> {
        project(&self.projector, &self.projector_pose(), p)
    }

    /// Intersects the rays of a corresponding camera/projector pixel pair.
    pub fn triangulate(
        &self,
        cam_px: Vector2<f64>,
        proj_px: Vector2<f64>,
    ) -> Result<Triangulation> {
        triangulate_midpoint(&self.camera_ray(cam_px)?, &self.projector_ray(proj_px)?)
    }
}
