use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};

/// Tolerance on the rotation invariant of an in-memory [`Pose`].
pub const ROTATION_TOL: f64 = 1e-9;

/// Rigid transform taking world coordinates into a sensor frame:
/// `x_sensor = rotation * x_world + translation` (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let deviation = orthonormality_deviation(&rotation);
        if deviation > ROTATION_TOL || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::NonOrthonormal { deviation });
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    /// Accepts a rotation that is orthonormal within `tol` and snaps it to
    /// the nearest proper rotation.
    pub fn new_approx(rotation: Matrix3<f64>, translation: Vector3<f64>, tol: f64) -> Result<Self> {
        let deviation = orthonormality_deviation(&rotation);
        if !(deviation <= tol) {
            return Err(Error::NonOrthonormal { deviation });
        }
        Pose::new(nearest_rotation(&rotation)?, translation)
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation given as an axis-angle vector (Rodrigues).
    pub fn from_axis_angle(rvec: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation: rodrigues(&rvec),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn axis_angle(&self) -> Vector3<f64> {
        Rotation3::from_matrix_unchecked(self.rotation).scaled_axis()
    }

    #[inline]
    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Sensor center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Transform mapping projector-frame coordinates into the camera frame, given
/// both sensors' world→sensor poses.
pub fn relative_pose(pose_cam: &Pose, pose_proj: &Pose) -> Pose {
    let r = pose_cam.rotation * pose_proj.rotation.transpose();
    Pose {
        rotation: r,
        translation: pose_cam.translation - r * pose_proj.translation,
    }
}

/// max |RᵀR − I| combined with |det R − 1|.
pub fn orthonormality_deviation(r: &Matrix3<f64>) -> f64 {
    let gram = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    if gram.is_nan() || det.is_nan() {
        f64::INFINITY
    } else {
        gram.max(det)
    }
}

/// Nearest proper rotation in the Frobenius sense (`U Vᵀ` with det fix-up).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Degenerate("SVD failed on rotation".into())),
    };
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    Ok(r)
}

pub fn rodrigues(rvec: &Vector3<f64>) -> Matrix3<f64> {
    let theta = rvec.norm();
    if theta < 1e-300 {
        return Matrix3::identity();
    }
    let k = rvec / theta;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * theta.sin() + kx * kx * (1.0 - theta.cos())
}
