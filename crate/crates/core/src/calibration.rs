//! Closed-form planar calibration of the camera, the projector (as an
//! inverse camera) and the projector-to-camera transform.

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    estimate_homography_dlt, nearest_rotation, project, relative_pose, undistort_normalized,
    Homography, Pose, SensorModel,
};
use crate::io::ViewDoc;

pub const MIN_VIEWS: usize = 3;
/// Fewer views than this still calibrate but deserve a warning.
pub const RECOMMENDED_VIEWS: usize = 5;
/// Ratio of the second-smallest to the largest singular value of the conic
/// system below which its null space is not one-dimensional.
const CONIC_NULLSPACE_TOL: f64 = 1e-9;

/// Board-plane points (meters, z = 0) paired with sensor pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarView {
    pub pairs: Vec<(Vector2<f64>, Vector2<f64>)>,
}

impl PlanarView {
    pub fn new(board: &[Vector2<f64>], pixels: &[Vector2<f64>]) -> Result<Self> {
        if board.len() != pixels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} board points but {} pixels",
                board.len(),
                pixels.len()
            )));
        }
        let view = PlanarView {
            pairs: board.iter().copied().zip(pixels.iter().copied()).collect(),
        };
        if view.pairs.len() < 4 {
            return Err(Error::Insufficient(format!(
                "a view needs at least 4 points, got {}",
                view.pairs.len()
            )));
        }
        Ok(view)
    }

    /// Printed-corner observations of a view document.
    pub fn from_doc(doc: &ViewDoc) -> Result<Self> {
        let v = |a: &[[f64; 2]]| {
            a.iter()
                .map(|p| Vector2::new(p[0], p[1]))
                .collect::<Vec<_>>()
        };
        PlanarView::new(&v(&doc.board_points_m), &v(&doc.pixels))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Board → pixel homography.
    pub fn homography(&self) -> Result<Homography> {
        estimate_homography_dlt(&self.pairs)
    }

    /// Same view with lens distortion removed from the pixels, so that a
    /// homography describes it exactly.
    pub fn undistorted(&self, model: &SensorModel) -> Result<PlanarView> {
        if !model.has_distortion() {
            return Ok(self.clone());
        }
        let pairs = self
            .pairs
            .iter()
            .map(|(b, px)| {
                let x = undistort_normalized(model.k1, model.k2, model.to_normalized(*px))?;
                Ok((*b, model.undistorted().to_pixel(x)))
            })
            .collect::<Result<_>>()?;
        Ok(PlanarView { pairs })
    }

    /// RMS distance between observed pixels and the board points projected
    /// through `model` at `pose`.
    pub fn reprojection_rms(&self, model: &SensorModel, pose: &Pose) -> Result<f64> {
        let mut sum = 0.0;
        for (b, px) in &self.pairs {
            let p = project(model, pose, &Vector3::new(b.x, b.y, 0.0))?;
            sum += (p - px).norm_squared();
        }
        Ok((sum / self.pairs.len() as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: SensorModel,
    /// Board → sensor pose per view.
    #[serde(skip)]
    pub poses: Vec<Pose>,
    /// Per-view RMS reprojection error, pixels.
    pub rms_px: Vec<f64>,
}

/// Zero-skew intrinsics from at least three views of a plane.
///
/// Each view's homography `H = [h₁ h₂ h₃]` constrains the image of the
/// absolute conic `ω` by `h₁ᵀωh₂ = 0` and `h₁ᵀωh₁ = h₂ᵀωh₂`. With zero skew `ω`
/// has five unknowns, solved as the smallest right singular vector. Pixels
/// are rescaled to unit magnitude first for conditioning.
pub fn calibrate_intrinsics(
    views: &[PlanarView],
    image_size: (u32, u32),
) -> Result<CalibrationResult> {
    if views.len() < MIN_VIEWS {
        return Err(Error::Insufficient(format!(
            "intrinsic calibration needs at least {MIN_VIEWS} views, got {}",
            views.len()
        )));
    }
    if views.len() < RECOMMENDED_VIEWS {
        log::warn!(
            "calibrating from {} views; {RECOMMENDED_VIEWS} or more are recommended",
            views.len()
        );
    }
    let homographies = views
        .par_iter()
        .map(PlanarView::homography)
        .collect::<Result<Vec<_>>>()?;

    let (w, h) = (image_size.0 as f64, image_size.1 as f64);
    let s = 2.0 / (w + h);
    let norm = Matrix3::new(s, 0.0, -s * w / 2.0, 0.0, s, -s * h / 2.0, 0.0, 0.0, 1.0);

    let mut a = DMatrix::<f64>::zeros((2 * homographies.len()).max(5), 5);
    for (k, hom) in homographies.iter().enumerate() {
        let m = norm * hom.matrix();
        let m = m / m.norm();
        let v = |i: usize, j: usize| {
            let (hi, hj) = (m.column(i), m.column(j));
            [
                hi[0] * hj[0],
                hi[1] * hj[1],
                hi[0] * hj[2] + hi[2] * hj[0],
                hi[1] * hj[2] + hi[2] * hj[1],
                hi[2] * hj[2],
            ]
        };
        let (v12, v11, v22) = (v(0, 1), v(0, 0), v(1, 1));
        for c in 0..5 {
            a[(2 * k, c)] = v12[c];
            a[(2 * k + 1, c)] = v11[c] - v22[c];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD of the conic system failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let smax = svd.singular_values[order[0]];
    let second = svd.singular_values[order[order.len() - 2]];
    if !(smax > 0.0) || second / smax < CONIC_NULLSPACE_TOL {
        return Err(Error::Degenerate(
            "view orientations do not constrain the intrinsics (near-parallel boards)".into(),
        ));
    }
    let row = vt.row(order[order.len() - 1]);
    let mut b: Vec<f64> = row.iter().copied().collect();
    if b[0] < 0.0 {
        b.iter_mut().for_each(|v| *v = -*v);
    }
    let [b11, b22, b13, b23, b33] = [b[0], b[1], b[2], b[3], b[4]];
    if !(b11 > 0.0 && b22 > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let cx = -b13 / b11;
    let cy = -b23 / b22;
    let lambda = b33 - b13 * b13 / b11 - b23 * b23 / b22;
    if !(lambda > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let (fx, fy) = ((lambda / b11).sqrt(), (lambda / b22).sqrt());
    // Undo the pixel normalization.
    let model = SensorModel::pinhole(
        image_size.0,
        image_size.1,
        fx / s,
        fy / s,
        cx / s + w / 2.0,
        cy / s + h / 2.0,
    );

    let poses = homographies
        .iter()
        .map(|hom| pose_from_homography(&model, hom))
        .collect::<Result<Vec<_>>>()?;
    let rms_px = views
        .iter()
        .zip(&poses)
        .map(|(v, p)| v.reprojection_rms(&model, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationResult {
        model,
        poses,
        rms_px,
    })
}

fn inverse_intrinsics(k: &SensorModel) -> Matrix3<f64> {
    Matrix3::new(
        1.0 / k.fx,
        0.0,
        -k.cx / k.fx,
        0.0,
        1.0 / k.fy,
        -k.cy / k.fy,
        0.0,
        0.0,
        1.0,
    )
}

/// Board → sensor pose from a board → pixel homography and known intrinsics.
/// Distortion in `k` is ignored; the homography must describe undistorted pixels.
pub fn pose_from_homography(k: &SensorModel, h: &Homography) -> Result<Pose> {
    let m = inverse_intrinsics(k) * h.matrix();
    let (c1, c2, c3) = (m.column(0), m.column(1), m.column(2));
    let n1 = c1.norm();
    if !(n1 > 0.0) || !n1.is_finite() {
        return Err(Error::Degenerate("homography column has no length".into()));
    }
    let mut lambda = 1.0 / n1;
    if c3[2] * lambda < 0.0 {
        lambda = -lambda;
    }
    let t: Vector3<f64> = c3 * lambda;
    if !(t.z > 0.0) {
        return Err(Error::BoardBehindSensor);
    }
    let r1: Vector3<f64> = c1 * lambda;
    let r2: Vector3<f64> = c2 * lambda;
    let r = Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]);
    Pose::new(nearest_rotation(&r)?, t)
}

/// The projector's 2D–3D view reconstructed through the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorView {
    pub view: PlanarView,
    /// Projected corners that landed outside the board and were discarded.
    pub dropped: usize,
}

/// Maps projected corners seen by the camera onto the board with
/// `cam_to_board` and pairs them with the projector pixels that emitted them.
/// Points outside `board_size` (meters; `None` = unbounded) are dropped.
pub fn projector_view_from_camera(
    cam_to_board: &Homography,
    projected_cam_pixels: &[Vector2<f64>],
    projector_pixels: &[Vector2<f64>],
    board_size: Option<Vector2<f64>>,
) -> Result<ProjectorView> {
    if projected_cam_pixels.len() != projector_pixels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} projected corners but {} projector pixels",
            projected_cam_pixels.len(),
            projector_pixels.len()
        )));
    }
    let inside = |b: &Vector2<f64>| {
        b.iter().all(|v| v.is_finite())
            && board_size.is_none_or(|s| (0.0..=s.x).contains(&b.x) && (0.0..=s.y).contains(&b.y))
    };
    let mut board = Vec::new();
    let mut pixels = Vec::new();
    for (c, p) in projected_cam_pixels.iter().zip(projector_pixels) {
        let b = cam_to_board.apply(c);
        if inside(&b) {
            board.push(b);
            pixels.push(*p);
        }
    }
    let dropped = projector_pixels.len() - board.len();
    if dropped > 0 {
        log::warn!("{dropped} projected corner(s) map outside the board and were dropped");
    }
    Ok(ProjectorView {
        view: PlanarView::new(&board, &pixels)?,
        dropped,
    })
}

/// Projector view of one placement given its printed-corner camera view.
pub fn projector_view_from_doc(
    doc: &ViewDoc,
    camera: &SensorModel,
    board_size: Option<Vector2<f64>>,
) -> Result<ProjectorView> {
    let cam_view = PlanarView::from_doc(doc)?.undistorted(camera)?;
    let cam_to_board = cam_view.homography()?.inverse()?;
    let mut projected: Vec<Vector2<f64>> = doc
        .projected_camera_pixels
        .iter()
        .map(|p| Vector2::new(p[0], p[1]))
        .collect();
    if camera.has_distortion() {
        let ideal = camera.undistorted();
        for p in &mut projected {
            *p = ideal.to_pixel(undistort_normalized(
                camera.k1,
                camera.k2,
                camera.to_normalized(*p),
            )?);
        }
    }
    let proj: Vec<_> = doc
        .projector_pixels
        .iter()
        .map(|p| Vector2::new(p[0], p[1]))
        .collect();
    projector_view_from_camera(&cam_to_board, &projected, &proj, board_size)
}

/// Projector-to-camera transform from one board placement seen by both.
pub fn stereo_extrinsics(
    view_cam: &PlanarView,
    camera: &SensorModel,
    view_proj: &PlanarView,
    projector: &SensorModel,
) -> Result<Pose> {
    let pose = |v: &PlanarView, m: &SensorModel| -> Result<Pose> {
        pose_from_homography(m, &v.undistorted(m)?.homography()?)
    };
    Ok(relative_pose(
        &pose(view_cam, camera)?,
        &pose(view_proj, projector)?,
    ))
}
