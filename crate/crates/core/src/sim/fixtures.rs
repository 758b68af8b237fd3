//! The bundled reference setup: reference camera and projector at a 0.25 m baseline aimed at a
//! checkerboard 2.2 m away, plus synthetic calibration views.

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};

use super::render::{corner_truth, plan_from_corners};
use super::scene::{BoardSpec, SceneSpec};
use crate::error::{Error, Result};
use crate::geometry::{reference, rodrigues, Pose, StereoRig};
use crate::io::{MeasurementPlan, ViewDoc, ViewsDoc};
use crate::pattern::{Orientation, PatternSpec, StackSpecs};

pub const REFERENCE_BASELINE_M: f64 = 0.25;
pub const REFERENCE_DISTANCE_M: f64 = 2.2;
pub const REFERENCE_FRINGE_V: u32 = 64;
pub const REFERENCE_FRINGE_H: u32 = 96;

/// Labeled inner corners of the reference board used by the measurement plan.
pub const PLAN_CORNERS: [(&str, (u32, u32)); 4] =
    [("A", (3, 2)), ("B", (9, 2)), ("C", (9, 6)), ("D", (3, 6))];

/// Projector displaced `REFERENCE_BASELINE_M` along camera +x and rotated so
/// its central pixel hits the camera axis at `REFERENCE_DISTANCE_M`.
pub fn reference_rig() -> StereoRig {
    let camera = reference::camera();
    let projector = reference::projector();
    let center = Vector3::new(REFERENCE_BASELINE_M, 0.0, 0.0);
    let target = Vector3::new(0.0, 0.0, REFERENCE_DISTANCE_M);
    let f = (target - center).normalize();
    let x = Vector3::y().cross(&f).normalize();
    let y = f.cross(&x);
    let look = Matrix3::from_columns(&[x, y, f]);
    let mid = Vector2::new(projector.width as f64 / 2.0, projector.height as f64 / 2.0);
    let d = projector.to_normalized(mid);
    let d = Vector3::new(d.x, d.y, 1.0);
    let q = Rotation3::rotation_between(&d, &Vector3::z())
        .map(|r| *r.matrix())
        .unwrap_or_else(Matrix3::identity);
    let pose = Pose::new(look * q, center).expect("constructed rotation is orthonormal");
    StereoRig {
        camera,
        projector,
        projector_to_camera: pose,
    }
}

/// 12×8 checkerboard of 60 mm squares, fronto-parallel at 2.2 m, fully lit by
/// the reference projector.
pub fn reference_scene() -> SceneSpec {
    SceneSpec {
        board: BoardSpec {
            origin_m: [-0.36, -0.24, REFERENCE_DISTANCE_M],
            x_axis: [1.0, 0.0, 0.0],
            y_axis: [0.0, 1.0, 0.0],
            squares_x: 12,
            squares_y: 8,
            square_size_m: 0.06,
            albedo_light: 0.9,
            albedo_dark: 0.6,
        },
        spheres: vec![],
        ambient: 10.0,
        projector_gamma: 1.0,
        noise_sigma: 0.0,
        seed: 1,
        shadows: true,
    }
}

/// Lengths AB, BC, CD, DA, AC, BD between [`PLAN_CORNERS`] on the reference
/// board as seen by the reference rig.
pub fn reference_plan() -> Result<MeasurementPlan> {
    plan_from_corners(
        &corner_truth(&reference_rig(), &reference_scene()),
        &PLAN_CORNERS,
    )
}

pub fn reference_stack_specs() -> StackSpecs {
    let p = reference::projector();
    StackSpecs {
        vertical: Some(PatternSpec::new(
            p.width,
            p.height,
            REFERENCE_FRINGE_V,
            Orientation::Vertical,
        )),
        horizontal: Some(PatternSpec::new(
            p.width,
            p.height,
            REFERENCE_FRINGE_H,
            Orientation::Horizontal,
        )),
    }
}

/// Placement of a calibration board: board point `(a, b)` maps to
/// `rotation·(a, b, 0) + translation` in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardPlacement {
    pub pose: Pose,
}

impl BoardPlacement {
    /// Board centered on the camera axis at `distance`, tilted by `rvec`.
    pub fn centered(rvec: [f64; 3], distance: f64, board_center: Vector2<f64>) -> Self {
        let r = rodrigues(&Vector3::from(rvec));
        let t = Vector3::new(0.0, 0.0, distance)
            - r * Vector3::new(board_center.x, board_center.y, 0.0);
        BoardPlacement {
            pose: Pose::new(r, t).expect("rodrigues yields a rotation"),
        }
    }

    pub fn world(&self, board: &Vector2<f64>) -> Vector3<f64> {
        self.pose.transform(&Vector3::new(board.x, board.y, 0.0))
    }

    /// Board coordinates where `ray` meets the board plane.
    fn hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Vector2<f64>> {
        let inv = self.pose.inverse();
        let o = inv.transform(origin);
        let d = inv.rotation() * dir;
        if d.z.abs() < 1e-12 {
            return None;
        }
        let s = -o.z / d.z;
        (s > 0.0).then(|| {
            let p = o + d * s;
            Vector2::new(p.x, p.y)
        })
    }
}

/// Calibration board geometry: inner-corner grid and physical extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationBoard {
    pub squares_x: u32,
    pub squares_y: u32,
    pub square_size_m: f64,
}

impl CalibrationBoard {
    pub fn size_m(&self) -> Vector2<f64> {
        Vector2::new(
            self.squares_x as f64 * self.square_size_m,
            self.squares_y as f64 * self.square_size_m,
        )
    }

    pub fn inner_corners(&self) -> Vec<Vector2<f64>> {
        (1..self.squares_y)
            .flat_map(|j| {
                (1..self.squares_x).map(move |i| {
                    Vector2::new(i as f64 * self.square_size_m, j as f64 * self.square_size_m)
                })
            })
            .collect()
    }
}

pub fn reference_calibration_board() -> CalibrationBoard {
    CalibrationBoard {
        squares_x: 10,
        squares_y: 8,
        square_size_m: 0.1,
    }
}

/// Five distinct tilts between 1.9 and 2.3 m.
pub fn reference_board_placements() -> Vec<BoardPlacement> {
    let center = reference_calibration_board().size_m() / 2.0;
    [
        ([0.35, 0.0, 0.0], 2.0),
        ([-0.30, 0.10, 0.0], 2.2),
        ([0.0, 0.35, 0.10], 2.1),
        ([0.10, -0.35, -0.10], 2.3),
        ([0.25, 0.25, 0.05], 1.9),
    ]
    .into_iter()
    .map(|(r, d)| BoardPlacement::centered(r, d, center))
    .collect()
}

/// Projector pixels of the projected checkerboard's corners: a 9×7 grid over
/// the central half of the projector.
pub fn projected_corner_grid(rig: &StereoRig) -> Vec<Vector2<f64>> {
    let (w, h) = (rig.projector.width as f64, rig.projector.height as f64);
    (0..7)
        .flat_map(|j| {
            (0..9).map(move |i| {
                Vector2::new(w / 4.0 + i as f64 * w / 16.0, h / 4.0 + j as f64 * h / 12.0)
            })
        })
        .collect()
}

/// Noiseless corner observations of each placement: printed corners seen by
/// the camera, and projected corners seen by the camera with the projector
/// pixels that emitted them. Projected corners that miss the board are left
/// in so callers exercise the drop path.
pub fn synthesize_views(
    rig: &StereoRig,
    board: &CalibrationBoard,
    placements: &[BoardPlacement],
) -> Result<ViewsDoc> {
    let grid = projected_corner_grid(rig);
    let proj_pose = rig.projector_pose();
    let proj_center = rig.projector_center();
    let mut views = Vec::with_capacity(placements.len());
    for placement in placements {
        let mut doc = ViewDoc::default();
        for b in board.inner_corners() {
            let px = rig.project_to_camera(&placement.world(&b))?;
            if !rig.camera.contains(&px) {
                return Err(Error::OutOfRange(format!(
                    "board corner ({:.3}, {:.3}) leaves the camera image",
                    b.x, b.y
                )));
            }
            doc.board_points_m.push([b.x, b.y]);
            doc.pixels.push([px.x, px.y]);
        }
        for p in &grid {
            let dir = proj_pose.rotation().transpose() * rig.projector.local_direction(*p)?;
            let Some(b) = placement.hit(&proj_center, &dir) else {
                continue;
            };
            let cam = rig.project_to_camera(&placement.world(&b))?;
            if !rig.camera.contains(&cam) {
                continue;
            }
            doc.projected_camera_pixels.push([cam.x, cam.y]);
            doc.projector_pixels.push([p.x, p.y]);
        }
        views.push(doc);
    }
    Ok(ViewsDoc { views })
}

/// Reference rig with the camera's distortion removed, as used for the
/// closed-form calibration experiments.
pub fn pinhole_reference_rig() -> StereoRig {
    let mut rig = reference_rig();
    rig.camera = rig.camera.undistorted();
    rig
}
