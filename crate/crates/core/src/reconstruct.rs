//! Dense triangulation of a correspondence map into per-pixel 3D points.

use nalgebra::{Vector2, Vector3};

use crate::decode::CorrespondenceMap;
use crate::error::Result;
use crate::geometry::StereoRig;
use crate::io::{Float3Image, PointCloud};
use crate::raster::{Mask, Raster, RealMap};

/// Per-camera-pixel 3D point (camera frame, meters); NaN components mark
/// invalid pixels.
pub type PointMap = Raster<[f64; 3]>;

pub const DEFAULT_MAX_GAP_M: f64 = 0.005;

const INVALID: [f64; 3] = [f64::NAN; 3];

pub fn point_valid(p: &[f64; 3]) -> bool {
    p.iter().all(|v| v.is_finite())
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub points: PointMap,
    /// Closest-approach distance of the two rays; NaN where not triangulated.
    pub gap: RealMap,
    pub valid: Mask,
}

impl Reconstruction {
    /// Valid points in row-major order, tagged with their camera pixel.
    pub fn cloud(&self) -> PointCloud {
        let (w, _) = self.points.dims();
        let mut points = Vec::new();
        let mut pixels = Vec::new();
        for (i, p) in self.points.data().iter().enumerate() {
            if self.valid.data()[i] {
                points.push(*p);
                pixels.push([(i % w) as f64, (i / w) as f64]);
            }
        }
        PointCloud {
            points,
            pixels: Some(pixels),
        }
    }

    pub fn valid_points(&self) -> Vec<Vector3<f64>> {
        self.points
            .data()
            .iter()
            .zip(self.valid.data())
            .filter(|(_, ok)| **ok)
            .map(|(p, _)| Vector3::from(*p))
            .collect()
    }
}

/// Triangulates every valid pixel; points whose rays pass farther apart than
/// `max_gap_m`, parallel rays and failed undistortions are marked invalid.
pub fn triangulate_map(
    rig: &StereoRig,
    corr: &CorrespondenceMap,
    max_gap_m: f64,
) -> Result<Reconstruction> {
    let (w, h) = corr.xp.dims();
    let solved: Raster<([f64; 3], f64)> = Raster::par_from_fn(w, h, |x, y| {
        let Some((u, v)) = corr.at(x, y) else {
            return (INVALID, f64::NAN);
        };
        match rig.triangulate(Vector2::new(x as f64, y as f64), Vector2::new(u, v)) {
            Ok(t) if t.point.iter().all(|c| c.is_finite()) => {
                ([t.point.x, t.point.y, t.point.z], t.gap)
            }
            _ => (INVALID, f64::NAN),
        }
    });
    let gap = solved.map(|s| s.1);
    let valid = solved.map(|s| point_valid(&s.0) && s.1 <= max_gap_m);
    let points = Raster::from_fn(w, h, |x, y| {
        if *valid.get(x, y) {
            solved.get(x, y).0
        } else {
            INVALID
        }
    });
    Ok(Reconstruction { points, gap, valid })
}

pub fn point_map_to_f32(map: &PointMap) -> Float3Image {
    map.map(|p| p.map(|v| v as f32))
}

pub fn point_map_from_f32(map: &Float3Image) -> PointMap {
    map.map(|p| {
        let q = p.map(|v| v as f64);
        if point_valid(&q) {
            q
        } else {
            INVALID
        }
    })
}
