use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Ray;

const AXIS_TOL: f64 = 1e-9;
const HIT_EPS: f64 = 1e-9;

/// Planar checkerboard spanning `origin + a·x_axis + b·y_axis` for
/// `a ∈ [0, squares_x·s]`, `b ∈ [0, squares_y·s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardSpec {
    pub origin_m: [f64; 3],
    pub x_axis: [f64; 3],
    pub y_axis: [f64; 3],
    pub squares_x: u32,
    pub squares_y: u32,
    pub square_size_m: f64,
    pub albedo_light: f64,
    pub albedo_dark: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub center_m: [f64; 3],
    pub radius_m: f64,
    pub albedo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub board: BoardSpec,
    #[serde(default)]
    pub spheres: Vec<SphereSpec>,
    /// Gray levels added everywhere.
    pub ambient: f64,
    pub projector_gamma: f64,
    /// Standard deviation of per-pixel Gaussian noise (gray levels).
    pub noise_sigma: f64,
    pub seed: u64,
    pub shadows: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub albedo: f64,
}

fn albedo_ok(a: f64) -> bool {
    (0.0..=1.0).contains(&a)
}

impl BoardSpec {
    pub fn origin(&self) -> Vector3<f64> {
        Vector3::from(self.origin_m)
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        Vector3::from(self.x_axis)
    }

    pub fn y_axis(&self) -> Vector3<f64> {
        Vector3::from(self.y_axis)
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.x_axis().cross(&self.y_axis())
    }

    pub fn size_m(&self) -> (f64, f64) {
        (
            self.squares_x as f64 * self.square_size_m,
            self.squares_y as f64 * self.square_size_m,
        )
    }

    /// World point of board coordinates `(a, b)` in meters.
    pub fn point(&self, a: f64, b: f64) -> Vector3<f64> {
        self.origin() + self.x_axis() * a + self.y_axis() * b
    }

    /// Inner corner `(i, j)`, `1 ≤ i < squares_x`, `1 ≤ j < squares_y`.
    pub fn corner(&self, i: u32, j: u32) -> Vector3<f64> {
        self.point(i as f64 * self.square_size_m, j as f64 * self.square_size_m)
    }

    pub fn inner_corners(&self) -> Vec<(u32, u32)> {
        (1..self.squares_y)
            .flat_map(|j| (1..self.squares_x).map(move |i| (i, j)))
            .collect()
    }

    pub fn albedo_at(&self, a: f64, b: f64) -> f64 {
        let i = (a / self.square_size_m).floor() as i64;
        let j = (b / self.square_size_m).floor() as i64;
        if (i + j).rem_euclid(2) == 0 {
            self.albedo_light
        } else {
            self.albedo_dark
        }
    }

    fn validate(&self) -> Result<()> {
        let (x, y) = (self.x_axis(), self.y_axis());
        let dev = (x.norm() - 1.0)
            .abs()
            .max((y.norm() - 1.0).abs())
            .max(x.dot(&y).abs());
        if !(dev <= AXIS_TOL) {
            return Err(Error::OutOfRange(format!(
                "board axes not orthonormal (deviation {dev:.3e})"
            )));
        }
        if !self.origin().iter().all(|v| v.is_finite()) {
            return Err(Error::OutOfRange("board origin not finite".into()));
        }
        if self.squares_x == 0 || self.squares_y == 0 || !(self.square_size_m > 0.0) {
            return Err(Error::OutOfRange(
                "board needs squares and a positive square size".into(),
            ));
        }
        if !albedo_ok(self.albedo_light) || !albedo_ok(self.albedo_dark) {
            return Err(Error::OutOfRange("board albedo outside [0, 1]".into()));
        }
        Ok(())
    }

    fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let n = self.normal();
        let denom = n.dot(&ray.direction);
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = n.dot(&(self.origin() - ray.origin)) / denom;
        if !(t > HIT_EPS) {
            return None;
        }
        let p = ray.at(t);
        let rel = p - self.origin();
        let (a, b) = (rel.dot(&self.x_axis()), rel.dot(&self.y_axis()));
        let (w, h) = self.size_m();
        if !(0.0..=w).contains(&a) || !(0.0..=h).contains(&b) {
            return None;
        }
        Some(Hit {
            t,
            point: p,
            normal: if denom < 0.0 { n } else { -n },
            albedo: self.albedo_at(a, b),
        })
    }
}

impl SphereSpec {
    fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let c = Vector3::from(self.center_m);
        let oc = ray.origin - c;
        let b = oc.dot(&ray.direction);
        let disc = b * b - (oc.norm_squared() - self.radius_m * self.radius_m);
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let t = [-b - sq, -b + sq].into_iter().find(|&t| t > HIT_EPS)?;
        let p = ray.at(t);
        Some(Hit {
            t,
            point: p,
            normal: (p - c) / self.radius_m,
            albedo: self.albedo,
        })
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.board.validate()?;
        for s in &self.spheres {
            if !(s.radius_m > 0.0) || !s.center_m.iter().all(|v| v.is_finite()) {
                return Err(Error::OutOfRange("sphere radius must be positive".into()));
            }
            if !albedo_ok(s.albedo) {
                return Err(Error::OutOfRange("sphere albedo outside [0, 1]".into()));
            }
        }
        if !(0.0..=255.0).contains(&self.ambient) {
            return Err(Error::OutOfRange(format!(
                "ambient {} outside [0, 255]",
                self.ambient
            )));
        }
        if !(self.projector_gamma > 0.0) || !self.projector_gamma.is_finite() {
            return Err(Error::OutOfRange("projector gamma must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::OutOfRange("noise sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Nearest intersection of `ray` with the board or any sphere.
pub fn intersect_scene(ray: &Ray, scene: &SceneSpec) -> Option<Hit> {
    std::iter::once(scene.board.intersect(ray))
        .chain(scene.spheres.iter().map(|s| s.intersect(ray)))
        .flatten()
        .min_by(|a, b| a.t.total_cmp(&b.t))
}

/// True when something blocks the segment from `p` to `light`.
pub fn occluded(p: &Vector3<f64>, light: &Vector3<f64>, scene: &SceneSpec) -> bool {
    let to_light = light - p;
    let dist = to_light.norm();
    let ray = Ray::new(*p, to_light);
    let start = Ray {
        origin: ray.at(1e-7),
        direction: ray.direction,
    };
    intersect_scene(&start, scene).is_some_and(|h| h.t < dist - 1e-7)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn board_at(z: f64) -> SceneSpec {
        SceneSpec {
            board: BoardSpec {
                origin_m: [-0.3, -0.24, z],
                x_axis: [1.0, 0.0, 0.0],
                y_axis: [0.0, 1.0, 0.0],
                squares_x: 10,
                squares_y: 8,
                square_size_m: 0.06,
                albedo_light: 0.9,
                albedo_dark: 0.5,
            },
            spheres: vec![],
            ambient: 10.0,
            projector_gamma: 1.0,
            noise_sigma: 0.0,
            seed: 1,
            shadows: false,
        }
    }

    #[test]
    fn board_hit() {
        let scene = board_at(2.2);
        let hit = intersect_scene(&Ray::new(Vector3::zeros(), Vector3::z()), &scene).unwrap();
        assert!((hit.point - Vector3::new(0.0, 0.0, 2.2)).norm() < 1e-12);
        assert_eq!(hit.normal, Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn miss() {
        let scene = board_at(2.2);
        assert!(intersect_scene(&Ray::new(Vector3::zeros(), -Vector3::z()), &scene).is_none());
        assert!(intersect_scene(
            &Ray::new(Vector3::zeros(), Vector3::new(1.0, 0.0, 1.0)),
            &scene
        )
        .is_none());
    }

    #[test]
    fn sphere_hit() {
        let mut scene = board_at(20.0);
        scene.spheres.push(SphereSpec {
            center_m: [0.0, 0.0, 5.0],
            radius_m: 1.0,
            albedo: 0.7,
        });
        let hit = intersect_scene(&Ray::new(Vector3::zeros(), Vector3::z()), &scene).unwrap();
        assert!((hit.point - Vector3::new(0.0, 0.0, 4.0)).norm() < 1e-12);
        assert_eq!(hit.albedo, 0.7);
    }

    #[test]
    fn checker_pattern() {
        let b = board_at(2.0).board;
        assert_eq!(b.albedo_at(0.01, 0.01), 0.9);
        assert_eq!(b.albedo_at(0.07, 0.01), 0.5);
        assert_eq!(b.albedo_at(0.07, 0.07), 0.9);
        assert_eq!(b.inner_corners().len(), 9 * 7);
    }

    #[test]
    fn shadow_query() {
        let mut scene = board_at(2.0);
        scene.spheres.push(SphereSpec {
            center_m: [0.0, 0.0, 1.0],
            radius_m: 0.1,
            albedo: 0.5,
        });
        let p = Vector3::new(0.0, 0.0, 2.0);
        assert!(occluded(&p, &Vector3::zeros(), &scene));
        assert!(!occluded(&p, &Vector3::new(1.0, 0.0, 0.0), &scene));
    }

    #[test]
    fn validation() {
        let mut s = board_at(2.0);
        s.board.x_axis = [1.0, 0.1, 0.0];
        assert!(s.validate().is_err());
        let mut s = board_at(2.0);
        s.projector_gamma = 0.0;
        assert!(s.validate().is_err());
        let mut s = board_at(2.0);
        s.spheres.push(SphereSpec {
            center_m: [0.0; 3],
            radius_m: -1.0,
            albedo: 0.5,
        });
        assert!(s.validate().is_err());
        assert!(board_at(2.0).validate().is_ok());
    }
}
