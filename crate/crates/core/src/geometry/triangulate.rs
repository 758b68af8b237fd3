use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Rays with `|d1·d2|` at or above this are treated as parallel.
pub const PARALLEL_COS: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    /// Unit length.
    pub direction: Vector3<f64>,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Self {
        Ray {
            origin,
            direction: direction.normalize(),
        }
    }

    #[inline]
    pub fn at(&self, s: f64) -> Vector3<f64> {
        self.origin + self.direction * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: Vector3<f64>,
    /// Distance between the rays at closest approach (m).
    pub gap: f64,
}

/// Midpoint of the common perpendicular of two rays.
///
/// The rays are put into a canonical order before solving so the result is
/// bit-identical under argument swap.
pub fn triangulate_midpoint(a: &Ray, b: &Ray) -> Result<Triangulation> {
    let (r1, r2) = if canonical_less(b, a) { (b, a) } else { (a, b) };
    let d1 = r1.direction;
    let d2 = r2.direction;
    let w0 = r1.origin - r2.origin;
    let aa = d1.dot(&d1);
    let bb = d1.dot(&d2);
    let cc = d2.dot(&d2);
    let dd = d1.dot(&w0);
    let ee = d2.dot(&w0);
    if bb.abs() >= PARALLEL_COS * (aa * cc).sqrt() {
        return Err(Error::ParallelRays);
    }
    let denom = aa * cc - bb * bb;
    let s = (bb * ee - cc * dd) / denom;
    let t = (aa * ee - bb * dd) / denom;
    let p1 = r1.at(s);
    let p2 = r2.at(t);
    Ok(Triangulation {
        point: (p1 + p2) * 0.5,
        gap: (p1 - p2).norm(),
    })
}

fn canonical_less(a: &Ray, b: &Ray) -> bool {
    let ka = a.origin.iter().chain(a.direction.iter());
    let kb = b.origin.iter().chain(b.direction.iter());
    for (x, y) in ka.zip(kb) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}
