//! Plane-to-plane projective maps estimated with the normalized DLT.

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Smallest accepted ratio `s_min / s_max` of a homography matrix.
const RANK_TOL: f64 = 1e-12;
/// Ratio of second-smallest to largest singular value of the design matrix
/// below which the solution is not unique.
const NULLSPACE_TOL: f64 = 1e-10;
/// Twice the triangle area (in Hartley-normalized units) under which three
/// points count as collinear.
const COLLINEAR_TOL: f64 = 1e-9;

/// 3×3 projective map, normalized so `h33 = 1` whenever `h33 ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::Degenerate("non-finite homography".into()));
        }
        let sv = m.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smax > 0.0) || smin / smax < RANK_TOL {
            return Err(Error::Degenerate("homography is rank deficient".into()));
        }
        let h33 = m[(2, 2)];
        let m = if h33.abs() > 1e-15 * smax {
            m / h33
        } else {
            m / smax
        };
        Ok(Homography(m))
    }

    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let v = self.0 * Vector3::new(p.x, p.y, 1.0);
        Vector2::new(v.x / v.z, v.y / v.z)
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self
            .0
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("homography is singular".into()))?;
        Homography::new(inv)
    }

    /// Max over pairs of `max(|H s − t|, |H⁻¹ t − s|)`.
    pub fn symmetric_transfer_error(&self, pairs: &[(Vector2<f64>, Vector2<f64>)]) -> Result<f64> {
        let inv = self.inverse()?;
        Ok(pairs
            .iter()
            .map(|(s, t)| (self.apply(s) - t).norm().max((inv.apply(t) - s).norm()))
            .fold(0.0, f64::max))
    }
}

/// Estimates `H` with `target ~ H · source` from at least four pairs.
pub fn estimate_homography_dlt(pairs: &[(Vector2<f64>, Vector2<f64>)]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(Error::Insufficient(format!(
            "homography needs at least 4 pairs, got {}",
            pairs.len()
        )));
    }
    let src: Vec<_> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<_> = pairs.iter().map(|p| p.1).collect();
    let (ns, ts) = hartley_normalize(&src)?;
    let (nd, td) = hartley_normalize(&dst)?;
    check_configuration(&ns, "source")?;
    check_configuration(&nd, "target")?;

    // Zero rows pad the four-point case to a square system so the full V is available.
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in ns.iter().zip(&nd).enumerate() {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * i, j)] = r0[j];
            a[(2 * i + 1, j)] = r1[j];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let smax = svd.singular_values[order[0]];
    let second_smallest = svd.singular_values[order[order.len() - 2]];
    if !(smax > 0.0) || second_smallest / smax < NULLSPACE_TOL {
        return Err(Error::Degenerate(
            "homography solution is not unique".into(),
        ));
    }
    let h = vt.row(order[order.len() - 1]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("normalization not invertible".into()))?;
    Homography::new(td_inv * hn * ts)
}

/// Translates to the centroid and scales so the mean distance is √2.
pub(crate) fn hartley_normalize(pts: &[Vector2<f64>]) -> Result<(Vec<Vector2<f64>>, Matrix3<f64>)> {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let mean_dist = pts.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let t = Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0);
    Ok((pts.iter().map(|p| (p - c) * s).collect(), t))
}

/// All points collinear, or (for the minimal four-point case) any three.
fn check_configuration(pts: &[Vector2<f64>], which: &str) -> Result<()> {
    let area2 =
        |a: &Vector2<f64>, b: &Vector2<f64>, c: &Vector2<f64>| ((b - a).perp(&(c - a))).abs();
    if pts.len() == 4 {
        for skip in 0..4 {
            let tri: Vec<_> = (0..4).filter(|&i| i != skip).map(|i| &pts[i]).collect();
            if area2(tri[0], tri[1], tri[2]) < COLLINEAR_TOL {
                return Err(Error::Degenerate(format!(
                    "three {which} points are collinear"
                )));
            }
        }
        return Ok(());
    }
    // Farthest pair, then the point farthest from that line.
    let a = &pts[0];
    let b = pts
        .iter()
        .max_by(|p, q| (*p - a).norm().total_cmp(&(*q - a).norm()))
        .unwrap();
    let spread = pts.iter().map(|p| area2(a, b, p)).fold(0.0, f64::max);
    if spread < COLLINEAR_TOL {
        return Err(Error::Degenerate(format!("{which} points are collinear")));
    }
    Ok(())
}
