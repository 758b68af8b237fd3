//! Length measurements, accuracy and precision metrics, plane fitting and
//! waviness analysis.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::MeasurementPlan;
use crate::reconstruct::{point_valid, PointMap};

/// 3D point at a real-valued camera pixel: bilinear over the four
/// surrounding entries, or, if any of them (with nonzero weight) is invalid,
/// the mean of the valid entries in a `(2·window+1)²` neighborhood.
pub fn point_at_pixel(map: &PointMap, pixel: Vector2<f64>, window: usize) -> Result<Vector3<f64>> {
    let (w, h) = map.dims();
    let (u, v) = (pixel.x, pixel.y);
    if !(u >= 0.0 && v >= 0.0 && u <= (w - 1) as f64 && v <= (h - 1) as f64) {
        return Err(Error::OutOfRange(format!(
            "pixel ({u}, {v}) outside {w}x{h} point map"
        )));
    }
    let (x0, y0) = (u.floor() as usize, v.floor() as usize);
    let (fx, fy) = (u - x0 as f64, v - y0 as f64);
    let mut acc = Vector3::zeros();
    let mut complete = true;
    for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            let wt = wx * wy;
            if wt == 0.0 {
                continue;
            }
            let p = map.get(x0 + dx, y0 + dy);
            if !point_valid(p) {
                complete = false;
                continue;
            }
            acc += Vector3::from(*p) * wt;
        }
    }
    if complete {
        return Ok(acc);
    }
    let (cx, cy) = ((u + 0.5).floor() as usize, (v + 0.5).floor() as usize);
    let mut sum = Vector3::zeros();
    let mut n = 0usize;
    for y in cy.saturating_sub(window)..=(cy + window).min(h - 1) {
        for x in cx.saturating_sub(window)..=(cx + window).min(w - 1) {
            let p = map.get(x, y);
            if point_valid(p) {
                sum += Vector3::from(*p);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::NoValidNeighbors(u, v));
    }
    Ok(sum / n as f64)
}

/// Mean absolute relative error in percent over `(actual, measured)` pairs.
pub fn accuracy_metric(lengths: &[(f64, f64)]) -> Result<f64> {
    if lengths.is_empty() {
        return Err(Error::Insufficient(
            "accuracy needs at least one length".into(),
        ));
    }
    let mut sum = 0.0;
    for &(actual, measured) in lengths {
        if !(actual > 0.0) || !measured.is_finite() {
            return Err(Error::OutOfRange(format!(
                "length pair ({actual}, {measured}) needs actual > 0 and finite measured"
            )));
        }
        sum += (actual - measured).abs() / actual * 100.0;
    }
    Ok(sum / lengths.len() as f64)
}

/// Per length, the mean absolute deviation of repeated samples from their
/// mean in percent of that mean; averaged over lengths.
pub fn precision_metric(samples: &[Vec<f64>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Insufficient(
            "precision needs at least one length".into(),
        ));
    }
    let mut total = 0.0;
    for (p, s) in samples.iter().enumerate() {
        total += relative_deviation_percent(s).map_err(|e| match e {
            Error::ZeroMean(_) => Error::ZeroMean(format!("#{p}")),
            other => other,
        })?;
    }
    Ok(total / samples.len() as f64)
}

fn relative_deviation_percent(s: &[f64]) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::Insufficient("a length has no samples".into()));
    }
    // Offset by the first sample so identical samples give their exact value.
    let mean = s[0] + s.iter().map(|x| x - s[0]).sum::<f64>() / s.len() as f64;
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::ZeroMean(String::new()));
    }
    Ok(s.iter()
        .map(|x| (mean - x).abs() / mean.abs() * 100.0)
        .sum::<f64>()
        / s.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSample {
    pub name: String,
    pub actual_m: f64,
    pub measured_m: f64,
}

pub fn measure_plan(map: &PointMap, plan: &MeasurementPlan) -> Result<Vec<LengthSample>> {
    plan.validate()?;
    let resolve = |name: &str| point_at_pixel(map, plan.pixel(name)?, 1);
    plan.lengths
        .iter()
        .map(|l| {
            let d = (resolve(&l.from)? - resolve(&l.to)?).norm();
            Ok(LengthSample {
                name: l.name.clone(),
                actual_m: l.actual_m,
                measured_m: d,
            })
        })
        .collect()
}

/// Plane `normal · p = offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub rms: f64,
}

impl PlaneFit {
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Total-least-squares plane through the centroid along the direction of
/// least variance.
pub fn fit_plane(points: &[Vector3<f64>]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::Insufficient(format!(
            "plane fit needs 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let c = points.iter().sum::<Vector3<f64>>() / n;
    let cov = points
        .iter()
        .map(|p| (p - c) * (p - c).transpose())
        .fold(Matrix3::zeros(), |a, b| a + b);
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (mid, max) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(max > 0.0) || mid <= max * 1e-20 {
        return Err(Error::Degenerate(
            "points are collinear or coincident".into(),
        ));
    }
    let normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into_owned().normalize();
    let offset = normal.dot(&c);
    let rms = (points
        .iter()
        .map(|p| (normal.dot(p) - offset).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PlaneFit {
        normal,
        offset,
        rms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waviness {
    /// Dominant residual period in projector pixels.
    pub period_px: f64,
    pub amplitude_m: f64,
    pub bins: usize,
}

/// Dominant periodic component of `(projector coordinate, residual)` samples.
///
/// Residuals are averaged in 1 px bins (empty bins are linearly
/// interpolated), then the strongest non-DC DFT coefficient `c_k` gives
/// period `N/k` and amplitude `2|c_k|/N`. The samples must span at least
/// four fringes of width `fringe_width`.
pub fn waviness(samples: &[(f64, f64)], fringe_width: f64) -> Result<Waviness> {
    let finite = || {
        samples
            .iter()
            .filter(|(x, r)| x.is_finite() && r.is_finite())
    };
    let lo = finite().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = finite().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo >= 4.0 * fringe_width) {
        return Err(Error::Insufficient(format!(
            "waviness needs a span of 4 fringes ({} px), data spans {:.1} px",
            4.0 * fringe_width,
            (hi - lo).max(0.0)
        )));
    }
    let start = lo.floor();
    let n = (hi.floor() - start) as usize + 1;
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (x, r) in finite() {
        let b = ((x.floor() - start) as usize).min(n - 1);
        sum[b] += r;
        count[b] += 1;
    }
    let known: Vec<(usize, f64)> = (0..n)
        .filter(|&b| count[b] > 0)
        .map(|b| (b, sum[b] / count[b] as f64))
        .collect();
    let mut bins = vec![0.0; n];
    for pair in known.windows(2) {
        let ((a, va), (b, vb)) = (pair[0], pair[1]);
        for (k, slot) in bins.iter_mut().enumerate().take(b + 1).skip(a) {
            let t = (k - a) as f64 / (b - a) as f64;
            *slot = va + (vb - va) * t;
        }
    }
    let (first, last) = (known[0], known[known.len() - 1]);
    bins[..first.0].fill(first.1);
    bins[last.0..].fill(last.1);

    let mut best = (0usize, 0.0f64);
    for k in 1..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in bins.iter().enumerate() {
            let a = TAU * (k * j % n) as f64 / n as f64;
            re += v * a.cos();
            im -= v * a.sin();
        }
        let mag = re.hypot(im);
        if mag > best.1 {
            best = (k, mag);
        }
    }
    if best.0 == 0 {
        return Ok(Waviness {
            period_px: f64::NAN,
            amplitude_m: 0.0,
            bins: n,
        });
    }
    Ok(Waviness {
        period_px: n as f64 / best.0 as f64,
        amplitude_m: 2.0 * best.1 / n as f64,
        bins: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthReport {
    pub name: String,
    pub actual_m: f64,
    /// One value per scan.
    pub measured_m: Vec<f64>,
    pub mean_m: f64,
    /// Mean over scans of the absolute relative error, percent.
    pub error_percent: f64,
    /// Mean absolute deviation from `mean_m`, percent.
    pub deviation_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy_percent: f64,
    pub precision_percent: f64,
    /// Number of (scan, length) pairs in the accuracy average.
    pub n: usize,
    /// Number of lengths in the precision average.
    pub vp: usize,
    /// Samples per length.
    pub vs_p: Vec<usize>,
    pub lengths: Vec<LengthReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane_rms_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waviness: Option<Waviness>,
}

impl EvaluationReport {
    /// Tab-separated per-length table with a header row.
    pub fn length_table(&self) -> String {
        let mut out = String::from("name\tactual_m\tmean_m\terror_percent\tdeviation_percent\n");
        for l in &self.lengths {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                l.name, l.actual_m, l.mean_m, l.error_percent, l.deviation_percent
            ));
        }
        out
    }
}

/// Measures `plan` on every scan and aggregates accuracy over all
/// (scan, length) pairs and precision over lengths.
pub fn evaluate_scans(maps: &[PointMap], plan: &MeasurementPlan) -> Result<EvaluationReport> {
    if maps.is_empty() {
        return Err(Error::Insufficient("no point maps to evaluate".into()));
    }
    let per_scan = maps
        .iter()
        .map(|m| measure_plan(m, plan))
        .collect::<Result<Vec<_>>>()?;
    let mut lengths = Vec::with_capacity(plan.lengths.len());
    let mut pairs = Vec::new();
    let mut samples = Vec::new();
    for (i, spec) in plan.lengths.iter().enumerate() {
        let measured: Vec<f64> = per_scan.iter().map(|s| s[i].measured_m).collect();
        let own: Vec<(f64, f64)> = measured.iter().map(|&m| (spec.actual_m, m)).collect();
        pairs.extend_from_slice(&own);
        lengths.push(LengthReport {
            name: spec.name.clone(),
            actual_m: spec.actual_m,
            mean_m: measured[0]
                + measured.iter().map(|x| x - measured[0]).sum::<f64>() / measured.len() as f64,
            error_percent: accuracy_metric(&own)?,
            deviation_percent: relative_deviation_percent(&measured)
                .map_err(|_| Error::ZeroMean(spec.name.clone()))?,
            measured_m: measured.clone(),
        });
        samples.push(measured);
    }
    Ok(EvaluationReport {
        accuracy_percent: accuracy_metric(&pairs)?,
        precision_percent: precision_metric(&samples)?,
        n: pairs.len(),
        vp: samples.len(),
        vs_p: samples.iter().map(Vec::len).collect(),
        lengths,
        plane_rms_m: None,
        waviness: None,
    })
}

/// `(Xp, signed distance)` for every valid pixel, against `plane`.
pub fn plane_residuals(
    map: &PointMap,
    xp: &crate::raster::RealMap,
    plane: &PlaneFit,
) -> Result<Vec<(f64, f64)>> {
    crate::raster::ensure_same_dims("plane residuals", &[map.dims(), xp.dims()])?;
    Ok(map
        .data()
        .iter()
        .zip(xp.data())
        .filter(|(p, x)| point_valid(p) && x.is_finite())
        .map(|(p, x)| (*x, plane.signed_distance(&Vector3::from(*p))))
        .collect())
}
