//! Per-pixel ray casting of a projector-lit scene as seen by the camera.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::{intersect_scene, occluded, SceneSpec};
use crate::error::{Error, Result};
use crate::geometry::StereoRig;
use crate::io::{LengthSpec, MeasurementPlan};
use crate::pattern::PatternStack;
use crate::raster::{GrayImage, Mask, Raster, RealMap};

/// Radiance per unit albedo for a full-white projector pixel, leaving headroom
/// below 255 for ambient light and noise.
pub const RADIANCE_SCALE: f64 = 230.0 / 255.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Box-blur radius (projector pixels) applied to every pattern; 0 = off.
    pub blur_radius: usize,
}

/// What a camera pixel sees, independent of the projected pattern.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct PixelSample {
    /// Camera-frame depth of the first hit; NaN on a miss.
    depth: f64,
    albedo: f64,
    /// Projector coordinates of the hit when it receives projector light.
    lit_at: Option<[f64; 2]>,
}

/// Pattern-independent ray-cast of the scene, shared by every frame.
#[derive(Debug, Clone)]
pub struct ScanGeometry {
    samples: Raster<PixelSample>,
    proj_size: (u32, u32),
}

impl ScanGeometry {
    pub fn compute(rig: &StereoRig, scene: &SceneSpec) -> Result<Self> {
        scene.validate()?;
        let (w, h) = (rig.camera.width as usize, rig.camera.height as usize);
        let proj_center = rig.projector_center();
        let samples = Raster::par_from_fn(w, h, |x, y| {
            let Ok(ray) = rig.camera_ray(Vector2::new(x as f64, y as f64)) else {
                return PixelSample {
                    depth: f64::NAN,
                    ..Default::default()
                };
            };
            let Some(hit) = intersect_scene(&ray, scene) else {
                return PixelSample {
                    depth: f64::NAN,
                    ..Default::default()
                };
            };
            let lit_at = rig
                .project_to_projector(&hit.point)
                .ok()
                .filter(|uv| rig.projector.contains(uv))
                .filter(|_| !(scene.shadows && occluded(&hit.point, &proj_center, scene)))
                .map(|uv| [uv.x, uv.y]);
            PixelSample {
                depth: hit.point.z,
                albedo: hit.albedo,
                lit_at,
            }
        });
        Ok(ScanGeometry {
            samples,
            proj_size: (rig.projector.width, rig.projector.height),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.samples.dims()
    }

    /// Renders one frame. `frame` selects the noise substream.
    pub fn render(
        &self,
        scene: &SceneSpec,
        pattern: &GrayImage,
        frame: u32,
        opts: &RenderOptions,
    ) -> Result<GrayImage> {
        let (pw, ph) = self.proj_size;
        if pattern.dims() != (pw as usize, ph as usize) {
            return Err(Error::DimensionMismatch(format!(
                "pattern is {}x{}, projector is {pw}x{ph}",
                pattern.width(),
                pattern.height()
            )));
        }
        let field = box_blur(&pattern.map(|&v| v as f64), opts.blur_radius);
        let gamma = scene.projector_gamma;
        let noise = (scene.noise_sigma > 0.0)
            .then(|| Normal::new(0.0, scene.noise_sigma))
            .transpose()
            .map_err(|e| Error::OutOfRange(format!("noise sigma: {e}")))?;
        let (w, h) = self.dims();
        let mut data = vec![0u8; w * h];
        data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(scene.seed, frame, y as u32));
            for (x, out) in row.iter_mut().enumerate() {
                let s = self.samples.get(x, y);
                let mut v = scene.ambient;
                if let Some([u, pv]) = s.lit_at {
                    let p = bilinear(&field, u, pv) / 255.0;
                    let radiance = 255.0 * p.max(0.0).powf(gamma);
                    v += s.albedo * RADIANCE_SCALE * radiance;
                }
                if let Some(n) = &noise {
                    v += n.sample(&mut rng);
                }
                *out = v.round().clamp(0.0, 255.0) as u8;
            }
        });
        Raster::from_vec(w, h, data)
    }
}

fn noise_seed(seed: u64, frame: u32, row: u32) -> u64 {
    let mut z = splitmix(seed);
    z = splitmix(z ^ frame as u64);
    splitmix(z ^ ((row as u64) << 32))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Bilinear sample; `(u, v)` must lie in `[0, w−1] × [0, h−1]`.
fn bilinear(img: &RealMap, u: f64, v: f64) -> f64 {
    let (w, h) = img.dims();
    let x0 = (u.floor() as usize).min(w.saturating_sub(2));
    let y0 = (v.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let (fx, fy) = (u - x0 as f64, v - y0 as f64);
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

fn box_blur(img: &RealMap, r: usize) -> RealMap {
    if r == 0 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let mean = |vals: &mut dyn Iterator<Item = f64>| {
        let (s, n) = vals.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        s / n as f64
    };
    let horiz = RealMap::from_fn(w, h, |x, y| {
        mean(&mut (x.saturating_sub(r)..=(x + r).min(w - 1)).map(|i| *img.get(i, y)))
    });
    RealMap::from_fn(w, h, |x, y| {
        mean(&mut (y.saturating_sub(r)..=(y + r).min(h - 1)).map(|j| *horiz.get(x, j)))
    })
}

/// Renders a single capture of `pattern`.
pub fn render_capture(
    rig: &StereoRig,
    scene: &SceneSpec,
    pattern: &GrayImage,
    opts: &RenderOptions,
) -> Result<GrayImage> {
    ScanGeometry::compute(rig, scene)?.render(scene, pattern, 0, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerTruth {
    pub i: u32,
    pub j: u32,
    pub world_m: [f64; 3],
    /// Camera pixel; absent when the corner does not project into the image.
    pub pixel: Option<[f64; 2]>,
}

/// Exact reference values for a simulated scan.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Camera-frame depth (m) of the first surface; NaN where nothing is hit.
    pub depth: RealMap,
    /// True projector coordinates of lit pixels; NaN elsewhere.
    pub xp: RealMap,
    pub yp: RealMap,
    pub lit: Mask,
    pub corners: Vec<CornerTruth>,
}

impl GroundTruth {
    pub fn compute(geometry: &ScanGeometry, rig: &StereoRig, scene: &SceneSpec) -> Self {
        let s = &geometry.samples;
        let (w, h) = s.dims();
        let coord =
            |k: usize| RealMap::from_fn(w, h, |x, y| s.get(x, y).lit_at.map_or(f64::NAN, |c| c[k]));
        let corners = corner_truth(rig, scene);
        GroundTruth {
            depth: s.map(|v| v.depth),
            xp: coord(0),
            yp: coord(1),
            lit: s.map(|v| v.lit_at.is_some()),
            corners,
        }
    }

    pub fn corner(&self, i: u32, j: u32) -> Option<&CornerTruth> {
        self.corners.iter().find(|c| c.i == i && c.j == j)
    }

    pub fn plan(&self, labeled: &[(&str, (u32, u32))]) -> Result<MeasurementPlan> {
        plan_from_corners(&self.corners, labeled)
    }
}

/// Every inner board corner with its camera pixel.
pub fn corner_truth(rig: &StereoRig, scene: &SceneSpec) -> Vec<CornerTruth> {
    scene
        .board
        .inner_corners()
        .into_iter()
        .map(|(i, j)| {
            let p = scene.board.corner(i, j);
            let pixel = rig
                .project_to_camera(&p)
                .ok()
                .filter(|px| rig.camera.contains(px))
                .map(|px| [px.x, px.y]);
            CornerTruth {
                i,
                j,
                world_m: [p.x, p.y, p.z],
                pixel,
            }
        })
        .collect()
}

/// Plan over labeled board corners with the length between each pair of
/// consecutive labels (closing the loop) plus, for four labels, both
/// diagonals: AB, BC, CD, DA, AC, BD for A–D.
pub fn plan_from_corners(
    corners: &[CornerTruth],
    labeled: &[(&str, (u32, u32))],
) -> Result<MeasurementPlan> {
    let mut points = std::collections::BTreeMap::new();
    let mut world = Vec::new();
    for (name, (i, j)) in labeled {
        let c = corners
            .iter()
            .find(|c| c.i == *i && c.j == *j)
            .ok_or_else(|| Error::UnknownPoint(format!("{name} = corner ({i}, {j})")))?;
        let px = c
            .pixel
            .ok_or_else(|| Error::OutOfRange(format!("corner {name} is outside the image")))?;
        points.insert(name.to_string(), px);
        world.push(Vector3::from(c.world_m));
    }
    let n = labeled.len();
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|k| (k, (k + 1) % n)).collect();
    if n == 4 {
        pairs.push((0, 2));
        pairs.push((1, 3));
    }
    let lengths = pairs
        .into_iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| LengthSpec {
            name: format!("{}{}", labeled[a].0, labeled[b].0),
            from: labeled[a].0.to_string(),
            to: labeled[b].0.to_string(),
            actual_m: (world[a] - world[b]).norm(),
        })
        .collect();
    let plan = MeasurementPlan { points, lengths };
    plan.validate()?;
    Ok(plan)
}

#[derive(Debug, Clone)]
pub struct ScanOutput {
    /// One capture per manifest entry, in manifest order.
    pub captures: Vec<GrayImage>,
    pub truth: GroundTruth,
}

/// Renders every pattern of `stack` with shared geometry.
pub fn render_scan(
    rig: &StereoRig,
    scene: &SceneSpec,
    stack: &PatternStack,
    opts: &RenderOptions,
) -> Result<ScanOutput> {
    stack.manifest.validate()?;
    let geometry = ScanGeometry::compute(rig, scene)?;
    let captures = stack
        .images
        .iter()
        .enumerate()
        .map(|(k, p)| geometry.render(scene, p, k as u32, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanOutput {
        captures,
        truth: GroundTruth::compute(&geometry, rig, scene),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, SensorModel};
    use crate::sim::scene::{BoardSpec, SphereSpec};

    fn rig() -> StereoRig {
        StereoRig {
            camera: SensorModel::pinhole(64, 48, 60.0, 60.0, 32.0, 24.0),
            projector: SensorModel::pinhole(64, 48, 60.0, 60.0, 32.0, 24.0),
            projector_to_camera: Pose::from_translation(Vector3::new(0.1, 0.0, 0.0)),
        }
    }

    fn scene() -> SceneSpec {
        SceneSpec {
            board: BoardSpec {
                origin_m: [-2.0, -2.0, 2.0],
                x_axis: [1.0, 0.0, 0.0],
                y_axis: [0.0, 1.0, 0.0],
                squares_x: 1,
                squares_y: 1,
                square_size_m: 4.0,
                albedo_light: 0.9,
                albedo_dark: 0.9,
            },
            spheres: vec![],
            ambient: 10.0,
            projector_gamma: 1.0,
            noise_sigma: 0.0,
            seed: 7,
            shadows: false,
        }
    }

    #[test]
    fn white_pattern_intensity() {
        let white = GrayImage::filled(64, 48, 255);
        let img = render_capture(&rig(), &scene(), &white, &RenderOptions::default()).unwrap();
        assert_eq!(*img.get(32, 24), 217);
    }

    #[test]
    fn black_pattern_is_ambient() {
        let black = GrayImage::filled(64, 48, 0);
        let img = render_capture(&rig(), &scene(), &black, &RenderOptions::default()).unwrap();
        assert!(img.data().iter().all(|&v| v == 10));
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let mut s = scene();
        s.noise_sigma = 3.0;
        let pat = GrayImage::from_fn(64, 48, |x, _| (x * 4) as u8);
        let a = render_capture(&rig(), &s, &pat, &RenderOptions::default()).unwrap();
        let b = render_capture(&rig(), &s, &pat, &RenderOptions::default()).unwrap();
        assert_eq!(a, b);
        s.seed += 1;
        let c = render_capture(&rig(), &s, &pat, &RenderOptions::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pattern_size_checked() {
        let bad = GrayImage::filled(10, 10, 0);
        assert!(render_capture(&rig(), &scene(), &bad, &RenderOptions::default()).is_err());
    }

    #[test]
    fn shadowed_pixels_get_ambient() {
        let mut s = scene();
        s.shadows = true;
        // Sits between the board and the projector but off the camera's
        // central line of sight.
        s.spheres.push(SphereSpec {
            center_m: [0.1, 0.0, 0.3],
            radius_m: 0.02,
            albedo: 0.5,
        });
        let g = ScanGeometry::compute(&rig(), &s).unwrap();
        let truth = GroundTruth::compute(&g, &rig(), &s);
        let shadowed = (0..64)
            .flat_map(|x| (0..48).map(move |y| (x, y)))
            .filter(|&(x, y)| truth.depth.get(x, y) > &1.9 && !truth.lit.get(x, y))
            .count();
        assert!(shadowed > 0);
        let white = GrayImage::filled(64, 48, 255);
        let img = g.render(&s, &white, 0, &RenderOptions::default()).unwrap();
        for y in 0..48 {
            for x in 0..64 {
                if !truth.lit.get(x, y) {
                    assert_eq!(*img.get(x, y), 10);
                }
            }
        }
    }

    #[test]
    fn bilinear_is_exact_on_ramps() {
        let ramp = RealMap::from_fn(5, 4, |x, y| 2.0 * x as f64 + 3.0 * y as f64);
        assert!((bilinear(&ramp, 2.25, 1.5) - (4.5 + 4.5)).abs() < 1e-12);
        assert!((bilinear(&ramp, 4.0, 3.0) - 17.0).abs() < 1e-12);
    }
}
