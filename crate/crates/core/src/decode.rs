//! Capture stack → wrapped phase → period codes → unwrapped phase →
//! camera-to-projector correspondence.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::pattern::{gray_decode, CodeKind, Orientation, PatternManifest, PatternSpec, Role};
use crate::raster::{ensure_same_dims, GrayImage, Mask, Raster, RealMap};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Per-pixel period index; `None` where undecodable.
pub type CodeMap = Raster<Option<u32>>;

/// Three-step arctangent phase in `(−π, π]`; NaN where both arguments vanish.
pub fn wrapped_phase(i1: &GrayImage, i2: &GrayImage, i3: &GrayImage) -> Result<RealMap> {
    ensure_same_dims("wrapped_phase", &[i1.dims(), i2.dims(), i3.dims()])?;
    let (w, h) = i1.dims();
    Ok(RealMap::par_from_fn(w, h, |x, y| {
        phase_from_triplet(
            *i1.get(x, y) as f64,
            *i2.get(x, y) as f64,
            *i3.get(x, y) as f64,
        )
    }))
}

#[inline]
pub fn phase_from_triplet(i1: f64, i2: f64, i3: f64) -> f64 {
    let num = SQRT_3 * (i1 - i3);
    let den = 2.0 * i2 - i1 - i3;
    if num == 0.0 && den == 0.0 {
        return f64::NAN;
    }
    let phi = num.atan2(den);
    if phi == -PI {
        PI
    } else {
        phi
    }
}

/// Estimated modulation amplitude per pixel and the mask it implies.
#[derive(Debug, Clone)]
pub struct ModulationMap {
    pub amplitude: RealMap,
    pub m_min: f64,
    pub mask: Mask,
}

/// `M = ⅓·√(3(I₁−I₃)² + (2I₂−I₁−I₃)²)`; a pixel is valid iff `M ≥ m_min`
/// and `M > 0`.
pub fn modulation_and_mask(
    i1: &GrayImage,
    i2: &GrayImage,
    i3: &GrayImage,
    m_min: f64,
) -> Result<ModulationMap> {
    ensure_same_dims("modulation_and_mask", &[i1.dims(), i2.dims(), i3.dims()])?;
    let (w, h) = i1.dims();
    let amplitude = RealMap::par_from_fn(w, h, |x, y| {
        let (a, b, c) = (
            *i1.get(x, y) as f64,
            *i2.get(x, y) as f64,
            *i3.get(x, y) as f64,
        );
        let s = a - c;
        let d = 2.0 * b - a - c;
        (3.0 * s * s + d * d).sqrt() / 3.0
    });
    let mask = amplitude.map(|&m| m > 0.0 && m >= m_min);
    Ok(ModulationMap {
        amplitude,
        m_min,
        mask,
    })
}

/// Mean of the three sinusoid captures, used as the per-pixel code threshold.
pub fn sinusoid_mean(i1: &GrayImage, i2: &GrayImage, i3: &GrayImage) -> Result<RealMap> {
    ensure_same_dims("sinusoid_mean", &[i1.dims(), i2.dims(), i3.dims()])?;
    let (w, h) = i1.dims();
    Ok(RealMap::from_fn(w, h, |x, y| {
        (*i1.get(x, y) as f64 + *i2.get(x, y) as f64 + *i3.get(x, y) as f64) / 3.0
    }))
}

/// Thresholds each bit-plane (MSB first; intensity ≥ threshold reads as 1)
/// and converts the assembled codeword to a period index.
pub fn decode_codewords(
    planes: &[GrayImage],
    threshold: &RealMap,
    kind: CodeKind,
) -> Result<CodeMap> {
    if planes.len() > 31 {
        return Err(Error::OutOfRange(format!(
            "{} bit-planes exceed the 31-bit code limit",
            planes.len()
        )));
    }
    let mut dims: Vec<_> = planes.iter().map(|p| p.dims()).collect();
    dims.push(threshold.dims());
    ensure_same_dims("decode_codewords", &dims)?;
    let (w, h) = threshold.dims();
    Ok(CodeMap::par_from_fn(w, h, |x, y| {
        let t = *threshold.get(x, y);
        if !t.is_finite() {
            return None;
        }
        let word = planes.iter().fold(0u32, |acc, p| {
            (acc << 1) | u32::from(*p.get(x, y) as f64 >= t)
        });
        Some(match kind {
            CodeKind::Gray => gray_decode(word),
            CodeKind::PlainBinary => word,
        })
    }))
}

/// `δ = φ′ + 2π·C` with `φ′` the wrapped phase moved into `[0, 2π)`.
pub fn unwrap(wrapped: &RealMap, codes: &CodeMap) -> Result<RealMap> {
    ensure_same_dims("unwrap", &[wrapped.dims(), codes.dims()])?;
    let (w, h) = wrapped.dims();
    Ok(RealMap::from_fn(w, h, |x, y| {
        let phi = *wrapped.get(x, y);
        match codes.get(x, y) {
            Some(c) if phi.is_finite() => to_unit_turn(phi) + TAU * *c as f64,
            _ => f64::NAN,
        }
    }))
}

/// Maps a phase in `(−π, π]` into `[0, 2π)`.
#[inline]
pub fn to_unit_turn(phi: f64) -> f64 {
    let p = if phi < 0.0 { phi + TAU } else { phi };
    // −tiny + 2π rounds to 2π itself.
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Median of valid codes in a `(2r+1)²` window; invalid pixels are kept.
pub fn median_filter_codes(codes: &CodeMap, radius: usize) -> CodeMap {
    if radius == 0 {
        return codes.clone();
    }
    let (w, h) = codes.dims();
    CodeMap::par_from_fn(w, h, |x, y| {
        codes.get(x, y).as_ref()?;
        let mut window: Vec<u32> = neighborhood(w, h, x, y, radius)
            .filter_map(|(nx, ny)| *codes.get(nx, ny))
            .collect();
        window.sort_unstable();
        Some(window[(window.len() - 1) / 2])
    })
}

/// Repairs isolated whole-period errors in an unwrapped phase map.
///
/// Each valid pixel is compared with the median of its valid neighbors; when
/// they differ by more than π and an integer number of periods brings the
/// pixel within π/2 of the median, that shift is applied. Pixels shifted out
/// of `[0, 2π·n_periods)` become invalid.
pub fn correct_period_jumps(unwrapped: &RealMap, radius: usize, n_periods: u32) -> RealMap {
    if radius == 0 {
        return unwrapped.clone();
    }
    let (w, h) = unwrapped.dims();
    let max = TAU * n_periods as f64;
    RealMap::par_from_fn(w, h, |x, y| {
        let d = *unwrapped.get(x, y);
        if !d.is_finite() {
            return f64::NAN;
        }
        let mut window: Vec<f64> = neighborhood(w, h, x, y, radius)
            .map(|(nx, ny)| *unwrapped.get(nx, ny))
            .filter(|v| v.is_finite())
            .collect();
        window.sort_unstable_by(f64::total_cmp);
        let med = window[(window.len() - 1) / 2];
        if (med - d).abs() <= PI {
            return d;
        }
        let k = ((med - d) / TAU).round();
        let fixed = d + TAU * k;
        if (fixed - med).abs() < PI / 2.0 && (0.0..max).contains(&fixed) {
            fixed
        } else if (0.0..max).contains(&d) {
            d
        } else {
            f64::NAN
        }
    })
}

fn neighborhood(
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    r: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
    let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
    (y0..=y1).flat_map(move |ny| (x0..=x1).map(move |nx| (nx, ny)))
}

/// Continuous projector coordinates per camera pixel.
#[derive(Debug, Clone)]
pub struct CorrespondenceMap {
    pub xp: RealMap,
    pub yp: RealMap,
    pub valid: Mask,
    pub fringe_v: u32,
    pub fringe_h: u32,
}

impl CorrespondenceMap {
    /// Integer projector coordinates `⌊Xp⌋, ⌊Yp⌋` (NaN where invalid), the
    /// quantized form used for visualization.
    pub fn floored(&self) -> (RealMap, RealMap) {
        let floor = |m: &RealMap| {
            let (w, h) = m.dims();
            RealMap::from_fn(w, h, |x, y| {
                if *self.valid.get(x, y) {
                    m.get(x, y).floor()
                } else {
                    f64::NAN
                }
            })
        };
        (floor(&self.xp), floor(&self.yp))
    }

    pub fn at(&self, x: usize, y: usize) -> Option<(f64, f64)> {
        self.valid
            .get(x, y)
            .then(|| (*self.xp.get(x, y), *self.yp.get(x, y)))
    }
}

/// `Xp = w_v·δ_v/2π`, `Yp = w_h·δ_h/2π`; valid where both phases are valid
/// and the result falls inside the projector.
pub fn correspondence(
    unwrapped_v: &RealMap,
    unwrapped_h: &RealMap,
    fringe_v: u32,
    fringe_h: u32,
    proj_size: (u32, u32),
) -> Result<CorrespondenceMap> {
    ensure_same_dims("correspondence", &[unwrapped_v.dims(), unwrapped_h.dims()])?;
    let (w, h) = unwrapped_v.dims();
    let (pw, ph) = (proj_size.0 as f64, proj_size.1 as f64);
    let mut xp = unwrapped_v.map(|d| fringe_v as f64 * d / TAU);
    let mut yp = unwrapped_h.map(|d| fringe_h as f64 * d / TAU);
    let valid = Mask::from_fn(w, h, |x, y| {
        let (u, v) = (*xp.get(x, y), *yp.get(x, y));
        (0.0..pw).contains(&u) && (0.0..ph).contains(&v)
    });
    for (i, ok) in valid.data().iter().enumerate() {
        if !ok {
            xp.data_mut()[i] = f64::NAN;
            yp.data_mut()[i] = f64::NAN;
        }
    }
    Ok(CorrespondenceMap {
        xp,
        yp,
        valid,
        fringe_v,
        fringe_h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    /// Minimum modulation (gray levels) for a pixel to be decoded.
    pub m_min: f64,
    /// Code median-filter radius; 0 disables.
    pub median_radius: usize,
    /// Window radius for whole-period repair of the unwrapped phase; 0 disables.
    pub jump_radius: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            m_min: 10.0,
            median_radius: 0,
            jump_radius: 2,
        }
    }
}

/// Every intermediate map for one orientation.
#[derive(Debug, Clone)]
pub struct OrientationDecode {
    pub spec: PatternSpec,
    pub wrapped: RealMap,
    pub modulation: ModulationMap,
    pub codes: CodeMap,
    pub unwrapped: RealMap,
}

pub fn decode_orientation(
    sinusoids: [&GrayImage; 3],
    planes: &[&GrayImage],
    spec: &PatternSpec,
    opts: &DecodeOptions,
) -> Result<OrientationDecode> {
    if planes.len() != spec.n_bits() as usize {
        return Err(Error::IncompleteStack(format!(
            "{:?} needs {} code planes, got {}",
            spec.orientation,
            spec.n_bits(),
            planes.len()
        )));
    }
    let [i1, i2, i3] = sinusoids;
    let mut wrapped = wrapped_phase(i1, i2, i3)?;
    let modulation = modulation_and_mask(i1, i2, i3, opts.m_min)?;
    for (v, ok) in wrapped.data_mut().iter_mut().zip(modulation.mask.data()) {
        if !ok {
            *v = f64::NAN;
        }
    }
    let mut threshold = sinusoid_mean(i1, i2, i3)?;
    for (t, ok) in threshold.data_mut().iter_mut().zip(modulation.mask.data()) {
        if !ok {
            *t = f64::NAN;
        }
    }
    let owned: Vec<GrayImage> = planes.iter().map(|p| (*p).clone()).collect();
    let mut codes = decode_codewords(&owned, &threshold, spec.code_kind)?;
    codes = median_filter_codes(&codes, opts.median_radius);
    let unwrapped = correct_period_jumps(
        &unwrap(&wrapped, &codes)?,
        opts.jump_radius,
        spec.n_periods(),
    );
    Ok(OrientationDecode {
        spec: *spec,
        wrapped,
        modulation,
        codes,
        unwrapped,
    })
}

#[derive(Debug, Clone)]
pub struct StackDecode {
    pub vertical: OrientationDecode,
    pub horizontal: OrientationDecode,
    pub correspondence: CorrespondenceMap,
}

/// Decodes a full capture stack ordered as in `manifest`.
pub fn decode_stack(
    captures: &[GrayImage],
    manifest: &PatternManifest,
    opts: &DecodeOptions,
) -> Result<StackDecode> {
    if captures.len() != manifest.images.len() {
        return Err(Error::IncompleteStack(format!(
            "manifest lists {} images, got {} captures",
            manifest.images.len(),
            captures.len()
        )));
    }
    let dims: Vec<_> = captures.iter().map(|c| c.dims()).collect();
    ensure_same_dims("capture stack", &dims)?;
    let one = |o: Orientation| -> Result<OrientationDecode> {
        let spec = manifest
            .spec_for(o)
            .ok_or_else(|| Error::IncompleteStack(format!("manifest has no {o:?} patterns")))?;
        let pick = |role, idx| {
            manifest
                .position(o, role, idx)
                .map(|i| &captures[i])
                .ok_or_else(|| Error::IncompleteStack(format!("missing {o:?} {role:?} #{idx}")))
        };
        let sin = [
            pick(Role::Sinusoid, 0)?,
            pick(Role::Sinusoid, 1)?,
            pick(Role::Sinusoid, 2)?,
        ];
        let planes = (0..spec.n_bits())
            .map(|b| pick(Role::Code, b))
            .collect::<Result<Vec<_>>>()?;
        decode_orientation(sin, &planes, spec, opts)
    };
    let vertical = one(Orientation::Vertical)?;
    let horizontal = one(Orientation::Horizontal)?;
    let proj = (vertical.spec.proj_width, vertical.spec.proj_height);
    let correspondence = correspondence(
        &vertical.unwrapped,
        &horizontal.unwrapped,
        vertical.spec.fringe_width,
        horizontal.spec.fringe_width,
        proj,
    )?;
    Ok(StackDecode {
        vertical,
        horizontal,
        correspondence,
    })
}
