//! Projected pattern stack: three phase-shifted sinusoids per orientation and
//! the code bit-planes that number each sinusoidal period.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Phase step between consecutive sinusoids.
pub const PHASE_STEP: f64 = 2.0 * PI / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Phase varies along columns; encodes the projector x coordinate.
    Vertical,
    /// Phase varies along rows; encodes the projector y coordinate.
    Horizontal,
}

impl Orientation {
    pub fn tag(self) -> &'static str {
        match self {
            Orientation::Vertical => "v",
            Orientation::Horizontal => "h",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeKind {
    Gray,
    PlainBinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub proj_width: u32,
    pub proj_height: u32,
    /// Projector pixels per sinusoidal period.
    pub fringe_width: u32,
    pub orientation: Orientation,
    pub i_dc: f64,
    pub i_mod: f64,
    pub code_kind: CodeKind,
}

impl PatternSpec {
    /// Defaults: bias and modulation spanning the full 8-bit range, Gray code.
    pub fn new(
        proj_width: u32,
        proj_height: u32,
        fringe_width: u32,
        orientation: Orientation,
    ) -> Self {
        PatternSpec {
            proj_width,
            proj_height,
            fringe_width,
            orientation,
            i_dc: 127.5,
            i_mod: 127.5,
            code_kind: CodeKind::Gray,
        }
    }

    /// Length of the axis the phase varies along.
    pub fn extent(&self) -> u32 {
        match self.orientation {
            Orientation::Vertical => self.proj_width,
            Orientation::Horizontal => self.proj_height,
        }
    }

    pub fn n_periods(&self) -> u32 {
        self.extent() / self.fringe_width
    }

    pub fn n_bits(&self) -> u32 {
        self.n_periods().trailing_zeros()
    }

    pub fn validate(&self) -> Result<()> {
        if self.proj_width == 0 || self.proj_height == 0 {
            return Err(Error::InvalidPattern(
                "projector size must be positive".into(),
            ));
        }
        if !(self.i_dc.is_finite() && self.i_mod.is_finite()) || self.i_mod < 0.0 {
            return Err(Error::InvalidPattern(
                "I_dc and I_mod must be finite, I_mod >= 0".into(),
            ));
        }
        if self.i_dc - self.i_mod < 0.0 || self.i_dc + self.i_mod > 255.0 {
            return Err(Error::InvalidPattern(format!(
                "I_dc ± I_mod must stay within [0, 255] (I_dc={}, I_mod={})",
                self.i_dc, self.i_mod
            )));
        }
        if self.fringe_width < 4 {
            return Err(Error::InvalidPattern(format!(
                "fringe width must be at least 4 px, got {}",
                self.fringe_width
            )));
        }
        let extent = self.extent();
        if !extent.is_multiple_of(self.fringe_width) || !self.n_periods().is_power_of_two() {
            return Err(Error::InvalidPattern(format!(
                "fringe width {} does not divide {} into a power-of-two number of periods; valid widths: {:?}",
                self.fringe_width,
                extent,
                valid_fringe_widths(extent)
            )));
        }
        Ok(())
    }

    fn axis_coord(&self, x: usize, y: usize) -> u32 {
        match self.orientation {
            Orientation::Vertical => x as u32,
            Orientation::Horizontal => y as u32,
        }
    }

    /// Ideal phase `2π·x / w` at a projector coordinate.
    pub fn phase_at(&self, coord: f64) -> f64 {
        2.0 * PI * coord / self.fringe_width as f64
    }
}

/// Fringe widths ≥ 4 giving a power-of-two period count over `extent`.
pub fn valid_fringe_widths(extent: u32) -> Vec<u32> {
    (0..32)
        .map(|k| 1u32 << k)
        .take_while(|&n| n <= extent)
        .filter(|&n| extent.is_multiple_of(n) && extent / n >= 4)
        .map(|n| extent / n)
        .collect()
}

pub fn gray_encode(n: u32) -> u32 {
    n ^ (n >> 1)
}

pub fn gray_decode(mut g: u32) -> u32 {
    let mut n = g;
    while g > 0 {
        g >>= 1;
        n ^= g;
    }
    n
}

/// Intensity of sinusoid `k ∈ {0,1,2}` at phase `phi`, before quantization.
///
/// `I₁` carries the `−θ` shift so that the arctangent decoder returns `+φ`.
pub fn sinusoid_value(i_dc: f64, i_mod: f64, k: usize, phi: f64) -> f64 {
    let shift = (k as f64 - 1.0) * PHASE_STEP;
    i_dc + i_mod * (phi + shift).cos()
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn generate_sinusoids(spec: &PatternSpec) -> Result<[GrayImage; 3]> {
    spec.validate()?;
    let w = spec.fringe_width;
    // One lookup row per period; exact periodicity follows.
    let lut: Vec<[u8; 3]> = (0..w)
        .map(|x| {
            let phi = spec.phase_at(x as f64);
            [0, 1, 2].map(|k| quantize(sinusoid_value(spec.i_dc, spec.i_mod, k, phi)))
        })
        .collect();
    let (pw, ph) = (spec.proj_width as usize, spec.proj_height as usize);
    Ok([0, 1, 2]
        .map(|k| GrayImage::from_fn(pw, ph, |x, y| lut[(spec.axis_coord(x, y) % w) as usize][k])))
}

/// Codeword shown on period `p`.
pub fn codeword(kind: CodeKind, p: u32) -> u32 {
    match kind {
        CodeKind::Gray => gray_encode(p),
        CodeKind::PlainBinary => p,
    }
}

pub fn generate_code_planes(spec: &PatternSpec) -> Result<Vec<GrayImage>> {
    spec.validate()?;
    let n_bits = spec.n_bits();
    let (pw, ph) = (spec.proj_width as usize, spec.proj_height as usize);
    Ok((0..n_bits)
        .map(|b| {
            let shift = n_bits - 1 - b;
            GrayImage::from_fn(pw, ph, |x, y| {
                let p = spec.axis_coord(x, y) / spec.fringe_width;
                if (codeword(spec.code_kind, p) >> shift) & 1 == 1 {
                    255
                } else {
                    0
                }
            })
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct PatternSet {
    pub spec: PatternSpec,
    pub sinusoids: [GrayImage; 3],
    /// Most significant bit first.
    pub code_planes: Vec<GrayImage>,
}

impl PatternSet {
    pub fn generate(spec: &PatternSpec) -> Result<Self> {
        Ok(PatternSet {
            spec: *spec,
            sinusoids: generate_sinusoids(spec)?,
            code_planes: generate_code_planes(spec)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sinusoid,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub role: Role,
    pub orientation: Orientation,
    /// Phase step (0..3) for sinusoids; bit-plane position, MSB = 0, for codes.
    pub index: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StackSpecs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertical: Option<PatternSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizontal: Option<PatternSpec>,
}

/// Ordered capture plan: which image is projected in which slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternManifest {
    pub images: Vec<ManifestEntry>,
    pub spec: StackSpecs,
}

impl PatternManifest {
    pub fn spec_for(&self, orientation: Orientation) -> Option<&PatternSpec> {
        match orientation {
            Orientation::Vertical => self.spec.vertical.as_ref(),
            Orientation::Horizontal => self.spec.horizontal.as_ref(),
        }
    }

    /// Checks every spec and that the image list is exactly what they imply.
    pub fn validate(&self) -> Result<()> {
        let expected = manifest_entries(&self.spec)?;
        if expected != self.images {
            return Err(Error::Schema(
                "manifest image list does not match its pattern specs".into(),
            ));
        }
        Ok(())
    }

    pub fn position(&self, orientation: Orientation, role: Role, index: u32) -> Option<usize> {
        self.images
            .iter()
            .position(|e| e.orientation == orientation && e.role == role && e.index == index)
    }
}

fn manifest_entries(specs: &StackSpecs) -> Result<Vec<ManifestEntry>> {
    let mut images = Vec::new();
    let present: Vec<&PatternSpec> = specs
        .vertical
        .iter()
        .chain(specs.horizontal.iter())
        .collect();
    if present.is_empty() {
        return Err(Error::InvalidPattern("stack has no orientation".into()));
    }
    if let (Some(v), Some(h)) = (&specs.vertical, &specs.horizontal) {
        if (v.proj_width, v.proj_height) != (h.proj_width, h.proj_height) {
            return Err(Error::DimensionMismatch(format!(
                "vertical spec is {}x{}, horizontal spec is {}x{}",
                v.proj_width, v.proj_height, h.proj_width, h.proj_height
            )));
        }
    }
    for (spec, expected) in [
        (specs.vertical.as_ref(), Orientation::Vertical),
        (specs.horizontal.as_ref(), Orientation::Horizontal),
    ] {
        let Some(spec) = spec else { continue };
        if spec.orientation != expected {
            return Err(Error::InvalidPattern(format!(
                "{expected:?} slot holds a {:?} spec",
                spec.orientation
            )));
        }
        spec.validate()?;
        let tag = spec.orientation.tag();
        for k in 0..3 {
            images.push(ManifestEntry {
                file: format!("{tag}_sin_{k}.pgm"),
                role: Role::Sinusoid,
                orientation: spec.orientation,
                index: k,
            });
        }
        for b in 0..spec.n_bits() {
            images.push(ManifestEntry {
                file: format!("{tag}_code_{b:02}.pgm"),
                role: Role::Code,
                orientation: spec.orientation,
                index: b,
            });
        }
    }
    Ok(images)
}

/// A generated stack in projection order with its manifest.
#[derive(Debug, Clone)]
pub struct PatternStack {
    pub manifest: PatternManifest,
    pub images: Vec<GrayImage>,
}

impl PatternStack {
    pub fn build(specs: StackSpecs) -> Result<Self> {
        let entries = manifest_entries(&specs)?;
        let mut images = Vec::with_capacity(entries.len());
        for spec in specs.vertical.iter().chain(specs.horizontal.iter()) {
            let set = PatternSet::generate(spec)?;
            images.extend(set.sinusoids);
            images.extend(set.code_planes);
        }
        Ok(PatternStack {
            manifest: PatternManifest {
                images: entries,
                spec: specs,
            },
            images,
        })
    }
}

/// Vertical sinusoids, vertical codes, horizontal sinusoids, horizontal codes.
pub fn full_pattern_stack(spec_v: &PatternSpec, spec_h: &PatternSpec) -> Result<PatternStack> {
    PatternStack::build(StackSpecs {
        vertical: Some(*spec_v),
        horizontal: Some(*spec_h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(w: u32) -> PatternSpec {
        let mut s = PatternSpec::new(1024, 768, w, Orientation::Vertical);
        s.i_dc = 128.0;
        s.i_mod = 100.0;
        s
    }

    #[test]
    fn sinusoids_at_zero_phase() {
        let [i1, i2, i3] = generate_sinusoids(&spec(64)).unwrap();
        assert_eq!((*i1.get(0, 0), *i2.get(0, 0), *i3.get(0, 0)), (78, 228, 78));
    }

    #[test]
    fn sinusoids_at_quarter_period() {
        let phi = spec(64).phase_at(16.0);
        let raw: Vec<f64> = (0..3)
            .map(|k| sinusoid_value(128.0, 100.0, k, phi))
            .collect();
        assert!((raw[0] - 214.603).abs() < 1e-3);
        assert!((raw[1] - 128.0).abs() < 1e-9);
        assert!((raw[2] - 41.397).abs() < 1e-3);
        let [i1, i2, i3] = generate_sinusoids(&spec(64)).unwrap();
        assert_eq!(
            (*i1.get(16, 5), *i2.get(16, 5), *i3.get(16, 5)),
            (215, 128, 41)
        );
    }

    #[test]
    fn zero_modulation_is_flat() {
        let mut s = spec(64);
        s.i_mod = 0.0;
        for img in generate_sinusoids(&s).unwrap() {
            assert!(img.data().iter().all(|&v| v == 128));
        }
    }

    #[test]
    fn horizontal_varies_with_row() {
        let mut s = spec(96);
        s.orientation = Orientation::Horizontal;
        let [_, i2, _] = generate_sinusoids(&s).unwrap();
        assert_eq!(*i2.get(0, 10), *i2.get(1000, 10));
        assert_ne!(*i2.get(0, 0), *i2.get(0, 24));
    }

    #[test]
    fn bit_plane_count() {
        assert_eq!(spec(64).n_bits(), 4);
        assert_eq!(generate_code_planes(&spec(64)).unwrap().len(), 4);
    }

    #[test]
    fn gray_examples() {
        assert_eq!(gray_encode(0), 0);
        assert_eq!(gray_encode(5), 7);
        assert_eq!(gray_decode(7), 5);
        assert_eq!(gray_decode(14), 11);
    }

    #[test]
    fn plain_binary_planes_at_period_five() {
        let mut s = spec(64);
        s.code_kind = CodeKind::PlainBinary;
        let planes = generate_code_planes(&s).unwrap();
        let x = 5 * 64 + 10;
        let vals: Vec<u8> = planes.iter().map(|p| *p.get(x, 3)).collect();
        assert_eq!(vals, vec![0, 255, 0, 255]);
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(48).validate().is_err());
        assert!(spec(2).validate().is_err());
        let mut s = spec(64);
        s.i_dc = 200.0;
        assert!(s.validate().is_err());
        let mut s = spec(64);
        s.orientation = Orientation::Horizontal;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("power-of-two"), "{err}");
        assert!(err.contains("96"), "{err}");
    }

    #[test]
    fn stack_counts() {
        let v = PatternSpec::new(1024, 768, 64, Orientation::Vertical);
        let h64 = PatternSpec::new(1024, 768, 64, Orientation::Horizontal);
        assert!(matches!(
            full_pattern_stack(&v, &h64),
            Err(Error::InvalidPattern(_))
        ));
        let h = PatternSpec::new(1024, 768, 96, Orientation::Horizontal);
        let stack = full_pattern_stack(&v, &h).unwrap();
        assert_eq!(stack.images.len(), 13);
        assert_eq!(stack.manifest.images.len(), 13);
        assert_eq!(stack.manifest.images[3].file, "v_code_00.pgm");
        assert_eq!(stack.manifest.images[7].file, "h_sin_0.pgm");
        stack.manifest.validate().unwrap();
    }

    #[test]
    fn stack_dimension_mismatch() {
        let v = PatternSpec::new(1024, 768, 64, Orientation::Vertical);
        let h = PatternSpec::new(1024, 512, 64, Orientation::Horizontal);
        assert!(matches!(
            full_pattern_stack(&v, &h),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn manifest_json_round_trip() {
        let v = PatternSpec::new(1024, 768, 64, Orientation::Vertical);
        let h = PatternSpec::new(1024, 768, 96, Orientation::Horizontal);
        let m = full_pattern_stack(&v, &h).unwrap().manifest;
        let text = serde_json::to_string_pretty(&m).unwrap();
        let back: PatternManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn valid_width_suggestions() {
        assert_eq!(
            valid_fringe_widths(768),
            vec![768, 384, 192, 96, 48, 24, 12, 6]
        );
    }
}
