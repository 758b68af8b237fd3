//! Binary PGM (`P5`, maxval 255) and PFM (`Pf` grayscale, `PF` three-channel).
//!
//! PFM maps are always written little-endian (scale `-1.0`) with rows stored
//! bottom-up. Invalid pixels are written as the canonical quiet NaN.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Raster, RealMap};

/// Upper bound on the pixel count accepted from a header.
const MAX_PIXELS: u64 = 1 << 30;

/// Bit pattern written for invalid real-valued pixels.
pub const SENTINEL_BITS: u32 = 0x7FC0_0000;

/// Real-valued image exactly as stored in a PFM file.
pub type FloatImage = Raster<f32>;
/// Three-channel real image (`PF`), used for per-pixel 3D point maps.
pub type Float3Image = Raster<[f32; 3]>;

/// An image in one of the two scalar channel kinds understood on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum RasterImage {
    Gray8(GrayImage),
    GrayReal(FloatImage),
}

impl RasterImage {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            RasterImage::Gray8(img) => img.dims(),
            RasterImage::GrayReal(img) => img.dims(),
        }
    }
}

/// The quiet-NaN sentinel used for invalid real pixels.
pub fn sentinel() -> f32 {
    f32::from_bits(SENTINEL_BITS)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn write_image(image: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(image)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    match read_image(path)? {
        RasterImage::Gray8(img) => Ok(img),
        RasterImage::GrayReal(_) => Err(Error::MalformedHeader(
            "expected a PGM (P5) image, found PFM".into(),
        )),
    }
}

pub fn write_gray(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}

/// Reads a `Pf` map, widening to `f64` (NaN for invalid pixels).
pub fn read_real_map(path: impl AsRef<Path>) -> Result<RealMap> {
    match read_image(path)? {
        RasterImage::GrayReal(img) => Ok(img.map(|&v| v as f64)),
        RasterImage::Gray8(_) => Err(Error::MalformedHeader(
            "expected a PFM (Pf) map, found PGM".into(),
        )),
    }
}

/// Writes a double-precision map as `Pf`, narrowing to `f32`.
pub fn write_real_map(map: &RealMap, path: impl AsRef<Path>) -> Result<()> {
    let narrowed = map.map(|&v| if v.is_nan() { sentinel() } else { v as f32 });
    write_image(&RasterImage::GrayReal(narrowed), path)
}

pub fn read_point_map(path: impl AsRef<Path>) -> Result<Float3Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm3(&bytes)
}

pub fn write_point_map(map: &Float3Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pfm3(map)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_image(image: &RasterImage) -> Result<Vec<u8>> {
    match image {
        RasterImage::Gray8(img) => Ok(encode_pgm(img)),
        RasterImage::GrayReal(img) => encode_pfm(img),
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    match bytes.get(..2) {
        Some(b"P5") => decode_pgm(bytes).map(RasterImage::Gray8),
        Some(b"Pf") => decode_pfm(bytes).map(RasterImage::GrayReal),
        Some(b"PF") => Err(Error::MalformedHeader(
            "three-channel PFM is a point map; use read_point_map".into(),
        )),
        _ => Err(Error::MalformedHeader("unknown magic number".into())),
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut header = HeaderReader::new(bytes);
    expect_magic(&mut header, "P5")?;
    let (width, height) = read_dims(&mut header)?;
    let maxval = header.token()?;
    if maxval != "255" {
        return Err(Error::MalformedHeader(format!(
            "maxval must be 255, got {maxval}"
        )));
    }
    let payload = header.payload()?;
    let expected = width * height;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    Raster::from_vec(width, height, payload[..expected].to_vec())
}

pub fn encode_pfm(img: &FloatImage) -> Result<Vec<u8>> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    out.reserve(img.len() * 4);
    for row in img.rows().rev() {
        for &v in row {
            out.extend_from_slice(&encode_f32(v)?);
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<FloatImage> {
    let (width, height, little, payload) = pfm_header(bytes, "Pf", 1)?;
    let mut data = vec![0f32; width * height];
    for (row_idx, chunk) in payload.chunks_exact(width * 4).take(height).enumerate() {
        let y = height - 1 - row_idx;
        for (x, b) in chunk.chunks_exact(4).enumerate() {
            data[y * width + x] = decode_f32(b, little);
        }
    }
    Raster::from_vec(width, height, data)
}

pub fn encode_pfm3(img: &Float3Image) -> Result<Vec<u8>> {
    let mut out = format!("PF\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    out.reserve(img.len() * 12);
    for row in img.rows().rev() {
        for px in row {
            for &v in px {
                out.extend_from_slice(&encode_f32(v)?);
            }
        }
    }
    Ok(out)
}

pub fn decode_pfm3(bytes: &[u8]) -> Result<Float3Image> {
    let (width, height, little, payload) = pfm_header(bytes, "PF", 3)?;
    let mut data = vec![[0f32; 3]; width * height];
    for (row_idx, chunk) in payload.chunks_exact(width * 12).take(height).enumerate() {
        let y = height - 1 - row_idx;
        for (x, b) in chunk.chunks_exact(12).enumerate() {
            data[y * width + x] = [
                decode_f32(&b[0..4], little),
                decode_f32(&b[4..8], little),
                decode_f32(&b[8..12], little),
            ];
        }
    }
    Raster::from_vec(width, height, data)
}

fn encode_f32(v: f32) -> Result<[u8; 4]> {
    if v.is_nan() {
        Ok(SENTINEL_BITS.to_le_bytes())
    } else if v.is_infinite() {
        Err(Error::OutOfRange("infinite value in real image".into()))
    } else {
        Ok(v.to_le_bytes())
    }
}

fn decode_f32(b: &[u8], little: bool) -> f32 {
    let raw = [b[0], b[1], b[2], b[3]];
    let v = if little {
        f32::from_le_bytes(raw)
    } else {
        f32::from_be_bytes(raw)
    };
    if v.is_nan() {
        sentinel()
    } else {
        v
    }
}

fn pfm_header<'a>(
    bytes: &'a [u8],
    magic: &str,
    channels: usize,
) -> Result<(usize, usize, bool, &'a [u8])> {
    let mut header = HeaderReader::new(bytes);
    expect_magic(&mut header, magic)?;
    let (width, height) = read_dims(&mut header)?;
    let scale_tok = header.token()?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("bad PFM scale `{scale_tok}`")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::MalformedHeader(format!(
            "bad PFM scale `{scale_tok}`"
        )));
    }
    let payload = header.payload()?;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4 * channels))
        .ok_or(Error::SizeOverflow {
            width: width as u64,
            height: height as u64,
        })?;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    Ok((width, height, scale < 0.0, &payload[..expected]))
}

fn expect_magic(header: &mut HeaderReader<'_>, magic: &str) -> Result<()> {
    let tok = header.token()?;
    if tok != magic {
        return Err(Error::MalformedHeader(format!(
            "expected magic `{magic}`, found `{tok}`"
        )));
    }
    Ok(())
}

fn read_dims(header: &mut HeaderReader<'_>) -> Result<(usize, usize)> {
    let w = parse_dim(header.token()?)?;
    let h = parse_dim(header.token()?)?;
    if w == 0 || h == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero image dimension {w}x{h}"
        )));
    }
    match w.checked_mul(h) {
        Some(n) if n <= MAX_PIXELS => Ok((w as usize, h as usize)),
        _ => Err(Error::SizeOverflow {
            width: w,
            height: h,
        }),
    }
}

fn parse_dim(tok: &str) -> Result<u64> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::MalformedHeader(format!("bad dimension `{tok}`")));
    }
    tok.parse::<u64>().map_err(|_| Error::SizeOverflow {
        width: u64::MAX,
        height: u64::MAX,
    })
}

/// Whitespace-separated header tokens with `#` comments, as in Netpbm.
struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderReader { bytes, pos: 0 }
    }

    fn token(&mut self) -> Result<&'a str> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::MalformedHeader("unexpected end of header".into())),
            }
        }
        let start = self.pos;
        while let Some(b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
            if self.pos - start > 64 {
                return Err(Error::MalformedHeader("header token too long".into()));
            }
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::MalformedHeader("non-ASCII header".into()))
    }

    /// Consumes the single whitespace byte ending the header.
    fn payload(self) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(&self.bytes[self.pos + 1..]),
            _ => Err(Error::MalformedHeader(
                "header not terminated by whitespace".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_bytes_are_exact() {
        let img = Raster::from_vec(2, 1, vec![0u8, 255]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(bytes, b"P5\n2 1\n255\n\x00\xff");
        assert_eq!(decode_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn pfm_single_value_round_trip() {
        let img = Raster::from_vec(1, 1, vec![3.25f32]).unwrap();
        let back = decode_pfm(&encode_pfm(&img).unwrap()).unwrap();
        assert_eq!(back.get(0, 0).to_bits(), 3.25f32.to_bits());
    }

    #[test]
    fn pfm_rows_are_bottom_up() {
        let img = Raster::from_vec(1, 2, vec![1.0f32, 2.0]).unwrap();
        let bytes = encode_pfm(&img).unwrap();
        let header = b"Pf\n1 2\n-1.0\n".len();
        assert_eq!(&bytes[header..header + 4], &2.0f32.to_le_bytes());
    }

    #[test]
    fn sentinel_survives() {
        let img = Raster::from_vec(2, 1, vec![f32::NAN, -0.0]).unwrap();
        let back = decode_pfm(&encode_pfm(&img).unwrap()).unwrap();
        assert_eq!(back.get(0, 0).to_bits(), SENTINEL_BITS);
        assert_eq!(back.get(1, 0).to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn big_endian_pfm_is_read() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        assert_eq!(*decode_pfm(&bytes).unwrap().get(0, 0), 1.5);
    }

    #[test]
    fn header_errors_are_distinct() {
        assert!(matches!(
            decode_pgm(b"P5\n0 4\n255\n"),
            Err(Error::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pgm(b"P5\n99999999 99999999\n255\n"),
            Err(Error::SizeOverflow { .. })
        ));
        assert!(matches!(
            decode_pgm(b"P5\n2 2\n255\n\x00\x01"),
            Err(Error::TruncatedPayload {
                expected: 4,
                found: 2
            })
        ));
        assert!(matches!(
            decode_pgm(b"P5\n2 2\n65535\n"),
            Err(Error::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_image(b"P6\n1 1\n255\n"),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn comments_in_header_are_skipped() {
        let img = decode_pgm(b"P5\n# made by hand\n1 1\n255\n\x07").unwrap();
        assert_eq!(*img.get(0, 0), 7);
    }

    #[test]
    fn infinite_values_rejected() {
        let img = Raster::from_vec(1, 1, vec![f32::INFINITY]).unwrap();
        assert!(matches!(encode_pfm(&img), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn point_map_round_trip() {
        let img = Raster::from_vec(2, 1, vec![[0.5f32, -1.0, 2.2], [f32::NAN; 3]]).unwrap();
        let back = decode_pfm3(&encode_pfm3(&img).unwrap()).unwrap();
        assert_eq!(back.get(0, 0), &[0.5, -1.0, 2.2]);
        assert!(back.get(1, 0).iter().all(|v| v.is_nan()));
    }
}
