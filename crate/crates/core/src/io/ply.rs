//! ASCII PLY 1.0 point clouds.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Triangulated points in meters, optionally tagged with their camera pixel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub pixels: Option<Vec<[f64; 2]>>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        PointCloud {
            points,
            pixels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(px) = &self.pixels {
            if px.len() != self.points.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} points but {} source pixels",
                    self.points.len(),
                    px.len()
                )));
            }
        }
        let finite = self.points.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::OutOfRange("non-finite point coordinate".into()));
        }
        Ok(())
    }
}

pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_ply_to(cloud, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes the cloud; coordinates use Rust's shortest round-trip formatting,
/// which carries the full 17 significant digits where needed.
pub fn write_ply_to(cloud: &PointCloud, out: &mut impl Write) -> std::io::Result<()> {
    if let Err(e) = cloud.validate() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            e.to_string(),
        ));
    }
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(out, "property double {axis}")?;
    }
    if cloud.pixels.is_some() {
        writeln!(out, "property double xc")?;
        writeln!(out, "property double yc")?;
    }
    writeln!(out, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        write!(out, "{} {} {}", p[0], p[1], p[2])?;
        if let Some(px) = &cloud.pixels {
            write!(out, " {} {}", px[i][0], px[i][1])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Minimal reader for the files [`write_ply`] produces (ASCII, vertex only).
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut next = || -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::io(path, e)),
            None => Err(Error::MalformedHeader("PLY ended inside header".into())),
        }
    };

    if next()?.trim() != "ply" {
        return Err(Error::MalformedHeader("missing `ply` magic".into()));
    }
    let mut count = None;
    let mut props = Vec::new();
    loop {
        let line = next()?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", "1.0"] => {}
            ["format", ..] => {
                return Err(Error::MalformedHeader(format!("unsupported {line}")));
            }
            ["comment", ..] | [] => {}
            ["element", "vertex", n] => {
                count = Some(
                    n.parse::<usize>()
                        .map_err(|_| Error::MalformedHeader(format!("bad vertex count `{n}`")))?,
                );
            }
            ["element", ..] => {
                return Err(Error::MalformedHeader(format!("unsupported {line}")));
            }
            ["property", _ty, name] => props.push(name.to_string()),
            ["end_header"] => break,
            _ => return Err(Error::MalformedHeader(format!("unexpected `{line}`"))),
        }
    }
    let count = count.ok_or_else(|| Error::MalformedHeader("no vertex element".into()))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::MalformedHeader("missing x/y/z properties".into())),
    };
    let pix_cols = col("xc").zip(col("yc"));

    let mut cloud = PointCloud {
        points: Vec::with_capacity(count),
        pixels: pix_cols.map(|_| Vec::with_capacity(count)),
    };
    for _ in 0..count {
        let line = next().map_err(|_| Error::TruncatedPayload {
            expected: count,
            found: cloud.points.len(),
        })?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Schema(format!("bad vertex line `{line}`")))?;
        if vals.len() != props.len() {
            return Err(Error::Schema(format!("bad vertex line `{line}`")));
        }
        cloud.points.push([vals[ix], vals[iy], vals[iz]]);
        if let (Some((a, b)), Some(px)) = (pix_cols, cloud.pixels.as_mut()) {
            px.push([vals[a], vals[b]]);
        }
    }
    Ok(cloud)
}
