//! Row-major 2D grids used for captures, phase maps, masks and point maps.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A dense row-major grid of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// 8-bit intensity image (captures, patterns, masks).
pub type GrayImage = Raster<u8>;
/// Real-valued map in double precision; `NaN` marks invalid pixels.
pub type RealMap = Raster<f64>;
/// Validity mask.
pub type Mask = Raster<bool>;

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width.checked_mul(height).ok_or(Error::SizeOverflow {
            width: width as u64,
            height: height as u64,
        })?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} raster needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            data,
        }
    }

    /// Row-parallel [`Raster::from_fn`].
    pub fn par_from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> T + Sync) -> Self
    where
        T: Send + Clone + Default,
    {
        let mut data = vec![T::default(); width * height];
        data.par_chunks_mut(width.max(1))
            .enumerate()
            .for_each(|(y, row)| {
                for (x, v) in row.iter_mut().enumerate() {
                    *v = f(x, y);
                }
            });
        Raster {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.width)
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Raster<U>) -> bool {
        self.dims() == other.dims()
    }
}

/// Fails with a dimension-mismatch error naming `what` unless all dims agree.
pub(crate) fn ensure_same_dims(what: &str, dims: &[(usize, usize)]) -> Result<()> {
    if let Some(first) = dims.first() {
        if let Some(bad) = dims.iter().find(|d| *d != first) {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                first.0, first.1, bad.0, bad.1
            )));
        }
    }
    Ok(())
}

impl RealMap {
    pub fn is_valid_at(&self, x: usize, y: usize) -> bool {
        self.get(x, y).is_finite()
    }

    pub fn valid_mask(&self) -> Mask {
        self.map(|v| v.is_finite())
    }
}

impl Mask {
    /// 0 for invalid, 255 for valid.
    pub fn to_gray(&self) -> GrayImage {
        self.map(|&v| if v { 255 } else { 0 })
    }

    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }
}
