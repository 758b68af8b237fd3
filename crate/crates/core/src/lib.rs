//! Coded phase-shift structured-light scanning.
//!
//! Three phase-shifted sinusoids give a wrapped phase per camera pixel, Gray
//! code bit-planes give the fringe order, and the unwrapped phase maps each
//! camera pixel to a continuous projector coordinate. With a calibrated
//! camera/projector pair the two rays are intersected to obtain 3D points.
//! A ray-casting simulator supplies captures with exact ground truth.

// `!(x > 0.0)` is used deliberately so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod decode;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrology;
pub mod pattern;
pub mod raster;
pub mod reconstruct;
pub mod sim;

pub use error::{Error, ErrorClass, Result};
pub use raster::{GrayImage, Mask, Raster, RealMap};
