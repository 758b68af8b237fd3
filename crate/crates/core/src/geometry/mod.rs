//! Sensor models, rigid transforms, homographies and ray triangulation.

mod homography;
mod pose;
mod rig;
mod sensor;
mod triangulate;

pub use homography::*;
pub use pose::*;
pub use rig::*;
pub use sensor::*;
pub use triangulate::*;
