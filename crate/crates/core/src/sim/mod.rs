//! Ray-casting virtual scanner with exact ground truth.

mod fixtures;
mod render;
mod scene;

pub use fixtures::*;
pub use render::*;
pub use scene::*;
