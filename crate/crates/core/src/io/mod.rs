//! On-disk formats: PGM/PFM rasters, ASCII PLY clouds and JSON documents.

mod docs;
mod ply;
mod pnm;

pub use docs::*;
pub use ply::*;
pub use pnm::*;
