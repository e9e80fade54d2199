//! File formats: `.npy` rasters, manifests, and tile set containers.

pub mod manifest;
pub mod npy;
pub mod tileset;

pub use manifest::{tile_file_name, Manifest, SourceInfo, TileEntry};
pub use npy::{read_raster, write_raster};
pub use tileset::{read_manifest, read_tileset, write_tileset, OutputMode};
