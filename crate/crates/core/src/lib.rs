//! Flip-n-Slide tiling for large rasters.
//!
//! Cuts an image into square tiles under one of three schedules: a disjoint
//! partition, a 50% overlapping slide, or eight quarter-offset grids whose
//! tiles each carry a distinct rotation/reflection. Overlapping tiles then
//! never share pixels in the same orientation.
//!
//! ```
//! use flipnslide::{tile_image, EdgePolicy, Raster, Strategy, TileSize};
//!
//! let image = Raster::zeros(1, 512, 512, flipnslide::DType::U8)?;
//! let tiles = tile_image(&image, TileSize::new(128)?, Strategy::FlipNSlide, EdgePolicy::InteriorOnly)?;
//! assert_eq!(tiles.len(), 85);
//! # Ok::<(), flipnslide::Error>(())
//! ```

pub mod bench;
pub mod cli;
pub mod coverage;
pub mod error;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod raster;
pub mod transforms;

pub use coverage::{coverage_map, emit_overlap_image, redundancy_report, CoverageMap, RedundancyReport};
pub use error::{Error, NpyError, Result};
pub use geometry::{grid_offsets, windows, EdgePolicy, Strategy, TileSize, WindowSpec};
pub use io::{read_raster, read_tileset, write_raster, write_tileset, Manifest, OutputMode};
pub use pipeline::{
    assign_transform, reconstruct, tile_image, NullSink, StackedSink, TileRecord, TileSet, TileSetBuilder, TileSink, Tiler,
    TilingConfig,
};
pub use raster::{DType, Element, Raster};
pub use transforms::{apply, compose, inverse, TransformId};
