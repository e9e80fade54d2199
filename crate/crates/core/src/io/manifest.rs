use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, EdgePolicy, Strategy, TileSize, WindowSpec};
use crate::pipeline::{assign_transform, TilingConfig};
use crate::raster::{DType, Raster};
use crate::transforms::TransformId;

pub const MANIFEST_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub channels: usize,
    pub dtype: DType,
    pub height: usize,
    pub width: usize,
}

impl SourceInfo {
    pub fn of(raster: &Raster) -> Self {
        SourceInfo {
            channels: raster.channels(),
            dtype: raster.dtype(),
            height: raster.height(),
            width: raster.width(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileEntry {
    pub col_offset: usize,
    pub grid_index: usize,
    /// File name of the tile inside a directory tile set. Packed sets store
    /// payloads back to back in `tile_id` order under the same names.
    pub location: String,
    pub row_offset: usize,
    pub tile_id: usize,
    pub transform: TransformId,
}

pub fn tile_file_name(tile_id: usize) -> String {
    format!("tile_{tile_id:06}.npy")
}

/// Everything needed to audit or rebuild a tile set, minus the pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub edge_policy: EdgePolicy,
    pub source: SourceInfo,
    pub strategy: Strategy,
    pub tile_size: TileSize,
    pub tiles: Vec<TileEntry>,
    pub transform_table: BTreeMap<String, TransformId>,
    pub version: String,
}

impl Manifest {
    /// Manifest for tiling a `source`-shaped raster under `config`.
    pub fn plan(source: SourceInfo, config: &TilingConfig) -> Result<Manifest> {
        let specs = geometry::windows(source.height, source.width, config.tile_size, config.strategy, config.edge)?;
        Manifest::from_windows(source, config, &specs)
    }

    pub fn from_windows(source: SourceInfo, config: &TilingConfig, specs: &[WindowSpec]) -> Result<Manifest> {
        let tiles = specs
            .iter()
            .enumerate()
            .map(|(tile_id, w)| {
                Ok(TileEntry {
                    col_offset: w.col_offset,
                    grid_index: w.grid_index,
                    location: tile_file_name(tile_id),
                    row_offset: w.row_offset,
                    tile_id,
                    transform: config.transform_for(w.grid_index)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Manifest {
            edge_policy: config.edge,
            source,
            strategy: config.strategy,
            tile_size: config.tile_size,
            tiles,
            transform_table: transform_table(config.strategy)?,
            version: MANIFEST_VERSION.to_string(),
        })
    }

    pub fn config(&self) -> TilingConfig {
        TilingConfig { tile_size: self.tile_size, strategy: self.strategy, edge: self.edge_policy }
    }

    pub fn window(&self, entry: &TileEntry) -> WindowSpec {
        WindowSpec {
            grid_index: entry.grid_index,
            row_offset: entry.row_offset,
            col_offset: entry.col_offset,
            size: self.tile_size,
        }
    }

    pub fn windows(&self) -> Vec<WindowSpec> {
        self.tiles.iter().map(|e| self.window(e)).collect()
    }

    /// Bytes in one tile payload.
    pub fn tile_bytes(&self) -> usize {
        let t = self.tile_size.get();
        self.source.channels * t * t * self.source.dtype.size()
    }

    pub fn payload_bytes(&self) -> u64 {
        self.tile_bytes() as u64 * self.tiles.len() as u64
    }

    pub fn grid_count(&self) -> usize {
        let mut grids: Vec<_> = self.tiles.iter().map(|e| e.grid_index).collect();
        grids.sort_unstable();
        grids.dedup();
        grids.len()
    }

    /// Canonical serialized form: sorted keys, no insignificant whitespace.
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_vec(&value)?)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Manifest> {
        let manifest: Manifest =
            serde_json::from_slice(bytes).map_err(|e| Error::Corruption(format!("manifest: {e}")))?;
        manifest.validate()?;
        Ok(manifest)
    }

    /// Structural checks on a manifest read from disk.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Corruption(format!("unsupported manifest version {:?}", self.version)));
        }
        if self.transform_table != transform_table(self.strategy)? {
            return Err(Error::Corruption("transform table does not match strategy".into()));
        }
        let grids = self.strategy.grid_count();
        // Subsets keep their original ids, so only the order is enforced.
        for (pos, pair) in self.tiles.windows(2).enumerate() {
            if pair[0].tile_id >= pair[1].tile_id {
                return Err(Error::Corruption(format!("tile entry {} has tile_id {}", pos + 1, pair[1].tile_id)));
            }
        }
        for e in &self.tiles {
            if e.grid_index >= grids {
                return Err(Error::Corruption(format!("tile {} has grid index {}", e.tile_id, e.grid_index)));
            }
            if self.transform_table[&e.grid_index.to_string()] != e.transform {
                return Err(Error::Corruption(format!("tile {} carries the wrong transform", e.tile_id)));
            }
        }
        Ok(())
    }
}

fn transform_table(strategy: Strategy) -> Result<BTreeMap<String, TransformId>> {
    match strategy {
        Strategy::FlipNSlide => (0..8).map(|g| Ok((g.to_string(), assign_transform(g)?))).collect(),
        _ => Ok(BTreeMap::from([("0".to_string(), TransformId::R0)])),
    }
}
