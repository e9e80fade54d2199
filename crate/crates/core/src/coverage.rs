//! Per-pixel overlap counts, redundancy scans, and overlap pictures.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{EdgePolicy, WindowSpec};
use crate::io::manifest::Manifest;
use crate::pipeline::TileSet;
use crate::transforms::TransformId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    pub height: usize,
    pub width: usize,
    /// Row-major window incidence counts.
    pub counts: Vec<u32>,
}

impl CoverageMap {
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.counts[row * self.width + col]
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn min(&self) -> u32 {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Exact window incidence counts over an `h x w` image.
///
/// Windows that overhang the image are an error under
/// [`EdgePolicy::InteriorOnly`] and are clipped under padding.
pub fn coverage_map(h: usize, w: usize, specs: &[WindowSpec], edge: EdgePolicy) -> Result<CoverageMap> {
    // 2-D difference array, one extra row and column for the closing edges.
    let stride = w + 1;
    let mut diff = vec![0i64; (h + 1) * stride];
    for s in specs {
        if !s.within(h, w) {
            if edge == EdgePolicy::InteriorOnly {
                return Err(Error::OutOfBounds {
                    row: s.row_offset,
                    col: s.col_offset,
                    size: s.size.get(),
                    height: h,
                    width: w,
                });
            }
            if s.row_offset >= h || s.col_offset >= w {
                continue;
            }
        }
        let (r0, c0) = (s.row_offset, s.col_offset);
        let (r1, c1) = (s.row_end().min(h), s.col_end().min(w));
        diff[r0 * stride + c0] += 1;
        diff[r0 * stride + c1] -= 1;
        diff[r1 * stride + c0] -= 1;
        diff[r1 * stride + c1] += 1;
    }

    let mut counts = vec![0u32; h * w];
    let mut above = vec![0i64; w];
    for r in 0..h {
        let mut run = 0i64;
        for c in 0..w {
            run += diff[r * stride + c];
            above[c] += run;
            counts[r * w + c] = above[c] as u32;
        }
    }
    Ok(CoverageMap { height: h, width: w, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SharedRegion {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffendingPair {
    pub first: usize,
    pub second: usize,
    pub transform: TransformId,
    pub shared: SharedRegion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RedundancyReport {
    pub overlapping_pairs: u64,
    pub same_transform_overlapping_pairs: u64,
    /// Tile-id pairs that overlap under the same transform.
    pub offending: Vec<OffendingPair>,
}

/// Scans every unordered pair of windows in `manifest` for spatial overlap.
pub fn redundancy_from_manifest(manifest: &Manifest) -> RedundancyReport {
    let t = manifest.tile_size.get();
    let mut order: Vec<usize> = (0..manifest.tiles.len()).collect();
    let tiles = &manifest.tiles;
    order.sort_by_key(|&i| (tiles[i].row_offset, tiles[i].col_offset, i));

    let mut report = RedundancyReport { overlapping_pairs: 0, same_transform_overlapping_pairs: 0, offending: Vec::new() };
    for (k, &i) in order.iter().enumerate() {
        let a = manifest.window(&tiles[i]);
        // Equal-size windows overlap only when their row starts differ by < t.
        for &j in order[k + 1..].iter().take_while(|&&j| tiles[j].row_offset < a.row_offset + t) {
            let b = manifest.window(&tiles[j]);
            let Some((row0, col0, row1, col1)) = a.intersection(&b) else { continue };
            report.overlapping_pairs += 1;
            if tiles[i].transform == tiles[j].transform {
                report.same_transform_overlapping_pairs += 1;
                let (first, second) = (i.min(j), i.max(j));
                report.offending.push(OffendingPair {
                    first: tiles[first].tile_id,
                    second: tiles[second].tile_id,
                    transform: tiles[i].transform,
                    shared: SharedRegion { row0, col0, row1, col1 },
                });
            }
        }
    }
    report.offending.sort_by_key(|p| (p.first, p.second));
    report
}

pub fn redundancy_report(tiles: &TileSet) -> RedundancyReport {
    redundancy_from_manifest(&tiles.manifest)
}

/// Picture encoding for [`emit_overlap_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapImageFormat {
    /// `P5` grayscale, intensity from [`GRAY_LEVELS`].
    #[default]
    Gray,
    /// `P6` colour, from [`FALSE_COLOR`].
    FalseColor,
}

/// Intensity for counts 0..=8; higher counts saturate at white.
pub const GRAY_LEVELS: [u8; 9] = [0, 32, 64, 96, 128, 159, 191, 223, 255];

/// Colour for counts 0..=8; higher counts saturate at the last entry.
pub const FALSE_COLOR: [[u8; 3]; 9] = [
    [0, 0, 0],
    [49, 54, 149],
    [69, 117, 180],
    [116, 173, 209],
    [171, 217, 233],
    [254, 224, 144],
    [253, 174, 97],
    [244, 109, 67],
    [215, 48, 39],
];

/// Encodes a coverage map as a binary portable pixmap.
pub fn encode_overlap_image(map: &CoverageMap, format: OverlapImageFormat) -> Result<Vec<u8>> {
    if let Some(&c) = map.counts.iter().find(|&&c| c > 255) {
        return Err(Error::Shape(format!("coverage count {c} does not fit an 8-bit image")));
    }
    let level = |c: u32| (c as usize).min(8);
    let mut out = Vec::new();
    match format {
        OverlapImageFormat::Gray => {
            write!(out, "P5\n{} {}\n255\n", map.width, map.height).unwrap();
            out.extend(map.counts.iter().map(|&c| GRAY_LEVELS[level(c)]));
        }
        OverlapImageFormat::FalseColor => {
            write!(out, "P6\n{} {}\n255\n", map.width, map.height).unwrap();
            for &c in &map.counts {
                out.extend_from_slice(&FALSE_COLOR[level(c)]);
            }
        }
    }
    Ok(out)
}

pub fn emit_overlap_image(map: &CoverageMap, path: &Path, format: OverlapImageFormat) -> Result<()> {
    let bytes = encode_overlap_image(map, format)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
