//! Tile extraction: pair every window with its grid's transform, cut it out
//! of the source, permute it, and hand the records to a sink in canonical
//! order.

use std::collections::HashMap;
use std::hint::black_box;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{reflect_index, EdgePolicy, Strategy, TileSize, WindowSpec};
use crate::io::manifest::{Manifest, SourceInfo};
use crate::raster::Raster;
use crate::transforms::{self, TransformId};

/// Fixed grid-to-transform pairing. Grid 0 keeps the identity so the plain
/// partition can be read back without an inverse pass.
pub fn assign_transform(grid_index: usize) -> Result<TransformId> {
    Ok(match grid_index {
        0 => TransformId::R0,
        1 => TransformId::R90,
        2 => TransformId::R180,
        3 => TransformId::R270,
        4 => TransformId::R0H,
        5 => TransformId::R0V,
        6 => TransformId::R90H,
        7 => TransformId::R90V,
        g => return Err(Error::InvalidGrid(g)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TilingConfig {
    pub tile_size: TileSize,
    pub strategy: Strategy,
    pub edge: EdgePolicy,
}

impl TilingConfig {
    pub fn new(tile_size: TileSize, strategy: Strategy, edge: EdgePolicy) -> Self {
        TilingConfig { tile_size, strategy, edge }
    }

    /// Baselines never permute their tiles.
    pub fn transform_for(&self, grid_index: usize) -> Result<TransformId> {
        match self.strategy {
            Strategy::FlipNSlide => assign_transform(grid_index),
            _ if grid_index == 0 => Ok(TransformId::R0),
            _ => Err(Error::InvalidGrid(grid_index)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileRecord {
    pub tile_id: usize,
    pub window: WindowSpec,
    pub transform: TransformId,
    pub payload: Raster,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileSet {
    pub manifest: Manifest,
    pub records: Vec<TileRecord>,
}

impl TileSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// All payloads back to back as one `N x C x t x t` block.
    pub fn stacked_payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.manifest.payload_bytes() as usize);
        for r in &self.records {
            out.extend_from_slice(r.payload.bytes());
        }
        out
    }

    /// Records of one grid, in canonical order.
    pub fn grid(&self, grid_index: usize) -> impl Iterator<Item = &TileRecord> {
        self.records.iter().filter(move |r| r.window.grid_index == grid_index)
    }

    /// Keeps only the records matching `keep`, renumbering nothing.
    pub fn retain(&mut self, mut keep: impl FnMut(&TileRecord) -> bool) {
        let kept: Vec<bool> = self.records.iter().map(&mut keep).collect();
        let mut it = kept.iter();
        self.records.retain(|_| *it.next().unwrap());
        let mut it = kept.iter();
        self.manifest.tiles.retain(|_| *it.next().unwrap());
    }
}

/// Receiver of tile records, fed strictly in canonical order.
pub trait TileSink {
    /// Called once with the full plan before any record arrives.
    fn begin(&mut self, manifest: &Manifest) -> Result<()>;
    fn accept(&mut self, record: TileRecord) -> Result<()>;
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Collects records in memory, optionally refusing plans above a byte budget.
#[derive(Debug, Default)]
pub struct TileSetBuilder {
    capacity: Option<u64>,
    manifest: Option<Manifest>,
    records: Vec<TileRecord>,
}

impl TileSetBuilder {
    pub fn new() -> Self {
        TileSetBuilder::default()
    }

    pub fn with_capacity_limit(bytes: u64) -> Self {
        TileSetBuilder { capacity: Some(bytes), ..TileSetBuilder::default() }
    }

    pub fn build(self) -> Result<TileSet> {
        let manifest = self.manifest.ok_or_else(|| Error::Usage("tile set builder never started".into()))?;
        if manifest.tiles.len() != self.records.len() {
            return Err(Error::Corruption(format!(
                "manifest lists {} tiles but {} records arrived",
                manifest.tiles.len(),
                self.records.len()
            )));
        }
        Ok(TileSet { manifest, records: self.records })
    }
}

impl TileSink for TileSetBuilder {
    fn begin(&mut self, manifest: &Manifest) -> Result<()> {
        let required = manifest.payload_bytes();
        if let Some(capacity) = self.capacity {
            if required > capacity {
                return Err(Error::StorageExceeded { required, capacity });
            }
        }
        self.records = Vec::with_capacity(manifest.tiles.len());
        self.manifest = Some(manifest.clone());
        Ok(())
    }

    fn accept(&mut self, record: TileRecord) -> Result<()> {
        self.records.push(record);
        Ok(())
    }
}

/// Appends every payload to one contiguous `N x C x t x t` buffer, the
/// layout handed across array-library boundaries.
#[derive(Debug, Default)]
pub struct StackedSink {
    manifest: Option<Manifest>,
    payload: Vec<u8>,
}

impl StackedSink {
    pub fn new() -> Self {
        StackedSink::default()
    }

    /// The plan and the stacked payloads, in manifest order.
    pub fn into_parts(self) -> Result<(Manifest, Vec<u8>)> {
        let manifest = self.manifest.ok_or_else(|| Error::Usage("stacked sink never started".into()))?;
        if self.payload.len() as u64 != manifest.payload_bytes() {
            return Err(Error::Corruption(format!(
                "stacked {} bytes, manifest implies {}",
                self.payload.len(),
                manifest.payload_bytes()
            )));
        }
        Ok((manifest, self.payload))
    }
}

impl TileSink for StackedSink {
    fn begin(&mut self, manifest: &Manifest) -> Result<()> {
        self.payload = Vec::with_capacity(manifest.payload_bytes() as usize);
        self.manifest = Some(manifest.clone());
        Ok(())
    }

    fn accept(&mut self, record: TileRecord) -> Result<()> {
        self.payload.extend_from_slice(record.payload.bytes());
        Ok(())
    }
}

/// Drops payloads after touching them; used for timing.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct NullSink {
    pub tiles: usize,
    pub bytes: u64,
}

impl TileSink for NullSink {
    fn begin(&mut self, _: &Manifest) -> Result<()> {
        *self = NullSink::default();
        Ok(())
    }

    fn accept(&mut self, record: TileRecord) -> Result<()> {
        self.tiles += 1;
        self.bytes += black_box(record.payload.bytes()).len() as u64;
        Ok(())
    }
}

/// Cuts `window` out of `source`, reflecting across edges where it overhangs.
pub fn extract(source: &Raster, window: &WindowSpec) -> Raster {
    let t = window.size.get();
    let (h, w) = (source.height(), source.width());
    let e = source.dtype().size();
    let row_bytes = t * e;
    let mut data = vec![0u8; source.channels() * t * row_bytes];
    let src = source.bytes();
    let plane = source.plane_bytes();

    if window.within(h, w) {
        for ch in 0..source.channels() {
            for r in 0..t {
                let s = ch * plane + ((window.row_offset + r) * w + window.col_offset) * e;
                let d = (ch * t + r) * row_bytes;
                data[d..d + row_bytes].copy_from_slice(&src[s..s + row_bytes]);
            }
        }
    } else {
        let cols: Vec<usize> = (0..t).map(|c| reflect_index(window.col_offset + c, w)).collect();
        let contiguous = window.col_end() <= w;
        for ch in 0..source.channels() {
            for r in 0..t {
                let sr = reflect_index(window.row_offset + r, h);
                let row_start = ch * plane + sr * w * e;
                let d = (ch * t + r) * row_bytes;
                let out = &mut data[d..d + row_bytes];
                if contiguous {
                    let s = row_start + window.col_offset * e;
                    out.copy_from_slice(&src[s..s + row_bytes]);
                } else {
                    for (px, &sc) in out.chunks_exact_mut(e).zip(&cols) {
                        let s = row_start + sc * e;
                        px.copy_from_slice(&src[s..s + e]);
                    }
                }
            }
        }
    }
    Raster::from_bytes(source.channels(), t, t, source.dtype(), data).expect("tile shape")
}

fn build_record(source: &Raster, tile_id: usize, window: WindowSpec, transform: TransformId) -> TileRecord {
    let cut = extract(source, &window);
    let payload = if transform == TransformId::R0 {
        cut
    } else {
        let t = window.size.get();
        let e = source.dtype().size();
        let plane = t * t * e;
        let mut out = vec![0u8; cut.bytes().len()];
        for (s, d) in cut.bytes().chunks_exact(plane).zip(out.chunks_exact_mut(plane)) {
            transforms::apply_plane(transform, t, e, s, d);
        }
        Raster::from_bytes(source.channels(), t, t, source.dtype(), out).expect("tile shape")
    };
    TileRecord { tile_id, window, transform, payload }
}

/// Runs tiling jobs, optionally on a dedicated worker pool.
pub struct Tiler {
    config: TilingConfig,
    pool: Option<rayon::ThreadPool>,
    batch_bytes: usize,
}

const DEFAULT_BATCH_BYTES: usize = 32 << 20;

impl Tiler {
    pub fn new(config: TilingConfig) -> Self {
        Tiler { config, pool: None, batch_bytes: DEFAULT_BATCH_BYTES }
    }

    /// Caps the number of extraction workers. `0` means one per core.
    pub fn with_threads(mut self, threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {threads} worker threads: {e}")))?;
        self.pool = Some(pool);
        Ok(self)
    }

    pub fn config(&self) -> &TilingConfig {
        &self.config
    }

    /// Streams every tile of `source` into `sink`; returns the tile count.
    pub fn run<S: TileSink + ?Sized>(&self, source: &Raster, sink: &mut S) -> Result<usize> {
        let manifest = Manifest::plan(SourceInfo::of(source), &self.config)?;
        sink.begin(&manifest)?;

        let specs = manifest.windows();
        let per_batch = (self.batch_bytes / manifest.tile_bytes().max(1)).max(1);
        let jobs: Vec<(usize, WindowSpec, TransformId)> = manifest
            .tiles
            .iter()
            .zip(&specs)
            .map(|(e, w)| (e.tile_id, *w, e.transform))
            .collect();

        for batch in jobs.chunks(per_batch) {
            let make = || -> Vec<TileRecord> {
                batch.par_iter().map(|&(id, w, f)| build_record(source, id, w, f)).collect()
            };
            let records = match &self.pool {
                Some(pool) => pool.install(make),
                None => make(),
            };
            for record in records {
                sink.accept(record)?;
            }
        }
        sink.finish()?;
        Ok(jobs.len())
    }

    pub fn tile(&self, source: &Raster) -> Result<TileSet> {
        let mut builder = TileSetBuilder::new();
        self.run(source, &mut builder)?;
        builder.build()
    }
}

/// Tiles `source` into an in-memory [`TileSet`].
pub fn tile_image(source: &Raster, t: TileSize, strategy: Strategy, edge: EdgePolicy) -> Result<TileSet> {
    Tiler::new(TilingConfig::new(t, strategy, edge)).tile(source)
}

/// Rebuilds the source from the grid-0 tiles.
///
/// Each `t`-aligned output cell is copied out of any grid-0 tile that covers
/// its in-image part. Interior tile sets yield the `t`-aligned extent;
/// padded sets yield the full source extent.
pub fn reconstruct(tiles: &TileSet) -> Result<Raster> {
    let m = &tiles.manifest;
    let t = m.tile_size.get();
    let src = m.source;
    let (rows, cols, out_h, out_w) = match m.edge_policy {
        EdgePolicy::InteriorOnly => {
            let (r, c) = (src.height / t, src.width / t);
            (r, c, r * t, c * t)
        }
        EdgePolicy::PadReflect => (src.height.div_ceil(t), src.width.div_ceil(t), src.height, src.width),
    };

    let mut by_offset: HashMap<(usize, usize), &TileRecord> = HashMap::new();
    let (mut row_starts, mut col_starts) = (Vec::new(), Vec::new());
    for rec in tiles.grid(0) {
        let w = &rec.window;
        by_offset.entry((w.row_offset, w.col_offset)).or_insert(rec);
        row_starts.push(w.row_offset);
        col_starts.push(w.col_offset);
    }
    for v in [&mut row_starts, &mut col_starts] {
        v.sort_unstable();
        v.dedup();
    }
    // Starts whose window spans `[lo, hi)`.
    let spanning = |starts: &[usize], lo: usize, hi: usize| -> Vec<usize> {
        starts.iter().copied().filter(|&s| s <= lo && s + t >= hi).collect()
    };

    let mut plan = Vec::with_capacity(rows * cols);
    let mut missing = Vec::new();
    for i in 0..rows {
        let (r_lo, r_hi) = (i * t, ((i + 1) * t).min(out_h));
        let row_cands = spanning(&row_starts, r_lo, r_hi);
        for j in 0..cols {
            let (c_lo, c_hi) = (j * t, ((j + 1) * t).min(out_w));
            let col_cands = spanning(&col_starts, c_lo, c_hi);
            let found = row_cands
                .iter()
                .flat_map(|&r| col_cands.iter().map(move |&c| (r, c)))
                .find_map(|key| by_offset.get(&key).copied());
            match found {
                Some(rec) => plan.push((i, j, rec)),
                None => missing.push((r_lo, c_lo)),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteCoverage { missing });
    }

    let e = src.dtype.size();
    let mut out = Raster::zeros(src.channels, out_h, out_w, src.dtype)?;
    let out_plane = out_h * out_w * e;
    let data = out.bytes_mut();
    for (i, j, rec) in plan {
        if rec.payload.channels() != src.channels
            || rec.payload.dtype() != src.dtype
            || rec.payload.height() != t
            || rec.payload.width() != t
        {
            return Err(Error::Corruption(format!("tile {} has the wrong shape", rec.tile_id)));
        }
        let tile = transforms::apply(rec.transform.inverse(), &rec.payload)?;
        let (dr, dc) = (i * t - rec.window.row_offset, j * t - rec.window.col_offset);
        let copy_rows = t.min(out_h - i * t);
        let copy_bytes = t.min(out_w - j * t) * e;
        let bytes = tile.bytes();
        for ch in 0..src.channels {
            for r in 0..copy_rows {
                let s = ((ch * t + dr + r) * t + dc) * e;
                let d = ch * out_plane + ((i * t + r) * out_w + j * t) * e;
                data[d..d + copy_bytes].copy_from_slice(&bytes[s..s + copy_bytes]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;

    fn ramp(h: usize, w: usize) -> Raster {
        let values: Vec<u16> = (0..h * w).map(|i| i as u16).collect();
        Raster::from_elements(1, h, w, &values).unwrap()
    }

    fn ts(t: usize) -> TileSize {
        TileSize::new(t).unwrap()
    }

    #[test]
    fn transform_table_examples() {
        assert_eq!(assign_transform(0).unwrap(), TransformId::R0);
        assert_eq!(assign_transform(3).unwrap(), TransformId::R270);
        assert_eq!(assign_transform(8).unwrap_err().code(), "invalid-grid");
    }

    #[test]
    fn transform_table_is_bijective() {
        let mut seen: Vec<_> = (0..8).map(|g| assign_transform(g).unwrap()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn ramp_no_overlap_tiles_equal_windows() {
        let src = ramp(512, 512);
        let set = tile_image(&src, ts(256), Strategy::NoOverlap, EdgePolicy::InteriorOnly).unwrap();
        assert_eq!(set.len(), 4);
        for rec in &set.records {
            let w = rec.window;
            assert_eq!(rec.transform, TransformId::R0);
            assert_eq!(rec.payload, src.crop(w.row_offset, w.col_offset, 256, 256).unwrap());
        }
    }

    #[test]
    fn payload_is_transformed_window() {
        let src = ramp(40, 36);
        let set = tile_image(&src, ts(8), Strategy::FlipNSlide, EdgePolicy::InteriorOnly).unwrap();
        for rec in &set.records {
            let w = rec.window;
            let cut = src.crop(w.row_offset, w.col_offset, 8, 8).unwrap();
            assert_eq!(rec.payload, transforms::apply(rec.transform, &cut).unwrap());
            assert_eq!(rec.transform, assign_transform(w.grid_index).unwrap());
        }
    }

    #[test]
    fn padded_extraction_reflects() {
        let src = ramp(5, 6);
        let w = WindowSpec { grid_index: 0, row_offset: 3, col_offset: 4, size: ts(4) };
        let tile = extract(&src, &w).to_vec::<u16>().unwrap();
        // rows 3,4,4,3 and cols 4,5,5,4
        let expect: Vec<u16> = [3, 4, 4, 3]
            .iter()
            .flat_map(|&r| [4, 5, 5, 4].map(|c| (r * 6 + c) as u16))
            .collect();
        assert_eq!(tile, expect);
    }

    #[test]
    fn storage_budget_is_enforced_before_work() {
        let src = ramp(64, 64);
        let tiler = Tiler::new(TilingConfig::new(ts(16), Strategy::FlipNSlide, EdgePolicy::PadReflect));
        let mut sink = TileSetBuilder::with_capacity_limit(1000);
        let err = tiler.run(&src, &mut sink).unwrap_err();
        assert_eq!(err.code(), "out-of-storage");

        let need = 8 * 16 * 16 * 16 * 2;
        let mut sink = TileSetBuilder::with_capacity_limit(need);
        assert_eq!(tiler.run(&src, &mut sink).unwrap(), 128);
    }

    #[test]
    fn null_sink_counts() {
        let src = ramp(64, 48);
        let mut sink = NullSink::default();
        let n = Tiler::new(TilingConfig::new(ts(16), Strategy::Overlap50, EdgePolicy::InteriorOnly))
            .run(&src, &mut sink)
            .unwrap();
        assert_eq!(n, 7 * 5);
        assert_eq!(sink.tiles, n);
        assert_eq!(sink.bytes, (n * 16 * 16 * 2) as u64);
    }

    #[test]
    fn small_batches_keep_order() {
        let src = ramp(48, 48);
        let config = TilingConfig::new(ts(8), Strategy::FlipNSlide, EdgePolicy::PadReflect);
        let mut tiler = Tiler::new(config).with_threads(3).unwrap();
        tiler.batch_bytes = 1;
        let a = tiler.tile(&src).unwrap();
        let b = tile_image(&src, ts(8), Strategy::FlipNSlide, EdgePolicy::PadReflect).unwrap();
        assert_eq!(a, b);
        let ids: Vec<_> = a.records.iter().map(|r| r.tile_id).collect();
        assert_eq!(ids, (0..a.len()).collect::<Vec<_>>());
    }

    #[test]
    fn reconstruct_no_overlap_round_trip() {
        let src = ramp(37, 29);
        let set = tile_image(&src, ts(8), Strategy::NoOverlap, EdgePolicy::InteriorOnly).unwrap();
        assert_eq!(reconstruct(&set).unwrap(), src.crop(0, 0, 32, 24).unwrap());
    }

    #[test]
    fn reconstruct_padded_returns_full_extent() {
        let src = ramp(37, 29);
        let set = tile_image(&src, ts(8), Strategy::FlipNSlide, EdgePolicy::PadReflect).unwrap();
        assert_eq!(reconstruct(&set).unwrap(), src);
    }

    #[test]
    fn reconstruct_from_overlap50_uses_aligned_subset() {
        let src = ramp(40, 40);
        let set = tile_image(&src, ts(8), Strategy::Overlap50, EdgePolicy::InteriorOnly).unwrap();
        assert_eq!(reconstruct(&set).unwrap(), src);
    }

    #[test]
    fn reconstruct_reports_missing_window() {
        let src = ramp(32, 32);
        let mut set = tile_image(&src, ts(8), Strategy::FlipNSlide, EdgePolicy::InteriorOnly).unwrap();
        set.retain(|r| !(r.window.grid_index == 0 && r.window.row_offset == 8 && r.window.col_offset == 16));
        match reconstruct(&set).unwrap_err() {
            Error::IncompleteCoverage { missing } => assert_eq!(missing, vec![(8, 16)]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn counts_match_schedule() {
        let src = ramp(512, 512);
        let set = tile_image(&src, ts(128), Strategy::FlipNSlide, EdgePolicy::InteriorOnly).unwrap();
        assert_eq!(set.len(), 85);
        assert_eq!(
            set.len(),
            geometry::window_count(512, 512, ts(128), Strategy::FlipNSlide, EdgePolicy::InteriorOnly).unwrap()
        );
        assert_eq!(set.stacked_payload().len(), 85 * 128 * 128 * 2);
    }
}
