//! Wall-clock timing of the tiling stage across strategies and tile sizes.
//!
//! Only tile extraction and permutation are timed: tiles go to a
//! [`NullSink`], so disk throughput never enters the numbers.

use std::io::{self, Write};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, EdgePolicy, Strategy, TileSize};
use crate::pipeline::{NullSink, Tiler, TilingConfig};
use crate::raster::{DType, Raster};

pub const DEFAULT_IMAGE_SIZE: usize = 10240;
pub const DEFAULT_TILE_SIZES: [usize; 4] = [64, 128, 256, 512];
pub const DEFAULT_REPS: usize = 7;

pub const CSV_HEADER: &str = "strategy,tile_size,image_size,reps,mean_s,std_s,tile_count";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub strategy: Strategy,
    pub tile_size: usize,
    pub image_size: usize,
    pub repetitions: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub tile_count: usize,
}

impl BenchResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{}",
            self.strategy.name(),
            self.tile_size,
            self.image_size,
            self.repetitions,
            self.mean_s,
            self.std_s,
            self.tile_count
        )
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub image_size: usize,
    pub tile_sizes: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub reps: usize,
    pub edge: EdgePolicy,
    pub dtype: DType,
    pub channels: usize,
    /// Worker cap per cell; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            image_size: DEFAULT_IMAGE_SIZE,
            tile_sizes: DEFAULT_TILE_SIZES.to_vec(),
            strategies: Strategy::ALL.to_vec(),
            reps: DEFAULT_REPS,
            edge: EdgePolicy::PadReflect,
            dtype: DType::U8,
            channels: 1,
            threads: None,
        }
    }
}

/// Deterministic non-constant test pattern.
pub fn synthetic_image(size: usize, channels: usize, dtype: DType) -> Raster {
    let e = dtype.size();
    let mut data = vec![0u8; channels * size * size * e];
    for (i, px) in data.chunks_exact_mut(e).enumerate() {
        let v = (i.wrapping_mul(2_654_435_761) >> 7) as u64;
        match dtype {
            DType::U8 => px[0] = v as u8,
            DType::U16 => px.copy_from_slice(&(v as u16).to_le_bytes()),
            DType::F32 => px.copy_from_slice(&((v & 0xffff) as f32).to_le_bytes()),
            DType::F64 => px.copy_from_slice(&((v & 0xffff) as f64).to_le_bytes()),
        }
    }
    Raster::from_bytes(channels, size, size, dtype, data).expect("synthetic shape")
}

/// Mean and sample standard deviation; the deviation of one sample is 0.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Times every `(strategy, tile size)` cell, strategy-major.
pub fn run(config: &BenchConfig) -> Result<Vec<BenchResult>> {
    if config.reps == 0 {
        return Err(Error::Usage("repetitions must be at least 1".into()));
    }
    let sizes = config
        .tile_sizes
        .iter()
        .map(|&t| TileSize::new(t))
        .collect::<Result<Vec<_>>>()?;
    if let Some(max) = sizes.iter().max() {
        if config.image_size % max.get() != 0 {
            return Err(Error::Usage(format!(
                "image size {} is not divisible by the largest tile size {max}",
                config.image_size
            )));
        }
    }

    let source = synthetic_image(config.image_size, config.channels, config.dtype);
    let mut results = Vec::with_capacity(config.strategies.len() * sizes.len());
    for &strategy in &config.strategies {
        for &t in &sizes {
            let mut tiler = Tiler::new(TilingConfig::new(t, strategy, config.edge));
            if let Some(n) = config.threads {
                tiler = tiler.with_threads(n)?;
            }
            let expected = geometry::window_count(config.image_size, config.image_size, t, strategy, config.edge)?;
            let mut times = Vec::with_capacity(config.reps);
            for _ in 0..config.reps {
                let mut sink = NullSink::default();
                let start = Instant::now();
                let n = tiler.run(&source, &mut sink)?;
                times.push(start.elapsed().as_secs_f64());
                debug_assert_eq!(n, expected);
                if sink.tiles != expected {
                    return Err(Error::Corruption(format!("{strategy}/{t}: {} tiles, expected {expected}", sink.tiles)));
                }
            }
            let (mean_s, std_s) = mean_std(&times);
            results.push(BenchResult {
                strategy,
                tile_size: t.get(),
                image_size: config.image_size,
                repetitions: config.reps,
                mean_s,
                std_s,
                tile_count: expected,
            });
        }
    }
    Ok(results)
}

/// Convenience wrapper using the default dtype, edge policy and worker pool.
pub fn run_matrix(image_size: usize, tile_sizes: &[usize], strategies: &[Strategy], reps: usize) -> Result<Vec<BenchResult>> {
    run(&BenchConfig {
        image_size,
        tile_sizes: tile_sizes.to_vec(),
        strategies: strategies.to_vec(),
        reps,
        ..BenchConfig::default()
    })
}

pub fn write_csv<W: Write + ?Sized>(out: &mut W, results: &[BenchResult]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in results {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// True when `slower` is not faster than `faster` by more than one standard
/// deviation of either cell.
pub fn ordered_within_std(faster: &BenchResult, slower: &BenchResult) -> bool {
    faster.mean_s < slower.mean_s + faster.std_s.max(slower.std_s)
}
