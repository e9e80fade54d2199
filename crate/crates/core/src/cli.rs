//! Command-line front end.
//!
//! Results go to stdout as one JSON line (CSV for `bench`); diagnostics go
//! to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bench::{self, BenchConfig};
use crate::coverage::{self, OverlapImageFormat};
use crate::error::{Error, Result};
use crate::geometry::{self, EdgePolicy, Strategy, TileSize};
use crate::io::{self, tileset, Manifest, OutputMode, SourceInfo};
use crate::pipeline::{self, Tiler, TilingConfig};
use crate::raster::DType;

/// Offending pairs listed in a coverage report before truncation.
const REPORT_PAIR_LIMIT: usize = 32;

#[derive(Debug, Parser)]
#[command(name = "flipnslide", version, about = "Overlapping, per-grid transformed tiling of large rasters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tile a raster and write the tile set.
    Tile(TileArgs),
    /// Report overlap counts and same-orientation overlaps for a schedule.
    Coverage(CoverageArgs),
    /// Time all strategies over a matrix of tile sizes (CSV on stdout).
    Bench(BenchArgs),
    /// Rebuild the source raster from a tile set.
    Reconstruct(IoArgs),
    /// Summarize a tile set's manifest.
    Inspect(InspectArgs),
}

fn parse_tile_size(s: &str) -> std::result::Result<TileSize, String> {
    let t: usize = s.parse().map_err(|_| format!("{s:?} is not an integer"))?;
    TileSize::new(t).map_err(|e| e.to_string())
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_edge(s: &str) -> std::result::Result<EdgePolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<OutputMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_dtype(s: &str) -> std::result::Result<DType, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    #[arg(long, default_value = "256", value_parser = parse_tile_size)]
    pub tile_size: TileSize,
    #[arg(long, default_value = "flipnslide", value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, default_value = "interior", value_parser = parse_edge)]
    pub edge: EdgePolicy,
}

impl ScheduleArgs {
    fn config(&self) -> TilingConfig {
        TilingConfig::new(self.tile_size, self.strategy, self.edge)
    }
}

#[derive(Debug, Args)]
pub struct TileArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long, default_value = "dir", value_parser = parse_mode)]
    pub format: OutputMode,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "FNS_THREADS")]
    pub threads: Option<usize>,
    /// Also write the schedule's overlap map as a PGM image.
    #[arg(long)]
    pub emit_coverage_map: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// Raster whose dimensions define the schedule.
    #[arg(long, required_unless_present_all = ["height", "width"])]
    pub input: Option<PathBuf>,
    #[arg(long, conflicts_with = "input", requires = "width")]
    pub height: Option<usize>,
    #[arg(long, conflicts_with = "input", requires = "height")]
    pub width: Option<usize>,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub emit_coverage_map: Option<PathBuf>,
    /// Render the map as a false-colour PPM instead of grayscale PGM.
    #[arg(long)]
    pub false_color: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = bench::DEFAULT_IMAGE_SIZE)]
    pub image_size: usize,
    #[arg(long, value_delimiter = ',', default_values_t = bench::DEFAULT_TILE_SIZES)]
    pub tile_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy, default_value = "none,overlap50,flipnslide")]
    pub strategies: Vec<Strategy>,
    #[arg(long, default_value_t = bench::DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value = "pad", value_parser = parse_edge)]
    pub edge: EdgePolicy,
    #[arg(long, default_value = "u8", value_parser = parse_dtype)]
    pub dtype: DType,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, env = "FNS_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub input: PathBuf,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Tile(a) => cmd_tile(&a, out),
        Command::Coverage(a) => cmd_coverage(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Reconstruct(a) => cmd_reconstruct(&a, out),
        Command::Inspect(a) => cmd_inspect(&a, out),
    }
}

fn emit(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    writeln!(out, "{value}").map_err(|e| Error::io("<stdout>", e))
}

fn write_map(manifest: &Manifest, path: &Path, format: OverlapImageFormat) -> Result<coverage::CoverageMap> {
    let map = coverage::coverage_map(manifest.source.height, manifest.source.width, &manifest.windows(), manifest.edge_policy)?;
    coverage::emit_overlap_image(&map, path, format)?;
    Ok(map)
}

pub fn cmd_tile(a: &TileArgs, out: &mut dyn Write) -> Result<()> {
    let source = io::read_raster(&a.input)?;
    let config = a.schedule.config();
    // Fail on geometry before creating any output.
    geometry::windows(source.height(), source.width(), config.tile_size, config.strategy, config.edge)?;

    let mut tiler = Tiler::new(config);
    if let Some(n) = a.threads {
        tiler = tiler.with_threads(n)?;
    }
    let start = Instant::now();
    let mut sink = tileset::disk_sink(a.format, &a.output);
    let count = tiler.run(&source, sink.as_mut())?;
    drop(sink);
    let elapsed = start.elapsed().as_secs_f64();

    if let Some(path) = &a.emit_coverage_map {
        let manifest = Manifest::plan(SourceInfo::of(&source), &config)?;
        write_map(&manifest, path, OverlapImageFormat::Gray)?;
    }
    emit(
        out,
        &json!({
            "elapsed_s": elapsed,
            "output": a.output.display().to_string(),
            "strategy": config.strategy,
            "tile_count": count,
        }),
    )
}

pub fn cmd_coverage(a: &CoverageArgs, out: &mut dyn Write) -> Result<()> {
    let source = match (&a.input, a.height, a.width) {
        (Some(path), _, _) => SourceInfo::of(&io::read_raster(path)?),
        (None, Some(height), Some(width)) => SourceInfo { channels: 1, dtype: DType::U8, height, width },
        _ => return Err(Error::Usage("coverage needs --input or both --height and --width".into())),
    };
    let manifest = Manifest::plan(source, &a.schedule.config())?;
    let map = coverage::coverage_map(source.height, source.width, &manifest.windows(), manifest.edge_policy)?;
    if let Some(path) = &a.emit_coverage_map {
        let format = if a.false_color { OverlapImageFormat::FalseColor } else { OverlapImageFormat::Gray };
        coverage::emit_overlap_image(&map, path, format)?;
    }
    let report = coverage::redundancy_from_manifest(&manifest);
    let truncated = report.offending.len() > REPORT_PAIR_LIMIT;
    let value = json!({
        "coverage": {
            "height": map.height,
            "width": map.width,
            "max": map.max(),
            "min": map.min(),
            "total": map.total(),
        },
        "edge_policy": manifest.edge_policy,
        "offending_pairs": &report.offending[..report.offending.len().min(REPORT_PAIR_LIMIT)],
        "offending_pairs_truncated": truncated,
        "overlapping_pairs": report.overlapping_pairs,
        "same_transform_overlapping_pairs": report.same_transform_overlapping_pairs,
        "strategy": manifest.strategy,
        "tile_count": manifest.tiles.len(),
        "tile_size": manifest.tile_size,
    });
    if let Some(path) = &a.output {
        std::fs::write(path, format!("{value}\n")).map_err(|e| Error::io(path, e))?;
    }
    emit(out, &value)
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let config = BenchConfig {
        image_size: a.image_size,
        tile_sizes: a.tile_sizes.clone(),
        strategies: a.strategies.clone(),
        reps: a.reps,
        edge: a.edge,
        dtype: a.dtype,
        channels: a.channels,
        threads: a.threads,
    };
    let results = bench::run(&config)?;
    bench::write_csv(out, &results).map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_reconstruct(a: &IoArgs, out: &mut dyn Write) -> Result<()> {
    let tiles = io::read_tileset(&a.input)?;
    let raster = pipeline::reconstruct(&tiles)?;
    io::write_raster(&a.output, &raster)?;
    emit(
        out,
        &json!({
            "channels": raster.channels(),
            "height": raster.height(),
            "output": a.output.display().to_string(),
            "width": raster.width(),
        }),
    )
}

pub fn cmd_inspect(a: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let m = io::read_manifest(&a.input)?;
    let format = if a.input.is_dir() { OutputMode::Directory } else { OutputMode::Packed };
    emit(
        out,
        &json!({
            "edge_policy": m.edge_policy,
            "format": format.to_string(),
            "grids": m.grid_count(),
            "payload_bytes": m.payload_bytes(),
            "source": m.source,
            "strategy": m.strategy,
            "tile_count": m.tiles.len(),
            "tile_size": m.tile_size,
            "transform_table": m.transform_table,
        }),
    )
}
