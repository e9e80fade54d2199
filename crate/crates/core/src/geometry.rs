//! Window schedules for the three tiling strategies.
//!
//! A schedule is an ordered list of square windows over an `h x w` image.
//! Flip-n-Slide lays eight stride-`t` grids over the image, anchored at
//! quarter-tile offsets, so interior pixels fall in exactly one window of
//! each grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of a square tile. Always a positive multiple of 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct TileSize(usize);

impl TileSize {
    pub fn new(t: usize) -> Result<Self> {
        if t < 4 || t % 4 != 0 {
            return Err(Error::InvalidTileSize(t));
        }
        Ok(TileSize(t))
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn quarter(self) -> usize {
        self.0 / 4
    }

    pub fn half(self) -> usize {
        self.0 / 2
    }
}

impl TryFrom<usize> for TileSize {
    type Error = Error;

    fn try_from(t: usize) -> Result<Self> {
        TileSize::new(t)
    }
}

impl From<TileSize> for usize {
    fn from(t: TileSize) -> usize {
        t.0
    }
}

impl fmt::Display for TileSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Disjoint stride-`t` partition.
    #[serde(rename = "none")]
    NoOverlap,
    /// Single grid with stride `t/2`.
    #[serde(rename = "overlap50")]
    Overlap50,
    /// Eight stride-`t` grids at quarter-tile offsets.
    #[serde(rename = "flipnslide")]
    FlipNSlide,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::NoOverlap, Strategy::Overlap50, Strategy::FlipNSlide];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::NoOverlap => "none",
            Strategy::Overlap50 => "overlap50",
            Strategy::FlipNSlide => "flipnslide",
        }
    }

    /// Number of distinct grids the strategy emits.
    pub fn grid_count(self) -> usize {
        match self {
            Strategy::FlipNSlide => 8,
            _ => 1,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown strategy {s:?} (none|overlap50|flipnslide)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum EdgePolicy {
    /// Only windows that lie fully inside the image are emitted.
    #[default]
    #[serde(rename = "interior")]
    InteriorOnly,
    /// The image is virtually extended by mirror reflection so each grid
    /// spans the full extent.
    #[serde(rename = "pad")]
    PadReflect,
}

impl EdgePolicy {
    pub fn name(self) -> &'static str {
        match self {
            EdgePolicy::InteriorOnly => "interior",
            EdgePolicy::PadReflect => "pad",
        }
    }
}

impl fmt::Display for EdgePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(EdgePolicy::InteriorOnly),
            "pad" => Ok(EdgePolicy::PadReflect),
            _ => Err(Error::Usage(format!("unknown edge policy {s:?} (interior|pad)"))),
        }
    }
}

/// Source rectangle of one tile plus the grid it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowSpec {
    pub grid_index: usize,
    pub row_offset: usize,
    pub col_offset: usize,
    pub size: TileSize,
}

impl WindowSpec {
    pub fn row_end(&self) -> usize {
        self.row_offset + self.size.get()
    }

    pub fn col_end(&self) -> usize {
        self.col_offset + self.size.get()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_offset..self.row_end()).contains(&row) && (self.col_offset..self.col_end()).contains(&col)
    }

    /// Half-open `(row0, col0, row1, col1)` intersection, if nonempty.
    pub fn intersection(&self, other: &WindowSpec) -> Option<(usize, usize, usize, usize)> {
        let r0 = self.row_offset.max(other.row_offset);
        let c0 = self.col_offset.max(other.col_offset);
        let r1 = self.row_end().min(other.row_end());
        let c1 = self.col_end().min(other.col_end());
        (r0 < r1 && c0 < c1).then_some((r0, c0, r1, c1))
    }

    pub fn overlaps(&self, other: &WindowSpec) -> bool {
        self.intersection(other).is_some()
    }

    pub fn within(&self, height: usize, width: usize) -> bool {
        self.row_end() <= height && self.col_end() <= width
    }
}

/// Anchor offsets of the eight Flip-n-Slide grids, in canonical grid order.
///
/// Grid 0 is the plain partition; grids 1..4 are the half-tile shifts and
/// grids 4..8 sit on the quarter / three-quarter diagonals.
pub fn grid_offsets(t: TileSize) -> [(usize, usize); 8] {
    let (q, h) = (t.quarter(), t.half());
    let tq = 3 * q;
    [(0, 0), (0, h), (h, 0), (h, h), (q, q), (q, tq), (tq, q), (tq, tq)]
}

/// Same as [`grid_offsets`] for a raw size, validating it first.
pub fn grid_offsets_for(t: usize) -> Result<[(usize, usize); 8]> {
    TileSize::new(t).map(grid_offsets)
}

/// Window start positions along one axis of length `extent`.
fn axis_starts(extent: usize, offset: usize, stride: usize, t: usize, edge: EdgePolicy) -> Vec<usize> {
    match edge {
        EdgePolicy::InteriorOnly => (offset..)
            .step_by(stride)
            .take_while(|&p| p + t <= extent)
            .collect(),
        EdgePolicy::PadReflect if stride == t => {
            let n = extent.div_ceil(t);
            (0..n).map(|k| offset + k * t).collect()
        }
        EdgePolicy::PadReflect => {
            // Fewest stride steps whose last window reaches the far edge.
            let n = (extent - t).div_ceil(stride) + 1;
            (0..n).map(|k| offset + k * stride).collect()
        }
    }
}

fn push_grid(
    out: &mut Vec<WindowSpec>,
    grid_index: usize,
    (row0, col0): (usize, usize),
    stride: usize,
    h: usize,
    w: usize,
    t: TileSize,
    edge: EdgePolicy,
) {
    let rows = axis_starts(h, row0, stride, t.get(), edge);
    let cols = axis_starts(w, col0, stride, t.get(), edge);
    out.reserve(rows.len() * cols.len());
    for &row_offset in &rows {
        for &col_offset in &cols {
            out.push(WindowSpec { grid_index, row_offset, col_offset, size: t });
        }
    }
}

/// Builds the window schedule, sorted by `(grid_index, row_offset, col_offset)`.
pub fn windows(h: usize, w: usize, t: TileSize, strategy: Strategy, edge: EdgePolicy) -> Result<Vec<WindowSpec>> {
    if h < t.get() || w < t.get() {
        return Err(Error::ImageTooSmall { height: h, width: w, tile: t.get() });
    }
    let mut out = Vec::new();
    match strategy {
        Strategy::NoOverlap => push_grid(&mut out, 0, (0, 0), t.get(), h, w, t, edge),
        Strategy::Overlap50 => push_grid(&mut out, 0, (0, 0), t.half(), h, w, t, edge),
        Strategy::FlipNSlide => {
            for (g, offset) in grid_offsets(t).into_iter().enumerate() {
                push_grid(&mut out, g, offset, t.get(), h, w, t, edge);
            }
        }
    }
    Ok(out)
}

/// Window count without materializing the schedule.
pub fn window_count(h: usize, w: usize, t: TileSize, strategy: Strategy, edge: EdgePolicy) -> Result<usize> {
    if h < t.get() || w < t.get() {
        return Err(Error::ImageTooSmall { height: h, width: w, tile: t.get() });
    }
    let axis = |extent, offset, stride| axis_starts(extent, offset, stride, t.get(), edge).len();
    Ok(match strategy {
        Strategy::NoOverlap => axis(h, 0, t.get()) * axis(w, 0, t.get()),
        Strategy::Overlap50 => axis(h, 0, t.half()) * axis(w, 0, t.half()),
        Strategy::FlipNSlide => grid_offsets(t)
            .into_iter()
            .map(|(a, b)| axis(h, a, t.get()) * axis(w, b, t.get()))
            .sum(),
    })
}

/// Maps a virtual coordinate onto `0..extent` by edge-inclusive mirror
/// reflection (`.. 1 0 | 0 1 .. n-1 | n-1 n-2 ..`), repeating as needed.
pub fn reflect_index(i: usize, extent: usize) -> usize {
    let m = i % (2 * extent);
    if m < extent {
        m
    } else {
        2 * extent - 1 - m
    }
}
