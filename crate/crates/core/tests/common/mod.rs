//! Brute-force oracles shared by the integration suites. Nothing here calls
//! into the code paths it is used to check.

#![allow(dead_code)]

use flipnslide::{EdgePolicy, Raster, Strategy, TransformId};

/// Axis anchors of the eight grids, written out longhand.
pub fn oracle_offsets(t: usize) -> Vec<(usize, usize)> {
    let q = t / 4;
    vec![(0, 0), (0, 2 * q), (2 * q, 0), (2 * q, 2 * q), (q, q), (q, 3 * q), (3 * q, q), (3 * q, 3 * q)]
}

/// Every interior window position, found by testing each candidate origin.
pub fn enumerate_windows(h: usize, w: usize, t: usize, strategy: Strategy) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let grids: Vec<(usize, usize, usize)> = match strategy {
        Strategy::NoOverlap => vec![(0, 0, t)],
        Strategy::Overlap50 => vec![(0, 0, t / 2)],
        Strategy::FlipNSlide => oracle_offsets(t).into_iter().map(|(a, b)| (a, b, t)).collect(),
    };
    for (g, &(a, b, stride)) in grids.iter().enumerate() {
        for r in 0..h {
            for c in 0..w {
                let on_lattice = r >= a && c >= b && (r - a) % stride == 0 && (c - b) % stride == 0;
                if on_lattice && r + t <= h && c + t <= w {
                    out.push((g, r, c));
                }
            }
        }
    }
    out
}

/// Per-pixel count by testing every pixel against every window.
pub fn membership_coverage(h: usize, w: usize, t: usize, windows: &[(usize, usize)]) -> Vec<u32> {
    let mut counts = vec![0u32; h * w];
    for r in 0..h {
        for c in 0..w {
            counts[r * w + c] = windows
                .iter()
                .filter(|&&(wr, wc)| wr <= r && r < wr + t && wc <= c && c < wc + t)
                .count() as u32;
        }
    }
    counts
}

/// Per-pixel count by painting each window, clipped to the image.
pub fn painted_coverage(h: usize, w: usize, t: usize, windows: &[(usize, usize)]) -> Vec<u32> {
    let mut counts = vec![0u32; h * w];
    for &(wr, wc) in windows {
        for r in wr..(wr + t).min(h) {
            for c in wc..(wc + t).min(w) {
                counts[r * w + c] += 1;
            }
        }
    }
    counts
}

/// Interior band in which every grid covers a pixel: at least `3t/4` from
/// the near edges and short of the last full tile boundary of every grid.
pub fn eight_coverage_band(extent: usize, t: usize) -> std::ops::Range<usize> {
    let start = 3 * t / 4;
    let end = [0, t / 4, t / 2, 3 * t / 4]
        .into_iter()
        .map(|a| a + (extent - a) / t * t)
        .min()
        .unwrap();
    start..end
}

/// Unordered window pairs with a nonempty intersection, by checking all pairs.
pub fn overlapping_pairs(windows: &[(usize, usize)], t: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..windows.len() {
        for j in i + 1..windows.len() {
            let (a, b) = (windows[i], windows[j]);
            let rows = a.0.max(b.0) < (a.0 + t).min(b.0 + t);
            let cols = a.1.max(b.1) < (a.1 + t).min(b.1 + t);
            if rows && cols {
                out.push((i, j));
            }
        }
    }
    out
}

pub type Grid = Vec<Vec<u32>>;

pub fn marker_grid(t: usize) -> Grid {
    (0..t).map(|r| (0..t).map(|c| (r * t + c) as u32).collect()).collect()
}

pub fn rot90_ccw(g: &Grid) -> Grid {
    let n = g.len();
    // transpose, then reverse the row order
    let transposed: Grid = (0..n).map(|r| (0..n).map(|c| g[c][r]).collect()).collect();
    transposed.into_iter().rev().collect()
}

pub fn hflip(g: &Grid) -> Grid {
    g.iter().map(|row| row.iter().rev().copied().collect()).collect()
}

pub fn vflip(g: &Grid) -> Grid {
    g.iter().rev().cloned().collect()
}

/// Reference action of each label, built from the primitive operations.
pub fn oracle_apply(f: TransformId, g: &Grid) -> Grid {
    let rot = |k: usize| (0..k).fold(g.clone(), |acc, _| rot90_ccw(&acc));
    match f {
        TransformId::R0 => g.clone(),
        TransformId::R90 => rot(1),
        TransformId::R180 => rot(2),
        TransformId::R270 => rot(3),
        TransformId::R0H => hflip(g),
        TransformId::R0V => vflip(g),
        TransformId::R90H => hflip(&rot(1)),
        TransformId::R90V => vflip(&rot(1)),
    }
}

pub fn grid_to_raster(g: &Grid) -> Raster {
    let t = g.len();
    let flat: Vec<f64> = g.iter().flatten().map(|&v| v as f64).collect();
    Raster::from_elements(1, t, t, &flat).unwrap()
}

pub fn raster_to_grid(r: &Raster) -> Grid {
    let v = r.to_vec::<f64>().unwrap();
    let t = r.width();
    v.chunks(t).map(|row| row.iter().map(|&x| x as u32).collect()).collect()
}

/// `h x w` image whose value at `(r, c)` is `r * w + c`.
pub fn marker_image(h: usize, w: usize) -> Raster {
    let values: Vec<f64> = (0..h * w).map(|i| i as f64).collect();
    Raster::from_elements(1, h, w, &values).unwrap()
}

pub fn random_raster(rng: &mut impl rand::Rng, dtype: flipnslide::DType, c: usize, h: usize, w: usize) -> Raster {
    let mut bytes = vec![0u8; c * h * w * dtype.size()];
    rng.fill(bytes.as_mut_slice());
    if matches!(dtype, flipnslide::DType::F32 | flipnslide::DType::F64) {
        // keep NaN payloads out so equality is plain byte equality on values too
        let e = dtype.size();
        for px in bytes.chunks_exact_mut(e) {
            px[e - 1] &= 0x3f;
        }
    }
    Raster::from_bytes(c, h, w, dtype, bytes).unwrap()
}

pub const EDGES: [EdgePolicy; 2] = [EdgePolicy::InteriorOnly, EdgePolicy::PadReflect];
