//! The eight symmetries of the square acting on `C x t x t` tiles.
//!
//! Index convention: `r` runs top to bottom, `c` left to right. Rotations
//! are counterclockwise. `H` reverses columns, `V` reverses rows, and the
//! composite labels rotate first and reflect second.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformId {
    R0,
    R90,
    R180,
    R270,
    R0H,
    R0V,
    R90H,
    R90V,
}

/// Signed 2x2 matrix acting on centered coordinates `(2r - (t-1), 2c - (t-1))`,
/// mapping an output position to the input position it reads from.
type Mat = [[i8; 2]; 2];

fn mat_mul(a: Mat, b: Mat) -> Mat {
    let mut m = [[0i8; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

fn transpose(a: Mat) -> Mat {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

impl TransformId {
    pub const ALL: [TransformId; 8] = [
        TransformId::R0,
        TransformId::R90,
        TransformId::R180,
        TransformId::R270,
        TransformId::R0H,
        TransformId::R0V,
        TransformId::R90H,
        TransformId::R90V,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformId::R0 => "r0",
            TransformId::R90 => "r90",
            TransformId::R180 => "r180",
            TransformId::R270 => "r270",
            TransformId::R0H => "r0h",
            TransformId::R0V => "r0v",
            TransformId::R90H => "r90h",
            TransformId::R90V => "r90v",
        }
    }

    pub fn is_reflection(self) -> bool {
        matches!(self, TransformId::R0H | TransformId::R0V | TransformId::R90H | TransformId::R90V)
    }

    /// Input position read by output position `(r, c)` of a `t x t` tile.
    #[inline]
    pub fn source_of(self, r: usize, c: usize, t: usize) -> (usize, usize) {
        let m = t - 1;
        match self {
            TransformId::R0 => (r, c),
            TransformId::R90 => (c, m - r),
            TransformId::R180 => (m - r, m - c),
            TransformId::R270 => (m - c, r),
            TransformId::R0H => (r, m - c),
            TransformId::R0V => (m - r, c),
            TransformId::R90H => (m - c, m - r),
            TransformId::R90V => (c, r),
        }
    }

    fn matrix(self) -> Mat {
        match self {
            TransformId::R0 => [[1, 0], [0, 1]],
            TransformId::R90 => [[0, 1], [-1, 0]],
            TransformId::R180 => [[-1, 0], [0, -1]],
            TransformId::R270 => [[0, -1], [1, 0]],
            TransformId::R0H => [[1, 0], [0, -1]],
            TransformId::R0V => [[-1, 0], [0, 1]],
            TransformId::R90H => [[0, -1], [-1, 0]],
            TransformId::R90V => [[0, 1], [1, 0]],
        }
    }

    fn from_matrix(m: Mat) -> TransformId {
        TransformId::ALL
            .into_iter()
            .find(|f| f.matrix() == m)
            .expect("signed permutation matrices are closed under product")
    }

    /// `h` such that `apply(h, x) == apply(self, apply(g, x))`.
    pub fn compose(self, g: TransformId) -> TransformId {
        // out[p] = y[M_f p] = x[M_g M_f p]
        TransformId::from_matrix(mat_mul(g.matrix(), self.matrix()))
    }

    pub fn inverse(self) -> TransformId {
        TransformId::from_matrix(transpose(self.matrix()))
    }
}

pub fn compose(f: TransformId, g: TransformId) -> TransformId {
    f.compose(g)
}

pub fn inverse(f: TransformId) -> TransformId {
    f.inverse()
}

impl fmt::Display for TransformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Corruption(format!("unknown transform {s:?}")))
    }
}

fn permute_plane<const N: usize>(f: TransformId, t: usize, src: &[u8], dst: &mut [u8]) {
    let row_bytes = t * N;
    for (r, out_row) in dst.chunks_exact_mut(row_bytes).enumerate() {
        let (sr, sc) = f.source_of(r, 0, t);
        let start = (sr * t + sc) as isize;
        let step = if t > 1 {
            let (sr1, sc1) = f.source_of(r, 1, t);
            (sr1 * t + sc1) as isize - start
        } else {
            1
        };
        if step == 1 {
            let s = start as usize * N;
            out_row.copy_from_slice(&src[s..s + row_bytes]);
            continue;
        }
        for (c, px) in out_row.chunks_exact_mut(N).enumerate() {
            let i = (start + c as isize * step) as usize * N;
            px.copy_from_slice(&src[i..i + N]);
        }
    }
}

/// Permutes one `t x t` plane of `elem`-byte values from `src` into `dst`.
pub(crate) fn apply_plane(f: TransformId, t: usize, elem: usize, src: &[u8], dst: &mut [u8]) {
    debug_assert_eq!(src.len(), t * t * elem);
    debug_assert_eq!(dst.len(), src.len());
    if f == TransformId::R0 {
        dst.copy_from_slice(src);
        return;
    }
    match elem {
        1 => permute_plane::<1>(f, t, src, dst),
        2 => permute_plane::<2>(f, t, src, dst),
        4 => permute_plane::<4>(f, t, src, dst),
        8 => permute_plane::<8>(f, t, src, dst),
        _ => unreachable!("unsupported element width {elem}"),
    }
}

/// Applies `f` to every channel of a square tile.
pub fn apply(f: TransformId, tile: &Raster) -> Result<Raster> {
    if tile.height() != tile.width() {
        return Err(Error::Shape(format!(
            "transform needs a square tile, got {}x{}",
            tile.height(),
            tile.width()
        )));
    }
    let t = tile.height();
    let elem = tile.dtype().size();
    let mut out = tile.clone();
    if t > 0 {
        let plane = tile.plane_bytes();
        for (src, dst) in tile.bytes().chunks_exact(plane).zip(out.bytes_mut().chunks_exact_mut(plane)) {
            apply_plane(f, t, elem, src, dst);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(values: &[u8], t: usize) -> Raster {
        Raster::from_elements(1, t, t, values).unwrap()
    }

    #[test]
    fn two_by_two_examples() {
        let x = grid(&[1, 2, 3, 4], 2);
        let out = |f| apply(f, &x).unwrap().to_vec::<u8>().unwrap();
        assert_eq!(out(TransformId::R0), vec![1, 2, 3, 4]);
        assert_eq!(out(TransformId::R90), vec![2, 4, 1, 3]);
        assert_eq!(out(TransformId::R0H), vec![2, 1, 4, 3]);
        assert_eq!(out(TransformId::R0V), vec![3, 4, 1, 2]);
        assert_eq!(out(TransformId::R180), vec![4, 3, 2, 1]);
    }

    #[test]
    fn composition_examples() {
        assert_eq!(compose(TransformId::R90, TransformId::R90), TransformId::R180);
        assert_eq!(compose(TransformId::R0H, TransformId::R0H), TransformId::R0);
        assert_eq!(compose(TransformId::R0H, TransformId::R90), TransformId::R90H);
        assert_eq!(compose(TransformId::R0V, TransformId::R90), TransformId::R90V);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse(TransformId::R0), TransformId::R0);
        assert_eq!(inverse(TransformId::R90), TransformId::R270);
        assert_eq!(inverse(TransformId::R90H), TransformId::R90H);
        for f in TransformId::ALL {
            assert_eq!(compose(inverse(f), f), TransformId::R0);
        }
    }

    #[test]
    fn non_square_rejected() {
        let r = Raster::from_elements(1, 2, 3, &[0u8; 6]).unwrap();
        assert_eq!(apply(TransformId::R90, &r).unwrap_err().code(), "shape");
    }

    #[test]
    fn channels_permuted_independently() {
        let x = Raster::from_elements(2, 2, 2, &[1u16, 2, 3, 4, 10, 20, 30, 40]).unwrap();
        let y = apply(TransformId::R90, &x).unwrap();
        assert_eq!(y.to_vec::<u16>().unwrap(), vec![2, 4, 1, 3, 20, 40, 10, 30]);
    }

    #[test]
    fn one_pixel_tile() {
        let x = Raster::from_elements(1, 1, 1, &[7.0f64]).unwrap();
        for f in TransformId::ALL {
            assert_eq!(apply(f, &x).unwrap(), x);
        }
    }

    #[test]
    fn names_round_trip() {
        for f in TransformId::ALL {
            assert_eq!(f.name().parse::<TransformId>().unwrap(), f);
            assert_eq!(serde_json::to_string(&f).unwrap(), format!("\"{}\"", f.name()));
        }
    }
}
