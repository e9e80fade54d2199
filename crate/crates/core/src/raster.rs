//! Channel-planar pixel blocks with a runtime element type.
//!
//! Pixel data is held as little-endian bytes regardless of host order, so
//! tiling and transforms are pure byte moves and stay bit-exact for every
//! supported element type.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    U8,
    U16,
    F32,
    F64,
}

impl DType {
    pub const ALL: [DType; 4] = [DType::U8, DType::U16, DType::F32, DType::F64];

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::U8 => "u8",
            DType::U16 => "u16",
            DType::F32 => "f32",
            DType::F64 => "f64",
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DType::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown dtype {s:?}")))
    }
}

/// Scalar types that can back a [`Raster`].
pub trait Element: Copy + PartialEq + fmt::Debug + Send + Sync + 'static {
    const DTYPE: DType;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

macro_rules! impl_element {
    ($t:ty, $d:expr) => {
        impl Element for $t {
            const DTYPE: DType = $d;

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            fn read_le(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("element width"))
            }
        }
    };
}

impl_element!(u8, DType::U8);
impl_element!(u16, DType::U16);
impl_element!(f32, DType::F32);
impl_element!(f64, DType::F64);

#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    channels: usize,
    height: usize,
    width: usize,
    dtype: DType,
    data: Vec<u8>,
}

impl fmt::Debug for Raster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Raster")
            .field("channels", &self.channels)
            .field("height", &self.height)
            .field("width", &self.width)
            .field("dtype", &self.dtype)
            .field("bytes", &self.data.len())
            .finish()
    }
}

impl Raster {
    /// Wraps little-endian bytes laid out as `channels x height x width`.
    pub fn from_bytes(
        channels: usize,
        height: usize,
        width: usize,
        dtype: DType,
        data: Vec<u8>,
    ) -> Result<Self> {
        let expected = channels * height * width * dtype.size();
        if channels == 0 {
            return Err(Error::Shape("raster must have at least one channel".into()));
        }
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{channels}x{height}x{width} {dtype} raster needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Raster { channels, height, width, dtype, data })
    }

    pub fn from_elements<T: Element>(
        channels: usize,
        height: usize,
        width: usize,
        values: &[T],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(values.len() * T::DTYPE.size());
        for &v in values {
            v.write_le(&mut data);
        }
        Raster::from_bytes(channels, height, width, T::DTYPE, data)
    }

    /// An all-zero raster.
    pub fn zeros(channels: usize, height: usize, width: usize, dtype: DType) -> Result<Self> {
        Raster::from_bytes(
            channels,
            height,
            width,
            dtype,
            vec![0; channels * height * width * dtype.size()],
        )
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn bytes(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn bytes_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bytes in one channel plane.
    pub fn plane_bytes(&self) -> usize {
        self.height * self.width * self.dtype.size()
    }

    /// Decodes the payload as `T`; fails when `T` is not the raster's dtype.
    pub fn to_vec<T: Element>(&self) -> Result<Vec<T>> {
        if T::DTYPE != self.dtype {
            return Err(Error::Shape(format!(
                "raster holds {} but {} was requested",
                self.dtype,
                T::DTYPE
            )));
        }
        Ok(self.data.chunks_exact(self.dtype.size()).map(T::read_le).collect())
    }

    /// Raw bytes of one element.
    pub fn element(&self, channel: usize, row: usize, col: usize) -> &[u8] {
        let e = self.dtype.size();
        let i = ((channel * self.height + row) * self.width + col) * e;
        &self.data[i..i + e]
    }

    /// Copies the `height x width` block at `(row, col)` from every channel.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Raster> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::OutOfBounds {
                row,
                col,
                size: height.max(width),
                height: self.height,
                width: self.width,
            });
        }
        let e = self.dtype.size();
        let mut data = Vec::with_capacity(self.channels * height * width * e);
        for ch in 0..self.channels {
            for r in row..row + height {
                let start = ((ch * self.height + r) * self.width + col) * e;
                data.extend_from_slice(&self.data[start..start + width * e]);
            }
        }
        Raster::from_bytes(self.channels, height, width, self.dtype, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_length_mismatch() {
        let err = Raster::from_bytes(1, 2, 2, DType::U16, vec![0; 7]).unwrap_err();
        assert_eq!(err.code(), "shape");
    }

    #[test]
    fn typed_round_trip() {
        let values = [1.5f32, -2.0, 0.25, 8.0, 3.0, 4.0];
        let r = Raster::from_elements(2, 1, 3, &values).unwrap();
        assert_eq!(r.dtype(), DType::F32);
        assert_eq!(r.to_vec::<f32>().unwrap(), values);
        assert!(r.to_vec::<f64>().is_err());
    }

    #[test]
    fn crop_picks_block_per_channel() {
        let values: Vec<u8> = (0..2 * 3 * 3).collect();
        let r = Raster::from_elements(2, 3, 3, &values).unwrap();
        let c = r.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.to_vec::<u8>().unwrap(), vec![4, 5, 7, 8, 13, 14, 16, 17]);
        assert!(r.crop(2, 2, 2, 2).is_err());
    }

    #[test]
    fn dtype_names_parse() {
        for d in DType::ALL {
            assert_eq!(d.name().parse::<DType>().unwrap(), d);
        }
        assert!("i32".parse::<DType>().is_err());
    }
}
