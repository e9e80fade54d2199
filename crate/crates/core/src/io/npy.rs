//! Reading and writing the numpy `.npy` format.
//!
//! Only C-order arrays of `u8`, `u16`, `f32` and `f64` with two or three
//! dimensions are handled. Written files use format version 1.0 with the
//! header padded to a 64-byte boundary, matching numpy's own output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, NpyError, Result};
use crate::raster::{DType, Raster};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpyHeader {
    pub dtype: DType,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
}

fn descr(dtype: DType) -> &'static str {
    match dtype {
        DType::U8 => "|u1",
        DType::U16 => "<u2",
        DType::F32 => "<f4",
        DType::F64 => "<f8",
    }
}

fn parse_descr(s: &str) -> Result<DType, NpyError> {
    match s {
        "|u1" | "<u1" | "u1" => Ok(DType::U8),
        "<u2" => Ok(DType::U16),
        "<f4" => Ok(DType::F32),
        "<f8" => Ok(DType::F64),
        other => Err(NpyError::UnsupportedDtype(other.to_string())),
    }
}

enum Value {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Minimal parser for the Python dict literal in an npy header.
struct DictParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> DictParser<'a> {
    fn err(&self, what: &str) -> NpyError {
        NpyError::BadHeader(format!("{what} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), NpyError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected {:?}", c as char)))
        }
    }

    fn string(&mut self) -> Result<String, NpyError> {
        let quote = self.peek().filter(|&q| q == b'\'' || q == b'"').ok_or_else(|| self.err("expected string"))?;
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos == self.s.len() {
            return Err(self.err("unterminated string"));
        }
        let out = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(out)
    }

    fn integer(&mut self) -> Result<usize, NpyError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| self.err("expected integer"))
    }

    fn value(&mut self) -> Result<Value, NpyError> {
        match self.peek() {
            Some(b'\'' | b'"') => self.string().map(Value::Str),
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    if self.peek() == Some(b')') {
                        self.pos += 1;
                        break;
                    }
                    dims.push(self.integer()?);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {}
                        _ => return Err(self.err("expected ',' or ')'")),
                    }
                }
                Ok(Value::Tuple(dims))
            }
            _ => {
                let rest = &self.s[self.pos..];
                if rest.starts_with(b"True") {
                    self.pos += 4;
                    Ok(Value::Bool(true))
                } else if rest.starts_with(b"False") {
                    self.pos += 5;
                    Ok(Value::Bool(false))
                } else {
                    Err(self.err("unexpected value"))
                }
            }
        }
    }

    fn parse(mut self) -> Result<NpyHeader, NpyError> {
        self.expect(b'{')?;
        let (mut dtype, mut fortran, mut shape) = (None, None, None);
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = self.string()?;
            self.expect(b':')?;
            match (key.as_str(), self.value()?) {
                ("descr", Value::Str(d)) => dtype = Some(parse_descr(&d)?),
                ("fortran_order", Value::Bool(b)) => fortran = Some(b),
                ("shape", Value::Tuple(s)) => shape = Some(s),
                (k, _) => return Err(NpyError::BadHeader(format!("unexpected entry {k:?}"))),
            }
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(self.err("expected ',' or '}'")),
            }
        }
        Ok(NpyHeader {
            dtype: dtype.ok_or_else(|| NpyError::BadHeader("missing descr".into()))?,
            fortran_order: fortran.ok_or_else(|| NpyError::BadHeader("missing fortran_order".into()))?,
            shape: shape.ok_or_else(|| NpyError::BadHeader("missing shape".into()))?,
        })
    }
}

/// Splits an npy file into its header and payload.
pub fn parse(bytes: &[u8]) -> Result<(NpyHeader, &[u8]), NpyError> {
    if bytes.len() < 8 || &bytes[..6] != MAGIC {
        return Err(NpyError::BadMagic);
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, start) = match major {
        1 if bytes.len() >= 10 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, 12),
        1..=3 => return Err(NpyError::Truncated { expected: 12, found: bytes.len() }),
        _ => return Err(NpyError::UnsupportedVersion(major, minor)),
    };
    let end = start + header_len;
    if bytes.len() < end {
        return Err(NpyError::Truncated { expected: end, found: bytes.len() });
    }
    let header = DictParser { s: &bytes[start..end], pos: 0 }.parse()?;
    Ok((header, &bytes[end..]))
}

fn raster_from_parts(header: &NpyHeader, payload: &[u8]) -> Result<Raster, NpyError> {
    if header.fortran_order {
        return Err(NpyError::FortranOrder);
    }
    let (c, h, w) = match header.shape[..] {
        [h, w] => (1, h, w),
        [c, h, w] => (c, h, w),
        _ => return Err(NpyError::UnsupportedRank(header.shape.len())),
    };
    let expected = c * h * w * header.dtype.size();
    if payload.len() < expected {
        return Err(NpyError::Truncated { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(NpyError::BadHeader(format!("{} trailing bytes after payload", payload.len() - expected)));
    }
    Raster::from_bytes(c, h, w, header.dtype, payload.to_vec()).map_err(|e| NpyError::BadHeader(e.to_string()))
}

pub fn decode(bytes: &[u8]) -> Result<Raster, NpyError> {
    let (header, payload) = parse(bytes)?;
    raster_from_parts(&header, payload)
}

/// Serialized header (magic through padding) for the given array.
pub fn encode_header(dtype: DType, shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!("({})", shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    };
    let mut dict = format!("{{'descr': '{}', 'fortran_order': False, 'shape': {dims}, }}", descr(dtype));
    let unpadded = MAGIC.len() + 4 + dict.len() + 1;
    dict.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    dict.push('\n');

    let mut out = Vec::with_capacity(10 + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

/// Encodes `raster` with an explicit shape whose product matches its size.
pub fn encode_with_shape(raster: &Raster, shape: &[usize]) -> Vec<u8> {
    debug_assert_eq!(shape.iter().product::<usize>(), raster.len());
    let mut out = encode_header(raster.dtype(), shape);
    out.extend_from_slice(raster.bytes());
    out
}

/// Single-channel rasters are written as 2-D arrays, others as `C x H x W`.
pub fn encode(raster: &Raster) -> Vec<u8> {
    if raster.channels() == 1 {
        encode_with_shape(raster, &[raster.height(), raster.width()])
    } else {
        encode_with_shape(raster, &[raster.channels(), raster.height(), raster.width()])
    }
}

#[derive(Debug, Deserialize)]
struct Sidecar {
    shape: Vec<usize>,
    dtype: DType,
}

/// Sidecar describing a headerless raw raster at `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

/// Reads an `.npy` file, or a raw little-endian C-order file accompanied by
/// a `<path>.json` sidecar of the form `{"shape": [...], "dtype": "u8"}`.
pub fn read_raster(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let wrap = |source| Error::Npy { path: path.to_path_buf(), source };
    if bytes.starts_with(MAGIC) {
        return decode(&bytes).map_err(wrap);
    }
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(wrap(NpyError::BadMagic));
    }
    let meta: Sidecar = serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)
        .map_err(|e| wrap(NpyError::BadHeader(format!("sidecar: {e}"))))?;
    let header = NpyHeader { dtype: meta.dtype, fortran_order: false, shape: meta.shape };
    raster_from_parts(&header, &bytes).map_err(wrap)
}

pub fn write_raster(path: &Path, raster: &Raster) -> Result<()> {
    fs::write(path, encode(raster)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `np.save` output for `np.array([[1, 2], [3, 4]], dtype=np.uint8)`.
    fn numpy_2x2_u8() -> Vec<u8> {
        let mut f = b"\x93NUMPY\x01\x00\x76\x00".to_vec();
        let mut dict = "{'descr': '|u1', 'fortran_order': False, 'shape': (2, 2), }".to_string();
        while (10 + dict.len() + 1) % 64 != 0 {
            dict.push(' ');
        }
        dict.push('\n');
        assert_eq!(dict.len(), 0x76);
        f.extend_from_slice(dict.as_bytes());
        f.extend_from_slice(&[1, 2, 3, 4]);
        f
    }

    #[test]
    fn reads_minimal_file() {
        let r = decode(&numpy_2x2_u8()).unwrap();
        assert_eq!((r.channels(), r.height(), r.width(), r.dtype()), (1, 2, 2, DType::U8));
        assert_eq!(r.to_vec::<u8>().unwrap(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn writer_matches_numpy_layout() {
        let r = Raster::from_elements(1, 2, 2, &[1u8, 2, 3, 4]).unwrap();
        assert_eq!(encode(&r), numpy_2x2_u8());
    }

    #[test]
    fn header_is_64_aligned() {
        for shape in [vec![3usize, 64, 64], vec![10240, 10240], vec![7]] {
            let h = encode_header(DType::F64, &shape);
            assert_eq!(h.len() % 64, 0);
            assert_eq!(*h.last().unwrap(), b'\n');
        }
        let h = encode_header(DType::U16, &[7]);
        assert!(String::from_utf8_lossy(&h).contains("'shape': (7,)"));
    }

    fn replace_bytes(buf: &mut Vec<u8>, from: &[u8], to: &[u8]) {
        let pos = buf.windows(from.len()).position(|w| w == from).unwrap();
        buf.splice(pos..pos + from.len(), to.iter().copied());
    }

    #[test]
    fn fortran_order_rejected() {
        let mut raw = numpy_2x2_u8();
        replace_bytes(&mut raw, b"False", b"True ");
        assert_eq!(decode(&raw).unwrap_err(), NpyError::FortranOrder);
    }

    #[test]
    fn distinct_error_codes() {
        assert_eq!(decode(b"PK\x03\x04 not npy").unwrap_err(), NpyError::BadMagic);

        let mut truncated = numpy_2x2_u8();
        truncated.pop();
        assert!(matches!(decode(&truncated).unwrap_err(), NpyError::Truncated { expected: 4, found: 3 }));

        let mut bad = numpy_2x2_u8();
        replace_bytes(&mut bad, b"|u1", b"<i4");
        assert_eq!(decode(&bad).unwrap_err(), NpyError::UnsupportedDtype("<i4".into()));

        let mut v2 = numpy_2x2_u8();
        v2[6] = 9;
        assert_eq!(decode(&v2).unwrap_err(), NpyError::UnsupportedVersion(9, 0));

        let r1 = Raster::from_elements(1, 1, 4, &[0u8; 4]).unwrap();
        let flat = encode_with_shape(&r1, &[4]);
        assert_eq!(decode(&flat).unwrap_err(), NpyError::UnsupportedRank(1));

        let codes = [
            NpyError::BadMagic.code(),
            NpyError::FortranOrder.code(),
            NpyError::Truncated { expected: 0, found: 0 }.code(),
            NpyError::UnsupportedDtype(String::new()).code(),
        ];
        let mut uniq = codes.to_vec();
        uniq.dedup();
        assert_eq!(uniq.len(), codes.len());
    }

    #[test]
    fn version_two_header_accepted() {
        let v1 = numpy_2x2_u8();
        let mut v2 = b"\x93NUMPY\x02\x00".to_vec();
        v2.extend_from_slice(&0x76u32.to_le_bytes());
        v2.extend_from_slice(&v1[10..]);
        assert_eq!(decode(&v2).unwrap(), decode(&v1).unwrap());
    }

    #[test]
    fn raw_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.raw");
        let values = [1u16, 2, 3, 4, 5, 6];
        let mut bytes = Vec::new();
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, &bytes).unwrap();
        fs::write(sidecar_path(&path), r#"{"shape": [2, 3], "dtype": "u16"}"#).unwrap();
        let r = read_raster(&path).unwrap();
        assert_eq!((r.channels(), r.height(), r.width()), (1, 2, 3));
        assert_eq!(r.to_vec::<u16>().unwrap(), values);

        fs::remove_file(sidecar_path(&path)).unwrap();
        assert_eq!(read_raster(&path).unwrap_err().code(), "npy-bad-magic");
    }
}
