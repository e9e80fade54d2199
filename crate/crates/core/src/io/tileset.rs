//! On-disk tile sets.
//!
//! Directory layout: `manifest.json` plus one `tile_NNNNNN.npy` per tile,
//! each a `C x t x t` array.
//!
//! Packed layout, all integers little-endian:
//!
//! ```text
//! "FNS1" | manifest_len: u32 | manifest_crc32: u32 | payload_crc32: u32
//!        | manifest (UTF-8 JSON) | tile payloads in tile_id order
//! ```

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::manifest::Manifest;
use crate::io::npy;
use crate::pipeline::{TileRecord, TileSet, TileSink};
use crate::raster::Raster;

pub const PACKED_MAGIC: &[u8; 4] = b"FNS1";
pub const PACKED_HEADER_LEN: usize = 16;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputMode {
    #[default]
    Directory,
    Packed,
}

impl fmt::Display for OutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputMode::Directory => "dir",
            OutputMode::Packed => "packed",
        })
    }
}

impl FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dir" | "directory" => Ok(OutputMode::Directory),
            "packed" => Ok(OutputMode::Packed),
            _ => Err(Error::Usage(format!("unknown output format {s:?} (dir|packed)"))),
        }
    }
}

fn check_record(manifest: &Manifest, next_id: usize, record: &TileRecord) -> Result<()> {
    let entry = manifest
        .tiles
        .get(next_id)
        .ok_or_else(|| Error::Corruption(format!("record {} beyond the {} planned tiles", record.tile_id, manifest.tiles.len())))?;
    if record.tile_id != entry.tile_id {
        return Err(Error::Corruption(format!("expected tile {} but got {}", entry.tile_id, record.tile_id)));
    }
    if record.payload.bytes().len() != manifest.tile_bytes() {
        return Err(Error::Shape(format!("tile {} payload has the wrong size", record.tile_id)));
    }
    Ok(())
}

/// Writes a directory tile set, removing everything it wrote on failure.
pub struct DirectorySink {
    root: PathBuf,
    created_root: bool,
    written: Vec<PathBuf>,
    manifest: Option<Manifest>,
    next_id: usize,
    finished: bool,
}

impl DirectorySink {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirectorySink { root: root.into(), created_root: false, written: Vec::new(), manifest: None, next_id: 0, finished: false }
    }

    fn write_record(&mut self, record: &TileRecord) -> Result<()> {
        let manifest = self.manifest.as_ref().ok_or_else(|| Error::Usage("sink not started".into()))?;
        check_record(manifest, self.next_id, record)?;
        let p = &record.payload;
        let path = self.root.join(&manifest.tiles[self.next_id].location);
        let bytes = npy::encode_with_shape(p, &[p.channels(), p.height(), p.width()]);
        self.written.push(path.clone());
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.next_id += 1;
        Ok(())
    }
}

impl TileSink for DirectorySink {
    fn begin(&mut self, manifest: &Manifest) -> Result<()> {
        if !self.root.exists() {
            fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
            self.created_root = true;
        }
        self.manifest = Some(manifest.clone());
        Ok(())
    }

    fn accept(&mut self, record: TileRecord) -> Result<()> {
        self.write_record(&record)
    }

    fn finish(&mut self) -> Result<()> {
        let manifest = self.manifest.as_ref().ok_or_else(|| Error::Usage("sink not started".into()))?;
        if self.next_id != manifest.tiles.len() {
            return Err(Error::Corruption(format!("only {} of {} tiles written", self.next_id, manifest.tiles.len())));
        }
        let path = self.root.join(MANIFEST_FILE);
        let bytes = manifest.to_json_bytes()?;
        self.written.push(path.clone());
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.finished = true;
        Ok(())
    }
}

impl Drop for DirectorySink {
    fn drop(&mut self) {
        if self.finished {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}

/// Writes a packed tile set through a temporary file renamed on success.
pub struct PackedSink {
    path: PathBuf,
    partial: PathBuf,
    out: Option<BufWriter<File>>,
    manifest: Option<Manifest>,
    crc: crc32fast::Hasher,
    next_id: usize,
    finished: bool,
}

impl PackedSink {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let mut partial = path.as_os_str().to_os_string();
        partial.push(".partial");
        PackedSink {
            path,
            partial: partial.into(),
            out: None,
            manifest: None,
            crc: crc32fast::Hasher::new(),
            next_id: 0,
            finished: false,
        }
    }

    fn write_record(&mut self, record: &TileRecord) -> Result<()> {
        let manifest = self.manifest.as_ref().ok_or_else(|| Error::Usage("sink not started".into()))?;
        check_record(manifest, self.next_id, record)?;
        let out = self.out.as_mut().expect("open while started");
        out.write_all(record.payload.bytes()).map_err(|e| Error::io(&self.partial, e))?;
        self.crc.update(record.payload.bytes());
        self.next_id += 1;
        Ok(())
    }
}

impl TileSink for PackedSink {
    fn begin(&mut self, manifest: &Manifest) -> Result<()> {
        let json = manifest.to_json_bytes()?;
        let len = u32::try_from(json.len()).map_err(|_| Error::Usage("manifest exceeds 4 GiB".into()))?;
        let file = File::create(&self.partial).map_err(|e| Error::io(&self.partial, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        let mut header = Vec::with_capacity(PACKED_HEADER_LEN);
        header.extend_from_slice(PACKED_MAGIC);
        header.extend_from_slice(&len.to_le_bytes());
        header.extend_from_slice(&crc32fast::hash(&json).to_le_bytes());
        header.extend_from_slice(&0u32.to_le_bytes());
        out.write_all(&header)
            .and_then(|_| out.write_all(&json))
            .map_err(|e| Error::io(&self.partial, e))?;
        self.out = Some(out);
        self.manifest = Some(manifest.clone());
        Ok(())
    }

    fn accept(&mut self, record: TileRecord) -> Result<()> {
        self.write_record(&record)
    }

    fn finish(&mut self) -> Result<()> {
        let manifest = self.manifest.as_ref().ok_or_else(|| Error::Usage("sink not started".into()))?;
        if self.next_id != manifest.tiles.len() {
            return Err(Error::Corruption(format!("only {} of {} tiles written", self.next_id, manifest.tiles.len())));
        }
        let out = self.out.take().expect("open while started");
        let mut file = out.into_inner().map_err(|e| Error::io(&self.partial, e.into_error()))?;
        let payload_crc = std::mem::take(&mut self.crc).finalize();
        file.seek(SeekFrom::Start(12))
            .and_then(|_| file.write_all(&payload_crc.to_le_bytes()))
            .and_then(|_| file.sync_all())
            .map_err(|e| Error::io(&self.partial, e))?;
        drop(file);
        fs::rename(&self.partial, &self.path).map_err(|e| Error::io(&self.path, e))?;
        self.finished = true;
        Ok(())
    }
}

impl Drop for PackedSink {
    fn drop(&mut self) {
        if !self.finished {
            self.out.take();
            let _ = fs::remove_file(&self.partial);
        }
    }
}

/// A sink writing to disk in the requested layout.
pub fn disk_sink(mode: OutputMode, path: &Path) -> Box<dyn TileSink> {
    match mode {
        OutputMode::Directory => Box::new(DirectorySink::new(path)),
        OutputMode::Packed => Box::new(PackedSink::new(path)),
    }
}

pub fn write_tileset(tiles: &TileSet, mode: OutputMode, path: &Path) -> Result<()> {
    match mode {
        OutputMode::Directory => {
            let mut sink = DirectorySink::new(path);
            sink.begin(&tiles.manifest)?;
            for r in &tiles.records {
                sink.write_record(r)?;
            }
            sink.finish()
        }
        OutputMode::Packed => {
            let mut sink = PackedSink::new(path);
            sink.begin(&tiles.manifest)?;
            for r in &tiles.records {
                sink.write_record(r)?;
            }
            sink.finish()
        }
    }
}

struct PackedParts<'a> {
    manifest: Manifest,
    payload: &'a [u8],
    payload_crc: u32,
}

fn split_packed(bytes: &[u8]) -> Result<PackedParts<'_>> {
    if bytes.len() < PACKED_HEADER_LEN || &bytes[..4] != PACKED_MAGIC {
        return Err(Error::Corruption("missing FNS1 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (len, manifest_crc, payload_crc) = (word(4) as usize, word(8), word(12));
    let end = PACKED_HEADER_LEN + len;
    if bytes.len() < end {
        return Err(Error::Corruption(format!("manifest truncated: need {end} bytes, file has {}", bytes.len())));
    }
    let json = &bytes[PACKED_HEADER_LEN..end];
    if crc32fast::hash(json) != manifest_crc {
        return Err(Error::Corruption("manifest checksum mismatch".into()));
    }
    let manifest = Manifest::from_json_bytes(json)?;
    let payload = &bytes[end..];
    if payload.len() as u64 != manifest.payload_bytes() {
        return Err(Error::Corruption(format!(
            "payload is {} bytes, manifest implies {}",
            payload.len(),
            manifest.payload_bytes()
        )));
    }
    Ok(PackedParts { manifest, payload, payload_crc })
}

fn records_from_payload(manifest: &Manifest, payload: &[u8]) -> Result<Vec<TileRecord>> {
    let t = manifest.tile_size.get();
    let src = manifest.source;
    manifest
        .tiles
        .iter()
        .zip(payload.chunks_exact(manifest.tile_bytes().max(1)))
        .map(|(e, chunk)| {
            Ok(TileRecord {
                tile_id: e.tile_id,
                window: manifest.window(e),
                transform: e.transform,
                payload: Raster::from_bytes(src.channels, t, t, src.dtype, chunk.to_vec())?,
            })
        })
        .collect()
}

fn read_packed(path: &Path) -> Result<TileSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let parts = split_packed(&bytes)?;
    if crc32fast::hash(parts.payload) != parts.payload_crc {
        return Err(Error::Corruption("payload checksum mismatch".into()));
    }
    let records = records_from_payload(&parts.manifest, parts.payload)?;
    Ok(TileSet { manifest: parts.manifest, records })
}

fn read_directory(root: &Path) -> Result<TileSet> {
    let manifest = read_manifest(root)?;
    let t = manifest.tile_size.get();
    let src = manifest.source;
    let mut records = Vec::with_capacity(manifest.tiles.len());
    for e in &manifest.tiles {
        let missing = |reason: String| Error::MissingTile { tile_id: e.tile_id, reason };
        let path = root.join(&e.location);
        let bytes = fs::read(&path).map_err(|err| missing(format!("{}: {err}", path.display())))?;
        let (header, payload) = npy::parse(&bytes).map_err(|err| missing(err.to_string()))?;
        if header.shape != [src.channels, t, t] || header.dtype != src.dtype || header.fortran_order {
            return Err(missing(format!("unexpected array {:?} {}", header.shape, header.dtype)));
        }
        if payload.len() != manifest.tile_bytes() {
            return Err(missing(format!("payload is {} bytes", payload.len())));
        }
        records.push(TileRecord {
            tile_id: e.tile_id,
            window: manifest.window(e),
            transform: e.transform,
            payload: Raster::from_bytes(src.channels, t, t, src.dtype, payload.to_vec())?,
        });
    }
    Ok(TileSet { manifest, records })
}

/// Reads a tile set written by [`write_tileset`] in either layout.
pub fn read_tileset(path: &Path) -> Result<TileSet> {
    if path.is_dir() {
        read_directory(path)
    } else {
        read_packed(path)
    }
}

/// Reads only the manifest of a tile set.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    if path.is_dir() {
        let mpath = path.join(MANIFEST_FILE);
        let bytes = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
        return Manifest::from_json_bytes(&bytes);
    }
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; PACKED_HEADER_LEN];
    file.read_exact(&mut header)
        .map_err(|_| Error::Corruption("missing FNS1 header".into()))?;
    if &header[..4] != PACKED_MAGIC {
        return Err(Error::Corruption("missing FNS1 header".into()));
    }
    let len = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    file.read_exact(&mut json)
        .map_err(|_| Error::Corruption("manifest truncated".into()))?;
    if crc32fast::hash(&json) != u32::from_le_bytes(header[8..12].try_into().unwrap()) {
        return Err(Error::Corruption("manifest checksum mismatch".into()));
    }
    Manifest::from_json_bytes(&json)
}
