//! The bulk array-in/array-out surface used by language bindings.

mod common;

use std::fs;

use common::random_raster;
use flipnslide::io::tileset::PACKED_HEADER_LEN;
use flipnslide::{
    coverage_map, redundancy_report, tile_image, windows, write_raster, DType, EdgePolicy, Manifest, Raster, StackedSink,
    Strategy, TileSize, Tiler, TilingConfig,
};
use rand::{rngs::StdRng, Rng, SeedableRng};
use tempfile::tempdir;

fn ts(t: usize) -> TileSize {
    TileSize::new(t).unwrap()
}

fn stacked(src: &Raster, t: usize, s: Strategy, e: EdgePolicy) -> (Manifest, Vec<u8>) {
    let mut sink = StackedSink::new();
    Tiler::new(TilingConfig::new(ts(t), s, e)).run(src, &mut sink).unwrap();
    sink.into_parts().unwrap()
}

#[test]
fn two_dimensional_buffer() {
    let src = Raster::from_bytes(1, 512, 512, DType::U8, vec![7; 512 * 512]).unwrap();
    let (m, payload) = stacked(&src, 256, Strategy::NoOverlap, EdgePolicy::InteriorOnly);
    assert_eq!(m.tiles.len(), 4);
    assert_eq!(payload.len(), 4 * 256 * 256);
}

#[test]
fn three_dimensional_float_input() {
    let src = Raster::zeros(3, 512, 512, DType::F32).unwrap();
    let (m, payload) = stacked(&src, 128, Strategy::FlipNSlide, EdgePolicy::InteriorOnly);
    assert_eq!(m.tiles.len(), 85);
    assert_eq!(payload.len(), 85 * 3 * 128 * 128 * 4);
}

#[test]
fn stacked_equals_records_on_random_corpus() {
    let mut rng = StdRng::seed_from_u64(20);
    for k in 0..20 {
        let dtype = DType::ALL[k % 4];
        let edge = if k % 2 == 0 { EdgePolicy::InteriorOnly } else { EdgePolicy::PadReflect };
        let t = 4 * rng.gen_range(1..=4);
        let (h, w) = (rng.gen_range(t..5 * t), rng.gen_range(t..5 * t));
        let c = rng.gen_range(1..=3);
        let src = random_raster(&mut rng, dtype, c, h, w);
        let set = tile_image(&src, ts(t), Strategy::FlipNSlide, edge).unwrap();
        let (m, payload) = stacked(&src, t, Strategy::FlipNSlide, edge);
        assert_eq!(m, set.manifest);
        let tile = c * t * t * dtype.size();
        for (i, rec) in set.records.iter().enumerate() {
            assert_eq!(&payload[i * tile..(i + 1) * tile], rec.payload.bytes());
        }
    }
}

#[test]
fn stacked_equals_cli_packed_payload() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("in.npy");
    let src = random_raster(&mut StdRng::seed_from_u64(21), DType::U16, 2, 130, 99);
    write_raster(&input, &src).unwrap();
    let output = dir.path().join("out.fns");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_flipnslide"))
        .args(["tile", "--input", input.to_str().unwrap(), "--output", output.to_str().unwrap()])
        .args(["--tile-size", "32", "--edge", "pad", "--format", "packed"])
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let bytes = fs::read(&output).unwrap();
    let json_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let (m, payload) = stacked(&src, 32, Strategy::FlipNSlide, EdgePolicy::PadReflect);
    assert_eq!(&bytes[PACKED_HEADER_LEN..PACKED_HEADER_LEN + json_len], m.to_json_bytes().unwrap().as_slice());
    assert_eq!(&bytes[PACKED_HEADER_LEN + json_len..], payload.as_slice());
}

#[test]
fn coverage_and_redundancy_queries() {
    let at = |s| {
        let ws = windows(1024, 1024, ts(256), s, EdgePolicy::InteriorOnly).unwrap();
        coverage_map(1024, 1024, &ws, EdgePolicy::InteriorOnly).unwrap().get(512, 512)
    };
    assert_eq!(at(Strategy::FlipNSlide), 8);
    assert_eq!(at(Strategy::NoOverlap), 1);
    assert_eq!(at(Strategy::Overlap50), 4);
    let set = tile_image(&Raster::zeros(1, 64, 64, DType::U8).unwrap(), ts(16), Strategy::Overlap50, EdgePolicy::InteriorOnly).unwrap();
    assert!(redundancy_report(&set).same_transform_overlapping_pairs > 0);
}

#[test]
fn bad_buffers_map_to_codes() {
    assert_eq!("i8".parse::<DType>().unwrap_err().code(), "usage");
    assert_eq!(Raster::from_bytes(1, 4, 4, DType::U16, vec![0; 31]).unwrap_err().code(), "shape");
    let small = Raster::zeros(1, 8, 8, DType::U8).unwrap();
    let mut sink = StackedSink::new();
    let err = Tiler::new(TilingConfig::new(ts(16), Strategy::NoOverlap, EdgePolicy::InteriorOnly))
        .run(&small, &mut sink)
        .unwrap_err();
    assert_eq!(err.code(), "image-too-small");
}
