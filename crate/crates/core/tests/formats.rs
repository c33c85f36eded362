//! Container and config format tests: round trips, corrupt inputs, and the
//! documented failure modes.

use bdf_core::config::{read_kv_file, write_kv_file, Config};
use bdf_core::container::{read_array, read_arrays, write_array, write_arrays};
use ndarray::{ArrayD, IxDyn};
use proptest::prelude::*;
use std::io::Write;

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn array_round_trip_is_bit_exact() {
    let dir = tmp();
    let path = dir.path().join("a.bfl");
    let arr = ArrayD::from_shape_vec(
        IxDyn(&[2, 3, 4]),
        (0..24).map(|i| i as f32 * 0.37 - 1.5).collect(),
    )
    .unwrap();
    write_array(&path, &arr).unwrap();
    let back = read_array(&path).unwrap();
    assert_eq!(arr, back);
}

#[test]
fn multi_record_round_trip_preserves_order() {
    let dir = tmp();
    let path = dir.path().join("p.bfl");
    let arrs: Vec<ArrayD<f32>> = (1..5)
        .map(|r| ArrayD::from_elem(IxDyn(&vec![2; r]), r as f32))
        .collect();
    write_arrays(&path, &arrs).unwrap();
    let back = read_arrays(&path).unwrap();
    assert_eq!(arrs, back);
}

#[test]
fn truncated_file_is_a_format_error_naming_the_file() {
    let dir = tmp();
    let path = dir.path().join("trunc.bfl");
    let arr = ArrayD::from_elem(IxDyn(&[8, 8]), 1.0f32);
    write_array(&path, &arr).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
    let err = read_arrays(&path).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("trunc.bfl"), "error should name the file: {msg}");
    assert!(msg.contains("truncated"), "unexpected detail: {msg}");
}

#[test]
fn bad_magic_is_rejected() {
    let dir = tmp();
    let path = dir.path().join("bad.bfl");
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(b"NOPE\x01\x00\x00\x00").unwrap();
    drop(f);
    assert!(read_arrays(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn container_round_trips_arbitrary_shapes(
        dims in proptest::collection::vec(1usize..6, 1..4),
        seed in any::<u64>(),
    ) {
        let len: usize = dims.iter().product();
        let mut rng = bdf_core::rng::seeded(seed);
        use rand::Rng;
        let data: Vec<f32> = (0..len).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect();
        let arr = ArrayD::from_shape_vec(IxDyn(&dims), data).unwrap();
        let dir = tmp();
        let path = dir.path().join("prop.bfl");
        write_array(&path, &arr).unwrap();
        let back = read_array(&path).unwrap();
        prop_assert_eq!(arr, back);
    }
}

#[test]
fn config_sections_and_overrides() {
    let text = "\n# comment\ntop = 1\n[zoo]\nseed = 7\nseed = 8\nrate = 0.1\n\n[scan]\ntheta = 0.88\n";
    let cfg = Config::parse(text).unwrap();
    assert_eq!(cfg.get("", "top"), Some("1"));
    assert_eq!(cfg.get("zoo", "seed"), Some("8"));
    assert_eq!(cfg.get("zoo", "rate"), Some("0.1"));
    assert_eq!(cfg.get("scan", "theta"), Some("0.88"));
    assert_eq!(cfg.get("scan", "missing"), None);
    let n: u64 = cfg.parse_or("zoo", "seed", 0).unwrap();
    assert_eq!(n, 8);
}

#[test]
fn config_rejects_malformed_lines() {
    assert!(Config::parse("[unterminated\n").is_err());
    assert!(Config::parse("no equals sign\n").is_err());
    let err = Config::parse("ok = 1\nbroken line\n").unwrap_err();
    assert!(err.to_string().contains("line 2"));
}

#[test]
fn kv_file_round_trip() {
    let dir = tmp();
    let path = dir.path().join("meta");
    let pairs = vec![
        ("arch".to_string(), "cnn4".to_string()),
        ("label".to_string(), "trojaned".to_string()),
        ("seed".to_string(), "41".to_string()),
    ];
    write_kv_file(&path, &pairs).unwrap();
    let map = read_kv_file(&path).unwrap();
    assert_eq!(map.get("arch").unwrap(), "cnn4");
    assert_eq!(map.get("seed").unwrap(), "41");
}
