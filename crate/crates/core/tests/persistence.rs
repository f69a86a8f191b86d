mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use soilpq::persistence::{
    codes_from_bytes, codes_to_bytes, load_assignments, load_codebook, load_codes, load_scaler, save_assignments,
    save_codebook, save_codes, save_scaler,
};
use soilpq::pq::{encode_dataset, CodeMatrix};
use soilpq::preprocess;
use soilpq::search::build_inverted_index;
use soilpq::Error;

#[test]
fn trained_codebook_with_scaler_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = preprocess::gen_synthetic(600, 6, 3, 1).unwrap();
    let (clean, _) = preprocess::clean(&s.table).unwrap();
    let (ds, scaler) = preprocess::fit_transform(&clean, &["f3"]).unwrap();
    let mut cb = common::trained(&ds, 3, 8, 2);
    cb.set_scaler(Some(scaler.clone())).unwrap();

    let p = dir.path().join("cb.json");
    save_codebook(&cb, &p).unwrap();
    let back = load_codebook(&p).unwrap();
    assert_eq!(back, cb);
    let bits = |c: &soilpq::pq::Codebook| c.raw_centroids().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&cb));
    assert_eq!(back.scaler(), Some(&scaler));

    // saving the reloaded codebook reproduces the same bytes
    let p2 = dir.path().join("cb2.json");
    save_codebook(&back, &p2).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());

    let sp = dir.path().join("scaler.json");
    save_scaler(&scaler, &sp).unwrap();
    assert_eq!(load_scaler(&sp).unwrap(), scaler);
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_codebook("/nonexistent/cb.json"), Err(Error::Io { .. })));
    assert!(matches!(load_codes("/nonexistent/c.bin"), Err(Error::Io { .. })));
}

#[test]
fn truncation_never_panics() {
    let codes = CodeMatrix::new(4, 7, vec![0, 1, 2, 3, 4, 5, 6, 0, 1, 2, 3, 4]).unwrap();
    let bytes = codes_to_bytes(&codes).unwrap();
    assert_eq!(bytes.len(), 36);
    for cut in 0..bytes.len() {
        let r = codes_from_bytes(&bytes[..cut], std::path::Path::new("trunc"));
        assert!(matches!(r, Err(Error::CorruptFile { .. })), "cut at {cut}: {r:?}");
    }
    // appended garbage is also rejected
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(codes_from_bytes(&long, std::path::Path::new("x")), Err(Error::CorruptFile { .. })));
}

#[test]
fn declared_size_is_checked_before_allocation() {
    let mut bytes = b"PQC1".to_vec();
    bytes.extend_from_slice(&u32::MAX.to_le_bytes());
    bytes.extend_from_slice(&u16::MAX.to_le_bytes());
    bytes.extend_from_slice(&4u16.to_le_bytes());
    assert!(matches!(codes_from_bytes(&bytes, std::path::Path::new("x")), Err(Error::CorruptFile { .. })));
}

#[test]
fn assignments_regroup_to_inverted_index() {
    let dir = tempfile::tempdir().unwrap();
    let s = preprocess::gen_synthetic(2_000, 8, 5, 4).unwrap();
    let (clean, _) = preprocess::clean(&s.table).unwrap();
    let (ds, _) = preprocess::fit_transform(&clean, &[]).unwrap();
    let cb = common::trained(&ds, 2, 16, 0);
    let codes = encode_dataset(&ds, &cb).unwrap();
    let p = dir.path().join("assign.csv");
    save_assignments(&codes, ds.coords.as_deref(), &cb, &p).unwrap();

    let rows = load_assignments(&p).unwrap();
    assert_eq!(rows.len(), ds.len());
    assert!(rows.iter().enumerate().all(|(i, (id, _))| *id == i));
    assert!(rows.iter().all(|(_, c)| *c < 256));
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (row, class) in rows {
        groups.entry(class).or_default().push(row);
    }
    let idx = build_inverted_index(&codes, &cb).unwrap();
    let from_index: BTreeMap<u64, Vec<usize>> = idx.iter().map(|(k, v)| (k, v.to_vec())).collect();
    assert_eq!(groups, from_index);
}

proptest! {
    #[test]
    fn codes_file_round_trip(m in 1usize..6, k in 1usize..70_000, n in 0usize..40, seed in any::<u64>()) {
        use rand::Rng;
        let k = k.min(soilpq::pq::MAX_CENTROIDS);
        let mut r = common::rng(seed);
        let codes = CodeMatrix::new(m, k, (0..n * m).map(|_| r.random_range(0..k) as u16).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        save_codes(&codes, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        prop_assert_eq!(bytes.len(), 12 + 2 * n * m);
        let back = load_codes(&p).unwrap();
        prop_assert_eq!(&back, &codes);
        prop_assert_eq!(codes_to_bytes(&back).unwrap(), bytes);
    }
}
