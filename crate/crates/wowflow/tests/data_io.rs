use std::fs;
use std::io::BufReader;

use wowflow::data_io::{
    load_csv_dataset, load_idx_images, make_gaussian_blobs, make_rings, write_csv_dataset, write_snapshot, CsvOptions,
    DataError, SnapshotReader, SnapshotRecord,
};

fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = 0x0803u32.to_be_bytes().to_vec();
    for v in [count, rows, cols] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(pixels);
    b
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = 0x0801u32.to_be_bytes().to_vec();
    b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    b.extend_from_slice(labels);
    b
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = make_gaussian_blobs(3, 7, 4, 0.3, 9).unwrap();
    let labels: Vec<String> = ["2", "5", "11"].map(String::from).to_vec();
    let path = dir.path().join("blobs.csv");
    write_csv_dataset(fs::File::create(&path).unwrap(), &labels, &m).unwrap();
    let back = load_csv_dataset(&path, CsvOptions::default()).unwrap();
    assert_eq!(back.labels, labels);
    assert_eq!(back.measure, m);
}

#[test]
fn csv_missing_file_is_io_error() {
    let err = load_csv_dataset("/nonexistent/data.csv", CsvOptions::default()).unwrap_err();
    assert!(matches!(err, DataError::Io { .. }), "{err}");
}

#[test]
fn idx_files_decode_by_hand() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
    // Three 1×3 images; labels 4, 1, 4.
    fs::write(&img, idx_images(3, 1, 3, &[0, 255, 128, 1, 2, 3, 10, 20, 30])).unwrap();
    fs::write(&lbl, idx_labels(&[4, 1, 4])).unwrap();

    let m = load_idx_images(&img, &lbl, 1, 0).unwrap();
    assert_eq!(m.labels, ["1", "4"]);
    assert_eq!(m.measure.cloud(0).points(), &[1.0 / 255.0, 2.0 / 255.0, 3.0 / 255.0]);
    let four = m.measure.cloud(1).points();
    assert!(four == [0.0, 1.0, 128.0 / 255.0] || four == [10.0 / 255.0, 20.0 / 255.0, 30.0 / 255.0]);

    let err = load_idx_images(&img, &lbl, 2, 0).unwrap_err();
    assert!(err.to_string().contains("class 1"), "{err}");
    let err = load_idx_images(&lbl, &img, 1, 0).unwrap_err();
    assert!(matches!(err, DataError::BadMagic { .. }), "{err}");
}

#[test]
fn snapshot_file_stream() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.wowz");
    let rings = make_rings(10, 3, 2).unwrap();
    let records: Vec<_> = (0..4).map(|k| SnapshotRecord::from_measure(k * 10, 1.0 / (k as f64 + 3.0), &rings)).collect();
    let mut file = fs::File::create(&path).unwrap();
    for r in &records {
        write_snapshot(r, &mut file).unwrap();
    }
    drop(file);
    let back: Vec<_> = SnapshotReader::new(BufReader::new(fs::File::open(&path).unwrap()))
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(back, records);
    assert_eq!(back[3].to_measure().unwrap(), rings);
}
