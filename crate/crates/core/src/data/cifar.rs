//! CIFAR-10 binary-version reader.
//!
//! Each batch file holds 10 000 records of 3073 bytes: one label byte then
//! 1024 red, 1024 green and 1024 blue bytes in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::dataset::{LabeledDataset, LabeledExample, Provenance};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CLASSES: usize = 10;
pub const SIDE: usize = 32;
pub const PIXELS: usize = 3 * SIDE * SIDE;
pub const RECORD_BYTES: usize = PIXELS + 1;
pub const RECORDS_PER_FILE: usize = 10_000;
pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

pub const CLASS_NAMES: [&str; CLASSES] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

fn ingestion(file: &Path, offset: u64, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        file: file.to_path_buf(),
        offset,
        reason: reason.into(),
    }
}

/// Parses one batch file; `first_id` is the id of its first record.
pub fn read_batch(path: &Path, first_id: u64) -> Result<Vec<LabeledExample>> {
    let bytes = fs::read(path).map_err(|e| ingestion(path, 0, e.to_string()))?;
    let expected = RECORDS_PER_FILE * RECORD_BYTES;
    if bytes.len() != expected {
        let complete = bytes.len() / RECORD_BYTES;
        return Err(ingestion(
            path,
            (complete * RECORD_BYTES) as u64,
            format!(
                "expected {expected} bytes ({RECORDS_PER_FILE} records), found {} (record {complete} incomplete or extra data)",
                bytes.len()
            ),
        ));
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            let label = rec[0] as usize;
            if label >= CLASSES {
                return Err(ingestion(
                    path,
                    (i * RECORD_BYTES) as u64,
                    format!("label byte {label} out of range"),
                ));
            }
            let data = rec[1..].iter().map(|&b| b as f32 / 255.0).collect();
            Ok(LabeledExample {
                id: first_id + i as u64,
                features: Tensor::from_parts_unchecked(vec![3, SIDE, SIDE], data),
                label,
                provenance: Provenance::Real,
            })
        })
        .collect()
}

/// Loads the 50 000-image training set and the 10 000-image test set.
pub fn load_cifar10(dir: impl AsRef<Path>) -> Result<(LabeledDataset, LabeledDataset)> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(ingestion(dir, 0, "dataset directory not found"));
    }
    let mut train = Vec::with_capacity(TRAIN_FILES.len() * RECORDS_PER_FILE);
    for (i, name) in TRAIN_FILES.iter().enumerate() {
        let path: PathBuf = dir.join(name);
        train.extend(read_batch(&path, (i * RECORDS_PER_FILE) as u64)?);
    }
    let test = read_batch(
        &dir.join(TEST_FILE),
        (TRAIN_FILES.len() * RECORDS_PER_FILE) as u64,
    )?;
    Ok((
        LabeledDataset::new(train, CLASSES)?,
        LabeledDataset::new(test, CLASSES)?,
    ))
}
