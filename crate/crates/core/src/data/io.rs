//! Columnar binary format for datasets.
//!
//! `"DPDS"`, version byte, `num_classes: u32`, `count: u64`, feature shape,
//! `records: u32` synthetic-metadata records, then four columns: ids
//! (`u64`), labels (`u32`), provenance (`u8`, 0 real / 1 synthetic) and the
//! features as one contiguous little-endian `f32` block.

use std::path::Path;

use crate::codec::{read_file, write_atomic, Reader, Writer};
use crate::data::dataset::{LabeledDataset, LabeledExample, Provenance};
use crate::dp::{GeneratorKind, SyntheticMetadata};
use crate::error::Result;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"DPDS";

/// A dataset plus the generation records attached to it (empty for real data).
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub dataset: LabeledDataset,
    pub metadata: Vec<SyntheticMetadata>,
}

pub fn encode(dataset: &LabeledDataset, metadata: &[SyntheticMetadata]) -> Vec<u8> {
    let mut w = Writer::new(MAGIC);
    write_body(&mut w, dataset, metadata);
    w.finish()
}

pub(crate) fn write_body(w: &mut Writer, dataset: &LabeledDataset, metadata: &[SyntheticMetadata]) {
    w.u32(dataset.num_classes() as u32);
    w.u64(dataset.len() as u64);
    w.shape(dataset.feature_shape().unwrap_or(&[]));
    w.u32(metadata.len() as u32);
    for m in metadata {
        w.u32(m.client_id as u32);
        w.u32(m.class as u32);
        w.f64(m.epsilon);
        w.f64(m.delta);
        w.u64(m.queries_used);
        w.u8(match m.generator {
            GeneratorKind::PrivateEvolutionLite => 0,
            GeneratorKind::HeldOutOracle => 1,
        });
        w.u64(m.seed);
    }
    let ex = dataset.examples();
    ex.iter().for_each(|e| w.u64(e.id));
    ex.iter().for_each(|e| w.u32(e.label as u32));
    ex.iter().for_each(|e| {
        w.u8(match e.provenance {
            Provenance::Real => 0,
            Provenance::Synthetic => 1,
        })
    });
    ex.iter().for_each(|e| w.f32s(e.features.data()));
}

pub(crate) fn read_body(r: &mut Reader<'_>) -> Result<DatasetFile> {
    let num_classes = r.u32()? as usize;
    let count = r.u64()? as usize;
    let shape = r.shape()?;
    let records = r.u32()? as usize;
    let mut metadata = Vec::with_capacity(records);
    for _ in 0..records {
        let client_id = r.u32()? as usize;
        let class = r.u32()? as usize;
        let epsilon = r.f64()?;
        let delta = r.f64()?;
        let queries_used = r.u64()?;
        let generator = match r.u8()? {
            0 => GeneratorKind::PrivateEvolutionLite,
            1 => GeneratorKind::HeldOutOracle,
            other => return Err(r.error(format!("unknown generator tag {other}"))),
        };
        let seed = r.u64()?;
        metadata.push(SyntheticMetadata {
            client_id,
            class,
            epsilon,
            delta,
            queries_used,
            generator,
            seed,
        });
    }
    let ids: Vec<u64> = (0..count).map(|_| r.u64()).collect::<Result<_>>()?;
    let labels: Vec<usize> = (0..count)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<_>>()?;
    let provenance: Vec<Provenance> = (0..count)
        .map(|_| match r.u8()? {
            0 => Ok(Provenance::Real),
            1 => Ok(Provenance::Synthetic),
            other => Err(r.error(format!("unknown provenance tag {other}"))),
        })
        .collect::<Result<_>>()?;
    let per: usize = shape.iter().product();
    let mut examples = Vec::with_capacity(count);
    for i in 0..count {
        let data = r.f32s(per)?;
        let features = Tensor::new(shape.clone(), data).map_err(|e| r.error(e.to_string()))?;
        examples.push(LabeledExample {
            id: ids[i],
            features,
            label: labels[i],
            provenance: provenance[i],
        });
    }
    let dataset = LabeledDataset::new(examples, num_classes).map_err(|e| r.error(e.to_string()))?;
    Ok(DatasetFile { dataset, metadata })
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<DatasetFile> {
    let mut r = Reader::open(bytes, MAGIC, origin)?;
    let file = read_body(&mut r)?;
    r.finish()?;
    Ok(file)
}

pub fn save(path: &Path, dataset: &LabeledDataset, metadata: &[SyntheticMetadata]) -> Result<()> {
    write_atomic(path, &encode(dataset, metadata))
}

pub fn load(path: &Path) -> Result<DatasetFile> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::toy::make_toy_dataset;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn roundtrip(k in 2usize..6, n in 1usize..6, f in 1usize..5, seed in any::<u64>()) {
            let d = make_toy_dataset(k, n, f, 2.0, seed).unwrap();
            let meta = vec![SyntheticMetadata {
                client_id: 3, class: 1, epsilon: 10.0, delta: 1e-5, queries_used: 4,
                generator: GeneratorKind::PrivateEvolutionLite, seed,
            }];
            let back = decode(&encode(&d, &meta), Path::new("mem")).unwrap();
            prop_assert_eq!(back.dataset, d);
            prop_assert_eq!(back.metadata, meta);
        }
    }

    #[test]
    fn empty_dataset_roundtrips() {
        let d = LabeledDataset::empty(4);
        let back = decode(&encode(&d, &[]), Path::new("mem")).unwrap();
        assert_eq!(back.dataset, d);
    }
}
