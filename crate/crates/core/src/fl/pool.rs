use std::collections::BTreeSet;
use std::path::Path;

use crate::codec::{read_file, write_atomic, Reader, Writer};
use crate::data::{io as data_io, LabeledDataset, LabeledExample, Provenance};
use crate::dp::{SharePolicy, SyntheticMetadata};
use crate::error::{Error, Result};
use crate::fl::LabelCountReport;

/// Synthetic data one client sends to the server.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub client_id: usize,
    pub dataset: LabeledDataset,
    pub metadata: Vec<SyntheticMetadata>,
}

impl Contribution {
    pub fn classes(&self) -> BTreeSet<usize> {
        self.dataset.held_classes().into_iter().collect()
    }
}

/// Server-held synthetic examples indexed by class, each tagged with its contributor.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSyntheticPool {
    num_classes: usize,
    per_class: Vec<Vec<(usize, LabeledExample)>>,
}

impl GlobalSyntheticPool {
    pub fn empty(num_classes: usize) -> Self {
        Self {
            num_classes,
            per_class: vec![Vec::new(); num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn available(&self, class: usize) -> usize {
        self.per_class.get(class).map_or(0, Vec::len)
    }

    pub fn classes(&self) -> Vec<usize> {
        (0..self.num_classes)
            .filter(|&c| self.available(c) > 0)
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.per_class.iter().all(Vec::is_empty)
    }

    pub fn contributors(&self, class: usize) -> BTreeSet<usize> {
        self.per_class
            .get(class)
            .map(|v| v.iter().map(|(c, _)| *c).collect())
            .unwrap_or_default()
    }

    pub fn examples(&self, class: usize) -> &[(usize, LabeledExample)] {
        &self.per_class[class]
    }
}

/// Indexes every contribution by class after checking the share cap.
///
/// A contribution is rejected when it carries non-synthetic examples, a
/// class its contributor does not hold, or more classes than the policy
/// allows for that contributor.
pub fn build_global_pool(
    contributions: &[Contribution],
    reports: &[LabelCountReport],
    policy: &SharePolicy,
) -> Result<GlobalSyntheticPool> {
    let k = reports
        .first()
        .map(|r| r.num_classes())
        .or_else(|| contributions.first().map(|c| c.dataset.num_classes()))
        .unwrap_or(0);
    let mut pool = GlobalSyntheticPool::empty(k);
    for contrib in contributions {
        let client = contrib.client_id;
        let report = reports
            .iter()
            .find(|r| r.client_id == client)
            .ok_or_else(|| Error::Policy {
                client,
                reason: "no label-count report on file".into(),
            })?;
        if contrib.dataset.num_classes() != k {
            return Err(Error::Policy {
                client,
                reason: format!("{} classes, pool uses {k}", contrib.dataset.num_classes()),
            });
        }
        if contrib
            .dataset
            .examples()
            .iter()
            .any(|e| e.provenance != Provenance::Synthetic)
        {
            return Err(Error::Policy {
                client,
                reason: "contribution contains non-synthetic examples".into(),
            });
        }
        let held: BTreeSet<usize> = report.held_classes().into_iter().collect();
        let classes = contrib.classes();
        if let Some(c) = classes.difference(&held).next() {
            return Err(Error::Policy {
                client,
                reason: format!("class {c} is not held by the contributor"),
            });
        }
        let cap = policy.cap(held.len());
        if classes.len() > cap {
            return Err(Error::Policy {
                client,
                reason: format!(
                    "shares {} classes, cap is {cap} of {} held",
                    classes.len(),
                    held.len()
                ),
            });
        }
        for e in contrib.dataset.examples() {
            pool.per_class[e.label].push((client, e.clone()));
        }
    }
    Ok(pool)
}

const POOL_MAGIC: &[u8; 4] = b"DPPL";

/// Pool file: `"DPPL"`, version byte, contribution count, then per
/// contribution its client id and an embedded dataset body with metadata.
pub fn encode_contributions(contributions: &[Contribution]) -> Vec<u8> {
    let mut w = Writer::new(POOL_MAGIC);
    w.u32(contributions.len() as u32);
    for c in contributions {
        w.u32(c.client_id as u32);
        data_io::write_body(&mut w, &c.dataset, &c.metadata);
    }
    w.finish()
}

pub fn decode_contributions(bytes: &[u8], origin: &Path) -> Result<Vec<Contribution>> {
    let mut r = Reader::open(bytes, POOL_MAGIC, origin)?;
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let client_id = r.u32()? as usize;
        let file = data_io::read_body(&mut r)?;
        out.push(Contribution {
            client_id,
            dataset: file.dataset,
            metadata: file.metadata,
        });
    }
    r.finish()?;
    Ok(out)
}

pub fn save_contributions(path: &Path, contributions: &[Contribution]) -> Result<()> {
    write_atomic(path, &encode_contributions(contributions))
}

pub fn load_contributions(path: &Path) -> Result<Vec<Contribution>> {
    decode_contributions(&read_file(path)?, path)
}
