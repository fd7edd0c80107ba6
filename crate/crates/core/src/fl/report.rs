use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// Per-class example counts a client shares with the server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCountReport {
    pub client_id: usize,
    counts: Vec<usize>,
}

impl LabelCountReport {
    pub fn new(client_id: usize, counts: Vec<usize>) -> Result<Self> {
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::Protocol(format!(
                "client {client_id} reports no examples"
            )));
        }
        Ok(Self { client_id, counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, class: usize) -> usize {
        self.counts.get(class).copied().unwrap_or(0)
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn held_classes(&self) -> Vec<usize> {
        (0..self.counts.len())
            .filter(|&c| self.counts[c] > 0)
            .collect()
    }
}

/// Client-side step: one report per client, in client order.
pub fn collect_label_counts(clients: &[LabeledDataset]) -> Result<Vec<LabelCountReport>> {
    clients
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if d.is_empty() {
                return Err(Error::Protocol(format!("client {i} has an empty dataset")));
            }
            LabelCountReport::new(i, d.class_counts().to_vec())
        })
        .collect()
}

/// Server view: union of classes held by at least one client.
pub fn global_label_counts(reports: &[LabelCountReport]) -> Vec<usize> {
    let k = reports.iter().map(|r| r.num_classes()).max().unwrap_or(0);
    (0..k)
        .map(|c| reports.iter().map(|r| r.count(c)).sum())
        .collect()
}
