use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::fl::{GlobalSyntheticPool, LabelCountReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistributionPolicy {
    /// Upper bound on synthetic examples a client receives per class.
    pub per_class_quota: usize,
    /// A class counts as lacking when the local count is at most this.
    pub deficiency_threshold: usize,
}

impl Default for DistributionPolicy {
    fn default() -> Self {
        Self {
            per_class_quota: 1000,
            deficiency_threshold: 0,
        }
    }
}

/// Contiguous run of pool examples of one class handed to one client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub offset: usize,
    pub count: usize,
}

/// client id → class → slice of the pool.
pub type DistributionPlan = BTreeMap<usize, BTreeMap<usize, Slice>>;

/// Splits each pooled class among the clients that lack it.
///
/// Recipients of class `c` are the clients with `count[c] <= θ` that did not
/// contribute `c`. Availability is divided evenly in client-id order with the
/// remainder going to the lowest ids; each recipient then takes at most `q`
/// from the front of its share. Every reporting client appears in the plan,
/// possibly with no classes.
pub fn plan_distribution(
    pool: &GlobalSyntheticPool,
    reports: &[LabelCountReport],
    policy: &DistributionPolicy,
) -> DistributionPlan {
    let mut plan: DistributionPlan = reports
        .iter()
        .map(|r| (r.client_id, BTreeMap::new()))
        .collect();
    for class in pool.classes() {
        let contributors = pool.contributors(class);
        let mut recipients: Vec<usize> = reports
            .iter()
            .filter(|r| {
                r.count(class) <= policy.deficiency_threshold
                    && !contributors.contains(&r.client_id)
            })
            .map(|r| r.client_id)
            .collect();
        if recipients.is_empty() {
            continue;
        }
        recipients.sort_unstable();
        let available = pool.available(class);
        let (base, extra) = (available / recipients.len(), available % recipients.len());
        let mut offset = 0;
        for (rank, client) in recipients.into_iter().enumerate() {
            let share = base + usize::from(rank < extra);
            let count = share.min(policy.per_class_quota);
            if count > 0 {
                plan.entry(client)
                    .or_default()
                    .insert(class, Slice { offset, count });
            }
            offset += share;
        }
    }
    plan
}

/// Appends the assigned pool examples to a client's local data.
pub fn augment(
    local: &LabeledDataset,
    assignment: &BTreeMap<usize, Slice>,
    pool: &GlobalSyntheticPool,
) -> Result<LabeledDataset> {
    let mut out = local.clone();
    for (&class, slice) in assignment {
        let end = slice.offset + slice.count;
        if class >= pool.num_classes() || end > pool.available(class) {
            return Err(Error::Protocol(format!(
                "assignment of class {class} needs pool entries {}..{end}, {} available",
                slice.offset,
                pool.available(class)
            )));
        }
        out.extend(
            pool.examples(class)[slice.offset..end]
                .iter()
                .map(|(_, e)| e.clone()),
        )?;
    }
    Ok(out)
}
