use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::data::{LabeledDataset, LabeledExample, Provenance};
use crate::error::{Error, Result};

/// Draws `count` examples of `class` from held-out real data and tags them
/// synthetic. Stands in for a high-quality generator in controlled runs.
///
/// Without replacement the held-out set must contain at least `count`
/// examples of the class. Source ids are kept so disjointness from client
/// partitions can be checked.
pub fn oracle_generate(
    heldout: &LabeledDataset,
    class: usize,
    count: usize,
    with_replacement: bool,
    rng: &mut impl Rng,
) -> Result<LabeledDataset> {
    if count == 0 {
        return Ok(LabeledDataset::empty(heldout.num_classes()));
    }
    let pool: Vec<&LabeledExample> = heldout.of_class(class).collect();
    if pool.is_empty() {
        return Err(Error::Domain(format!(
            "held-out set has no examples of class {class}"
        )));
    }
    let picked: Vec<&LabeledExample> = if with_replacement {
        (0..count)
            .map(|_| *pool.choose(rng).expect("non-empty"))
            .collect()
    } else {
        if pool.len() < count {
            return Err(Error::Domain(format!(
                "held-out set has {} examples of class {class}, {count} requested",
                pool.len()
            )));
        }
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(rng);
        order[..count].iter().map(|&i| pool[i]).collect()
    };
    LabeledDataset::new(
        picked
            .into_iter()
            .map(|e| LabeledExample {
                provenance: Provenance::Synthetic,
                ..e.clone()
            })
            .collect(),
        heldout.num_classes(),
    )
}
