use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PartitionKind {
    /// Stratified split: every client mirrors the global class mix.
    Iid,
    /// Each client holds exactly `classes_per_client` classes.
    LabelSkew { classes_per_client: usize },
    /// Client sizes follow `quantity_weights`, stratified within each class.
    QuantitySkew { quantity_weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub kind: PartitionKind,
    pub n_clients: usize,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.n_clients == 0 {
            return Err(Error::Spec("n_clients must be positive".into()));
        }
        match &self.kind {
            PartitionKind::Iid => Ok(()),
            PartitionKind::LabelSkew { classes_per_client } => {
                if *classes_per_client == 0 || *classes_per_client > num_classes {
                    return Err(Error::Spec(format!(
                        "classes_per_client must be in [1, {num_classes}], got {classes_per_client}"
                    )));
                }
                Ok(())
            }
            PartitionKind::QuantitySkew { quantity_weights } => {
                if quantity_weights.len() != self.n_clients {
                    return Err(Error::Spec(format!(
                        "{} quantity weights for {} clients",
                        quantity_weights.len(),
                        self.n_clients
                    )));
                }
                if quantity_weights
                    .iter()
                    .any(|w| !(w.is_finite() && *w >= 0.0))
                {
                    return Err(Error::Spec(
                        "quantity weights must be finite and >= 0".into(),
                    ));
                }
                let sum: f64 = quantity_weights.iter().sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(Error::Spec(format!("quantity weights sum to {sum}, not 1")));
                }
                Ok(())
            }
        }
    }
}

/// Class sets dealt to each client under label skew.
///
/// Classes are shuffled with the partition seed and dealt in contiguous blocks of
/// `classes_per_client`, wrapping around, so client `i` receives shuffled
/// positions `i·c .. i·c + c (mod K)`.
pub fn label_skew_classes(
    num_classes: usize,
    n_clients: usize,
    classes_per_client: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..num_classes).collect();
    order.shuffle(&mut rng::stream(seed, Purpose::Partition, &[0]));
    (0..n_clients)
        .map(|i| {
            let mut held: Vec<usize> = (0..classes_per_client)
                .map(|r| order[(i * classes_per_client + r) % num_classes])
                .collect();
            held.sort_unstable();
            held
        })
        .collect()
}

/// Source indices assigned to each client, ascending within a client.
pub fn assign(dataset: &LabeledDataset, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>> {
    let k = dataset.num_classes();
    spec.validate(k)?;
    let n = spec.n_clients;
    let mut by_class = dataset.class_indices();
    let mut rng = rng::stream(spec.seed, Purpose::Partition, &[1]);
    for idx in by_class.iter_mut() {
        idx.shuffle(&mut rng);
    }
    let mut clients = vec![Vec::new(); n];
    match &spec.kind {
        PartitionKind::Iid => {
            let mut next = 0usize;
            for idx in &by_class {
                for &i in idx {
                    clients[next % n].push(i);
                    next += 1;
                }
            }
        }
        PartitionKind::LabelSkew { classes_per_client } => {
            let held = label_skew_classes(k, n, *classes_per_client, spec.seed);
            for (class, idx) in by_class.iter().enumerate() {
                let holders: Vec<usize> = (0..n).filter(|&i| held[i].contains(&class)).collect();
                if holders.is_empty() {
                    continue;
                }
                if idx.len() < holders.len() {
                    return Err(Error::Spec(format!(
                        "class {class} has {} examples for {} holders",
                        idx.len(),
                        holders.len()
                    )));
                }
                for (holder, chunk) in holders.iter().zip(even_chunks(idx, holders.len())) {
                    clients[*holder].extend_from_slice(chunk);
                }
            }
        }
        PartitionKind::QuantitySkew { quantity_weights } => {
            for idx in &by_class {
                let sizes = largest_remainder(quantity_weights, idx.len());
                let mut start = 0;
                for (client, size) in sizes.into_iter().enumerate() {
                    clients[client].extend_from_slice(&idx[start..start + size]);
                    start += size;
                }
            }
        }
    }
    for c in clients.iter_mut() {
        c.sort_unstable();
    }
    Ok(clients)
}

/// Splits `dataset` into `spec.n_clients` disjoint client datasets.
pub fn partition(dataset: &LabeledDataset, spec: &PartitionSpec) -> Result<Vec<LabeledDataset>> {
    Ok(assign(dataset, spec)?
        .iter()
        .map(|idx| dataset.select(idx))
        .collect())
}

/// Splits into `parts` nearly equal contiguous chunks; earlier chunks take the remainder.
fn even_chunks<T>(items: &[T], parts: usize) -> Vec<&[T]> {
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push(&items[start..start + len]);
        start += len;
    }
    out
}

/// Integer sizes summing to `total`, proportional to `weights`.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Moves `per_class` seeded-random examples of every class into a second
/// dataset. Both outputs keep source order.
pub fn holdout_split(
    dataset: &LabeledDataset,
    per_class: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut rng = rng::stream(seed, Purpose::Holdout, &[per_class as u64]);
    let mut held = Vec::new();
    for (class, mut idx) in dataset.class_indices().into_iter().enumerate() {
        if idx.len() < per_class {
            return Err(Error::Domain(format!(
                "class {class} has {} examples, cannot hold out {per_class}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        held.extend_from_slice(&idx[..per_class]);
    }
    held.sort_unstable();
    let mut mask = vec![false; dataset.len()];
    for &i in &held {
        mask[i] = true;
    }
    let rest: Vec<usize> = (0..dataset.len()).filter(|&i| !mask[i]).collect();
    Ok((dataset.select(&rest), dataset.select(&held)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::toy::make_toy_dataset;

    fn spec(kind: PartitionKind, n: usize) -> PartitionSpec {
        PartitionSpec {
            kind,
            n_clients: n,
            seed: 11,
        }
    }

    #[test]
    fn five_by_two_label_skew_is_perfect_cover() {
        let d = make_toy_dataset(10, 50, 10, 1.0, 0).unwrap();
        let parts = partition(
            &d,
            &spec(
                PartitionKind::LabelSkew {
                    classes_per_client: 2,
                },
                5,
            ),
        )
        .unwrap();
        let mut owner = [None; 10];
        for (i, p) in parts.iter().enumerate() {
            let held = p.held_classes();
            assert_eq!(held.len(), 2);
            for c in held {
                assert!(owner[c].is_none(), "class {c} shared");
                owner[c] = Some(i);
                assert_eq!(p.class_counts()[c], 50);
            }
        }
        assert!(owner.iter().all(Option::is_some));
    }

    #[test]
    fn iid_is_stratified() {
        let d = make_toy_dataset(10, 100, 4, 1.0, 0).unwrap();
        let parts = partition(&d, &spec(PartitionKind::Iid, 5)).unwrap();
        for p in &parts {
            assert_eq!(p.len(), 200);
            for &c in p.class_counts() {
                let frac = c as f64 / 200.0;
                assert!((frac - 0.1).abs() <= 0.02);
            }
        }
    }

    #[test]
    fn shared_classes_split_evenly_with_remainder_first() {
        let d = make_toy_dataset(2, 7, 2, 1.0, 0).unwrap();
        let parts = partition(
            &d,
            &spec(
                PartitionKind::LabelSkew {
                    classes_per_client: 1,
                },
                4,
            ),
        )
        .unwrap();
        let held = label_skew_classes(2, 4, 1, 11);
        for class in 0..2 {
            let sizes: Vec<usize> = (0..4)
                .filter(|&i| held[i].contains(&class))
                .map(|i| parts[i].class_counts()[class])
                .collect();
            assert_eq!(sizes, vec![4, 3]);
        }
    }

    #[test]
    fn quantity_skew_follows_weights() {
        let d = make_toy_dataset(4, 100, 2, 1.0, 0).unwrap();
        let parts = partition(
            &d,
            &spec(
                PartitionKind::QuantitySkew {
                    quantity_weights: vec![0.5, 0.3, 0.2],
                },
                3,
            ),
        )
        .unwrap();
        let sizes: Vec<_> = parts.iter().map(|p| p.len()).collect();
        assert_eq!(sizes, vec![200, 120, 80]);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let d = make_toy_dataset(4, 10, 2, 1.0, 0).unwrap();
        assert!(matches!(
            partition(
                &d,
                &spec(
                    PartitionKind::LabelSkew {
                        classes_per_client: 5
                    },
                    2
                )
            ),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            partition(
                &d,
                &spec(
                    PartitionKind::QuantitySkew {
                        quantity_weights: vec![0.5, 0.4]
                    },
                    2
                )
            ),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            partition(&d, &spec(PartitionKind::Iid, 0)),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn holdout_is_disjoint_and_stratified() {
        let d = make_toy_dataset(3, 10, 2, 1.0, 0).unwrap();
        let (rest, held) = holdout_split(&d, 4, 2).unwrap();
        assert_eq!(held.class_counts(), &[4, 4, 4]);
        assert_eq!(rest.class_counts(), &[6, 6, 6]);
        for e in held.examples() {
            assert!(rest.examples().iter().all(|r| r.id != e.id));
        }
        assert!(holdout_split(&d, 11, 2).is_err());
    }
}
