use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::LabelCountReport;

/// How much of its class set a client may synthesise and share. A zero
/// fraction disables sharing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SharePolicy {
    pub max_class_fraction: f64,
    pub samples_per_shared_class: usize,
}

impl Default for SharePolicy {
    fn default() -> Self {
        Self {
            max_class_fraction: 0.5,
            samples_per_shared_class: 5000,
        }
    }
}

impl SharePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.max_class_fraction) {
            return Err(Error::Config(format!(
                "max_class_fraction must be in [0, 1], got {}",
                self.max_class_fraction
            )));
        }
        if self.samples_per_shared_class == 0 {
            return Err(Error::Config(
                "samples_per_shared_class must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Maximum number of classes a client holding `held` classes may share.
    pub fn cap(&self, held: usize) -> usize {
        // Guard against 0.5 * 2 landing a hair above 1.0.
        ((self.max_class_fraction * held as f64) - 1e-9)
            .ceil()
            .max(0.0) as usize
    }
}

/// Seeded random choice of `cap(held)` of the client's held classes.
pub fn select_shareable_classes(
    report: &LabelCountReport,
    policy: &SharePolicy,
    rng: &mut impl Rng,
) -> Result<BTreeSet<usize>> {
    let mut held = report.held_classes();
    if held.is_empty() {
        return Err(Error::Protocol(format!(
            "client {} reported no classes",
            report.client_id
        )));
    }
    let k = policy.cap(held.len()).min(held.len());
    held.shuffle(rng);
    Ok(held.into_iter().take(k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};

    fn report(held: &[usize]) -> LabelCountReport {
        let mut counts = vec![0; 10];
        for &c in held {
            counts[c] = 100;
        }
        LabelCountReport::new(0, counts).unwrap()
    }

    fn pick(held: &[usize], fraction: f64, seed: u64) -> BTreeSet<usize> {
        let policy = SharePolicy {
            max_class_fraction: fraction,
            ..SharePolicy::default()
        };
        let mut r = rng::stream(seed, Purpose::Share, &[]);
        select_shareable_classes(&report(held), &policy, &mut r).unwrap()
    }

    #[test]
    fn half_of_two_is_one() {
        let s = pick(&[3, 7], 0.5, 1);
        assert_eq!(s.len(), 1);
        assert!(s.is_subset(&[3, 7].into_iter().collect()));
    }

    #[test]
    fn ceiling_rule_and_full_fraction() {
        assert_eq!(pick(&[1, 2, 3], 0.5, 1).len(), 2);
        assert_eq!(pick(&[1, 2, 3], 1.0, 1), [1, 2, 3].into_iter().collect());
    }

    #[test]
    fn deterministic_per_seed() {
        let held: Vec<usize> = (0..10).collect();
        assert_eq!(pick(&held, 0.3, 4), pick(&held, 0.3, 4));
    }
}
