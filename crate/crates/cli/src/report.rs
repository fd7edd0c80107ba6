use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dpsda_core::codec::write_atomic;
use dpsda_core::data::PartitionKind;
use dpsda_core::fl::checkpoint::{read_run, CONFIG_FILE, ROUNDS_FILE};
use dpsda_core::fl::{Algorithm, ExperimentConfig};
use dpsda_core::metrics::report::{confusion_grid, sum_confusions, summary_table, SummaryRow};
use dpsda_core::metrics::{summarize, RoundLog};
use dpsda_core::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.tsv";

/// Runs of one configuration, differing only in seed.
struct Group {
    config: ExperimentConfig,
    finals: Vec<(u64, RoundLog)>,
}

fn run_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(ROUNDS_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn collect(root: &Path) -> Result<BTreeMap<(Algorithm, String), Group>> {
    let mut groups: BTreeMap<(Algorithm, String), Group> = BTreeMap::new();
    for dir in run_dirs(root)? {
        let config = ExperimentConfig::load(&dir.join(CONFIG_FILE), &[])?;
        let records = read_run(&dir)?;
        let last = records
            .last()
            .ok_or_else(|| Error::format(dir.join(ROUNDS_FILE), "no rounds recorded"))?;
        let log = last.to_log()?;
        let key = (config.algorithm, config.hash());
        groups
            .entry(key)
            .or_insert_with(|| Group {
                config: config.clone(),
                finals: Vec::new(),
            })
            .finals
            .push((last.seed, log));
    }
    if groups.is_empty() {
        return Err(Error::format(root, "no run directories found"));
    }
    Ok(groups)
}

/// Writes `summary.tsv` and one `confusion_<algorithm>.csv` (final-round
/// confusion summed over seeds) per configuration found under `runs`.
pub fn write_report(runs: &Path, out: &Path) -> Result<()> {
    let groups = collect(runs)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut per_algorithm: BTreeMap<Algorithm, usize> = BTreeMap::new();
    for (alg, _) in groups.keys() {
        *per_algorithm.entry(*alg).or_default() += 1;
    }
    let mut rows = Vec::new();
    for ((alg, hash), group) in &groups {
        let mut finals = group.finals.clone();
        finals.sort_by_key(|(seed, _)| *seed);
        let logs: Vec<RoundLog> = finals.into_iter().map(|(_, l)| l).collect();
        let unique = per_algorithm[alg] == 1;
        let name = if unique {
            alg.name().to_string()
        } else {
            format!("{}-{hash}", alg.name())
        };
        let confusion = sum_confusions(logs.iter().map(|l| &l.confusion))?;
        write_atomic(
            &out.join(format!("confusion_{name}.csv")),
            confusion_grid(&confusion).as_bytes(),
        )?;
        let augmentation = *alg == Algorithm::DpsdaFl;
        rows.push(SummaryRow {
            approach: if unique {
                alg.label().to_string()
            } else {
                format!("{} ({hash})", alg.label())
            },
            augmentation,
            shared_percent: if augmentation {
                100.0 * group.config.share.max_class_fraction
            } else {
                0.0
            },
            classes_per_client: match group.config.partition {
                PartitionKind::LabelSkew { classes_per_client } => Some(classes_per_client),
                _ => None,
            },
            summary: summarize(&logs)?,
        });
    }
    let table = summary_table(&rows);
    write_atomic(&out.join(SUMMARY_FILE), table.as_bytes())?;
    print!("{table}");
    Ok(())
}
