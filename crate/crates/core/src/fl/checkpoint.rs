use std::path::{Path, PathBuf};

use crate::codec::write_atomic;
use crate::error::{Error, Result};
use crate::fl::ExperimentConfig;
use crate::metrics::report::{read_round_stream, write_round_stream, RoundRecord};
use crate::metrics::RoundLog;
use crate::nn::{io as params_io, ModelParams};

pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const CONFIG_FILE: &str = "config.toml";
pub const FINAL_MODEL: &str = "final.params";

/// `<algorithm>-<config hash>-seed<seed>`.
pub fn run_id(config: &ExperimentConfig, seed: u64) -> String {
    format!("{}-{}-seed{seed}", config.algorithm.name(), config.hash())
}

pub fn round_file(round: usize) -> String {
    format!("round_{round:03}.params")
}

/// Writes one parameter file per round plus the growing round log.
/// Every file is replaced atomically, so a crash leaves the last complete
/// round on disk.
#[derive(Debug)]
pub struct CheckpointWriter {
    dir: PathBuf,
    run_id: String,
    algorithm: String,
    seed: u64,
    records: Vec<RoundRecord>,
}

impl CheckpointWriter {
    pub fn create(root: &Path, config: &ExperimentConfig, seed: u64) -> Result<Self> {
        let run_id = run_id(config, seed);
        let dir = root.join(&run_id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_atomic(&dir.join(CONFIG_FILE), config.to_toml().as_bytes())?;
        Ok(Self {
            dir,
            run_id,
            algorithm: config.algorithm.name().to_string(),
            seed,
            records: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn record(&mut self, model: &ModelParams, log: &RoundLog) -> Result<()> {
        params_io::save(model, &self.dir.join(round_file(log.round)))?;
        self.records.push(RoundRecord::new(
            &self.run_id,
            &self.algorithm,
            self.seed,
            log,
        ));
        write_round_stream(&self.dir.join(ROUNDS_FILE), &self.records)
    }

    pub fn finish(self, model: &ModelParams) -> Result<PathBuf> {
        params_io::save(model, &self.dir.join(FINAL_MODEL))?;
        Ok(self.dir)
    }
}

/// Round records of a finished run directory.
pub fn read_run(dir: &Path) -> Result<Vec<RoundRecord>> {
    read_round_stream(&dir.join(ROUNDS_FILE))
}
