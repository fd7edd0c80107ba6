use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dpsda_core::codec::write_atomic;
use dpsda_core::data::{io as data_io, LabeledDataset};
use dpsda_core::fl::checkpoint::{read_run, CheckpointWriter, FINAL_MODEL};
use dpsda_core::fl::{
    augment_clients, client_datasets, collect_label_counts, generate_contributions,
    load_contributions, load_data, run_experiment, save_contributions, server_distribute,
    train_rounds, Algorithm, DistributionPlan, ExperimentConfig, RoundObserver,
};
use dpsda_core::metrics::report::{write_round_stream, RoundRecord};
use dpsda_core::metrics::{evaluate as evaluate_model, RoundLog};
use dpsda_core::nn::{io as params_io, ModelParams};
use dpsda_core::{Error, Result};

use crate::report::write_report;

pub const CONFIG_FILE: &str = "config.toml";
pub const CLIENTS_DIR: &str = "clients";
pub const AUGMENTED_DIR: &str = "augmented";
pub const TEST_FILE: &str = "test.dpds";
pub const HELDOUT_FILE: &str = "heldout.dpds";
pub const POOL_FILE: &str = "pool.dppl";
pub const PLAN_FILE: &str = "plan.tsv";
pub const RUNS_DIR: &str = "runs";
pub const EVALUATION_FILE: &str = "evaluation.jsonl";

pub fn client_file(i: usize) -> String {
    format!("client_{i:02}.dpds")
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn work_config(work: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    ExperimentConfig::load(&work.join(CONFIG_FILE), overrides)
}

fn read_clients(dir: &Path, n: usize) -> Result<Vec<LabeledDataset>> {
    (0..n)
        .map(|i| data_io::load(&dir.join(client_file(i))).map(|f| f.dataset))
        .collect()
}

fn write_clients(dir: &Path, clients: &[LabeledDataset]) -> Result<()> {
    create_dir(dir)?;
    for (i, c) in clients.iter().enumerate() {
        data_io::save(&dir.join(client_file(i)), c, &[])?;
    }
    Ok(())
}

/// The run seed of a working directory is its only configured seed.
fn work_seed(config: &ExperimentConfig) -> u64 {
    config.seeds[0]
}

pub fn partition(config: &ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<()> {
    let seed = seed.unwrap_or(config.seeds[0]);
    let data = load_data(&config.dataset).map_err(|e| e.context("load"))?;
    let clients = client_datasets(config, &data.train, seed).map_err(|e| e.context("partition"))?;
    write_clients(&out.join(CLIENTS_DIR), &clients)?;
    data_io::save(&out.join(TEST_FILE), &data.test, &[])?;
    data_io::save(&out.join(HELDOUT_FILE), &data.heldout, &[])?;
    let resolved = ExperimentConfig {
        seeds: vec![seed],
        ..config.clone()
    };
    write_atomic(&out.join(CONFIG_FILE), resolved.to_toml().as_bytes())?;
    for (i, c) in clients.iter().enumerate() {
        log::info!(
            "client {i}: {} examples, classes {:?}",
            c.len(),
            c.held_classes()
        );
    }
    log::info!(
        "test {} examples, held-out {} examples, written to {}",
        data.test.len(),
        data.heldout.len(),
        out.display()
    );
    Ok(())
}

pub fn generate(work: &Path, overrides: &[String]) -> Result<()> {
    let config = work_config(work, overrides)?;
    let clients = read_clients(&work.join(CLIENTS_DIR), config.clients)?;
    let heldout = data_io::load(&work.join(HELDOUT_FILE))?.dataset;
    let contributions = generate_contributions(&config, &clients, &heldout, work_seed(&config))
        .map_err(|e| e.context("generate"))?;
    for c in &contributions {
        for m in &c.metadata {
            log::info!(
                "client {} class {}: {} queries, epsilon spent {:.3}",
                m.client_id,
                m.class,
                m.queries_used,
                m.epsilon
            );
        }
    }
    save_contributions(&work.join(POOL_FILE), &contributions)
}

fn plan_table(plan: &DistributionPlan) -> String {
    let mut out = String::from("client\tclass\toffset\tcount\n");
    for (client, assignment) in plan {
        for (class, s) in assignment {
            let _ = writeln!(out, "{client}\t{class}\t{}\t{}", s.offset, s.count);
        }
    }
    out
}

pub fn pool(work: &Path, overrides: &[String]) -> Result<()> {
    let config = work_config(work, overrides)?;
    let clients = read_clients(&work.join(CLIENTS_DIR), config.clients)?;
    let contributions = load_contributions(&work.join(POOL_FILE))?;
    let reports = collect_label_counts(&clients).map_err(|e| e.context("pool"))?;
    let (pool, plan) =
        server_distribute(&config, &contributions, &reports).map_err(|e| e.context("pool"))?;
    let augmented = augment_clients(&clients, &plan, &pool).map_err(|e| e.context("augment"))?;
    write_clients(&work.join(AUGMENTED_DIR), &augmented)?;
    write_atomic(&work.join(PLAN_FILE), plan_table(&plan).as_bytes())?;
    log::info!("pooled classes {:?}", pool.classes());
    Ok(())
}

pub fn train(work: &Path, overrides: &[String]) -> Result<PathBuf> {
    let config = work_config(work, overrides)?;
    let dir = if config.algorithm == Algorithm::DpsdaFl {
        let dir = work.join(AUGMENTED_DIR);
        if !dir.is_dir() {
            return Err(Error::Protocol(format!(
                "{} has no augmented clients; run `dpsda generate` and `dpsda pool` first",
                work.display()
            )));
        }
        dir
    } else {
        work.join(CLIENTS_DIR)
    };
    let clients = read_clients(&dir, config.clients)?;
    let test = data_io::load(&work.join(TEST_FILE))?.dataset;
    let seed = work_seed(&config);
    let mut writer = CheckpointWriter::create(&work.join(RUNS_DIR), &config, seed)?;
    let mut record = |m: &ModelParams, log: &RoundLog| writer.record(m, log);
    let out = train_rounds(
        &config,
        &clients,
        &test,
        seed,
        Some(&mut record as &mut RoundObserver),
    )
    .map_err(|e| e.context("train"))?;
    writer.finish(&out.final_model)
}

pub fn evaluate(run: &Path, data: &Path) -> Result<()> {
    let model = params_io::load(&run.join(FINAL_MODEL))?;
    let test = data_io::load(data)?.dataset;
    let records = read_run(run)?;
    let last = records
        .last()
        .ok_or_else(|| Error::format(run, "run has no recorded rounds"))?;
    let mut log = evaluate_model(&model, &test).map_err(|e| e.context("evaluate"))?;
    log.round = last.round;
    log.check_identities()?;
    let record = RoundRecord::new(&last.run_id, &last.algorithm, last.seed, &log);
    if record.confusion != last.confusion {
        log::warn!(
            "final model disagrees with the last recorded round of {}",
            last.run_id
        );
    }
    write_round_stream(&run.join(EVALUATION_FILE), &[record])?;
    println!("{}\t{:.4}", last.run_id, log.top1_accuracy);
    Ok(())
}

pub fn reproduce(config: &ExperimentConfig, out: &Path) -> Result<()> {
    create_dir(out)?;
    write_atomic(&out.join(CONFIG_FILE), config.to_toml().as_bytes())?;
    let data = load_data(&config.dataset).map_err(|e| e.context("load"))?;
    let runs = out.join(RUNS_DIR);
    for algorithm in Algorithm::ALL {
        let cfg = config.for_algorithm(algorithm);
        for &seed in &config.seeds {
            let mut writer = CheckpointWriter::create(&runs, &cfg, seed)?;
            let mut record = |m: &ModelParams, log: &RoundLog| writer.record(m, log);
            let run = run_experiment(&cfg, seed, &data, Some(&mut record as &mut RoundObserver))
                .map_err(|e| e.context(format!("{} seed {seed}", algorithm.name())))?;
            let dir = writer.finish(&run.final_model)?;
            log::info!(
                "{} seed {seed}: final accuracy {:.4} ({})",
                algorithm.label(),
                run.final_log().top1_accuracy,
                dir.display()
            );
        }
    }
    write_report(&runs, out)
}
