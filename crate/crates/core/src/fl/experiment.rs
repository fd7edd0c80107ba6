use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::data::{
    holdout_split, load_cifar10, partition, resize_image, LabeledDataset, LabeledExample, ToySpec,
};
use crate::dp::{
    oracle_generate, pe_generate, select_shareable_classes, GeneratorKind, SyntheticMetadata,
};
use crate::error::{Error, Result};
use crate::fl::{
    aggregate, aggregate_weighted, augment, build_global_pool, collect_label_counts, local_train,
    plan_distribution, Algorithm, Contribution, DatasetConfig, DatasetSource, DistributionPlan,
    ExperimentConfig, GlobalSyntheticPool, LabelCountReport,
};
use crate::metrics::{evaluate, RoundLog};
use crate::nn::{init_params, Architecture, ModelParams};
use crate::rng::{self, derive_seed, Purpose};

/// Real data available to one experiment. `heldout` feeds only the oracle
/// generator and is disjoint from `train`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub train: LabeledDataset,
    pub heldout: LabeledDataset,
    pub test: LabeledDataset,
}

pub fn load_data(config: &DatasetConfig) -> Result<ExperimentData> {
    match config.source {
        DatasetSource::Toy => {
            let per_class =
                config.toy_train_per_class + config.toy_test_per_class + config.heldout_per_class;
            let all = ToySpec {
                num_classes: config.toy_classes,
                per_class,
                feature_dim: config.toy_feature_dim,
                separation: config.toy_separation,
                modes: config.toy_modes,
                seed: config.seed,
            }
            .generate()?;
            let (rest, test) = holdout_split(&all, config.toy_test_per_class, config.seed)?;
            let (train, heldout) = holdout_split(&rest, config.heldout_per_class, config.seed)?;
            Ok(ExperimentData {
                train,
                heldout,
                test,
            })
        }
        DatasetSource::Cifar10 => {
            let dir = config.path.as_ref().ok_or_else(|| {
                Error::Config("dataset.path is not set for the cifar10 source".into())
            })?;
            let (full, test) = load_cifar10(dir)?;
            let (full, test) = match config.resize {
                Some(side) => (downsample(full, side)?, downsample(test, side)?),
                None => (full, test),
            };
            let (train, heldout) = holdout_split(&full, config.heldout_per_class, config.seed)?;
            Ok(ExperimentData {
                train,
                heldout,
                test,
            })
        }
    }
}

fn downsample(data: LabeledDataset, side: usize) -> Result<LabeledDataset> {
    let k = data.num_classes();
    let examples = data
        .into_examples()
        .into_par_iter()
        .map(|e| {
            Ok(LabeledExample {
                features: resize_image(&e.features, (side, side))?,
                ..e
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(examples, k)
}

pub fn architecture(config: &ExperimentConfig, data: &LabeledDataset) -> Result<Architecture> {
    let shape = data
        .feature_shape()
        .ok_or_else(|| Error::Domain("cannot size a model from an empty dataset".into()))?;
    config.model.architecture(shape, data.num_classes())
}

/// Client partitions for one seed, in client order.
pub fn client_datasets(
    config: &ExperimentConfig,
    train: &LabeledDataset,
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    partition(train, &config.partition_spec(seed))
}

/// Client-side synthetic generation. Each client picks its shareable classes
/// from its own label counts and synthesises them; clients sharing nothing
/// are omitted from the result.
pub fn generate_contributions(
    config: &ExperimentConfig,
    clients: &[LabeledDataset],
    heldout: &LabeledDataset,
    seed: u64,
) -> Result<Vec<Contribution>> {
    let per_client = clients
        .par_iter()
        .enumerate()
        .map(|(client, data)| {
            generate_for_client(config, client, data, heldout, seed)
                .map_err(|e| e.context(format!("client {client} generation")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_client.into_iter().flatten().collect())
}

fn generate_for_client(
    config: &ExperimentConfig,
    client: usize,
    data: &LabeledDataset,
    heldout: &LabeledDataset,
    seed: u64,
) -> Result<Option<Contribution>> {
    let report = LabelCountReport::new(client, data.class_counts().to_vec())?;
    let mut share_rng = rng::stream(seed, Purpose::Share, &[client as u64]);
    let classes = select_shareable_classes(&report, &config.share, &mut share_rng)?;
    if classes.is_empty() {
        return Ok(None);
    }
    let generator = &config.generator;
    let count = config.share.samples_per_shared_class;
    let mut budget = match generator.kind {
        GeneratorKind::PrivateEvolutionLite => Some(generator.client_budget(classes.len())?),
        GeneratorKind::HeldOutOracle => None,
    };
    let mut examples = Vec::new();
    let mut metadata = Vec::new();
    for &class in &classes {
        let tags = [client as u64, class as u64];
        let mut rng = rng::stream(seed, Purpose::Generate, &tags);
        let (synthetic, epsilon, delta, queries) = match budget.as_mut() {
            Some(budget) => {
                let out = pe_generate(data, class, count, generator, budget, &mut rng)?;
                (
                    out,
                    budget.spent_epsilon(),
                    budget.spent_delta(),
                    budget.queries_used(),
                )
            }
            None => {
                let out = oracle_generate(
                    heldout,
                    class,
                    count,
                    generator.oracle_with_replacement,
                    &mut rng,
                )?;
                (out, 0.0, 0.0, 0)
            }
        };
        examples.extend(synthetic.into_examples());
        metadata.push(SyntheticMetadata {
            client_id: client,
            class,
            epsilon,
            delta,
            queries_used: queries,
            generator: generator.kind,
            seed: derive_seed(seed, Purpose::Generate, &tags),
        });
    }
    Ok(Some(Contribution {
        client_id: client,
        dataset: LabeledDataset::new(examples, data.num_classes())?,
        metadata,
    }))
}

/// Server-side pre-phase: pool the contributions and plan who gets what.
/// Only label-count reports and synthetic data cross into this function.
pub fn server_distribute(
    config: &ExperimentConfig,
    contributions: &[Contribution],
    reports: &[LabelCountReport],
) -> Result<(GlobalSyntheticPool, DistributionPlan)> {
    let pool = build_global_pool(contributions, reports, &config.share)?;
    let plan = plan_distribution(&pool, reports, &config.distribution);
    Ok((pool, plan))
}

pub fn augment_clients(
    clients: &[LabeledDataset],
    plan: &DistributionPlan,
    pool: &GlobalSyntheticPool,
) -> Result<Vec<LabeledDataset>> {
    clients
        .iter()
        .enumerate()
        .map(|(i, local)| match plan.get(&i) {
            Some(assignment) => augment(local, assignment, pool),
            None => Ok(local.clone()),
        })
        .collect()
}

/// Per-round hook, called after aggregation and evaluation.
pub type RoundObserver<'a> = dyn FnMut(&ModelParams, &RoundLog) -> Result<()> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutput {
    pub logs: Vec<RoundLog>,
    pub final_model: ModelParams,
}

/// `config.rounds` rounds of broadcast, parallel local training, aggregation
/// and evaluation, starting from a server-side initialisation.
pub fn train_rounds(
    config: &ExperimentConfig,
    clients: &[LabeledDataset],
    test: &LabeledDataset,
    seed: u64,
    observer: Option<&mut RoundObserver<'_>>,
) -> Result<TrainingOutput> {
    config.validate()?;
    if clients.len() != config.clients {
        return Err(Error::Protocol(format!(
            "{} client datasets for {} configured clients",
            clients.len(),
            config.clients
        )));
    }
    let arch = architecture(config, test)?;
    let training = config.local_training();
    let sizes: Vec<usize> = clients.iter().map(LabeledDataset::len).collect();
    let mut weights = init_params(arch, seed)?;
    let mut logs = Vec::with_capacity(config.rounds);
    let mut observer = observer;
    for round in 1..=config.rounds {
        let updates = clients
            .par_iter()
            .enumerate()
            .map(|(i, data)| {
                let mut rng = rng::stream(seed, Purpose::LocalTrain, &[i as u64, round as u64]);
                local_train(&weights, data, &training, &mut rng)
                    .map(|u| u.weights)
                    .map_err(|e| e.context(format!("round {round}, client {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        weights = if config.weighted_aggregation {
            aggregate_weighted(&updates, &sizes)?
        } else {
            aggregate(&updates)?
        };
        let mut log = evaluate(&weights, test).map_err(|e| e.context(format!("round {round}")))?;
        log.round = round;
        log.check_identities()?;
        log::info!(
            "{} seed {seed} round {round}/{}: accuracy {:.4}",
            config.algorithm.name(),
            config.rounds,
            log.top1_accuracy
        );
        if let Some(hook) = observer.as_mut() {
            hook(&weights, &log)?;
        }
        logs.push(log);
    }
    Ok(TrainingOutput {
        logs,
        final_model: weights,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub logs: Vec<RoundLog>,
    pub final_model: ModelParams,
    /// Classes present in the synthetic pool (empty for the baselines).
    pub pooled_classes: BTreeSet<usize>,
    pub plan: DistributionPlan,
}

impl RunOutput {
    pub fn final_log(&self) -> &RoundLog {
        self.logs.last().expect("at least one round")
    }
}

/// Full pipeline for one seed: partition, the synthetic pre-phase when the
/// algorithm is DPSDA-FL, then the round loop.
pub fn run_experiment(
    config: &ExperimentConfig,
    seed: u64,
    data: &ExperimentData,
    observer: Option<&mut RoundObserver<'_>>,
) -> Result<RunOutput> {
    config.validate()?;
    let clients = client_datasets(config, &data.train, seed).map_err(|e| e.context("partition"))?;
    let (clients, pooled_classes, plan) = if config.algorithm == Algorithm::DpsdaFl {
        let reports = collect_label_counts(&clients)?;
        let contributions = generate_contributions(config, &clients, &data.heldout, seed)
            .map_err(|e| e.context("generate"))?;
        let (pool, plan) =
            server_distribute(config, &contributions, &reports).map_err(|e| e.context("pool"))?;
        let augmented =
            augment_clients(&clients, &plan, &pool).map_err(|e| e.context("augment"))?;
        (augmented, pool.classes().into_iter().collect(), plan)
    } else {
        (clients, BTreeSet::new(), DistributionPlan::new())
    };
    let out = train_rounds(config, &clients, &data.test, seed, observer)
        .map_err(|e| e.context("train"))?;
    Ok(RunOutput {
        seed,
        algorithm: config.algorithm,
        logs: out.logs,
        final_model: out.final_model,
        pooled_classes,
        plan,
    })
}
