//! Federated protocol: label-count reports, the global synthetic pool and
//! its deficiency-targeted distribution, local training, aggregation, and
//! the experiment runner for FedAvg, FedProx and DPSDA-FL.

pub mod checkpoint;
mod config;
mod distribution;
mod experiment;
mod pool;
mod report;
mod train;

pub use config::{
    Algorithm, DatasetConfig, DatasetSource, ExperimentConfig, ModelConfig, ModelKind,
};
pub use distribution::{augment, plan_distribution, DistributionPlan, DistributionPolicy, Slice};
pub use experiment::{
    architecture, augment_clients, client_datasets, generate_contributions, load_data,
    run_experiment, server_distribute, train_rounds, ExperimentData, RoundObserver, RunOutput,
    TrainingOutput,
};
pub use pool::{
    build_global_pool, decode_contributions, encode_contributions, load_contributions,
    save_contributions, Contribution, GlobalSyntheticPool,
};
pub use report::{collect_label_counts, global_label_counts, LabelCountReport};
pub use train::{aggregate, aggregate_weighted, local_train, LocalTraining, LocalUpdate};
