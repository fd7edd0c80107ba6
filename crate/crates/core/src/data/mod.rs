//! Labelled datasets, CIFAR-10 ingestion, the toy Gaussian-cluster dataset,
//! Non-IID partitioners and box-filter image resizing.

pub mod cifar;
mod dataset;
pub mod io;
mod partition;
mod resize;
mod toy;

pub use cifar::load_cifar10;
pub use dataset::{LabeledDataset, LabeledExample, Provenance};
pub use partition::{
    assign, holdout_split, label_skew_classes, partition, PartitionKind, PartitionSpec,
};
pub use resize::resize_image;
pub use toy::{make_toy_dataset, ToySpec};
