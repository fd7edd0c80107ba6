//! Differentially private synthetic data: Gaussian-mechanism calibration,
//! DP nearest-neighbour histograms, an evolution-style generator, a
//! held-out oracle generator, and the class-sharing cap.

mod budget;
mod evolution;
mod histogram;
mod oracle;
mod share;

pub use budget::{gaussian_sigma, PrivacyBudget};
pub use evolution::{
    evolve, pe_generate, DpHistogram, Evolution, GeneratorConfig, GeneratorKind, HistogramSource,
    SYNTHETIC_ID_BASE,
};
pub use histogram::{dp_nn_histogram, nearest_neighbor_counts};
pub use oracle::oracle_generate;
pub use share::{select_shareable_classes, SharePolicy};

/// Provenance record stored alongside a synthetic dataset on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMetadata {
    pub client_id: usize,
    pub class: usize,
    /// Budget actually spent (basic composition); infinite for non-private runs.
    pub epsilon: f64,
    pub delta: f64,
    pub queries_used: u64,
    pub generator: GeneratorKind,
    pub seed: u64,
}
