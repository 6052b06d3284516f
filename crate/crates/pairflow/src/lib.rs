//! Closed-form flow transport for categorical sequence datasets.
//!
//! Everything is computed directly from the dataset: posterior row weights
//! from Hamming distances, denoising distributions and transport velocities
//! from those weights, and noise/data couplings by integrating the backward
//! field with per-row deterministic random streams. A continuous Gaussian
//! counterpart lives in [`continuous`].

pub mod continuous;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod oracle;
pub mod schedule;
pub mod seed;
pub mod transport;
pub mod velocity;

pub use continuous::{
    chamfer, integrate_forward, pair_continuous, two_moons_nfold, velocity_gaussian,
    ChamferReport, ContinuousPair, ContinuousPairing, PointSet,
};
pub use data::{DatasetStore, TokenSeq, Vocab};
pub use diagnostics::{
    empirical_coverage, expected_coverage, pair_hamming_stats, total_correlation,
    uniqueness_novelty, CoverageReport, PairStats, TcReport, UniquenessReport,
};
pub use error::{Error, Result};
pub use kernel::{
    hamming, hamming_profile, log_gamma, partition_subsets, posterior_weights, HammingProfile,
    LogGamma, Partition, WeightSet,
};
pub use schedule::{Direction, Scheduler, TimeGrid};
pub use seed::{SeedSpec, StreamDomain};
pub use transport::{
    decode_pairs, encode_pairs, invert, pairflow, read_pairs, sample_forward, step_categorical,
    write_pairs, FinalRule, PairMeta, PairRecord, PairSet, StepConfig,
};
pub use velocity::{
    denoiser_forward, noise_predictor, velocity_backward, velocity_forward, DistributionGrid,
    GridKind,
};
