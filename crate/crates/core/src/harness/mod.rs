//! Experiment harness: scenarios, the four mechanisms, metrics and sweeps
//! with CSV and manifest output.

mod experiment;
mod metrics;
mod pipeline;
mod scenario;

pub use experiment::{
    content_hash, has_flattened, replication_seed, run_complete_information, run_experiment, run_proposed,
    run_random_allocation, run_uniform_pricing, ExperimentRecord, ExperimentResult, Manifest, ManifestEntry,
    ReplicationFailure, SweepSummary, MANIFEST_FORMAT_VERSION,
};
pub use metrics::{compute_metrics, is_maximizer, Metrics, UserOutcome};
pub use pipeline::{replication_scene, run_replication, ReplicationOutcome};
pub use scenario::{Mechanism, Scenario};
