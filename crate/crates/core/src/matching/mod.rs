//! Bayesian one-to-many matching of file chunks to base-station channels:
//! preferences, priority classes, deferred acceptance and stability checks.

mod da;
mod preference;
mod types;

pub use da::{deferred_acceptance, matching_to_allocation, verify_bayesian_stability, StabilityReport};
pub use preference::{
    bs_gamma, bs_utility, chunk_files, classify_priority, nominal_quota, promotion, rank_applicants,
    user_preference_list, ApplicantScore, FileRequest, Rankings,
};
pub use types::{Band, BsChannelPair, Matching, PriorityAssignment, UserSubfilePair};
