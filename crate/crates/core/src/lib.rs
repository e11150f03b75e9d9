//! Epidemic source localization on meta-population networks.
//!
//! Given a transport network and one snapshot of per-region case counts,
//! [`profiler`] ranks every region by how likely it is to be the outbreak
//! source. [`simulator`] integrates a stochastic SIR model on the network to
//! synthesize ground-truth outbreaks, and [`experiments`] measures ranking
//! quality over ensembles of them. [`data_ingest`] turns cumulative case
//! reports into daily observation vectors.

pub mod cli;
pub mod data_ingest;
pub mod error;
pub mod experiments;
pub mod network;
pub mod profiler;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use network::{
    generate_erdos_renyi, hop_distances, mobility_matrix, DistanceMatrix, MobilityMatrix, Network,
};
pub use profiler::{
    decay_weight, hit_score, likeliness_scores, DecayKind, DecaySpec, LikelinessResult, Profiler,
};
pub use simulator::{
    correlation_ri, simulate, synthesize_dataset, CompartmentState, Dataset, EpidemicParams,
    InitialCondition, Observable, SimulationConfig, Trajectory,
};
