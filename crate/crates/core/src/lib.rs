//! Stochastic model of open-loop legged transport over rugose terrain.
//!
//! Locomotion is driven by discrete basic active contacts (bacs). Terrain
//! corrupts each bac by delaying its onset and shortening its duration, with
//! a finite probability `b` of losing it entirely. Redundancy over time
//! (more gait periods) and over space (more serially connected leg modules)
//! bounds the resulting velocity uncertainty.
//!
//! Module map:
//! - [`model`]: thrust profiles, drag, the contact-noise sampler and single-bac outcomes.
//! - [`redundancy`]: temporal/spatial velocity averages, trajectories, first passage.
//! - [`estimator`]: Monte Carlo ensembles, quantile CIs, success probabilities and
//!   the minimal-redundancy bound.
//! - [`terrain`]: block heightmaps with target rugosity and estimation of `b` from logs.
//! - [`cli`]: the `matter-transport` command line.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod model;
pub mod redundancy;
pub mod rng;
pub mod terrain;

pub use error::{ModelError, Result};
pub use estimator::{
    bound_minimal_redundancy, destination_ci, ensemble, mean_velocity_approx,
    minimal_redundancy_empirical, success_probability, AnalyticSummary, MinimalRedundancy,
    RedundancyBound, SimResult, SuccessEstimate, TransportTask,
};
pub use model::{
    discretize, nominal_thrust, quantile_tau_u, sample_bac, BacOutcome, BacSequence, DragModel,
    NoiseModel, OutcomeGrid, ThrustProfile, TransportModel,
};
pub use redundancy::{
    first_passage_time, simulate_trajectory, velocity_spatial, velocity_temporal, Passage,
    RedundancyConfig, TransportOutcome,
};
pub use terrain::{estimate_b, generate_terrain, rugosity, BEstimate, ContactLog, TerrainMap};
