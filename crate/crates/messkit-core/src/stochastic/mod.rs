//! Stochastic unravelings: complex SLN noise pairs, SLN and linear HOPS
//! ensembles with seeded, order-independent reductions.

mod ensemble;
mod hops;
mod noise;
mod sln;

pub use ensemble::TrajectoryEnsemble;
pub use hops::{hops_propagate_ensemble, HopsOptions};
pub use noise::{
    generate_sln_noise, sln_targets, trajectory_rng, uniform_step, HopsNoiseGenerator,
    NoiseConstruction, NoiseOptions, NoiseSource, SLNNoisePair, SlnNoiseGenerator,
};
pub use sln::{sln_propagate_ensemble, SlnOptions};
