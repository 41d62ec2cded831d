//! Sequential Monte Carlo joint state and parameter estimation for models
//! whose parameters change abruptly.
//!
//! The centerpiece is the adaptive parameter estimation filter
//! ([`filters::ape_step`]): an auxiliary-particle-filter style step that
//! weighs a "no changepoint" branch, where turn rate is refreshed by
//! Liu–West kernel shrinkage and noise variances by particle-learning
//! sufficient statistics, against a "changepoint" branch that redraws the
//! turn rate from its prior. The crate also ships the constituent filters,
//! an IMM/UKF baseline and a maneuvering-target scenario simulator.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

// `!(x >= 0)` rejects NaN on purpose; indexed loops read better in the
// small fixed-size matrix kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod filters;
pub mod imm;
pub mod linalg;
pub mod particle;
pub mod scalar;
pub mod scenario;
pub mod stochastics;
pub mod tracking;

pub use error::{Error, Result};
pub use particle::{
    effective_sample_size, normalize_log_weights, weighted_param_mean, weighted_state_mean, ParamVector,
    Particle, ParticleCloud, StateVector, SuffStats,
};
pub use scalar::Scalar;
pub use stochastics::RngStream;
pub use tracking::{CtConfig, Observation, SensorPose, TrackingModel};

pub type StateVectorF64 = particle::StateVector<f64>;
pub type ParamVectorF64 = particle::ParamVector<f64>;
pub type SuffStatsF64 = particle::SuffStats<f64>;
pub type ParticleCloudF64 = particle::ParticleCloud<f64>;
pub type ObservationF64 = tracking::Observation<f64>;
pub type SensorPoseF64 = tracking::SensorPose<f64>;
pub type TrackingModelF64 = tracking::TrackingModel<f64>;
pub type ApeConfigF64 = filters::ApeConfig<f64>;
pub type FilterStepResultF64 = filters::FilterStepResult<f64>;
pub type ScenarioConfigF64 = scenario::ScenarioConfig<f64>;
pub type GroundTruthF64 = scenario::GroundTruth<f64>;
pub type GaussianBeliefF64 = imm::GaussianBelief<f64>;
pub type ImmModelBankF64 = imm::ImmModelBank<f64>;

pub type StateVectorF32 = particle::StateVector<f32>;
pub type ParamVectorF32 = particle::ParamVector<f32>;
pub type ParticleCloudF32 = particle::ParticleCloud<f32>;
pub type ObservationF32 = tracking::Observation<f32>;
pub type ApeConfigF32 = filters::ApeConfig<f32>;
pub type ScenarioConfigF32 = scenario::ScenarioConfig<f32>;
