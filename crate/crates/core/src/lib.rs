//! Approximate inference toolkit for binary two-layer noisy-OR (BN2O)
//! diagnostic networks with a modelled observation bias.

pub mod aisbn;
pub mod eval;
pub mod exact;
pub mod io;
pub mod jj99;
pub mod model;
pub mod netgen;
pub mod numeric;
pub mod recog;
pub mod rng;
pub mod sampler;
pub mod scalar;

pub use model::{
    Bn2oNetwork, DiseaseVector, ModelError, NetMeta, Obs, ObservationModel, ObservationVector,
};
pub use scalar::Scalar;

pub type Network = Bn2oNetwork<f64>;
pub type Network32 = Bn2oNetwork<f32>;
