//! Distributed experts with `ℓ_p`-aggregated losses under a coordinator
//! communication model.

pub mod estimator;
pub mod gamma;
pub mod harness;
pub mod loss;
pub mod mwu;
pub mod netsim;
pub mod protocol;
pub mod rng;
pub mod trace;
