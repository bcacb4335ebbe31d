//! Particle entanglement of bosonic states on a few modes.
//!
//! States are number-diagonal ([`fock_core::BlockDiagonalState`]). Free states are
//! mixtures of coherent spin states; free operations are generated by passive linear
//! optics, vacuum appending and number-respecting measurements. The crate computes
//! the Fisher-information monotone, activates particle entanglement into mode
//! entanglement across a bipartition, and turns collective-spin data into lower
//! bounds on the trace-distance measure.

pub mod activation;
pub mod error;
pub mod fock_core;
pub mod linalg;
pub mod linear_optics;
pub mod measures;
pub mod nonclassicality;
pub mod optim;
pub mod resource_states;
pub mod witness_pipeline;

pub use error::{Error, Result};
pub use fock_core::{BlockDiagonalState, FockBasis, Limits, ModePartition, PureSectorState};
