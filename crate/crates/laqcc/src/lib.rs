//! Simulator and analysis toolkit for local alternating quantum-classical
//! computations (LAQCC): constant-depth quantum layers interleaved with
//! measurements and bounded classical processing whose results steer later
//! gates.

pub mod acceptance;
pub mod circuit;
pub mod error;
pub mod fourier;
pub mod hadamard;
pub mod noise;
pub mod numbersys;
pub mod primitives;
pub mod rng;
pub mod sim;
pub mod stateprep;
pub mod transform;

pub use error::{Error, Result};
pub use rng::RandomSource;
pub use sim::{GateKind, GateOp, QuantumState, QubitId};
