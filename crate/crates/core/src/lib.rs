//! Pauli-Lindblad noise models for quantum gates from Lindbladian dynamics.
//!
//! The pipeline starts from a gate Hamiltonian plus noise terms, moves to the
//! interaction frame of the ideal gate, expands the noise channel with Magnus
//! or Dyson series (or computes it exactly), twirls it, and fits a sparse
//! Pauli-Lindblad model. Closed-form models for common gate and noise
//! combinations are provided for comparison.

pub mod analytic;
pub mod error;
pub mod frame;
pub mod limits;
pub mod magnus;
pub mod model;
pub mod pauli;
pub mod scenarios;
pub mod superop;
pub mod twirl;

pub use error::{ForgeError, Result};
pub use model::{DissipatorMatrix, GateElement, GateKind, GatePreset, LindbladModel};
pub use pauli::{Pauli, PauliIndexSet, PauliString};
pub use superop::{Ptm, SuperOperator};
pub use twirl::{PLModel, PauliFidelities};
