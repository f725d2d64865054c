//! Probabilistic teleportation of the two-qubit state `α|00⟩ + β|11⟩` through a
//! W-class channel `a|001⟩ + b|010⟩ + c|100⟩`, simulated on a small dense
//! state-vector engine and verified branch by branch.
//!
//! The crate is organised bottom-up:
//!
//! - [`qsim`]: labeled qubit registers, operators, projective and POVM
//!   measurement, partial trace and fidelity.
//! - [`channel`]: validated channel and input parameters.
//! - [`povm`]: the two unambiguous-discrimination POVM triples.
//! - [`protocol`]: the individual protocol steps and single-path replay.
//! - [`analysis`]: exact outcome-tree enumeration, seeded Monte Carlo and
//!   aggregated reports.
//! - [`cli`]: argument parsing and JSON/CSV/table output.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod povm;
pub mod protocol;
pub mod qsim;

pub use analysis::{enumerate, report, sample, sweep, BranchRow, BranchTable, McStats, ProtocolReport};
pub use channel::{build_channel, build_composite, build_input, ChannelParams, InputState, ParamError};
pub use povm::{DiscriminationParams, PovmSet, PovmValidation, PovmVariant};
pub use protocol::{BellFamily, BellOutcome, Classification, PovmOutcome, Sign, StepOutcomes, TrialResult};
pub use qsim::{DensityMatrix, Operator, QsimError, StateVector};
