//! Compiler and simulator for Gaussian bosonic (GB) circuits on `M = 2^n`
//! modes, mapped to real-amplitude qubit circuits on `n + 1` qubits.
//!
//! A GB circuit evolves the first and second moments of the quadrature
//! operators through symplectic propagators `e^{tΩK}`. This crate encodes
//! the moment vector as a real statevector on a symplectic qubit plus an
//! `n`-qubit mode register, translates each GB gate into multi-controlled
//! real qubit gates (heralded LCU blocks for squeezing), and evolves states
//! with bit-stride kernels — all cross-checked against a dense phase-space
//! oracle.
//!
//! Module map:
//! - [`symplectic`]: the dense oracle (generators, propagators, moment and
//!   covariance evolution).
//! - [`pauli`]: sparse Pauli-string algebra and the `sp(M, R)` basis used
//!   for symbolic classification.
//! - [`ir`]: the GB gate IR and its line-oriented text format.
//! - [`compile`]: the gate dictionary, LCU lowering, multi-control
//!   decomposition, and the compiled-circuit text format.
//! - [`sim`]: the real-amplitude statevector backend with heralding and
//!   covariance evolution.
//! - [`bqp`]: bit-structured interferometers, the threshold decision
//!   problem, and the reverse compiler from `{Rz, Ry, CRy}` circuits.
//! - [`measure`]: photon-count and homodyne sampling, fraction estimators.

pub mod bqp;
pub mod compile;
pub mod ir;
pub mod measure;
pub mod pauli;
pub mod sim;
pub mod symplectic;

pub use bqp::{BitStructuredLayer, Bqp1Instance, Decision};
pub use compile::{CompileOptions, LcuBlock, QubitCircuit, QubitGate, SqueezeMode};
pub use ir::{BitCondition, GbCircuit, GbGate, Sign};
pub use sim::{RunOptions, ScaledState, SigmaState, TrajectoryPoint};
pub use symplectic::{
    CovarianceMatrix, GeneratorKind, GeneratorMatrix, MomentVector, SymplecticMatrix,
};
