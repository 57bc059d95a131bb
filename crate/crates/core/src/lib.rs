//! Desk-scale simulator for a quantum-assisted deep clustering stack.
//!
//! The crate simulates each quantum subroutine with dense linear algebra and
//! keeps a classical oracle beside it:
//!
//! * [`statevector`]: normalized states, swap tests, measurement sampling,
//!   Hamiltonian evolution and eigenvalue-filtered inversion.
//! * [`lssvm`]: the classical least-squares SVM (kernels, bordered system,
//!   direct solve); the oracle for every quantum-SVM test.
//! * [`qsvm`]: quantum LS-SVM training by spectral inversion of the
//!   trace-normalized system, training-data oracle and query states, and
//!   swap-test classification.
//! * [`allpair`]: one-vs-one multiclass voting with an iterated
//!   frequency-search resolution.
//! * [`deep_svm`]: greedily trained layered multiclass SVMs.
//! * [`qkmeans`]: swap-test distances, adiabatic reassignment, and the
//!   superposed cluster-label state, with Lloyd's algorithm as oracle.
//! * [`feature_extractor`]: a small reference network with squared-hinge
//!   loss and exact backpropagation.
//! * [`pipeline`]: the epoch loop gluing the stages together.
//! * [`cost_model`]: the runtime cost formulas of every stage.

pub mod allpair;
pub mod cost_model;
pub mod dataset;
pub mod deep_svm;
pub mod error;
pub mod feature_extractor;
pub mod lssvm;
pub mod metrics;
pub mod pipeline;
pub mod qkmeans;
pub mod qsvm;
pub mod statevector;

pub use allpair::{MulticlassSVMModel, VoteRecord, VoteResolution};
pub use deep_svm::{DeepSVMConfig, DeepSVMStack};
pub use error::{Error, Result};
pub use lssvm::{BinarySVMModel, KernelSpec, LSSVMSystem};
pub use pipeline::{EpochReport, PipelineConfig, PipelineOutcome};
pub use qkmeans::{ClusterResult, ClusterState, QKMeansParams};
pub use qsvm::QuantumSVMModel;
pub use statevector::{ExecMode, InversionMode, ShotPlan, StateVec};
