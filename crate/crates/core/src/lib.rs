//! Polarization tomography of an idler photon from induced-coherence
//! interference visibilities.

pub mod environment;
pub mod error;
pub mod fringes;
pub mod interferometer;
pub mod linalg;
pub mod operators;
pub mod polarization;
pub mod reconstruct;
pub mod stokes;

pub use environment::{check_feasible, embed, CoherenceTriple, EnvironmentVectors, Feasibility};
pub use error::{Error, Result};
pub use interferometer::{
    build_state, coefficients, detection_probability, IdlerPrep, Interferometer, Port, SetupConfig,
    SignalPrep,
};
pub use linalg::{fidelity, DensityMatrix2, OperatorMatrix, StateVector, Subsystem, C64};
pub use polarization::{Basis, PolVector, PolarizationState, Visibilities};
