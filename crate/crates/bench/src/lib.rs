//! Shared fixtures for the benchmarks.

use vistomo_core::environment::DEFAULT_ENV_DIM;
use vistomo_core::{embed, CoherenceTriple, IdlerPrep, PolarizationState, SetupConfig};

/// Lossy setup with a partially coherent environment.
pub fn mixed_setup() -> SetupConfig {
    let triple = CoherenceTriple::new(0.4, 0.7, 0.6, 0.5).expect("valid triple");
    let env = embed(&triple, DEFAULT_ENV_DIM).expect("feasible triple");
    let state = PolarizationState::from_alpha(0.6, 0.9).expect("valid state");
    let mut cfg = SetupConfig::reference(IdlerPrep::new(state, env));
    cfg.transmission = 0.8;
    cfg
}
