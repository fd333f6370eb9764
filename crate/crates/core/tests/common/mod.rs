#![allow(dead_code)]

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vistomo_core::environment::{embed, CoherenceTriple, EnvironmentVectors, DEFAULT_ENV_DIM};
use vistomo_core::fringes::{fit, sweep, PhaseGrid};
use vistomo_core::interferometer::{IdlerPrep, SetupConfig, SignalPrep};
use vistomo_core::{Basis, PolVector, PolarizationState, Visibilities, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_pure<R: Rng>(rng: &mut R) -> PolarizationState {
    PolarizationState::from_alpha(rng.random(), rng.random::<f64>() * TAU).unwrap()
}

pub fn random_env<R: Rng>(rng: &mut R) -> EnvironmentVectors {
    embed(&CoherenceTriple::sample_feasible(rng), DEFAULT_ENV_DIM).unwrap()
}

pub fn random_polvector<R: Rng>(rng: &mut R) -> PolVector {
    let mut c = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    PolVector::normalized(c(), c()).unwrap()
}

pub fn reference(idler: IdlerPrep) -> SetupConfig {
    SetupConfig::reference(idler)
}

/// Fits the fringe of `k` with the signal prepared unbiased to `{k, k⊥}`.
pub fn fitted_visibility(cfg: &SetupConfig, k: &PolVector, grid: &PhaseGrid) -> f64 {
    let cfg = cfg.with_signal(SignalPrep::unbiased_for_vector(k));
    fit(&sweep(&cfg, k, "k", grid, None).unwrap()).unwrap().visibility
}

/// The six visibilities from simulated fringes, one unbiased signal preparation per basis.
pub fn simulated_visibilities(cfg: &SetupConfig, grid: &PhaseGrid) -> Visibilities {
    Visibilities::from_fn(|b: Basis| {
        let cfg = cfg.with_signal(SignalPrep::unbiased_for(b));
        fit(&sweep(&cfg, &b.vector(), b.as_str(), grid, None).unwrap())
            .unwrap()
            .visibility
    })
}

/// `T |⟨ψ_I| (|k*⟩ ⊗ |e_Ψ⟩)|`, evaluated on explicit vectors.
pub fn overlap_visibility(idler: &IdlerPrep, t: f64, k: &PolVector) -> f64 {
    let target = k
        .conj()
        .to_state("idler_pol")
        .tensor(&idler.env.state(vistomo_core::environment::EnvMode::Psi));
    t * idler.joint_state().inner(&target).unwrap().norm()
}
