//! Visibility measurement operators on idler polarization ⊗ environment.

use crate::environment::{EnvMode, EnvironmentVectors};
use crate::linalg::{pauli, OperatorMatrix, Subsystem, C64};
use crate::polarization::PolVector;

/// `|k*⟩`: if `k = U|H⟩` this is `U*|H⟩`.
pub fn conjugate_basis_state(k: &PolVector) -> PolVector {
    k.conj()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityOperator {
    pub matrix: OperatorMatrix,
    pub label: String,
    pub transmission: f64,
}

fn env_projector(env: &EnvironmentVectors) -> OperatorMatrix {
    env.state(EnvMode::Psi).projector()
}

fn weighted(pol: &OperatorMatrix, env: &EnvironmentVectors, t: f64) -> OperatorMatrix {
    pol.tensor(&env_projector(env)).scale(C64::new(t * t, 0.0))
}

/// `T² |k*⟩⟨k*| ⊗ |e_Ψ⟩⟨e_Ψ|`; its expectation in the idler state is `V_k²`.
pub fn visibility_operator(
    k: &PolVector,
    env: &EnvironmentVectors,
    t: f64,
    label: &str,
) -> VisibilityOperator {
    let ks = conjugate_basis_state(k).to_state("idler_pol");
    VisibilityOperator {
        matrix: weighted(&ks.projector(), env, t),
        label: label.to_owned(),
        transmission: t,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesOperators {
    pub s0: OperatorMatrix,
    pub sx: OperatorMatrix,
    pub sy: OperatorMatrix,
    pub sz: OperatorMatrix,
}

impl StokesOperators {
    pub fn all(&self) -> [&OperatorMatrix; 4] {
        [&self.s0, &self.sx, &self.sy, &self.sz]
    }
}

/// `Ŝ_a = T² σ_a ⊗ |e_Ψ⟩⟨e_Ψ|` and `Ŝ₀ = T² 1 ⊗ |e_Ψ⟩⟨e_Ψ|`.
pub fn stokes_operators(env: &EnvironmentVectors, t: f64) -> StokesOperators {
    StokesOperators {
        s0: weighted(&pauli::identity(), env, t),
        sx: weighted(&pauli::sigma_x(), env, t),
        sy: weighted(&pauli::sigma_y(), env, t),
        sz: weighted(&pauli::sigma_z(), env, t),
    }
}

/// `V̂_incoh = 1 − Ŝ₀`, the part of the idler space that never interferes.
pub fn incoherence_operator(env: &EnvironmentVectors, t: f64) -> OperatorMatrix {
    let id = OperatorMatrix::identity(vec![
        Subsystem::new("idler_pol", 2),
        Subsystem::new("env", env.dim()),
    ]);
    id.sub(&stokes_operators(env, t).s0)
        .expect("matching dimensions")
}
