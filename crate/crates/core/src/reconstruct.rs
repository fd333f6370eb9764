//! Idler state reconstruction from visibility Stokes parameters under an
//! explicitly chosen coherence scenario.
//!
//! The data cannot tell the scenarios apart, so the caller always names one.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{embed, CoherenceTriple, DEFAULT_ENV_DIM};
use crate::error::{Error, Result};
use crate::interferometer::{analytic_visibilities_mixed, IdlerPrep, SetupConfig};
use crate::linalg::DensityMatrix2;
use crate::polarization::{wrap_phase, PolarizationState};
use crate::stokes::{normalized_stokes, visibility_stokes, BlochVector, VisibilityStokes};

pub const DEFAULT_SCENARIO_TOL: f64 = 1e-6;
/// Allowed excess of a reconstructed Bloch vector over unit length.
pub const BALL_TOL: f64 = 1e-9;

/// Which side of the idler stays fully coherent with the second source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoherentSide {
    /// `m_H = 1`; only V couples to the environment.
    H,
    /// `m_V = 1`; only H couples to the environment.
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Scenario {
    PureCoherent,
    HvAsymmetric(CoherentSide),
    Symmetric,
    Unknown,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::PureCoherent => "pure",
            Scenario::HvAsymmetric(CoherentSide::H) => "h-coherent",
            Scenario::HvAsymmetric(CoherentSide::V) => "v-coherent",
            Scenario::Symmetric => "symmetric",
            Scenario::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pure" | "pure-coherent" | "coherent" => Ok(Scenario::PureCoherent),
            "h-coherent" | "mh1" => Ok(Scenario::HvAsymmetric(CoherentSide::H)),
            "v-coherent" | "mv1" => Ok(Scenario::HvAsymmetric(CoherentSide::V)),
            "symmetric" => Ok(Scenario::Symmetric),
            "unknown" => Ok(Scenario::Unknown),
            other => Err(Error::ScenarioMismatch(format!("unknown scenario `{other}`"))),
        }
    }
}

impl From<Scenario> for String {
    fn from(s: Scenario) -> String {
        s.as_str().to_owned()
    }
}

impl TryFrom<String> for Scenario {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Recovered environment coherence `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "kebab-case")]
pub enum QEstimate {
    NotApplicable,
    Value(f64),
    /// The data carry no information on `q` (e.g. `β = 0` when `m_H = 1`).
    Indeterminate,
}

impl QEstimate {
    pub fn value(&self) -> Option<f64> {
        match self {
            QEstimate::Value(q) => Some(*q),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconstruction {
    pub scenario: Scenario,
    #[serde(serialize_with = "serialize_rho")]
    pub rho: DensityMatrix2,
    pub bloch: BlochVector,
    pub q: QEstimate,
    /// Named diagnostics; zero means the data fit the scenario exactly.
    pub residuals: Vec<(String, f64)>,
}

fn serialize_rho<S: serde::Serializer>(
    rho: &DensityMatrix2,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    rho.to_reals().serialize(s)
}

impl Reconstruction {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

fn bloch_in_ball(x: f64, y: f64, z: f64) -> Result<BlochVector> {
    let norm = (x * x + y * y + z * z).sqrt();
    if norm > 1.0 + BALL_TOL {
        return Err(Error::InfeasibleData(format!(
            "reconstructed Bloch vector has length {norm}"
        )));
    }
    // pull rounding-level excess back onto the sphere
    let s = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    BlochVector::new(x * s, y * s, z * s)
}

/// Coherent environment: `(S_x, S_y, S_z)` is the Bloch vector itself.
pub fn reconstruct_pure(vs: &VisibilityStokes, tol: f64) -> Result<Reconstruction> {
    if (vs.s0 - 1.0).abs() > tol {
        return Err(Error::ScenarioMismatch(format!(
            "pure scenario needs S0 = 1, got {}",
            vs.s0
        )));
    }
    let norm = vs.vector_norm();
    if norm > 1.0 + tol.max(BALL_TOL) {
        return Err(Error::InfeasibleData(format!(
            "visibility Stokes vector has length {norm}"
        )));
    }
    if norm == 0.0 {
        return Err(Error::InfeasibleData("zero Stokes vector with S0 = 1".into()));
    }
    let [x, y, z] = vs.vector().map(|c| c / norm);
    let bloch = BlochVector::new(x, y, z)?;
    Ok(Reconstruction {
        scenario: Scenario::PureCoherent,
        rho: bloch.to_density()?,
        bloch,
        q: QEstimate::Value(1.0),
        residuals: vec![
            ("s0_minus_one".into(), vs.s0 - 1.0),
            ("norm_defect".into(), vs.norm_defect()),
        ],
    })
}

/// One polarization fully coherent with the second source; the other
/// decoheres with overlap `q`.
pub fn reconstruct_hv_asymmetric(
    vs: &VisibilityStokes,
    side: CoherentSide,
    tol: f64,
) -> Result<Reconstruction> {
    let z = match side {
        CoherentSide::H => vs.sz + vs.s0 - 1.0,
        CoherentSide::V => vs.sz - vs.s0 + 1.0,
    };
    let bloch = bloch_in_ball(vs.sx, vs.sy, z)?;
    let alpha2 = ((1.0 + bloch.z) / 2.0).clamp(0.0, 1.0);
    let beta2 = 1.0 - alpha2;
    // amplitude that carries q, and the weight of the coherent one
    let (coupled2, coherent2) = match side {
        CoherentSide::H => (beta2, alpha2),
        CoherentSide::V => (alpha2, beta2),
    };
    let excess = vs.s0 - coherent2;
    if excess < -tol {
        return Err(Error::InfeasibleData(format!(
            "S0 = {} is below the coherent weight {coherent2}",
            vs.s0
        )));
    }
    let q = if coupled2 < 1e-12 {
        QEstimate::Indeterminate
    } else {
        let q = (excess.max(0.0) / coupled2).sqrt();
        if q > 1.0 + tol {
            return Err(Error::InfeasibleData(format!("recovered q = {q} exceeds 1")));
        }
        QEstimate::Value(q.min(1.0))
    };
    let transverse = bloch.x.hypot(bloch.y);
    let model = match q {
        QEstimate::Value(q) => 2.0 * (alpha2 * beta2).sqrt() * q,
        _ => 0.0,
    };
    Ok(Reconstruction {
        scenario: Scenario::HvAsymmetric(side),
        rho: bloch.to_density()?,
        bloch,
        q,
        residuals: vec![
            ("transverse_model".into(), transverse - model),
            ("norm_defect".into(), vs.norm_defect()),
        ],
    })
}

/// Both polarizations deviate symmetrically from `e_Ψ`, so `S₀ = (1+q)/2`.
///
/// Returns the Bloch vector `(q S_x/S₀, q S_y/S₀, S_z/S₀)`. The residual
/// `rescaled_z` records how far the uniformly rescaled `q S_z/S₀` is from it.
pub fn reconstruct_symmetric(vs: &VisibilityStokes, tol: f64) -> Result<Reconstruction> {
    if vs.s0 < 0.5 - tol {
        return Err(Error::ScenarioMismatch(format!(
            "symmetric scenario needs S0 >= 1/2, got {}",
            vs.s0
        )));
    }
    if vs.s0 > 1.0 + tol {
        return Err(Error::InfeasibleData(format!("S0 = {} exceeds 1", vs.s0)));
    }
    let q = (2.0 * vs.s0 - 1.0).clamp(0.0, 1.0);
    let s0 = vs.s0.max(0.5);
    let bloch = bloch_in_ball(q * vs.sx / s0, q * vs.sy / s0, vs.sz / s0)?;
    let rescaled_z = q * vs.sz / s0;
    Ok(Reconstruction {
        scenario: Scenario::Symmetric,
        rho: bloch.to_density()?,
        bloch,
        q: QEstimate::Value(q),
        residuals: vec![
            ("rescaled_z".into(), rescaled_z - bloch.z),
            ("norm_defect".into(), vs.norm_defect()),
        ],
    })
}

/// Dispatches on `scenario`; `Unknown` has no unique answer and is rejected.
pub fn reconstruct(vs: &VisibilityStokes, scenario: Scenario, tol: f64) -> Result<Reconstruction> {
    match scenario {
        Scenario::PureCoherent => reconstruct_pure(vs, tol),
        Scenario::HvAsymmetric(side) => reconstruct_hv_asymmetric(vs, side, tol),
        Scenario::Symmetric => reconstruct_symmetric(vs, tol),
        Scenario::Unknown => Err(Error::ScenarioMismatch(
            "unknown environment admits many states; use enumerate_consistent_states".into(),
        )),
    }
}

/// A state and environment that reproduce the given data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistentState {
    #[serde(serialize_with = "serialize_rho")]
    pub rho: DensityMatrix2,
    pub state: PolarizationState,
    pub triple: CoherenceTriple,
    /// Max deviation of the forward-simulated Stokes parameters.
    pub mismatch: f64,
}

impl ConsistentState {
    pub fn bloch(&self) -> BlochVector {
        BlochVector::from_array(self.rho.bloch()).expect("valid density matrix")
    }
}

/// Forward tolerance for accepting a sampled state.
pub const ENUMERATION_TOL: f64 = 1e-9;

/// Monte-Carlo sample of idler states and feasible environments whose
/// simulated visibility Stokes parameters equal `vs`.
pub fn enumerate_consistent_states(
    vs: &VisibilityStokes,
    samples: usize,
    seed: u64,
) -> Result<Vec<ConsistentState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    let max_attempts = samples.saturating_mul(50).max(100);
    let mut attempts = 0;
    while out.len() < samples && attempts < max_attempts {
        attempts += 1;
        let (state, triple) = propose(vs, &mut rng)?;
        let env = match embed(&triple, DEFAULT_ENV_DIM) {
            Ok(env) => env,
            Err(Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        let cfg = SetupConfig::reference(IdlerPrep::new(state, env.clone()));
        let forward = visibility_stokes(&analytic_visibilities_mixed(&cfg)?)?;
        let mismatch = forward.max_abs_diff(vs);
        if mismatch <= ENUMERATION_TOL {
            out.push(ConsistentState {
                rho: DensityMatrix2::mixed(state.alpha, state.beta, env.q(), state.xi)?,
                state,
                triple: env.triple(),
                mismatch,
            });
        }
    }
    Ok(out)
}

fn propose<R: Rng + ?Sized>(
    vs: &VisibilityStokes,
    rng: &mut R,
) -> Result<(PolarizationState, CoherenceTriple)> {
    if vs.s0 <= 1e-12 {
        // no coherence with the second source: anything goes
        let state = PolarizationState::from_alpha(rng.random::<f64>(), rng.random::<f64>() * TAU)?;
        let triple = CoherenceTriple::new(rng.random::<f64>(), 0.0, 0.0, 0.0)?;
        return Ok((state, triple));
    }
    let target = normalized_stokes(vs)?;
    let s0 = vs.s0.min(1.0);
    let (a_lo, a_hi) = (
        target.alpha * s0.sqrt(),
        (1.0 - target.beta * target.beta * s0).max(0.0).sqrt(),
    );
    let alpha = (a_lo + (a_hi - a_lo).max(0.0) * rng.random::<f64>()).clamp(0.0, 1.0);
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    let ratio = |num: f64, den: f64, rng: &mut R| {
        if den > 1e-15 {
            (num / den).clamp(0.0, 1.0)
        } else {
            rng.random::<f64>()
        }
    };
    let m_h = ratio(target.alpha * s0.sqrt(), alpha, rng);
    let m_v = ratio(target.beta * s0.sqrt(), beta, rng);

    // Δφ range for which the feasible q interval is non-empty
    let need = (m_h * m_h + m_v * m_v - 1.0) / (m_h * m_h * m_v * m_v).max(1e-300);
    let delta_phi = if need <= 0.0 {
        rng.random::<f64>() * TAU
    } else {
        let half = need.sqrt().min(1.0).acos();
        (2.0 * rng.random::<f64>() - 1.0) * half
    };
    let c = m_h * m_v * delta_phi.cos();
    let disc = (c * c + 1.0 - m_h * m_h - m_v * m_v).max(0.0).sqrt();
    let (q_lo, q_hi) = ((c - disc).max(0.0), (c + disc).min(1.0));
    let q = (q_lo + (q_hi - q_lo).max(0.0) * rng.random::<f64>()).clamp(0.0, 1.0);

    let state = PolarizationState::new(alpha, beta, wrap_phase(target.xi - delta_phi))?;
    Ok((state, CoherenceTriple::new(q, m_h, m_v, delta_phi)?))
}
