//! Environment model for the idler photon and the second source.
//!
//! A mixed idler polarization is represented as `α|H⟩|e_H⟩ + β e^{iξ}|V⟩|e_V⟩`
//! and the second source carries a common environment `e_Ψ`. Everything
//! observable depends only on the overlaps
//!
//! * `q = ⟨e_H|e_V⟩` (real, nonnegative by phase convention),
//! * `m_H = |⟨e_H|e_Ψ⟩|`, `m_V = |⟨e_V|e_Ψ⟩|`,
//! * `Δφ = arg⟨e_H|e_Ψ⟩ − arg⟨e_V|e_Ψ⟩`.
//!
//! The three vectors exist iff their Gram matrix is positive semidefinite,
//! which for unit vectors reduces to a single scalar inequality.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{StateVector, C64, ZERO};
use crate::polarization::wrap_phase;

/// Slack below zero still treated as feasible (floating-point noise on the boundary).
pub const FEASIBILITY_TOL: f64 = 1e-12;

pub const DEFAULT_ENV_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTriple {
    pub q: f64,
    pub m_h: f64,
    pub m_v: f64,
    pub delta_phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub slack: f64,
    pub feasible: bool,
}

impl CoherenceTriple {
    /// Fully coherent: `e_H = e_V = e_Ψ`.
    pub const COHERENT: CoherenceTriple = CoherenceTriple {
        q: 1.0,
        m_h: 1.0,
        m_v: 1.0,
        delta_phi: 0.0,
    };

    pub fn new(q: f64, m_h: f64, m_v: f64, delta_phi: f64) -> Result<Self> {
        let t = Self {
            q,
            m_h,
            m_v,
            delta_phi,
        };
        t.validate_ranges()?;
        Ok(Self {
            delta_phi: wrap_phase(delta_phi),
            ..t
        })
    }

    /// Only the V mode couples to the environment: `e_H = e_Ψ`, hence `m_V = q`.
    pub fn h_coherent(q: f64) -> Result<Self> {
        Self::new(q, 1.0, q, 0.0)
    }

    /// Only the H mode couples to the environment: `e_V = e_Ψ`, hence `m_H = q`.
    pub fn v_coherent(q: f64) -> Result<Self> {
        Self::new(q, q, 1.0, 0.0)
    }

    /// `e_Ψ ∝ e_H + e_V`, giving `m_H = m_V = √((1+q)/2)`.
    pub fn symmetric(q: f64) -> Result<Self> {
        let m = ((1.0 + q) / 2.0).sqrt();
        Self::new(q, m, m, 0.0)
    }

    fn validate_ranges(&self) -> Result<()> {
        for (name, value) in [("q", self.q), ("m_H", self.m_h), ("m_V", self.m_v)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfRange { name, value });
            }
        }
        if !self.delta_phi.is_finite() {
            return Err(Error::OutOfRange {
                name: "delta_phi",
                value: self.delta_phi,
            });
        }
        Ok(())
    }

    /// `1 − (q² + m_H² + m_V²) + 2 q m_H m_V cos Δφ`, the determinant of the Gram matrix.
    pub fn slack(&self) -> f64 {
        1.0 - (self.q * self.q + self.m_h * self.m_h + self.m_v * self.m_v)
            + 2.0 * self.q * self.m_h * self.m_v * self.delta_phi.cos()
    }

    /// Uniform sample over the feasible region of `(q, m_H, m_V, Δφ)`.
    pub fn sample_feasible<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let t = Self {
                q: rng.random(),
                m_h: rng.random(),
                m_v: rng.random(),
                delta_phi: rng.random::<f64>() * TAU,
            };
            if t.slack() >= 0.0 {
                return t;
            }
        }
    }
}

pub fn check_feasible(t: &CoherenceTriple) -> Result<Feasibility> {
    t.validate_ranges()?;
    let slack = t.slack();
    Ok(Feasibility {
        slack,
        feasible: slack >= -FEASIBILITY_TOL,
    })
}

/// Explicit environment vectors realizing a coherence triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentVectors {
    e_h: Vec<C64>,
    e_v: Vec<C64>,
    e_psi: Vec<C64>,
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

impl EnvironmentVectors {
    pub const TOL: f64 = 1e-12;

    /// Validates unit norms, equal dimensions and the real nonnegative `⟨e_H|e_V⟩`.
    pub fn from_vectors(e_h: Vec<C64>, e_v: Vec<C64>, e_psi: Vec<C64>) -> Result<Self> {
        let dim = e_h.len();
        if dim < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: dim,
            });
        }
        for v in [&e_v, &e_psi] {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        for (what, v) in [("e_H", &e_h), ("e_V", &e_v), ("e_Psi", &e_psi)] {
            let n = norm_sqr(v);
            if (n - 1.0).abs() > Self::TOL {
                return Err(Error::NotNormalized { what, norm_sqr: n });
            }
        }
        let q = inner(&e_h, &e_v);
        if q.im.abs() > Self::TOL || q.re < -Self::TOL {
            return Err(Error::OutOfRange {
                name: "<e_H|e_V> (must be real and nonnegative)",
                value: q.arg(),
            });
        }
        Ok(Self { e_h, e_v, e_psi })
    }

    /// Random `e_Ψ` for fixed `q = ⟨e_H|e_V⟩`: a Gaussian vector pulled towards
    /// a random real mix of `e_H` and `e_V`, so that nearly coherent
    /// environments are sampled as well as nearly decoupled ones.
    pub fn random_for_q<R: Rng + ?Sized>(q: f64, dim: usize, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange { name: "q", value: q });
        }
        let dim = dim.max(3);
        let mut e_h = vec![ZERO; dim];
        let mut e_v = vec![ZERO; dim];
        e_h[0] = C64::new(1.0, 0.0);
        e_v[0] = C64::new(q, 0.0);
        e_v[1] = C64::new((1.0 - q * q).max(0.0).sqrt(), 0.0);
        let normal = rand_distr::StandardNormal;
        let pull = 4.0 * rng.random::<f64>().powi(2);
        let (wh, wv) = (rng.random::<f64>(), rng.random::<f64>());
        let mut e_psi: Vec<C64> = (0..dim)
            .map(|i| {
                let g = C64::new(rng.sample(normal), rng.sample(normal));
                g + (e_h[i] * wh + e_v[i] * wv) * pull
            })
            .collect();
        let n = norm_sqr(&e_psi).sqrt();
        for x in &mut e_psi {
            *x /= n;
        }
        Self::from_vectors(e_h, e_v, e_psi)
    }

    /// `e_H = e_V = e_Ψ = |0⟩`.
    pub fn coherent(dim: usize) -> Self {
        let mut e = vec![ZERO; dim.max(2)];
        e[0] = C64::new(1.0, 0.0);
        Self {
            e_h: e.clone(),
            e_v: e.clone(),
            e_psi: e,
        }
    }

    /// Direct construction `e_Ψ = (e_H + e_V)/√(2(1+q))`.
    pub fn symmetric(q: f64, dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange { name: "q", value: q });
        }
        let dim = dim.max(2);
        let mut e_h = vec![ZERO; dim];
        let mut e_v = vec![ZERO; dim];
        e_h[0] = C64::new(1.0, 0.0);
        e_v[0] = C64::new(q, 0.0);
        e_v[1] = C64::new((1.0 - q * q).sqrt(), 0.0);
        let scale = 1.0 / (2.0 * (1.0 + q)).sqrt();
        let e_psi = e_h.iter().zip(&e_v).map(|(a, b)| (a + b) * scale).collect();
        Self::from_vectors(e_h, e_v, e_psi)
    }

    pub fn dim(&self) -> usize {
        self.e_h.len()
    }

    pub fn e_h(&self) -> &[C64] {
        &self.e_h
    }

    pub fn e_v(&self) -> &[C64] {
        &self.e_v
    }

    pub fn e_psi(&self) -> &[C64] {
        &self.e_psi
    }

    pub fn state(&self, which: EnvMode) -> StateVector {
        let v = match which {
            EnvMode::H => &self.e_h,
            EnvMode::V => &self.e_v,
            EnvMode::Psi => &self.e_psi,
        };
        StateVector::single("env", v.clone())
    }

    /// `⟨e_H|e_V⟩`.
    pub fn q(&self) -> f64 {
        inner(&self.e_h, &self.e_v).re
    }

    /// `⟨e_H|e_Ψ⟩`.
    pub fn g_h(&self) -> C64 {
        inner(&self.e_h, &self.e_psi)
    }

    /// `⟨e_V|e_Ψ⟩`.
    pub fn g_v(&self) -> C64 {
        inner(&self.e_v, &self.e_psi)
    }

    /// Overlap triple read back from the vectors.
    pub fn triple(&self) -> CoherenceTriple {
        let (g_h, g_v) = (self.g_h(), self.g_v());
        let delta = if g_h.norm() == 0.0 || g_v.norm() == 0.0 {
            0.0
        } else {
            wrap_phase(g_h.arg() - g_v.arg())
        };
        CoherenceTriple {
            q: self.q().clamp(0.0, 1.0),
            m_h: g_h.norm().min(1.0),
            m_v: g_v.norm().min(1.0),
            delta_phi: delta,
        }
    }

    /// True when all three vectors coincide up to tolerance.
    pub fn is_coherent(&self, tol: f64) -> bool {
        (1.0 - self.q()).abs() < tol
            && (1.0 - self.g_h().norm()).abs() < tol
            && (1.0 - self.g_v().norm()).abs() < tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvMode {
    H,
    V,
    Psi,
}

/// Builds `e_H, e_V, e_Ψ` from a lower-triangular factor of their Gram matrix
///
/// ```text
/// ⎡ 1            q            m_H e^{iΔφ} ⎤
/// ⎢ q            1            m_V         ⎥
/// ⎣ m_H e^{-iΔφ} m_V          1           ⎦
/// ```
///
/// with the phase of `⟨e_V|e_Ψ⟩` fixed to zero. Vectors live in the first three
/// coordinates of a `dim`-dimensional space. Fails when the factorization
/// meets a negative pivot, i.e. when the Gram matrix is not PSD.
pub fn embed(t: &CoherenceTriple, dim: usize) -> Result<EnvironmentVectors> {
    t.validate_ranges()?;
    if dim < 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: dim,
        });
    }
    let q = t.q;
    let g_h = C64::from_polar(t.m_h, t.delta_phi);
    let g_v = C64::new(t.m_v, 0.0);

    // column 0: e_H = (1, 0, 0)
    // column 1: e_V = (q, l11, 0) with l11 = √(1 − q²)
    // column 2: e_Ψ = (g_H, b, c)
    let pivot1 = 1.0 - q * q;
    let (l11, b, residual) = if pivot1 > 1e-15 {
        let l11 = pivot1.sqrt();
        (l11, (g_v - g_h * q) / l11, None)
    } else {
        // e_H = e_V: ⟨e_V|e_Ψ⟩ must then equal ⟨e_H|e_Ψ⟩
        (0.0, C64::new(0.0, 0.0), Some((g_v - g_h * q).norm_sqr()))
    };
    let pivot2 = 1.0 - g_h.norm_sqr() - b.norm_sqr();
    // product of pivots is the Gram determinant
    let det = match residual {
        None => pivot1 * pivot2,
        Some(r) => -r,
    };
    if det < -FEASIBILITY_TOL {
        return Err(Error::Infeasible { slack: t.slack() });
    }
    // a pivot at rounding level is a boundary point; its square root would not be
    let c = if pivot2 < 1e-13 { 0.0 } else { pivot2.sqrt() };

    let mut e_h = vec![ZERO; dim];
    let mut e_v = vec![ZERO; dim];
    let mut e_psi = vec![ZERO; dim];
    e_h[0] = C64::new(1.0, 0.0);
    e_v[0] = C64::new(q, 0.0);
    e_v[1] = C64::new(l11, 0.0);
    e_psi[0] = g_h;
    e_psi[1] = b;
    e_psi[2] = C64::new(c, 0.0);
    // boundary clamping can leave e_Ψ a hair off unit norm
    let n = norm_sqr(&e_psi).sqrt();
    for x in &mut e_psi {
        *x /= n;
    }
    EnvironmentVectors::from_vectors(e_h, e_v, e_psi)
}

/// Solutions for `q` of the boundary equation with `Δφ = 0`, the case of a
/// two-dimensional environment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QRoots {
    pub plus: Option<f64>,
    pub minus: Option<f64>,
    /// Roots that fell outside `[0, 1]`.
    pub rejected: Vec<f64>,
}

impl QRoots {
    /// The single admissible root, when the two coincide or one was rejected.
    pub fn unique(&self) -> Option<f64> {
        match (self.plus, self.minus) {
            (Some(p), Some(m)) if (p - m).abs() < 1e-12 => Some(p),
            (Some(p), None) => Some(p),
            (None, Some(m)) => Some(m),
            _ => None,
        }
    }
}

/// `q± = m_H m_V ± √(1 + m_H² m_V² − m_H² − m_V²)`.
pub fn solve_q_2d(m_h: f64, m_v: f64) -> Result<QRoots> {
    for (name, value) in [("m_H", m_h), ("m_V", m_v)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { name, value });
        }
    }
    let disc = 1.0 + m_h * m_h * m_v * m_v - m_h * m_h - m_v * m_v;
    if disc < -FEASIBILITY_TOL {
        return Err(Error::NegativeDiscriminant(disc));
    }
    // rounding-level discriminants mean a double root
    let root = if disc < 1e-13 { 0.0 } else { disc.sqrt() };
    let centre = m_h * m_v;
    let mut rejected = Vec::new();
    let mut admit = |q: f64| {
        if (-1e-12..=1.0 + 1e-12).contains(&q) {
            Some(q.clamp(0.0, 1.0))
        } else {
            rejected.push(q);
            None
        }
    };
    let plus = admit(centre + root);
    let minus = admit(centre - root);
    Ok(QRoots {
        plus,
        minus,
        rejected,
    })
}
