//! Polarization qubits: basis states, pure-state parametrization and the
//! six-visibility record shared by the fringe, Stokes and CLI layers.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{StateVector, C64, ONE, ZERO};

/// A normalized polarization vector `a|H⟩ + b|V⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolVector([C64; 2]);

impl PolVector {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(h: C64, v: C64) -> Result<Self> {
        let norm_sqr = h.norm_sqr() + v.norm_sqr();
        if (norm_sqr - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::NotNormalized {
                what: "polarization vector",
                norm_sqr,
            });
        }
        Ok(Self([h, v]))
    }

    /// Normalizes `(h, v)`; fails only for the zero vector.
    pub fn normalized(h: C64, v: C64) -> Result<Self> {
        let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if norm == 0.0 {
            return Err(Error::NotNormalized {
                what: "polarization vector",
                norm_sqr: 0.0,
            });
        }
        Ok(Self([h / norm, v / norm]))
    }

    pub fn h(&self) -> C64 {
        self.0[0]
    }

    pub fn v(&self) -> C64 {
        self.0[1]
    }

    pub fn components(&self) -> [C64; 2] {
        self.0
    }

    /// Complex conjugate of the H/V components: if `k = U|H⟩` this is `U*|H⟩`.
    pub fn conj(&self) -> Self {
        Self([self.0[0].conj(), self.0[1].conj()])
    }

    /// The orthogonal partner `k⊥ = (−b*, a*)`.
    pub fn orthogonal(&self) -> Self {
        Self([-self.0[1].conj(), self.0[0].conj()])
    }

    pub fn inner(&self, other: &PolVector) -> C64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }

    /// Multiplies the V component by `e^{iθ}`.
    pub fn with_v_phase(&self, theta: f64) -> Self {
        Self([self.0[0], self.0[1] * C64::from_polar(1.0, theta)])
    }

    pub fn to_state(&self, label: &str) -> StateVector {
        StateVector::single(label, self.0.to_vec())
    }
}

/// The six eigenstates of the Pauli operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    H,
    V,
    D,
    A,
    L,
    R,
}

impl Basis {
    pub const ALL: [Basis; 6] = [Basis::H, Basis::V, Basis::D, Basis::A, Basis::L, Basis::R];

    pub fn vector(self) -> PolVector {
        let s = FRAC_1_SQRT_2;
        let (h, v) = match self {
            Basis::H => (ONE, ZERO),
            Basis::V => (ZERO, ONE),
            Basis::D => (C64::new(s, 0.0), C64::new(s, 0.0)),
            Basis::A => (C64::new(s, 0.0), C64::new(-s, 0.0)),
            Basis::L => (C64::new(s, 0.0), C64::new(0.0, -s)),
            Basis::R => (C64::new(s, 0.0), C64::new(0.0, s)),
        };
        PolVector([h, v])
    }

    pub fn partner(self) -> Basis {
        match self {
            Basis::H => Basis::V,
            Basis::V => Basis::H,
            Basis::D => Basis::A,
            Basis::A => Basis::D,
            Basis::L => Basis::R,
            Basis::R => Basis::L,
        }
    }

    /// Relative phase ζ of a signal state `(|H⟩ + e^{iζ}|V⟩)/√2` that is
    /// unbiased with respect to this basis pair.
    pub fn unbiased_signal_phase(self) -> f64 {
        match self {
            Basis::H | Basis::V => 0.0,
            Basis::D | Basis::A => std::f64::consts::FRAC_PI_2,
            Basis::L | Basis::R => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Basis::H => "H",
            Basis::V => "V",
            Basis::D => "D",
            Basis::A => "A",
            Basis::L => "L",
            Basis::R => "R",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(Basis::H),
            "V" | "v" => Ok(Basis::V),
            "D" | "d" => Ok(Basis::D),
            "A" | "a" => Ok(Basis::A),
            "L" | "l" => Ok(Basis::L),
            "R" | "r" => Ok(Basis::R),
            other => Err(Error::Record(format!("unknown basis label `{other}`"))),
        }
    }
}

/// Pure qubit `α|H⟩ + β e^{iξ}|V⟩` with `α, β ≥ 0`, `α² + β² = 1`, `ξ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationState {
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
}

impl PolarizationState {
    pub fn new(alpha: f64, beta: f64, xi: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: alpha,
            });
        }
        if !(beta >= 0.0) {
            return Err(Error::OutOfRange {
                name: "beta",
                value: beta,
            });
        }
        let norm_sqr = alpha * alpha + beta * beta;
        if (norm_sqr - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized {
                what: "idler amplitudes",
                norm_sqr,
            });
        }
        if !xi.is_finite() {
            return Err(Error::OutOfRange {
                name: "xi",
                value: xi,
            });
        }
        Ok(Self {
            alpha,
            beta,
            xi: wrap_phase(xi),
        })
    }

    /// `β` is derived from `α`.
    pub fn from_alpha(alpha: f64, xi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: alpha,
            });
        }
        Self::new(alpha, (1.0 - alpha * alpha).max(0.0).sqrt(), xi)
    }

    pub fn vector(&self) -> PolVector {
        PolVector([
            C64::new(self.alpha, 0.0),
            C64::from_polar(self.beta, self.xi),
        ])
    }
}

/// Maps any finite angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Fringe visibilities in the three Pauli bases.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Visibilities {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl Visibilities {
    pub fn get(&self, basis: Basis) -> f64 {
        match basis {
            Basis::H => self.h,
            Basis::V => self.v,
            Basis::D => self.d,
            Basis::A => self.a,
            Basis::L => self.l,
            Basis::R => self.r,
        }
    }

    pub fn set(&mut self, basis: Basis, value: f64) {
        match basis {
            Basis::H => self.h = value,
            Basis::V => self.v = value,
            Basis::D => self.d = value,
            Basis::A => self.a = value,
            Basis::L => self.l = value,
            Basis::R => self.r = value,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Basis) -> f64) -> Self {
        let mut out = Self::default();
        for b in Basis::ALL {
            out.set(b, f(b));
        }
        out
    }

    pub fn try_from_fn(mut f: impl FnMut(Basis) -> Result<f64>) -> Result<Self> {
        let mut out = Self::default();
        for b in Basis::ALL {
            out.set(b, f(b)?);
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Visibilities) -> f64 {
        Basis::ALL
            .iter()
            .map(|&b| (self.get(b) - other.get(b)).abs())
            .fold(0.0, f64::max)
    }
}
