//! Dense complex linear algebra for the small Hilbert spaces used by the
//! simulator: state vectors, operators, Kronecker products and partial traces.
//!
//! Composite spaces are ordered row-major over their subsystems, first
//! subsystem slowest. The interferometer uses
//! `signal path ⊗ signal polarization ⊗ idler path ⊗ idler polarization ⊗ environment`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used when verifying Hermiticity, unitarity and projector flags.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// One tensor factor of a composite space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

impl Subsystem {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Self {
            label: label.into(),
            dim,
        }
    }
}

fn total_dim(subsystems: &[Subsystem]) -> usize {
    subsystems.iter().map(|s| s.dim).product()
}

/// Labels of the basis vector at `index`, one `label=i` per subsystem.
pub fn basis_label(subsystems: &[Subsystem], mut index: usize) -> Vec<String> {
    let mut digits = vec![0; subsystems.len()];
    for (slot, sub) in digits.iter_mut().zip(subsystems).rev() {
        *slot = index % sub.dim;
        index /= sub.dim;
    }
    subsystems
        .iter()
        .zip(digits)
        .map(|(s, d)| format!("{}={}", s.label, d))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    subsystems: Vec<Subsystem>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>, subsystems: Vec<Subsystem>) -> Result<Self> {
        let dim = total_dim(&subsystems);
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            subsystems,
        })
    }

    /// A single-subsystem vector.
    pub fn single(label: &str, amplitudes: Vec<C64>) -> Self {
        let dim = amplitudes.len();
        Self {
            amplitudes,
            subsystems: vec![Subsystem::new(label, dim)],
        }
    }

    pub fn zeros(subsystems: Vec<Subsystem>) -> Self {
        let dim = total_dim(&subsystems);
        Self {
            amplitudes: vec![ZERO; dim],
            subsystems,
        }
    }

    /// Computational basis vector `|index⟩` of a single subsystem.
    pub fn basis(label: &str, dim: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self::single(label, amps)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            subsystems: self.subsystems.clone(),
        }
    }

    /// Sum of two vectors on the same space. Labels are taken from `self`.
    pub fn add(&self, other: &StateVector) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
            subsystems: self.subsystems.clone(),
        })
    }

    pub fn tensor(&self, other: &StateVector) -> Self {
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        let mut subsystems = self.subsystems.clone();
        subsystems.extend(other.subsystems.iter().cloned());
        Self {
            amplitudes,
            subsystems,
        }
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> OperatorMatrix {
        OperatorMatrix::outer(self, self)
    }
}

/// Dense square matrix over a composite space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    entries: Vec<C64>,
    subsystems: Vec<Subsystem>,
}

impl OperatorMatrix {
    pub fn new(entries: Vec<C64>, subsystems: Vec<Subsystem>) -> Result<Self> {
        let dim = total_dim(&subsystems);
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self {
            dim,
            entries,
            subsystems,
        })
    }

    pub fn from_rows(label: &str, rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::NotSquare);
            }
            entries.extend_from_slice(row);
        }
        Self::new(entries, vec![Subsystem::new(label, dim)])
    }

    pub fn zeros(subsystems: Vec<Subsystem>) -> Self {
        let dim = total_dim(&subsystems);
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
            subsystems,
        }
    }

    pub fn identity(subsystems: Vec<Subsystem>) -> Self {
        let mut m = Self::zeros(subsystems);
        for i in 0..m.dim {
            m.entries[i * m.dim + i] = ONE;
        }
        m
    }

    /// `|ket⟩⟨bra|` on the space of `ket`.
    pub fn outer(ket: &StateVector, bra: &StateVector) -> Self {
        let dim = ket.dim();
        debug_assert_eq!(dim, bra.dim());
        let mut entries = Vec::with_capacity(dim * dim);
        for k in ket.amplitudes() {
            for b in bra.amplitudes() {
                entries.push(k * b.conj());
            }
        }
        Self {
            dim,
            entries,
            subsystems: ket.subsystems.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.entries[c * self.dim + r] = self.get(r, c).conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * factor).collect(),
            subsystems: self.subsystems.clone(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| f(*a, *b))
                .collect(),
            subsystems: self.subsystems.clone(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let n = self.dim;
        let mut entries = vec![ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    entries[r * n + c] += a * other.get(k, c);
                }
            }
        }
        Ok(Self {
            dim: n,
            entries,
            subsystems: self.subsystems.clone(),
        })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: psi.dim(),
            });
        }
        let amps = (0..self.dim)
            .map(|r| {
                psi.amplitudes
                    .iter()
                    .enumerate()
                    .map(|(c, a)| self.get(r, c) * a)
                    .sum()
            })
            .collect();
        Ok(StateVector {
            amplitudes: amps,
            subsystems: psi.subsystems.clone(),
        })
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let n = self.dim * other.dim;
        let mut entries = vec![ZERO; n * n];
        for r1 in 0..self.dim {
            for c1 in 0..self.dim {
                let a = self.get(r1, c1);
                if a == ZERO {
                    continue;
                }
                for r2 in 0..other.dim {
                    for c2 in 0..other.dim {
                        let row = r1 * other.dim + r2;
                        let col = c1 * other.dim + c2;
                        entries[row * n + col] = a * other.get(r2, c2);
                    }
                }
            }
        }
        let mut subsystems = self.subsystems.clone();
        subsystems.extend(other.subsystems.iter().cloned());
        Self {
            dim: n,
            entries,
            subsystems,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|M − M†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() < tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let id = Self::identity(self.subsystems.clone());
        self.adjoint()
            .matmul(self)
            .map(|p| p.max_abs_diff(&id) < tol)
            .unwrap_or(false)
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol)
            && self
                .matmul(self)
                .map(|sq| sq.max_abs_diff(self) < tol)
                .unwrap_or(false)
    }
}

/// Reduced operator on the subsystems listed in `keep` (in their original
/// order). All other factors are traced out.
pub fn partial_trace(rho: &OperatorMatrix, keep: &[usize]) -> Result<OperatorMatrix> {
    let subs = rho.subsystems();
    let n_sub = subs.len();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&k| k >= n_sub) {
        return Err(Error::InvalidSubsystem {
            index: bad,
            count: n_sub,
        });
    }
    if !rho.is_hermitian(1e-10) {
        return Err(Error::NotHermitian {
            defect: rho.hermiticity_defect(),
        });
    }
    let traced: Vec<usize> = (0..n_sub).filter(|i| !kept.contains(i)).collect();
    let dims: Vec<usize> = subs.iter().map(|s| s.dim).collect();

    // strides of the full row-major index
    let mut strides = vec![1usize; n_sub];
    for i in (0..n_sub.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let out_subs: Vec<Subsystem> = kept.iter().map(|&k| subs[k].clone()).collect();
    let out_dims: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let out_dim: usize = out_dims.iter().product();
    let traced_dim: usize = traced_dims.iter().product();

    let offset = |digits_kept: &[usize], digits_traced: &[usize]| -> usize {
        let mut idx = 0;
        for (pos, &k) in kept.iter().enumerate() {
            idx += digits_kept[pos] * strides[k];
        }
        for (pos, &t) in traced.iter().enumerate() {
            idx += digits_traced[pos] * strides[t];
        }
        idx
    };
    let digits = |mut index: usize, dims: &[usize]| -> Vec<usize> {
        let mut d = vec![0; dims.len()];
        for (slot, &dim) in d.iter_mut().zip(dims).rev() {
            *slot = index % dim;
            index /= dim;
        }
        d
    };

    let mut out = OperatorMatrix::zeros(out_subs);
    for r in 0..out_dim {
        let dr = digits(r, &out_dims);
        for c in 0..out_dim {
            let dc = digits(c, &out_dims);
            let mut acc = ZERO;
            for t in 0..traced_dim {
                let dt = digits(t, &traced_dims);
                acc += rho.get(offset(&dr, &dt), offset(&dc, &dt));
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

/// `⟨ψ|O|ψ⟩` for Hermitian `O`.
pub fn expectation(op: &OperatorMatrix, psi: &StateVector) -> Result<f64> {
    if op.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: psi.dim(),
        });
    }
    let defect = op.hermiticity_defect();
    if defect >= STRUCTURE_TOL {
        return Err(Error::NotHermitian { defect });
    }
    let value = psi.inner(&op.apply(psi)?)?;
    // Hermitian operators give a real value up to rounding
    debug_assert!(value.im.abs() < 1e-10 * (1.0 + value.re.abs()));
    Ok(value.re)
}

/// Validated 2×2 density matrix of a polarization qubit in the H/V basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix2 {
    entries: [[C64; 2]; 2],
}

impl DensityMatrix2 {
    pub const TOL: f64 = 1e-12;

    pub fn new(entries: [[C64; 2]; 2]) -> Result<Self> {
        let herm = (entries[0][1] - entries[1][0].conj())
            .norm()
            .max(entries[0][0].im.abs())
            .max(entries[1][1].im.abs());
        if herm >= Self::TOL {
            return Err(Error::NotHermitian { defect: herm });
        }
        let trace = entries[0][0].re + entries[1][1].re;
        if (trace - 1.0).abs() >= Self::TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace}")));
        }
        let rho = Self { entries };
        let (low, _) = rho.eigenvalues();
        if low < -Self::TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {low}"
            )));
        }
        Ok(rho)
    }

    /// `(1 + r·σ)/2`.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new([
            [C64::new((1.0 + z) / 2.0, 0.0), C64::new(x / 2.0, -y / 2.0)],
            [C64::new(x / 2.0, y / 2.0), C64::new((1.0 - z) / 2.0, 0.0)],
        ])
    }

    /// `|ψ⟩⟨ψ|` for `ψ = α|H⟩ + β e^{iξ}|V⟩`.
    pub fn pure(alpha: f64, beta: f64, xi: f64) -> Result<Self> {
        Self::mixed(alpha, beta, 1.0, xi)
    }

    /// The H/V-dephased family with off-diagonal `αβq e^{∓iξ}`.
    pub fn mixed(alpha: f64, beta: f64, q: f64, xi: f64) -> Result<Self> {
        let off = C64::from_polar(alpha * beta * q, -xi);
        Self::new([
            [C64::new(alpha * alpha, 0.0), off],
            [off.conj(), C64::new(beta * beta, 0.0)],
        ])
    }

    pub fn maximally_mixed() -> Self {
        Self {
            entries: [[C64::new(0.5, 0.0), ZERO], [ZERO, C64::new(0.5, 0.0)]],
        }
    }

    pub fn from_operator(op: &OperatorMatrix) -> Result<Self> {
        if op.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: op.dim(),
            });
        }
        Self::new([[op.get(0, 0), op.get(0, 1)], [op.get(1, 0), op.get(1, 1)]])
    }

    pub fn entries(&self) -> [[C64; 2]; 2] {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row][col]
    }

    pub fn to_operator(&self) -> OperatorMatrix {
        let e = self.entries;
        OperatorMatrix::from_rows("pol", &[&e[0], &e[1]]).expect("2x2")
    }

    /// Pauli expectations `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`.
    pub fn bloch(&self) -> [f64; 3] {
        let off = self.entries[1][0];
        [
            2.0 * off.re,
            2.0 * off.im,
            self.entries[0][0].re - self.entries[1][1].re,
        ]
    }

    pub fn determinant(&self) -> f64 {
        let e = self.entries;
        (e[0][0] * e[1][1] - e[0][1] * e[1][0]).re
    }

    pub fn purity(&self) -> f64 {
        let [x, y, z] = self.bloch();
        (1.0 + x * x + y * y + z * z) / 2.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let e = self.entries;
        let mean = (e[0][0].re + e[1][1].re) / 2.0;
        let half_gap = (((e[0][0].re - e[1][1].re) / 2.0).powi(2) + e[0][1].norm_sqr()).sqrt();
        (mean - half_gap, mean + half_gap)
    }

    /// Exact Bloch-vector residual `max|ρ − σ|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.entries[r][c] - other.entries[r][c]).norm());
            }
        }
        worst
    }

    /// Row-major real/imaginary pairs: `[re00, im00, re01, im01, ...]`.
    pub fn to_reals(&self) -> [f64; 8] {
        let e = self.entries;
        [
            e[0][0].re, e[0][0].im, e[0][1].re, e[0][1].im, e[1][0].re, e[1][0].im, e[1][1].re,
            e[1][1].im,
        ]
    }
}

/// Uhlmann fidelity `(Tr√(√ρ σ √ρ))²`.
///
/// For qubits this equals `Tr(ρσ) + 2√(det ρ · det σ)`.
pub fn fidelity(rho: &DensityMatrix2, sigma: &DensityMatrix2) -> f64 {
    let overlap = rho
        .to_operator()
        .matmul(&sigma.to_operator())
        .expect("2x2")
        .trace()
        .re;
    let dets = (rho.determinant().max(0.0) * sigma.determinant().max(0.0)).sqrt();
    (overlap + 2.0 * dets).clamp(0.0, 1.0)
}

/// Polarization basis vectors. `|L⟩ = (|H⟩ − i|V⟩)/√2`, `|R⟩ = (|H⟩ + i|V⟩)/√2`,
/// so that `|R⟩⟨R| − |L⟩⟨L|` is the usual `σy`.
pub mod pauli {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    pub fn sigma_x() -> OperatorMatrix {
        OperatorMatrix::from_rows("pol", &[&[ZERO, ONE], &[ONE, ZERO]]).unwrap()
    }

    pub fn sigma_y() -> OperatorMatrix {
        OperatorMatrix::from_rows("pol", &[&[ZERO, -I], &[I, ZERO]]).unwrap()
    }

    pub fn sigma_z() -> OperatorMatrix {
        OperatorMatrix::from_rows("pol", &[&[ONE, ZERO], &[ZERO, -ONE]]).unwrap()
    }

    pub fn identity() -> OperatorMatrix {
        OperatorMatrix::identity(vec![Subsystem::new("pol", 2)])
    }

    /// Hadamard on a two-mode path qubit.
    pub fn hadamard(label: &str) -> OperatorMatrix {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        OperatorMatrix::from_rows(label, &[&[h, h], &[h, -h]]).unwrap()
    }
}
