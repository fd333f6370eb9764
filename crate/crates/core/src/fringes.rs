//! Phase-sweep fringes: synthesis (with optional shot noise), sinusoid fits
//! and CSV round-tripping.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{Interferometer, Port, SetupConfig};
use crate::polarization::{wrap_phase, PolVector};

pub const MIN_POINTS: usize = 5;
pub const DEFAULT_POINTS: usize = 64;
/// Fitted visibilities above `1 + VISIBILITY_SLACK` are flagged.
pub const VISIBILITY_SLACK: f64 = 1e-9;

pub const CSV_HEADER: [&str; 4] = ["phase", "value", "basis", "port"];

/// `points` uniform phases starting at `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub points: usize,
    #[serde(default)]
    pub offset: f64,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        Self::uniform(DEFAULT_POINTS)
    }
}

impl PhaseGrid {
    pub fn uniform(points: usize) -> Self {
        Self {
            points,
            offset: 0.0,
        }
    }

    pub fn phases(&self) -> Vec<f64> {
        let step = TAU / self.points as f64;
        (0..self.points)
            .map(|i| wrap_phase(self.offset + i as f64 * step))
            .collect()
    }
}

/// Shot-noise settings: every value becomes `Poisson(counts · p) / counts`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotNoise {
    pub counts: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeRecord {
    pub phases: Vec<f64>,
    pub values: Vec<f64>,
    pub counts_per_point: Option<u64>,
    pub basis_label: String,
    pub port_label: String,
}

impl FringeRecord {
    pub fn new(
        phases: Vec<f64>,
        values: Vec<f64>,
        basis_label: impl Into<String>,
        port_label: impl Into<String>,
    ) -> Result<Self> {
        if phases.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: phases.len(),
                found: values.len(),
            });
        }
        if let Some(bad) = phases.iter().find(|p| !p.is_finite()) {
            return Err(Error::Record(format!("non-finite phase {bad}")));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Record(format!("value {bad} is not a nonnegative number")));
        }
        Ok(Self {
            phases,
            values,
            counts_per_point: None,
            basis_label: basis_label.into(),
            port_label: port_label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The same record with samples cyclically shifted by `by` positions.
    pub fn rotated(&self, by: usize) -> Self {
        let mut out = self.clone();
        if !out.is_empty() {
            let by = by % out.len();
            out.phases.rotate_left(by);
            out.values.rotate_left(by);
        }
        out
    }
}

/// Samples the upper-port detection probability for `k` over `grid`.
pub fn sweep(
    cfg: &SetupConfig,
    k: &PolVector,
    basis_label: &str,
    grid: &PhaseGrid,
    noise: Option<ShotNoise>,
) -> Result<FringeRecord> {
    match noise {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
            sweep_with_rng(cfg, k, basis_label, grid, Some(n.counts), &mut rng)
        }
        None => sweep_with_rng(cfg, k, basis_label, grid, None, &mut ChaCha8Rng::seed_from_u64(0)),
    }
}

/// As [`sweep`], drawing shot noise from the supplied generator.
pub fn sweep_with_rng<R: Rng + ?Sized>(
    cfg: &SetupConfig,
    k: &PolVector,
    basis_label: &str,
    grid: &PhaseGrid,
    counts: Option<u64>,
    rng: &mut R,
) -> Result<FringeRecord> {
    if grid.points < MIN_POINTS {
        return Err(Error::TooFewPoints {
            found: grid.points,
            required: MIN_POINTS,
        });
    }
    if counts == Some(0) {
        return Err(Error::OutOfRange {
            name: "counts",
            value: 0.0,
        });
    }
    let ifm = Interferometer::new(cfg)?;
    let phases = grid.phases();
    let mut values: Vec<f64> = phases
        .iter()
        .map(|&phi| ifm.probability(k, Port::Upper, phi).max(0.0))
        .collect();
    if let Some(n) = counts {
        let n_f = n as f64;
        for v in &mut values {
            let mean = n_f * *v;
            *v = if mean > 0.0 {
                let dist = Poisson::new(mean).map_err(|_| Error::OutOfRange {
                    name: "poisson mean",
                    value: mean,
                })?;
                dist.sample(rng) / n_f
            } else {
                0.0
            };
        }
    }
    let mut rec = FringeRecord::new(phases, values, basis_label, Port::Upper.as_str())?;
    rec.counts_per_point = counts;
    Ok(rec)
}

/// Least-squares fit `A cos φ + B sin φ + C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// `√(A²+B²)/C`, clamped to `[0, 1 + VISIBILITY_SLACK]`.
    pub visibility: f64,
    /// Unclamped value when it exceeded the upper limit.
    pub violation: Option<f64>,
    /// `ω` with `A = D sin ω`, `B = D cos ω`, in `[0, 2π)`.
    pub phase_offset: f64,
    pub residual_rms: f64,
}

impl FringeFit {
    /// Amplitude `D = √(A²+B²)`.
    pub fn amplitude(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn model(&self, phi: f64) -> f64 {
        self.a * phi.cos() + self.b * phi.sin() + self.c
    }
}

pub fn fit(rec: &FringeRecord) -> Result<FringeFit> {
    let n = rec.len();
    if n < MIN_POINTS {
        return Err(Error::TooFewPoints {
            found: n,
            required: MIN_POINTS,
        });
    }
    if rec.phases.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rec.phases.len(),
        });
    }
    if let Some(bad) = rec.values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Record(format!("negative or NaN value {bad}")));
    }

    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (&phi, &y) in rec.phases.iter().zip(&rec.values) {
        let row = [phi.cos(), phi.sin(), 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * y;
        }
    }
    let [a, b, c] = solve3(m, rhs, n as f64)?;
    if c <= 1e-14 {
        return Err(Error::DarkPort { mean: c });
    }

    let raw = a.hypot(b) / c;
    let limit = 1.0 + VISIBILITY_SLACK;
    let (visibility, violation) = if raw > limit {
        (limit, Some(raw))
    } else {
        (raw, None)
    };
    let out = FringeFit {
        a,
        b,
        c,
        visibility,
        violation,
        phase_offset: wrap_phase(a.atan2(b)),
        residual_rms: 0.0,
    };
    let ss: f64 = rec
        .phases
        .iter()
        .zip(&rec.values)
        .map(|(&phi, &y)| (y - out.model(phi)).powi(2))
        .sum();
    Ok(FringeFit {
        residual_rms: (ss / n as f64).sqrt(),
        ..out
    })
}

/// Gaussian elimination with partial pivoting; `scale` sets the singularity
/// threshold (the normal matrix entries grow with the number of points).
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3], scale: f64) -> Result<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("non-empty range");
        if m[pivot][col].abs() <= 1e-10 * scale {
            return Err(Error::SingularDesign);
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Ok(x)
}

/// `(max − min)/(max + min)` over the recorded values. Best on dense,
/// noiseless records.
pub fn visibility_minmax(rec: &FringeRecord) -> Result<f64> {
    if rec.is_empty() {
        return Err(Error::TooFewPoints {
            found: 0,
            required: 1,
        });
    }
    let max = rec.values.iter().copied().fold(f64::MIN, f64::max);
    let min = rec.values.iter().copied().fold(f64::MAX, f64::min);
    if max + min <= 0.0 {
        return Err(Error::ZeroFringe);
    }
    Ok((max - min) / (max + min))
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    phase: f64,
    value: f64,
    basis: String,
    port: String,
}

/// Writes records as `phase,value,basis,port` rows with 17 significant digits.
pub fn write_csv<W: Write>(records: &[FringeRecord], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for rec in records {
        for (phi, v) in rec.phases.iter().zip(&rec.values) {
            w.write_record([
                format!("{phi:.16e}"),
                format!("{v:.16e}"),
                rec.basis_label.clone(),
                rec.port_label.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads rows back, grouping consecutive rows by `(basis, port)`.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<FringeRecord>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Record(format!(
            "expected header `{}`, found `{}`",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: Vec<FringeRecord> = Vec::new();
    for row in r.deserialize::<CsvRow>() {
        let row = row?;
        let same = out
            .last()
            .is_some_and(|rec| rec.basis_label == row.basis && rec.port_label == row.port);
        if !same {
            out.push(FringeRecord::new(vec![], vec![], row.basis, row.port)?);
        }
        let rec = out.last_mut().expect("just pushed");
        if !row.phase.is_finite() || !(row.value >= 0.0) || !row.value.is_finite() {
            return Err(Error::Record(format!(
                "bad row phase={} value={}",
                row.phase, row.value
            )));
        }
        rec.phases.push(row.phase);
        rec.values.push(row.value);
    }
    Ok(out)
}
