//! Standard and visibility Stokes parameters, their algebraic identities and
//! the geometry linking a visibility Stokes vector to the idler's Bloch vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fringes::VISIBILITY_SLACK;
use crate::linalg::DensityMatrix2;
use crate::polarization::{wrap_phase, PolarizationState, Visibilities};

pub const DEFAULT_SUM_RULE_TOL: f64 = 1e-6;
pub const GEOMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self { x, y, z };
        if !(v.norm_sqr() <= 1.0 + 1e-12) {
            return Err(Error::InvalidDensityMatrix(format!(
                "Bloch vector length {} exceeds 1",
                v.norm()
            )));
        }
        Ok(v)
    }

    pub fn from_array([x, y, z]: [f64; 3]) -> Result<Self> {
        Self::new(x, y, z)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `𝒫 = Tr ρ² = (1 + r²)/2`.
    pub fn purity(&self) -> f64 {
        (1.0 + self.norm_sqr()) / 2.0
    }

    pub fn to_density(&self) -> Result<DensityMatrix2> {
        DensityMatrix2::from_bloch(self.x, self.y, self.z)
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    dot(d, d).sqrt()
}

/// `(Tr σ_x ρ, Tr σ_y ρ, Tr σ_z ρ)`.
pub fn standard_stokes(rho: &DensityMatrix2) -> Result<BlochVector> {
    BlochVector::from_array(rho.bloch())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VisibilityStokes {
    pub s0: f64,
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl VisibilityStokes {
    pub fn new(s0: f64, sx: f64, sy: f64, sz: f64) -> Self {
        Self { s0, sx, sy, sz }
    }

    pub fn vector(&self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }

    pub fn vector_norm(&self) -> f64 {
        dot(self.vector(), self.vector()).sqrt()
    }

    /// `|S⃗| − S₀`, zero for any consistent data set.
    pub fn norm_defect(&self) -> f64 {
        self.vector_norm() - self.s0
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.s0 - other.s0,
            self.sx - other.sx,
            self.sy - other.sy,
            self.sz - other.sz,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesOptions {
    /// Largest accepted spread of the three per-basis sums.
    pub sum_rule_tol: f64,
    /// Measured transmission to divide out, if known.
    pub transmission: Option<f64>,
}

impl Default for StokesOptions {
    fn default() -> Self {
        Self {
            sum_rule_tol: DEFAULT_SUM_RULE_TOL,
            transmission: None,
        }
    }
}

/// Visibility Stokes parameters with the sum-rule diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesEstimate {
    pub raw: VisibilityStokes,
    /// Present when a transmission was supplied.
    pub corrected: Option<VisibilityStokes>,
    /// `V_H²+V_V²`, `V_D²+V_A²`, `V_L²+V_R²` of the raw data.
    pub sums: [f64; 3],
    /// `max − min` of `sums`.
    pub spread: f64,
}

impl StokesEstimate {
    /// The corrected parameters when available, else the raw ones.
    pub fn best(&self) -> VisibilityStokes {
        self.corrected.unwrap_or(self.raw)
    }
}

/// Rough 3σ tolerance for the sum-rule spread under shot noise with
/// `counts` detections per point on a `points`-point grid at mean level
/// `mean` (probability units).
pub fn shot_noise_sum_rule_tolerance(counts: u64, points: usize, mean: f64) -> f64 {
    let sigma_v = (2.0 / (points as f64 * counts as f64 * mean.max(1e-12))).sqrt();
    // each sum has two squared terms, each with error ≲ 2σ_V
    3.0 * 2.0 * 2.0 * sigma_v
}

pub fn visibility_stokes(v: &Visibilities) -> Result<VisibilityStokes> {
    Ok(visibility_stokes_with(v, &StokesOptions::default())?.best())
}

pub fn visibility_stokes_with(v: &Visibilities, opts: &StokesOptions) -> Result<StokesEstimate> {
    for b in crate::polarization::Basis::ALL {
        let value = v.get(b);
        if !(0.0..=1.0 + VISIBILITY_SLACK).contains(&value) {
            return Err(Error::VisibilityOutOfRange { value });
        }
    }
    let raw = stokes_from_squares(v);
    let sums = per_basis_sums(v);
    let spread = sums.iter().copied().fold(f64::MIN, f64::max)
        - sums.iter().copied().fold(f64::MAX, f64::min);
    if spread > opts.sum_rule_tol {
        return Err(Error::SumRuleInconsistent {
            spread,
            tolerance: opts.sum_rule_tol,
        });
    }
    let corrected = match opts.transmission {
        None => None,
        Some(t) if t > 0.0 && t <= 1.0 => {
            let t2 = t * t;
            Some(VisibilityStokes::new(
                raw.s0 / t2,
                raw.sx / t2,
                raw.sy / t2,
                raw.sz / t2,
            ))
        }
        Some(t) => {
            return Err(Error::OutOfRange {
                name: "transmission",
                value: t,
            })
        }
    };
    Ok(StokesEstimate {
        raw,
        corrected,
        sums,
        spread,
    })
}

fn per_basis_sums(v: &Visibilities) -> [f64; 3] {
    [
        v.h * v.h + v.v * v.v,
        v.d * v.d + v.a * v.a,
        v.l * v.l + v.r * v.r,
    ]
}

fn stokes_from_squares(v: &Visibilities) -> VisibilityStokes {
    let sums = per_basis_sums(v);
    VisibilityStokes {
        s0: sums.iter().sum::<f64>() / 3.0,
        sx: v.d * v.d - v.a * v.a,
        sy: v.l * v.l - v.r * v.r,
        sz: v.h * v.h - v.v * v.v,
    }
}

/// Residuals of `ΣV² = 3S₀`, `ΣV⁴ = 2S₀²` and
/// `V_D²V_A² + V_L²V_R² + V_H²V_V² = S₀²/2`, with `S₀ = V_H² + V_V²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub s0: f64,
    pub sum_squares: f64,
    pub sum_fourth_powers: f64,
    pub sum_cross_products: f64,
}

impl IdentityReport {
    pub fn max_abs(&self) -> f64 {
        self.sum_squares
            .abs()
            .max(self.sum_fourth_powers.abs())
            .max(self.sum_cross_products.abs())
    }
}

pub fn identities_check(v: &Visibilities) -> IdentityReport {
    let sq = |x: f64| x * x;
    let s0 = sq(v.h) + sq(v.v);
    let all = [v.h, v.v, v.d, v.a, v.l, v.r];
    let sum2: f64 = all.iter().map(|&x| sq(x)).sum();
    let sum4: f64 = all.iter().map(|&x| sq(sq(x))).sum();
    let cross = sq(v.d) * sq(v.a) + sq(v.l) * sq(v.r) + sq(v.h) * sq(v.v);
    IdentityReport {
        s0,
        sum_squares: sum2 - 3.0 * s0,
        sum_fourth_powers: sum4 - 2.0 * s0 * s0,
        sum_cross_products: cross - s0 * s0 / 2.0,
    }
}

/// `ᾱ = √((1 + S_z/S₀)/2)`, `β̄ = √(1 − ᾱ²)`, `ξ̄ = atan2(S_y, S_x)` mod 2π.
pub fn normalized_stokes(vs: &VisibilityStokes) -> Result<PolarizationState> {
    if !(vs.s0 > 0.0) {
        return Err(Error::ZeroCoherence);
    }
    let alpha = ((1.0 + vs.sz / vs.s0) / 2.0).clamp(0.0, 1.0).sqrt();
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    PolarizationState::new(alpha, beta, wrap_phase(vs.sy.atan2(vs.sx)))
}

/// Every Bloch vector compatible with one visibility Stokes vector lies within
/// `radius = 1 − S₀` of `center = S⃗`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyBall {
    pub center: [f64; 3],
    pub radius: f64,
    /// Pure state where the ball touches the Bloch sphere.
    pub touch: Option<PolarizationState>,
    /// `S₀ = 0`: nothing is learned, the ball is the whole Bloch ball.
    pub degenerate: bool,
}

impl ConsistencyBall {
    pub fn contains(&self, r: &BlochVector, tol: f64) -> bool {
        dist(self.center, r.to_array()) <= self.radius + tol
    }
}

pub fn consistency_ball(vs: &VisibilityStokes) -> ConsistencyBall {
    if vs.s0 <= 0.0 {
        return ConsistencyBall {
            center: [0.0; 3],
            radius: 1.0,
            touch: None,
            degenerate: true,
        };
    }
    ConsistencyBall {
        center: vs.vector(),
        radius: 1.0 - vs.s0,
        touch: normalized_stokes(vs).ok(),
        degenerate: false,
    }
}

/// Rotational ellipsoid of visibility Stokes vectors compatible with one
/// Bloch vector `r⃗`: foci at the origin and `r⃗`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    /// Unit vector along the symmetry axis.
    pub axis: [f64; 3],
    /// `[along axis, transverse]`.
    pub semiaxes: [f64; 2],
}

impl Ellipsoid {
    /// Quadratic-form membership, scaled by the transverse semiaxis squared so
    /// that the degenerate (segment) case stays well defined.
    pub fn contains(&self, s: [f64; 3], tol: f64) -> bool {
        let d = [
            s[0] - self.center[0],
            s[1] - self.center[1],
            s[2] - self.center[2],
        ];
        let u = dot(d, self.axis);
        let perp = [
            d[0] - u * self.axis[0],
            d[1] - u * self.axis[1],
            d[2] - u * self.axis[2],
        ];
        let w2 = dot(perp, perp);
        let [a, b] = self.semiaxes;
        let b2 = b * b;
        u * u * b2 / (a * a) + w2 <= b2 * (1.0 + tol) + tol * tol
    }
}

pub fn visibility_ellipsoid(r: &BlochVector) -> Ellipsoid {
    let norm = r.norm();
    let axis = if norm > 0.0 {
        [r.x / norm, r.y / norm, r.z / norm]
    } else {
        [0.0, 0.0, 1.0]
    };
    Ellipsoid {
        center: [r.x / 2.0, r.y / 2.0, r.z / 2.0],
        axis,
        semiaxes: [0.5, (1.0 - norm * norm).max(0.0).sqrt() / 2.0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub purity: f64,
    /// `(r⃗·S⃗) + 1 − S₀`.
    pub purity_upper: f64,
    /// `1 − 2S₀(1 − S₀)`, only meaningful for `S₀ ≥ 1/2`.
    pub purity_lower: Option<f64>,
    /// `(1 + r)/2`.
    pub s0_upper: f64,
    /// `|S⃗ − r⃗|`.
    pub ball_distance: f64,
    pub ball_radius: f64,
    pub purity_upper_ok: bool,
    pub purity_lower_ok: bool,
    pub s0_upper_ok: bool,
    pub ball_ok: bool,
    pub ellipsoid_ok: bool,
}

impl BoundsReport {
    pub fn all_ok(&self) -> bool {
        self.purity_upper_ok
            && self.purity_lower_ok
            && self.s0_upper_ok
            && self.ball_ok
            && self.ellipsoid_ok
    }
}

pub fn bounds_check(r: &BlochVector, vs: &VisibilityStokes) -> BoundsReport {
    let tol = GEOMETRY_TOL;
    let purity = r.purity();
    let purity_upper = dot(r.to_array(), vs.vector()) + 1.0 - vs.s0;
    let purity_lower = (vs.s0 >= 0.5).then(|| 1.0 - 2.0 * vs.s0 * (1.0 - vs.s0));
    let s0_upper = (1.0 + r.norm()) / 2.0;
    let ball_distance = dist(vs.vector(), r.to_array());
    let ball_radius = 1.0 - vs.s0;
    BoundsReport {
        purity,
        purity_upper,
        purity_lower,
        s0_upper,
        ball_distance,
        ball_radius,
        purity_upper_ok: purity <= purity_upper + tol,
        purity_lower_ok: purity_lower.is_none_or(|lo| purity >= lo - tol),
        s0_upper_ok: vs.s0 <= s0_upper + tol,
        ball_ok: ball_distance <= ball_radius + tol,
        ellipsoid_ok: visibility_ellipsoid(r).contains(vs.vector(), tol),
    }
}

/// Violation counts over many `(r⃗, S⃗)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeometrySurvey {
    pub samples: usize,
    pub ball_violations: usize,
    pub ellipsoid_violations: usize,
    pub purity_upper_violations: usize,
    pub purity_lower_violations: usize,
    pub s0_upper_violations: usize,
    /// Largest `|S⃗ − r⃗| − (1 − S₀)` seen.
    pub max_ball_excess: f64,
}

impl GeometrySurvey {
    pub fn record(&mut self, report: &BoundsReport) {
        if self.samples == 0 {
            self.max_ball_excess = f64::MIN;
        }
        self.samples += 1;
        self.ball_violations += usize::from(!report.ball_ok);
        self.ellipsoid_violations += usize::from(!report.ellipsoid_ok);
        self.purity_upper_violations += usize::from(!report.purity_upper_ok);
        self.purity_lower_violations += usize::from(!report.purity_lower_ok);
        self.s0_upper_violations += usize::from(!report.s0_upper_ok);
        self.max_ball_excess = self
            .max_ball_excess
            .max(report.ball_distance - report.ball_radius);
    }

    pub fn violations(&self) -> usize {
        self.ball_violations
            + self.ellipsoid_violations
            + self.purity_upper_violations
            + self.purity_lower_violations
            + self.s0_upper_violations
    }
}
