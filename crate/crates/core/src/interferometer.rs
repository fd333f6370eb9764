//! State-vector model of the imbalanced two-source interferometer.
//!
//! Source Q1 emits `|ψ_S⟩ ⊗ |ψ_I⟩` (signal on path `a`), source Q2 emits
//! `(|H H⟩ + e^{iθ}|V V⟩)/√2 ⊗ |e_Ψ⟩` (signal on path `b`). The idler of Q1
//! passes a loss beam splitter (transmission `T`, loss into path `w`), both
//! idlers leave through path `c`, and the signal paths meet on a Hadamard beam
//! splitter whose upper output is measured in a polarization basis.
//!
//! Space layout (slowest first): signal path, signal polarization, idler path,
//! idler polarization, environment. Signal path index 0/1 means `a`/`b`
//! before the beam splitter and lower/upper port after it; idler path index 0/1
//! means `c`/`w`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentVectors;
use crate::error::{Error, Result};
use crate::linalg::{partial_trace, OperatorMatrix, StateVector, Subsystem, C64, ZERO};
use crate::polarization::{wrap_phase, Basis, PolVector, PolarizationState, Visibilities};

/// Means below this make a fringe a dark port.
pub const DARK_PORT_LEVEL: f64 = 1e-14;

pub const SIGNAL_PATH: usize = 0;
pub const SIGNAL_POL: usize = 1;
pub const IDLER_PATH: usize = 2;
pub const IDLER_POL: usize = 3;
pub const ENVIRONMENT: usize = 4;

const PATH_A: usize = 0;
const PATH_B: usize = 1;
const PATH_C: usize = 0;
const PATH_W: usize = 1;

/// Signal photon of Q1, `δ|H⟩ + ε e^{iζ}|V⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalPrep {
    pub delta: f64,
    pub epsilon: f64,
    pub zeta: f64,
}

impl SignalPrep {
    pub fn new(delta: f64, epsilon: f64, zeta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
            });
        }
        if !(epsilon >= 0.0) {
            return Err(Error::OutOfRange {
                name: "epsilon",
                value: epsilon,
            });
        }
        let norm_sqr = delta * delta + epsilon * epsilon;
        if (norm_sqr - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized {
                what: "signal amplitudes",
                norm_sqr,
            });
        }
        if !zeta.is_finite() {
            return Err(Error::OutOfRange {
                name: "zeta",
                value: zeta,
            });
        }
        Ok(Self {
            delta,
            epsilon,
            zeta: wrap_phase(zeta),
        })
    }

    /// `(|H⟩ + e^{iζ}|V⟩)/√2`.
    pub fn balanced(zeta: f64) -> Self {
        Self {
            delta: FRAC_1_SQRT_2,
            epsilon: FRAC_1_SQRT_2,
            zeta: wrap_phase(zeta),
        }
    }

    /// The balanced signal state used for measurements in `basis`.
    pub fn unbiased_for(basis: Basis) -> Self {
        Self::balanced(basis.unbiased_signal_phase())
    }

    /// `(|k⟩ + |k⊥⟩)/√2` rewritten as `δ|H⟩ + ε e^{iζ}|V⟩` up to global phase.
    pub fn unbiased_for_vector(k: &PolVector) -> Self {
        let [kh, kv] = k.components();
        let [ph, pv] = k.orthogonal().components();
        let (a, b) = ((kh + ph) * FRAC_1_SQRT_2, (kv + pv) * FRAC_1_SQRT_2);
        let zeta = if a.norm() == 0.0 || b.norm() == 0.0 {
            0.0
        } else {
            b.arg() - a.arg()
        };
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        Self {
            delta: a.norm() / norm,
            epsilon: b.norm() / norm,
            zeta: wrap_phase(zeta),
        }
    }

    pub fn vector(&self) -> PolVector {
        PolVector::normalized(
            C64::new(self.delta, 0.0),
            C64::from_polar(self.epsilon, self.zeta),
        )
        .expect("validated signal prep")
    }
}

/// Idler photon of Q1 together with the environments of both sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdlerPrep {
    pub state: PolarizationState,
    pub env: EnvironmentVectors,
}

impl IdlerPrep {
    pub fn new(state: PolarizationState, env: EnvironmentVectors) -> Self {
        Self { state, env }
    }

    pub fn coherent(state: PolarizationState) -> Self {
        Self::new(state, EnvironmentVectors::coherent(crate::environment::DEFAULT_ENV_DIM))
    }

    pub fn alpha(&self) -> f64 {
        self.state.alpha
    }

    pub fn beta(&self) -> f64 {
        self.state.beta
    }

    pub fn xi(&self) -> f64 {
        self.state.xi
    }

    /// `α|H⟩|e_H⟩ + β e^{iξ}|V⟩|e_V⟩` on polarization ⊗ environment.
    pub fn joint_state(&self) -> StateVector {
        let h = StateVector::basis("idler_pol", 2, 0);
        let v = StateVector::basis("idler_pol", 2, 1);
        h.tensor(&self.env.state(crate::environment::EnvMode::H))
            .scale(C64::new(self.state.alpha, 0.0))
            .add(
                &v.tensor(&self.env.state(crate::environment::EnvMode::V))
                    .scale(C64::from_polar(self.state.beta, self.state.xi)),
            )
            .expect("same space")
    }

    /// Polarization state after tracing out the environment.
    pub fn reduced_state(&self) -> crate::linalg::DensityMatrix2 {
        let rho = partial_trace(&self.joint_state().projector(), &[0]).expect("valid");
        crate::linalg::DensityMatrix2::from_operator(&rho).expect("reduced state is physical")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupConfig {
    /// `P`; the pump power ratio between the sources is `P²`.
    pub pump_ratio: f64,
    pub transmission: f64,
    /// Relative phase between the two crystals of Q2.
    pub theta: f64,
    pub signal: SignalPrep,
    pub idler: IdlerPrep,
}

impl SetupConfig {
    pub fn new(
        pump_ratio: f64,
        transmission: f64,
        theta: f64,
        signal: SignalPrep,
        idler: IdlerPrep,
    ) -> Result<Self> {
        let cfg = Self {
            pump_ratio,
            transmission,
            theta,
            signal,
            idler,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `P = T = 1`, `θ = 0`, balanced signal with `ζ = 0`.
    pub fn reference(idler: IdlerPrep) -> Self {
        Self {
            pump_ratio: 1.0,
            transmission: 1.0,
            theta: 0.0,
            signal: SignalPrep::balanced(0.0),
            idler,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pump_ratio >= 0.0 && self.pump_ratio.is_finite()) {
            return Err(Error::OutOfRange {
                name: "pump_ratio",
                value: self.pump_ratio,
            });
        }
        if !(0.0..=1.0).contains(&self.transmission) {
            return Err(Error::OutOfRange {
                name: "transmission",
                value: self.transmission,
            });
        }
        if !self.theta.is_finite() {
            return Err(Error::OutOfRange {
                name: "theta",
                value: self.theta,
            });
        }
        SignalPrep::new(self.signal.delta, self.signal.epsilon, self.signal.zeta)?;
        PolarizationState::new(self.idler.alpha(), self.idler.beta(), self.idler.xi())?;
        Ok(())
    }

    /// Same setup with another signal preparation.
    pub fn with_signal(&self, signal: SignalPrep) -> Self {
        Self {
            signal,
            ..self.clone()
        }
    }

    /// `N = 1/√(1+P²)`.
    pub fn normalization(&self) -> f64 {
        1.0 / (1.0 + self.pump_ratio * self.pump_ratio).sqrt()
    }
}

/// Output port of the signal beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Port {
    Lower,
    Upper,
}

impl Port {
    fn index(self) -> usize {
        match self {
            Port::Lower => 0,
            Port::Upper => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Port::Lower => "lower",
            Port::Upper => "upper",
        }
    }
}

/// `c_k` and `z_k` of `P(φ) = N²(c_k + 2PT Re(e^{−iφ} z_k))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferenceCoefficients {
    pub c: f64,
    pub z: C64,
}

impl InterferenceCoefficients {
    pub fn probability(&self, cfg: &SetupConfig, phi: f64) -> f64 {
        let n2 = cfg.normalization().powi(2);
        let osc = (C64::from_polar(1.0, -phi) * self.z).re;
        n2 * (self.c + 2.0 * cfg.pump_ratio * cfg.transmission * osc)
    }

    /// `2PT|z|/c`, or `None` for a dark port.
    pub fn visibility(&self, cfg: &SetupConfig) -> Option<f64> {
        (self.c >= DARK_PORT_LEVEL)
            .then(|| 2.0 * cfg.pump_ratio * cfg.transmission * self.z.norm() / self.c)
    }
}

fn layout(env_dim: usize) -> Vec<Subsystem> {
    vec![
        Subsystem::new("signal_path", 2),
        Subsystem::new("signal_pol", 2),
        Subsystem::new("idler_path", 2),
        Subsystem::new("idler_pol", 2),
        Subsystem::new("env", env_dim),
    ]
}

fn idler_space(env_dim: usize) -> Vec<Subsystem> {
    layout(env_dim).split_off(IDLER_PATH)
}

/// Hadamard on the slowest (signal path) qubit of `psi`.
fn apply_beam_splitter(psi: &StateVector) -> StateVector {
    let amps = psi.amplitudes();
    let half = amps.len() / 2;
    let mut out = vec![ZERO; amps.len()];
    for i in 0..half {
        let (a0, a1) = (amps[i], amps[i + half]);
        out[i] = (a0 + a1) * FRAC_1_SQRT_2;
        out[i + half] = (a0 - a1) * FRAC_1_SQRT_2;
    }
    StateVector::new(out, psi.subsystems().to_vec()).expect("same layout")
}

/// The beam splitter as an explicit operator on the full space.
pub fn beam_splitter_operator(env_dim: usize) -> OperatorMatrix {
    let rest = OperatorMatrix::identity(layout(env_dim).split_off(SIGNAL_POL));
    crate::linalg::pauli::hadamard("signal_path").tensor(&rest)
}

/// `|path⟩ ⊗ (α|H⟩|e_H⟩ + β e^{iξ}|V⟩|e_V⟩)` on the idler space.
fn q1_idler(idler: &IdlerPrep, path: usize) -> StateVector {
    StateVector::basis("idler_path", 2, path).tensor(&idler.joint_state())
}

/// Signal of Q1 on path `a`, before the beam splitter.
fn q1_signal(cfg: &SetupConfig) -> StateVector {
    StateVector::basis("signal_path", 2, PATH_A).tensor(&cfg.signal.vector().to_state("signal_pol"))
}

/// Q2 pair on paths `b` (signal) and `c` (idler), before the beam splitter.
fn q2_pair(cfg: &SetupConfig) -> StateVector {
    let env = cfg.idler.env.state(crate::environment::EnvMode::Psi);
    let b = StateVector::basis("signal_path", 2, PATH_B);
    let c = StateVector::basis("idler_path", 2, PATH_C);
    let h = |label: &str| StateVector::basis(label, 2, 0);
    let v = |label: &str| StateVector::basis(label, 2, 1);
    let hh = b
        .tensor(&h("signal_pol"))
        .tensor(&c)
        .tensor(&h("idler_pol"))
        .tensor(&env);
    let vv = b
        .tensor(&v("signal_pol"))
        .tensor(&c)
        .tensor(&v("idler_pol"))
        .tensor(&env);
    hh.scale(C64::new(FRAC_1_SQRT_2, 0.0))
        .add(&vv.scale(C64::from_polar(FRAC_1_SQRT_2, cfg.theta)))
        .expect("same space")
}

/// Precomputed branches of the pre-measurement state for fast phase sweeps.
#[derive(Debug, Clone)]
pub struct Interferometer {
    cfg: SetupConfig,
    /// Q1 contribution after the beam splitter, without `e^{iφ}` and `N`.
    source1: StateVector,
    /// Q2 contribution after the beam splitter, including `P`, without `N`.
    source2: StateVector,
}

impl Interferometer {
    pub fn new(cfg: &SetupConfig) -> Result<Self> {
        cfg.validate()?;
        let t = cfg.transmission;
        let signal = q1_signal(cfg);
        let transmitted = signal
            .tensor(&q1_idler(&cfg.idler, PATH_C))
            .scale(C64::new(t, 0.0));
        let lost = signal
            .tensor(&q1_idler(&cfg.idler, PATH_W))
            .scale(C64::new((1.0 - t * t).max(0.0).sqrt(), 0.0));
        let source1 = apply_beam_splitter(&transmitted.add(&lost)?);
        let source2 = apply_beam_splitter(&q2_pair(cfg).scale(C64::new(cfg.pump_ratio, 0.0)));
        Ok(Self {
            cfg: cfg.clone(),
            source1,
            source2,
        })
    }

    pub fn config(&self) -> &SetupConfig {
        &self.cfg
    }

    /// Full joint state at interferometric phase `phi`.
    pub fn state(&self, phi: f64) -> StateVector {
        let n = self.cfg.normalization();
        self.source1
            .scale(C64::from_polar(n, phi))
            .add(&self.source2.scale(C64::new(n, 0.0)))
            .expect("same space")
    }

    /// `⟨ψ|Π|ψ⟩` with `Π = |port⟩⟨port| ⊗ |k⟩⟨k| ⊗ 1`.
    pub fn probability(&self, k: &PolVector, port: Port, phi: f64) -> f64 {
        projected_norm_sqr(&self.state(phi), k, port)
    }
}

/// Squared norm of the state projected onto `port ⊗ k` on the signal.
fn projected_norm_sqr(psi: &StateVector, k: &PolVector, port: Port) -> f64 {
    let amps = psi.amplitudes();
    let idler_dim = amps.len() / 4;
    let [kh, kv] = k.components();
    let base = port.index() * 2 * idler_dim;
    (0..idler_dim)
        .map(|j| {
            let a_h = amps[base + j];
            let a_v = amps[base + idler_dim + j];
            (kh.conj() * a_h + kv.conj() * a_v).norm_sqr()
        })
        .sum()
}

pub fn build_state(cfg: &SetupConfig, phi: f64) -> Result<StateVector> {
    Ok(Interferometer::new(cfg)?.state(phi))
}

/// Probability of detecting the signal in `k` at the upper port.
pub fn detection_probability(cfg: &SetupConfig, k: &PolVector, phi: f64) -> Result<f64> {
    Ok(Interferometer::new(cfg)?.probability(k, Port::Upper, phi))
}

/// `c_k` and `z_k` from inner products of the individual branches.
pub fn coefficients(cfg: &SetupConfig, k: &PolVector) -> Result<InterferenceCoefficients> {
    coefficients_at(cfg, k, Port::Upper)
}

pub fn coefficients_at(
    cfg: &SetupConfig,
    k: &PolVector,
    port: Port,
) -> Result<InterferenceCoefficients> {
    cfg.validate()?;
    let env_dim = cfg.idler.env.dim();

    // |ψ'_S⟩ = BS|a, ψ_S⟩ on the signal space
    let bs = crate::linalg::pauli::hadamard("signal_path")
        .tensor(&OperatorMatrix::identity(vec![Subsystem::new("signal_pol", 2)]));
    let psi_s = bs.apply(&q1_signal(cfg))?;
    // |ψ'_I⟩ with the idler on path c
    let psi_i = q1_idler(&cfg.idler, PATH_C);
    // |Ψ'⟩ = BS · DM · |Ψ⟩ on the full space
    let big_psi = apply_beam_splitter(&q2_pair(cfg));

    let port_ket = StateVector::basis("signal_path", 2, port.index());
    let signal_proj = port_ket
        .projector()
        .tensor(&k.to_state("signal_pol").projector());
    let full_proj = signal_proj.tensor(&OperatorMatrix::identity(idler_space(env_dim)));

    let c_signal = psi_s.inner(&signal_proj.apply(&psi_s)?)?.re;
    let c_pair = big_psi.inner(&full_proj.apply(&big_psi)?)?.re;
    let c = c_signal + cfg.pump_ratio * cfg.pump_ratio * c_pair;
    let z = psi_s.tensor(&psi_i).inner(&full_proj.apply(&big_psi)?)?;
    Ok(InterferenceCoefficients { c, z })
}

/// Closed-form visibilities for a pure idler with arbitrary `P, T, θ` and
/// signal preparation. `None` marks a dark port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticVisibilities {
    pub h: Option<f64>,
    pub v: Option<f64>,
    pub d: Option<f64>,
    pub a: Option<f64>,
    pub l: Option<f64>,
    pub r: Option<f64>,
}

impl AnalyticVisibilities {
    pub fn get(&self, basis: Basis) -> Option<f64> {
        match basis {
            Basis::H => self.h,
            Basis::V => self.v,
            Basis::D => self.d,
            Basis::A => self.a,
            Basis::L => self.l,
            Basis::R => self.r,
        }
    }
}

pub fn analytic_visibilities(cfg: &SetupConfig) -> Result<AnalyticVisibilities> {
    cfg.validate()?;
    if !cfg.idler.env.is_coherent(1e-12) {
        return Err(Error::ScenarioMismatch(
            "closed-form pure-state visibilities need a fully coherent environment".into(),
        ));
    }
    let (p, t, theta) = (cfg.pump_ratio, cfg.transmission, cfg.theta);
    let SignalPrep {
        delta,
        epsilon,
        zeta,
    } = cfg.signal;
    let (alpha, beta, xi) = (cfg.idler.alpha(), cfg.idler.beta(), cfg.idler.xi());

    // each denominator is 4 c_k
    let ratio = |num: f64, denom: f64| (denom / 4.0 >= DARK_PORT_LEVEL).then(|| num / denom);

    let h = ratio(2.0 * SQRT_2 * delta * p * t * alpha, p * p + 2.0 * delta * delta);
    let v = ratio(
        2.0 * SQRT_2 * epsilon * p * t * beta,
        p * p + 2.0 * epsilon * epsilon,
    );

    let de = 2.0 * delta * epsilon;
    let lin = |sign: f64| {
        let s = 1.0 + sign * de * zeta.cos();
        let idler = ((1.0 + sign * 2.0 * alpha * beta * (xi - theta).cos()) / 2.0).max(0.0);
        ratio(
            2.0 * p * t * s.max(0.0).sqrt() * idler.sqrt(),
            1.0 + p * p + sign * de * zeta.cos(),
        )
    };
    let circ = |sign: f64| {
        let s = 1.0 - sign * de * zeta.sin();
        let idler = ((1.0 + sign * 2.0 * alpha * beta * (xi - theta).sin()) / 2.0).max(0.0);
        ratio(
            2.0 * p * t * s.max(0.0).sqrt() * idler.sqrt(),
            1.0 + p * p - sign * de * zeta.sin(),
        )
    };
    Ok(AnalyticVisibilities {
        h,
        v,
        d: lin(1.0),
        a: lin(-1.0),
        l: circ(1.0),
        r: circ(-1.0),
    })
}

/// Visibility in basis state `k` when the signal is prepared unbiased to
/// `{k, k⊥}`: `2PT/(1+P²) · |⟨ψ_I| (D_θ|k*⟩ ⊗ |e_Ψ⟩)|`, where
/// `D_θ = diag(1, e^{iθ})`. The signal preparation in `cfg` is ignored.
pub fn unbiased_visibility(cfg: &SetupConfig, k: &PolVector) -> f64 {
    let p = cfg.pump_ratio;
    let prefactor = 2.0 * p * cfg.transmission / (1.0 + p * p);
    let target = k.conj().with_v_phase(cfg.theta);
    let [x, y] = target.components();
    let idler = &cfg.idler;
    let amp = idler.env.g_h() * x * idler.alpha()
        + idler.env.g_v() * y * C64::from_polar(idler.beta(), -idler.xi());
    prefactor * amp.norm()
}

/// The six visibilities for a possibly mixed idler, each basis measured with
/// its own unbiased signal preparation.
pub fn analytic_visibilities_mixed(cfg: &SetupConfig) -> Result<Visibilities> {
    cfg.validate()?;
    Ok(Visibilities::from_fn(|b| unbiased_visibility(cfg, &b.vector())))
}

/// Visibility of `P(φ)` found by scanning `points` phases and polishing the
/// extremes with a golden-section search. `None` when the port is dark.
pub fn scan_visibility(
    interferometer: &Interferometer,
    k: &PolVector,
    port: Port,
    points: usize,
) -> Option<f64> {
    let f = |phi: f64| interferometer.probability(k, port, phi);
    let step = TAU / points as f64;
    let samples: Vec<f64> = (0..points).map(|i| f(i as f64 * step)).collect();
    let (imax, _) = samples
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let (imin, _) = samples
        .iter()
        .enumerate()
        .fold((0, f64::MAX), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let centre = |i: usize| i as f64 * step;
    let x_max = golden_argmin(|x| -f(x), centre(imax) - step, centre(imax) + step);
    let x_min = golden_argmin(f, centre(imin) - step, centre(imin) + step);
    let max = f(x_max).max(samples[imax]);
    let min = f(x_min).min(samples[imin]);
    (max + min > 2.0 * DARK_PORT_LEVEL).then(|| (max - min) / (max + min))
}

/// Location of the minimum of a unimodal `f` on `[lo, hi]`.
fn golden_argmin(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        x1
    } else {
        x2
    }
}

/// Idler state (idler path ⊗ idler polarization) after the signal is measured,
/// obtained by tracing the signal and the environment out of the full state.
pub fn post_measurement_state(cfg: &SetupConfig, phi: f64) -> Result<OperatorMatrix> {
    let psi = build_state(cfg, phi)?;
    partial_trace(&psi.projector(), &[IDLER_PATH, IDLER_POL])
}

/// `T²/(1+P²) ρ'_I + P²/(1+P²) 1/2 + W` assembled from the environment-reduced
/// idler polarization state, with `W` the loss-path block and its coherences
/// with path `c`.
pub fn post_measurement_closed_form(cfg: &SetupConfig) -> Result<OperatorMatrix> {
    cfg.validate()?;
    let (p, t) = (cfg.pump_ratio, cfg.transmission);
    let denom = 1.0 + p * p;
    let rho = cfg.idler.reduced_state().to_operator();
    let c = StateVector::basis("idler_path", 2, PATH_C);
    let w = StateVector::basis("idler_path", 2, PATH_W);
    let cc = OperatorMatrix::outer(&c, &c);
    let ww = OperatorMatrix::outer(&w, &w);
    let cw = OperatorMatrix::outer(&c, &w);
    let wc = OperatorMatrix::outer(&w, &c);
    let pol_id = crate::linalg::pauli::identity();
    let real = |x: f64| C64::new(x, 0.0);

    let transmitted = cc.tensor(&rho).scale(real(t * t / denom));
    let source2 = cc.tensor(&pol_id).scale(real(p * p / denom / 2.0));
    let loss = (1.0 - t * t).max(0.0);
    let w_block = ww.tensor(&rho).scale(real(loss / denom));
    let coherence = cw
        .tensor(&rho)
        .add(&wc.tensor(&rho))?
        .scale(real(t * loss.sqrt() / denom));
    transmitted.add(&source2)?.add(&w_block)?.add(&coherence)
}

/// Sum of detection probabilities over both ports and both basis states.
pub fn total_probability(interferometer: &Interferometer, k: &PolVector, phi: f64) -> f64 {
    let kp = k.orthogonal();
    [Port::Upper, Port::Lower]
        .iter()
        .map(|&port| interferometer.probability(k, port, phi) + interferometer.probability(&kp, port, phi))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{embed, CoherenceTriple};
    use crate::linalg::STRUCTURE_TOL;

    fn pure_cfg(alpha: f64, xi: f64) -> SetupConfig {
        SetupConfig::reference(IdlerPrep::coherent(
            PolarizationState::from_alpha(alpha, xi).unwrap(),
        ))
    }

    /// Max and min of `f` on a uniform grid.
    fn grid_extremes(f: impl Fn(f64) -> f64, n: usize) -> (f64, f64) {
        (0..n)
            .map(|i| f(i as f64 * TAU / n as f64))
            .fold((f64::MIN, f64::MAX), |(hi, lo), v| (hi.max(v), lo.min(v)))
    }

    #[test]
    fn beam_splitter_is_unitary_and_matches_fast_path() {
        let op = beam_splitter_operator(3);
        assert!(op.is_unitary(STRUCTURE_TOL));
        let cfg = pure_cfg(0.6, 1.0);
        let pre = q2_pair(&cfg);
        let fast = apply_beam_splitter(&pre);
        let slow = op.apply(&pre).unwrap();
        for (a, b) in fast.amplitudes().iter().zip(slow.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn single_source_limit() {
        let mut cfg = pure_cfg(0.6, 0.3);
        cfg.pump_ratio = 0.0;
        cfg.transmission = 0.7;
        let psi = build_state(&cfg, 0.4).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-14);
        // no amplitude from Q2: the post-measurement state is the Q1 idler alone
        let k = Basis::H.vector();
        let (hi, lo) = grid_extremes(|phi| detection_probability(&cfg, &k, phi).unwrap(), 16);
        assert!((hi - lo).abs() < 1e-15);
    }

    #[test]
    fn zero_transmission_is_flat() {
        let mut cfg = pure_cfg(0.6, 0.3);
        cfg.transmission = 0.0;
        let ifm = Interferometer::new(&cfg).unwrap();
        let k = Basis::D.vector();
        let (hi, lo) = grid_extremes(|phi| ifm.probability(&k, Port::Upper, phi), 32);
        assert!(hi - lo < 1e-15);
        let coeffs = coefficients(&cfg, &k).unwrap();
        assert_eq!(coeffs.visibility(&cfg), Some(0.0));
    }

    #[test]
    fn balanced_coherent_mean_is_quarter() {
        let mut cfg = pure_cfg(1.0, 0.0);
        cfg.signal = SignalPrep::balanced(0.0);
        let ifm = Interferometer::new(&cfg).unwrap();
        assert!((ifm.state(0.0).norm_sqr() - 1.0).abs() < 1e-14);
        let k = Basis::H.vector();
        let n = 64;
        let mean: f64 = (0..n)
            .map(|i| ifm.probability(&k, Port::Upper, i as f64 * TAU / n as f64))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.25).abs() < 1e-14);
    }

    #[test]
    fn probability_matches_coefficient_form() {
        let triple = CoherenceTriple::new(0.4, 0.8, 0.5, 1.3).unwrap();
        let idler = IdlerPrep::new(
            PolarizationState::from_alpha(0.7, 2.1).unwrap(),
            embed(&triple, 3).unwrap(),
        );
        let cfg = SetupConfig::new(0.8, 0.6, 0.4, SignalPrep::new(0.6, 0.8, 1.0).unwrap(), idler)
            .unwrap();
        let ifm = Interferometer::new(&cfg).unwrap();
        for b in Basis::ALL {
            let k = b.vector();
            let coeffs = coefficients(&cfg, &k).unwrap();
            for i in 0..20 {
                let phi = i as f64 * 0.31;
                let direct = ifm.probability(&k, Port::Upper, phi);
                assert!((direct - coeffs.probability(&cfg, phi)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reference_config_visibilities() {
        let cfg = pure_cfg(0.6, 0.0);
        let ifm = Interferometer::new(&cfg).unwrap();
        let vis = scan_visibility(&ifm, &Basis::H.vector(), Port::Upper, 256).unwrap();
        assert!((vis - 0.6).abs() < 1e-9);
        let vis = scan_visibility(&ifm, &Basis::V.vector(), Port::Upper, 256).unwrap();
        assert!((vis - 0.8).abs() < 1e-9);
    }

    #[test]
    fn dark_basis_state() {
        // signal all-H, idler all-H, θ arbitrary: V at the upper port only
        // receives Q2 light, so choose P = 0 to make it dark
        let mut cfg = pure_cfg(1.0, 0.0);
        cfg.pump_ratio = 0.0;
        cfg.signal = SignalPrep::new(1.0, 0.0, 0.0).unwrap();
        let k = Basis::V.vector();
        for i in 0..8 {
            assert_eq!(detection_probability(&cfg, &k, i as f64).unwrap(), 0.0);
        }
        assert_eq!(coefficients(&cfg, &k).unwrap().visibility(&cfg), None);
        assert_eq!(analytic_visibilities(&cfg).unwrap().v, None);
    }

    #[test]
    fn full_fringe_between_zero_and_half() {
        let cfg = pure_cfg(1.0, 0.0);
        let ifm = Interferometer::new(&cfg).unwrap();
        let k = Basis::H.vector();
        // dense grid oracle
        let (hi, lo) = grid_extremes(|phi| ifm.probability(&k, Port::Upper, phi), 3600);
        assert!((hi - 0.5).abs() < 1e-6 && lo.abs() < 1e-6);
    }

    #[test]
    fn unbiased_coefficients() {
        let cfg = pure_cfg(1.0, 0.0);
        let c = coefficients(&cfg, &Basis::H.vector()).unwrap();
        assert!((c.c - 0.5).abs() < 1e-15);
        let c = coefficients(&cfg, &Basis::V.vector()).unwrap();
        assert!(c.z.norm() < 1e-15);
        let mut cfg = pure_cfg(FRAC_1_SQRT_2, 0.0);
        cfg.signal = SignalPrep::unbiased_for(Basis::D);
        let c = coefficients(&cfg, &Basis::D.vector()).unwrap();
        assert!((c.z.norm() - 0.25).abs() < 1e-15);
        // z carries the −1/2 of the beam splitter
        assert!(c.z.re < 0.0);
    }

    #[test]
    fn pure_limit_of_closed_forms() {
        let cfg = pure_cfg(0.6, std::f64::consts::FRAC_PI_2);
        let vis = analytic_visibilities_mixed(&cfg).unwrap();
        assert!((vis.l - 0.98_f64.sqrt()).abs() < 1e-15);
        assert!((vis.r - 0.02_f64.sqrt()).abs() < 1e-15);
        let mut cfg_l = cfg.clone();
        cfg_l.signal = SignalPrep::unbiased_for(Basis::L);
        let general = analytic_visibilities(&cfg_l).unwrap();
        assert!((general.l.unwrap() - 0.98_f64.sqrt()).abs() < 1e-15);
        assert!((general.r.unwrap() - 0.02_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn all_h_signal_kills_v() {
        let mut cfg = pure_cfg(0.6, 0.2);
        cfg.signal = SignalPrep::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(analytic_visibilities(&cfg).unwrap().v, Some(0.0));
    }

    #[test]
    fn weak_pump_has_weak_fringes() {
        let mut cfg = pure_cfg(0.6, 0.2);
        cfg.pump_ratio = 1e-9;
        let vis = analytic_visibilities(&cfg).unwrap();
        for b in Basis::ALL {
            assert!(vis.get(b).map_or(true, |v| v < 1e-8));
        }
    }

    #[test]
    fn mixed_closed_forms() {
        let triple = CoherenceTriple::h_coherent(0.5).unwrap();
        let idler = IdlerPrep::new(
            PolarizationState::new(0.6, 0.8, 0.0).unwrap(),
            embed(&triple, 3).unwrap(),
        );
        let vis = analytic_visibilities_mixed(&SetupConfig::reference(idler)).unwrap();
        assert!((vis.h - 0.6).abs() < 1e-15);
        assert!((vis.v - 0.4).abs() < 1e-15);

        // e_H, e_V orthogonal to e_Ψ
        let triple = CoherenceTriple::new(0.3, 0.0, 0.0, 0.0).unwrap();
        let idler = IdlerPrep::new(
            PolarizationState::new(0.6, 0.8, 1.0).unwrap(),
            embed(&triple, 3).unwrap(),
        );
        let vis = analytic_visibilities_mixed(&SetupConfig::reference(idler)).unwrap();
        for b in Basis::ALL {
            assert_eq!(vis.get(b), 0.0);
        }
    }

    #[test]
    fn analytic_requires_coherent_environment() {
        let triple = CoherenceTriple::h_coherent(0.5).unwrap();
        let idler = IdlerPrep::new(
            PolarizationState::new(0.6, 0.8, 0.0).unwrap(),
            embed(&triple, 3).unwrap(),
        );
        assert!(analytic_visibilities(&SetupConfig::reference(idler)).is_err());
    }

    #[test]
    fn post_measurement_examples() {
        let cfg = pure_cfg(1.0, 0.0);
        let rho = post_measurement_state(&cfg, 0.7).unwrap();
        assert!((rho.get(0, 0).re - 0.75).abs() < 1e-12);
        assert!((rho.get(1, 1).re - 0.25).abs() < 1e-12);
        assert!(rho.get(0, 1).norm() < 1e-12);

        let mut cfg = pure_cfg(0.6, 1.2);
        cfg.pump_ratio = 0.0;
        let rho = post_measurement_state(&cfg, 2.0).unwrap();
        let pure = crate::linalg::DensityMatrix2::pure(0.6, 0.8, 1.2).unwrap().to_operator();
        for r in 0..2 {
            for c in 0..2 {
                assert!((rho.get(r, c) - pure.get(r, c)).norm() < 1e-12);
            }
        }

        let mut cfg = pure_cfg(0.6, 1.2);
        cfg.transmission = 0.0;
        let rho = post_measurement_state(&cfg, 0.3).unwrap();
        // path c: P²/(1+P²)·1/2 = 1/4 per polarization; path w weight 1/2
        assert!((rho.get(0, 0).re - 0.25).abs() < 1e-12);
        assert!((rho.get(1, 1).re - 0.25).abs() < 1e-12);
        assert!((rho.get(2, 2).re + rho.get(3, 3).re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn signal_prep_for_random_vector_is_unbiased() {
        let k = PolVector::normalized(C64::new(0.3, 0.1), C64::new(-0.5, 0.7)).unwrap();
        let sig = SignalPrep::unbiased_for_vector(&k).vector();
        assert!((sig.inner(&k).norm_sqr() - 0.5).abs() < 1e-14);
        assert!((sig.inner(&k.orthogonal()).norm_sqr() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let mut cfg = pure_cfg(0.6, 0.0);
        cfg.transmission = 1.5;
        assert!(cfg.validate().is_err());
        cfg.transmission = 1.0;
        cfg.pump_ratio = -1.0;
        assert!(Interferometer::new(&cfg).is_err());
        assert!(SignalPrep::new(0.6, 0.6, 0.0).is_err());
    }
}
