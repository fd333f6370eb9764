mod common;

use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vistomo_core::environment::{
    check_feasible, embed, solve_q_2d, CoherenceTriple, EnvironmentVectors, DEFAULT_ENV_DIM,
};
use vistomo_core::fringes::{fit, sweep, PhaseGrid};
use vistomo_core::interferometer::{
    coefficients, post_measurement_closed_form, post_measurement_state, total_probability,
    IdlerPrep, Interferometer, Port, SetupConfig, SignalPrep,
};
use vistomo_core::linalg::{expectation, fidelity, partial_trace, pauli};
use vistomo_core::operators::{incoherence_operator, stokes_operators, visibility_operator};
use vistomo_core::reconstruct::{enumerate_consistent_states, reconstruct_pure};
use vistomo_core::stokes::{
    bounds_check, consistency_ball, standard_stokes, visibility_ellipsoid, visibility_stokes,
    BlochVector,
};
use vistomo_core::{
    Basis, DensityMatrix2, OperatorMatrix, PolVector, PolarizationState, StateVector, Subsystem,
    Visibilities, C64,
};

fn phase() -> impl Strategy<Value = f64> {
    0.0..TAU
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0
}

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0, -1.0..1.0).prop_map(|(re, im)| C64::new(re, im))
}

fn state_vector(label: &'static str, dim: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(complex(), dim)
        .prop_filter("nonzero", |v| v.iter().any(|c| c.norm() > 1e-3))
        .prop_map(move |v| {
            let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            StateVector::single(label, v.into_iter().map(|c| c / n).collect())
        })
}

fn pol_vector() -> impl Strategy<Value = PolVector> {
    (complex(), complex())
        .prop_filter("nonzero", |(a, b)| a.norm() + b.norm() > 1e-3)
        .prop_map(|(a, b)| PolVector::normalized(a, b).unwrap())
}

fn pure_state() -> impl Strategy<Value = PolarizationState> {
    (unit(), phase()).prop_map(|(a, xi)| PolarizationState::from_alpha(a, xi).unwrap())
}

fn feasible_triple() -> impl Strategy<Value = CoherenceTriple> {
    (unit(), unit(), unit(), phase())
        .prop_map(|(q, mh, mv, d)| CoherenceTriple::new(q, mh, mv, d).unwrap())
        .prop_filter("feasible", |t| t.slack() >= 0.0)
}

fn any_triple() -> impl Strategy<Value = CoherenceTriple> {
    (unit(), unit(), unit(), phase())
        .prop_map(|(q, mh, mv, d)| CoherenceTriple::new(q, mh, mv, d).unwrap())
}

fn signal() -> impl Strategy<Value = SignalPrep> {
    (unit(), phase()).prop_map(|(d, z)| SignalPrep::new(d, (1.0 - d * d).sqrt(), z).unwrap())
}

fn setup() -> impl Strategy<Value = SetupConfig> {
    (0.0..2.0, unit(), phase(), signal(), pure_state(), feasible_triple()).prop_map(
        |(p, t, theta, sig, state, triple)| {
            let env = embed(&triple, DEFAULT_ENV_DIM).unwrap();
            SetupConfig::new(p, t, theta, sig, IdlerPrep::new(state, env)).unwrap()
        },
    )
}

fn mixed_reference() -> impl Strategy<Value = SetupConfig> {
    (pure_state(), feasible_triple(), 0.2..=1.0).prop_map(|(state, triple, t)| {
        let env = embed(&triple, DEFAULT_ENV_DIM).unwrap();
        let mut cfg = SetupConfig::reference(IdlerPrep::new(state, env));
        cfg.transmission = t;
        cfg
    })
}

fn density() -> impl Strategy<Value = DensityMatrix2> {
    (-1.0..1.0, -1.0..1.0, -1.0..1.0, unit()).prop_map(|(x, y, z, len)| {
        let n = ((x * x + y * y + z * z) as f64).sqrt().max(1e-9);
        let s = len / n;
        DensityMatrix2::from_bloch(x * s, y * s, z * s).unwrap()
    })
}

/// `(Tr √(√ρ σ √ρ))²` through eigendecompositions.
fn uhlmann_oracle(rho: &DensityMatrix2, sigma: &DensityMatrix2) -> f64 {
    use nalgebra::Matrix2;
    let to_na = |m: &DensityMatrix2| {
        let e = m.entries();
        Matrix2::new(e[0][0], e[0][1], e[1][0], e[1][1])
    };
    let sqrt_psd = |m: Matrix2<C64>| {
        let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let d = eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
        eig.eigenvectors * Matrix2::from_diagonal(&d) * eig.eigenvectors.adjoint()
    };
    let sr = sqrt_psd(to_na(rho));
    let inner = sqrt_psd(sr * to_na(sigma) * sr);
    inner.trace().re.powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ---- linear algebra kernel ----

    #[test]
    fn tensor_is_associative(
        a in state_vector("a", 2),
        b in state_vector("b", 3),
        c in state_vector("c", 2),
    ) {
        let left = a.tensor(&b).tensor(&c);
        let right = a.tensor(&b.tensor(&c));
        for (x, y) in left.amplitudes().iter().zip(right.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn partial_trace_preserves_trace(a in state_vector("a", 2), b in state_vector("b", 3)) {
        let rho = a.tensor(&b).projector();
        for keep in [vec![0], vec![1], vec![]] {
            let reduced = partial_trace(&rho, &keep).unwrap();
            prop_assert!((reduced.trace() - rho.trace()).norm() < 1e-12);
        }
        let all = partial_trace(&rho, &[0, 1]).unwrap();
        prop_assert!(all.max_abs_diff(&rho) < 1e-15);
        let first = partial_trace(&rho, &[0]).unwrap();
        prop_assert!(first.max_abs_diff(&a.projector()) < 1e-12);
    }

    #[test]
    fn projector_expectation_in_unit_interval(k in state_vector("p", 4), psi in state_vector("p", 4)) {
        let e = expectation(&k.projector(), &psi).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&e));
    }

    #[test]
    fn fidelity_matches_eigen_oracle(rho in density(), sigma in density()) {
        let f = fidelity(&rho, &sigma);
        prop_assert!((f - uhlmann_oracle(&rho, &sigma)).abs() < 1e-9);
        prop_assert!((f - fidelity(&sigma, &rho)).abs() < 1e-12);
        prop_assert!((fidelity(&rho, &rho) - 1.0).abs() < 1e-12);
    }

    // ---- environment ----

    #[test]
    fn embedding_reproduces_triple(t in feasible_triple(), extra in 0usize..3) {
        let env = embed(&t, DEFAULT_ENV_DIM + extra).unwrap();
        let back = env.triple();
        prop_assert!((back.q - t.q).abs() < 1e-10);
        prop_assert!((back.m_h - t.m_h).abs() < 1e-10);
        prop_assert!((back.m_v - t.m_v).abs() < 1e-10);
        if t.m_h > 1e-6 && t.m_v > 1e-6 {
            let d = (back.delta_phi - t.delta_phi).rem_euclid(TAU);
            prop_assert!(d.min(TAU - d) < 1e-8);
        }
    }

    #[test]
    fn feasible_iff_embeddable(t in any_triple()) {
        let feasible = check_feasible(&t).unwrap().feasible;
        prop_assert_eq!(feasible, embed(&t, DEFAULT_ENV_DIM).is_ok());
    }

    #[test]
    fn feasible_region_shrinks_with_phase(t in feasible_triple(), other in phase()) {
        let moved = CoherenceTriple { delta_phi: other, ..t };
        if other.cos() >= t.delta_phi.cos() {
            prop_assert!(check_feasible(&moved).unwrap().feasible);
        }
    }

    #[test]
    fn q_roots_sit_on_the_boundary(m_h in unit(), m_v in unit()) {
        let roots = solve_q_2d(m_h, m_v).unwrap();
        for q in [roots.plus, roots.minus].into_iter().flatten() {
            let slack = CoherenceTriple::new(q, m_h, m_v, 0.0).unwrap().slack();
            prop_assert!(slack.abs() < 1e-10);
        }
    }

    // ---- interferometer ----

    #[test]
    fn probability_is_conserved(cfg in setup(), k in pol_vector(), phi in phase()) {
        let ifm = Interferometer::new(&cfg).unwrap();
        prop_assert!((ifm.state(phi).norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!((total_probability(&ifm, &k, phi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coefficient_form_matches_state(cfg in setup(), k in pol_vector(), phi in phase()) {
        let ifm = Interferometer::new(&cfg).unwrap();
        let c = coefficients(&cfg, &k).unwrap();
        prop_assert!((ifm.probability(&k, Port::Upper, phi) - c.probability(&cfg, phi)).abs() < 1e-12);
        prop_assert!(c.c >= 2.0 * cfg.pump_ratio * cfg.transmission * c.z.norm() - 1e-12);
    }

    #[test]
    fn probabilities_ignore_q_at_fixed_source_overlaps(
        cfg in setup(), k in pol_vector(), phi in phase(), u in unit(),
    ) {
        let t = cfg.idler.env.triple();
        let c = t.m_h * t.m_v * t.delta_phi.cos();
        let disc = (c * c + 1.0 - t.m_h * t.m_h - t.m_v * t.m_v).max(0.0).sqrt();
        let (lo, hi) = ((c - disc).max(0.0), (c + disc).min(1.0));
        prop_assume!(hi > lo);
        let other = CoherenceTriple { q: lo + u * (hi - lo), ..t };
        let Ok(env) = embed(&other, DEFAULT_ENV_DIM) else { return Ok(()) };
        let moved = SetupConfig { idler: IdlerPrep::new(cfg.idler.state, env), ..cfg.clone() };
        let p0 = Interferometer::new(&cfg).unwrap().probability(&k, Port::Upper, phi);
        let p1 = Interferometer::new(&moved).unwrap().probability(&k, Port::Upper, phi);
        prop_assert!((p0 - p1).abs() < 1e-12);
    }

    #[test]
    fn probabilities_ignore_environment_unitaries(
        cfg in setup(), k in pol_vector(), phi in phase(),
        v in prop::collection::vec(complex(), DEFAULT_ENV_DIM), g in phase(),
    ) {
        // Householder reflection times a global phase
        let norm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        prop_assume!(norm2 > 1e-6);
        let env = &cfg.idler.env;
        let apply = |x: &[C64]| -> Vec<C64> {
            let proj: C64 = v.iter().zip(x).map(|(a, b)| a.conj() * b).sum();
            x.iter().zip(&v).map(|(xi, vi)| (xi - vi * proj * (2.0 / norm2)) * C64::from_polar(1.0, g)).collect()
        };
        let rotated = EnvironmentVectors::from_vectors(apply(env.e_h()), apply(env.e_v()), apply(env.e_psi())).unwrap();
        let moved = SetupConfig { idler: IdlerPrep::new(cfg.idler.state, rotated), ..cfg.clone() };
        let p0 = Interferometer::new(&cfg).unwrap().probability(&k, Port::Upper, phi);
        let p1 = Interferometer::new(&moved).unwrap().probability(&k, Port::Upper, phi);
        prop_assert!((p0 - p1).abs() < 1e-12);
    }

    #[test]
    fn post_measurement_is_phase_independent(cfg in setup(), phi in phase()) {
        let a = post_measurement_state(&cfg, 0.0).unwrap();
        let b = post_measurement_state(&cfg, phi).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
        prop_assert!(b.max_abs_diff(&post_measurement_closed_form(&cfg).unwrap()) < 1e-12);
    }

    #[test]
    fn random_basis_sum_rule(cfg in mixed_reference(), k in pol_vector()) {
        let grid = PhaseGrid::uniform(16);
        let vk = common::fitted_visibility(&cfg, &k, &grid);
        let vkp = common::fitted_visibility(&cfg, &k.orthogonal(), &grid);
        let vh = common::fitted_visibility(&cfg, &Basis::H.vector(), &grid);
        let vv = common::fitted_visibility(&cfg, &Basis::V.vector(), &grid);
        prop_assert!((vk * vk + vkp * vkp - (vh * vh + vv * vv)).abs() < 1e-10);
    }

    // ---- fringes ----

    #[test]
    fn fit_is_invariant_under_grid_rotation(cfg in setup(), k in pol_vector(), shift in 0usize..64) {
        let rec = sweep(&cfg, &k, "k", &PhaseGrid::default(), None).unwrap();
        let (Ok(a), Ok(b)) = (fit(&rec), fit(&rec.rotated(shift))) else { return Ok(()) };
        prop_assert!((a.a - b.a).abs() < 1e-12);
        prop_assert!((a.b - b.b).abs() < 1e-12);
        prop_assert!((a.c - b.c).abs() < 1e-12);
        prop_assert!((a.visibility - b.visibility).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_coefficient_visibility(cfg in setup(), k in pol_vector()) {
        let c = coefficients(&cfg, &k).unwrap();
        let rec = sweep(&cfg, &k, "k", &PhaseGrid::default(), None).unwrap();
        if let Some(v) = c.visibility(&cfg) {
            if c.c > 1e-6 {
                prop_assert!((fit(&rec).unwrap().visibility - v).abs() < 1e-9);
            }
        }
    }

    // ---- stokes ----

    #[test]
    fn stokes_identities_and_geometry(cfg in mixed_reference()) {
        let vis = common::simulated_visibilities(&cfg, &PhaseGrid::uniform(16));
        let s = visibility_stokes(&vis).unwrap();
        prop_assert!(s.norm_defect().abs() < 1e-10);
        prop_assert!(vistomo_core::stokes::identities_check(&vis).max_abs() < 1e-10);
        // geometry is stated for T = 1
        let t2 = cfg.transmission * cfg.transmission;
        let s = vistomo_core::stokes::VisibilityStokes::new(s.s0 / t2, s.sx / t2, s.sy / t2, s.sz / t2);
        let rho = cfg.idler.reduced_state();
        let r = standard_stokes(&rho).unwrap();
        let report = bounds_check(&r, &s);
        prop_assert!(report.all_ok(), "{:?}", report);
        prop_assert!(visibility_ellipsoid(&r).contains(s.vector(), 1e-10));
        if s.s0 > 0.0 {
            prop_assert!(consistency_ball(&s).contains(&r, 1e-10));
        }
    }

    #[test]
    fn ball_touch_point_reproduces_itself(cfg in mixed_reference()) {
        let vis = Visibilities::from_fn(|b| vistomo_core::interferometer::unbiased_visibility(
            &SetupConfig { transmission: 1.0, ..cfg.clone() }, &b.vector()));
        let s = visibility_stokes(&vis).unwrap();
        prop_assume!(s.s0 > 1e-6);
        let touch = consistency_ball(&s).touch.unwrap();
        let pure = SetupConfig::reference(IdlerPrep::coherent(touch));
        let back = visibility_stokes(&Visibilities::from_fn(|b| {
            vistomo_core::interferometer::unbiased_visibility(&pure, &b.vector())
        })).unwrap();
        prop_assert!((back.s0 - 1.0).abs() < 1e-10);
        let norm = s.vector_norm();
        for (a, b) in back.vector().iter().zip(s.vector()) {
            prop_assert!((a - b / norm).abs() < 1e-9);
        }
    }

    // ---- reconstruct ----

    #[test]
    fn pure_round_trip(state in pure_state()) {
        let cfg = SetupConfig::reference(IdlerPrep::coherent(state));
        let vis = common::simulated_visibilities(&cfg, &PhaseGrid::uniform(16));
        let rec = reconstruct_pure(&visibility_stokes(&vis).unwrap(), 1e-6).unwrap();
        let truth = DensityMatrix2::pure(state.alpha, state.beta, state.xi).unwrap();
        prop_assert!(fidelity(&rec.rho, &truth) >= 1.0 - 1e-9);
    }

    #[test]
    fn enumerated_states_lie_in_the_ball(cfg in mixed_reference(), seed in any::<u64>()) {
        let cfg = SetupConfig { transmission: 1.0, ..cfg };
        let vis = vistomo_core::interferometer::analytic_visibilities_mixed(&cfg).unwrap();
        let s = visibility_stokes(&vis).unwrap();
        let ball = consistency_ball(&s);
        for found in enumerate_consistent_states(&s, 10, seed).unwrap() {
            prop_assert!(ball.contains(&found.bloch(), 1e-10));
        }
    }

    // ---- operators ----

    #[test]
    fn operator_completeness(t in feasible_triple(), k in pol_vector(), tr in unit()) {
        let env = embed(&t, DEFAULT_ENV_DIM).unwrap();
        let s0 = stokes_operators(&env, tr).s0;
        let sum = visibility_operator(&k, &env, tr, "k").matrix
            .add(&visibility_operator(&k.orthogonal(), &env, tr, "kp").matrix).unwrap();
        prop_assert!(sum.max_abs_diff(&s0) < 1e-12);
        let unit_op = visibility_operator(&k, &env, 1.0, "k").matrix;
        prop_assert!(unit_op.is_hermitian(1e-12) && unit_op.is_projector(1e-12));
        prop_assert!(incoherence_operator(&env, 1.0).is_projector(1e-12));
    }

    #[test]
    fn operator_expectations_match_overlaps(cfg in mixed_reference(), k in pol_vector()) {
        let t = cfg.transmission;
        let op = visibility_operator(&k, &cfg.idler.env, t, "k").matrix;
        let e = expectation(&op, &cfg.idler.joint_state()).unwrap();
        let v = common::overlap_visibility(&cfg.idler, t, &k);
        prop_assert!((e - v * v).abs() < 1e-12);
    }
}

#[test]
fn unitaries_built_here_are_unitary() {
    let h = pauli::hadamard("p");
    assert!(h.is_unitary(1e-12));
    let bs = vistomo_core::interferometer::beam_splitter_operator(DEFAULT_ENV_DIM);
    assert!(bs.is_unitary(1e-12));
    let id = OperatorMatrix::identity(vec![Subsystem::new("x", 3)]);
    assert!(id.is_unitary(1e-12));
}

#[test]
fn geometry_survey_with_random_environments() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rho = DensityMatrix2::mixed(0.6, 0.8, 0.4, 1.0).unwrap();
    let r = BlochVector::from_array(rho.bloch()).unwrap();
    let state = PolarizationState::new(0.6, 0.8, 1.0).unwrap();
    let mut survey = vistomo_core::stokes::GeometrySurvey::default();
    for _ in 0..2000 {
        let env = EnvironmentVectors::random_for_q(0.4, DEFAULT_ENV_DIM, &mut rng).unwrap();
        let cfg = SetupConfig::reference(IdlerPrep::new(state, env));
        let vis = vistomo_core::interferometer::analytic_visibilities_mixed(&cfg).unwrap();
        survey.record(&bounds_check(&r, &visibility_stokes(&vis).unwrap()));
    }
    assert_eq!(survey.violations(), 0, "{survey:?}");
}
