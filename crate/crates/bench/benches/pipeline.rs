use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vistomo_bench::mixed_setup;
use vistomo_core::environment::DEFAULT_ENV_DIM;
use vistomo_core::fringes::{fit, sweep, PhaseGrid};
use vistomo_core::reconstruct::reconstruct_symmetric;
use vistomo_core::stokes::visibility_stokes;
use vistomo_core::{
    build_state, embed, Basis, CoherenceTriple, IdlerPrep, PolarizationState, SetupConfig,
    SignalPrep, Visibilities,
};

fn bench_build_state(c: &mut Criterion) {
    let cfg = mixed_setup();
    c.bench_function("build_state", |b| {
        b.iter(|| build_state(black_box(&cfg), black_box(0.7)).unwrap())
    });
}

fn bench_fit(c: &mut Criterion) {
    let cfg = mixed_setup();
    let rec = sweep(&cfg, &Basis::D.vector(), "D", &PhaseGrid::default(), None).unwrap();
    c.bench_function("fit_64", |b| b.iter(|| fit(black_box(&rec)).unwrap()));
}

fn bench_embed(c: &mut Criterion) {
    let t = CoherenceTriple::new(0.4, 0.7, 0.6, 0.5).unwrap();
    c.bench_function("embed", |b| {
        b.iter(|| embed(black_box(&t), DEFAULT_ENV_DIM).unwrap())
    });
}

fn bench_pipeline(c: &mut Criterion) {
    let env = vistomo_core::EnvironmentVectors::symmetric(0.5, DEFAULT_ENV_DIM).unwrap();
    let state = PolarizationState::from_alpha(0.6, 0.9).unwrap();
    let cfg = SetupConfig::reference(IdlerPrep::new(state, env));
    let grid = PhaseGrid::default();
    c.bench_function("sweep_fit_reconstruct", |b| {
        b.iter(|| {
            let vis = Visibilities::try_from_fn(|k| {
                let run = cfg.with_signal(SignalPrep::unbiased_for(k));
                Ok(fit(&sweep(&run, &k.vector(), k.as_str(), &grid, None)?)?.visibility)
            })
            .unwrap();
            reconstruct_symmetric(&visibility_stokes(&vis).unwrap(), 1e-6).unwrap()
        })
    });
}

criterion_group!(benches, bench_build_state, bench_fit, bench_embed, bench_pipeline);
criterion_main!(benches);
