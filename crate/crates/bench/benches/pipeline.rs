use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spikectrl_core::hjb::{self, GridSpec};
use spikectrl_core::mceval::{self, EvalParams};
use spikectrl_core::model::Model;
use spikectrl_core::prior::Prior;
use spikectrl_core::sim::{self, LambdaChoice, SimParams};
use spikectrl_core::ZeroPolicy;

fn bump() -> Prior {
    Prior::from_atoms(&[(0.0, 1.0), (0.25, 2.0), (0.5, 4.0), (0.75, 2.0), (1.0, 1.0)]).unwrap()
}

fn posterior_moments(c: &mut Criterion) {
    let prior = Prior::from_density(|_| 1.0, (0.0, 2.0), 64).unwrap();
    c.bench_function("posterior_variance_sweep_64_nodes", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for n in 0..10u32 {
                for k in 0..50 {
                    acc += prior.posterior_variance(n, k as f64 * 0.1).unwrap();
                }
            }
            acc
        })
    });
}

fn desk_spec(ny: usize, nz: usize, nt: usize) -> GridSpec {
    GridSpec {
        horizon: 1.0,
        nt,
        y_min: -1.0,
        y_max: 1.0,
        ny,
        z_max: 2.0,
        nz,
        n_max: 4,
        gamma_max: 2.0,
        control_points: 81,
        kappa: 1.0,
    }
}

fn hjb_solve(c: &mut Criterion) {
    let model = Model::builtin("const_unit").unwrap();
    let prior = Prior::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
    let mut group = c.benchmark_group("hjb_solve");
    group.sample_size(10);
    for (ny, nz, nt) in [(21, 21, 80), (41, 41, 160)] {
        let spec = desk_spec(ny, nz, nt);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{ny}x{nz}x{nt}")),
            &spec,
            |b, spec| b.iter(|| hjb::solve(&model, &prior, spec).unwrap()),
        );
    }
    group.finish();
}

fn simulate_paths(c: &mut Criterion) {
    let model = Model::builtin("ou_exp").unwrap();
    let prior = bump();
    let charge = |_t: f64, y: f64, _z: f64, _n: u32| (1.2 - y).clamp(0.0, 2.0);
    let params = SimParams {
        horizon: 2.5,
        dt_record: 0.01,
        dt_flow: 0.002,
        y0: 0.0,
        lambda: LambdaChoice::Fixed(1.0),
        seed: 1,
        stream: 0,
    };
    c.bench_function("simulate_20_paths_ou_exp", |b| {
        b.iter(|| sim::simulate_batch(&model, &prior, &charge, &params, 20).unwrap())
    });
}

fn mc_evaluate(c: &mut Criterion) {
    let model = Model::builtin("const_unit").unwrap();
    let prior = Prior::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
    let params = EvalParams {
        t0: 0.0,
        y0: 0.0,
        z0: 0.0,
        n0: 0,
        horizon: 1.0,
        kappa: 1.0,
        paths: 1000,
        dt_flow: 0.005,
        seed: 1,
    };
    c.bench_function("mceval_1000_paths_zero_policy", |b| {
        b.iter(|| mceval::evaluate(&model, &prior, &ZeroPolicy, &params).unwrap())
    });
}

criterion_group!(
    benches,
    posterior_moments,
    hjb_solve,
    simulate_paths,
    mc_evaluate
);
criterion_main!(benches);
