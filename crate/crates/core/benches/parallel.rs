//! Same workloads on a one-thread pool and on the default pool. Build with
//! `--no-default-features` to time the plain sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dynoid::datagen::{generate_tank_dataset, TankDataConfig};
use dynoid::diagnostics::{check_error_bound, BoundCheckConfig};
use dynoid::nn::Activation;
use dynoid::regressor::{evaluate_rollout, regression_loss, RegressorModel, StateMapSpec};
use dynoid::systems::{Tank, TankParams};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("1-thread", one), ("default", all)]
}

fn bench(c: &mut Criterion) {
    let data_cfg = TankDataConfig::default();
    let ds = generate_tank_dataset(&data_cfg, 0).unwrap();
    let spec = StateMapSpec::new(10, 1, 1).unwrap();
    let model = RegressorModel::new(spec, &[64, 64], Activation::Tanh, ds.normalization.clone(), 0).unwrap();
    let bound_cfg = BoundCheckConfig {
        n_trials: 20,
        constant_samples: 10_000,
        ..BoundCheckConfig::default()
    };
    let tank = Tank {
        params: TankParams::default(),
    };

    let mut g = c.benchmark_group("tank");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("generate", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| generate_tank_dataset(&data_cfg, 0).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("rollout_eval", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| evaluate_rollout(&model, &ds.train, 100).unwrap().mean_mse()))
        });
        g.bench_with_input(BenchmarkId::new("loss", name), &pool, |b, pool| {
            b.iter(|| {
                pool.install(|| {
                    dynoid::exec::map(&ds.train, |t| regression_loss(&model, t, 10.0).unwrap())
                        .iter()
                        .sum::<f64>()
                })
            })
        });
        g.bench_with_input(BenchmarkId::new("bound_check", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| check_error_bound(&tank, &bound_cfg, 0).unwrap().satisfied_fraction))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
