use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riskstop_core::filter::{belief_dp, POModel};
use riskstop_core::random::{random_chain, random_functional, random_table, rng};
use riskstop_core::stopping::{oracle_optimal_value, wald_bellman};
use riskstop_core::verify::check_markov;
use riskstop_core::{CompositeSpec, RiskFamily, DEFAULT_RULE_CAP};

fn entropic(n: usize) -> RiskFamily {
    RiskFamily::Entropic { gamma: vec![0.5; n] }
}

fn stopping(c: &mut Criterion) {
    let mut group = c.benchmark_group("wald_bellman");
    for (n, horizon) in [(4, 10), (16, 20), (64, 20)] {
        let mut r = rng(1);
        let chain = random_chain(&mut r, n);
        let cost = random_table(&mut r, n, 0.5, 1.5);
        let h = random_table(&mut r, n, -3.0, 3.0);
        let family = entropic(n);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{horizon}")), &(), |b, _| {
            b.iter(|| wald_bellman(&family, &chain, &cost, &h, horizon).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("oracle_optimal_value");
    for (n, horizon) in [(2, 3), (3, 2), (2, 4)] {
        let mut r = rng(2);
        let chain = random_chain(&mut r, n);
        let cost = random_table(&mut r, n, 0.5, 1.5);
        let h = random_table(&mut r, n, -3.0, 3.0);
        let family = RiskFamily::AverageValueAtRisk { lambda: 0.3 };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{horizon}")), &(), |b, _| {
            b.iter(|| {
                oracle_optimal_value(&family, &chain, &cost, &h, 0, horizon, DEFAULT_RULE_CAP).unwrap()
            })
        });
    }
    group.finish();
}

fn markov(c: &mut Criterion) {
    let mut group = c.benchmark_group("check_markov");
    for (n, horizon) in [(3, 4), (5, 5)] {
        let mut r = rng(3);
        let chain = random_chain(&mut r, n);
        let z = random_functional(&mut r, n, horizon - 1);
        let family = RiskFamily::AverageValueAtRisk { lambda: 0.3 };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{horizon}")), &(), |b, _| {
            b.iter(|| check_markov(&family, &chain, &z, 1, horizon, 1e-9).unwrap())
        });
    }
    group.finish();
}

fn filter(c: &mut Criterion) {
    let mut group = c.benchmark_group("belief_dp");
    for (ny, nx, horizon) in [(2, 2, 4), (3, 3, 5)] {
        let mut r = rng(4);
        let kernels = (0..nx).map(|_| random_chain(&mut r, ny).kernel().to_vec()).collect();
        let prior = (0..ny).map(|_| random_chain(&mut r, nx).row(0).to_vec()).collect();
        let h = (0..ny).map(|_| random_table(&mut r, nx, -3.0, 3.0)).collect();
        let model = POModel::new(
            (0..ny).map(|y| format!("y{y}")).collect(),
            (0..nx).map(|x| format!("p{x}")).collect(),
            kernels,
            prior,
            h,
            CompositeSpec::entropic(vec![0.5; ny]),
            horizon,
        )
        .unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{ny}x{nx}x{horizon}")),
            &(),
            |b, _| b.iter(|| belief_dp(&model, DEFAULT_RULE_CAP).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, stopping, markov, filter);
criterion_main!(benches);
