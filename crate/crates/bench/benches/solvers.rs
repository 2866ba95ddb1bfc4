use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kamtori::fourier::{solve_cohomology_constant, CohomologyOptions, FourierSeries, Grid, RotationVector};
use kamtori::noncst::{solve_doubling_contractive, DoublingOptions, Regime, TwoSidedEquation};
use kamtori::splitting::{newton_projection_step, solve_stable, split_error, Cocycle, SplittingOptions};
use kamtori::torus::{invariance_residual, newton_center_step, TorusOptions};
use kamtori::whisker::{order_by_order, solve_bundle_and_multiplier, Branch};
use kamtori_bench::{pendulum_torus, standard_torus};

fn cohomology(c: &mut Criterion) {
    let mut g = c.benchmark_group("cohomology");
    let omega = RotationVector::golden().omega;
    for p in [10, 14, 18] {
        let n = 1usize << p;
        let grid = Grid::circle(n).unwrap();
        let eta = FourierSeries::from_fn(&grid, 1, 1, |t, o| o[0] = (2.0 * std::f64::consts::PI * t[0]).sin().exp() - 1.2660658777520082);
        let eta = eta.zero_average();
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &eta, |b, eta| {
            b.iter(|| solve_cohomology_constant(eta, &omega, &CohomologyOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn center_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("newton_center_step");
    g.sample_size(10);
    let opts = TorusOptions::default();
    for p in [10, 12, 14] {
        let n = 1usize << p;
        let (model, t) = standard_torus(0.3, 1024);
        let t = t.resampled(&Grid::circle(n).unwrap()).unwrap();
        let model = model.with_epsilon(0.31);
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| b.iter(|| newton_center_step(t, &model, &opts).unwrap()));
    }
    g.finish();
}

fn residual(c: &mut Criterion) {
    let (model, t) = standard_torus(0.5, 4096);
    c.bench_function("invariance_residual/4096", |b| b.iter(|| invariance_residual(&t, &model).unwrap()));
}

fn doubling(c: &mut Criterion) {
    let mut g = c.benchmark_group("doubling_contractive");
    let omega = RotationVector::golden().omega;
    for n in [256, 4096] {
        let grid = Grid::circle(n).unwrap();
        let a = FourierSeries::from_fn(&grid, 2, 2, |t, o| {
            let x = 2.0 * std::f64::consts::PI * t[0];
            o.copy_from_slice(&[2.0 + 0.1 * x.cos(), 0.2, 0.0, 2.5 + 0.1 * x.sin()]);
        });
        let b = FourierSeries::constant(&grid, 2, 2, &[0.8, 0.0, 0.1, 0.9]);
        let eta = FourierSeries::from_fn(&grid, 2, 2, |t, o| o.fill((2.0 * std::f64::consts::PI * t[0]).cos()));
        let eq = TwoSidedEquation::new(a, b, eta, &omega, Regime::Contractive);
        g.bench_with_input(BenchmarkId::from_parameter(n), &eq, |bch, eq| {
            bch.iter(|| solve_doubling_contractive(eq, &DoublingOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn splitting(c: &mut Criterion) {
    let (model, t, split) = pendulum_torus(0.05, 512);
    let cocycle = Cocycle::from_torus(&t, &model);
    let opts = SplittingOptions::default();
    c.bench_function("projection_step/512", |b| b.iter(|| newton_projection_step(&split, &cocycle, &opts).unwrap()));

    let perturbed = model.with_epsilon(0.06);
    let e = invariance_residual(&t, &perturbed).unwrap();
    let parts = split_error(&e, &split, &t.omega.omega).unwrap();
    c.bench_function("solve_stable/512", |b| {
        b.iter(|| solve_stable(&parts.stable, &cocycle, &split, &opts.doubling).unwrap())
    });
}

fn whisker(c: &mut Criterion) {
    let mut g = c.benchmark_group("order_by_order");
    g.sample_size(10);
    let (model, t, split) = pendulum_torus(0.05, 256);
    let bundle = solve_bundle_and_multiplier(&t, &split, Branch::Stable, &model, 1.0, &CohomologyOptions::default()).unwrap();
    for order in [4, 10] {
        g.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &order| {
            b.iter(|| order_by_order(&t, &bundle.w1, bundle.mu.mu, &model, order, 0.1).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, cohomology, center_step, residual, doubling, splitting, whisker);
criterion_main!(benches);
