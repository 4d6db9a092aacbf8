use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use vcox::likelihood::{expand_design, gradient, hessian_vector, neg_log_pl, standardize};
use vcox::survival::simulate;
use vcox::{fit, FitOptions, OrthoBasis, PenaltyKind, PenaltySpec, TruthSpec};

fn designs() -> Vec<(&'static str, vcox::DesignExpansion)> {
    let basis = OrthoBasis::new(6, 3).unwrap();
    let mut tv = TruthSpec::null(vcox::Family::TimeVarying, 50, 8);
    tv.functions[0] = vcox::GFunction::Const(1.0);
    tv.censor_rate = 0.3;
    [
        ("index-vc", TruthSpec::index_vc_table(400, 8)),
        ("additive", TruthSpec::additive_table(400, 8)),
        ("time-varying", tv),
    ]
    .into_iter()
    .map(|(name, t)| {
        let data = simulate(&t, 300, 1, 0).unwrap();
        (name, expand_design(&data, &basis).unwrap())
    })
    .collect()
}

fn likelihood(c: &mut Criterion) {
    let mut g = c.benchmark_group("likelihood");
    for (name, d) in designs() {
        let x = d.layout().zeros().mapv(|_| 0.01);
        g.bench_with_input(BenchmarkId::new("value", name), &d, |b, d| b.iter(|| neg_log_pl(d, x.view()).unwrap()));
        g.bench_with_input(BenchmarkId::new("gradient", name), &d, |b, d| b.iter(|| gradient(d, x.view()).unwrap()));
        g.bench_with_input(BenchmarkId::new("hessian_vector", name), &d, |b, d| {
            b.iter(|| hessian_vector(d, x.view(), x.view()).unwrap())
        });
    }
    g.finish();
}

fn fitting(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    for (name, d) in designs().into_iter().take(2) {
        let (sd, _) = standardize(&d).unwrap();
        let spec = PenaltySpec::new(PenaltyKind::P1, 0.1);
        g.bench_function(name, |b| b.iter(|| fit(&sd, &spec, &FitOptions::default()).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, likelihood, fitting);
criterion_main!(benches);
