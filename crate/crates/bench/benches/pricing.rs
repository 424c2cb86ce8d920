use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rouvol::{
    fit, put_price, split_dataset, CfEvaluator, KernelParams, MarketState, OptionSpec,
    QuadratureConfig, StableParams, SubordinatorParams, TrainConfig, TrainingRow, DEFAULT_DELTA,
};

fn table6() -> (SubordinatorParams, KernelParams, StableParams, MarketState) {
    (
        SubordinatorParams::new(0.049762, 0.849782, 0.8575).unwrap(),
        KernelParams::new(0.769302, 7.798968, DEFAULT_DELTA).unwrap(),
        StableParams::new(1.715, 0.01).unwrap(),
        MarketState::new(0.1793 * 0.1793, 0.0, 0.0).unwrap(),
    )
}

fn bench_kernel(c: &mut Criterion) {
    let (_, kp, _, _) = table6();
    c.bench_function("kernel_h_avg", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 1..=256 {
                acc += rouvol::kernel::kernel_h_avg(black_box(i as f64 * 0.004), &kp).unwrap();
            }
            acc
        })
    });
}

fn bench_cf(c: &mut Criterion) {
    let (sp, kp, stp, ms) = table6();
    let qc = QuadratureConfig::bulk();
    let ev = CfEvaluator::new(&sp, &kp, &stp, &ms, 48.0 / 365.0, 0.0, &qc).unwrap();
    c.bench_function("cf_eval_series", |b| {
        b.iter(|| ev.eval(black_box(3.7)).unwrap())
    });
    let fast = QuadratureConfig::default();
    let evf = CfEvaluator::new(&sp, &kp, &stp, &ms, 48.0 / 365.0, 0.0, &fast).unwrap();
    c.bench_function("cf_eval_fast", |b| {
        b.iter(|| evf.eval(black_box(3.7)).unwrap())
    });
}

fn bench_price(c: &mut Criterion) {
    let (sp, kp, stp, ms) = table6();
    let qc = QuadratureConfig::bulk();
    let spec = OptionSpec::new(0.17, 48.0 / 365.0).unwrap();
    c.bench_function("put_price_bulk", |b| {
        b.iter(|| put_price(black_box(&spec), &sp, &kp, &stp, &ms, 0.0, &qc).unwrap())
    });
}

fn bench_surrogate(c: &mut Criterion) {
    // tiny synthetic fit; benches the forward pass, not training quality
    let mut rows = Vec::new();
    for i in 0..40 {
        let a = i as f64 * 0.1;
        for &k in &[0.1, 0.17, 0.24] {
            for &t in &[48.0 / 365.0, 100.0 / 365.0] {
                rows.push(TrainingRow {
                    a,
                    b: 1.0,
                    c: 0.8575,
                    d: 0.77,
                    kappa: 7.8,
                    r: 0.0,
                    t,
                    strike: k,
                    price: 0.02 + 0.01 * a + 0.1 * k,
                });
            }
        }
    }
    let (train, val, _) = split_dataset(&rows, (0.8, 0.1, 0.1), 1).unwrap();
    let cfg = TrainConfig { max_epochs: 20, batch_size: 64, seed: 2, ..Default::default() };
    let model = fit(&train, &val, &cfg).unwrap();
    let feats = [1.3, 1.0, 0.8575, 0.77, 7.8, 0.0, 48.0 / 365.0, 0.17];
    c.bench_function("surrogate_predict_one", |b| {
        b.iter(|| model.predict_one(black_box(&feats)))
    });
}

criterion_group!(benches, bench_kernel, bench_cf, bench_price, bench_surrogate);
criterion_main!(benches);
