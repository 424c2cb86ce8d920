//! End-to-end acceptance gates for the delivered toolkit, one test per
//! criterion. Each test prints a single PASS line on success; a failing
//! assertion is the FAIL signal.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use rouvol::special::{erfc_complex, upper_gamma_3half};
use rouvol::{
    calibrate, default_market, default_strikes, estimate_beta, fit, generate_dataset, lhs_sample,
    parity_bounds_check, run_filters, split_dataset,
    ActivityConfig, Backend, CalParams, CalibrationProblem, CfEvaluator,
    DatedQuote, DropReason, FilterMode, GaConfig, HighFreqSeries, KernelParams, MarketState,
    ParameterBox, PricingOracle, QuadratureConfig, Quote, RefineConfig, StableParams,
    SubordinatorParams, SurrogateModel, TrainConfig, TrainingRow, DEFAULT_DELTA,
    DEFAULT_MATURITY_DAYS, R_MATURITY_DAYS,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn core_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data")
}

fn table6() -> (SubordinatorParams, KernelParams, StableParams, MarketState) {
    (
        SubordinatorParams::new(0.049762, 0.849782, 0.8575).unwrap(),
        KernelParams::new(0.769302, 7.798968, DEFAULT_DELTA).unwrap(),
        StableParams::new(1.715, 0.01).unwrap(),
        MarketState::new(0.1793 * 0.1793, 0.0, 0.0).unwrap(),
    )
}

#[test]
fn criterion_01_backend_agreement() {
    let start = Instant::now();
    let (_, _, stp, ms) = table6();
    let pbox = ParameterBox::default();
    const PER_DRAW: usize = 20;
    let samples = lhs_sample(500, &pbox, 101).unwrap();
    let qc_fast = QuadratureConfig::default();
    let qc_oracle = QuadratureConfig { backend: Backend::Oracle, ..qc_fast };
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut errs = Vec::with_capacity(samples.len() * PER_DRAW);
    for th in &samples {
        let sp = SubordinatorParams::new(th.a, th.b, th.c).unwrap();
        let kp = KernelParams::new(th.d, th.kappa.max(1e-4), DEFAULT_DELTA).unwrap();
        let days = R_MATURITY_DAYS[rng.random_range(0..4)];
        let t = days as f64 / 365.0;
        let fast = CfEvaluator::new(&sp, &kp, &stp, &ms, t, th.r, &qc_fast).unwrap();
        let oracle = CfEvaluator::new(&sp, &kp, &stp, &ms, t, th.r, &qc_oracle).unwrap();
        for _ in 0..PER_DRAW {
            let l: f64 = rng.random_range(0.01..50.0);
            errs.push((fast.eval(l).unwrap() - oracle.eval(l).unwrap()).norm());
        }
    }
    assert!(errs.len() >= 10_000, "only {} evaluations", errs.len());
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let frac = errs.iter().filter(|d| **d > 1e-5).count() as f64 / errs.len() as f64;
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    assert!(mean <= 1e-5, "mean |dphi| = {mean:.3e}");
    assert!(frac <= 1e-3, "fraction above 1e-5 = {frac:.5}");
    assert!(minutes <= 30.0, "ran {minutes:.1} min");
    println!(
        "criterion 1 (backend agreement, n={}, mean {mean:.2e}, frac>tol {frac:.5}): PASS",
        errs.len()
    );
}

#[test]
fn criterion_02_cf_normalization() {
    let (_, _, stp, ms) = table6();
    let qc = QuadratureConfig::default();
    let samples = lhs_sample(100, &ParameterBox::default(), 201).unwrap();
    let mut worst: f64 = 0.0;
    for th in &samples {
        let sp = SubordinatorParams::new(th.a, th.b, th.c).unwrap();
        let kp = KernelParams::new(th.d, th.kappa.max(1e-4), DEFAULT_DELTA).unwrap();
        let ev = CfEvaluator::new(&sp, &kp, &stp, &ms, 48.0 / 365.0, th.r, &qc).unwrap();
        let phi0 = ev.eval(0.0).unwrap();
        worst = worst.max((phi0 - Complex64::new(1.0, 0.0)).norm());
    }
    assert!(worst <= 5e-3, "worst |phi(0)-1| = {worst:.3e}");
    println!("criterion 2 (CF normalization, worst {worst:.2e}): PASS");
}

#[test]
fn criterion_03_kernel_against_brute_force() {
    // parameters with a breakpoint wide enough that the averaging window
    // can sit entirely inside, straddle, and clear it
    let kp = KernelParams::new(0.6, 1.0, DEFAULT_DELTA).unwrap();
    let brk = (1.0 - 0.6) / 1.0;
    let delta = DEFAULT_DELTA;
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let x = 1e-4 + (2.0 * brk) * i as f64 / 199.0;
        let brute = {
            let f = |u: f64| rouvol::kernel::kernel_h(u, &kp).unwrap();
            let mut splits = vec![x, x + delta];
            if x < brk && brk < x + delta {
                splits.insert(1, brk);
            }
            let mut acc = 0.0;
            for w in splits.windows(2) {
                acc += rouvol::quad::adaptive(&f, w[0], w[1], 1e-12);
            }
            acc / delta
        };
        let got = rouvol::kernel::kernel_h_avg(x, &kp).unwrap();
        worst = worst.max((got - brute).abs());
    }
    assert!(worst <= 1e-7, "worst |H - brute| = {worst:.3e}");
    // continuity across the averaged kernel's branch boundaries
    let mut jump: f64 = 0.0;
    for b in [brk - delta, brk] {
        let eps = 1e-12;
        let lo = rouvol::kernel::kernel_h_avg(b - eps, &kp).unwrap();
        let hi = rouvol::kernel::kernel_h_avg(b + eps, &kp).unwrap();
        jump = jump.max((hi - lo).abs());
    }
    assert!(jump <= 1e-9, "branch-boundary jump = {jump:.3e}");
    println!("criterion 3 (kernel vs brute force, worst {worst:.2e}, jump {jump:.2e}): PASS");
}

#[test]
fn criterion_04_price_bounds_and_shape() {
    let (_, _, stp, ms) = table6();
    let qc = QuadratureConfig::bulk();
    let strikes = default_strikes();
    let samples = lhs_sample(100, &ParameterBox::default(), 401).unwrap();
    for th in &samples {
        let sp = SubordinatorParams::new(th.a, th.b, th.c).unwrap();
        let kp = KernelParams::new(th.d, th.kappa.max(1e-4), DEFAULT_DELTA).unwrap();
        let table = rouvol::price_grid(&sp, &kp, &stp, &ms, &[(48, th.r)], &strikes, &qc).unwrap();
        let p = &table.prices[0];
        for (k, v) in strikes.iter().zip(p) {
            assert!(
                (-1e-4..=k + 1e-4).contains(v),
                "price {v} outside [-1e-4, K+1e-4] at K={k}"
            );
        }
        for w in p.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "non-monotone: {} then {}", w[0], w[1]);
        }
        for (i, w) in p.windows(3).enumerate() {
            let chord = (w[0] + w[2]) / 2.0; // uniform strike spacing
            assert!(w[1] <= chord + 1e-6, "non-convex at K={}", strikes[i + 1]);
        }
    }
    println!("criterion 4 (price bounds, monotonicity, convexity on 100 draws): PASS");
}

fn load_grid(name: &str) -> Vec<(Complex64, Complex64)> {
    let text = std::fs::read_to_string(core_data().join(name)).unwrap();
    text.lines()
        .map(|line| {
            let v: Vec<f64> = line.split_whitespace().map(|s| s.parse().unwrap()).collect();
            (Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]))
        })
        .collect()
}

#[test]
fn criterion_05_special_functions_vs_oracle() {
    let erfc_grid = load_grid("oracle_erfc_grid.txt");
    assert_eq!(erfc_grid.len(), 500);
    let mut worst: f64 = 0.0;
    for (z, want) in &erfc_grid {
        let got = erfc_complex(*z);
        worst = worst.max((got - want).norm() / want.norm().max(1.0));
    }
    assert!(worst <= 1e-10, "erfc worst rel err = {worst:.3e}");
    let gamma_grid = load_grid("oracle_gamma32_grid.txt");
    assert_eq!(gamma_grid.len(), 500);
    let mut worst_g: f64 = 0.0;
    for (z, want) in &gamma_grid {
        let got = upper_gamma_3half(*z).unwrap();
        worst_g = worst_g.max((got - want).norm() / want.norm().max(1.0));
    }
    assert!(worst_g <= 1e-10, "gamma(3/2,.) worst rel err = {worst_g:.3e}");
    println!("criterion 5 (special functions, erfc {worst:.2e}, gamma {worst_g:.2e}): PASS");
}

fn series_from_increments(incs: &[f64]) -> HighFreqSeries {
    let mut values = vec![0.0];
    for dx in incs {
        values.push(values.last().unwrap() + dx);
    }
    let ts = (0..values.len()).map(|i| i as f64).collect();
    HighFreqSeries::new(ts, values).unwrap()
}

/// Chambers–Mallows–Stuck draw from the symmetric α-stable law.
fn stable_symmetric(alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
    let w: f64 = Exp1.sample(rng);
    (alpha * u).sin() / u.cos().powf(1.0 / alpha)
        * (((1.0 - alpha) * u).cos() / w).powf((1.0 - alpha) / alpha)
}

#[test]
fn criterion_06_activity_estimator() {
    let cfg = ActivityConfig::default();
    // increments scaled so the truncation level bites; without binding
    // truncation the finite-sample signature sits above the identity
    // line for every p and the estimate pins at the scan edge
    let mut stable_betas = Vec::new();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let incs: Vec<f64> =
            (0..50_000).map(|_| 0.215 * stable_symmetric(1.7, &mut rng)).collect();
        let series = series_from_increments(&incs);
        stable_betas.push(estimate_beta(&series, &cfg).unwrap().0);
    }
    stable_betas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let stable_median = stable_betas[25];
    assert!(
        (1.55..=1.85).contains(&stable_median),
        "stable median beta = {stable_median}"
    );
    let mut brownian_betas = Vec::new();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let sd = (1.0f64 / 50_000.0).sqrt();
        let incs: Vec<f64> = (0..50_000)
            .map(|_| sd * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let series = series_from_increments(&incs);
        brownian_betas.push(estimate_beta(&series, &cfg).unwrap().0);
    }
    brownian_betas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let brownian_median = brownian_betas[25];
    assert!(
        (1.85..=1.95 + 1e-9).contains(&brownian_median),
        "brownian median beta = {brownian_median}"
    );
    println!(
        "criterion 6 (activity: stable median {stable_median:.3}, brownian {brownian_median:.3}): PASS"
    );
}

/// Desk-scale dataset + surrogate shared by criteria 7 and 8.
fn desk_model() -> &'static (SurrogateModel, Vec<TrainingRow>, f64, f64) {
    static MODEL: OnceLock<(SurrogateModel, Vec<TrainingRow>, f64, f64)> = OnceLock::new();
    MODEL.get_or_init(|| {
        let start = Instant::now();
        let (stp, ms) = default_market();
        let samples = lhs_sample(200, &ParameterBox::default(), 701).unwrap();
        let ds = generate_dataset(
            &samples,
            &stp,
            &ms,
            &DEFAULT_MATURITY_DAYS,
            &default_strikes(),
            &QuadratureConfig::bulk(),
        )
        .unwrap();
        let cfg = TrainConfig { seed: 7, ..Default::default() };
        let (train, val, test) = split_dataset(&ds.rows, cfg.fractions, cfg.seed).unwrap();
        let model = fit(&train, &val, &cfg).unwrap();
        let mut se = 0.0;
        for r in &test {
            se += (model.predict_one(&r.features()) - r.price).powi(2);
        }
        let rmse = (se / test.len() as f64).sqrt();
        let minutes = start.elapsed().as_secs_f64() / 60.0;
        (model, ds.rows, rmse, minutes)
    })
}

#[test]
fn criterion_07_surrogate_quality() {
    let (_, rows, rmse, minutes) = desk_model();
    assert_eq!(rows.len(), 200 * 4 * 20);
    assert!(*rmse <= 5e-3, "test abs-RMSE = {rmse:.4e}");
    assert!(*minutes <= 30.0, "generation+training took {minutes:.1} min");
    for loss in [
        rouvol::Loss::Mse,
        rouvol::Loss::inv_premium_default(),
        rouvol::Loss::log_target_default(),
    ] {
        let worst = rouvol::surrogate::gradient_check(&loss, 11);
        assert!(worst <= 1e-5, "gradient check {worst:.2e} for {loss:?}");
    }
    println!(
        "criterion 7 (surrogate: test abs-RMSE {rmse:.2e} in {minutes:.1} min, gradients ok): PASS"
    );
}

fn quote(strike: f64, days: u32, mid_put: f64) -> Quote {
    Quote {
        strike,
        maturity_days: days,
        ttm_years: days as f64 / 365.0,
        iv_call: 0.0,
        volume_call: 0.0,
        mid_call: 0.0,
        iv_put: 0.0,
        volume_put: 0.0,
        mid_put,
        spot: 0.1793,
        bid_call: 0.0,
        ask_call: 1.0,
        bid_put: 0.0,
        ask_put: 1.0,
    }
}

#[test]
fn criterion_08_calibration_round_trip() {
    let (model, _, rmse, _) = desk_model();
    let truth = CalParams {
        a: 0.049762,
        b: 0.849782,
        d: 0.769302,
        kappa: 7.798968,
        r: [0.00198, -0.001292, -0.006008, -0.012427],
    };
    let oracle = PricingOracle::Surrogate(model.clone());
    let mut quotes = Vec::new();
    for &days in &R_MATURITY_DAYS {
        for &k in &[0.10, 0.14, 0.17, 0.22, 0.28] {
            let r = truth.r[rouvol::r_bucket(days)];
            let mid = oracle.price(&truth, 0.8575, r, days as f64 / 365.0, k).unwrap();
            quotes.push(quote(k, days, mid));
        }
    }
    let n = quotes.len();
    let problem =
        CalibrationProblem { quotes, bounds: ParameterBox::default(), c: 0.8575, oracle };
    let ga = GaConfig { population: 60, generations: 300, seed: 8, ..Default::default() };
    let refine = RefineConfig::default();
    let result = calibrate(&problem, &ga, &refine).unwrap();
    let fit_rmse = (result.objective / n as f64).sqrt();
    assert!(
        fit_rmse <= 2.0 * rmse,
        "round-trip price RMSE {fit_rmse:.4e} vs surrogate test RMSE {rmse:.4e}"
    );
    println!(
        "criterion 8 (calibration round-trip RMSE {fit_rmse:.2e} <= 2x {rmse:.2e}): PASS"
    );
}

#[test]
fn criterion_09_quote_filters() {
    let table = rouvol::load_quotes(&fixtures().join("quotes_96.csv")).unwrap();
    assert_eq!(table.quotes.len(), 96);
    assert!(table.rejected.is_empty());
    let report = run_filters(&table.quotes, true, true, FilterMode::SinglePass);
    assert_eq!(report.count(DropReason::Monotonicity), 3, "monotonicity drops");
    assert_eq!(report.count(DropReason::Convexity), 2, "convexity drops");
    assert_eq!(report.dropped.len(), 5);
    assert_eq!(report.kept.len(), 91);
    // the seeded violations, by coordinates
    let dropped: Vec<(u32, f64)> =
        report.dropped.iter().map(|(q, _)| (q.maturity_days, q.strike)).collect();
    for want in [(20, 0.12), (20, 0.22), (48, 0.15), (100, 0.18), (258, 0.25)] {
        assert!(dropped.contains(&want), "expected drop at {want:?}, got {dropped:?}");
    }
    let parity = parity_bounds_check(&table.quotes);
    assert_eq!(parity.dropped.len(), 1);
    assert_eq!(
        (parity.dropped[0].0.maturity_days, parity.dropped[0].0.strike),
        (20, 0.17)
    );
    println!("criterion 9 (filters: 3 monotonicity + 2 convexity drops, 1 parity flag): PASS");
}

#[test]
fn criterion_10_lhs_stratification() {
    let pbox = ParameterBox::default();
    for n in [2usize, 10, 100, 5000] {
        let samples = lhs_sample(n, &pbox, 1000 + n as u64).unwrap();
        let dims: [(fn(&rouvol::ThetaSample) -> f64, (f64, f64)); 5] = [
            (|s| s.a, pbox.a),
            (|s| s.b, pbox.b),
            (|s| s.d, pbox.d),
            (|s| s.kappa, pbox.kappa),
            (|s| s.r, pbox.r),
        ];
        for (get, (lo, hi)) in dims {
            let mut hit = vec![false; n];
            for s in &samples {
                let u = (get(s) - lo) / (hi - lo);
                let stratum = ((u * n as f64) as usize).min(n - 1);
                assert!(!hit[stratum], "two samples in one stratum at n={n}");
                hit[stratum] = true;
            }
            assert!(hit.iter().all(|h| *h), "empty stratum at n={n}");
        }
        for s in &samples {
            assert_eq!(s.c, 0.8575);
        }
    }
    println!("criterion 10 (LHS stratification exact at n in {{2,10,100,5000}}): PASS");
}

fn run_cli(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_voltools"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "voltools {args:?} failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
}

#[test]
fn criterion_11_cli_determinism() {
    let fx = fixtures();
    let fx = fx.to_str().unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let (da, db) = (tmp.path().join("a"), tmp.path().join("b"));
    std::fs::create_dir_all(&da).unwrap();
    std::fs::create_dir_all(&db).unwrap();
    let runs: Vec<Vec<String>> = vec![
        vec![
            "price", "--params", &format!("{fx}/table6.json"), "--strike", "0.17",
            "--maturity-days", "20", "--out", "price.txt",
        ],
        vec!["filter", "--input", &format!("{fx}/quotes_96.csv"), "--out", "clean.csv"],
        vec![
            "activity", "--input", &format!("{fx}/minute_panel.csv"), "--L", "0.5", "--out",
            "sens.txt",
        ],
        vec![
            "generate", "--n", "10", "--seed", "42", "--out", "train.cols", "--quarantine",
            "bad.jsonl",
        ],
        vec!["train", "--data", "train.cols", "--loss", "mse", "--seed", "7", "--out", "model.json"],
        vec![
            "calibrate", "--quotes", "clean.csv", "--model", "model.json", "--seed", "1", "--pop",
            "10", "--gens", "10", "--out", "result.json",
        ],
        vec!["validate-backends", "--n", "40", "--seed", "1", "--out", "verr.txt"],
        vec![
            "eval-timeseries", "--params", "result.json", "--series",
            &format!("{fx}/series_synth.csv"), "--model", "model.json",
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for dir in [&da, &db] {
        for args in &runs {
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            run_cli(dir, &args);
        }
    }
    let primaries = [
        "price.txt", "clean.csv", "sens.txt", "train.cols", "bad.jsonl", "model.json",
        "model.json.curve.txt", "result.json", "result.json.trace.txt", "verr.txt",
    ];
    for name in primaries {
        let a = std::fs::read(da.join(name)).unwrap();
        let b = std::fs::read(db.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    println!(
        "criterion 11 (CLI determinism: {} primary outputs byte-identical): PASS",
        primaries.len()
    );
}

#[test]
fn criterion_12_timeseries_gates() {
    let (stp, ms) = default_market();
    let theta = CalParams {
        a: 0.049762,
        b: 0.849782,
        d: 0.769302,
        kappa: 7.798968,
        r: [0.00198, -0.001292, -0.006008, -0.012427],
    };
    let oracle = PricingOracle::Analytic { stp, ms, qc: QuadratureConfig::bulk() };
    let mut series = Vec::new();
    for (i, &(k, days)) in [(0.14, 20u32), (0.17, 48), (0.20, 100), (0.24, 258)]
        .iter()
        .enumerate()
    {
        let r = theta.r[rouvol::r_bucket(days)];
        let mid = oracle.price(&theta, 0.8575, r, days as f64 / 365.0, k).unwrap();
        series.push(DatedQuote {
            date: format!("2025-02-{:02}", i + 1),
            strike: k,
            maturity_days: days,
            mid,
        });
    }
    let report = rouvol::timeseries_eval(&theta, 0.8575, &oracle, &series).unwrap();
    assert!(report.mae <= 1e-12 && report.rmse <= 1e-12, "zero-error case: {report:?}");
    let biased: Vec<DatedQuote> =
        series.iter().map(|q| DatedQuote { mid: q.mid - 0.01, ..q.clone() }).collect();
    let report = rouvol::timeseries_eval(&theta, 0.8575, &oracle, &biased).unwrap();
    assert!((report.mae - 0.01).abs() <= 1e-12, "bias MAE = {}", report.mae);
    assert!((report.rmse - 0.01).abs() <= 1e-12, "bias RMSE = {}", report.rmse);
    println!("criterion 12 (time-series metrics: zero-error and constant-bias gates): PASS");
}
