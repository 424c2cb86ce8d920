//! Two-stage calibration of (a, b, d, κ, r₁..r₄) against filtered put
//! quotes: a genetic global search over unit-box genes followed by a
//! bounded quasi-Newton refinement, plus out-of-sample time-series
//! metrics.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::charfn::{MarketState, QuadratureConfig};
use crate::dataset::ParameterBox;
use crate::error::{Error, Result};
use crate::kernel::{KernelParams, DEFAULT_DELTA};
use crate::market::Quote;
use crate::pricer::{put_price, OptionSpec};
use crate::special::{StableParams, SubordinatorParams};
use crate::surrogate::SurrogateModel;

/// Maturity buckets carrying their own remainder terms r₁..r₄.
pub const R_MATURITY_DAYS: [u32; 4] = [20, 48, 100, 258];

/// Nearest bucket for a quote's maturity; ties resolve toward the
/// shorter maturity.
pub fn r_bucket(maturity_days: u32) -> usize {
    let mut best = 0;
    let mut best_dist = u32::MAX;
    for (i, &m) in R_MATURITY_DAYS.iter().enumerate() {
        let dist = maturity_days.abs_diff(m);
        if dist < best_dist {
            best = i;
            best_dist = dist;
        }
    }
    best
}

/// Free calibration coordinates; c stays fixed at the problem level.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CalParams {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub kappa: f64,
    pub r: [f64; 4],
}

/// Pricing engine used inside the objective.
pub enum PricingOracle {
    Surrogate(SurrogateModel),
    Analytic { stp: StableParams, ms: MarketState, qc: QuadratureConfig },
}

impl PricingOracle {
    pub fn price(&self, th: &CalParams, c: f64, r: f64, t: f64, strike: f64) -> Result<f64> {
        match self {
            PricingOracle::Surrogate(model) => {
                Ok(model.predict_one(&[th.a, th.b, c, th.d, th.kappa, r, t, strike]))
            }
            PricingOracle::Analytic { stp, ms, qc } => {
                let sp = SubordinatorParams::new(th.a, th.b, c)?;
                let kp = KernelParams::new(th.d, th.kappa, DEFAULT_DELTA)?;
                let spec = OptionSpec::new(strike, t)?;
                put_price(&spec, &sp, &kp, stp, ms, r, qc)
            }
        }
    }
}

pub struct CalibrationProblem {
    pub quotes: Vec<Quote>,
    pub bounds: ParameterBox,
    pub c: f64,
    pub oracle: PricingOracle,
}

impl CalibrationProblem {
    pub fn validate(&self) -> Result<()> {
        if self.quotes.is_empty() {
            return Err(Error::Degenerate("no quotes to calibrate against".into()));
        }
        self.bounds.validate()
    }

    /// 8 unit-box genes → parameter vector (κ clamped to its floor).
    pub fn decode(&self, genes: &[f64]) -> CalParams {
        let lerp = |(lo, hi): (f64, f64), g: f64| lo + (hi - lo) * g.clamp(0.0, 1.0);
        CalParams {
            a: lerp(self.bounds.a, genes[0]),
            b: lerp(self.bounds.b, genes[1]),
            d: lerp(self.bounds.d, genes[2]),
            kappa: lerp(self.bounds.kappa, genes[3]).max(1e-4),
            r: std::array::from_fn(|i| lerp(self.bounds.r, genes[4 + i])),
        }
    }

    /// Per-quote residuals (market mid − model price); pricing failures
    /// surface as an error.
    pub fn residuals(&self, th: &CalParams) -> Result<Vec<f64>> {
        self.quotes
            .iter()
            .map(|q| {
                let r = th.r[r_bucket(q.maturity_days)];
                let model = self.oracle.price(th, self.c, r, q.ttm_years, q.strike)?;
                Ok(q.mid_put - model)
            })
            .collect()
    }
}

/// Sum of squared mid-price residuals; pricing failures map to +∞ and
/// raise the flag.
pub fn objective_flagged(th: &CalParams, problem: &CalibrationProblem) -> (f64, bool) {
    match problem.residuals(th) {
        Ok(res) => {
            let v = res.iter().map(|e| e * e).sum();
            if f64::is_finite(v) { (v, false) } else { (f64::INFINITY, true) }
        }
        Err(_) => (f64::INFINITY, true),
    }
}

pub fn objective(th: &CalParams, problem: &CalibrationProblem) -> f64 {
    objective_flagged(th, problem).0
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Per-gene Gaussian mutation, σ as a fraction of the unit range.
    pub mutation_sigma: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        // desk-scale defaults; paper scale is population 600 × 3000
        GaConfig {
            population: 60,
            generations: 300,
            tournament: 3,
            crossover_rate: 0.8,
            mutation_sigma: 0.05,
            mutation_rate: 0.1,
            elitism: 2,
            seed: 0,
        }
    }
}

/// Genetic minimizer over the unit box. Returns the best gene vector
/// and the per-generation best fitness (−f) trace, which elitism keeps
/// non-decreasing.
pub fn ga_minimize<F: FnMut(&[f64]) -> f64>(
    dim: usize,
    mut f: F,
    cfg: &GaConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if cfg.population < 2 || cfg.elitism >= cfg.population || cfg.tournament == 0 {
        return Err(Error::domain("bad GA configuration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Vec<f64>> =
        (0..cfg.population).map(|_| (0..dim).map(|_| rng.random()).collect()).collect();
    let mut fitness: Vec<f64> = pop.iter().map(|g| -f(g)).collect();
    let mut trace = Vec::with_capacity(cfg.generations);
    for _ in 0..cfg.generations {
        let mut order: Vec<usize> = (0..cfg.population).collect();
        order.sort_by(|&i, &j| fitness[j].partial_cmp(&fitness[i]).unwrap());
        trace.push(fitness[order[0]]);
        let mut next: Vec<Vec<f64>> =
            order.iter().take(cfg.elitism).map(|&i| pop[i].clone()).collect();
        let idxs: Vec<usize> = (0..cfg.population).collect();
        while next.len() < cfg.population {
            let pick = |rng: &mut ChaCha8Rng| -> usize {
                *(0..cfg.tournament)
                    .map(|_| *idxs.choose(rng).unwrap())
                    .collect::<Vec<_>>()
                    .iter()
                    .max_by(|&&i, &&j| fitness[i].partial_cmp(&fitness[j]).unwrap())
                    .unwrap()
            };
            let (p1, p2) = (pick(&mut rng), pick(&mut rng));
            let mut child: Vec<f64> = if rng.random::<f64>() < cfg.crossover_rate {
                (0..dim)
                    .map(|k| if rng.random::<bool>() { pop[p1][k] } else { pop[p2][k] })
                    .collect()
            } else {
                pop[p1].clone()
            };
            for g in child.iter_mut() {
                if rng.random::<f64>() < cfg.mutation_rate {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    *g = (*g + cfg.mutation_sigma * z).clamp(0.0, 1.0);
                }
            }
            next.push(child);
        }
        pop = next;
        fitness = pop.iter().map(|g| -f(g)).collect();
    }
    let best = (0..cfg.population)
        .max_by(|&i, &j| fitness[i].partial_cmp(&fitness[j]).unwrap())
        .unwrap();
    trace.push(fitness[best]);
    Ok((pop[best].clone(), trace))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefineConfig {
    pub max_iters: usize,
    pub memory: usize,
    /// Relative central-difference step per coordinate.
    pub fd_rel_step: f64,
    pub grad_tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { max_iters: 200, memory: 8, fd_rel_step: 1e-6, grad_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefineResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective at every accepted iterate, starting point included.
    pub trace: Vec<f64>,
    pub line_search_failed: bool,
}

fn fd_gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
    rel: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = rel * x[i].abs().max(1.0);
        let up = (x[i] + h).min(hi[i]);
        let dn = (x[i] - h).max(lo[i]);
        xp[i] = up;
        let fu = f(&xp);
        xp[i] = dn;
        let fd = f(&xp);
        xp[i] = x[i];
        g[i] = if up > dn { (fu - fd) / (up - dn) } else { 0.0 };
    }
    g
}

/// Box-constrained L-BFGS with central finite-difference gradients and
/// projected backtracking line search. Accepted iterates are monotone;
/// a failed line search returns the best point so far with the flag set.
pub fn lbfgs_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    cfg: &RefineConfig,
) -> Result<RefineResult> {
    let n = x0.len();
    if lo.len() != n || hi.len() != n {
        return Err(Error::Dimension { expected: n, got: lo.len().min(hi.len()) });
    }
    let project =
        |x: &[f64]| -> Vec<f64> { x.iter().zip(lo).zip(hi).map(|((v, l), h)| v.clamp(*l, *h)).collect() };
    let mut x = project(x0);
    let mut fx = f(&x);
    let mut trace = vec![fx];
    let mut grad = fd_gradient(&mut f, &x, lo, hi, cfg.fd_rel_step);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut failed = false;
    for _ in 0..cfg.max_iters {
        // projected gradient convergence measure
        let pg: f64 = x
            .iter()
            .zip(&grad)
            .zip(lo.iter().zip(hi))
            .map(|((xi, gi), (l, h))| {
                let step = (xi - gi).clamp(*l, *h) - xi;
                step * step
            })
            .sum::<f64>()
            .sqrt();
        if pg <= cfg.grad_tol {
            break;
        }
        // two-loop recursion
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / y.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
            let alpha = rho * s.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= alpha * yi;
            }
            alphas.push((rho, alpha));
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
            let yy: f64 = y.iter().map(|v| v * v).sum();
            let gamma = sy / yy;
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y), (rho, alpha)) in s_hist.iter().zip(&y_hist).zip(alphas.iter().rev()) {
            let beta = rho * y.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (alpha - beta) * si;
            }
        }
        // descent direction; fall back to steepest descent if invalid
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let descent: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if !descent.is_finite() || descent >= 0.0 {
            dir = grad.iter().map(|g| -g).collect();
            s_hist.clear();
            y_hist.clear();
        }
        // Projected line search: backtrack to an Armijo point, then expand
        // the step while the curvature condition fails. Without the
        // expansion, negative s'y pairs get skipped, the inverse-Hessian
        // estimate goes stale, and progress stalls in tiny full steps.
        let trial = |x: &[f64], dir: &[f64], alpha: f64| -> Vec<f64> {
            project(&x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect::<Vec<_>>())
        };
        let armijo = |fx: f64, fc: f64, g: &[f64], x: &[f64], cand: &[f64]| -> bool {
            let gd: f64 = g.iter().zip(cand.iter().zip(x)).map(|(gi, (c, xi))| gi * (c - xi)).sum();
            fc.is_finite() && fc <= fx + 1e-4 * gd && fc < fx
        };
        let mut alpha = 1.0;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        while alpha > 1e-14 {
            let cand = trial(&x, &dir, alpha);
            let step_sq: f64 = cand.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
            if step_sq == 0.0 {
                break;
            }
            let fc = f(&cand);
            if armijo(fx, fc, &grad, &x, &cand) {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((mut xn, mut fn_)) = accepted else {
            failed = trace.len() > 1 || pg > 1e3 * cfg.grad_tol;
            break;
        };
        let mut gn = fd_gradient(&mut f, &xn, lo, hi, cfg.fd_rel_step);
        for _ in 0..30 {
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let gs: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum();
            let gns: f64 = gn.iter().zip(&step).map(|(a, b)| a * b).sum();
            let clipped = xn
                .iter()
                .zip(x.iter().zip(&dir))
                .any(|(c, (xi, di))| (c - (xi + alpha * di)).abs() > 0.0);
            if gns >= 0.9 * gs || clipped {
                break;
            }
            alpha *= 2.0;
            let cand = trial(&x, &dir, alpha);
            let fc = f(&cand);
            if !armijo(fx, fc, &grad, &x, &cand) {
                break;
            }
            xn = cand;
            fn_ = fc;
            gn = fd_gradient(&mut f, &xn, lo, hi, cfg.fd_rel_step);
        }
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&grad).map(|(a, b)| a - b).collect();
        if s.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() > 1e-14 {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > cfg.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        x = xn;
        fx = fn_;
        grad = gn;
        trace.push(fx);
    }
    Ok(RefineResult { x, value: fx, trace, line_search_failed: failed })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CalibrationResult {
    pub theta: CalParams,
    pub c: f64,
    pub objective: f64,
    /// Best fitness (−objective) per GA generation.
    pub ga_trace: Vec<f64>,
    /// Objective per accepted refinement iterate.
    pub refine_trace: Vec<f64>,
    pub residuals: Vec<f64>,
    pub line_search_failed: bool,
}

/// GA global search followed by bounded quasi-Newton refinement from
/// the GA winner.
pub fn calibrate(
    problem: &CalibrationProblem,
    ga: &GaConfig,
    refine: &RefineConfig,
) -> Result<CalibrationResult> {
    problem.validate()?;
    let eval = |genes: &[f64]| objective(&problem.decode(genes), problem);
    let (genes, ga_trace) = ga_minimize(8, eval, ga)?;
    let lo = vec![0.0; 8];
    let hi = vec![1.0; 8];
    let res = lbfgs_box(eval, &genes, &lo, &hi, refine)?;
    let ga_value = eval(&genes);
    let (final_genes, value) =
        if res.value <= ga_value { (res.x.clone(), res.value) } else { (genes, ga_value) };
    let theta = problem.decode(&final_genes);
    let residuals = problem.residuals(&theta).unwrap_or_default();
    Ok(CalibrationResult {
        theta,
        c: problem.c,
        objective: value,
        ga_trace,
        refine_trace: res.trace,
        residuals,
        line_search_failed: res.line_search_failed,
    })
}

/// One dated market observation for out-of-sample evaluation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatedQuote {
    pub date: String,
    pub strike: f64,
    pub maturity_days: u32,
    pub mid: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub rmse: f64,
    /// Percent; dates with mid below one tick are excluded here.
    pub mape_pct: f64,
    pub n_used: usize,
    pub mape_excluded: usize,
    pub pricing_failures: usize,
}

/// One tick: MAPE denominator guard.
pub const ONE_TICK: f64 = 0.01;

/// Price each date with fixed parameters and compare against market
/// mids. Per-date pricing failures are excluded and counted.
pub fn timeseries_eval(
    theta: &CalParams,
    c: f64,
    oracle: &PricingOracle,
    series: &[DatedQuote],
) -> Result<EvalReport> {
    if series.is_empty() {
        return Err(Error::Degenerate("empty evaluation series".into()));
    }
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut ape_sum = 0.0;
    let mut n_used = 0usize;
    let mut n_mape = 0usize;
    let mut mape_excluded = 0usize;
    let mut failures = 0usize;
    for q in series {
        let r = theta.r[r_bucket(q.maturity_days)];
        let t = q.maturity_days as f64 / 365.0;
        let model = match oracle.price(theta, c, r, t, q.strike) {
            Ok(p) if p.is_finite() => p,
            _ => {
                failures += 1;
                continue;
            }
        };
        let err = model - q.mid;
        abs_sum += err.abs();
        sq_sum += err * err;
        n_used += 1;
        if q.mid >= ONE_TICK {
            ape_sum += (err / q.mid).abs();
            n_mape += 1;
        } else {
            mape_excluded += 1;
        }
    }
    if n_used == 0 {
        return Err(Error::numerical("every date failed to price"));
    }
    Ok(EvalReport {
        mae: abs_sum / n_used as f64,
        rmse: (sq_sum / n_used as f64).sqrt(),
        mape_pct: if n_mape > 0 { 100.0 * ape_sum / n_mape as f64 } else { f64::NAN },
        n_used,
        mape_excluded,
        pricing_failures: failures,
    })
}
