//! Fourier transform pricing of power-type volatility puts from the
//! conditional characteristic function.

use num_complex::Complex64;

use crate::charfn::{CfEvaluator, MarketState, QuadratureConfig};
use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::quad;
use crate::special::{upper_gamma_3half, StableParams, SubordinatorParams};

/// A put on the squared average-forward volatility, quoted in volatility
/// units.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptionSpec {
    pub strike: f64,
    /// Maturity in years.
    pub maturity: f64,
}

impl OptionSpec {
    pub fn new(strike: f64, maturity: f64) -> Result<Self> {
        if !(strike > 0.0) {
            return Err(Error::domain(format!("strike must be > 0, got {strike}")));
        }
        if !(maturity > 0.0) {
            return Err(Error::domain(format!("maturity must be > 0, got {maturity}")));
        }
        Ok(Self { strike, maturity })
    }
}

/// The transform's bracket factor for l > 0:
/// `K e^{-iK^2 l} + (sqrt(pi)/2 - Gamma(3/2, iK^2 l)) / sqrt(il)`,
/// with the principal branch `sqrt(il) = sqrt(l) e^{i pi/4}`.
fn bracket(strike: f64, l: f64) -> Result<Complex64> {
    let z = Complex64::new(0.0, strike * strike * l);
    let g = upper_gamma_3half(z)?;
    let half_sqrt_pi = 0.5 * std::f64::consts::PI.sqrt();
    let sqrt_il = l.sqrt()
        * Complex64::new(
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        );
    Ok(strike * (-z).exp() + (half_sqrt_pi - g) / sqrt_il)
}

/// Real part of the transform integrand at l > 0 given the
/// characteristic function value there.
pub fn integrand(strike: f64, l: f64, phi: Complex64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(Error::domain(format!("integrand defined for l > 0, got {l}")));
    }
    // division by il: Re[B phi / (il)] = Im[B phi] / l
    Ok((bracket(strike, l)? * phi).im / l)
}

/// Analytic l -> 0 limit of the integrand: the bracket vanishes like
/// O(l) against the 1/(il) pole, leaving `K phi'(0)/i - K^3/3` where
/// `phi'(0)/i` is the characteristic function's mean.
pub fn integrand_limit(strike: f64, cf_mean: f64) -> f64 {
    strike * cf_mean - strike.powi(3) / 3.0
}

fn put_price_with(ev: &CfEvaluator, strike: f64, qc: &QuadratureConfig) -> Result<f64> {
    let (nodes, weights) = quad::simpson_grid(0.0, qc.l_upper, qc.nodes_outer);
    let mut acc = integrand_limit(strike, ev.cf_mean()) * weights[0];
    for (l, w) in nodes.iter().zip(&weights).skip(1) {
        acc += integrand(strike, *l, ev.eval(*l)?)? * w;
    }
    let price = 0.5 * strike - acc / std::f64::consts::PI;
    check_price(price, strike)
}

fn check_price(price: f64, strike: f64) -> Result<f64> {
    if !price.is_finite() || price < -1e-4 || price > strike + 1e-4 {
        return Err(Error::numerical(format!(
            "price {price} outside [0, {strike}] beyond tolerance; quadrature failure"
        )));
    }
    Ok(price)
}

/// Price a single put.
#[allow(clippy::too_many_arguments)]
pub fn put_price(
    spec: &OptionSpec,
    sp: &SubordinatorParams,
    kp: &KernelParams,
    stp: &StableParams,
    ms: &MarketState,
    r: f64,
    qc: &QuadratureConfig,
) -> Result<f64> {
    OptionSpec::new(spec.strike, spec.maturity)?;
    let ev = CfEvaluator::new(sp, kp, stp, ms, spec.maturity, r, qc)?;
    put_price_with(&ev, spec.strike, qc)
}

/// A maturity-by-strike table of put prices.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PriceTable {
    /// Maturities in calendar days, one per row.
    pub maturity_days: Vec<u32>,
    pub strikes: Vec<f64>,
    /// Row-major: `prices[i][j]` is maturity `i`, strike `j`.
    pub prices: Vec<Vec<f64>>,
}

impl PriceTable {
    /// Columnar text serialization: `maturity_days strike price` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("maturity_days strike price\n");
        for (days, row) in self.maturity_days.iter().zip(&self.prices) {
            for (k, p) in self.strikes.iter().zip(row) {
                out.push_str(&format!("{days} {k:.17e} {p:.17e}\n"));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "maturity_days strike price" => {}
            _ => return Err(Error::Schema("expected header 'maturity_days strike price'".into())),
        }
        let mut maturity_days: Vec<u32> = Vec::new();
        let mut strikes: Vec<f64> = Vec::new();
        let mut prices: Vec<Vec<f64>> = Vec::new();
        let mut first_row_done = false;
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse_err = |msg: &str| Error::Parse { line: idx + 1, msg: msg.into() };
            let days: u32 = it
                .next()
                .ok_or_else(|| parse_err("missing maturity_days"))?
                .parse()
                .map_err(|_| parse_err("bad maturity_days"))?;
            let k: f64 = it
                .next()
                .ok_or_else(|| parse_err("missing strike"))?
                .parse()
                .map_err(|_| parse_err("bad strike"))?;
            let p: f64 = it
                .next()
                .ok_or_else(|| parse_err("missing price"))?
                .parse()
                .map_err(|_| parse_err("bad price"))?;
            if maturity_days.last() != Some(&days) {
                maturity_days.push(days);
                prices.push(Vec::new());
                first_row_done = !strikes.is_empty();
            }
            if !first_row_done {
                strikes.push(k);
            }
            prices.last_mut().unwrap().push(p);
        }
        let table = Self { maturity_days, strikes, prices };
        for row in &table.prices {
            if row.len() != table.strikes.len() {
                return Err(Error::Schema("ragged price table".into()));
            }
        }
        Ok(table)
    }
}

/// Price the full maturity-by-strike grid, sharing the characteristic
/// function evaluations across strikes within each maturity.
#[allow(clippy::too_many_arguments)]
pub fn price_grid(
    sp: &SubordinatorParams,
    kp: &KernelParams,
    stp: &StableParams,
    ms: &MarketState,
    maturities: &[(u32, f64)],
    strikes: &[f64],
    qc: &QuadratureConfig,
) -> Result<PriceTable> {
    if maturities.is_empty() || strikes.is_empty() {
        return Err(Error::domain("empty maturity or strike grid"));
    }
    let (nodes, weights) = quad::simpson_grid(0.0, qc.l_upper, qc.nodes_outer);
    let mut prices = Vec::with_capacity(maturities.len());
    for &(days, r) in maturities {
        let t = days as f64 / 365.0;
        let ev = CfEvaluator::new(sp, kp, stp, ms, t, r, qc)
            .map_err(|e| Error::numerical(format!("maturity {days}d: {e}")))?;
        let phis: Vec<Complex64> = nodes
            .iter()
            .skip(1)
            .map(|l| ev.eval(*l))
            .collect::<Result<_>>()
            .map_err(|e| Error::numerical(format!("maturity {days}d: {e}")))?;
        let cf_mean = ev.cf_mean();
        let mut row = Vec::with_capacity(strikes.len());
        for &k in strikes {
            let mut acc = integrand_limit(k, cf_mean) * weights[0];
            for ((l, w), phi) in nodes.iter().zip(&weights).skip(1).zip(&phis) {
                acc += integrand(k, *l, *phi)
                    .map_err(|e| Error::numerical(format!("maturity {days}d strike {k}: {e}")))?
                    * w;
            }
            let price = check_price(0.5 * k - acc / std::f64::consts::PI, k)
                .map_err(|e| Error::numerical(format!("maturity {days}d strike {k}: {e}")))?;
            row.push(price);
        }
        prices.push(row);
    }
    Ok(PriceTable { maturity_days: maturities.iter().map(|m| m.0).collect(), strikes: strikes.to_vec(), prices })
}
