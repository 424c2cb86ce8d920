//! Jump-activity index estimation from high-frequency index increments.
//!
//! Power variations at the base and doubled sampling intervals feed the
//! activity signature function b(p); the activity index is the fixed
//! point b(p) = p, located by Brent's method on the scan grid.

use crate::error::{Error, Result};

/// Regularly sampled index levels.
#[derive(Debug, Clone, PartialEq)]
pub struct HighFreqSeries {
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
    /// Base sampling interval Δₙ (minutes).
    pub base_interval: f64,
}

impl HighFreqSeries {
    /// Validates length, strict ordering, and uniform spacing within 1%.
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Dimension { expected: timestamps.len(), got: values.len() });
        }
        if timestamps.len() < 3 {
            return Err(Error::Degenerate(format!(
                "need at least 3 observations, got {}",
                timestamps.len()
            )));
        }
        let dt0 = timestamps[1] - timestamps[0];
        if !(dt0 > 0.0) {
            return Err(Error::domain("timestamps must be strictly increasing"));
        }
        for w in timestamps.windows(2) {
            let dt = w[1] - w[0];
            if !(dt > 0.0) {
                return Err(Error::domain("timestamps must be strictly increasing"));
            }
            if (dt - dt0).abs() > 0.01 * dt0 {
                return Err(Error::domain(format!(
                    "non-uniform spacing: {dt} vs base {dt0} exceeds 1% tolerance"
                )));
            }
        }
        Ok(HighFreqSeries { timestamps, values, base_interval: dt0 })
    }

    fn increments(&self, scale: u32) -> Vec<f64> {
        let step = scale as usize;
        self.values
            .iter()
            .step_by(step)
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| *w[1] - *w[0])
            .collect()
    }
}

/// Scan and truncation settings for the signature estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityConfig {
    /// Truncation threshold L in level units.
    pub truncation_l: f64,
    /// Powers p to scan, each in (0, 2).
    pub p_grid: Vec<f64>,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        ActivityConfig { truncation_l: 0.5, p_grid: scan_grid(0.05, 1.95, 0.05) }
    }
}

impl ActivityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.truncation_l > 0.0) {
            return Err(Error::domain("truncation threshold must be > 0"));
        }
        if self.p_grid.is_empty() {
            return Err(Error::domain("empty scan grid"));
        }
        for &p in &self.p_grid {
            if !(p > 0.0 && p < 2.0) {
                return Err(Error::domain(format!("scan power {p} outside (0, 2)")));
            }
        }
        Ok(())
    }
}

/// Inclusive arithmetic grid, endpoint within half a step.
pub fn scan_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 0.5).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Truncated power variation: sum of |ΔX|^p over increments at Δₙ
/// (scale 1) or 2Δₙ (scale 2). The indicator |ΔX| ≤ L applies for p < 2.
pub fn power_variation(
    series: &HighFreqSeries,
    p: f64,
    scale: u32,
    cfg: &ActivityConfig,
) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::domain(format!("power must be > 0, got {p}")));
    }
    if scale != 1 && scale != 2 {
        return Err(Error::domain(format!("scale must be 1 or 2, got {scale}")));
    }
    let incs = series.increments(scale);
    if incs.iter().all(|dx| *dx == 0.0) {
        return Err(Error::Degenerate("all increments are zero".into()));
    }
    let truncate = p < 2.0;
    Ok(incs
        .iter()
        .map(|dx| dx.abs())
        .filter(|a| !truncate || *a <= cfg.truncation_l)
        .map(|a| a.powf(p))
        .sum())
}

/// Activity signature b(p) = ln2·p / (ln2 + ln V(p, 2Δₙ) − ln V(p, Δₙ)).
pub fn activity_signature(series: &HighFreqSeries, p: f64, cfg: &ActivityConfig) -> Result<f64> {
    let v1 = power_variation(series, p, 1, cfg)?;
    let v2 = power_variation(series, p, 2, cfg)?;
    if !(v1 > 0.0) || !(v2 > 0.0) {
        return Err(Error::Degenerate(format!(
            "power variation vanished at p = {p} (truncation too tight?)"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let denom = ln2 + v2.ln() - v1.ln();
    if denom == 0.0 {
        return Err(Error::Degenerate(format!("signature denominator vanished at p = {p}")));
    }
    Ok(ln2 * p / denom)
}

/// How β̂ was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaMethod {
    /// Brent root of b(p) − p.
    Root,
    /// No sign change on the grid; argmin of |b(p) − p|.
    Fallback,
}

/// Estimate the activity index as the fixed point of the signature
/// function over the scan grid.
pub fn estimate_beta(series: &HighFreqSeries, cfg: &ActivityConfig) -> Result<(f64, BetaMethod)> {
    cfg.validate()?;
    let mut grid = cfg.p_grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let f = |p: f64| activity_signature(series, p, cfg).map(|b| b - p);
    let vals: Vec<f64> = grid.iter().map(|&p| f(p)).collect::<Result<_>>()?;
    for w in 0..grid.len() - 1 {
        if vals[w] == 0.0 {
            return Ok((grid[w], BetaMethod::Root));
        }
        if vals[w] * vals[w + 1] < 0.0 {
            let root = brent(&f, grid[w], grid[w + 1], vals[w], vals[w + 1], 1e-10, 200)?;
            return Ok((root, BetaMethod::Root));
        }
    }
    let (i, _) = vals
        .iter()
        .map(|v| v.abs())
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    Ok((grid[i], BetaMethod::Fallback))
}

/// One row of the truncation sensitivity table.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SensitivityRow {
    pub truncation_l: f64,
    /// Fraction of base-scale increments above L.
    pub truncated_share: f64,
    pub beta_hat: f64,
    pub fallback: bool,
}

/// Re-estimate β̂ across truncation thresholds.
pub fn truncation_sensitivity(
    series: &HighFreqSeries,
    l_list: &[f64],
    cfg: &ActivityConfig,
) -> Result<Vec<SensitivityRow>> {
    if l_list.is_empty() {
        return Err(Error::domain("empty threshold list"));
    }
    let incs = series.increments(1);
    let mut rows = Vec::with_capacity(l_list.len());
    for &l in l_list {
        let sub = ActivityConfig { truncation_l: l, ..cfg.clone() };
        sub.validate()?;
        let truncated = incs.iter().filter(|dx| dx.abs() > l).count();
        let (beta_hat, method) = estimate_beta(series, &sub)?;
        rows.push(SensitivityRow {
            truncation_l: l,
            truncated_share: truncated as f64 / incs.len() as f64,
            beta_hat,
            fallback: method == BetaMethod::Fallback,
        });
    }
    Ok(rows)
}

fn brent<F: Fn(f64) -> Result<f64>>(
    f: &F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if fa * fb > 0.0 {
        return Err(Error::numerical("root not bracketed"));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() < tol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let bisect = !((lo.min(b) < s && s < lo.max(b))
            && !(mflag && (s - b).abs() >= (b - c).abs() / 2.0)
            && !(!mflag && (s - b).abs() >= (c - d).abs() / 2.0)
            && !(mflag && (b - c).abs() < tol)
            && !(!mflag && (c - d).abs() < tol));
        if bisect {
            s = (a + b) / 2.0;
        }
        mflag = bisect;
        let fs = f(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Ok(b)
}
