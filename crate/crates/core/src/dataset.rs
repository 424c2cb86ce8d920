//! Latin-hypercube sampling of the parameter box and offline generation
//! of the (θ, T, K) → price training table.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::charfn::{CfEvaluator, MarketState, QuadratureConfig};
use crate::error::{Error, Result};
use crate::kernel::{KernelParams, DEFAULT_DELTA};
use crate::pricer;
use crate::quad;
use crate::special::{StableParams, SubordinatorParams};

/// Sampling box for the model parameters. `c` is held fixed; κ draws
/// are clamped to ≥ 1e-4 to honor the kernel's positivity precondition.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParameterBox {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub c: f64,
    pub d: (f64, f64),
    pub kappa: (f64, f64),
    pub r: (f64, f64),
}

impl Default for ParameterBox {
    fn default() -> Self {
        ParameterBox {
            a: (0.0, 5.0),
            b: (0.0, 5.0),
            c: 0.8575,
            d: (0.5, 0.999),
            kappa: (0.0, 10.0),
            r: (-0.25, 0.25),
        }
    }
}

impl ParameterBox {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in
            [("a", self.a), ("b", self.b), ("d", self.d), ("kappa", self.kappa), ("r", self.r)]
        {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::domain(format!("bad range for {name}: [{lo}, {hi}]")));
            }
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::domain(format!("c must be in (0,1), got {}", self.c)));
        }
        Ok(())
    }
}

/// One sampled parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThetaSample {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub kappa: f64,
    pub r: f64,
}

/// Latin hypercube draw: exactly one point per equal-width stratum in
/// every sampled dimension, deterministic under the seed.
pub fn lhs_sample(n: usize, pbox: &ParameterBox, seed: u64) -> Result<Vec<ThetaSample>> {
    if n == 0 {
        return Err(Error::domain("sample count must be >= 1"));
    }
    pbox.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut column = |(lo, hi): (f64, f64)| -> Vec<f64> {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        strata
            .into_iter()
            .map(|s| {
                let u: f64 = rng.random();
                lo + (hi - lo) * (s as f64 + u) / n as f64
            })
            .collect()
    };
    let (a, b, d, kappa, r) =
        (column(pbox.a), column(pbox.b), column(pbox.d), column(pbox.kappa), column(pbox.r));
    Ok((0..n)
        .map(|i| ThetaSample {
            a: a[i],
            b: b[i],
            c: pbox.c,
            d: d[i],
            kappa: kappa[i].max(1e-4),
            r: r[i],
        })
        .collect())
}

/// One emitted training example.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub kappa: f64,
    pub r: f64,
    /// Maturity as a fraction of the year, T/365.
    pub t: f64,
    pub strike: f64,
    pub price: f64,
}

impl TrainingRow {
    pub fn features(&self) -> [f64; 8] {
        [self.a, self.b, self.c, self.d, self.kappa, self.r, self.t, self.strike]
    }
}

/// A (sample, maturity, strike) cell that failed pricing, kept aside
/// rather than silently dropped.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuarantinedRow {
    pub sample_index: usize,
    pub theta: ThetaSample,
    pub maturity_days: u32,
    pub strike: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<TrainingRow>,
    pub quarantined: Vec<QuarantinedRow>,
}

pub const DEFAULT_MATURITY_DAYS: [u32; 4] = [258, 100, 48, 20];

/// {0.09, 0.10, ..., 0.28}.
pub fn default_strikes() -> Vec<f64> {
    (9..=28).map(|i| i as f64 / 100.0).collect()
}

/// Market state the training table is conditioned on: spot average
/// volatility 0.1793, oscillator phase 0, observed at time 0.
pub fn default_market() -> (StableParams, MarketState) {
    (StableParams::new(1.715, 0.01).unwrap(), MarketState::new(0.1793 * 0.1793, 0.0, 0.0).unwrap())
}

/// Price every (sample, maturity, strike) cell, sharing characteristic
/// function evaluations across strikes within a maturity. Cells that
/// fail pricing land in the quarantine table with their coordinates.
pub fn generate_dataset(
    samples: &[ThetaSample],
    stp: &StableParams,
    ms: &MarketState,
    maturity_days: &[u32],
    strikes: &[f64],
    qc: &QuadratureConfig,
) -> Result<Dataset> {
    if samples.is_empty() || maturity_days.is_empty() || strikes.is_empty() {
        return Err(Error::domain("empty sample, maturity, or strike grid"));
    }
    let (nodes, weights) = quad::simpson_grid(0.0, qc.l_upper, qc.nodes_outer);
    let mut out = Dataset::default();
    for (idx, th) in samples.iter().enumerate() {
        let params = SubordinatorParams::new(th.a, th.b, th.c)
            .and_then(|sp| KernelParams::new(th.d, th.kappa, DEFAULT_DELTA).map(|kp| (sp, kp)));
        let (sp, kp) = match params {
            Ok(pair) => pair,
            Err(e) => {
                for &days in maturity_days {
                    for &k in strikes {
                        out.quarantined.push(QuarantinedRow {
                            sample_index: idx,
                            theta: *th,
                            maturity_days: days,
                            strike: k,
                            message: e.to_string(),
                        });
                    }
                }
                continue;
            }
        };
        for &days in maturity_days {
            let t = days as f64 / 365.0;
            let quarantine_maturity = |out: &mut Dataset, msg: &str| {
                for &k in strikes {
                    out.quarantined.push(QuarantinedRow {
                        sample_index: idx,
                        theta: *th,
                        maturity_days: days,
                        strike: k,
                        message: msg.to_string(),
                    });
                }
            };
            let ev = match CfEvaluator::new(&sp, &kp, stp, ms, t, th.r, qc) {
                Ok(ev) => ev,
                Err(e) => {
                    quarantine_maturity(&mut out, &e.to_string());
                    continue;
                }
            };
            let phis: std::result::Result<Vec<_>, _> =
                nodes.iter().skip(1).map(|l| ev.eval(*l)).collect();
            let phis = match phis {
                Ok(p) => p,
                Err(e) => {
                    quarantine_maturity(&mut out, &e.to_string());
                    continue;
                }
            };
            let cf_mean = ev.cf_mean();
            for &k in strikes {
                let mut acc = pricer::integrand_limit(k, cf_mean) * weights[0];
                let mut failed: Option<String> = None;
                for ((l, w), phi) in nodes.iter().zip(&weights).skip(1).zip(&phis) {
                    match pricer::integrand(k, *l, *phi) {
                        Ok(v) => acc += v * w,
                        Err(e) => {
                            failed = Some(e.to_string());
                            break;
                        }
                    }
                }
                let price = 0.5 * k - acc / std::f64::consts::PI;
                if failed.is_none() && (!price.is_finite() || price < -1e-4 || price > k + 1e-4)
                {
                    failed = Some(format!("price {price} outside [0, {k}] beyond tolerance"));
                }
                match failed {
                    Some(message) => out.quarantined.push(QuarantinedRow {
                        sample_index: idx,
                        theta: *th,
                        maturity_days: days,
                        strike: k,
                        message,
                    }),
                    None => out.rows.push(TrainingRow {
                        a: th.a,
                        b: th.b,
                        c: th.c,
                        d: th.d,
                        kappa: th.kappa,
                        r: th.r,
                        t,
                        strike: k,
                        price,
                    }),
                }
            }
        }
    }
    Ok(out)
}

const DATASET_MAGIC: &str = "voltools-dataset";
const DATASET_VERSION: &str = "1";
const COLUMNS: &str = "a b c d kappa r t strike price";

/// Self-describing columnar text serialization; values carry 17
/// significant digits so the round trip is bit-exact.
pub fn save_dataset(path: &Path, rows: &[TrainingRow]) -> Result<()> {
    let mut text = format!("{DATASET_MAGIC} v{DATASET_VERSION}\ncolumns: {COLUMNS}\nrows: {}\n", rows.len());
    for r in rows {
        text.push_str(&format!(
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}\n",
            r.a, r.b, r.c, r.d, r.kappa, r.r, r.t, r.strike, r.price
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Vec<TrainingRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == format!("{DATASET_MAGIC} v{DATASET_VERSION}") => {}
        Some((_, h)) if h.trim_start().starts_with(DATASET_MAGIC) => {
            return Err(Error::Version(h.trim().to_string()));
        }
        _ => return Err(Error::Schema("not a dataset file".into())),
    }
    match lines.next() {
        Some((_, h)) if h.trim() == format!("columns: {COLUMNS}") => {}
        other => {
            return Err(Error::Schema(format!("unexpected column header: {other:?}")));
        }
    }
    let declared: usize = match lines.next() {
        Some((_, h)) if h.trim().starts_with("rows: ") => h.trim()[6..]
            .parse()
            .map_err(|_| Error::Schema("bad row count".into()))?,
        _ => return Err(Error::Schema("missing row count".into())),
    };
    let mut rows = Vec::with_capacity(declared);
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|_| Error::Parse { line: idx + 1, msg: "bad number".into() })?;
        if vals.len() != 9 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected 9 columns, got {}", vals.len()),
            });
        }
        rows.push(TrainingRow {
            a: vals[0],
            b: vals[1],
            c: vals[2],
            d: vals[3],
            kappa: vals[4],
            r: vals[5],
            t: vals[6],
            strike: vals[7],
            price: vals[8],
        });
    }
    if rows.len() != declared {
        return Err(Error::Schema(format!(
            "truncated dataset: declared {declared} rows, found {}",
            rows.len()
        )));
    }
    Ok(rows)
}

/// Quarantine side table as JSON lines.
pub fn save_quarantine(path: &Path, rows: &[QuarantinedRow]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).map_err(|e| Error::Schema(e.to_string()))?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lhs_one_point_per_stratum() {
        let pbox = ParameterBox::default();
        for n in [2usize, 10, 100, 5000] {
            let samples = lhs_sample(n, &pbox, 42).unwrap();
            assert_eq!(samples.len(), n);
            let dims: [(&str, (f64, f64), fn(&ThetaSample) -> f64); 5] = [
                ("a", pbox.a, |s| s.a),
                ("b", pbox.b, |s| s.b),
                ("d", pbox.d, |s| s.d),
                ("kappa", pbox.kappa, |s| s.kappa),
                ("r", pbox.r, |s| s.r),
            ];
            for (name, (lo, hi), get) in dims {
                let mut hits = vec![0usize; n];
                for s in &samples {
                    let u = (get(s) - lo) / (hi - lo);
                    let stratum = ((u * n as f64).floor() as usize).min(n - 1);
                    hits[stratum] += 1;
                }
                assert!(hits.iter().all(|&h| h == 1), "{name} at n={n}: {hits:?}");
            }
            assert!(samples.iter().all(|s| s.c == pbox.c));
        }
    }

    #[test]
    fn lhs_deterministic_and_seed_sensitive() {
        let pbox = ParameterBox::default();
        let x = lhs_sample(16, &pbox, 7).unwrap();
        let y = lhs_sample(16, &pbox, 7).unwrap();
        let z = lhs_sample(16, &pbox, 8).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn lhs_rejects_bad_input() {
        let mut pbox = ParameterBox::default();
        assert!(lhs_sample(0, &pbox, 1).is_err());
        pbox.d = (0.9, 0.5);
        assert!(lhs_sample(4, &pbox, 1).is_err());
    }

    #[test]
    fn kappa_clamped_above_zero() {
        let mut pbox = ParameterBox::default();
        pbox.kappa = (0.0, 1e-6);
        let samples = lhs_sample(8, &pbox, 3).unwrap();
        assert!(samples.iter().all(|s| s.kappa >= 1e-4));
    }

    #[test]
    fn generate_smoke_run() {
        let pbox = ParameterBox::default();
        let samples = lhs_sample(2, &pbox, 11).unwrap();
        let (stp, ms) = default_market();
        let qc = QuadratureConfig::bulk();
        let strikes = [0.09, 0.17, 0.28];
        let ds = generate_dataset(&samples, &stp, &ms, &[48], &strikes, &qc).unwrap();
        assert!(ds.quarantined.is_empty(), "{:?}", ds.quarantined);
        assert_eq!(ds.rows.len(), 2 * 3);
        for r in &ds.rows {
            assert!(r.price.is_finite());
            assert!((-1e-4..=r.strike + 1e-4).contains(&r.price));
        }
        // fixed ordering: sample-major, then maturity, then strike
        assert_eq!(ds.rows[0].strike, 0.09);
        assert_eq!(ds.rows[3].a, samples[1].a);
        let again = generate_dataset(&samples, &stp, &ms, &[48], &strikes, &qc).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn invalid_theta_is_quarantined_with_coordinates() {
        let th = ThetaSample { a: -1.0, b: 1.0, c: 0.8575, d: 0.8, kappa: 1.0, r: 0.0 };
        let (stp, ms) = default_market();
        let qc = QuadratureConfig::bulk();
        let ds = generate_dataset(&[th], &stp, &ms, &[20, 48], &[0.1, 0.2], &qc).unwrap();
        assert!(ds.rows.is_empty());
        assert_eq!(ds.quarantined.len(), 4);
        assert_eq!(ds.quarantined[0].sample_index, 0);
        assert_eq!(ds.quarantined[3].maturity_days, 48);
    }

    #[test]
    fn dataset_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.cols");
        let rows = vec![
            TrainingRow {
                a: 0.049762,
                b: 0.849782,
                c: 0.8575,
                d: 0.769302,
                kappa: 7.798968,
                r: 0.00198,
                t: 20.0 / 365.0,
                strike: 0.17,
                price: 0.012345678901234567,
            },
            TrainingRow {
                a: 1.0 / 3.0,
                b: std::f64::consts::PI,
                c: 0.8575,
                d: 0.9,
                kappa: 1e-4,
                r: -0.25,
                t: 258.0 / 365.0,
                strike: 0.28,
                price: 1.7e-13,
            },
        ];
        save_dataset(&path, &rows).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(rows, back);

        save_dataset(&path, &[]).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), vec![]);
    }

    #[test]
    fn dataset_load_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.cols");
        std::fs::write(&path, "voltools-dataset v999\ncolumns: a b c d kappa r t strike price\nrows: 0\n").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Version(_))));

        std::fs::write(&path, "something else\n").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Schema(_))));

        let rows = vec![TrainingRow {
            a: 1.0, b: 1.0, c: 0.8575, d: 0.8, kappa: 1.0, r: 0.0,
            t: 0.1, strike: 0.17, price: 0.01,
        }];
        save_dataset(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, truncated).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Schema(_))));
    }
}
