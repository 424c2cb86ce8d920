//! Quote ingestion and the no-arbitrage screens that produce the
//! calibration panel.

use std::path::Path;

use crate::error::{Error, Result};

/// One strike/maturity row of the vendor panel, both sides.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Quote {
    pub strike: f64,
    pub maturity_days: u32,
    pub ttm_years: f64,
    pub iv_call: f64,
    pub volume_call: f64,
    pub mid_call: f64,
    pub iv_put: f64,
    pub volume_put: f64,
    pub mid_put: f64,
    pub spot: f64,
    pub bid_call: f64,
    pub ask_call: f64,
    pub bid_put: f64,
    pub ask_put: f64,
}

/// Parsed panel plus per-row rejections.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuoteTable {
    pub quotes: Vec<Quote>,
    /// (1-based data line, reason) for rows that failed invariants.
    pub rejected: Vec<(usize, String)>,
}

/// Why a quote was dropped by a screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropReason {
    Monotonicity,
    Convexity,
    Parity,
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DropReason::Monotonicity => write!(f, "monotonicity"),
            DropReason::Convexity => write!(f, "convexity"),
            DropReason::Parity => write!(f, "parity"),
        }
    }
}

/// Outcome of a screen: a partition of its input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterReport {
    pub kept: Vec<Quote>,
    pub dropped: Vec<(Quote, DropReason)>,
}

impl FilterReport {
    pub fn count(&self, reason: DropReason) -> usize {
        self.dropped.iter().filter(|(_, r)| *r == reason).count()
    }
}

/// Whether violating triples are rescanned after a drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterMode {
    #[default]
    SinglePass,
    Fixpoint,
}

const HEADER: [&str; 13] = [
    "Strike",
    "IVM_call",
    "Volm_call",
    "TTM_year",
    "mid_price_call",
    "IVM_Put",
    "Volm_Put",
    "mid_price_put",
    "spot_price",
    "Bid",
    "Ask",
    "Bid_Put",
    "Ask_Put",
];

/// Load a comma-separated quote panel with the vendor header.
pub fn load_quotes(path: &Path) -> Result<QuoteTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    {
        let got: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let missing: Vec<&str> = HEADER
            .iter()
            .filter(|want| !got.iter().any(|g| g == *want))
            .copied()
            .collect();
        if !missing.is_empty() {
            return Err(Error::Schema(format!("missing columns: {}", missing.join(", "))));
        }
    }
    let mut table = QuoteTable::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        match parse_row(&rec) {
            Ok(q) => table.quotes.push(q),
            Err(reason) => table.rejected.push((line, reason)),
        }
    }
    Ok(table)
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<Quote, String> {
    let field = |i: usize| -> std::result::Result<f64, String> {
        let raw = rec.get(i).ok_or_else(|| format!("missing field {}", HEADER[i]))?;
        if raw.is_empty() {
            return Err(format!("empty field {}", HEADER[i]));
        }
        raw.parse::<f64>().map_err(|_| format!("bad number in {}: {raw:?}", HEADER[i]))
    };
    let strike = field(0)?;
    let ttm_years = field(3)?;
    if !(strike > 0.0) {
        return Err(format!("strike must be > 0, got {strike}"));
    }
    let maturity_days = (ttm_years * 365.0).round() as i64;
    if maturity_days <= 0 {
        return Err(format!("non-positive maturity: {ttm_years} years"));
    }
    let q = Quote {
        strike,
        maturity_days: maturity_days as u32,
        ttm_years,
        iv_call: field(1)?,
        volume_call: field(2)?,
        mid_call: field(4)?,
        iv_put: field(5)?,
        volume_put: field(6)?,
        mid_put: field(7)?,
        spot: field(8)?,
        bid_call: field(9)?,
        ask_call: field(10)?,
        bid_put: field(11)?,
        ask_put: field(12)?,
    };
    if q.bid_call > q.ask_call {
        return Err(format!("call bid {} above ask {}", q.bid_call, q.ask_call));
    }
    if q.bid_put > q.ask_put {
        return Err(format!("put bid {} above ask {}", q.bid_put, q.ask_put));
    }
    Ok(q)
}

/// Group indices by maturity, each group sorted ascending by strike.
fn maturity_groups(quotes: &[Quote]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..quotes.len()).collect();
    order.sort_by(|&i, &j| {
        (quotes[i].maturity_days, quotes[i].strike)
            .partial_cmp(&(quotes[j].maturity_days, quotes[j].strike))
            .unwrap()
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some(g) if quotes[g[0]].maturity_days == quotes[idx].maturity_days => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    groups
}

fn partition(quotes: &[Quote], drop_flags: &[Option<DropReason>]) -> FilterReport {
    let mut report = FilterReport::default();
    for (q, flag) in quotes.iter().zip(drop_flags) {
        match flag {
            Some(r) => report.dropped.push((q.clone(), *r)),
            None => report.kept.push(q.clone()),
        }
    }
    report
}

/// Drop quotes whose put mid decreases from the previous kept strike
/// within the same maturity: the later (higher-strike) quote is removed.
pub fn filter_monotonic(quotes: &[Quote]) -> FilterReport {
    let mut flags = vec![None; quotes.len()];
    for group in maturity_groups(quotes) {
        let mut last_kept: Option<f64> = None;
        for idx in group {
            let p = quotes[idx].mid_put;
            match last_kept {
                Some(prev) if p < prev => flags[idx] = Some(DropReason::Monotonicity),
                _ => last_kept = Some(p),
            }
        }
    }
    partition(quotes, &flags)
}

/// Drop interior quotes lying strictly above the chord of their strike
/// neighbors (butterfly arbitrage).
pub fn filter_convex(quotes: &[Quote], mode: FilterMode) -> FilterReport {
    let mut flags: Vec<Option<DropReason>> = vec![None; quotes.len()];
    for group in maturity_groups(quotes) {
        let mut active = group;
        loop {
            let mut dropped_any = false;
            let mut next_active = Vec::with_capacity(active.len());
            let mut skip = vec![false; active.len()];
            for w in 0..active.len().saturating_sub(2) {
                let (i0, i1, i2) = (active[w], active[w + 1], active[w + 2]);
                let (k0, k1, k2) = (quotes[i0].strike, quotes[i1].strike, quotes[i2].strike);
                let (p0, p1, p2) =
                    (quotes[i0].mid_put, quotes[i1].mid_put, quotes[i2].mid_put);
                let chord = ((k2 - k1) * p0 + (k1 - k0) * p2) / (k2 - k0);
                if p1 > chord {
                    flags[i1] = Some(DropReason::Convexity);
                    skip[w + 1] = true;
                    dropped_any = true;
                }
            }
            for (w, idx) in active.iter().enumerate() {
                if !skip[w] {
                    next_active.push(*idx);
                }
            }
            if mode == FilterMode::SinglePass || !dropped_any {
                break;
            }
            active = next_active;
        }
    }
    partition(quotes, &flags)
}

/// Flag pairs outside the parity corridor
/// `bidEC - askEP <= S0 - K <= askEC - bidEP`. Diagnostic only: the
/// result is reported, not applied to the calibration panel.
pub fn parity_bounds_check(quotes: &[Quote]) -> FilterReport {
    let mut flags = vec![None; quotes.len()];
    for (i, q) in quotes.iter().enumerate() {
        let gap = q.spot - q.strike;
        if q.bid_call - q.ask_put > gap || gap > q.ask_call - q.bid_put {
            flags[i] = Some(DropReason::Parity);
        }
    }
    partition(quotes, &flags)
}

/// Apply the selected screens in order (monotonicity, convexity), each
/// feeding the next's input. Parity remains diagnostic and is reported
/// from the original panel.
pub fn run_filters(
    quotes: &[Quote],
    mono: bool,
    convex: bool,
    mode: FilterMode,
) -> FilterReport {
    let mut kept: Vec<Quote> = quotes.to_vec();
    let mut dropped = Vec::new();
    if mono {
        let rep = filter_monotonic(&kept);
        kept = rep.kept;
        dropped.extend(rep.dropped);
    }
    if convex {
        let rep = filter_convex(&kept, mode);
        kept = rep.kept;
        dropped.extend(rep.dropped);
    }
    FilterReport { kept, dropped }
}
