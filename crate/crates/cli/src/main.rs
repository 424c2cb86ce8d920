//! Batch driver: ingestion, filtering, activity estimation, dataset
//! generation, training, pricing, backend validation, and calibration
//! as reproducible seeded runs. Every run writes a manifest echoing the
//! resolved configuration.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rouvol::{
    calibrate, default_market, default_strikes, estimate_beta, generate_dataset, lhs_sample,
    load_dataset, load_model, load_quotes, parity_bounds_check, put_price, run_filters,
    save_dataset, save_model, save_quarantine, scan_grid, split_dataset, timeseries_eval,
    truncation_sensitivity, ActivityConfig, Backend, CalParams, CalibrationProblem, CfEvaluator,
    DatedQuote, Error, FilterMode, GaConfig, HighFreqSeries, KernelParams, Loss, MarketState,
    OptionSpec, ParameterBox, PricingOracle, QuadratureConfig, Quote, RefineConfig, StableParams,
    SubordinatorParams, TrainConfig, DEFAULT_DELTA, DEFAULT_MATURITY_DAYS,
    R_MATURITY_DAYS,
};

#[derive(Parser)]
#[command(name = "voltools", version, about = "volatility-derivative pricing toolkit")]
struct Cli {
    /// Optional JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker count for parallel maps; 1 forces sequential execution.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Manifest path; defaults to `<out>.manifest` or `voltools.manifest`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Price one put from a parameter file.
    Price(PriceArgs),
    /// Screen a quote panel (monotonicity, convexity, parity).
    Filter(FilterArgs),
    /// Jump-activity index from a high-frequency series.
    Activity(ActivityArgs),
    /// Latin-hypercube training table over the parameter box.
    Generate(GenerateArgs),
    /// Fit the pricing surrogate on a generated table.
    Train(TrainArgs),
    /// Two-stage calibration against a cleaned quote panel.
    Calibrate(CalibrateArgs),
    /// Fast-vs-oracle characteristic function agreement metrics.
    ValidateBackends(ValidateArgs),
    /// Out-of-sample metrics for fixed calibrated parameters.
    EvalTimeseries(EvalArgs),
}

#[derive(Args)]
struct PriceArgs {
    /// JSON parameter file (a, b, c, d, kappa, r[4], alpha, zeta, spot).
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity_days: u32,
    /// Remainder override; defaults to the nearest maturity bucket's r.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of mono,convex,parity.
    #[arg(long, default_value = "mono,convex,parity")]
    filters: String,
    /// Rescan convexity triples to a fixed point instead of one pass.
    #[arg(long)]
    fixpoint: bool,
}

#[derive(Args)]
struct ActivityArgs {
    /// CSV with header `timestamp,value`.
    #[arg(long)]
    input: PathBuf,
    /// Truncation level for the power variation (p < 2 branch).
    #[arg(long = "L")]
    l: Option<f64>,
    /// Moment scan grid, colon-separated lo:hi:step.
    #[arg(long)]
    scan: Option<String>,
    /// Optional truncation sensitivity table output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    quarantine: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// mse | inv-premium | log-target
    #[arg(long, default_value = "mse")]
    loss: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    quotes: PathBuf,
    /// Surrogate model file; omit to price analytically.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    gens: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Number of characteristic function evaluations to compare.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Optional per-evaluation error table output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Calibration result JSON (theta and c).
    #[arg(long)]
    params: PathBuf,
    /// CSV with header `date,strike,maturity_days,mid`.
    #[arg(long)]
    series: PathBuf,
    /// Surrogate model file; omit to price analytically.
    #[arg(long)]
    model: Option<PathBuf>,
}

/// Optional config file; everything is overridable per field. Flags win
/// over these values, which win over the built-in defaults.
#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(rename = "box")]
    pbox: Option<ParameterBox>,
    quadrature: Option<QuadratureConfig>,
    ga: Option<GaConfig>,
    refine: Option<RefineConfig>,
    train: Option<TrainConfig>,
    maturity_days: Option<Vec<u32>>,
    strikes: Option<Vec<f64>>,
    truncation_l: Option<f64>,
    alpha: Option<f64>,
    zeta: Option<f64>,
}

/// Model parameter file consumed by `price` and available as a seed for
/// calibration bounds.
#[derive(serde::Serialize, serde::Deserialize)]
struct ParamsFile {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    kappa: f64,
    r: [f64; 4],
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_zeta")]
    zeta: f64,
    #[serde(default = "default_spot")]
    spot: f64,
}

fn default_alpha() -> f64 {
    1.715
}
fn default_zeta() -> f64 {
    0.01
}
fn default_spot() -> f64 {
    0.1793
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 3 for data problems (unreadable/ill-formed inputs), 4 for numerical
/// integrity failures; usage errors exit 2 via clap before we get here.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Io(_)
            | Error::Csv(_)
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::Version(_),
        ) => 3,
        Some(_) => 4,
        None => {
            if e.downcast_ref::<std::io::Error>().is_some() {
                3
            } else {
                4
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config: ConfigFile = match &cli.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
            .map_err(|e| Error::Schema(format!("config {}: {e}", p.display())))?,
        None => ConfigFile::default(),
    };
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut man = Manifest::new(threads, &cli.config);
    match &cli.cmd {
        Cmd::Price(a) => cmd_price(a, &config, &mut man)?,
        Cmd::Filter(a) => cmd_filter(a, &mut man)?,
        Cmd::Activity(a) => cmd_activity(a, &config, &mut man)?,
        Cmd::Generate(a) => cmd_generate(a, &config, &mut man)?,
        Cmd::Train(a) => cmd_train(a, &config, &mut man)?,
        Cmd::Calibrate(a) => cmd_calibrate(a, &config, &mut man)?,
        Cmd::ValidateBackends(a) => cmd_validate(a, &config, &mut man)?,
        Cmd::EvalTimeseries(a) => cmd_eval(a, &config, &mut man)?,
    }
    man.write(cli.manifest.as_deref())?;
    Ok(())
}

/// Human-readable key-value run record. The timestamp is the only field
/// allowed to differ between identical runs.
struct Manifest {
    lines: Vec<(String, String)>,
    /// Produced primary output, used to derive the default manifest path.
    out_hint: Option<PathBuf>,
}

impl Manifest {
    fn new(threads: usize, config: &Option<PathBuf>) -> Self {
        let ts = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let mut m = Manifest { lines: Vec::new(), out_hint: None };
        m.push("timestamp", ts);
        m.push("threads", threads);
        if let Some(p) = config {
            m.push("config_file", p.display());
        }
        m
    }

    fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn push_json(&mut self, key: &str, value: &impl serde::Serialize) {
        self.lines.push((key.to_string(), serde_json::to_string(value).unwrap()));
    }

    fn write(&self, explicit: Option<&Path>) -> anyhow::Result<()> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => match &self.out_hint {
                Some(out) => {
                    let mut s = out.as_os_str().to_owned();
                    s.push(".manifest");
                    PathBuf::from(s)
                }
                None => PathBuf::from("voltools.manifest"),
            },
        };
        let mut f = fs::File::create(path)?;
        writeln!(f, "voltools-manifest v1")?;
        for (k, v) in &self.lines {
            writeln!(f, "{k}: {v}")?;
        }
        Ok(())
    }
}

fn load_params(path: &Path) -> anyhow::Result<ParamsFile> {
    let text = fs::read_to_string(path)?;
    let p: ParamsFile = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("params {}: {e}", path.display())))?;
    Ok(p)
}

fn resolve_qc(config: &ConfigFile) -> QuadratureConfig {
    config.quadrature.unwrap_or_else(QuadratureConfig::bulk)
}

fn market_from(p: &ParamsFile) -> anyhow::Result<(StableParams, MarketState)> {
    let stp = StableParams::new(p.alpha, p.zeta)?;
    let ms = MarketState::new(p.spot * p.spot, 0.0, 0.0)?;
    Ok((stp, ms))
}

fn cmd_price(a: &PriceArgs, config: &ConfigFile, man: &mut Manifest) -> anyhow::Result<()> {
    let p = load_params(&a.params)?;
    let (stp, ms) = market_from(&p)?;
    let sp = SubordinatorParams::new(p.a, p.b, p.c)?;
    let kp = KernelParams::new(p.d, p.kappa, DEFAULT_DELTA)?;
    let bucket = rouvol::r_bucket(a.maturity_days);
    let r = a.r.unwrap_or(p.r[bucket]);
    let qc = resolve_qc(config);
    let spec = OptionSpec::new(a.strike, a.maturity_days as f64 / 365.0)?;
    let price = put_price(&spec, &sp, &kp, &stp, &ms, r, &qc)?;
    man.push("command", "price");
    man.push("params_file", a.params.display());
    man.push("strike", a.strike);
    man.push("maturity_days", a.maturity_days);
    man.push("r", r);
    man.push_json("quadrature", &qc);
    man.push("price", format!("{price:.17e}"));
    println!("{price:.17e}");
    if let Some(out) = &a.out {
        fs::write(out, format!("maturity_days strike price\n{} {:.17e} {price:.17e}\n", a.maturity_days, a.strike))?;
        man.out_hint = Some(out.clone());
    }
    Ok(())
}

fn write_quotes(path: &Path, quotes: &[Quote]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "Strike", "IVM_call", "Volm_call", "TTM_year", "mid_price_call", "IVM_Put", "Volm_Put",
        "mid_price_put", "spot_price", "Bid", "Ask", "Bid_Put", "Ask_Put",
    ])?;
    for q in quotes {
        w.write_record([
            q.strike.to_string(),
            q.iv_call.to_string(),
            q.volume_call.to_string(),
            q.ttm_years.to_string(),
            q.mid_call.to_string(),
            q.iv_put.to_string(),
            q.volume_put.to_string(),
            q.mid_put.to_string(),
            q.spot.to_string(),
            q.bid_call.to_string(),
            q.ask_call.to_string(),
            q.bid_put.to_string(),
            q.ask_put.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_filter(a: &FilterArgs, man: &mut Manifest) -> anyhow::Result<()> {
    let mut mono = false;
    let mut convex = false;
    let mut parity = false;
    for name in a.filters.split(',').filter(|s| !s.is_empty()) {
        match name.trim() {
            "mono" => mono = true,
            "convex" => convex = true,
            "parity" => parity = true,
            other => {
                return Err(Error::Schema(format!("unknown filter `{other}`")).into());
            }
        }
    }
    let table = load_quotes(&a.input)?;
    let mode = if a.fixpoint { FilterMode::Fixpoint } else { FilterMode::SinglePass };
    let report = run_filters(&table.quotes, mono, convex, mode);
    let parity_flags = if parity { parity_bounds_check(&table.quotes).dropped.len() } else { 0 };
    write_quotes(&a.out, &report.kept)?;
    man.out_hint = Some(a.out.clone());
    man.push("command", "filter");
    man.push("input", a.input.display());
    man.push("filters", &a.filters);
    man.push("fixpoint", a.fixpoint);
    man.push("rows_in", table.quotes.len());
    man.push("rows_rejected_on_load", table.rejected.len());
    man.push("rows_kept", report.kept.len());
    for (q, reason) in &report.dropped {
        man.push("dropped", format!("{reason} strike={} maturity_days={}", q.strike, q.maturity_days));
    }
    man.push("parity_flagged", parity_flags);
    println!(
        "kept {} of {} quotes ({} dropped, {} parity-flagged)",
        report.kept.len(),
        table.quotes.len(),
        report.dropped.len(),
        parity_flags
    );
    Ok(())
}

fn parse_scan(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Schema(format!("scan `{spec}` is not lo:hi:step")).into());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Schema(format!("scan `{spec}`: {e}")))?;
    Ok(scan_grid(nums[0], nums[1], nums[2]))
}

fn load_series(path: &Path) -> anyhow::Result<HighFreqSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let hdr = rdr.headers().map_err(|e| Error::Schema(format!("unreadable header: {e}")))?;
    if hdr.iter().collect::<Vec<_>>() != ["timestamp", "value"] {
        return Err(Error::Schema("expected header `timestamp,value`".into()).into());
    }
    let mut ts = Vec::new();
    let mut vals = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let bad = |msg: &str| Error::Parse { line: i + 2, msg: msg.into() };
        ts.push(rec.get(0).ok_or_else(|| bad("missing timestamp"))?.parse::<f64>().map_err(|_| bad("bad timestamp"))?);
        vals.push(rec.get(1).ok_or_else(|| bad("missing value"))?.parse::<f64>().map_err(|_| bad("bad value"))?);
    }
    Ok(HighFreqSeries::new(ts, vals)?)
}

fn cmd_activity(a: &ActivityArgs, config: &ConfigFile, man: &mut Manifest) -> anyhow::Result<()> {
    let series = load_series(&a.input)?;
    let mut cfg = ActivityConfig::default();
    if let Some(l) = config.truncation_l {
        cfg.truncation_l = l;
    }
    if let Some(l) = a.l {
        cfg.truncation_l = l;
    }
    if let Some(spec) = &a.scan {
        cfg.p_grid = parse_scan(spec)?;
    }
    let (beta, method) = estimate_beta(&series, &cfg)?;
    man.push("command", "activity");
    man.push("input", a.input.display());
    man.push("truncation_l", cfg.truncation_l);
    man.push("scan_points", cfg.p_grid.len());
    man.push("beta_hat", format!("{beta:.17e}"));
    man.push("method", format!("{method:?}"));
    println!("beta_hat {beta:.17e} ({method:?})");
    if let Some(out) = &a.out {
        let levels: Vec<f64> = [0.1, 0.2, 0.3, 0.5, 0.75, 1.0]
            .iter()
            .map(|f| f * cfg.truncation_l)
            .collect();
        let rows = truncation_sensitivity(&series, &levels, &cfg)?;
        let mut text = String::from("truncation_l truncated_share beta_hat fallback\n");
        for r in &rows {
            text.push_str(&format!(
                "{:.17e} {:.17e} {:.17e} {}\n",
                r.truncation_l, r.truncated_share, r.beta_hat, r.fallback
            ));
        }
        fs::write(out, text)?;
        man.out_hint = Some(out.clone());
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs, config: &ConfigFile, man: &mut Manifest) -> anyhow::Result<()> {
    let pbox = config.pbox.clone().unwrap_or_default();
    let qc = resolve_qc(config);
    let maturities = config.maturity_days.clone().unwrap_or_else(|| DEFAULT_MATURITY_DAYS.to_vec());
    let strikes = config.strikes.clone().unwrap_or_else(default_strikes);
    let (mut stp, ms) = default_market();
    if let (Some(alpha), zeta) = (config.alpha, config.zeta.unwrap_or(0.01)) {
        stp = StableParams::new(alpha, zeta)?;
    }
    let samples = lhs_sample(a.n, &pbox, a.seed)?;
    let ds = generate_dataset(&samples, &stp, &ms, &maturities, &strikes, &qc)?;
    save_dataset(&a.out, &ds.rows)?;
    man.out_hint = Some(a.out.clone());
    if let Some(qpath) = &a.quarantine {
        save_quarantine(qpath, &ds.quarantined)?;
    }
    man.push("command", "generate");
    man.push("n", a.n);
    man.push("seed", a.seed);
    man.push_json("box", &pbox);
    man.push_json("quadrature", &qc);
    man.push_json("maturity_days", &maturities);
    man.push_json("strikes", &strikes);
    man.push("rows", ds.rows.len());
    man.push("quarantined", ds.quarantined.len());
    println!("{} rows written, {} quarantined", ds.rows.len(), ds.quarantined.len());
    Ok(())
}

fn parse_loss(name: &str) -> anyhow::Result<Loss> {
    Ok(match name {
        "mse" => Loss::Mse,
        "inv-premium" => Loss::inv_premium_default(),
        "log-target" => Loss::log_target_default(),
        other => return Err(Error::Schema(format!("unknown loss `{other}`")).into()),
    })
}

fn cmd_train(a: &TrainArgs, config: &ConfigFile, man: &mut Manifest) -> anyhow::Result<()> {
    let rows = load_dataset(&a.data)?;
    let mut cfg = config.train.clone().unwrap_or_default();
    cfg.loss = parse_loss(&a.loss)?;
    cfg.seed = a.seed;
    let (train, val, test) = split_dataset(&rows, cfg.fractions, cfg.seed)?;
    let model = rouvol::fit(&train, &val, &cfg)?;
    let test_rmse = {
        let mut se = 0.0;
        for r in &test {
            se += (model.predict_one(&r.features()) - r.price).powi(2);
        }
        (se / test.len().max(1) as f64).sqrt()
    };
    save_model(&a.out, &model)?;
    man.out_hint = Some(a.out.clone());
    // plot-ready training curve: epoch, train loss, validation loss
    let mut curve = String::from("epoch train_loss val_loss\n");
    for (i, (tr, va)) in model.curve.iter().enumerate() {
        curve.push_str(&format!("{i} {tr:.17e} {va:.17e}\n"));
    }
    let mut curve_path = a.out.as_os_str().to_owned();
    curve_path.push(".curve.txt");
    fs::write(PathBuf::from(curve_path), curve)?;
    man.push("command", "train");
    man.push("data", a.data.display());
    man.push("seed", a.seed);
    man.push_json("train_config", &cfg);
    man.push("rows", rows.len());
    man.push("epochs_run", model.epochs_run);
    man.push("best_epoch", model.best_epoch);
    man.push("best_val_loss", format!("{:.17e}", model.best_val_loss));
    man.push("test_abs_rmse", format!("{test_rmse:.17e}"));
    println!(
        "trained {} epochs (best {}), test abs-RMSE {test_rmse:.6e}",
        model.epochs_run, model.best_epoch
    );
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs, config: &ConfigFile, man: &mut Manifest) -> anyhow::Result<()> {
    let table = load_quotes(&a.quotes)?;
    if table.quotes.is_empty() {
        return Err(Error::Degenerate("quote panel is empty".into()).into());
    }
    let oracle = match &a.model {
        Some(p) => PricingOracle::Surrogate(load_model(p)?),
        None => {
            let (stp, ms) = default_market();
            PricingOracle::Analytic { stp, ms, qc: resolve_qc(config) }
        }
    };
    let bounds = config.pbox.clone().unwrap_or_default();
    let c = bounds.c;
    let problem = CalibrationProblem { quotes: table.quotes.clone(), bounds, c, oracle };
    let mut ga = config.ga.clone().unwrap_or_default();
    if let Some(p) = a.pop {
        ga.population = p;
    }
    if let Some(g) = a.gens {
        ga.generations = g;
    }
    ga.seed = a.seed;
    let refine = config.refine.clone().unwrap_or_default();
    let result = calibrate(&problem, &ga, &refine)?;
    fs::write(&a.out, serde_json::to_string_pretty(&result)?)?;
    man.out_hint = Some(a.out.clone());
    // plot-ready traces: stage, step index, objective
    let mut trace = String::from("stage step objective\n");
    for (i, fit) in result.ga_trace.iter().enumerate() {
        trace.push_str(&format!("ga {i} {:.17e}\n", -fit));
    }
    for (i, v) in result.refine_trace.iter().enumerate() {
        trace.push_str(&format!("refine {i} {v:.17e}\n"));
    }
    let mut trace_path = a.out.as_os_str().to_owned();
    trace_path.push(".trace.txt");
    fs::write(PathBuf::from(trace_path), trace)?;
    man.push("command", "calibrate");
    man.push("quotes", a.quotes.display());
    man.push("seed", a.seed);
    man.push_json("ga", &ga);
    man.push_json("refine", &refine);
    man.push_json("bounds", &problem.bounds);
    man.push("quotes_used", problem.quotes.len());
    man.push("objective", format!("{:.17e}", result.objective));
    man.push("line_search_failed", result.line_search_failed);
    println!(
        "objective {:.6e} over {} quotes (a={:.6} b={:.6} d={:.6} kappa={:.6})",
        result.objective,
        problem.quotes.len(),
        result.theta.a,
        result.theta.b,
        result.theta.d,
        result.theta.kappa
    );
    Ok(())
}

fn cmd_validate(a: &ValidateArgs, config: &ConfigFile, man: &mut Manifest) -> anyhow::Result<()> {
    use rand::Rng;
    use rand::SeedableRng;
    let pbox = config.pbox.clone().unwrap_or_default();
    let qc_fast = config.quadrature.unwrap_or_default();
    let qc_oracle = QuadratureConfig { backend: Backend::Oracle, ..qc_fast };
    let (stp, ms) = default_market();
    // evaluate several frequencies per parameter draw so evaluator setup
    // amortizes over the requested count
    const PER_DRAW: usize = 20;
    let draws = a.n.div_ceil(PER_DRAW);
    let samples = lhs_sample(draws, &pbox, a.seed)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed ^ 0x9e3779b97f4a7c15);
    let mut errs: Vec<(f64, f64)> = Vec::with_capacity(draws * PER_DRAW);
    for th in &samples {
        let sp = SubordinatorParams::new(th.a, th.b, th.c)?;
        let kp = KernelParams::new(th.d, th.kappa.max(1e-4), DEFAULT_DELTA)?;
        let days = R_MATURITY_DAYS[rng.random_range(0..4)];
        let t = days as f64 / 365.0;
        let fast = CfEvaluator::new(&sp, &kp, &stp, &ms, t, th.r, &qc_fast)?;
        let oracle = CfEvaluator::new(&sp, &kp, &stp, &ms, t, th.r, &qc_oracle)?;
        for _ in 0..PER_DRAW {
            let l: f64 = rng.random_range(0.01..50.0);
            let d = (fast.eval(l)? - oracle.eval(l)?).norm();
            errs.push((l, d));
        }
    }
    errs.truncate(a.n);
    let n = errs.len() as f64;
    let mean = errs.iter().map(|(_, d)| d).sum::<f64>() / n;
    let max = errs.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let out_of_tol = errs.iter().filter(|(_, d)| *d > 1e-5).count();
    man.push("command", "validate-backends");
    man.push("n", errs.len());
    man.push("seed", a.seed);
    man.push_json("quadrature", &qc_fast);
    man.push("mean_abs_err", format!("{mean:.17e}"));
    man.push("max_abs_err", format!("{max:.17e}"));
    man.push("out_of_tol_1e-5", out_of_tol);
    println!("evaluations      {}", errs.len());
    println!("mean |dphi|      {mean:.6e}");
    println!("max |dphi|       {max:.6e}");
    println!("rows out of tol. (1e-5)  {out_of_tol}");
    if let Some(out) = &a.out {
        let mut text = String::from("l abs_err\n");
        for (l, d) in &errs {
            text.push_str(&format!("{l:.17e} {d:.17e}\n"));
        }
        fs::write(out, text)?;
        man.out_hint = Some(out.clone());
    }
    Ok(())
}

fn load_dated_series(path: &Path) -> anyhow::Result<Vec<DatedQuote>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let hdr = rdr.headers().map_err(|e| Error::Schema(format!("unreadable header: {e}")))?;
    if hdr.iter().collect::<Vec<_>>() != ["date", "strike", "maturity_days", "mid"] {
        return Err(Error::Schema("expected header `date,strike,maturity_days,mid`".into()).into());
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let bad = |msg: String| Error::Parse { line: i + 2, msg };
        let field = |j: usize| rec.get(j).ok_or_else(|| bad(format!("missing column {j}")));
        out.push(DatedQuote {
            date: field(0)?.to_string(),
            strike: field(1)?.parse().map_err(|_| bad("bad strike".into()))?,
            maturity_days: field(2)?.parse().map_err(|_| bad("bad maturity_days".into()))?,
            mid: field(3)?.parse().map_err(|_| bad("bad mid".into()))?,
        });
    }
    Ok(out)
}

fn cmd_eval(a: &EvalArgs, config: &ConfigFile, man: &mut Manifest) -> anyhow::Result<()> {
    let text = fs::read_to_string(&a.params)?;
    // accept either a calibration result file or a bare parameter file
    let (theta, c) = match serde_json::from_str::<rouvol::CalibrationResult>(&text) {
        Ok(res) => (res.theta, res.c),
        Err(_) => {
            let p: ParamsFile = serde_json::from_str(&text)
                .map_err(|e| Error::Schema(format!("params {}: {e}", a.params.display())))?;
            (CalParams { a: p.a, b: p.b, d: p.d, kappa: p.kappa, r: p.r }, p.c)
        }
    };
    let series = load_dated_series(&a.series)?;
    let oracle = match &a.model {
        Some(p) => PricingOracle::Surrogate(load_model(p)?),
        None => {
            let (stp, ms) = default_market();
            PricingOracle::Analytic { stp, ms, qc: resolve_qc(config) }
        }
    };
    let report = timeseries_eval(&theta, c, &oracle, &series)?;
    man.push("command", "eval-timeseries");
    man.push("params", a.params.display());
    man.push("series", a.series.display());
    man.push("n_used", report.n_used);
    man.push("mae", format!("{:.17e}", report.mae));
    man.push("rmse", format!("{:.17e}", report.rmse));
    man.push("mape_pct", format!("{:.17e}", report.mape_pct));
    man.push("mape_excluded", report.mape_excluded);
    man.push("pricing_failures", report.pricing_failures);
    println!("MAE   {:.6e}", report.mae);
    println!("RMSE  {:.6e}", report.rmse);
    println!("MAPE  {:.4}% ({} excluded below one tick)", report.mape_pct, report.mape_excluded);
    println!("used {} dates, {} pricing failures", report.n_used, report.pricing_failures);
    Ok(())
}
