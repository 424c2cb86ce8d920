//! Pricing, estimation, and calibration toolkit for power-type volatility
//! derivatives under a rough mean-reverting model driven by a tempered
//! stable subordinator, with a neural surrogate for the pricing map.

pub mod activity;
pub mod calibrate;
pub mod charfn;
pub mod dataset;
pub mod error;
pub mod kernel;
pub mod market;
pub mod pricer;
pub mod quad;
pub mod special;
pub mod surrogate;

pub use activity::{
    activity_signature, estimate_beta, power_variation, scan_grid, truncation_sensitivity,
    ActivityConfig, BetaMethod, HighFreqSeries, SensitivityRow,
};
pub use calibrate::{
    calibrate, ga_minimize, lbfgs_box, objective, objective_flagged, r_bucket, timeseries_eval,
    CalParams, CalibrationProblem, CalibrationResult, DatedQuote, EvalReport, GaConfig,
    PricingOracle, RefineConfig, RefineResult, R_MATURITY_DAYS,
};
pub use charfn::{conditional_cf, Backend, CfEvaluator, MarketState, QuadratureConfig};
pub use dataset::{
    default_market, default_strikes, generate_dataset, lhs_sample, load_dataset, save_dataset,
    save_quarantine, Dataset, ParameterBox, QuarantinedRow, ThetaSample, TrainingRow,
    DEFAULT_MATURITY_DAYS,
};
pub use error::{Error, Result};
pub use kernel::{KernelParams, DEFAULT_DELTA};
pub use market::{
    filter_convex, filter_monotonic, load_quotes, parity_bounds_check, run_filters, DropReason,
    FilterMode, FilterReport, Quote, QuoteTable,
};
pub use pricer::{price_grid, put_price, OptionSpec, PriceTable};
pub use special::{StableParams, SubordinatorParams};
pub use surrogate::{
    fit, load_model, save_model, split_dataset, Loss, MlpSpec, ScalerStats, SurrogateModel,
    TrainConfig,
};
