//! From-scratch feedforward surrogate for the pricing map
//! (a, b, c, d, κ, r, t, K) → price: ELU hidden layers, Adam training
//! with early stopping and plateau-halved learning rate, and the
//! premium-weighted / log-target loss variants.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::TrainingRow;
use crate::error::{Error, Result};

/// Network shape. Hidden layers use ELU; the output layer is linear.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub elu_alpha: f64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec { input_dim: 8, hidden: vec![64, 32, 32], output_dim: 1, elu_alpha: 1.0 }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::domain("layer sizes must be positive"));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let sizes: Vec<usize> = std::iter::once(self.input_dim)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.output_dim))
            .collect();
        sizes.windows(2).map(|w| (w[1], w[0])).collect()
    }
}

pub fn elu(x: f64, alpha: f64) -> f64 {
    if x > 0.0 { x } else { alpha * (x.exp() - 1.0) }
}

fn elu_prime(x: f64, alpha: f64) -> f64 {
    if x > 0.0 { 1.0 } else { alpha * x.exp() }
}

/// Per-feature z-score statistics, computed from the training split only.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalerStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl ScalerStats {
    pub fn fit(features: &[[f64; 8]], targets: &[f64]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Degenerate("empty training split".into()));
        }
        let n = features.len() as f64;
        let mut mean = vec![0.0; 8];
        for f in features {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; 8];
        for f in features {
            for ((s, v), m) in std.iter_mut().zip(f).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for (s, m) in std.iter_mut().zip(&mean) {
            *s = s.sqrt();
            // constant features (c is fixed by design) are centered only;
            // the threshold is relative because summing identical values
            // leaves rounding noise in the variance
            if !(*s > 1e-12 * m.abs().max(1.0)) {
                *s = 1.0;
            }
        }
        let tm = targets.iter().sum::<f64>() / n;
        let ts = (targets.iter().map(|y| (y - tm).powi(2)).sum::<f64>() / n).sqrt();
        if !(ts > 0.0) {
            return Err(Error::Degenerate("target has zero variance".into()));
        }
        Ok(ScalerStats { mean, std, target_mean: tm, target_std: ts })
    }

    pub fn scale(&self, f: &[f64; 8]) -> [f64; 8] {
        let mut out = [0.0; 8];
        for i in 0..8 {
            out[i] = (f[i] - self.mean[i]) / self.std[i];
        }
        out
    }

    pub fn unscale(&self, f: &[f64; 8]) -> [f64; 8] {
        let mut out = [0.0; 8];
        for i in 0..8 {
            out[i] = f[i] * self.std[i] + self.mean[i];
        }
        out
    }
}

/// Training loss. Inverse-premium weights squared errors by
/// (y + ε)^{−α}; log-target regresses on log(y + ε).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Loss {
    Mse,
    InvPremium { alpha: f64, eps: f64 },
    LogTarget { eps: f64 },
}

impl Default for Loss {
    fn default() -> Self {
        Loss::Mse
    }
}

impl Loss {
    pub fn inv_premium_default() -> Self {
        Loss::InvPremium { alpha: 0.5, eps: 0.01 }
    }

    pub fn log_target_default() -> Self {
        Loss::LogTarget { eps: 0.01 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Loss::Mse => Ok(()),
            Loss::InvPremium { alpha, eps } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::domain(format!("alpha must be in [0,1], got {alpha}")));
                }
                if !(eps > 0.0) {
                    return Err(Error::domain(format!("eps must be > 0, got {eps}")));
                }
                Ok(())
            }
            Loss::LogTarget { eps } => {
                if !(eps > 0.0) {
                    return Err(Error::domain(format!("eps must be > 0, got {eps}")));
                }
                Ok(())
            }
        }
    }

    /// Regression target in the loss's own space.
    fn transform(&self, y: f64) -> f64 {
        match *self {
            Loss::LogTarget { eps } => (y + eps).ln(),
            _ => y,
        }
    }

    fn inverse(&self, z: f64) -> f64 {
        match *self {
            Loss::LogTarget { eps } => z.exp() - eps,
            _ => z,
        }
    }

    /// Per-sample squared-error weight in transformed space.
    fn weight(&self, y: f64) -> f64 {
        match *self {
            Loss::InvPremium { alpha, eps } => (y + eps).powf(-alpha),
            _ => 1.0,
        }
    }
}

/// Mean inverse-premium-weighted squared error in price space.
pub fn loss_inv_premium(pred: &[f64], target: &[f64], alpha: f64, eps: f64) -> f64 {
    let n = pred.len() as f64;
    pred.iter()
        .zip(target)
        .map(|(p, y)| (y + eps).powf(-alpha) * (p - y).powi(2))
        .sum::<f64>()
        / n
}

/// Mean squared error between log-shifted prices.
pub fn loss_log_target(pred: &[f64], target: &[f64], eps: f64) -> f64 {
    let n = pred.len() as f64;
    pred.iter()
        .zip(target)
        .map(|(p, y)| ((p + eps).ln() - (y + eps).ln()).powi(2))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Epochs without improvement > 1e-6 before the rate halves.
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_learning_rate: f64,
    pub loss: Loss,
    pub fractions: (f64, f64, f64),
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 1024,
            max_epochs: 400,
            patience: 25,
            plateau_patience: 10,
            plateau_factor: 0.5,
            min_learning_rate: 1e-6,
            loss: Loss::Mse,
            fractions: (0.90, 0.05, 0.05),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::domain("patience must be >= 1"));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::domain("plateau factor must be in (0,1)"));
        }
        let (a, b, c) = self.fractions;
        if !(a > 0.0 && b > 0.0 && c > 0.0) || (a + b + c - 1.0).abs() > 1e-12 {
            return Err(Error::domain("split fractions must be positive and sum to 1"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::domain("batch size and epoch count must be >= 1"));
        }
        self.loss.validate()
    }
}

/// Stratified split by (t, K) cell, each cell divided in the requested
/// proportions; deterministic under the seed.
pub fn split_dataset(
    rows: &[TrainingRow],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<TrainingRow>, Vec<TrainingRow>, Vec<TrainingRow>)> {
    if rows.is_empty() {
        return Err(Error::Degenerate("empty dataset".into()));
    }
    let (fa, fb, fc) = fractions;
    if !(fa > 0.0 && fb > 0.0 && fc > 0.0) || (fa + fb + fc - 1.0).abs() > 1e-12 {
        return Err(Error::domain("split fractions must be positive and sum to 1"));
    }
    let mut cells: std::collections::BTreeMap<(u64, u64), Vec<usize>> = Default::default();
    for (i, r) in rows.iter().enumerate() {
        cells.entry((r.t.to_bits(), r.strike.to_bits())).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for idxs in cells.values_mut() {
        idxs.shuffle(&mut rng);
        let n = idxs.len();
        let n_test = (fc * n as f64).round() as usize;
        let n_val = (fb * n as f64).round() as usize;
        let n_train = n.saturating_sub(n_test + n_val);
        for (j, &i) in idxs.iter().enumerate() {
            if j < n_train {
                train.push(rows[i]);
            } else if j < n_train + n_val {
                val.push(rows[i]);
            } else {
                test.push(rows[i]);
            }
        }
    }
    Ok((train, val, test))
}

/// The trained surrogate: layer tensors, input/target scaler, and the
/// training record.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SurrogateModel {
    pub spec: MlpSpec,
    /// Row-major (fan_out × fan_in) weight matrices, input to output.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub scaler: ScalerStats,
    pub loss: Loss,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// (train loss, validation loss) per epoch.
    pub curve: Vec<(f64, f64)>,
}

/// Mutable parameter block shared by training and the gradient check.
#[derive(Clone)]
struct Net {
    spec: MlpSpec,
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl Net {
    fn init(spec: &MlpSpec, rng: &mut ChaCha8Rng) -> Self {
        let mut w = Vec::new();
        let mut b = Vec::new();
        for (fan_out, fan_in) in spec.layer_dims() {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.push((0..fan_out * fan_in).map(|_| rng.random_range(-bound..bound)).collect());
            b.push(vec![0.0; fan_out]);
        }
        Net { spec: spec.clone(), w, b }
    }

    /// Forward pass, returning pre-activations per layer for backprop.
    fn forward(&self, x: &[f64]) -> (f64, Vec<Vec<f64>>) {
        let mut act = x.to_vec();
        let mut pre_acts = Vec::with_capacity(self.w.len());
        let n_layers = self.w.len();
        for (li, (w, b)) in self.w.iter().zip(&self.b).enumerate() {
            let fan_in = act.len();
            let mut pre = b.clone();
            for (o, row) in pre.iter_mut().zip(w.chunks(fan_in)) {
                for (wv, av) in row.iter().zip(&act) {
                    *o += wv * av;
                }
            }
            act = if li + 1 < n_layers {
                pre.iter().map(|&z| elu(z, self.spec.elu_alpha)).collect()
            } else {
                pre.clone()
            };
            pre_acts.push(pre);
        }
        (act[0], pre_acts)
    }

    fn predict_scalar(&self, x: &[f64]) -> f64 {
        self.forward(x).0
    }

    /// Accumulate dL/dw for one sample given dL/d(output).
    fn backward(
        &self,
        x: &[f64],
        pre_acts: &[Vec<f64>],
        dloss_dout: f64,
        gw: &mut [Vec<f64>],
        gb: &mut [Vec<f64>],
    ) {
        let n_layers = self.w.len();
        // activations entering each layer
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        inputs.push(x.to_vec());
        for (li, pre) in pre_acts.iter().enumerate().take(n_layers - 1) {
            let _ = li;
            inputs.push(pre.iter().map(|&z| elu(z, self.spec.elu_alpha)).collect());
        }
        let mut delta = vec![dloss_dout];
        for li in (0..n_layers).rev() {
            let fan_in = inputs[li].len();
            for (o, d) in delta.iter().enumerate() {
                gb[li][o] += d;
                for (i, a) in inputs[li].iter().enumerate() {
                    gw[li][o * fan_in + i] += d * a;
                }
            }
            if li == 0 {
                break;
            }
            let mut prev = vec![0.0; fan_in];
            for (o, d) in delta.iter().enumerate() {
                for (i, p) in prev.iter_mut().enumerate() {
                    *p += d * self.w[li][o * fan_in + i];
                }
            }
            for (p, z) in prev.iter_mut().zip(&pre_acts[li - 1]) {
                *p *= elu_prime(*z, self.spec.elu_alpha);
            }
            delta = prev;
        }
    }
}

/// Scaled-space training batch.
struct Prepared {
    inputs: Vec<[f64; 8]>,
    /// Target in scaled transformed space.
    targets: Vec<f64>,
    /// Per-sample loss weight (inverse premium), already in scaled space.
    weights: Vec<f64>,
}

fn prepare(rows: &[TrainingRow], scaler: &ScalerStats, loss: &Loss) -> Prepared {
    let mut p = Prepared {
        inputs: Vec::with_capacity(rows.len()),
        targets: Vec::with_capacity(rows.len()),
        weights: Vec::with_capacity(rows.len()),
    };
    for r in rows {
        p.inputs.push(scaler.scale(&r.features()));
        p.targets.push((loss.transform(r.price) - scaler.target_mean) / scaler.target_std);
        p.weights.push(loss.weight(r.price));
    }
    p
}

/// Weighted MSE over scaled outputs plus its per-sample output
/// gradients; this is the quantity Adam descends.
fn batch_loss_and_grad(
    net: &Net,
    data: &Prepared,
    idxs: &[usize],
    gw: &mut [Vec<f64>],
    gb: &mut [Vec<f64>],
) -> f64 {
    for g in gw.iter_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    for g in gb.iter_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let n = idxs.len() as f64;
    let mut loss = 0.0;
    for &i in idxs {
        let (out, pre_acts) = net.forward(&data.inputs[i]);
        let err = out - data.targets[i];
        let w = data.weights[i];
        loss += w * err * err / n;
        net.backward(&data.inputs[i], &pre_acts, 2.0 * w * err / n, gw, gb);
    }
    loss
}

fn eval_loss(net: &Net, data: &Prepared) -> f64 {
    let n = data.inputs.len() as f64;
    data.inputs
        .iter()
        .zip(&data.targets)
        .zip(&data.weights)
        .map(|((x, t), w)| w * (net.predict_scalar(x) - t).powi(2))
        .sum::<f64>()
        / n
}

/// Train on the train split, early-stopping on the validation split;
/// returns the checkpoint with the lowest validation loss.
pub fn fit(train: &[TrainingRow], val: &[TrainingRow], cfg: &TrainConfig) -> Result<SurrogateModel> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Degenerate("empty train or validation split".into()));
    }
    let feats: Vec<[f64; 8]> = train.iter().map(|r| r.features()).collect();
    let targets: Vec<f64> = train.iter().map(|r| cfg.loss.transform(r.price)).collect();
    let scaler = ScalerStats::fit(&feats, &targets)?;
    let train_p = prepare(train, &scaler, &cfg.loss);
    let val_p = prepare(val, &scaler, &cfg.loss);

    let spec = MlpSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Net::init(&spec, &mut rng);
    let mut gw: Vec<Vec<f64>> = net.w.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut gb: Vec<Vec<f64>> = net.b.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut mw = gw.clone();
    let mut vw = gw.clone();
    let mut mb = gb.clone();
    let mut vb = gb.clone();

    let (beta1, beta2, eps_adam): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut lr = cfg.learning_rate;
    let mut step = 0usize;
    let mut best: Option<(f64, Net, usize)> = None;
    let mut since_improvement = 0usize;
    let mut since_plateau = 0usize;
    let mut curve = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            let loss = batch_loss_and_grad(&net, &train_p, chunk, &mut gw, &mut gb);
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("non-finite loss at epoch {epoch}")));
            }
            epoch_loss += loss;
            batches += 1.0;
            let bc1 = 1.0 - beta1.powi(step as i32);
            let bc2 = 1.0 - beta2.powi(step as i32);
            for li in 0..net.w.len() {
                for (i, g) in gw[li].iter().enumerate() {
                    mw[li][i] = beta1 * mw[li][i] + (1.0 - beta1) * g;
                    vw[li][i] = beta2 * vw[li][i] + (1.0 - beta2) * g * g;
                    net.w[li][i] -=
                        lr * (mw[li][i] / bc1) / ((vw[li][i] / bc2).sqrt() + eps_adam);
                }
                for (i, g) in gb[li].iter().enumerate() {
                    mb[li][i] = beta1 * mb[li][i] + (1.0 - beta1) * g;
                    vb[li][i] = beta2 * vb[li][i] + (1.0 - beta2) * g * g;
                    net.b[li][i] -=
                        lr * (mb[li][i] / bc1) / ((vb[li][i] / bc2).sqrt() + eps_adam);
                }
            }
        }
        let val_loss = eval_loss(&net, &val_p);
        if !val_loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite validation loss at epoch {epoch}")));
        }
        curve.push((epoch_loss / batches, val_loss));
        let improved = best.as_ref().is_none_or(|(b, _, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, net.clone(), epoch));
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        // plateau detection uses a material-improvement threshold
        let plateau_improved =
            best.as_ref().map(|(b, _, _)| val_loss < b + 1e-6).unwrap_or(true) && improved;
        if plateau_improved {
            since_plateau = 0;
        } else {
            since_plateau += 1;
            if since_plateau >= cfg.plateau_patience {
                lr = (lr * cfg.plateau_factor).max(cfg.min_learning_rate);
                since_plateau = 0;
            }
        }
        if since_improvement >= cfg.patience {
            break;
        }
    }
    let (best_val_loss, best_net, best_epoch) =
        best.ok_or_else(|| Error::Divergence("no epoch completed".into()))?;
    Ok(SurrogateModel {
        spec: best_net.spec.clone(),
        weights: best_net.w,
        biases: best_net.b,
        scaler,
        loss: cfg.loss,
        seed: cfg.seed,
        epochs_run: curve.len(),
        best_epoch,
        best_val_loss,
        curve,
    })
}

impl SurrogateModel {
    fn net(&self) -> Net {
        Net { spec: self.spec.clone(), w: self.weights.clone(), b: self.biases.clone() }
    }

    /// Price for one feature vector (a, b, c, d, κ, r, t, K).
    pub fn predict_one(&self, features: &[f64; 8]) -> f64 {
        let x = self.scaler.scale(features);
        let z = self.net().predict_scalar(&x);
        self.loss.inverse(z * self.scaler.target_std + self.scaler.target_mean)
    }

    /// Batch prediction; output order matches input order.
    pub fn predict(&self, features: &[[f64; 8]]) -> Vec<f64> {
        let net = self.net();
        features
            .iter()
            .map(|f| {
                let x = self.scaler.scale(f);
                self.loss.inverse(net.predict_scalar(&x) * self.scaler.target_std + self.scaler.target_mean)
            })
            .collect()
    }
}

const MODEL_VERSION: u32 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: SurrogateModel,
}

pub fn save_model(path: &Path, model: &SurrogateModel) -> Result<()> {
    let file = ModelFile {
        format: "voltools-surrogate".into(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::Schema(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SurrogateModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("bad model file: {e}")))?;
    if file.format != "voltools-surrogate" {
        return Err(Error::Schema(format!("unknown format {:?}", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::Version(format!("model file version {}", file.version)));
    }
    if file.model.weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::Schema("non-finite weights".into()));
    }
    Ok(file.model)
}

/// Maximum relative error between backprop and central finite
/// differences over all parameters of a small probe network.
pub fn gradient_check(loss: &Loss, seed: u64) -> f64 {
    let spec = MlpSpec { input_dim: 2, hidden: vec![2], output_dim: 1, elu_alpha: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Net::init(&spec, &mut rng);
    // probe batch with positive prices for the weighted losses
    let rows: Vec<TrainingRow> = (0..6)
        .map(|i| {
            let x = -1.0 + i as f64 * 0.4;
            TrainingRow {
                a: x,
                b: x * x,
                c: 0.0,
                d: 0.0,
                kappa: 0.0,
                r: 0.0,
                t: 0.0,
                strike: 0.0,
                price: 0.02 + 0.05 * i as f64,
            }
        })
        .collect();
    let scaler = ScalerStats {
        mean: vec![0.0; 8],
        std: vec![1.0; 8],
        target_mean: 0.0,
        target_std: 1.0,
    };
    let data = {
        let mut p = Prepared { inputs: Vec::new(), targets: Vec::new(), weights: Vec::new() };
        for r in &rows {
            let mut f = [0.0; 8];
            f[0] = r.a;
            f[1] = r.b;
            p.inputs.push(scaler.scale(&f));
            p.targets.push(loss.transform(r.price));
            p.weights.push(loss.weight(r.price));
        }
        // the probe net has 2 inputs: truncate features
        p.inputs = p.inputs.iter().map(|f| { let mut g = [0.0;8]; g[0]=f[0]; g[1]=f[1]; g }).collect();
        p
    };
    let idxs: Vec<usize> = (0..rows.len()).collect();
    let mut gw: Vec<Vec<f64>> = net.w.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut gb: Vec<Vec<f64>> = net.b.iter().map(|b| vec![0.0; b.len()]).collect();
    // forward uses only the first input_dim entries
    let loss_of = |net: &Net| -> f64 {
        let n = data.inputs.len() as f64;
        data.inputs
            .iter()
            .zip(&data.targets)
            .zip(&data.weights)
            .map(|((x, t), w)| w * (net.predict_scalar(&x[..net.spec.input_dim]) - t).powi(2))
            .sum::<f64>()
            / n
    };
    {
        // analytic gradients over the truncated inputs
        for g in gw.iter_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for g in gb.iter_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let n = idxs.len() as f64;
        for &i in &idxs {
            let x = &data.inputs[i][..spec.input_dim];
            let (out, pre_acts) = net.forward(x);
            let err = out - data.targets[i];
            net.backward(x, &pre_acts, 2.0 * data.weights[i] * err / n, &mut gw, &mut gb);
        }
    }
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for li in 0..net.w.len() {
        for i in 0..net.w[li].len() {
            let orig = net.w[li][i];
            net.w[li][i] = orig + h;
            let up = loss_of(&net);
            net.w[li][i] = orig - h;
            let dn = loss_of(&net);
            net.w[li][i] = orig;
            let fd = (up - dn) / (2.0 * h);
            let denom = fd.abs().max(gw[li][i].abs()).max(1e-8);
            worst = worst.max((fd - gw[li][i]).abs() / denom);
        }
        for i in 0..net.b[li].len() {
            let orig = net.b[li][i];
            net.b[li][i] = orig + h;
            let up = loss_of(&net);
            net.b[li][i] = orig - h;
            let dn = loss_of(&net);
            net.b[li][i] = orig;
            let fd = (up - dn) / (2.0 * h);
            let denom = fd.abs().max(gb[li][i].abs()).max(1e-8);
            worst = worst.max((fd - gb[li][i]).abs() / denom);
        }
    }
    worst
}
