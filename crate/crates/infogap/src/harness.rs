//! End-to-end experiment driver: trains an encoder-decoder pair per
//! regularization weight λ, evaluates the MI bound and the gap quantile on
//! clean and perturbed test variants, assembles the full testing-gap bound,
//! and emits CSV/JSON artifacts.
//!
//! Training is plain momentum SGD on the regularized objective
//! cross-entropy + λ·KL for the continuous encoders (reparameterized
//! per-sample backprop), and CD-1 with weight decay followed by a separately
//! trained softmax decoder for the binary encoder. Every stream of
//! randomness is derived from the run seed, so a fixed (config, seed) pair
//! reproduces parameters, records, and CSV bytes exactly (wall-time columns
//! excepted).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize};

use crate::bound::{assemble_bound, bounding_box_volume, hellinger, BoundReport, DeltaConstants};
use crate::classifier::{
    decoder_prob, gap_quantile, loss_rows, min_decoder_prob, GapEstimate, SoftmaxDecoder,
};
use crate::data::{load_idx, perturb, subsample, LabeledDataset, PerturbSpec};
use crate::encoders::{
    cd1_update, encode_lognormal, lognormal_kl_term, EncoderFamily, GaussianEncoder,
    LogNormalEncoder, RbmEncoder, RbmVelocity, StochasticEncoder, PROB_FLOOR,
};
use crate::error::{Error, Result};
use crate::mi::{mi_bound, MiEstimate};
use crate::nn::{sgd_step, sigmoid, DenseLayer, LayerGrads, Mat, MlpVelocity, TrainConfig};
use crate::quantizer::{best_report_index, loss_kmeans, quantized_model, sweep_k, UMode};
use crate::rng;

// Substream tags; every consumer of randomness gets its own namespace so
// adding a stream never shifts another.
const TAG_INIT: u64 = 0x01;
const TAG_PROBE_NOISE: u64 = 0x02;
const TAG_PROBE_CODES: u64 = 0x03;
const TAG_ETA: u64 = 0x04;
const TAG_SHUFFLE: u64 = 0x1000_0000;
const TAG_NOISE: u64 = 0x2000_0000;
const TAG_DEC_SHUFFLE: u64 = 0x3000_0000;
const TAG_DEC_NOISE: u64 = 0x4000_0000;
const TAG_DATA: u64 = 0x5eed_da7a;
const TAG_EVAL: u64 = 0x5eed_e7a1;
const TAG_PERTURB: u64 = 0x5eed_be17;

/// Samples per Monte Carlo draw when monitoring the training objective.
const PROBE_MC: usize = 4;
/// Largest probe subset used for the per-epoch objective curve.
const PROBE_MAX: usize = 512;
/// Binary code dimension up to which the bound pipeline enumerates codes.
const EXACT_CODE_ENUM_MAX_M: usize = 10;
/// Epoch after which the CD/decoder momentum switches from 0.5 to 0.9.
const MOMENTUM_SWITCH_EPOCH: usize = 5;

/// Which testing distribution a record was evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestVariant {
    Clean,
    Perturbed,
}

impl std::fmt::Display for TestVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestVariant::Clean => write!(f, "clean"),
            TestVariant::Perturbed => write!(f, "perturbed"),
        }
    }
}

fn de_variants<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<TestVariant>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(TestVariant),
        Many(Vec<TestVariant>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

/// Everything a sweep run needs, JSON-mirrored field for field. Omitted
/// fields take the desk-scale defaults below; [`ExperimentConfig::apply_full_scale`]
/// restores the full-size setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub encoder_family: EncoderFamily,
    /// Empty list = the family's default grid (see `effective_lambda_grid`).
    pub lambda_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub train_size: usize,
    /// Held-out samples approximating the expected risk.
    pub reference_size: usize,
    pub mini_test_size: usize,
    pub quantile_level: f64,
    pub delta: f64,
    /// Accepts a single variant or a list under the key `test_variant` too.
    #[serde(alias = "test_variant", deserialize_with = "de_variants")]
    pub test_variants: Vec<TestVariant>,
    pub k_grid: Vec<usize>,
    /// Monte Carlo draws per per-sample loss estimate.
    pub mc_samples: usize,
    /// Sample-bank size for quantized-model marginals of continuous codes.
    pub quant_bank: usize,
    pub hidden: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    /// Softmax phase length for the binary encoder.
    pub decoder_epochs: usize,
    /// None = family default (0.001 continuous, 0.1 binary).
    pub learning_rate: Option<f64>,
    pub batch_size: usize,
    /// Momentum for the continuous-encoder training; the binary encoder uses
    /// the 0.5 -> 0.9 schedule regardless.
    pub momentum: f64,
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub out_dir: PathBuf,
    pub max_translation: i32,
    pub angle_range: f64,
    /// Override for the code-space volume entering the bound constants.
    pub vol_u: Option<f64>,
    /// Codes drawn when probing the decoder floor and code-space box.
    pub eta_probes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            encoder_family: EncoderFamily::Gaussian,
            lambda_grid: Vec::new(),
            seeds: vec![1, 2, 3],
            train_size: 2000,
            reference_size: 1000,
            mini_test_size: 100,
            quantile_level: 0.95,
            delta: 0.05,
            test_variants: vec![TestVariant::Clean, TestVariant::Perturbed],
            k_grid: vec![1, 2, 4, 8, 16, 32],
            mc_samples: 16,
            quant_bank: 512,
            hidden: 128,
            latent_dim: 32,
            epochs: 50,
            decoder_epochs: 125,
            learning_rate: None,
            batch_size: 100,
            momentum: 0.0,
            train_images: "data/mnist/train-images-idx3-ubyte.gz".into(),
            train_labels: "data/mnist/train-labels-idx1-ubyte.gz".into(),
            test_images: "data/mnist/t10k-images-idx3-ubyte.gz".into(),
            test_labels: "data/mnist/t10k-labels-idx1-ubyte.gz".into(),
            out_dir: "out".into(),
            max_translation: 5,
            angle_range: std::f64::consts::FRAC_PI_4,
            vol_u: None,
            eta_probes: 256,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("invalid config document: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The λ grid to sweep: the configured one, or a family default
    /// (log-spaced; the binary encoder's weight-cost stays in the small
    /// regime the usual practice recommends).
    pub fn effective_lambda_grid(&self) -> Vec<f64> {
        if !self.lambda_grid.is_empty() {
            return self.lambda_grid.clone();
        }
        match self.encoder_family {
            EncoderFamily::Gaussian | EncoderFamily::Lognormal => {
                vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]
            }
            EncoderFamily::Rbm => vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
        }
    }

    pub fn effective_learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.encoder_family {
            EncoderFamily::Rbm => 0.1,
            _ => 0.001,
        })
    }

    /// Restores the full-size setup: 5000 training and reference samples,
    /// 512-unit trunk (256 for the other families), 256 code units, 200
    /// epochs (500 for the separate decoder phase).
    pub fn apply_full_scale(&mut self) {
        self.train_size = 5000;
        self.reference_size = 5000;
        self.hidden = match self.encoder_family {
            EncoderFamily::Gaussian => 512,
            _ => 256,
        };
        self.latent_dim = 256;
        self.epochs = 200;
        self.decoder_epochs = 500;
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.effective_lambda_grid();
        if grid.is_empty() {
            return Err(Error::config("lambda grid must be nonempty"));
        }
        if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::config("lambda grid entries must be nonnegative reals"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("lambda grid must be sorted strictly ascending"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("need at least one seed"));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(Error::config("delta must lie in (0,1)"));
        }
        if (self.quantile_level - (1.0 - self.delta)).abs() > 1e-12 {
            return Err(Error::config(format!(
                "quantile_level must equal 1 - delta = {}, got {}",
                1.0 - self.delta,
                self.quantile_level
            )));
        }
        if self.test_variants.is_empty() {
            return Err(Error::config("need at least one test variant"));
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::config("k_grid must be a nonempty list of positive cell counts"));
        }
        for (name, v) in [
            ("train_size", self.train_size),
            ("reference_size", self.reference_size),
            ("mini_test_size", self.mini_test_size),
            ("mc_samples", self.mc_samples),
            ("quant_bank", self.quant_bank),
            ("hidden", self.hidden),
            ("latent_dim", self.latent_dim),
            ("epochs", self.epochs),
            ("decoder_epochs", self.decoder_epochs),
            ("batch_size", self.batch_size),
            ("eta_probes", self.eta_probes),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::config("learning_rate must be a positive real"));
            }
        }
        if let Some(v) = self.vol_u {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config("vol_u must be a positive real"));
            }
        }
        PerturbSpec {
            max_translation: self.max_translation,
            angle_range: self.angle_range,
            rng_seed: 0,
            rotate_first: true,
        }
        .validate()
    }

    /// The perturbation recipe a given run seed implies.
    pub fn perturb_spec(&self, seed: u64) -> PerturbSpec {
        PerturbSpec {
            max_translation: self.max_translation,
            angle_range: self.angle_range,
            rng_seed: rng::splitmix64(seed ^ TAG_PERTURB),
            rotate_first: true,
        }
    }
}

/// A trained encoder-decoder pair plus the per-epoch objective curve
/// (probe-subset objective for the continuous encoders; reconstruction
/// error then decoder cross-entropy, concatenated, for the binary one).
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub encoder: StochasticEncoder,
    pub decoder: SoftmaxDecoder,
    pub loss_curve: Vec<f64>,
}

/// Serializable encoder-decoder pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub encoder: StochasticEncoder,
    pub decoder: SoftmaxDecoder,
}

const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    model: Model,
}

pub fn model_to_json(model: &Model) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelDoc { version: MODEL_VERSION, model: model.clone() })?)
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    if doc.version != MODEL_VERSION {
        return Err(Error::config(format!(
            "unsupported model version {} (expected {MODEL_VERSION})",
            doc.version
        )));
    }
    Ok(doc.model)
}

// ---------------------------------------------------------------------------
// Shared gradient pieces. These are the exact derivatives the training loops
// consume; the test suite pins each against central finite differences.

/// -log Q(y|u) and its gradients: (loss, d/dW, d/db, d/du). The training
/// loss is the raw log-probability (no reporting floor), so gradients never
/// vanish behind a clamp.
pub fn decoder_ce_grads(dec: &SoftmaxDecoder, u: &[f64], y: u8) -> (f64, Mat, Vec<f64>, Vec<f64>) {
    let lps = dec.log_probs(u);
    let ce = -lps[y as usize];
    let mut dlogits: Vec<f64> = lps.iter().map(|lp| lp.exp()).collect();
    dlogits[y as usize] -= 1.0;
    let mut dw = Mat::zeros(dec.y_card(), dec.code_dim());
    for r in 0..dec.y_card() {
        let row = &mut dw.data[r * u.len()..(r + 1) * u.len()];
        for (g, &uj) in row.iter_mut().zip(u) {
            *g = dlogits[r] * uj;
        }
    }
    let du = dec.weights.matvec_t(&dlogits);
    (ce, dw, dlogits, du)
}

/// Standard-normal-prior KL of one diagonal Gaussian and its gradients:
/// KL = 1/2 sum_j (-logvar + e^logvar + mu^2 - 1), returned with
/// (dKL/dmu, dKL/dlogvar).
pub fn gaussian_kl_grads(mu: &[f64], logvar: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut kl = 0.0;
    for (&m, &lv) in mu.iter().zip(logvar) {
        kl += 0.5 * (-lv + lv.exp() + m * m - 1.0);
    }
    let dmu = mu.to_vec();
    let dlv = logvar.iter().map(|&lv| (lv.exp() - 1.0) / 2.0).collect();
    (kl, dmu, dlv)
}

/// Log-normal-pair KL of one sample against the trainable prior, with
/// gradients in the natural parameters: (kl, d/df, d/dalpha, d/dprior_mu,
/// d/dprior_logsigma). f is the positive scale (not its log).
pub fn lognormal_kl_grads(
    f: &[f64],
    alpha: &[f64],
    prior_mu: &[f64],
    prior_logsigma: &[f64],
) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = f.len();
    let (mut kl, mut df, mut da, mut dmu, mut ds) =
        (0.0, vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for j in 0..m {
        let fj = f[j].max(PROB_FLOOR);
        let g = fj.ln() - prior_mu[j];
        let s = prior_logsigma[j];
        let e2 = (-2.0 * s).exp();
        let a = alpha[j];
        kl += 0.5 * (a * a + g * g) * e2 + s - a.ln() - 0.5;
        df[j] = g * e2 / fj;
        da[j] = a * e2 - 1.0 / a;
        dmu[j] = -g * e2;
        ds[j] = -(a * a + g * g) * e2 + 1.0;
    }
    (kl, df, da, dmu, ds)
}

// ---------------------------------------------------------------------------
// Training.

struct HeadVelocity {
    vw: Vec<f64>,
    vb: Vec<f64>,
}

impl HeadVelocity {
    fn zeros_like(l: &DenseLayer) -> Self {
        HeadVelocity { vw: vec![0.0; l.w.data.len()], vb: vec![0.0; l.b.len()] }
    }

    fn step(&mut self, l: &mut DenseLayer, g: &LayerGrads, lr: f64, momentum: f64) {
        sgd_step(&mut l.w.data, &mut self.vw, &g.dw.data, lr, momentum);
        sgd_step(&mut l.b, &mut self.vb, &g.db, lr, momentum);
    }
}

fn shuffled_indices(n: usize, r: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = r.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

fn probe_subset(ds: &LabeledDataset) -> LabeledDataset {
    ds.select(&(0..ds.len().min(PROBE_MAX)).collect::<Vec<_>>())
}

/// Fixed standard-normal noise bank (one m-vector per probe sample per
/// draw), so the objective curve moves only when the parameters do.
fn probe_noise(seed: u64, samples: usize, m: usize) -> Vec<Vec<f64>> {
    let mut r = rng::substream(seed, TAG_PROBE_NOISE);
    (0..samples * PROBE_MC)
        .map(|_| (0..m).map(|_| r.sample(StandardNormal)).collect())
        .collect()
}

/// Gaussian per-sample gradient accumulation; returns the sample objective.
#[allow(clippy::too_many_arguments)]
fn accumulate_gaussian(
    enc: &GaussianEncoder,
    dec: &SoftmaxDecoder,
    x: &[f64],
    y: u8,
    z: &[f64],
    lambda: f64,
    g_trunk: &mut [LayerGrads],
    g_mu: &mut LayerGrads,
    g_lv: &mut LayerGrads,
    g_dw: &mut Mat,
    g_db: &mut [f64],
) -> f64 {
    let trace = enc.trunk.forward_trace(x);
    let h = &trace.out;
    let (mu_pre, mu) = enc.mu_head.forward_trace(h);
    let (lv_pre, lv) = enc.logvar_head.forward_trace(h);
    let sigma: Vec<f64> = lv.iter().map(|&v| (v / 2.0).exp()).collect();
    let u: Vec<f64> = mu.iter().zip(&sigma).zip(z).map(|((&m, &s), &zz)| m + s * zz).collect();

    let (ce, dw, db, du) = decoder_ce_grads(dec, &u, y);
    for (a, b) in g_dw.data.iter_mut().zip(&dw.data) {
        *a += b;
    }
    for (a, b) in g_db.iter_mut().zip(&db) {
        *a += b;
    }

    let (kl, kl_dmu, kl_dlv) = gaussian_kl_grads(&mu, &lv);
    // d u_j / d mu_j = 1; d u_j / d logvar_j = z_j sigma_j / 2.
    let dmu: Vec<f64> = du.iter().zip(&kl_dmu).map(|(&d, &k)| d + lambda * k).collect();
    let dlv: Vec<f64> = du
        .iter()
        .zip(z)
        .zip(&sigma)
        .zip(&kl_dlv)
        .map(|(((&d, &zz), &s), &k)| d * zz * s / 2.0 + lambda * k)
        .collect();

    let (mg, dh1) = enc.mu_head.backward(h, &mu_pre, &dmu);
    let (lg, dh2) = enc.logvar_head.backward(h, &lv_pre, &dlv);
    g_mu.add(&mg);
    g_lv.add(&lg);
    let dh: Vec<f64> = dh1.iter().zip(&dh2).map(|(a, b)| a + b).collect();
    let (tg, _) = enc.trunk.backward(&trace, &dh);
    for (acc, g) in g_trunk.iter_mut().zip(&tg) {
        acc.add(g);
    }
    ce + lambda * kl
}

fn gaussian_objective(
    enc: &GaussianEncoder,
    dec: &SoftmaxDecoder,
    probe: &LabeledDataset,
    bank: &[Vec<f64>],
    lambda: f64,
) -> f64 {
    let mut ce = 0.0;
    let mut kl = 0.0;
    for i in 0..probe.len() {
        let x = probe.image_f64(i);
        let (mu, sigma) = enc.moments(&x);
        for k in 0..PROBE_MC {
            let z = &bank[i * PROBE_MC + k];
            let u: Vec<f64> =
                mu.iter().zip(&sigma).zip(z).map(|((&m, &s), &zz)| m + s * zz).collect();
            ce -= dec.log_probs(&u)[probe.labels[i] as usize];
        }
        let lv: Vec<f64> = sigma.iter().map(|s| 2.0 * s.ln()).collect();
        kl += gaussian_kl_grads(&mu, &lv).0;
    }
    ce / (probe.len() * PROBE_MC) as f64 + lambda * kl / probe.len() as f64
}

fn train_gaussian(
    cfg: &ExperimentConfig,
    lambda: f64,
    seed: u64,
    ds: &LabeledDataset,
) -> Result<TrainedModel> {
    let (d, m, y_card) = (ds.dim(), cfg.latent_dim, ds.num_classes);
    let mut init = rng::substream(seed, TAG_INIT);
    let mut enc = GaussianEncoder::new(d, cfg.hidden, m, &mut init);
    let mut dec = SoftmaxDecoder::new(y_card, m, &mut init);
    let (lr, mom) = (cfg.effective_learning_rate(), cfg.momentum);

    let mut v_trunk = MlpVelocity::zeros_like(&enc.trunk);
    let mut v_mu = HeadVelocity::zeros_like(&enc.mu_head);
    let mut v_lv = HeadVelocity::zeros_like(&enc.logvar_head);
    let mut v_dw = vec![0.0; dec.weights.data.len()];
    let mut v_db = vec![0.0; dec.biases.len()];

    let probe = probe_subset(ds);
    let bank = probe_noise(seed, probe.len(), m);
    let mut curve = vec![gaussian_objective(&enc, &dec, &probe, &bank, lambda)];

    for epoch in 0..cfg.epochs {
        let order = shuffled_indices(ds.len(), &mut rng::substream(seed, TAG_SHUFFLE + epoch as u64));
        let mut noise = rng::substream(seed, TAG_NOISE + epoch as u64);
        for batch in order.chunks(cfg.batch_size) {
            let mut g_trunk = enc.trunk.zero_grads();
            let mut g_mu = LayerGrads::zeros_like(&enc.mu_head);
            let mut g_lv = LayerGrads::zeros_like(&enc.logvar_head);
            let mut g_dw = Mat::zeros(y_card, m);
            let mut g_db = vec![0.0; y_card];
            for &i in batch {
                let z: Vec<f64> = (0..m).map(|_| noise.sample(StandardNormal)).collect();
                accumulate_gaussian(
                    &enc,
                    &dec,
                    &ds.image_f64(i),
                    ds.labels[i],
                    &z,
                    lambda,
                    &mut g_trunk,
                    &mut g_mu,
                    &mut g_lv,
                    &mut g_dw,
                    &mut g_db,
                );
            }
            let s = 1.0 / batch.len() as f64;
            for g in g_trunk.iter_mut() {
                g.scale(s);
            }
            g_mu.scale(s);
            g_lv.scale(s);
            for g in g_dw.data.iter_mut() {
                *g *= s;
            }
            for g in g_db.iter_mut() {
                *g *= s;
            }
            v_trunk.step(&mut enc.trunk, &g_trunk, lr, mom);
            v_mu.step(&mut enc.mu_head, &g_mu, lr, mom);
            v_lv.step(&mut enc.logvar_head, &g_lv, lr, mom);
            sgd_step(&mut dec.weights.data, &mut v_dw, &g_dw.data, lr, mom);
            sgd_step(&mut dec.biases, &mut v_db, &g_db, lr, mom);
        }
        let obj = gaussian_objective(&enc, &dec, &probe, &bank, lambda);
        if !obj.is_finite() {
            return Err(Error::numeric(format!("non-finite training objective after epoch {epoch}")));
        }
        curve.push(obj);
    }
    Ok(TrainedModel { encoder: StochasticEncoder::Gaussian(enc), decoder: dec, loss_curve: curve })
}

/// Log-normal per-sample gradient accumulation; returns the sample objective.
#[allow(clippy::too_many_arguments)]
fn accumulate_lognormal(
    enc: &LogNormalEncoder,
    dec: &SoftmaxDecoder,
    x: &[f64],
    y: u8,
    z: &[f64],
    lambda: f64,
    g_f: &mut [LayerGrads],
    g_a: &mut [LayerGrads],
    g_pmu: &mut [f64],
    g_psg: &mut [f64],
    g_dw: &mut Mat,
    g_db: &mut [f64],
) -> f64 {
    let ftr = enc.f_net.forward_trace(x);
    let atr = enc.alpha_net.forward_trace(x);
    let f: Vec<f64> = ftr.out.iter().map(|&v| v.max(PROB_FLOOR)).collect();
    let alpha: Vec<f64> =
        atr.out.iter().map(|&s| (crate::encoders::ALPHA_CAP * s).max(PROB_FLOOR)).collect();
    let eaz: Vec<f64> = alpha.iter().zip(z).map(|(&a, &zz)| (a * zz).exp()).collect();
    let u: Vec<f64> = f.iter().zip(&eaz).map(|(&fj, &e)| fj * e).collect();

    let (ce, dw, db, du) = decoder_ce_grads(dec, &u, y);
    for (a, b) in g_dw.data.iter_mut().zip(&dw.data) {
        *a += b;
    }
    for (a, b) in g_db.iter_mut().zip(&db) {
        *a += b;
    }

    let (kl, kl_df, kl_da, kl_dmu, kl_ds) =
        lognormal_kl_grads(&f, &alpha, &enc.prior_mu, &enc.prior_logsigma);

    // d u_j / d f_j = e^{alpha z}; d u_j / d alpha_j = u_j z_j. The clamps
    // at the probability floor zero the gradient when active.
    let mut df_out = vec![0.0; f.len()];
    let mut da_out = vec![0.0; f.len()];
    for j in 0..f.len() {
        if ftr.out[j] > PROB_FLOOR {
            df_out[j] = du[j] * eaz[j] + lambda * kl_df[j];
        }
        if crate::encoders::ALPHA_CAP * atr.out[j] > PROB_FLOOR {
            da_out[j] = (du[j] * u[j] * z[j] + lambda * kl_da[j]) * crate::encoders::ALPHA_CAP;
        }
    }
    let (fg, _) = enc.f_net.backward(&ftr, &df_out);
    for (acc, g) in g_f.iter_mut().zip(&fg) {
        acc.add(g);
    }
    let (ag, _) = enc.alpha_net.backward(&atr, &da_out);
    for (acc, g) in g_a.iter_mut().zip(&ag) {
        acc.add(g);
    }
    for j in 0..f.len() {
        g_pmu[j] += lambda * kl_dmu[j];
        g_psg[j] += lambda * kl_ds[j];
    }
    ce + lambda * kl
}

fn lognormal_objective(
    enc: &LogNormalEncoder,
    dec: &SoftmaxDecoder,
    probe: &LabeledDataset,
    bank: &[Vec<f64>],
    lambda: f64,
) -> f64 {
    let mut ce = 0.0;
    let mut kl = 0.0;
    for i in 0..probe.len() {
        let x = probe.image_f64(i);
        for k in 0..PROBE_MC {
            let u = encode_lognormal(enc, &x, &bank[i * PROBE_MC + k]);
            ce -= dec.log_probs(&u)[probe.labels[i] as usize];
        }
        let (log_f, alpha) = enc.params(&x);
        for j in 0..log_f.len() {
            kl += lognormal_kl_term(
                log_f[j],
                alpha[j],
                enc.prior_mu[j],
                enc.prior_logsigma[j].exp(),
            );
        }
    }
    ce / (probe.len() * PROBE_MC) as f64 + lambda * kl / probe.len() as f64
}

fn train_lognormal(
    cfg: &ExperimentConfig,
    lambda: f64,
    seed: u64,
    ds: &LabeledDataset,
) -> Result<TrainedModel> {
    let (d, m, y_card) = (ds.dim(), cfg.latent_dim, ds.num_classes);
    let mut init = rng::substream(seed, TAG_INIT);
    let mut enc = LogNormalEncoder::new(d, cfg.hidden, m, &mut init);
    let mut dec = SoftmaxDecoder::new(y_card, m, &mut init);
    let (lr, mom) = (cfg.effective_learning_rate(), cfg.momentum);

    let mut v_f = MlpVelocity::zeros_like(&enc.f_net);
    let mut v_a = MlpVelocity::zeros_like(&enc.alpha_net);
    let mut v_pmu = vec![0.0; m];
    let mut v_psg = vec![0.0; m];
    let mut v_dw = vec![0.0; dec.weights.data.len()];
    let mut v_db = vec![0.0; dec.biases.len()];

    let probe = probe_subset(ds);
    let bank = probe_noise(seed, probe.len(), m);
    let mut curve = vec![lognormal_objective(&enc, &dec, &probe, &bank, lambda)];

    for epoch in 0..cfg.epochs {
        let order = shuffled_indices(ds.len(), &mut rng::substream(seed, TAG_SHUFFLE + epoch as u64));
        let mut noise = rng::substream(seed, TAG_NOISE + epoch as u64);
        for batch in order.chunks(cfg.batch_size) {
            let mut g_f = enc.f_net.zero_grads();
            let mut g_a = enc.alpha_net.zero_grads();
            let mut g_pmu = vec![0.0; m];
            let mut g_psg = vec![0.0; m];
            let mut g_dw = Mat::zeros(y_card, m);
            let mut g_db = vec![0.0; y_card];
            for &i in batch {
                let z: Vec<f64> = (0..m).map(|_| noise.sample(StandardNormal)).collect();
                accumulate_lognormal(
                    &enc,
                    &dec,
                    &ds.image_f64(i),
                    ds.labels[i],
                    &z,
                    lambda,
                    &mut g_f,
                    &mut g_a,
                    &mut g_pmu,
                    &mut g_psg,
                    &mut g_dw,
                    &mut g_db,
                );
            }
            let s = 1.0 / batch.len() as f64;
            for g in g_f.iter_mut() {
                g.scale(s);
            }
            for g in g_a.iter_mut() {
                g.scale(s);
            }
            for g in g_pmu.iter_mut().chain(g_psg.iter_mut()) {
                *g *= s;
            }
            for g in g_dw.data.iter_mut().chain(g_db.iter_mut()) {
                *g *= s;
            }
            v_f.step(&mut enc.f_net, &g_f, lr, mom);
            v_a.step(&mut enc.alpha_net, &g_a, lr, mom);
            sgd_step(&mut enc.prior_mu, &mut v_pmu, &g_pmu, lr, mom);
            sgd_step(&mut enc.prior_logsigma, &mut v_psg, &g_psg, lr, mom);
            sgd_step(&mut dec.weights.data, &mut v_dw, &g_dw.data, lr, mom);
            sgd_step(&mut dec.biases, &mut v_db, &g_db, lr, mom);
        }
        let obj = lognormal_objective(&enc, &dec, &probe, &bank, lambda);
        if !obj.is_finite() {
            return Err(Error::numeric(format!("non-finite training objective after epoch {epoch}")));
        }
        curve.push(obj);
    }
    Ok(TrainedModel { encoder: StochasticEncoder::Lognormal(enc), decoder: dec, loss_curve: curve })
}

/// Mean squared reconstruction error of one mean-field Gibbs half-step;
/// the standard progress monitor for contrastive divergence.
fn recon_error(enc: &RbmEncoder, probe: &LabeledDataset) -> f64 {
    let d = probe.dim();
    let mut total = 0.0;
    for i in 0..probe.len() {
        let x = probe.image_f64(i);
        let h = enc.activations(&x);
        let mut recon = enc.weights.matvec_t(&h);
        for (r, c) in recon.iter_mut().zip(&enc.visible_bias) {
            *r = sigmoid(*r + c);
        }
        total += x.iter().zip(&recon).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d as f64;
    }
    total / probe.len() as f64
}

fn train_rbm(
    cfg: &ExperimentConfig,
    lambda: f64,
    seed: u64,
    ds: &LabeledDataset,
) -> Result<TrainedModel> {
    let (d, m, y_card) = (ds.dim(), cfg.latent_dim, ds.num_classes);
    let mut init = rng::substream(seed, TAG_INIT);
    let mut enc = RbmEncoder::new(d, m, &mut init);
    let mut dec = SoftmaxDecoder::new(y_card, m, &mut init);
    let lr = cfg.effective_learning_rate();

    let probe = probe_subset(ds);
    let mut vel = RbmVelocity::zeros_like(&enc);
    let mut curve = vec![recon_error(&enc, &probe)];

    for epoch in 0..cfg.epochs {
        let momentum = if epoch < MOMENTUM_SWITCH_EPOCH { 0.5 } else { 0.9 };
        let tc = TrainConfig { lr, momentum, lambda, epochs: 1, batch_size: cfg.batch_size };
        let order = shuffled_indices(ds.len(), &mut rng::substream(seed, TAG_SHUFFLE + epoch as u64));
        let mut cd_rng = rng::substream(seed, TAG_NOISE + epoch as u64);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| ds.image_f64(i)).collect();
            cd1_update(&mut enc, &batch, &tc, &mut vel, &mut cd_rng);
        }
        let err = recon_error(&enc, &probe);
        if !err.is_finite() {
            return Err(Error::numeric(format!("non-finite reconstruction error after epoch {epoch}")));
        }
        curve.push(err);
    }

    // Separate softmax phase on codes sampled from the frozen encoder.
    let probe_codes: Vec<(Vec<f64>, u8)> = {
        let mut r = rng::substream(seed, TAG_PROBE_CODES);
        (0..probe.len())
            .map(|i| {
                let acts = enc.activations(&probe.image_f64(i));
                let u = acts.iter().map(|&p| f64::from(r.gen::<f64>() < p)).collect();
                (u, probe.labels[i])
            })
            .collect()
    };
    let mut v_dw = vec![0.0; dec.weights.data.len()];
    let mut v_db = vec![0.0; dec.biases.len()];
    for epoch in 0..cfg.decoder_epochs {
        let momentum = if epoch < MOMENTUM_SWITCH_EPOCH { 0.5 } else { 0.9 };
        let order =
            shuffled_indices(ds.len(), &mut rng::substream(seed, TAG_DEC_SHUFFLE + epoch as u64));
        let mut code_rng = rng::substream(seed, TAG_DEC_NOISE + epoch as u64);
        for chunk in order.chunks(cfg.batch_size) {
            let mut g_dw = Mat::zeros(y_card, m);
            let mut g_db = vec![0.0; y_card];
            for &i in chunk {
                let acts = enc.activations(&ds.image_f64(i));
                let u: Vec<f64> =
                    acts.iter().map(|&p| f64::from(code_rng.gen::<f64>() < p)).collect();
                let (_, dw, db, _) = decoder_ce_grads(&dec, &u, ds.labels[i]);
                for (a, b) in g_dw.data.iter_mut().zip(&dw.data) {
                    *a += b;
                }
                for (a, b) in g_db.iter_mut().zip(&db) {
                    *a += b;
                }
            }
            let s = 1.0 / chunk.len() as f64;
            for g in g_dw.data.iter_mut().chain(g_db.iter_mut()) {
                *g *= s;
            }
            sgd_step(&mut dec.weights.data, &mut v_dw, &g_dw.data, lr, momentum);
            sgd_step(&mut dec.biases, &mut v_db, &g_db, lr, momentum);
        }
        let ce = probe_codes
            .iter()
            .map(|(u, y)| -dec.log_probs(u)[*y as usize])
            .sum::<f64>()
            / probe_codes.len() as f64;
        if !ce.is_finite() {
            return Err(Error::numeric(format!("non-finite decoder objective after epoch {epoch}")));
        }
        curve.push(ce);
    }
    Ok(TrainedModel { encoder: StochasticEncoder::Rbm(enc), decoder: dec, loss_curve: curve })
}

/// Trains one model at the given regularization weight, deterministically in
/// (config, lambda, seed). Fails with a numeric error if the objective
/// leaves the finite domain.
pub fn train_model(
    config: &ExperimentConfig,
    lambda: f64,
    seed: u64,
    train_set: &LabeledDataset,
) -> Result<TrainedModel> {
    if train_set.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::config("lambda must be a nonnegative real"));
    }
    match config.encoder_family {
        EncoderFamily::Gaussian => train_gaussian(config, lambda, seed, train_set),
        EncoderFamily::Lognormal => train_lognormal(config, lambda, seed, train_set),
        EncoderFamily::Rbm => train_rbm(config, lambda, seed, train_set),
    }
}

// ---------------------------------------------------------------------------
// Evaluation and the sweep.

/// Assembles the testing-gap bound at n = mini_test_size the way every run
/// does: loss table on the reference set, code-space probes for eta and the
/// volume, label floor from reference frequencies, cell-count sweep, and the
/// quantized-decoder Hellinger distance at the winning cell count.
pub fn assemble_model_bound(
    config: &ExperimentConfig,
    enc: &StochasticEncoder,
    dec: &SoftmaxDecoder,
    reference: &LabeledDataset,
    mi: &MiEstimate,
    seed: u64,
) -> Result<BoundReport> {
    let n = config.mini_test_size as u64;
    let loss_table = loss_rows(enc, dec, reference, config.mc_samples, seed)?;

    let mut probes: Vec<Vec<f64>> = Vec::new();
    match enc {
        StochasticEncoder::Rbm(r) if r.latent_dim() <= EXACT_CODE_ENUM_MAX_M => {
            let m = r.latent_dim();
            for bits in 0u64..(1 << m) {
                probes.push((0..m).map(|j| ((bits >> j) & 1) as f64).collect());
            }
        }
        _ => {
            let mut probe_rng = rng::substream(seed, TAG_ETA);
            if let StochasticEncoder::Rbm(r) = enc {
                probes.push(vec![0.0; r.latent_dim()]);
                probes.push(vec![1.0; r.latent_dim()]);
            }
            for _ in 0..config.eta_probes {
                let i = probe_rng.gen_range(0..reference.len());
                probes.push(enc.encode(&reference.image_f64(i), &mut probe_rng));
            }
        }
    }
    let eta = min_decoder_prob(dec, &probes);
    let vol_u = match (config.vol_u, enc) {
        (Some(v), _) => v,
        (None, StochasticEncoder::Rbm(r)) => 2f64.powi(r.latent_dim() as i32),
        (None, _) => bounding_box_volume(&probes),
    };
    let freqs = reference.label_frequencies();
    let p_y_min = freqs.iter().copied().filter(|&f| f > 0.0).fold(f64::INFINITY, f64::min);
    let constants = DeltaConstants::new(config.delta, reference.num_classes, vol_u, p_y_min, eta)?;

    let nf = n as f64;
    let mi_rate = constants.a_delta * mi.sqrt_bound * nf.ln() / nf.sqrt();
    let grid: Vec<usize> = config.k_grid.iter().copied().filter(|&k| k <= loss_table.rows).collect();
    if grid.is_empty() {
        return Err(Error::config(format!(
            "no cell count in k_grid fits the {}-sample reference set",
            loss_table.rows
        )));
    }
    let (reports, _) = sweep_k(&loss_table, &grid, mi_rate, 50, seed)?;
    let best = best_report_index(&reports).expect("nonempty grid");
    let partition =
        loss_kmeans(&loss_table, grid[best], 50, &mut rng::substream(seed, grid[best] as u64))?;
    let mode = match enc {
        StochasticEncoder::Rbm(r) if r.latent_dim() <= EXACT_CODE_ENUM_MAX_M => UMode::Exact,
        _ => UMode::MonteCarlo { samples: config.quant_bank },
    };
    let qm = quantized_model(&partition, enc, reference, &loss_table, mode, seed)?;
    let p_rows: Vec<Vec<f64>> = qm.u_support.iter().map(|u| decoder_prob(dec, u)).collect();
    let d_hl = hellinger(&Mat::from_rows(p_rows), &qm.decoder_d, &qm.u_weights)?;
    assemble_bound(mi, &reports, d_hl, &constants, n)
}

/// The perturbed (or untouched) copy of an evaluation pool for one variant.
pub fn variant_pool(
    config: &ExperimentConfig,
    pool: &LabeledDataset,
    variant: TestVariant,
    seed: u64,
) -> Result<LabeledDataset> {
    match variant {
        TestVariant::Clean => Ok(pool.clone()),
        TestVariant::Perturbed => perturb(pool, &config.perturb_spec(seed)),
    }
}

/// The evaluation-stream seed a run seed implies; shared by the sweep and
/// the single-shot commands so both produce identical estimates.
pub fn eval_seed(seed: u64) -> u64 {
    rng::splitmix64(seed ^ TAG_EVAL)
}

/// Applies the variant, then carves (reference, mini-test pool) out of the
/// evaluation data, deterministically in the run seed.
pub fn evaluation_split(
    config: &ExperimentConfig,
    eval_pool: &LabeledDataset,
    variant: TestVariant,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let varied = variant_pool(config, eval_pool, variant, seed)?;
    if varied.len() < config.reference_size + config.mini_test_size {
        return Err(Error::config(format!(
            "evaluation pool of {} samples cannot supply {} reference samples plus a mini-test of {}",
            varied.len(),
            config.reference_size,
            config.mini_test_size
        )));
    }
    subsample(&varied, config.reference_size, eval_seed(seed))
}

fn evaluate_variant(
    config: &ExperimentConfig,
    model: &TrainedModel,
    eval_pool: &LabeledDataset,
    variant: TestVariant,
    seed: u64,
) -> Result<(MiEstimate, GapEstimate, BoundReport)> {
    let (reference, pool) = evaluation_split(config, eval_pool, variant, seed)?;
    let es = eval_seed(seed);
    let mi = mi_bound(&model.encoder, &reference)?;
    let gap = gap_quantile(
        &model.encoder,
        &model.decoder,
        &reference,
        &pool,
        config.mini_test_size,
        config.quantile_level,
        config.mc_samples,
        es,
    )?;
    let bound = assemble_model_bound(config, &model.encoder, &model.decoder, &reference, &mi, es)?;
    Ok((mi, gap, bound))
}

/// One successful (λ, seed, variant) evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub lambda: f64,
    pub seed: u64,
    pub variant: TestVariant,
    pub mi: MiEstimate,
    pub gap: GapEstimate,
    pub bound: BoundReport,
    /// Seconds spent evaluating this variant (training time is in the
    /// corresponding [`TrainingRecord`]).
    pub wall_time_s: f64,
}

/// One (λ, seed) training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub lambda: f64,
    pub seed: u64,
    pub loss_curve: Vec<f64>,
    pub wall_time_s: f64,
}

/// A run that could not produce its record; the sweep continues past these.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureRecord {
    pub lambda: f64,
    pub seed: u64,
    pub variant: Option<TestVariant>,
    pub stage: String,
    pub message: String,
}

/// Seed-averaged series per (λ, variant): the quantities the sweep plots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub lambda: f64,
    pub variant: TestVariant,
    pub seed_count: usize,
    pub mean_mi_sqrt_bound: f64,
    pub mean_gap_quantile: f64,
    pub mean_bound_total: f64,
}

/// Everything a sweep produced, JSON-serializable as one document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunArtifact {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub trainings: Vec<TrainingRecord>,
    pub failures: Vec<FailureRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

/// Per-(lambda, variant) means over seeds, in grid order.
pub fn aggregate(
    grid: &[f64],
    variants: &[TestVariant],
    records: &[RunRecord],
) -> Vec<AggregateRecord> {
    let mut out = Vec::new();
    for &lambda in grid {
        for &variant in variants {
            let rs: Vec<&RunRecord> =
                records.iter().filter(|r| r.lambda == lambda && r.variant == variant).collect();
            if rs.is_empty() {
                continue;
            }
            let n = rs.len() as f64;
            out.push(AggregateRecord {
                lambda,
                variant,
                seed_count: rs.len(),
                mean_mi_sqrt_bound: rs.iter().map(|r| r.mi.sqrt_bound).sum::<f64>() / n,
                mean_gap_quantile: rs.iter().map(|r| r.gap.quantile_value).sum::<f64>() / n,
                mean_bound_total: rs.iter().map(|r| r.bound.total).sum::<f64>() / n,
            });
        }
    }
    out
}

/// Loads the training pool named by the config.
pub fn load_train_pool(config: &ExperimentConfig) -> Result<LabeledDataset> {
    load_idx(&config.train_images, &config.train_labels)
}

/// Loads the evaluation pool: the test pair, unless it names the same files
/// as the training pair (the caller must then carve disjoint subsets itself).
pub fn load_eval_pool(config: &ExperimentConfig) -> Result<LabeledDataset> {
    load_idx(&config.test_images, &config.test_labels)
}

fn same_source(config: &ExperimentConfig) -> bool {
    config.train_images == config.test_images && config.train_labels == config.test_labels
}

/// The deterministic per-seed training subset (and the leftover samples).
pub fn training_split(
    config: &ExperimentConfig,
    train_pool: &LabeledDataset,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    subsample(train_pool, config.train_size, rng::splitmix64(seed ^ TAG_DATA))
}

/// Trains and evaluates every (λ, seed, variant) cell of the config. Data
/// used for MI and gap estimation never overlaps the training subset: the
/// evaluation pool is either a different file pair or, when the config names
/// the same files, the complement of the training subset.
pub fn lambda_sweep(config: &ExperimentConfig) -> Result<RunArtifact> {
    config.validate()?;
    let grid = config.effective_lambda_grid();
    let train_pool = load_train_pool(config)?;
    let eval_file = if same_source(config) { None } else { Some(load_eval_pool(config)?) };

    let mut records = Vec::new();
    let mut trainings = Vec::new();
    let mut failures = Vec::new();
    for &lambda in &grid {
        for &seed in &config.seeds {
            let split = match training_split(config, &train_pool, seed) {
                Ok(s) => s,
                Err(e) => {
                    failures.push(FailureRecord {
                        lambda,
                        seed,
                        variant: None,
                        stage: "split".into(),
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let (train_set, train_rest) = split;
            let eval_pool = eval_file.as_ref().unwrap_or(&train_rest);

            let t0 = Instant::now();
            let model = match train_model(config, lambda, seed, &train_set) {
                Ok(m) => m,
                Err(e) => {
                    failures.push(FailureRecord {
                        lambda,
                        seed,
                        variant: None,
                        stage: "train".into(),
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            trainings.push(TrainingRecord {
                lambda,
                seed,
                loss_curve: model.loss_curve.clone(),
                wall_time_s: t0.elapsed().as_secs_f64(),
            });

            for &variant in &config.test_variants {
                let tv = Instant::now();
                match evaluate_variant(config, &model, eval_pool, variant, seed) {
                    Ok((mi, gap, bound)) => records.push(RunRecord {
                        lambda,
                        seed,
                        variant,
                        mi,
                        gap,
                        bound,
                        wall_time_s: tv.elapsed().as_secs_f64(),
                    }),
                    Err(e) => failures.push(FailureRecord {
                        lambda,
                        seed,
                        variant: Some(variant),
                        stage: "evaluate".into(),
                        message: e.to_string(),
                    }),
                }
            }
        }
    }
    let aggregates = aggregate(&grid, &config.test_variants, &records);
    Ok(RunArtifact { config: config.clone(), records, trainings, failures, aggregates })
}

// ---------------------------------------------------------------------------
// Artifact emission.

/// Min-max normalization to [0,1]; constant series map to 0.
fn min_max_norm(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Writes runs.csv, aggregates.csv, config.json, and artifact.json into
/// `out_dir`; returns the paths written. Every column except runs.csv's
/// trailing wall_time is a deterministic function of the config.
pub fn emit_report(artifact: &RunArtifact, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;

    let runs_path = dir.join("runs.csv");
    let mut runs =
        String::from("lambda,seed,variant,mi_sqrt_bound,gap_quantile,bound_total,chosen_k,wall_time\n");
    for r in &artifact.records {
        runs.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.lambda,
            r.seed,
            r.variant,
            r.mi.sqrt_bound,
            r.gap.quantile_value,
            r.bound.total,
            r.bound.chosen_k,
            r.wall_time_s
        ));
    }
    fs::write(&runs_path, runs)?;

    // The per-variant min-max-normalized columns put the MI and gap series
    // on common [0,1] axes, which is how the two curves are meant to be
    // compared without fitting any constants.
    let agg_path = dir.join("aggregates.csv");
    let mut agg = String::from(
        "lambda,variant,seed_count,mean_mi_sqrt_bound,mean_gap_quantile,mean_bound_total,norm_mi,norm_gap\n",
    );
    for variant in [TestVariant::Clean, TestVariant::Perturbed] {
        let group: Vec<&AggregateRecord> =
            artifact.aggregates.iter().filter(|a| a.variant == variant).collect();
        if group.is_empty() {
            continue;
        }
        let norm_mi = min_max_norm(&group.iter().map(|a| a.mean_mi_sqrt_bound).collect::<Vec<_>>());
        let norm_gap = min_max_norm(&group.iter().map(|a| a.mean_gap_quantile).collect::<Vec<_>>());
        for (i, a) in group.iter().enumerate() {
            agg.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                a.lambda,
                a.variant,
                a.seed_count,
                a.mean_mi_sqrt_bound,
                a.mean_gap_quantile,
                a.mean_bound_total,
                norm_mi[i],
                norm_gap[i]
            ));
        }
    }
    fs::write(&agg_path, agg)?;

    let config_path = dir.join("config.json");
    fs::write(&config_path, serde_json::to_string_pretty(&artifact.config)? + "\n")?;
    let artifact_path = dir.join("artifact.json");
    fs::write(&artifact_path, serde_json::to_string_pretty(artifact)? + "\n")?;
    Ok(vec![runs_path, agg_path, config_path, artifact_path])
}
