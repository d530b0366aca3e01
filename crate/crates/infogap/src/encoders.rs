//! Three stochastic encoder families mapping an input x to a random code U
//! of dimension m, each paired with a factorized prior and a closed-form
//! per-unit KL divergence averaged over a dataset:
//!
//! * Gaussian: U_j = mu_j(x) + sigma_j(x) Z, standard normal prior.
//! * Log-normal: U_j = f_j(x) exp(alpha_j(x) Z) with f > 0 and
//!   0 < alpha < 0.7, prior log-normal with trainable (mu_j, log sigma_j).
//! * RBM: U_j ~ Bernoulli(sigmoid(b_j + <w_j, x>)), prior = dataset-averaged
//!   activation, trained unsupervised by one-step contrastive divergence
//!   with weight decay on W.
//!
//! All sampling is reparameterized: the caller supplies (or seeds) the noise,
//! so encode with a fixed seed is bit-reproducible and gradients can flow
//! through the deterministic part.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{sgd_step, sigmoid, Activation, DenseLayer, Mat, Mlp, TrainConfig};

/// Probabilities and variances are clamped here before any log.
pub const PROB_FLOOR: f64 = 1e-12;
/// Hard cap on the log-normal noise scale: alpha = 0.7 * sigmoid(.).
pub const ALPHA_CAP: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderFamily {
    Gaussian,
    Lognormal,
    Rbm,
}

impl std::fmt::Display for EncoderFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EncoderFamily::Gaussian => write!(f, "gaussian"),
            EncoderFamily::Lognormal => write!(f, "lognormal"),
            EncoderFamily::Rbm => write!(f, "rbm"),
        }
    }
}

impl std::str::FromStr for EncoderFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(EncoderFamily::Gaussian),
            "lognormal" => Ok(EncoderFamily::Lognormal),
            "rbm" => Ok(EncoderFamily::Rbm),
            other => Err(Error::config(format!("unknown encoder family '{other}'"))),
        }
    }
}

/// Shared ReLU trunk with linear mean / log-variance heads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianEncoder {
    pub trunk: Mlp,
    pub mu_head: DenseLayer,
    pub logvar_head: DenseLayer,
}

impl GaussianEncoder {
    pub fn new(input_dim: usize, hidden: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        GaussianEncoder {
            trunk: Mlp::new(&[input_dim, hidden], &[Activation::Relu], rng),
            mu_head: DenseLayer::new(m, hidden, Activation::Identity, rng),
            logvar_head: DenseLayer::new(m, hidden, Activation::Identity, rng),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_head.out_dim()
    }

    /// (mu, sigma) at x; sigma = exp(logvar / 2) > 0 always.
    pub fn moments(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.trunk.forward(x);
        let mu = self.mu_head.forward(&h);
        let sigma = self.logvar_head.forward(&h).iter().map(|lv| (lv / 2.0).exp()).collect();
        (mu, sigma)
    }
}

/// Positive scale net f (softplus stack) and noise-exponent net
/// alpha = 0.7 * sigmoid(.), with trainable log-normal prior parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogNormalEncoder {
    pub f_net: Mlp,
    pub alpha_net: Mlp,
    pub prior_mu: Vec<f64>,
    pub prior_logsigma: Vec<f64>,
}

impl LogNormalEncoder {
    pub fn new(input_dim: usize, hidden: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        LogNormalEncoder {
            f_net: Mlp::new(&[input_dim, hidden, m], &[Activation::Softplus, Activation::Softplus], rng),
            alpha_net: Mlp::new(&[input_dim, m], &[Activation::Sigmoid], rng),
            prior_mu: vec![0.0; m],
            prior_logsigma: vec![0.0; m],
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.prior_mu.len()
    }

    /// (log f, alpha) at x; alpha in (0, 0.7], floored away from zero.
    pub fn params(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let log_f = self
            .f_net
            .forward(x)
            .iter()
            .map(|&f| f.max(PROB_FLOOR).ln())
            .collect();
        let alpha = self
            .alpha_net
            .forward(x)
            .iter()
            .map(|&s| (ALPHA_CAP * s).max(PROB_FLOOR))
            .collect();
        (log_f, alpha)
    }
}

/// Binary-code encoder: P(U_j = 1 | x) = sigmoid(b_j + <w_j, x>).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbmEncoder {
    /// m x d; row j is w_j.
    pub weights: Mat,
    pub hidden_bias: Vec<f64>,
    /// Visible bias, used only by contrastive-divergence reconstruction.
    pub visible_bias: Vec<f64>,
}

impl RbmEncoder {
    pub fn new(input_dim: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut weights = Mat::zeros(m, input_dim);
        for w in weights.data.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = 0.01 * z;
        }
        RbmEncoder { weights, hidden_bias: vec![0.0; m], visible_bias: vec![0.0; input_dim] }
    }

    pub fn latent_dim(&self) -> usize {
        self.hidden_bias.len()
    }

    /// Activation probabilities at x, clamped into (0,1).
    pub fn activations(&self, x: &[f64]) -> Vec<f64> {
        let mut a = self.weights.matvec(x);
        for (aj, bj) in a.iter_mut().zip(&self.hidden_bias) {
            *aj = sigmoid(*aj + bj).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        }
        a
    }
}

/// Any of the three encoder families behind one sampling/KL interface.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum StochasticEncoder {
    Gaussian(GaussianEncoder),
    Lognormal(LogNormalEncoder),
    Rbm(RbmEncoder),
}

impl StochasticEncoder {
    pub fn family(&self) -> EncoderFamily {
        match self {
            StochasticEncoder::Gaussian(_) => EncoderFamily::Gaussian,
            StochasticEncoder::Lognormal(_) => EncoderFamily::Lognormal,
            StochasticEncoder::Rbm(_) => EncoderFamily::Rbm,
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            StochasticEncoder::Gaussian(e) => e.latent_dim(),
            StochasticEncoder::Lognormal(e) => e.latent_dim(),
            StochasticEncoder::Rbm(e) => e.latent_dim(),
        }
    }

    /// The conditional code distribution at x.
    pub fn condition(&self, x: &[f64]) -> CondDist {
        match self {
            StochasticEncoder::Gaussian(e) => {
                let (mu, sigma) = e.moments(x);
                CondDist::Gaussian { mu, sigma }
            }
            StochasticEncoder::Lognormal(e) => {
                let (log_f, alpha) = e.params(x);
                CondDist::Lognormal { log_f, alpha }
            }
            StochasticEncoder::Rbm(e) => CondDist::Bernoulli { p: e.activations(x) },
        }
    }

    /// One code draw; noise comes from the supplied stream.
    pub fn encode(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.condition(x).sample(rng)
    }

    /// Per-unit KL from the conditional at each sample to the family prior,
    /// averaged over the dataset.
    pub fn per_unit_kl(&self, ds: &LabeledDataset) -> Result<Vec<f64>> {
        match self {
            StochasticEncoder::Gaussian(e) => kl_gaussian(e, ds),
            StochasticEncoder::Lognormal(e) => kl_lognormal(e, ds),
            StochasticEncoder::Rbm(e) => kl_rbm(e, ds),
        }
    }
}

/// Conditional distribution of the code at one input, in natural parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum CondDist {
    Gaussian { mu: Vec<f64>, sigma: Vec<f64> },
    Lognormal { log_f: Vec<f64>, alpha: Vec<f64> },
    Bernoulli { p: Vec<f64> },
}

impl CondDist {
    pub fn dim(&self) -> usize {
        match self {
            CondDist::Gaussian { mu, .. } => mu.len(),
            CondDist::Lognormal { log_f, .. } => log_f.len(),
            CondDist::Bernoulli { p } => p.len(),
        }
    }

    /// Noise vector driving one reparameterized draw: N(0,1)^m for the
    /// continuous families, U(0,1)^m thresholds for Bernoulli.
    pub fn draw_noise(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            CondDist::Bernoulli { p } => (0..p.len()).map(|_| rng.gen::<f64>()).collect(),
            _ => (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    /// Deterministic map from noise to a code sample.
    pub fn sample_with_noise(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.dim(), "noise dimension mismatch");
        match self {
            CondDist::Gaussian { mu, sigma } => mu
                .iter()
                .zip(sigma)
                .zip(z)
                .map(|((m, s), zj)| m + s * zj)
                .collect(),
            CondDist::Lognormal { log_f, alpha } => log_f
                .iter()
                .zip(alpha)
                .zip(z)
                .map(|((lf, a), zj)| (lf + a * zj).exp())
                .collect(),
            CondDist::Bernoulli { p } => p
                .iter()
                .zip(z)
                .map(|(pj, zj)| if zj < pj { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z = self.draw_noise(rng);
        self.sample_with_noise(&z)
    }

    /// log q(u | x): density for the continuous families, pmf for Bernoulli
    /// (u entries must be 0/1 there).
    pub fn log_density(&self, u: &[f64]) -> f64 {
        const HALF_LN_2PI: f64 = 0.918_938_533_204_672_74;
        assert_eq!(u.len(), self.dim(), "code dimension mismatch");
        match self {
            CondDist::Gaussian { mu, sigma } => mu
                .iter()
                .zip(sigma)
                .zip(u)
                .map(|((m, s), uj)| {
                    let s = s.max(PROB_FLOOR);
                    let d = (uj - m) / s;
                    -HALF_LN_2PI - s.ln() - 0.5 * d * d
                })
                .sum(),
            CondDist::Lognormal { log_f, alpha } => log_f
                .iter()
                .zip(alpha)
                .zip(u)
                .map(|((lf, a), uj)| {
                    let a = a.max(PROB_FLOOR);
                    let lu = uj.max(PROB_FLOOR).ln();
                    let d = (lu - lf) / a;
                    -lu - a.ln() - HALF_LN_2PI - 0.5 * d * d
                })
                .sum(),
            CondDist::Bernoulli { p } => p
                .iter()
                .zip(u)
                .map(|(pj, &uj)| {
                    let pj = pj.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                    if uj > 0.5 {
                        pj.ln()
                    } else {
                        (1.0 - pj).ln()
                    }
                })
                .sum(),
        }
    }
}

/// u_j = mu_j(x) + sigma_j(x) z_j.
pub fn encode_gaussian(enc: &GaussianEncoder, x: &[f64], noise: &[f64]) -> Vec<f64> {
    let (mu, sigma) = enc.moments(x);
    CondDist::Gaussian { mu, sigma }.sample_with_noise(noise)
}

/// u_j = f_j(x) exp(alpha_j(x) z_j) > 0.
pub fn encode_lognormal(enc: &LogNormalEncoder, x: &[f64], noise: &[f64]) -> Vec<f64> {
    let (log_f, alpha) = enc.params(x);
    CondDist::Lognormal { log_f, alpha }.sample_with_noise(noise)
}

fn warn_clamped(op: &str, count: usize) {
    if count > 0 {
        eprintln!("warning: {op}: {count} values clamped at {PROB_FLOOR:.0e} before log");
    }
}

/// Per-unit KL of N(mu(x), sigma^2(x)) from N(0,1), dataset-averaged:
/// KL_j = (1/2n) sum_i (-log sigma_j^2 + sigma_j^2 + mu_j^2 - 1).
pub fn kl_gaussian(enc: &GaussianEncoder, ds: &LabeledDataset) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::config("kl_gaussian requires a nonempty dataset"));
    }
    let m = enc.latent_dim();
    let mut acc = vec![0.0; m];
    let mut clamped = 0usize;
    for i in 0..ds.len() {
        let x = ds.image_f64(i);
        let (mu, sigma) = enc.moments(&x);
        for j in 0..m {
            let mut var = sigma[j] * sigma[j];
            if var < PROB_FLOOR {
                var = PROB_FLOOR;
                clamped += 1;
            }
            acc[j] += -var.ln() + var + mu[j] * mu[j] - 1.0;
        }
    }
    warn_clamped("kl_gaussian", clamped);
    let n = ds.len() as f64;
    Ok(acc.into_iter().map(|a| a / (2.0 * n)).collect())
}

/// One sample's contribution to the per-unit log-normal KL:
/// (alpha^2 + (log f - mu)^2) / (2 sigma^2) - log(alpha / sigma) - 1/2.
pub fn lognormal_kl_term(log_f: f64, alpha: f64, prior_mu: f64, prior_sigma: f64) -> f64 {
    let d = log_f - prior_mu;
    (alpha * alpha + d * d) / (2.0 * prior_sigma * prior_sigma) - (alpha / prior_sigma).ln() - 0.5
}

/// Dataset-averaged per-unit KL between the conditional log-normal and the
/// trainable log-normal prior (equal to the KL between the underlying
/// normals).
pub fn kl_lognormal(enc: &LogNormalEncoder, ds: &LabeledDataset) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::config("kl_lognormal requires a nonempty dataset"));
    }
    let m = enc.latent_dim();
    let mut acc = vec![0.0; m];
    let mut clamped = 0usize;
    for i in 0..ds.len() {
        let x = ds.image_f64(i);
        let (log_f, alpha) = enc.params(&x);
        for j in 0..m {
            let mut a = alpha[j];
            if a < PROB_FLOOR {
                a = PROB_FLOOR;
                clamped += 1;
            }
            acc[j] += lognormal_kl_term(log_f[j], a, enc.prior_mu[j], enc.prior_logsigma[j].exp());
        }
    }
    warn_clamped("kl_lognormal", clamped);
    let n = ds.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Dataset-averaged per-unit Bernoulli KL against the dataset-averaged
/// activation prior. Zero iff the activation is constant across the dataset.
pub fn kl_rbm(enc: &RbmEncoder, ds: &LabeledDataset) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::config("kl_rbm requires a nonempty dataset"));
    }
    let m = enc.latent_dim();
    let n = ds.len();
    // Activations are already clamped into (0,1) by `activations`.
    let mut acts = Vec::with_capacity(n);
    let mut prior = vec![0.0; m];
    for i in 0..n {
        let a = enc.activations(&ds.image_f64(i));
        for j in 0..m {
            prior[j] += a[j];
        }
        acts.push(a);
    }
    for p in prior.iter_mut() {
        *p = (*p / n as f64).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    }
    let mut kl = vec![0.0; m];
    for a in &acts {
        for j in 0..m {
            let p = a[j];
            let q = prior[j];
            kl[j] += p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        }
    }
    Ok(kl.into_iter().map(|k| (k / n as f64).max(0.0)).collect())
}

/// Momentum state for contrastive-divergence training.
#[derive(Debug, Clone)]
pub struct RbmVelocity {
    vw: Vec<f64>,
    vb: Vec<f64>,
    vc: Vec<f64>,
}

impl RbmVelocity {
    pub fn zeros_like(enc: &RbmEncoder) -> Self {
        RbmVelocity {
            vw: vec![0.0; enc.weights.data.len()],
            vb: vec![0.0; enc.hidden_bias.len()],
            vc: vec![0.0; enc.visible_bias.len()],
        }
    }
}

/// One CD-1 step over a batch of visible vectors in [0,1]^d.
///
/// Positive phase: sampled hidden states driven by the data (one uniform
/// draw per hidden unit, in unit order, per sample in batch order).
/// Negative phase: Bernoulli reconstruction probabilities and the hidden
/// probabilities they induce; no sampling. The weight gradient adds the
/// decay term lambda * W from the (lambda/2)||W||_F^2 penalty.
pub fn cd1_update(
    enc: &mut RbmEncoder,
    batch: &[Vec<f64>],
    config: &TrainConfig,
    vel: &mut RbmVelocity,
    rng: &mut ChaCha8Rng,
) {
    assert!(!batch.is_empty(), "empty CD batch");
    let m = enc.latent_dim();
    let d = enc.visible_bias.len();
    let mut pos_w = vec![0.0; m * d];
    let mut neg_w = vec![0.0; m * d];
    let mut grad_b = vec![0.0; m];
    let mut grad_c = vec![0.0; d];

    for x in batch {
        assert_eq!(x.len(), d, "visible dimension mismatch");
        let mut h_prob = enc.weights.matvec(x);
        for (hj, bj) in h_prob.iter_mut().zip(&enc.hidden_bias) {
            *hj = sigmoid(*hj + bj);
        }
        let h_state: Vec<f64> = h_prob
            .iter()
            .map(|&p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
            .collect();

        let mut v_rec = enc.weights.matvec_t(&h_state);
        for (vk, ck) in v_rec.iter_mut().zip(&enc.visible_bias) {
            *vk = sigmoid(*vk + ck);
        }
        let mut h_neg = enc.weights.matvec(&v_rec);
        for (hj, bj) in h_neg.iter_mut().zip(&enc.hidden_bias) {
            *hj = sigmoid(*hj + bj);
        }

        for j in 0..m {
            let (hs, hn) = (h_state[j], h_neg[j]);
            let row = j * d;
            for k in 0..d {
                pos_w[row + k] += hs * x[k];
                neg_w[row + k] += hn * v_rec[k];
            }
            grad_b[j] -= hs - hn;
        }
        for k in 0..d {
            grad_c[k] -= x[k] - v_rec[k];
        }
    }

    let inv_b = 1.0 / batch.len() as f64;
    let mut grad_w = vec![0.0; m * d];
    for i in 0..m * d {
        grad_w[i] = -(pos_w[i] - neg_w[i]) * inv_b + config.lambda * enc.weights.data[i];
    }
    for g in grad_b.iter_mut() {
        *g *= inv_b;
    }
    for g in grad_c.iter_mut() {
        *g *= inv_b;
    }

    sgd_step(&mut enc.weights.data, &mut vel.vw, &grad_w, config.lr, config.momentum);
    sgd_step(&mut enc.hidden_bias, &mut vel.vb, &grad_b, config.lr, config.momentum);
    sgd_step(&mut enc.visible_bias, &mut vel.vc, &grad_c, config.lr, config.momentum);
}

const ENCODER_DOC_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct EncoderDocument {
    version: u32,
    encoder: StochasticEncoder,
}

/// Versioned JSON snapshot of encoder parameters.
pub fn encoder_to_json(enc: &StochasticEncoder) -> Result<String> {
    Ok(serde_json::to_string_pretty(&EncoderDocument {
        version: ENCODER_DOC_VERSION,
        encoder: enc.clone(),
    })?)
}

pub fn encoder_from_json(text: &str) -> Result<StochasticEncoder> {
    let doc: EncoderDocument = serde_json::from_str(text)?;
    if doc.version != ENCODER_DOC_VERSION {
        return Err(Error::config(format!(
            "unsupported encoder document version {} (expected {ENCODER_DOC_VERSION})",
            doc.version
        )));
    }
    Ok(doc.encoder)
}
