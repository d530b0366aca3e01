//! Softmax decoder over codes, the induced cross-entropy loss, empirical
//! risks, and the gap-quantile protocol.
//!
//! The per-sample loss is an expectation over the stochastic code,
//! l(x,y) = E[-log Q(y|U)], estimated by seeded Monte Carlo; binary-code
//! encoders also get an exact enumeration path. Decoder probabilities are
//! floored at 1e-12 before logs, and every estimate carries a flag saying
//! whether that floor was hit.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::encoders::{RbmEncoder, StochasticEncoder, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::nn::{logsumexp, Mat};
use crate::rng;

/// Linear map from codes to label logits; Q(y|u) = softmax(W u + b)_y.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoftmaxDecoder {
    /// |Y| x m.
    pub weights: Mat,
    pub biases: Vec<f64>,
}

impl SoftmaxDecoder {
    pub fn new(y_card: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        SoftmaxDecoder { weights: Mat::init_uniform(y_card, m, rng), biases: vec![0.0; y_card] }
    }

    pub fn y_card(&self) -> usize {
        self.biases.len()
    }

    pub fn code_dim(&self) -> usize {
        self.weights.cols
    }

    pub fn logits(&self, u: &[f64]) -> Vec<f64> {
        let mut z = self.weights.matvec(u);
        for (zi, bi) in z.iter_mut().zip(&self.biases) {
            *zi += bi;
        }
        z
    }

    /// log Q(.|u), exactly normalized.
    pub fn log_probs(&self, u: &[f64]) -> Vec<f64> {
        let z = self.logits(u);
        let lse = logsumexp(&z);
        z.into_iter().map(|zi| zi - lse).collect()
    }
}

/// Q(.|u) as a strictly positive probability vector.
pub fn decoder_prob(dec: &SoftmaxDecoder, u: &[f64]) -> Vec<f64> {
    dec.log_probs(u).into_iter().map(f64::exp).collect()
}

/// -log Q(y|u) with the probability floored at 1e-12; the flag reports
/// whether flooring happened.
pub fn neg_log_prob(dec: &SoftmaxDecoder, u: &[f64], y: u8) -> (f64, bool) {
    let lp = dec.log_probs(u)[y as usize];
    let floor = PROB_FLOOR.ln();
    if lp < floor {
        (-floor, true)
    } else {
        (-lp, false)
    }
}

/// Smallest decoder probability over a probe set of codes — a computable
/// stand-in for the positivity constant the variance bound needs.
pub fn min_decoder_prob(dec: &SoftmaxDecoder, probes: &[Vec<f64>]) -> f64 {
    let mut min = f64::INFINITY;
    for u in probes {
        for p in decoder_prob(dec, u) {
            min = min.min(p);
        }
    }
    if min.is_finite() {
        min.max(PROB_FLOOR)
    } else {
        PROB_FLOOR
    }
}

/// A Monte Carlo loss value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub value: f64,
    /// Standard error of the Monte Carlo mean; 0 when it cannot be estimated.
    pub std_error: f64,
    /// True when any decoder probability hit the 1e-12 floor.
    pub clamped: bool,
}

/// Monte Carlo estimate of l(x,y) = E[-log Q(y|U)] over S code draws.
pub fn sample_loss(
    enc: &StochasticEncoder,
    dec: &SoftmaxDecoder,
    x: &[f64],
    y: u8,
    mc_samples: usize,
    rng: &mut ChaCha8Rng,
) -> LossEstimate {
    assert!(mc_samples >= 1, "need at least one Monte Carlo draw");
    let dist = enc.condition(x);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut clamped = false;
    for _ in 0..mc_samples {
        let u = dist.sample(rng);
        let (l, c) = neg_log_prob(dec, &u, y);
        sum += l;
        sum_sq += l * l;
        clamped |= c;
    }
    let s = mc_samples as f64;
    let mean = sum / s;
    let std_error = if mc_samples > 1 {
        let var = ((sum_sq - sum * sum / s) / (s - 1.0)).max(0.0);
        (var / s).sqrt()
    } else {
        0.0
    };
    LossEstimate { value: mean, std_error, clamped }
}

/// Cap on the code dimension for exact enumeration over {0,1}^m.
pub const EXACT_ENUM_MAX_M: usize = 20;

/// Exact l(x,y) for a binary-code encoder: sum over all u in {0,1}^m of
/// q(u|x) * (-log Q(y|u)), with the same probability floor as sampling.
pub fn exact_loss_binary(enc: &RbmEncoder, dec: &SoftmaxDecoder, x: &[f64], y: u8) -> Result<f64> {
    let m = enc.latent_dim();
    if m > EXACT_ENUM_MAX_M {
        return Err(Error::config(format!(
            "exact enumeration needs m <= {EXACT_ENUM_MAX_M}, got {m}"
        )));
    }
    let p = enc.activations(x);
    let mut total = 0.0;
    let mut u = vec![0.0f64; m];
    for bits in 0u64..(1u64 << m) {
        let mut mass = 1.0;
        for j in 0..m {
            if (bits >> j) & 1 == 1 {
                u[j] = 1.0;
                mass *= p[j];
            } else {
                u[j] = 0.0;
                mass *= 1.0 - p[j];
            }
        }
        let (l, _) = neg_log_prob(dec, &u, y);
        total += mass * l;
    }
    Ok(total)
}

/// Mean per-sample loss over a dataset. Each sample's Monte Carlo stream is
/// keyed by (seed, sample bytes), so duplicated samples share their noise and
/// the mean is invariant under duplication.
pub fn empirical_risk(
    enc: &StochasticEncoder,
    dec: &SoftmaxDecoder,
    ds: &LabeledDataset,
    mc_samples: usize,
    seed: u64,
) -> Result<LossEstimate> {
    if ds.is_empty() {
        return Err(Error::config("empirical_risk requires a nonempty dataset"));
    }
    let mut sum = 0.0;
    let mut var_sum = 0.0;
    let mut clamped = false;
    for i in 0..ds.len() {
        let x = ds.image_f64(i);
        let y = ds.labels[i];
        let mut r = rng::content_stream(seed, ds.image(i), y);
        let est = sample_loss(enc, dec, &x, y, mc_samples, &mut r);
        sum += est.value;
        var_sum += est.std_error * est.std_error;
        clamped |= est.clamped;
    }
    let n = ds.len() as f64;
    Ok(LossEstimate { value: sum / n, std_error: var_sum.sqrt() / n, clamped })
}

/// Code dimension up to which [`loss_rows`] enumerates binary codes exactly
/// instead of sampling (2^10 decoder evaluations per row stay cheap).
const ROW_ENUM_MAX_M: usize = 10;

/// The full per-sample loss table: row i holds l(x_i, y) for every label y.
///
/// Binary encoders with at most 2^10 codes get exact rows. Otherwise each
/// row averages one bank of code draws shared across labels; the bank is
/// keyed by sample content only, so duplicated samples get identical rows.
pub fn loss_rows(
    enc: &StochasticEncoder,
    dec: &SoftmaxDecoder,
    ds: &LabeledDataset,
    mc_samples: usize,
    seed: u64,
) -> Result<Mat> {
    if ds.is_empty() {
        return Err(Error::config("loss table of an empty dataset"));
    }
    if mc_samples == 0 {
        return Err(Error::config("need at least one Monte Carlo draw"));
    }
    let y_card = ds.num_classes;
    let floor = PROB_FLOOR.ln();
    let mut rows = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let x = ds.image_f64(i);
        let row = match enc {
            StochasticEncoder::Rbm(r) if r.latent_dim() <= ROW_ENUM_MAX_M => (0..y_card)
                .map(|y| exact_loss_binary(r, dec, &x, y as u8))
                .collect::<Result<Vec<f64>>>()?,
            _ => {
                let mut r = rng::content_stream(seed, ds.image(i), 0xfe);
                let dist = enc.condition(&x);
                let mut row = vec![0.0; y_card];
                for _ in 0..mc_samples {
                    let lps = dec.log_probs(&dist.sample(&mut r));
                    for (acc, &lp) in row.iter_mut().zip(&lps) {
                        *acc -= lp.max(floor);
                    }
                }
                for v in row.iter_mut() {
                    *v /= mc_samples as f64;
                }
                row
            }
        };
        rows.push(row);
    }
    Ok(Mat::from_rows(rows))
}

/// Empirical level-quantile with higher interpolation: the smallest order
/// statistic whose rank reaches ceil(level * count).
pub fn empirical_quantile(values: &[f64], level: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty list");
    assert!((0.0..=1.0).contains(&level), "quantile level out of range");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((level * sorted.len() as f64).ceil() as usize).max(1);
    sorted[rank.min(sorted.len()) - 1]
}

/// Absolute risk gaps of disjoint mini-tests against a reference risk, and
/// their empirical quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// One gap per mini-test, in partition order.
    pub mini_test_gaps: Vec<f64>,
    pub quantile_level: f64,
    pub quantile_value: f64,
    /// The large-sample stand-in for the expected risk.
    pub reference_risk: f64,
}

/// Splits `pool` into floor(|pool|/mini_size) disjoint mini-tests (one seeded
/// shuffle, then consecutive blocks), computes each block's |risk - reference
/// risk|, and returns their empirical level-quantile.
#[allow(clippy::too_many_arguments)]
pub fn gap_quantile(
    enc: &StochasticEncoder,
    dec: &SoftmaxDecoder,
    reference_set: &LabeledDataset,
    pool: &LabeledDataset,
    mini_size: usize,
    level: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<GapEstimate> {
    if mini_size == 0 || pool.len() < mini_size {
        return Err(Error::config(format!(
            "pool of {} samples cannot host a mini-test of size {mini_size}",
            pool.len()
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::config("quantile level must lie in (0,1)"));
    }
    let reference_risk = empirical_risk(enc, dec, reference_set, mc_samples, seed)?.value;

    let mut idx: Vec<usize> = (0..pool.len()).collect();
    let mut r = rng::substream(seed, 0x6d69_6e69); // shuffle stream, disjoint from loss streams
    for i in (1..idx.len()).rev() {
        let j = rand::Rng::gen_range(&mut r, 0..=i);
        idx.swap(i, j);
    }

    let blocks = pool.len() / mini_size;
    let mut gaps = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let block = pool.select(&idx[b * mini_size..(b + 1) * mini_size]);
        let risk = empirical_risk(enc, dec, &block, mc_samples, seed)?.value;
        gaps.push((risk - reference_risk).abs());
    }
    let quantile_value = empirical_quantile(&gaps, level);
    Ok(GapEstimate { mini_test_gaps: gaps, quantile_level: level, quantile_value, reference_risk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{GaussianEncoder, LogNormalEncoder};

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol * expected.abs().max(1.0),
            "expected {expected}, got {actual}"
        );
    }

    fn uniform_decoder(y_card: usize, m: usize) -> SoftmaxDecoder {
        SoftmaxDecoder { weights: Mat::zeros(y_card, m), biases: vec![0.0; y_card] }
    }

    #[test]
    fn decoder_prob_frozen_values() {
        let dec = uniform_decoder(10, 3);
        for p in decoder_prob(&dec, &[0.4, -2.0, 7.0]) {
            assert_close(p, 0.1, 1e-12);
        }

        let dec = SoftmaxDecoder { weights: Mat::zeros(2, 1), biases: vec![0.0, 3.0f64.ln()] };
        let p = decoder_prob(&dec, &[5.0]);
        assert_close(p[0], 0.25, 1e-12);
        assert_close(p[1], 0.75, 1e-12);

        let mut r = rng::stream(8);
        let dec = SoftmaxDecoder::new(4, 3, &mut r);
        let p = decoder_prob(&dec, &[10.0, -10.0, 0.3]);
        assert_close(p.iter().sum::<f64>(), 1.0, 1e-12);
        assert!(p.iter().all(|&pi| pi > 0.0));
    }

    #[test]
    fn degenerate_gaussian_encoder_gives_deterministic_loss() {
        let mut r = rng::stream(4);
        let mut enc = GaussianEncoder::new(2, 3, 2, &mut r);
        enc.logvar_head.w.data.fill(0.0);
        enc.logvar_head.b.fill(-1000.0); // sigma ~ e^-500: numerically zero spread
        let dec = SoftmaxDecoder::new(3, 2, &mut r);
        let x = [0.2, 0.9];
        let (mu, _) = enc.moments(&x);
        let (expect, _) = neg_log_prob(&dec, &mu, 1);
        let enc = StochasticEncoder::Gaussian(enc);
        for s in [1, 7, 50] {
            let est = sample_loss(&enc, &dec, &x, 1, s, &mut rng::stream(99));
            assert_close(est.value, expect, 1e-12);
        }
    }

    #[test]
    fn uniform_decoder_loss_is_log_y_card() {
        let mut r = rng::stream(12);
        let enc = StochasticEncoder::Lognormal(LogNormalEncoder::new(2, 3, 2, &mut r));
        let dec = uniform_decoder(10, 2);
        let est = sample_loss(&enc, &dec, &[0.1, 0.8], 3, 5, &mut rng::stream(1));
        assert_close(est.value, 10f64.ln(), 1e-12);
        assert_eq!(est.std_error, 0.0);
        assert!(!est.clamped);
    }

    #[test]
    fn exact_loss_binary_frozen_values() {
        let mut r = rng::stream(21);
        // m = 1, activation 0.5, decoder independent of u.
        let mut enc = RbmEncoder::new(1, 1, &mut r);
        enc.weights.data.fill(0.0);
        enc.hidden_bias.fill(0.0);
        let dec = SoftmaxDecoder { weights: Mat::zeros(2, 1), biases: vec![0.0, 3.0f64.ln()] };
        assert_close(exact_loss_binary(&enc, &dec, &[0.3], 1).unwrap(), -(0.75f64.ln()), 1e-12);

        // m = 1, activation clamped to ~1: loss collapses to the u = 1 branch.
        let mut enc1 = RbmEncoder::new(1, 1, &mut r);
        enc1.weights.data.fill(0.0);
        enc1.hidden_bias.fill(1e6);
        let dec1 = SoftmaxDecoder { weights: Mat::from_rows(vec![vec![0.0], vec![2.0]]), biases: vec![0.0, 0.0] };
        let (expect, _) = neg_log_prob(&dec1, &[1.0], 1);
        assert_close(exact_loss_binary(&enc1, &dec1, &[0.3], 1).unwrap(), expect, 1e-9);

        // m = 2 random instance against the explicit 4-term sum.
        let enc2 = RbmEncoder::new(2, 2, &mut r);
        let dec2 = SoftmaxDecoder::new(3, 2, &mut r);
        let x = [0.6, 0.2];
        let p = enc2.activations(&x);
        let mut hand = 0.0;
        for (u, mass) in [
            (vec![0.0, 0.0], (1.0 - p[0]) * (1.0 - p[1])),
            (vec![1.0, 0.0], p[0] * (1.0 - p[1])),
            (vec![0.0, 1.0], (1.0 - p[0]) * p[1]),
            (vec![1.0, 1.0], p[0] * p[1]),
        ] {
            hand += mass * neg_log_prob(&dec2, &u, 2).0;
        }
        assert_close(exact_loss_binary(&enc2, &dec2, &x, 2).unwrap(), hand, 1e-12);

        // Budget gate.
        let enc_big = RbmEncoder::new(1, 21, &mut r);
        assert!(exact_loss_binary(&enc_big, &SoftmaxDecoder::new(2, 21, &mut r), &[0.1], 0).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration() {
        let mut r = rng::stream(33);
        let mut enc = RbmEncoder::new(3, 4, &mut r);
        for w in enc.weights.data.iter_mut() {
            *w *= 50.0; // spread activations away from 0.5
        }
        let dec = SoftmaxDecoder::new(4, 4, &mut r);
        let x = [0.2, 0.7, 0.5];
        let exact = exact_loss_binary(&enc, &dec, &x, 3).unwrap();
        let enc = StochasticEncoder::Rbm(enc);
        let est = sample_loss(&enc, &dec, &x, 3, 10_000, &mut rng::stream(5));
        assert!(
            (est.value - exact).abs() <= 3.0 * est.std_error.max(1e-12),
            "MC {} vs exact {} (se {})",
            est.value,
            exact,
            est.std_error
        );
    }

    #[test]
    fn empirical_risk_basics_and_duplication_invariance() {
        let mut r = rng::stream(44);
        let enc = StochasticEncoder::Gaussian(GaussianEncoder::new(4, 3, 2, &mut r));
        let dec = SoftmaxDecoder::new(3, 2, &mut r);

        let images: Vec<f32> = vec![0.1, 0.6, 0.3, 0.9, 0.4, 0.2, 0.8, 0.5];
        let ds = LabeledDataset::new(images.clone(), vec![0, 2], 2, 2, 3).unwrap();

        // n = 1 equals that sample's loss.
        let one = ds.select(&[1]);
        let mut rs = rng::content_stream(7, one.image(0), one.labels[0]);
        let direct = sample_loss(&enc, &dec, &one.image_f64(0), one.labels[0], 16, &mut rs);
        let risk1 = empirical_risk(&enc, &dec, &one, 16, 7).unwrap();
        assert_close(risk1.value, direct.value, 1e-12);

        // Duplicating every sample leaves the mean unchanged (content-keyed noise).
        let doubled = ds.select(&[0, 0, 1, 1]);
        let a = empirical_risk(&enc, &dec, &ds, 16, 7).unwrap();
        let b = empirical_risk(&enc, &dec, &doubled, 16, 7).unwrap();
        assert_close(a.value, b.value, 1e-12);

        // Uniform decoder: risk = log |Y| no matter the data.
        let u = uniform_decoder(5, 2);
        let risk = empirical_risk(&enc, &u, &ds, 4, 7).unwrap();
        assert_close(risk.value, 5f64.ln(), 1e-12);
    }

    #[test]
    fn loss_rows_paths_and_duplication_invariance() {
        let mut r = rng::stream(71);

        // Binary path: every entry equals the exact enumeration.
        let rbm = RbmEncoder::new(2, 3, &mut r);
        let dec = SoftmaxDecoder::new(4, 3, &mut r);
        let pix: Vec<f32> = vec![0.1, 0.9, 0.4, 0.3];
        let ds = LabeledDataset::new(pix, vec![0, 2], 1, 2, 4).unwrap();
        let table = loss_rows(&StochasticEncoder::Rbm(rbm.clone()), &dec, &ds, 1, 5).unwrap();
        assert_eq!((table.rows, table.cols), (2, 4));
        for i in 0..2 {
            for y in 0..4 {
                let exact = exact_loss_binary(&rbm, &dec, &ds.image_f64(i), y as u8).unwrap();
                assert_close(table.at(i, y), exact, 1e-12);
            }
        }

        // Sampled path: uniform decoder rows are exactly log |Y|, and
        // duplicated samples share their code bank.
        let enc = StochasticEncoder::Gaussian(GaussianEncoder::new(2, 3, 2, &mut r));
        let u = uniform_decoder(5, 2);
        let t = loss_rows(&enc, &u, &ds, 8, 5).unwrap();
        assert!(t.data.iter().all(|&v| (v - 5f64.ln()).abs() < 1e-12));
        let dec2 = SoftmaxDecoder::new(5, 2, &mut r);
        let doubled = ds.select(&[0, 1, 0]);
        let t2 = loss_rows(&enc, &dec2, &doubled, 8, 5).unwrap();
        assert_eq!(t2.row(0), t2.row(2));
    }

    #[test]
    fn quantile_higher_interpolation_frozen_values() {
        let gaps: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        assert_close(empirical_quantile(&gaps, 0.95), 1.0, 1e-12);
        assert_close(empirical_quantile(&gaps, 0.90), 0.9, 1e-12);
        assert_close(empirical_quantile(&gaps, 0.05), 0.1, 1e-12);
        // Constant list: quantile = the constant at any level.
        let c = vec![0.42; 9];
        for level in [0.01, 0.5, 0.95, 1.0] {
            assert_close(empirical_quantile(&c, level), 0.42, 1e-12);
        }
        // Monotone in level.
        let vals = [0.3, 0.1, 0.7, 0.2, 0.9];
        let mut last = 0.0;
        for level in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            let q = empirical_quantile(&vals, level);
            assert!(q >= last);
            last = q;
        }
    }

    #[test]
    fn gap_quantile_zero_when_decoder_is_constant() {
        let mut r = rng::stream(55);
        let enc = StochasticEncoder::Gaussian(GaussianEncoder::new(1, 2, 2, &mut r));
        let dec = uniform_decoder(4, 2);
        let pix: Vec<f32> = (0..40).map(|i| (i as f32) / 40.0).collect();
        let pool = LabeledDataset::new(pix.clone(), vec![1; 40], 1, 1, 4).unwrap();
        let reference = LabeledDataset::new(pix, vec![1; 40], 1, 1, 4).unwrap();
        let gap = gap_quantile(&enc, &dec, &reference, &pool, 10, 0.95, 2, 3).unwrap();
        assert_eq!(gap.mini_test_gaps.len(), 4);
        assert_close(gap.quantile_value, 0.0, 1e-12);
        assert_close(gap.reference_risk, 4f64.ln(), 1e-12);
    }

    #[test]
    fn gap_quantile_validates_pool_and_is_deterministic() {
        let mut r = rng::stream(66);
        let enc = StochasticEncoder::Gaussian(GaussianEncoder::new(1, 2, 2, &mut r));
        let dec = SoftmaxDecoder::new(3, 2, &mut r);
        let pix: Vec<f32> = (0..30).map(|i| (i as f32) / 30.0).collect();
        let pool = LabeledDataset::new(pix.clone(), (0..30).map(|i| (i % 3) as u8).collect(), 1, 1, 3).unwrap();
        let reference = pool.select(&(0..10).collect::<Vec<_>>());

        assert!(gap_quantile(&enc, &dec, &reference, &pool, 31, 0.95, 2, 3).is_err());

        let a = gap_quantile(&enc, &dec, &reference, &pool, 7, 0.95, 8, 3).unwrap();
        let b = gap_quantile(&enc, &dec, &reference, &pool, 7, 0.95, 8, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mini_test_gaps.len(), 4); // floor(30/7)
        assert!(a.mini_test_gaps.iter().all(|&g| g >= 0.0));
    }

    #[test]
    fn min_decoder_prob_probes_all_pairs() {
        let dec = SoftmaxDecoder { weights: Mat::zeros(2, 1), biases: vec![0.0, 3.0f64.ln()] };
        let probes = vec![vec![0.0], vec![1.0]];
        assert_close(min_decoder_prob(&dec, &probes), 0.25, 1e-12);
    }
}
