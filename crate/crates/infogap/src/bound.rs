//! Every computable piece of the high-probability testing-gap bound: the
//! delta-dependent constants, the phi envelope and its growth bound, the
//! Hellinger distance between decoder tables, the variance bound, three
//! concentration inequalities, and the assembly that minimizes the
//! quantization tradeoff over a grid of cell counts.
//!
//! All logarithms are natural; every quantity is in nats. The bound's
//! O(log n / n) remainder has no explicit constant and is reported
//! symbolically, never evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mi::MiEstimate;
use crate::nn::Mat;
use crate::quantizer::QuantizationReport;

const INV_E: f64 = 0.367_879_441_171_442_33;

/// Piecewise envelope: 0 for x <= 0, -x ln x on (0, 1/e), constant 1/e after.
/// Continuous, nonnegative, maximized at 1/e.
pub fn phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < INV_E {
        -x * x.ln()
    } else {
        INV_E
    }
}

/// The growth bound phi(a / sqrt(n)) <= (a/2) ln(n)/sqrt(n) + (1/e)/sqrt(n),
/// valid once n >= a^2 e^2; returns the right-hand side.
pub fn phi_growth_bound(a: f64, n: u64) -> Result<f64> {
    if a < 0.0 {
        return Err(Error::config("phi_growth_bound needs a >= 0"));
    }
    let nf = n as f64;
    if nf < a * a * std::f64::consts::E * std::f64::consts::E {
        return Err(Error::config(format!(
            "phi_growth_bound needs n >= a^2 e^2 (= {:.3}), got n = {n}",
            a * a * std::f64::consts::E * std::f64::consts::E
        )));
    }
    let sqrt_n = nf.sqrt();
    Ok(a / 2.0 * nf.ln() / sqrt_n + INV_E / sqrt_n)
}

fn check_rows_normalized(name: &str, table: &Mat) -> Result<()> {
    for r in 0..table.rows {
        let row = table.row(r);
        if row.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) {
            return Err(Error::config(format!("{name} row {r} has entries outside [0,1]")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("{name} row {r} sums to {s}, expected 1")));
        }
    }
    Ok(())
}

/// Hellinger distance between two conditional label tables under a weighting
/// of their rows: sqrt((1/2) sum_rows w * sum_y (sqrt p - sqrt q)^2), in
/// [0,1]. Rows must be normalized to 1e-9; weights must form a distribution.
pub fn hellinger(p_table: &Mat, q_table: &Mat, u_weights: &[f64]) -> Result<f64> {
    if p_table.rows != q_table.rows || p_table.cols != q_table.cols {
        return Err(Error::config("conditional tables have mismatched shapes"));
    }
    if u_weights.len() != p_table.rows {
        return Err(Error::config("one weight per table row required"));
    }
    if u_weights.iter().any(|&w| w < 0.0) {
        return Err(Error::config("negative row weight"));
    }
    let wsum: f64 = u_weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("row weights sum to {wsum}, expected 1")));
    }
    check_rows_normalized("first table", p_table)?;
    check_rows_normalized("second table", q_table)?;

    let mut acc = 0.0;
    for r in 0..p_table.rows {
        if u_weights[r] == 0.0 {
            continue;
        }
        let s: f64 = p_table
            .row(r)
            .iter()
            .zip(q_table.row(r))
            .map(|(&p, &q)| {
                let d = p.max(0.0).sqrt() - q.max(0.0).sqrt();
                d * d
            })
            .sum();
        acc += u_weights[r] * 0.5 * s;
    }
    Ok(acc.sqrt().clamp(0.0, 1.0))
}

/// Standard error of a Monte Carlo `hellinger` value when the rows are an
/// equal-weight sample bank; 0 for exact (unequal-weight) supports.
pub fn hellinger_std_error(p_table: &Mat, q_table: &Mat, u_weights: &[f64]) -> f64 {
    let n = u_weights.len();
    if n < 2 {
        return 0.0;
    }
    let w = u_weights[0];
    if u_weights.iter().any(|&wi| (wi - w).abs() > 1e-15) {
        return 0.0;
    }
    // Per-row squared-Hellinger summands.
    let vals: Vec<f64> = (0..n)
        .map(|r| {
            0.5 * p_table
                .row(r)
                .iter()
                .zip(q_table.row(r))
                .map(|(&p, &q)| {
                    let d = p.max(0.0).sqrt() - q.max(0.0).sqrt();
                    d * d
                })
                .sum::<f64>()
        })
        .collect();
    let mean: f64 = vals.iter().sum::<f64>() / n as f64;
    let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    let se_mean = (var / n as f64).sqrt();
    if mean > 0.0 {
        se_mean / (2.0 * mean.sqrt()) // delta method through the square root
    } else {
        se_mean.sqrt()
    }
}

/// Variance bound (8 / sqrt(eta)) * hellinger^2 on the decoder-efficiency
/// statistic; eta is the positive floor on decoder probabilities.
pub fn var_bound_t(hellinger_value: f64, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&hellinger_value) {
        return Err(Error::config("hellinger value must lie in [0,1]"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::config("eta must lie in (0,1]"));
    }
    Ok(8.0 / eta.sqrt() * hellinger_value * hellinger_value)
}

/// Concentration of the empirical KL of a discrete joint:
/// |X||Y| ln(n+1)/n + ln((|Y|+4)/delta)/n.
pub fn kl_concentration(x_card: usize, y_card: usize, n: u64, delta: f64) -> f64 {
    let nf = n as f64;
    (x_card * y_card) as f64 * (nf + 1.0).ln() / nf + ((y_card as f64 + 4.0) / delta).ln() / nf
}

/// L2 concentration of an empirical probability vector:
/// (1 + sqrt(ln(1/delta))) / sqrt(n).
pub fn l2_concentration(n: u64, delta: f64) -> f64 {
    (1.0 + (1.0 / delta).ln().sqrt()) / (n as f64).sqrt()
}

/// Chebyshev deviation bound sqrt((|Y|+4)/(n delta)) * sqrt(var_bound).
pub fn chebyshev_d(var_bound: f64, n: u64, delta: f64, y_card: usize) -> f64 {
    ((y_card as f64 + 4.0) / (n as f64 * delta)).sqrt() * var_bound.sqrt()
}

/// Volume of the axis-aligned bounding box of a code sample bank; the
/// default stand-in for the code-space volume of continuous encoders.
pub fn bounding_box_volume(bank: &[Vec<f64>]) -> f64 {
    let Some(first) = bank.first() else {
        return 0.0;
    };
    let mut lo = first.clone();
    let mut hi = first.clone();
    for u in bank.iter().skip(1) {
        for (j, &v) in u.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| b - a).product()
}

/// The delta-dependent constants of the gap bound, all positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaConstants {
    pub delta: f64,
    pub y_card: usize,
    pub b_delta: f64,
    pub a_delta: f64,
    pub c_delta: f64,
    pub d_delta: f64,
    /// Code-space volume: 2^m for binary codes, configured or bounding-box
    /// estimated otherwise.
    pub vol_u: f64,
    /// Smallest label probability.
    pub p_y_min: f64,
    /// Positive floor on decoder probabilities.
    pub eta: f64,
}

/// b = 1 + sqrt(ln((|Y|+4)/delta)): the quantile width shared by the
/// concentration lemmas and, scaled by sqrt(2), the MI-term coefficient.
pub fn b_delta(delta: f64, y_card: usize) -> Result<f64> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::config("delta must lie in (0,1)"));
    }
    if y_card == 0 {
        return Err(Error::config("label cardinality must be positive"));
    }
    Ok(1.0 + ((y_card as f64 + 4.0) / delta).ln().sqrt())
}

impl DeltaConstants {
    /// Derives (b, a, c, d) from their defining identities:
    /// b = 1 + sqrt(ln((|Y|+4)/delta)); a = sqrt(2) b;
    /// c = 2 vol/e + b sqrt(|Y|) ln(vol / p_y_min);
    /// d = eta^(-1/4) sqrt(8 (|Y|+4) / delta).
    pub fn new(delta: f64, y_card: usize, vol_u: f64, p_y_min: f64, eta: f64) -> Result<Self> {
        let b_delta = b_delta(delta, y_card)?;
        if !(vol_u > 0.0 && vol_u.is_finite()) {
            return Err(Error::config("code-space volume must be positive and finite"));
        }
        if !(0.0 < p_y_min && p_y_min <= 1.0) {
            return Err(Error::config("smallest label probability must lie in (0,1]"));
        }
        if !(0.0 < eta && eta < 1.0) {
            return Err(Error::config("eta must lie in (0,1)"));
        }
        let y4 = y_card as f64 + 4.0;
        let a_delta = std::f64::consts::SQRT_2 * b_delta;
        let c_delta = 2.0 * vol_u * INV_E + b_delta * (y_card as f64).sqrt() * (vol_u / p_y_min).ln();
        if c_delta <= 0.0 {
            return Err(Error::numeric(format!(
                "constant c = {c_delta:.6} is not positive; the code-space volume {vol_u:.3e} \
                 is too small relative to the label floor {p_y_min:.3e}"
            )));
        }
        let d_delta = eta.powf(-0.25) * (8.0 * y4 / delta).sqrt();
        Ok(DeltaConstants { delta, y_card, b_delta, a_delta, c_delta, d_delta, vol_u, p_y_min, eta })
    }
}

/// The assembled right-hand side of the gap bound at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// a * sqrt(total KL) * (ln n / sqrt n) * r_hat at the chosen cell count.
    pub mi_term: f64,
    /// d * hellinger / sqrt(n).
    pub hellinger_term: f64,
    /// c / sqrt(n).
    pub constant_term: f64,
    /// 2 * epsilon_hat at the chosen cell count.
    pub quantization_term: f64,
    /// The unevaluated O(log n / n) remainder, kept symbolic.
    pub remainder_note: String,
    pub total: f64,
    pub chosen_k: usize,
    pub n: u64,
    pub delta: f64,
    pub constants: DeltaConstants,
    pub hellinger_value: f64,
}

/// Minimizes 2 eps(K) + a sqrt(KL) (ln n / sqrt n) r(K) over the supplied
/// reports, then adds the decoder-efficiency and constant terms
/// (d * hellinger + c) / sqrt(n). The remainder stays symbolic.
pub fn assemble_bound(
    mi: &MiEstimate,
    quant_reports: &[QuantizationReport],
    hellinger_value: f64,
    constants: &DeltaConstants,
    n: u64,
) -> Result<BoundReport> {
    if quant_reports.is_empty() {
        return Err(Error::config("bound assembly needs at least one quantization report"));
    }
    if n == 0 {
        return Err(Error::config("sample size must be positive"));
    }
    if !(0.0..=1.0).contains(&hellinger_value) {
        return Err(Error::config("hellinger value must lie in [0,1]"));
    }
    let nf = n as f64;
    let rate = nf.ln() / nf.sqrt();
    let mi_rate = constants.a_delta * mi.sqrt_bound * rate;

    let mut chosen: Option<(f64, &QuantizationReport)> = None;
    for rep in quant_reports {
        if !(rep.epsilon_hat.is_finite() && rep.r_hat.is_finite()) {
            return Err(Error::numeric("non-finite quantization report"));
        }
        let bracket = 2.0 * rep.epsilon_hat + mi_rate * rep.r_hat;
        let better = match &chosen {
            None => true,
            Some((best, best_rep)) => {
                bracket < *best || (bracket == *best && rep.k < best_rep.k)
            }
        };
        if better {
            chosen = Some((bracket, rep));
        }
    }
    let (_, rep) = chosen.expect("nonempty reports");

    let quantization_term = 2.0 * rep.epsilon_hat;
    let mi_term = mi_rate * rep.r_hat;
    let hellinger_term = constants.d_delta * hellinger_value / nf.sqrt();
    let constant_term = constants.c_delta / nf.sqrt();
    Ok(BoundReport {
        mi_term,
        hellinger_term,
        constant_term,
        quantization_term,
        remainder_note: "plus an O(log n / n) remainder with no explicit constant (not evaluated)"
            .to_string(),
        total: quantization_term + mi_term + hellinger_term + constant_term,
        chosen_k: rep.k,
        n,
        delta: constants.delta,
        constants: *constants,
        hellinger_value,
    })
}
