//! Variational upper bound on the mutual information between the input and
//! the code: per-unit KLs to a factorized prior, averaged over the empirical
//! input distribution, summed over units, square-rooted. Everything is in
//! nats.

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::encoders::StochasticEncoder;
use crate::error::Result;

/// The information term of the gap bound: sqrt_bound >= sqrt(I(X;U)) for the
/// empirical input law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub per_unit_kl: Vec<f64>,
    pub total_kl: f64,
    pub sqrt_bound: f64,
}

impl MiEstimate {
    pub fn from_per_unit(per_unit_kl: Vec<f64>) -> Self {
        debug_assert!(per_unit_kl.iter().all(|&k| k >= 0.0), "negative per-unit KL");
        let total_kl: f64 = per_unit_kl.iter().sum();
        MiEstimate { per_unit_kl, total_kl, sqrt_bound: total_kl.sqrt() }
    }
}

/// Dispatches to the encoder family's closed-form KLs and aggregates them.
pub fn mi_bound(enc: &StochasticEncoder, ds: &LabeledDataset) -> Result<MiEstimate> {
    Ok(MiEstimate::from_per_unit(enc.per_unit_kl(ds)?))
}
