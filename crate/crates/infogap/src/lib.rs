//! # infogap
//!
//! Trains small stochastic encoder-decoder classifiers, estimates a
//! variational upper bound on the mutual information between inputs and
//! their learned representations, and evaluates every computable term of a
//! high-probability bound on the testing gap — the deviation between the
//! empirical cross-entropy risk on a finite testing sample and its
//! expectation under the (possibly shifted) testing distribution.
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`data`] — IDX image ingestion, seeded subsampling, and the
//!    rotation/translation perturbation that produces a shifted testing
//!    distribution.
//! 2. [`nn`] — dense layers with manual backpropagation and SGD with
//!    momentum; the substrate for every network here.
//! 3. [`encoders`] — three stochastic encoder families (Gaussian,
//!    log-normal, Bernoulli/RBM) with reparameterized sampling and
//!    closed-form per-unit KL divergences against their priors.
//! 4. [`classifier`] — the softmax decoder, Monte Carlo cross-entropy
//!    losses with an exact enumeration path for binary representations,
//!    and the gap-quantile protocol.
//! 5. [`mi`] — the variational mutual-information upper bound
//!    (sum of per-unit KLs, square-rooted).
//! 6. [`quantizer`] — loss-space partitions via coloring/centroid
//!    iteration, the robustness/coverage estimators, and the quantized
//!    distributions they induce.
//! 7. [`bound`] — concentration constants, the phi function, Hellinger
//!    distance, and the assembled testing-gap bound.
//! 8. [`harness`] — the end-to-end lambda-sweep experiment driver.
//! 9. [`oracle`] — brute-force ground truth on small discrete instances,
//!    validating the estimators and the assembled bound.
//!
//! Start with the runnable examples (`cargo run --release --example ...`);
//! each major capability has one. A thin `infogap` binary exposes the same
//! pipeline as subcommands.

pub mod bound;
pub mod classifier;
pub mod cli;
pub mod data;
pub mod encoders;
pub mod error;
pub mod harness;
pub mod mi;
pub mod nn;
pub mod oracle;
pub mod quantizer;
pub mod rng;

pub use error::{Error, Result};
