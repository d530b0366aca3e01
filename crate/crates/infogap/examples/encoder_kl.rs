//! Per-unit KL divergences of the three untrained encoder families on a
//! slice of MNIST: the quantities whose sum upper-bounds the mutual
//! information between inputs and codes.
//!
//!     cargo run --release --example encoder_kl

use std::path::PathBuf;

use infogap::data::{load_idx, subsample};
use infogap::encoders::{GaussianEncoder, LogNormalEncoder, RbmEncoder, StochasticEncoder};
use infogap::mi::mi_bound;
use infogap::rng;

fn main() -> infogap::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    let full = load_idx(dir.join("train-images-idx3-ubyte.gz"), dir.join("train-labels-idx1-ubyte.gz"))?;
    let (ds, _) = subsample(&full, 500, 7)?;
    let d = ds.dim();
    let m = 6;

    let mut r = rng::stream(11);
    let encoders = [
        StochasticEncoder::Gaussian(GaussianEncoder::new(d, 32, m, &mut r)),
        StochasticEncoder::Lognormal(LogNormalEncoder::new(d, 32, m, &mut r)),
        StochasticEncoder::Rbm(RbmEncoder::new(d, m, &mut r)),
    ];
    println!("{} samples, {} code units, untrained encoders\n", ds.len(), m);
    for enc in &encoders {
        let est = mi_bound(enc, &ds)?;
        let units: Vec<String> = est.per_unit_kl.iter().map(|k| format!("{k:.4}")).collect();
        println!("{:<10} per-unit KL [{}]", enc.family().to_string(), units.join(", "));
        println!(
            "{:<10} total {:.4} nats, MI bound sqrt {:.4}\n",
            "", est.total_kl, est.sqrt_bound
        );
    }
    Ok(())
}
