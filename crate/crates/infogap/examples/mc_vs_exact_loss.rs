//! Monte Carlo cross-entropy estimates converge on the exact value
//! computed by enumerating all 2^m binary codes. Prints the estimate, its
//! standard error, and the true error for growing sample counts.
//!
//!     cargo run --release --example mc_vs_exact_loss

use infogap::classifier::{exact_loss_binary, sample_loss, SoftmaxDecoder};
use infogap::encoders::{RbmEncoder, StochasticEncoder};
use infogap::rng;
use rand::Rng;

fn main() -> infogap::Result<()> {
    let mut r = rng::stream(3);
    let m = 8;
    let enc = RbmEncoder::new(5, m, &mut r);
    let dec = SoftmaxDecoder::new(4, m, &mut r);
    let x: Vec<f64> = (0..5).map(|_| r.gen_range(0.0..1.0)).collect();
    let y = 1;

    let exact = exact_loss_binary(&enc, &dec, &x, y)?;
    println!("exact loss by enumerating 2^{m} codes: {exact:.6}\n");
    println!("{:>8}  {:>10}  {:>10}  {:>10}", "draws", "estimate", "std error", "|error|");
    let enc = StochasticEncoder::Rbm(enc);
    for shift in 2..=14 {
        let n = 1usize << shift;
        let est = sample_loss(&enc, &dec, &x, y, n, &mut rng::substream(99, shift as u64));
        println!(
            "{:>8}  {:>10.6}  {:>10.6}  {:>10.6}",
            n,
            est.value,
            est.std_error,
            (est.value - exact).abs()
        );
    }
    Ok(())
}
