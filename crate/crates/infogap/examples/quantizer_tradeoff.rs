//! The bound optimizes over code-space partitions: coarse partitions pay
//! an approximation error epsilon-hat, fine ones inflate the effective
//! cell count r-hat that multiplies the MI rate. This example clusters a
//! loss table at several resolutions and shows where the combined
//! objective bottoms out.
//!
//!     cargo run --release --example quantizer_tradeoff

use infogap::nn::Mat;
use infogap::quantizer::{epsilon_r_hat, loss_kmeans, sweep_k};
use infogap::rng;
use rand::Rng;

fn main() -> infogap::Result<()> {
    // Loss rows drawn around three well-separated prototypes, so three
    // cells reconstruct the table almost exactly.
    let prototypes = [[0.0, 0.0], [5.0, 5.0], [10.0, 0.0]];
    let mut r = rng::stream(41);
    let mut rows = Vec::new();
    for i in 0..90 {
        let p = prototypes[i % 3];
        rows.push(vec![p[0] + r.gen_range(-0.3..0.3), p[1] + r.gen_range(-0.3..0.3)]);
    }
    let table = Mat::from_rows(rows);

    let mi_rate = 0.75; // plays the role of sqrt(KL) * ln n / sqrt(n)
    let grid = [1usize, 2, 3, 4, 6, 8, 12, 16];
    let (reports, chosen) = sweep_k(&table, &grid, mi_rate, 50, 7)?;

    println!("mi rate multiplier: {mi_rate}");
    println!("{:>4} {:>12} {:>8} {:>12}", "K", "epsilon_hat", "r_hat", "objective");
    for rep in &reports {
        let marker = if rep.k == chosen { "  <- chosen" } else { "" };
        println!(
            "{:>4} {:>12.6} {:>8.2} {:>12.6}{marker}",
            rep.k,
            rep.epsilon_hat,
            rep.r_hat,
            rep.objective.unwrap_or(f64::NAN)
        );
    }

    let part = loss_kmeans(&table, chosen, 50, &mut rng::substream(7, chosen as u64))?;
    let best = epsilon_r_hat(&part, &table);
    println!(
        "\nchosen K = {chosen}: epsilon_hat {:.6}, r_hat {:.2}",
        best.epsilon_hat, best.r_hat
    );
    println!("three planted clusters, and the sweep settles on K = {chosen}");
    Ok(())
}
