//! The two Bregman generators and their divergences, numerically.
//!
//! Prints generator values, divergence tables, and a spot check of the
//! sandwich inequality that pins the logistic-regression divergence
//! between scaled squared differences on a positive interval.
//!
//!     cargo run --release --example bregman_divergences

use ratioshift::bregman::{bregman_div, phi, BregmanKind};
use ratioshift::rng::RngStream;

fn main() -> ratioshift::Result<()> {
    let kinds = [BregmanKind::LeastSquares, BregmanKind::LogisticRegression];

    println!("generator values phi(x):");
    println!("   x        ls          lr");
    for x in [0.0, 0.5, 1.0, 2.0, 5.0] {
        println!(
            "{x:4.1}  {:9.5}  {:9.5}",
            phi(BregmanKind::LeastSquares, x)?,
            phi(BregmanKind::LogisticRegression, x)?
        );
    }

    println!("\ndivergences D(x||y):");
    println!("   x     y        ls          lr");
    for (x, y) in [(3.0, 1.0), (1.0, 2.0), (0.5, 0.5), (4.0, 0.1)] {
        println!(
            "{x:4.1}  {y:4.1}  {:9.5}  {:9.5}",
            bregman_div(kinds[0], x, y)?,
            bregman_div(kinds[1], x, y)?
        );
    }

    // Sandwich: (x-y)^2/(2b(b+1)) <= D_lr <= (x-y)^2/(2a(a+1)) on [a,b], a>0.
    let (a, b) = (0.5, 3.0);
    let mut rng = RngStream::new(1);
    let mut worst_lo = f64::INFINITY;
    let mut worst_hi = f64::INFINITY;
    for _ in 0..100_000 {
        let x = a + rng.next_f64() * (b - a);
        let y = a + rng.next_f64() * (b - a);
        let d = bregman_div(BregmanKind::LogisticRegression, x, y)?;
        let sq = (x - y) * (x - y);
        if sq > 0.0 {
            worst_lo = worst_lo.min(d - sq / (2.0 * b * (b + 1.0)));
            worst_hi = worst_hi.min(sq / (2.0 * a * (a + 1.0)) - d);
        }
    }
    println!("\nsandwich inequality on [{a}, {b}] over 1e5 random pairs:");
    println!("  min slack, lower side: {worst_lo:.3e}");
    println!("  min slack, upper side: {worst_hi:.3e}");
    println!("  (both nonnegative = inequality holds)");
    Ok(())
}
