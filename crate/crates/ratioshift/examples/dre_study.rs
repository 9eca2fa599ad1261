//! Desk-scale replication study of density-ratio estimation error versus
//! sample size, written as plot-ready CSV.
//!
//! Runs the replication protocol at reduced scale: 10 replications over a
//! short size grid instead of the full 100 over six sizes. Expect a clear
//! decrease of both MSE columns in n, with the target domain a few times
//! harder than the source.
//!
//!     cargo run --release --example dre_study

use ratioshift::bench::{run_dre, write_csv, Experiment, ExperimentConfig};

fn main() -> ratioshift::Result<()> {
    let mut cfg = ExperimentConfig::new(Experiment::Dre);
    cfg.d = 1;
    cfg.sizes = vec![200, 500, 1000, 2000];
    cfg.replications = 10;
    cfg.parallel = Some(0); // all cores
    cfg.base_seed = 11;

    let t0 = std::time::Instant::now();
    let report = run_dre(&cfg)?;
    println!(
        "{} replications done in {:.0} s; {} failures",
        report.attempted,
        t0.elapsed().as_secs_f64(),
        report.failures.len()
    );
    for r in &report.rows {
        println!(
            "n={:5}  {:10}  {:.4} ({:.4})",
            r.n, r.metric, r.mean, r.std
        );
    }
    let out = "dre_study.csv";
    write_csv(&report.rows, out)?;
    println!("wrote {out}");
    Ok(())
}
