//! Thin command-line front end over the experiment runners.
//!
//! Exit codes: 0 success, 1 config error, 2 more than 10% of replications
//! failed, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use ratioshift::bench::{
    apply_config_file, apply_key, run, write_csv, Experiment, ExperimentConfig,
};
use ratioshift::error::Error;

const USAGE: &str = "\
usage: ratioshift <dre|shift|flow> [options]
       ratioshift --experiment <dre|shift|flow> [options]

options (flag form of the config keys):
  --config FILE        flat key=value file, applied before the other flags
  --seed N             base seed (default 17)
  --reps N             replications per cell (default 20; full-scale runs use 100)
  --out PATH           results CSV (default results.csv)
  --sizes A,B,C        sample-size grid
  --d N                covariate dimension (dre)
  --nu X               noise level (shift)
  --loss ls|lr         ratio objective (dre)
  --parallel N         worker threads (0 = all cores; omitted = serial)
  --iterations N       override training iterations (dre, flow)
  --grid A,B,C         override the cross-validation grid (shift)
  --ratio-iterations N override the EDRC ratio fit iterations (shift)
  --n12 N              unlabeled target covariates (shift)
  --n-test N           evaluation sample size
  --width N / --kappa X / --batch-size N / --learning-rate X

examples:
  ratioshift dre --d 1 --sizes 200,3000 --reps 20 --parallel 0 --out dre.csv
  ratioshift shift --nu 0.1 --sizes 500,3000 --reps 20 --out shift.csv
  ratioshift flow --sizes 500,5000 --reps 5 --out flow.csv
";

fn parse_args(args: &[String]) -> Result<ExperimentConfig, Error> {
    let mut experiment: Option<Experiment> = None;
    let mut pos = 0;
    if let Some(first) = args.first() {
        if !first.starts_with("--") {
            experiment = Some(Experiment::parse(first)?);
            pos = 1;
        }
    }

    // First pass: find --experiment / --config before applying overrides.
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut config_file: Option<PathBuf> = None;
    let mut i = pos;
    while i < args.len() {
        let flag = &args[i];
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("unexpected argument {flag:?}")))?
            .replace('-', "_");
        let value = args
            .get(i + 1)
            .ok_or_else(|| Error::Config(format!("flag {flag} needs a value")))?
            .clone();
        i += 2;
        match key.as_str() {
            "experiment" => experiment = Some(Experiment::parse(&value)?),
            "config" => config_file = Some(PathBuf::from(value)),
            _ => pairs.push((key, value)),
        }
    }

    let experiment = experiment
        .ok_or_else(|| Error::Config("no experiment given; expected dre, shift or flow".into()))?;
    let mut cfg = ExperimentConfig::new(experiment);
    if let Some(path) = config_file {
        apply_config_file(&mut cfg, path)?;
        cfg.experiment = experiment;
    }
    for (key, value) in &pairs {
        apply_key(&mut cfg, key, value)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args.iter().any(|a| a == "-h" || a == "--help") {
        print!("{USAGE}");
        return ExitCode::from(if args.is_empty() { 1 } else { 0 });
    }

    let cfg = match parse_args(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(match e {
                Error::Io { .. } => 3,
                _ => 1,
            });
        }
    };

    for f in &report.failures {
        eprintln!("replication failed: {f}");
    }
    for r in &report.rows {
        println!(
            "{} {} n={} {}: {:.6} ({:.6}) over {} reps",
            r.experiment, r.scenario, r.n, r.metric, r.mean, r.std, r.reps
        );
    }

    let out = cfg
        .output_path
        .clone()
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    if let Err(e) = write_csv(&report.rows, &out) {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    println!("wrote {}", out.display());

    if report.failure_fraction() > 0.10 {
        eprintln!(
            "error: {}/{} replications failed",
            report.failures.len(),
            report.attempted
        );
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
