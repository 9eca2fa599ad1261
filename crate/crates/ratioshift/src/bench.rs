//! Experiment orchestration: replicated runs, aggregation, CSV output.
//!
//! Three studies are runnable: `dre` (density-ratio estimation error vs
//! sample size), `shift` (the four covariate-shift regression risks), and
//! `flow` (oracle- and learned-velocity transport error on the Gaussian
//! toy). Each cell `(scenario, n)` is replicated with independent data and
//! training seeds; per-replication seeds are derived as
//! `base_seed XOR hash(experiment, scenario, n, replication)`, so any cell
//! is reproducible in isolation and results do not depend on execution
//! order or the worker count.
//!
//! A failed replication is recorded and excluded; the run continues. The
//! CLI maps a failure fraction above 10% to a nonzero exit status.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bregman::BregmanKind;
use crate::dre::{eval_ratio, fit_ratio, DreConfig};
use crate::error::{Error, Result};
use crate::flow::{
    fit_velocity, gaussian_velocity_oracle, sample_ode, sample_ode_with, w2_empirical_1d,
    FlowTrainConfig, Interpolant, OdeConfig,
};
use crate::matrix::Matrix;
use crate::rng::RngStream;
use crate::scenarios::{gen_gamma_shift, GammaShiftSpec};
use crate::shift::{run_replication, ShiftConfig};

/// Which study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Dre,
    Shift,
    Flow,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::Dre => "dre",
            Experiment::Shift => "shift",
            Experiment::Flow => "flow",
        }
    }

    pub fn parse(s: &str) -> Result<Experiment> {
        match s {
            "dre" => Ok(Experiment::Dre),
            "shift" => Ok(Experiment::Shift),
            "flow" => Ok(Experiment::Flow),
            other => Err(Error::Config(format!(
                "unknown experiment {other:?}; expected dre, shift or flow"
            ))),
        }
    }
}

/// Full description of one run. Module defaults are overridable through
/// the optional fields; `None` keeps each module's own default.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Covariate dimension for the dre study.
    pub d: usize,
    /// Noise level for the shift study.
    pub nu: f64,
    /// Sample sizes: n per domain (dre), n11 (shift), training size (flow).
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub output_path: Option<PathBuf>,
    /// Bregman objective for the dre study.
    pub loss: BregmanKind,
    /// `None` runs serially; `Some(0)` uses all cores; `Some(k)` uses k.
    pub parallel: Option<usize>,
    pub iterations: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub width: Option<usize>,
    pub kappa: Option<f64>,
    pub n12: Option<usize>,
    pub iteration_grid: Option<Vec<usize>>,
    pub ratio_iterations: Option<usize>,
    pub n_test: Option<usize>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: 20 replications and the study's own size grid.
    /// Full-scale runs use 100 replications (`--reps 100`).
    pub fn new(experiment: Experiment) -> ExperimentConfig {
        let sizes = match experiment {
            Experiment::Dre => vec![200, 500, 1000, 1500, 2000, 3000],
            Experiment::Shift => vec![500, 1000, 1500, 2000, 2500, 3000],
            Experiment::Flow => vec![500, 2000, 5000],
        };
        ExperimentConfig {
            experiment,
            d: 1,
            nu: 0.1,
            sizes,
            replications: 20,
            base_seed: 17,
            output_path: None,
            loss: BregmanKind::LeastSquares,
            parallel: None,
            iterations: None,
            batch_size: None,
            learning_rate: None,
            width: None,
            kappa: None,
            n12: None,
            iteration_grid: None,
            ratio_iterations: None,
            n_test: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::Config("sizes must be positive and nonempty".into()));
        }
        Ok(())
    }

    fn scenario(&self) -> String {
        match self.experiment {
            Experiment::Dre => format!("d={};loss={}", self.d, self.loss.label()),
            Experiment::Shift => format!("nu={}", self.nu),
            Experiment::Flow => "gauss-linear".to_string(),
        }
    }
}

/// One aggregated cell metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub scenario: String,
    pub n: usize,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub reps: usize,
}

/// Aggregated rows plus a log of failed replications.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<String>,
    pub attempted: usize,
}

impl RunReport {
    pub fn failure_fraction(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.failures.len() as f64 / self.attempted as f64
        }
    }
}

/// FNV-1a over the cell coordinates, mixed with the base seed.
fn task_seed(base: u64, experiment: &str, scenario: &str, n: usize, rep: usize) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut absorb = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    absorb(experiment.as_bytes());
    absorb(b"/");
    absorb(scenario.as_bytes());
    absorb(b"/");
    absorb(&n.to_le_bytes());
    absorb(&rep.to_le_bytes());
    base ^ h
}

/// Runs `f` over the seeds, serially or on a dedicated pool. Results come
/// back in task order either way.
fn run_tasks<T, F>(seeds: &[u64], parallel: Option<usize>, f: F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    match parallel {
        None => Ok(seeds.iter().map(|&s| f(s)).collect()),
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            Ok(pool.install(|| seeds.par_iter().map(|&s| f(s)).collect()))
        }
    }
}

struct CellOutcome<T> {
    n: usize,
    values: Vec<T>,
}

/// Shared driver: replicate a per-seed task over every size, collecting
/// successes per cell and failure records.
fn replicate_cells<T, F>(
    cfg: &ExperimentConfig,
    task: F,
) -> Result<(Vec<CellOutcome<T>>, Vec<String>, usize)>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let scenario = cfg.scenario();
    let mut cells = Vec::with_capacity(cfg.sizes.len());
    let mut failures = Vec::new();
    let mut attempted = 0;
    for &n in &cfg.sizes {
        let seeds: Vec<u64> = (0..cfg.replications)
            .map(|rep| task_seed(cfg.base_seed, cfg.experiment.label(), &scenario, n, rep))
            .collect();
        attempted += seeds.len();
        let results = run_tasks(&seeds, cfg.parallel, |seed| task(n, seed))?;
        let mut values = Vec::with_capacity(results.len());
        for (rep, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => values.push(v),
                Err(e) => failures.push(format!(
                    "{} {scenario} n={n} rep={rep}: {e}",
                    cfg.experiment.label()
                )),
            }
        }
        cells.push(CellOutcome { n, values });
    }
    Ok((cells, failures, attempted))
}

/// Mean and n-1 standard deviation of the replication values; a single
/// replication reports std 0 by convention (flagged on stderr).
fn push_metric(
    rows: &mut Vec<SummaryRow>,
    cfg: &ExperimentConfig,
    n: usize,
    metric: &str,
    values: &[f64],
) {
    if values.is_empty() {
        return;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let std = if values.len() < 2 {
        eprintln!(
            "warning: {} {} n={n} {metric}: single replication, reporting std 0",
            cfg.experiment.label(),
            cfg.scenario()
        );
        0.0
    } else {
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (ss / (values.len() as f64 - 1.0)).sqrt()
    };
    rows.push(SummaryRow {
        experiment: cfg.experiment.label().to_string(),
        scenario: cfg.scenario(),
        n,
        metric: metric.to_string(),
        mean,
        std,
        reps: values.len(),
    });
}

/// Density-ratio study: per size, train on fresh paired samples and record
/// source/target mean squared error against the closed-form ratio.
pub fn run_dre(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let spec = GammaShiftSpec::new(cfg.d)?;
    let n_test = cfg.n_test.unwrap_or(1000);

    let task = |n: usize, seed: u64| -> Result<(f64, f64)> {
        let root = RngStream::new(seed);
        let mut data_rng = root.derive(0);
        let sample = gen_gamma_shift(spec, n, n, &mut data_rng)?;
        let mut dre_cfg = DreConfig::defaults(cfg.loss, n, cfg.d, root.derive(1).seed());
        if let Some(v) = cfg.iterations {
            dre_cfg.iterations = v;
        }
        if let Some(v) = cfg.batch_size {
            dre_cfg.batch_size = v;
        }
        if let Some(v) = cfg.learning_rate {
            dre_cfg.learning_rate = v;
        }
        if let Some(v) = cfg.width {
            dre_cfg.width = v;
        }
        if let Some(v) = cfg.kappa {
            dre_cfg.kappa = v;
        }
        let model = fit_ratio(&sample, &dre_cfg)?;
        let mut eval_rng = root.derive(2);
        let mse = eval_ratio(&model, spec, n_test, &mut eval_rng)?;
        Ok((mse.source, mse.target))
    };

    let (cells, failures, attempted) = replicate_cells(cfg, task)?;
    let mut rows = Vec::new();
    for cell in &cells {
        let source: Vec<f64> = cell.values.iter().map(|v| v.0).collect();
        let target: Vec<f64> = cell.values.iter().map(|v| v.1).collect();
        push_metric(&mut rows, cfg, cell.n, "source_mse", &source);
        push_metric(&mut rows, cfg, cell.n, "target_mse", &target);
    }
    Ok(RunReport {
        rows,
        failures,
        attempted,
    })
}

/// Covariate-shift study: per labeled size, record the four risks.
pub fn run_shift(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let task = |n11: usize, seed: u64| -> Result<crate::shift::RiskReport> {
        let mut scfg = ShiftConfig::defaults(cfg.nu, n11, seed);
        if let Some(v) = cfg.n12 {
            scfg.n12 = v;
        }
        if let Some(grid) = &cfg.iteration_grid {
            scfg.iteration_grid = grid.clone();
        }
        if let Some(v) = cfg.learning_rate {
            scfg.learning_rate = v;
        }
        if let Some(v) = cfg.width {
            scfg.width = v;
        }
        if let Some(v) = cfg.kappa {
            scfg.kappa = v;
        }
        if let Some(v) = cfg.batch_size {
            scfg.batch_size = v;
        }
        if cfg.ratio_iterations.is_some() {
            scfg.ratio_iterations = cfg.ratio_iterations;
        }
        run_replication(&scfg, seed)
    };

    let (cells, failures, attempted) = replicate_cells(cfg, task)?;
    let mut rows = Vec::new();
    for cell in &cells {
        for (metric, get) in [
            ("sers", (|r: &crate::shift::RiskReport| r.sers) as fn(&_) -> f64),
            ("sert", |r| r.sert),
            ("edrc", |r| r.edrc),
            ("odrc", |r| r.odrc),
        ] {
            let values: Vec<f64> = cell.values.iter().map(get).collect();
            push_metric(&mut rows, cfg, cell.n, metric, &values);
        }
    }
    Ok(RunReport {
        rows,
        failures,
        attempted,
    })
}

/// Conditioning grid and noise scale of the flow toy: `Y | X=x` is
/// `N(x, 0.25)` with `x` drawn uniformly from `[-1, 1]`.
pub const FLOW_X_GRID: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
pub const FLOW_SIGMA: f64 = 0.5;

/// Average over the conditioning grid of the empirical W2 between sampler
/// output and fresh true conditional draws.
fn flow_grid_w2<S>(mut sampler: S, n_eval: usize, rng: &mut RngStream) -> Result<f64>
where
    S: FnMut(f64, &mut RngStream) -> Result<Matrix>,
{
    let mut acc = 0.0;
    for &x in FLOW_X_GRID.iter() {
        let generated = sampler(x, rng)?;
        let truth: Vec<f64> = (0..n_eval)
            .map(|_| x + FLOW_SIGMA * rng.next_gaussian())
            .collect();
        acc += w2_empirical_1d(&generated.column(0), &truth)?;
    }
    Ok(acc / FLOW_X_GRID.len() as f64)
}

/// Flow study: per training size, record transport error for the exact
/// Gaussian velocity (integrator error only) and for the learned velocity.
pub fn run_flow(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let n_eval = cfg.n_test.unwrap_or(2000);
    let ode = OdeConfig::default();

    let task = |n: usize, seed: u64| -> Result<(f64, f64)> {
        let root = RngStream::new(seed);
        let mut data_rng = root.derive(0);
        let x_raw: Vec<f64> = (0..n).map(|_| data_rng.next_f64() * 2.0 - 1.0).collect();
        let y_raw: Vec<f64> = x_raw
            .iter()
            .map(|&x| x + FLOW_SIGMA * data_rng.next_gaussian())
            .collect();
        let x = Matrix::column_vec(x_raw)?;
        let y = Matrix::column_vec(y_raw)?;

        let mut fcfg = FlowTrainConfig::defaults(n, root.derive(1).seed());
        if let Some(v) = cfg.iterations {
            fcfg.iterations = v;
        }
        if let Some(v) = cfg.batch_size {
            fcfg.batch_size = v;
        }
        if let Some(v) = cfg.learning_rate {
            fcfg.learning_rate = v;
        }
        if let Some(v) = cfg.width {
            fcfg.width = v;
        }
        let mut train_rng = root.derive(2);
        let model = fit_velocity(&x, &y, Interpolant::Linear, &fcfg, &mut train_rng)?;

        let mut eval_rng = root.derive(3);
        let learned = flow_grid_w2(
            |xc, rng| sample_ode(&model, &[xc], n_eval, &ode, rng),
            n_eval,
            &mut eval_rng,
        )?;
        let mut oracle_rng = root.derive(4);
        let oracle = flow_grid_w2(
            |xc, rng| {
                sample_ode_with(
                    |z, tau| {
                        let mut v = Matrix::zeros(z.rows(), 1);
                        for i in 0..z.rows() {
                            v.set(
                                i,
                                0,
                                gaussian_velocity_oracle(
                                    xc,
                                    FLOW_SIGMA,
                                    Interpolant::Linear,
                                    z.get(i, 0),
                                    tau,
                                )?,
                            );
                        }
                        Ok(v)
                    },
                    1,
                    n_eval,
                    &ode,
                    rng,
                )
            },
            n_eval,
            &mut oracle_rng,
        )?;
        Ok((oracle, learned))
    };

    let (cells, failures, attempted) = replicate_cells(cfg, task)?;
    let mut rows = Vec::new();
    for cell in &cells {
        let oracle: Vec<f64> = cell.values.iter().map(|v| v.0).collect();
        let learned: Vec<f64> = cell.values.iter().map(|v| v.1).collect();
        push_metric(&mut rows, cfg, cell.n, "w2_oracle", &oracle);
        push_metric(&mut rows, cfg, cell.n, "w2_learned", &learned);
    }
    Ok(RunReport {
        rows,
        failures,
        attempted,
    })
}

/// Dispatches to the configured study.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    match cfg.experiment {
        Experiment::Dre => run_dre(cfg),
        Experiment::Shift => run_shift(cfg),
        Experiment::Flow => run_flow(cfg),
    }
}

/// Six significant digits, plain decimal.
fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes rows as CSV: header `experiment,scenario,n,metric,mean,std,reps`,
/// sorted by `(scenario, n, metric)`, UTF-8 with LF newlines, values at six
/// significant digits.
pub fn write_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);

    let mut sorted: Vec<&SummaryRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.scenario, a.n, &a.metric).cmp(&(&b.scenario, b.n, &b.metric))
    });

    writeln!(w, "experiment,scenario,n,metric,mean,std,reps").map_err(io_err)?;
    for r in sorted {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.experiment,
            r.scenario,
            r.n,
            r.metric,
            fmt_sig6(r.mean),
            fmt_sig6(r.std),
            r.reps
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads back a results file written by [`write_csv`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "experiment,scenario,n,metric,mean,std,reps" {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    detail: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                detail: format!("line {}: expected 7 fields, got {}", i + 1, parts.len()),
            });
        }
        let field_err = |what: &str| Error::Parse {
            path: path.display().to_string(),
            detail: format!("line {}: bad {what}", i + 1),
        };
        rows.push(SummaryRow {
            experiment: parts[0].to_string(),
            scenario: parts[1].to_string(),
            n: parts[2].parse().map_err(|_| field_err("n"))?,
            metric: parts[3].to_string(),
            mean: parts[4].parse().map_err(|_| field_err("mean"))?,
            std: parts[5].parse().map_err(|_| field_err("std"))?,
            reps: parts[6].parse().map_err(|_| field_err("reps"))?,
        });
    }
    Ok(rows)
}

/// Parses a flat `key=value` config file (`#` starts a comment) and applies
/// it to the config.
pub fn apply_config_file(cfg: &mut ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!(
            "{}:{}: expected key=value, got {raw:?}",
            path.display(),
            i + 1
        )))?;
        apply_key(cfg, key.trim(), value.trim())?;
    }
    Ok(())
}

/// Applies one `key=value` setting; shared by the config file and CLI flags.
pub fn apply_key(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("bad value for {what}: {value:?}"));
    match key {
        "experiment" => cfg.experiment = Experiment::parse(value)?,
        "d" => cfg.d = value.parse().map_err(|_| bad("d"))?,
        "nu" => cfg.nu = value.parse().map_err(|_| bad("nu"))?,
        "sizes" => {
            cfg.sizes = value
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| bad("sizes")))
                .collect::<Result<Vec<usize>>>()?;
        }
        "reps" => cfg.replications = value.parse().map_err(|_| bad("reps"))?,
        "seed" => cfg.base_seed = value.parse().map_err(|_| bad("seed"))?,
        "out" => cfg.output_path = Some(PathBuf::from(value)),
        "loss" => {
            cfg.loss = match value {
                "ls" => BregmanKind::LeastSquares,
                "lr" => BregmanKind::LogisticRegression,
                _ => return Err(bad("loss (expected ls or lr)")),
            };
        }
        "parallel" => cfg.parallel = Some(value.parse().map_err(|_| bad("parallel"))?),
        "iterations" => cfg.iterations = Some(value.parse().map_err(|_| bad("iterations"))?),
        "batch_size" => cfg.batch_size = Some(value.parse().map_err(|_| bad("batch_size"))?),
        "learning_rate" => {
            cfg.learning_rate = Some(value.parse().map_err(|_| bad("learning_rate"))?)
        }
        "width" => cfg.width = Some(value.parse().map_err(|_| bad("width"))?),
        "kappa" => cfg.kappa = Some(value.parse().map_err(|_| bad("kappa"))?),
        "n12" => cfg.n12 = Some(value.parse().map_err(|_| bad("n12"))?),
        "grid" => {
            cfg.iteration_grid = Some(
                value
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| bad("grid")))
                    .collect::<Result<Vec<usize>>>()?,
            );
        }
        "ratio_iterations" => {
            cfg.ratio_iterations = Some(value.parse().map_err(|_| bad("ratio_iterations"))?)
        }
        "n_test" => cfg.n_test = Some(value.parse().map_err(|_| bad("n_test"))?),
        other => return Err(Error::Config(format!("unknown config key {other:?}"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dre_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(Experiment::Dre);
        cfg.sizes = vec![150, 300];
        cfg.replications = 3;
        cfg.iterations = Some(150);
        cfg.n_test = Some(400);
        cfg
    }

    #[test]
    fn task_seeds_differ_across_cells_and_reps() {
        let a = task_seed(1, "dre", "d=1", 200, 0);
        let b = task_seed(1, "dre", "d=1", 200, 1);
        let c = task_seed(1, "dre", "d=1", 300, 0);
        let d = task_seed(1, "dre", "d=2", 200, 0);
        assert!(a != b && a != c && a != d && b != c);
        assert_eq!(a, task_seed(1, "dre", "d=1", 200, 0));
    }

    #[test]
    fn dre_run_is_deterministic_and_parallel_invariant() {
        let cfg = tiny_dre_cfg();
        let r1 = run_dre(&cfg).unwrap();
        let r2 = run_dre(&cfg).unwrap();
        assert_eq!(r1.rows, r2.rows);

        let mut par = tiny_dre_cfg();
        par.parallel = Some(2);
        let r3 = run_dre(&par).unwrap();
        assert_eq!(r1.rows, r3.rows);
        assert!(r1.failures.is_empty());
        assert_eq!(r1.attempted, 6);
    }

    #[test]
    fn csv_bytes_are_stable() {
        let cfg = tiny_dre_cfg();
        let rows = run_dre(&cfg).unwrap().rows;
        let dir = std::env::temp_dir();
        let p1 = dir.join("ratioshift_bench_a.csv");
        let p2 = dir.join("ratioshift_bench_b.csv");
        write_csv(&rows, &p1).unwrap();
        write_csv(&rows, &p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        assert!(std::str::from_utf8(&b1).unwrap().starts_with("experiment,"));
        std::fs::remove_file(&p1).ok();
        std::fs::remove_file(&p2).ok();
    }

    #[test]
    fn csv_round_trip_on_representable_values() {
        let rows = vec![
            SummaryRow {
                experiment: "dre".into(),
                scenario: "d=1;loss=ls".into(),
                n: 200,
                metric: "source_mse".into(),
                mean: 0.125,
                std: 0.5,
                reps: 20,
            },
            SummaryRow {
                experiment: "dre".into(),
                scenario: "d=1;loss=ls".into(),
                n: 200,
                metric: "target_mse".into(),
                mean: 0.0,
                std: 2.0,
                reps: 20,
            },
        ];
        let path = std::env::temp_dir().join("ratioshift_bench_rt.csv");
        write_csv(&rows, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, rows);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn empty_rows_give_header_only_file() {
        let path = std::env::temp_dir().join("ratioshift_bench_empty.csv");
        write_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "experiment,scenario,n,metric,mean,std,reps\n");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_sorted_by_scenario_size_metric() {
        let mk = |n: usize, metric: &str| SummaryRow {
            experiment: "dre".into(),
            scenario: "d=1;loss=ls".into(),
            n,
            metric: metric.into(),
            mean: 1.0,
            std: 0.0,
            reps: 2,
        };
        // Deliberately unsorted input.
        let rows = vec![mk(300, "target_mse"), mk(150, "target_mse"), mk(300, "source_mse"), mk(150, "source_mse")];
        let path = std::env::temp_dir().join("ratioshift_bench_sorted.csv");
        write_csv(&rows, &path).unwrap();
        let back = read_csv(&path).unwrap();
        let keys: Vec<(usize, String)> = back.iter().map(|r| (r.n, r.metric.clone())).collect();
        assert_eq!(
            keys,
            vec![
                (150, "source_mse".to_string()),
                (150, "target_mse".to_string()),
                (300, "source_mse".to_string()),
                (300, "target_mse".to_string()),
            ]
        );
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn fmt_sig6_examples() {
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(0.125), "0.125000");
        assert_eq!(fmt_sig6(64.1301), "64.1301");
        assert_eq!(fmt_sig6(0.0523419), "0.0523419");
        assert_eq!(fmt_sig6(-1.5), "-1.50000");
    }

    #[test]
    fn aggregation_is_insensitive_to_replication_order() {
        let cfg = tiny_dre_cfg();
        let values = [0.31, 0.07, 0.52, 1.4, 0.002];
        let mut rows_a = Vec::new();
        push_metric(&mut rows_a, &cfg, 100, "m", &values);
        let mut reversed = values;
        reversed.reverse();
        let mut rows_b = Vec::new();
        push_metric(&mut rows_b, &cfg, 100, "m", &reversed);
        assert!((rows_a[0].mean - rows_b[0].mean).abs() < 1e-15);
        assert!((rows_a[0].std - rows_b[0].std).abs() < 1e-15);
    }

    #[test]
    fn failing_cell_is_isolated_from_healthy_cells() {
        // n=2 is below the schedule's minimum and every replication of
        // that cell errors; the n=150 cell must aggregate untouched.
        let mut cfg = tiny_dre_cfg();
        cfg.sizes = vec![2, 150];
        cfg.replications = 2;
        let report = run_dre(&cfg).unwrap();
        assert_eq!(report.failures.len(), 2);
        assert!(report.failures.iter().all(|f| f.contains("n=2")));
        assert!(report.failure_fraction() > 0.10);
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.n == 150 && r.mean.is_finite()));
    }

    #[test]
    fn single_replication_reports_zero_std() {
        let mut cfg = tiny_dre_cfg();
        cfg.replications = 1;
        cfg.sizes = vec![150];
        let report = run_dre(&cfg).unwrap();
        assert!(report.rows.iter().all(|r| r.std == 0.0 && r.reps == 1));
    }

    #[test]
    fn config_keys_apply_and_reject() {
        let mut cfg = ExperimentConfig::new(Experiment::Dre);
        apply_key(&mut cfg, "loss", "lr").unwrap();
        assert_eq!(cfg.loss, BregmanKind::LogisticRegression);
        apply_key(&mut cfg, "sizes", "100, 200").unwrap();
        assert_eq!(cfg.sizes, vec![100, 200]);
        apply_key(&mut cfg, "grid", "10,20").unwrap();
        assert_eq!(cfg.iteration_grid, Some(vec![10, 20]));
        assert!(apply_key(&mut cfg, "loss", "huber").is_err());
        assert!(apply_key(&mut cfg, "bogus", "1").is_err());
        assert!(apply_key(&mut cfg, "reps", "x").is_err());
    }

    #[test]
    fn config_file_parsing() {
        let path = std::env::temp_dir().join("ratioshift_bench_cfg.txt");
        std::fs::write(
            &path,
            "# comment\nexperiment=dre\nsizes=100,200\nreps=2 # trailing\n\nnu=0.2\n",
        )
        .unwrap();
        let mut cfg = ExperimentConfig::new(Experiment::Shift);
        apply_config_file(&mut cfg, &path).unwrap();
        assert_eq!(cfg.experiment, Experiment::Dre);
        assert_eq!(cfg.sizes, vec![100, 200]);
        assert_eq!(cfg.replications, 2);
        assert_eq!(cfg.nu, 0.2);
        std::fs::remove_file(&path).ok();

        let path2 = std::env::temp_dir().join("ratioshift_bench_cfg_bad.txt");
        std::fs::write(&path2, "no_equals_here\n").unwrap();
        let mut cfg = ExperimentConfig::new(Experiment::Dre);
        assert!(apply_config_file(&mut cfg, &path2).is_err());
        std::fs::remove_file(&path2).ok();
    }

    #[test]
    fn flow_run_oracle_beats_untrained_scale() {
        // Tiny flow run: the oracle metric is integrator-plus-sampling
        // error only and sits far below the learned metric of a barely
        // trained model.
        let mut cfg = ExperimentConfig::new(Experiment::Flow);
        cfg.sizes = vec![300];
        cfg.replications = 2;
        cfg.iterations = Some(50);
        let report = run_flow(&cfg).unwrap();
        assert!(report.failures.is_empty());
        let oracle = report.rows.iter().find(|r| r.metric == "w2_oracle").unwrap();
        let learned = report.rows.iter().find(|r| r.metric == "w2_learned").unwrap();
        assert!(oracle.mean < 0.05, "oracle W2 {}", oracle.mean);
        assert!(learned.mean > oracle.mean);
    }
}
