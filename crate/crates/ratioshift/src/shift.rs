//! Covariate-shift regression: source-only and ratio-corrected estimators.
//!
//! Four estimators per replication: the source estimator evaluated in the
//! source domain (SERS) and in the target domain (SERT), and two corrected
//! estimators trained with the importance-weighted squared loss, using
//! either the fitted density ratio (EDRC) or the closed-form ratio (ODRC)
//! as weights. EDRC weights are used raw, never self-normalized.
//!
//! Every estimator selects its iteration count by cross-validation on a
//! single 80/20 split of the source data, trained and validated under its
//! own weights (unit weights reduce this to plain held-out squared error).
//! Training uses the same straight-through truncation gradient as the
//! ratio estimators.

use crate::bregman::BregmanKind;
use crate::dre::{fit_ratio, DreConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{init_params, loss_and_grad_with, MlpModel, MlpSpec, TruncationGrad};
use crate::opt::{adam_step, AdamConfig, AdamState, BatchStream};
use crate::rng::RngStream;
use crate::scenarios::{
    f0_rows, gen_covariates, gen_regression, true_ratio_rows, Domain, DomainSample,
    GammaShiftSpec, RegressionSpec,
};

/// Configuration for one covariate-shift regression scenario.
#[derive(Debug, Clone)]
pub struct ShiftConfig {
    /// Noise level of the regression model.
    pub nu: f64,
    /// Labeled source-sample size; the bound and depth schedules key on it.
    pub n11: usize,
    /// Unlabeled target covariate count used for ratio estimation.
    pub n12: usize,
    /// Candidate iteration counts for cross-validation.
    pub iteration_grid: Vec<usize>,
    pub learning_rate: f64,
    pub width: usize,
    pub kappa: f64,
    pub batch_size: usize,
    /// Optimizer steps for the EDRC ratio fit; `None` uses the d=5 default.
    pub ratio_iterations: Option<usize>,
    pub seed: u64,
}

impl ShiftConfig {
    /// Experimental defaults: n12=500, grid {1000..5000}, learning rate
    /// 1e-3, width 64, kappa 0.5, batch 100.
    pub fn defaults(nu: f64, n11: usize, seed: u64) -> ShiftConfig {
        ShiftConfig {
            nu,
            n11,
            n12: 500,
            iteration_grid: vec![1000, 2000, 3000, 4000, 5000],
            learning_rate: 1e-3,
            width: 64,
            kappa: 0.5,
            batch_size: 100,
            ratio_iterations: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n12 == 0 {
            return Err(Error::InvalidArgument("n12 must be at least 1".into()));
        }
        if self.iteration_grid.is_empty() {
            return Err(Error::InvalidArgument("iteration grid must be nonempty".into()));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be nonnegative, got {}",
                self.nu
            )));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "kappa must lie in (0, 1], got {}",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Symmetric output bound `(ln n11)^(1+kappa)`.
    pub fn output_bound(&self) -> f64 {
        (self.n11 as f64).ln().powf(1.0 + self.kappa)
    }

    fn hidden_layers(&self) -> usize {
        (((self.n11 as f64).ln() / 2.0).floor() as usize).max(1)
    }
}

/// Mean squared errors of the four estimators against the true conditional
/// mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskReport {
    /// Source estimator, source domain.
    pub sers: f64,
    /// Source estimator, target domain.
    pub sert: f64,
    /// Estimated-density-ratio corrected estimator, target domain.
    pub edrc: f64,
    /// Oracle-density-ratio corrected estimator, target domain.
    pub odrc: f64,
}

/// Regression network for the scenario: symmetric truncation at
/// `(ln n11)^(1+kappa)` and `max(1, floor(ln(n11)/2))` hidden layers.
pub fn build_regression_net(cfg: &ShiftConfig, d_x: usize, d_y: usize) -> Result<MlpSpec> {
    if cfg.n11 < 3 {
        return Err(Error::InvalidArgument(format!(
            "bound schedules need n11 >= 3, got {}",
            cfg.n11
        )));
    }
    cfg.validate()?;
    let bound = cfg.output_bound();
    MlpSpec::new(
        d_x,
        vec![cfg.width; cfg.hidden_layers()],
        d_y,
        Some(-bound),
        Some(bound),
    )
}

/// Incremental weighted-least-squares trainer, so cross-validation can
/// checkpoint along the iteration grid: with a fixed seed, running to step
/// k and continuing produces the same trajectory as a fresh run of k' > k
/// steps.
struct WeightedLsTrainer<'a> {
    spec: MlpSpec,
    params: crate::nn::MlpParams,
    state: AdamState,
    adam: AdamConfig,
    x: &'a Matrix,
    y: &'a Matrix,
    weights: &'a [f64],
    stream: BatchStream,
    rng: RngStream,
    steps: usize,
}

impl<'a> WeightedLsTrainer<'a> {
    fn new(
        x: &'a Matrix,
        y: &'a Matrix,
        weights: &'a [f64],
        spec: MlpSpec,
        cfg: &ShiftConfig,
        seed: u64,
    ) -> Result<Self> {
        if y.rows() != x.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} responses for {} covariate rows",
                y.rows(),
                x.rows()
            )));
        }
        if weights.len() != x.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} rows",
                weights.len(),
                x.rows()
            )));
        }
        if let Some(w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(Error::InvalidArgument(format!("negative weight {w}")));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidArgument(
                "all-zero weights leave the objective degenerate".into(),
            ));
        }
        let mut rng = RngStream::new(seed);
        let params = init_params(&spec, &mut rng);
        let state = AdamState::new(&spec);
        let adam = AdamConfig::with_lr(cfg.learning_rate)?;
        let stream = BatchStream::new(x.rows(), cfg.batch_size.min(x.rows()));
        Ok(WeightedLsTrainer {
            spec,
            params,
            state,
            adam,
            x,
            y,
            weights,
            stream,
            rng,
            steps: 0,
        })
    }

    /// Advances training to `target` total optimizer steps.
    fn run_to(&mut self, target: usize) -> Result<()> {
        while self.steps < target {
            let idx = self.stream.next_batch(&mut self.rng).to_vec();
            let xb = self.x.gather_rows(&idx);
            let yb = self.y.gather_rows(&idx);
            let wb: Vec<f64> = idx.iter().map(|&i| self.weights[i]).collect();
            let (loss, g) = loss_and_grad_with(
                &self.spec,
                &self.params,
                &xb,
                |out| weighted_ls_grad(out, &yb, &wb),
                TruncationGrad::PassThrough,
            )
            .map_err(|e| Error::TrainingDiverged {
                step: self.steps,
                detail: e.to_string(),
            })?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    step: self.steps,
                    detail: format!("loss = {loss}"),
                });
            }
            adam_step(&mut self.params, &g, &mut self.state, &self.adam);
            if !self.params.all_finite() {
                return Err(Error::TrainingDiverged {
                    step: self.steps,
                    detail: "non-finite parameter".into(),
                });
            }
            self.steps += 1;
        }
        Ok(())
    }

    fn model(&self) -> Result<MlpModel> {
        MlpModel::new(self.spec.clone(), self.params.clone())
    }
}

/// Batch loss `(1/B) sum_i w_i ||y_i - out_i||^2` and its output gradient.
fn weighted_ls_grad(out: &Matrix, targets: &Matrix, weights: &[f64]) -> (f64, Matrix) {
    let b = out.rows() as f64;
    let mut grad = Matrix::zeros(out.rows(), out.cols());
    let mut loss = 0.0;
    for i in 0..out.rows() {
        let w = weights[i];
        for j in 0..out.cols() {
            let d = out.get(i, j) - targets.get(i, j);
            loss += w * d * d / b;
            grad.set(i, j, 2.0 * w * d / b);
        }
    }
    (loss, grad)
}

/// Trains the weighted least-squares network for a fixed iteration count.
pub fn fit_weighted_ls(
    x: &Matrix,
    y: &Matrix,
    weights: &[f64],
    iterations: usize,
    cfg: &ShiftConfig,
    seed: u64,
) -> Result<MlpModel> {
    let spec = build_regression_net(cfg, x.cols(), y.cols())?;
    let mut trainer = WeightedLsTrainer::new(x, y, weights, spec, cfg, seed)?;
    trainer.run_to(iterations)?;
    trainer.model()
}

/// Picks the grid value whose validation error is smallest (first minimum
/// on ties).
pub fn pick_best_iterations(grid: &[usize], errors: &[f64]) -> Result<usize> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("iteration grid must be nonempty".into()));
    }
    if grid.len() != errors.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} grid values but {} errors",
            grid.len(),
            errors.len()
        )));
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if errors[i] < errors[best] {
            best = i;
        }
    }
    Ok(grid[best])
}

/// Selects the iteration count by a single 80/20 split of the source data.
///
/// The 80% split is trained once through the (ascending) grid with
/// checkpoints at each value; the returned count minimizes the weighted
/// held-out squared error. Unit weights reduce that criterion to the plain
/// held-out squared error.
pub fn cross_validate_iters(
    x: &Matrix,
    y: &Matrix,
    weights: &[f64],
    cfg: &ShiftConfig,
    rng: &mut RngStream,
) -> Result<usize> {
    cfg.validate()?;
    let n = x.rows();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs at least 10 rows, got {n}"
        )));
    }
    let mut grid = cfg.iteration_grid.clone();
    grid.sort_unstable();
    grid.dedup();

    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let n_train = (n * 4) / 5;
    let (train_idx, val_idx) = order.split_at(n_train);

    let xt = x.gather_rows(train_idx);
    let yt = y.gather_rows(train_idx);
    let wt: Vec<f64> = train_idx.iter().map(|&i| weights[i]).collect();
    let xv = x.gather_rows(val_idx);
    let yv = y.gather_rows(val_idx);
    let wv: Vec<f64> = val_idx.iter().map(|&i| weights[i]).collect();

    let spec = build_regression_net(cfg, x.cols(), y.cols())?;
    let trainer_seed = rng.derive(1).seed();
    let mut trainer = WeightedLsTrainer::new(&xt, &yt, &wt, spec, cfg, trainer_seed)?;
    let mut errors = Vec::with_capacity(grid.len());
    for &steps in &grid {
        trainer.run_to(steps)?;
        let preds = trainer.model()?.forward(&xv)?;
        let (err, _) = weighted_ls_grad(&preds, &yv, &wv);
        errors.push(err);
    }
    pick_best_iterations(&grid, &errors)
}

/// Weighted least-squares estimator with cross-validated iterations.
///
/// Returns the trained model and the selected iteration count. EDRC passes
/// the fitted ratio evaluated at the source covariates as weights; ODRC
/// passes the closed-form ratio values.
pub fn fit_corrected(
    x: &Matrix,
    y: &Matrix,
    weights: &[f64],
    cfg: &ShiftConfig,
    rng: &mut RngStream,
) -> Result<(MlpModel, usize)> {
    let iters = cross_validate_iters(x, y, weights, cfg, rng)?;
    let seed = rng.derive(2).seed();
    let model = fit_weighted_ls(x, y, weights, iters, cfg, seed)?;
    Ok((model, iters))
}

/// Source-only estimator: the corrected pipeline with unit weights.
pub fn fit_source(
    x: &Matrix,
    y: &Matrix,
    cfg: &ShiftConfig,
    rng: &mut RngStream,
) -> Result<(MlpModel, usize)> {
    let ones = vec![1.0; x.rows()];
    fit_corrected(x, y, &ones, cfg, rng)
}

/// Mean squared distance between predicted and true conditional means.
pub fn regression_risk(preds: &Matrix, truth: &Matrix) -> Result<f64> {
    if preds.rows() != truth.rows() || preds.cols() != truth.cols() {
        return Err(Error::ShapeMismatch(format!(
            "preds are {}x{}, truth is {}x{}",
            preds.rows(),
            preds.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let mut acc = 0.0;
    for i in 0..preds.rows() {
        for (p, t) in preds.row(i).iter().zip(truth.row(i)) {
            let d = p - t;
            acc += d * d;
        }
    }
    Ok(acc / preds.rows() as f64)
}

/// Covariates plus their noiseless conditional means, for risk evaluation.
#[derive(Debug, Clone)]
pub struct RegressionTestSet {
    pub x: Matrix,
    pub f0: Matrix,
}

/// Fresh test set of the stated size in the chosen domain.
pub fn make_test_set(n: usize, domain: Domain, rng: &mut RngStream) -> Result<RegressionTestSet> {
    let cov = GammaShiftSpec::new(RegressionSpec::COVARIATE_DIM)?;
    let x = gen_covariates(cov, n, domain, rng)?;
    let f0 = f0_rows(&x);
    Ok(RegressionTestSet { x, f0 })
}

/// Risks of the three trained models on the two test sets.
pub fn eval_risks(
    source_model: &MlpModel,
    edrc_model: &MlpModel,
    odrc_model: &MlpModel,
    test_source: &RegressionTestSet,
    test_target: &RegressionTestSet,
) -> Result<RiskReport> {
    Ok(RiskReport {
        sers: regression_risk(&source_model.forward(&test_source.x)?, &test_source.f0)?,
        sert: regression_risk(&source_model.forward(&test_target.x)?, &test_target.f0)?,
        edrc: regression_risk(&edrc_model.forward(&test_target.x)?, &test_target.f0)?,
        odrc: regression_risk(&odrc_model.forward(&test_target.x)?, &test_target.f0)?,
    })
}

/// One full replication of the scenario: draw data, fit the ratio and the
/// three regression estimators, and evaluate risks on fresh noiseless test
/// sets of 1000 points per domain.
///
/// The EDRC ratio model must finish before the EDRC regression starts; the
/// three regressions are otherwise independent.
pub fn run_replication(cfg: &ShiftConfig, seed: u64) -> Result<RiskReport> {
    cfg.validate()?;
    let reg_spec = RegressionSpec::new(cfg.nu)?;
    let cov_spec = GammaShiftSpec::new(RegressionSpec::COVARIATE_DIM)?;
    let root = RngStream::new(seed);

    // Stage streams are derived from the replication seed so that each
    // stage's draws are independent of the others' draw counts.
    let mut data_rng = root.derive(0);
    let (x_train, y_train) = gen_regression(reg_spec, cfg.n11, Domain::Source, &mut data_rng)?;
    let mut tgt_rng = root.derive(1);
    let target_cov = gen_covariates(cov_spec, cfg.n12, Domain::Target, &mut tgt_rng)?;

    // Ratio estimation for EDRC (least-squares loss, d=5 defaults).
    let mut ratio_cfg = DreConfig::defaults(
        BregmanKind::LeastSquares,
        cfg.n11,
        RegressionSpec::COVARIATE_DIM,
        root.derive(2).seed(),
    );
    ratio_cfg.width = cfg.width;
    ratio_cfg.kappa = cfg.kappa;
    ratio_cfg.batch_size = cfg.batch_size;
    if let Some(it) = cfg.ratio_iterations {
        ratio_cfg.iterations = it;
    }
    let ratio_sample = DomainSample::new(x_train.clone(), target_cov, None)?;
    let ratio_model = fit_ratio(&ratio_sample, &ratio_cfg)?;
    let edrc_weights = ratio_model.predict_scalar(&x_train)?;
    let odrc_weights = true_ratio_rows(cov_spec, &x_train)?;

    let mut sers_rng = root.derive(3);
    let (source_model, _) = fit_source(&x_train, &y_train, cfg, &mut sers_rng)?;
    let mut edrc_rng = root.derive(4);
    let (edrc_model, _) = fit_corrected(&x_train, &y_train, &edrc_weights, cfg, &mut edrc_rng)?;
    let mut odrc_rng = root.derive(5);
    let (odrc_model, _) = fit_corrected(&x_train, &y_train, &odrc_weights, cfg, &mut odrc_rng)?;

    let mut test_rng = root.derive(6);
    let test_source = make_test_set(1000, Domain::Source, &mut test_rng)?;
    let test_target = make_test_set(1000, Domain::Target, &mut test_rng)?;
    eval_risks(&source_model, &edrc_model, &odrc_model, &test_source, &test_target)
}
