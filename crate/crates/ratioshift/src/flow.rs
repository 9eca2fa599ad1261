//! Conditional flow models via stochastic interpolation.
//!
//! A path `Y_tau = a(tau) eta + b(tau) Y` bridges Gaussian noise (tau=0) to
//! data (tau=1). The velocity field — the conditional expectation of the
//! path's time derivative given the current state — is fit by least squares
//! over an MLP taking `(x, y, tau)`; integrating the learned field from a
//! standard normal start transports noise to the conditional law of `Y`
//! given `X = x`.
//!
//! The benchmark for this component is a Gaussian toy whose exact velocity
//! field is available in closed form ([`gaussian_velocity_oracle`]); the
//! oracle isolates integrator error from learning error. No Lipschitz constraint is
//! enforced on the network; [`crate::nn::MlpParams::weight_norms`] is the
//! hook for observing effective smoothness.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{init_params, loss_and_grad_with, MlpModel, MlpSpec, TruncationGrad};
use crate::opt::{adam_step, AdamConfig, AdamState};
use crate::rng::RngStream;

/// Registered interpolation schedules. Both satisfy the boundary
/// conditions `a(0)=1, a(1)=0, b(0)=0, b(1)=1` and are continuously
/// differentiable on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolant {
    /// `a = 1 - tau`, `b = tau`.
    Linear,
    /// `a = cos(pi tau / 2)`, `b = sin(pi tau / 2)`.
    Trig,
}

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

impl Interpolant {
    pub fn a(self, tau: f64) -> f64 {
        match self {
            Interpolant::Linear => 1.0 - tau,
            Interpolant::Trig => (HALF_PI * tau).cos(),
        }
    }

    pub fn a_dot(self, tau: f64) -> f64 {
        match self {
            Interpolant::Linear => -1.0,
            Interpolant::Trig => -HALF_PI * (HALF_PI * tau).sin(),
        }
    }

    pub fn b(self, tau: f64) -> f64 {
        match self {
            Interpolant::Linear => tau,
            Interpolant::Trig => (HALF_PI * tau).sin(),
        }
    }

    pub fn b_dot(self, tau: f64) -> f64 {
        match self {
            Interpolant::Linear => 1.0,
            Interpolant::Trig => HALF_PI * (HALF_PI * tau).cos(),
        }
    }

    /// Every registered schedule, for property sweeps.
    pub fn all() -> [Interpolant; 2] {
        [Interpolant::Linear, Interpolant::Trig]
    }
}

/// The interpolated point `a(tau) eta + b(tau) y`.
pub fn interpolate(eta: &[f64], y: &[f64], tau: f64, spec: Interpolant) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!(
            "interpolation time must lie in [0, 1], got {tau}"
        )));
    }
    if eta.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "eta has {} coordinates, y has {}",
            eta.len(),
            y.len()
        )));
    }
    let (a, b) = (spec.a(tau), spec.b(tau));
    Ok(eta.iter().zip(y).map(|(e, v)| a * e + b * v).collect())
}

/// The regression target for the velocity fit: `a'(tau) eta + b'(tau) y`.
pub fn velocity_target(eta: &[f64], y: &[f64], tau: f64, spec: Interpolant) -> Vec<f64> {
    let (ad, bd) = (spec.a_dot(tau), spec.b_dot(tau));
    eta.iter().zip(y).map(|(e, v)| ad * e + bd * v).collect()
}

/// Exact velocity field of the Gaussian case: when `Y|X ~ N(mu, sigma^2)`
/// (independent of the standard normal `eta`), the conditional expectation
/// defining the velocity has the closed form
/// `b' mu + (a' a + b' b sigma^2) (y - b mu) / (a^2 + b^2 sigma^2)`.
pub fn gaussian_velocity_oracle(
    mu: f64,
    sigma: f64,
    spec: Interpolant,
    y: f64,
    tau: f64,
) -> Result<f64> {
    if sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    let (a, b) = (spec.a(tau), spec.b(tau));
    let (ad, bd) = (spec.a_dot(tau), spec.b_dot(tau));
    let denom = a * a + b * b * sigma * sigma;
    if denom <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "degenerate interpolant variance at tau={tau} with sigma={sigma}"
        )));
    }
    Ok(bd * mu + (ad * a + bd * b * sigma * sigma) * (y - b * mu) / denom)
}

/// Training setup for the velocity fit.
#[derive(Debug, Clone)]
pub struct FlowTrainConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Symmetric output truncation; `None` leaves the outputs free.
    pub out_bound: Option<f64>,
    /// Redraw `(eta, tau)` each epoch. `false` fixes the first draw, which
    /// is the one-epoch empirical estimator read literally.
    pub resample_interpolation: bool,
    pub seed: u64,
}

impl FlowTrainConfig {
    /// Defaults keyed on the training-sample size: depth
    /// `max(1, floor(ln(n)/2))`, width 64, batch 100, learning rate 1e-3,
    /// output bound `(ln n)^((1+kappa)/2)` with kappa = 0.5.
    pub fn defaults(n: usize, seed: u64) -> FlowTrainConfig {
        let ln_n = (n.max(3) as f64).ln();
        FlowTrainConfig {
            hidden_layers: ((ln_n / 2.0).floor() as usize).max(1),
            width: 64,
            iterations: 5000,
            batch_size: 100,
            learning_rate: 1e-3,
            out_bound: Some(ln_n.powf(0.75)),
            resample_interpolation: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 || self.width == 0 {
            return Err(Error::InvalidArgument(
                "iterations, batch_size and width must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(b) = self.out_bound {
            if !(b > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "output bound must be positive, got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// A trained velocity network with its interpolant. Inputs are laid out as
/// the concatenation `(x, y, tau)`.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub model: MlpModel,
    pub interpolant: Interpolant,
    pub d_x: usize,
    pub d_y: usize,
}

impl FlowModel {
    /// Velocity of a batch of states at a shared conditioning point and time.
    pub fn velocity_batch(&self, x: &[f64], states: &Matrix, tau: f64) -> Result<Matrix> {
        if x.len() != self.d_x || states.cols() != self.d_y {
            return Err(Error::ShapeMismatch(format!(
                "expected x of length {} and states with {} columns, got {} and {}",
                self.d_x,
                self.d_y,
                x.len(),
                states.cols()
            )));
        }
        let n = states.rows();
        let dim = self.d_x + self.d_y + 1;
        let mut input = Matrix::zeros(n, dim);
        for i in 0..n {
            for (j, &v) in x.iter().enumerate() {
                input.set(i, j, v);
            }
            for (j, &v) in states.row(i).iter().enumerate() {
                input.set(i, self.d_x + j, v);
            }
            input.set(i, dim - 1, tau);
        }
        self.model.forward(&input)
    }
}

/// Fits the velocity field on labeled pairs by mean squared residual
/// against [`velocity_target`] at inputs `(x_i, Y_{i,tau_i}, tau_i)`.
///
/// Interpolation randomness `(eta_i, tau_i)` is drawn per epoch when
/// `resample_interpolation` is set, otherwise fixed at the first draw.
pub fn fit_velocity(
    x: &Matrix,
    y: &Matrix,
    interpolant: Interpolant,
    cfg: &FlowTrainConfig,
    rng: &mut RngStream,
) -> Result<FlowModel> {
    cfg.validate()?;
    let n = x.rows();
    if n == 0 || y.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} covariate rows vs {} response rows",
            n,
            y.rows()
        )));
    }
    let (d_x, d_y) = (x.cols(), y.cols());
    let spec = MlpSpec::new(
        d_x + d_y + 1,
        vec![cfg.width; cfg.hidden_layers],
        d_y,
        cfg.out_bound.map(|b| -b),
        cfg.out_bound,
    )?;
    let mut init_rng = RngStream::new(cfg.seed);
    let mut params = init_params(&spec, &mut init_rng);
    let mut state = AdamState::new(&spec);
    let adam = AdamConfig::with_lr(cfg.learning_rate)?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut pos = usize::MAX;
    let mut etas = Matrix::zeros(0, 0);
    let mut taus: Vec<f64> = Vec::new();
    let mut drawn = false;

    let batch = cfg.batch_size.min(n);
    for step in 0..cfg.iterations {
        if pos >= n {
            rng.shuffle(&mut order);
            pos = 0;
            if cfg.resample_interpolation || !drawn {
                etas = rng.sample_gaussian(n, d_y);
                taus = (0..n).map(|_| rng.next_f64()).collect();
                drawn = true;
            }
        }
        let end = (pos + batch).min(n);
        let idx = &order[pos..end];
        pos = end;

        let b = idx.len();
        let dim = d_x + d_y + 1;
        let mut input = Matrix::zeros(b, dim);
        let mut target = Matrix::zeros(b, d_y);
        for (row, &i) in idx.iter().enumerate() {
            let tau = taus[i];
            let point = interpolate(etas.row(i), y.row(i), tau, interpolant)?;
            for (j, &v) in x.row(i).iter().enumerate() {
                input.set(row, j, v);
            }
            for (j, &v) in point.iter().enumerate() {
                input.set(row, d_x + j, v);
            }
            input.set(row, dim - 1, tau);
            let v = velocity_target(etas.row(i), y.row(i), tau, interpolant);
            for (j, &t) in v.iter().enumerate() {
                target.set(row, j, t);
            }
        }

        let (loss, g) = loss_and_grad_with(
            &spec,
            &params,
            &input,
            |out| {
                let bn = out.rows() as f64;
                let mut grad = Matrix::zeros(out.rows(), out.cols());
                let mut loss = 0.0;
                for i in 0..out.rows() {
                    for j in 0..out.cols() {
                        let d = out.get(i, j) - target.get(i, j);
                        loss += d * d / bn;
                        grad.set(i, j, 2.0 * d / bn);
                    }
                }
                (loss, grad)
            },
            TruncationGrad::PassThrough,
        )
        .map_err(|e| Error::TrainingDiverged {
            step,
            detail: e.to_string(),
        })?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                step,
                detail: format!("loss = {loss}"),
            });
        }
        adam_step(&mut params, &g, &mut state, &adam);
        if !params.all_finite() {
            return Err(Error::TrainingDiverged {
                step,
                detail: "non-finite parameter".into(),
            });
        }
    }

    Ok(FlowModel {
        model: MlpModel::new(spec, params)?,
        interpolant,
        d_x,
        d_y,
    })
}

/// Fixed-step integrators for the sampling ODE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    Rk4,
}

/// Discretization of the sampling ODE over `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct OdeConfig {
    pub steps: usize,
    pub integrator: Integrator,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            steps: 100,
            integrator: Integrator::Rk4,
        }
    }
}

/// Integrates `dz = v(z, tau) dtau` from `z ~ N(0, I)` for an arbitrary
/// batched velocity; returns the `n x d_y` terminal states.
pub fn sample_ode_with<V>(
    velocity: V,
    d_y: usize,
    n: usize,
    ode: &OdeConfig,
    rng: &mut RngStream,
) -> Result<Matrix>
where
    V: Fn(&Matrix, f64) -> Result<Matrix>,
{
    if ode.steps == 0 {
        return Err(Error::InvalidArgument("ode needs at least 1 step".into()));
    }
    let mut z = rng.sample_gaussian(n, d_y);
    let h = 1.0 / ode.steps as f64;
    for k in 0..ode.steps {
        let tau = k as f64 * h;
        match ode.integrator {
            Integrator::Euler => {
                let v = velocity(&z, tau)?;
                axpy(&mut z, h, &v);
            }
            Integrator::Rk4 => {
                let k1 = velocity(&z, tau)?;
                let k2 = velocity(&offset(&z, 0.5 * h, &k1), tau + 0.5 * h)?;
                let k3 = velocity(&offset(&z, 0.5 * h, &k2), tau + 0.5 * h)?;
                let k4 = velocity(&offset(&z, h, &k3), tau + h)?;
                for i in 0..z.data().len() {
                    let incr = k1.data()[i] + 2.0 * k2.data()[i] + 2.0 * k3.data()[i] + k4.data()[i];
                    z.data_mut()[i] += h * incr / 6.0;
                }
            }
        }
        if let Some(bad) = z.data().iter().find(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged {
                step: k,
                detail: format!("ode state became {bad}"),
            });
        }
    }
    Ok(z)
}

fn axpy(z: &mut Matrix, h: f64, v: &Matrix) {
    for (zi, vi) in z.data_mut().iter_mut().zip(v.data()) {
        *zi += h * vi;
    }
}

fn offset(z: &Matrix, h: f64, v: &Matrix) -> Matrix {
    let mut out = z.clone();
    axpy(&mut out, h, v);
    out
}

/// Draws `n` conditional samples at `x` from a trained flow model.
pub fn sample_ode(
    model: &FlowModel,
    x: &[f64],
    n: usize,
    ode: &OdeConfig,
    rng: &mut RngStream,
) -> Result<Matrix> {
    sample_ode_with(
        |states, tau| model.velocity_batch(x, states, tau),
        model.d_y,
        n,
        ode,
        rng,
    )
}

/// Exact empirical 2-Wasserstein distance between two one-dimensional
/// samples of equal size: the root mean squared difference of sorted order
/// statistics.
pub fn w2_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "samples have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty samples".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let ss: f64 = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / sa.len() as f64;
    Ok(ss.sqrt())
}

/// Axis-sliced Wasserstein proxy for multi-dimensional samples:
/// per-coordinate empirical W2 plus their sum. Exact multivariate W2 is out
/// of scope; for product laws the slices carry the full comparison.
pub fn w2_sliced(a: &Matrix, b: &Matrix) -> Result<(Vec<f64>, f64)> {
    if a.cols() != b.cols() {
        return Err(Error::ShapeMismatch(format!(
            "samples have {} and {} columns",
            a.cols(),
            b.cols()
        )));
    }
    let mut per_axis = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        per_axis.push(w2_empirical_1d(&a.column(j), &b.column(j))?);
    }
    let total = per_axis.iter().sum();
    Ok((per_axis, total))
}

/// Writes conditional samples as CSV with header `x1..xdx,z1..zdy`; every
/// row repeats the conditioning point followed by one sample.
pub fn write_samples_csv(x: &[f64], samples: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);

    let mut header = String::new();
    for j in 1..=x.len() {
        header.push_str(&format!("x{j},"));
    }
    let cols: Vec<String> = (1..=samples.cols()).map(|j| format!("z{j}")).collect();
    header.push_str(&cols.join(","));
    writeln!(w, "{header}").map_err(io_err)?;
    for i in 0..samples.rows() {
        let mut line = String::new();
        for v in x {
            line.push_str(&format!("{v},"));
        }
        let vals: Vec<String> = samples.row(i).iter().map(|v| v.to_string()).collect();
        line.push_str(&vals.join(","));
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_identities_for_all_interpolants() {
        let eta = [0.3, -1.2];
        let y = [2.0, 0.5];
        for spec in Interpolant::all() {
            assert_eq!(interpolate(&eta, &y, 0.0, spec).unwrap(), eta.to_vec());
            let at_one = interpolate(&eta, &y, 1.0, spec).unwrap();
            for (got, want) in at_one.iter().zip(&y) {
                assert!((got - want).abs() < 1e-15);
            }
        }
        assert!(interpolate(&eta, &y, 1.5, Interpolant::Linear).is_err());
        assert!(interpolate(&eta, &y[..1], 0.5, Interpolant::Linear).is_err());
    }

    #[test]
    fn linear_midpoint() {
        let v = interpolate(&[2.0], &[4.0], 0.5, Interpolant::Linear).unwrap();
        assert_eq!(v, vec![3.0]);
    }

    #[test]
    fn velocity_target_cases() {
        // Linear: a' = -1, b' = 1, so the target is y - eta at every tau.
        for tau in [0.0, 0.3, 1.0] {
            let v = velocity_target(&[1.0, -2.0], &[0.5, 0.5], tau, Interpolant::Linear);
            assert_eq!(v, vec![-0.5, 2.5]);
        }
        // eta = y collapses to (a' + b') times the common point.
        let spec = Interpolant::Trig;
        let tau = 0.37;
        let v = velocity_target(&[1.5], &[1.5], tau, spec);
        assert!((v[0] - (spec.a_dot(tau) + spec.b_dot(tau)) * 1.5).abs() < 1e-15);
        // Trig at tau=0: a' = 0, b' = pi/2, so the target is (pi/2) y.
        let v = velocity_target(&[7.0], &[2.0], 0.0, Interpolant::Trig);
        assert!((v[0] - HALF_PI * 2.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_oracle_endpoints_and_coefficient() {
        let lin = Interpolant::Linear;
        // tau = 0: E[-eta + Y | eta = y] = mu - y.
        let v = gaussian_velocity_oracle(1.3, 0.7, lin, 0.4, 0.0).unwrap();
        assert!((v - (1.3 - 0.4)).abs() < 1e-12);
        // tau = 1: E[-eta + Y | Y = y] = y.
        let v = gaussian_velocity_oracle(1.3, 0.7, lin, 0.4, 1.0).unwrap();
        assert!((v - 0.4).abs() < 1e-12);
        // sigma = 1, mu = 0: coefficient of y is (2 tau - 1)/((1-tau)^2 + tau^2).
        for tau in [0.1, 0.5, 0.9] {
            let v = gaussian_velocity_oracle(0.0, 1.0, lin, 1.0, tau).unwrap();
            let coef = (2.0 * tau - 1.0) / ((1.0 - tau) * (1.0 - tau) + tau * tau);
            assert!((v - coef).abs() < 1e-12, "tau={tau}: {v} vs {coef}");
        }
        // Degenerate variance rejected: sigma = 0 at tau = 1.
        assert!(gaussian_velocity_oracle(0.0, 0.0, lin, 0.5, 1.0).is_err());
        assert!(gaussian_velocity_oracle(0.0, -1.0, lin, 0.5, 0.5).is_err());
    }

    #[test]
    fn gaussian_oracle_matches_conditional_regression() {
        // Monte-Carlo check at tau = 0.5: average the raw velocity targets
        // whose interpolated point lands near y.
        let (mu, sigma, tau, y0) = (0.8, 0.6, 0.5, 0.7);
        let lin = Interpolant::Linear;
        let mut rng = RngStream::new(9);
        let (mut num, mut count) = (0.0, 0usize);
        for _ in 0..400_000 {
            let eta = rng.next_gaussian();
            let yv = mu + sigma * rng.next_gaussian();
            let point = lin.a(tau) * eta + lin.b(tau) * yv;
            if (point - y0).abs() < 0.01 {
                num += -eta + yv;
                count += 1;
            }
        }
        let mc = num / count as f64;
        let oracle = gaussian_velocity_oracle(mu, sigma, lin, y0, tau).unwrap();
        assert!(count > 2000, "window too narrow: {count}");
        assert!((mc - oracle).abs() < 0.05, "mc {mc} vs oracle {oracle}");
    }

    #[test]
    fn zero_velocity_flow_returns_initial_draws() {
        let mut rng = RngStream::new(11);
        let frozen = sample_ode_with(
            |z, _| Ok(Matrix::zeros(z.rows(), z.cols())),
            2,
            50,
            &OdeConfig::default(),
            &mut rng,
        )
        .unwrap();
        let mut rng2 = RngStream::new(11);
        let draws = rng2.sample_gaussian(50, 2);
        assert_eq!(frozen.data(), draws.data());
    }

    #[test]
    fn oracle_velocity_transports_to_target_gaussian() {
        let (mu, sigma) = (2.0, 0.5);
        let lin = Interpolant::Linear;
        let mut rng = RngStream::new(12);
        let out = sample_ode_with(
            |z, tau| {
                let mut v = Matrix::zeros(z.rows(), 1);
                for i in 0..z.rows() {
                    v.set(i, 0, gaussian_velocity_oracle(mu, sigma, lin, z.get(i, 0), tau)?);
                }
                Ok(v)
            },
            1,
            2000,
            &OdeConfig::default(),
            &mut rng,
        )
        .unwrap();
        let s = crate::matrix::summary(out.data()).unwrap();
        assert!((s.mean - mu).abs() < 0.05, "mean {}", s.mean);
        assert!((s.std - sigma).abs() < 0.05, "std {}", s.std);
    }

    #[test]
    fn rk4_and_euler_agree_at_fine_steps() {
        let (mu, sigma) = (1.0, 0.8);
        let lin = Interpolant::Linear;
        let velocity = |z: &Matrix, tau: f64| {
            let mut v = Matrix::zeros(z.rows(), 1);
            for i in 0..z.rows() {
                v.set(i, 0, gaussian_velocity_oracle(mu, sigma, lin, z.get(i, 0), tau)?);
            }
            Ok(v)
        };
        let fine = OdeConfig {
            steps: 1000,
            integrator: Integrator::Rk4,
        };
        let euler = OdeConfig {
            steps: 1000,
            integrator: Integrator::Euler,
        };
        let mut r1 = RngStream::new(13);
        let mut r2 = RngStream::new(13);
        let a = sample_ode_with(velocity, 1, 2000, &fine, &mut r1).unwrap();
        let b = sample_ode_with(velocity, 1, 2000, &euler, &mut r2).unwrap();
        let ma = crate::matrix::mean(a.data());
        let mb = crate::matrix::mean(b.data());
        assert!((ma - mb).abs() < 0.01, "{ma} vs {mb}");
    }

    #[test]
    fn w2_hand_cases() {
        assert_eq!(w2_empirical_1d(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(w2_empirical_1d(&[0.0], &[2.0]).unwrap(), 2.0);
        assert_eq!(w2_empirical_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(w2_empirical_1d(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn w2_symmetry_and_triangle() {
        let mut rng = RngStream::new(14);
        for _ in 0..20 {
            let a: Vec<f64> = (0..60).map(|_| rng.next_gaussian()).collect();
            let b: Vec<f64> = (0..60).map(|_| rng.next_gaussian() * 2.0 + 1.0).collect();
            let c: Vec<f64> = (0..60).map(|_| rng.next_gaussian() - 0.5).collect();
            let ab = w2_empirical_1d(&a, &b).unwrap();
            let ba = w2_empirical_1d(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            let ac = w2_empirical_1d(&a, &c).unwrap();
            let cb = w2_empirical_1d(&c, &b).unwrap();
            assert!(ab <= ac + cb + 1e-9);
        }
    }

    mod w2_props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn w2_is_a_metric_on_samples(
                a in proptest::collection::vec(-50.0f64..50.0, 40),
                b in proptest::collection::vec(-50.0f64..50.0, 40),
                c in proptest::collection::vec(-50.0f64..50.0, 40),
            ) {
                let ab = w2_empirical_1d(&a, &b).unwrap();
                let ba = w2_empirical_1d(&b, &a).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert_eq!(w2_empirical_1d(&a, &a).unwrap(), 0.0);
                let ac = w2_empirical_1d(&a, &c).unwrap();
                let cb = w2_empirical_1d(&c, &b).unwrap();
                prop_assert!(ab <= ac + cb + 1e-9);
            }
        }
    }

    #[test]
    fn fit_velocity_is_deterministic() {
        let mut rng = RngStream::new(15);
        let x = rng.sample_gaussian(100, 1);
        let y = rng.sample_gaussian(100, 1);
        let mut cfg = FlowTrainConfig::defaults(100, 3);
        cfg.iterations = 60;
        cfg.width = 8;
        cfg.hidden_layers = 1;
        let m1 = fit_velocity(&x, &y, Interpolant::Linear, &cfg, &mut RngStream::new(4)).unwrap();
        let m2 = fit_velocity(&x, &y, Interpolant::Linear, &cfg, &mut RngStream::new(4)).unwrap();
        assert_eq!(m1.model.params, m2.model.params);
    }

    #[test]
    fn samples_csv_layout() {
        let samples = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let path = std::env::temp_dir().join("ratioshift_flow_samples_test.csv");
        write_samples_csv(&[0.5], &samples, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,z1,z2");
        assert_eq!(lines[1], "0.5,1,2");
        assert_eq!(lines.len(), 3);
        std::fs::remove_file(&path).ok();
    }
}
