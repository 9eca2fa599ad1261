//! Synthetic covariate-shift scenarios and their closed-form oracles.
//!
//! The covariate scenario draws source coordinate `j` from Gamma(j, 2) and
//! target coordinate `j` from Gamma(j+1, 2) (rate parameterization), which
//! gives the closed-form density ratio `r0(x) = 2^d / d! * prod_j x_j`. The
//! regression scenario puts a two-component mean function on top of the
//! d=5 covariates with antithetic noise `(W, -W)`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

/// Which marginal law to draw covariates from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

/// The Gamma covariate-shift scenario in dimension `d`.
#[derive(Debug, Clone, Copy)]
pub struct GammaShiftSpec {
    pub d: usize,
}

impl GammaShiftSpec {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(GammaShiftSpec { d })
    }
}

/// The regression model over the d=5 Gamma scenario: noise level `nu`
/// scales the antithetic noise pair.
#[derive(Debug, Clone, Copy)]
pub struct RegressionSpec {
    pub nu: f64,
}

impl RegressionSpec {
    /// `nu` must be nonnegative; zero is permitted for testing.
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be nonnegative, got {nu}"
            )));
        }
        Ok(RegressionSpec { nu })
    }

    pub const COVARIATE_DIM: usize = 5;
    pub const RESPONSE_DIM: usize = 2;
}

/// Paired covariate samples from both domains, with optional source
/// responses.
#[derive(Debug, Clone)]
pub struct DomainSample {
    pub source_x: Matrix,
    pub target_x: Matrix,
    pub source_y: Option<Matrix>,
}

impl DomainSample {
    pub fn new(source_x: Matrix, target_x: Matrix, source_y: Option<Matrix>) -> Result<Self> {
        if source_x.cols() != target_x.cols() {
            return Err(Error::ShapeMismatch(format!(
                "source has {} covariate columns, target has {}",
                source_x.cols(),
                target_x.cols()
            )));
        }
        if let Some(y) = &source_y {
            if y.rows() != source_x.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "{} responses for {} source rows",
                    y.rows(),
                    source_x.rows()
                )));
            }
        }
        Ok(DomainSample {
            source_x,
            target_x,
            source_y,
        })
    }

    pub fn dim(&self) -> usize {
        self.source_x.cols()
    }
}

/// Closed-form density ratio of the Gamma scenario:
/// `2^d / d! * prod_j x_j`, defined for strictly positive coordinates.
pub fn true_ratio(spec: GammaShiftSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.d {
        return Err(Error::ShapeMismatch(format!(
            "point has {} coordinates, scenario has d={}",
            x.len(),
            spec.d
        )));
    }
    if let Some(bad) = x.iter().find(|&&v| v <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "true_ratio requires positive coordinates, got {bad}"
        )));
    }
    let mut value = 1.0;
    for (j, &xi) in x.iter().enumerate() {
        // Per-coordinate factor 2 x / (j+1); the product telescopes to
        // 2^d (d!)^{-1} prod x_j.
        value *= 2.0 * xi / (j + 1) as f64;
    }
    Ok(value)
}

/// Ratio values for every row of a covariate matrix.
pub fn true_ratio_rows(spec: GammaShiftSpec, x: &Matrix) -> Result<Vec<f64>> {
    (0..x.rows()).map(|i| true_ratio(spec, x.row(i))).collect()
}

/// Covariate matrix for one domain: column `j` is Gamma(j+1, 2) for the
/// source and Gamma(j+2, 2) for the target, `j` zero-based.
pub fn gen_covariates(
    spec: GammaShiftSpec,
    n: usize,
    domain: Domain,
    rng: &mut RngStream,
) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut m = Matrix::zeros(n, spec.d);
    for j in 0..spec.d {
        let shape = match domain {
            Domain::Source => (j + 1) as f64,
            Domain::Target => (j + 2) as f64,
        };
        let col = rng.sample_gamma(shape, 2.0, n)?;
        for (i, v) in col.into_iter().enumerate() {
            m.set(i, j, v);
        }
    }
    Ok(m)
}

/// Draws covariates for both domains.
pub fn gen_gamma_shift(
    spec: GammaShiftSpec,
    n_source: usize,
    n_target: usize,
    rng: &mut RngStream,
) -> Result<DomainSample> {
    let source_x = gen_covariates(spec, n_source, Domain::Source, rng)?;
    let target_x = gen_covariates(spec, n_target, Domain::Target, rng)?;
    DomainSample::new(source_x, target_x, None)
}

/// The two-component regression mean over R^5:
/// `(sin(pi(x1-x2)) log(1+x3^2), exp(-x2) 1(x4 > 2))`.
pub fn f0(x: &[f64]) -> [f64; 2] {
    assert_eq!(x.len(), RegressionSpec::COVARIATE_DIM, "f0 expects 5 coordinates");
    let first = (std::f64::consts::PI * (x[0] - x[1])).sin() * (1.0 + x[2] * x[2]).ln();
    let second = if x[3] > 2.0 { (-x[1]).exp() } else { 0.0 };
    [first, second]
}

/// Noiseless mean responses for every row of a covariate matrix.
pub fn f0_rows(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), RegressionSpec::RESPONSE_DIM);
    for i in 0..x.rows() {
        let [a, b] = f0(x.row(i));
        out.set(i, 0, a);
        out.set(i, 1, b);
    }
    out
}

/// One labeled draw from the regression model in the chosen domain:
/// covariates from the d=5 Gamma scenario, responses
/// `Y = f0(X) + nu * (W, -W)` with `W ~ N(0,1)` per row.
pub fn gen_regression(
    spec: RegressionSpec,
    n: usize,
    domain: Domain,
    rng: &mut RngStream,
) -> Result<(Matrix, Matrix)> {
    let cov_spec = GammaShiftSpec::new(RegressionSpec::COVARIATE_DIM)?;
    let x = gen_covariates(cov_spec, n, domain, rng)?;
    let mut y = f0_rows(&x);
    for i in 0..n {
        let w = rng.next_gaussian();
        let noise = spec.nu * w;
        y.set(i, 0, y.get(i, 0) + noise);
        y.set(i, 1, y.get(i, 1) - noise);
    }
    Ok((x, y))
}

/// Writes a sample as CSV with header `domain,x1..xd[,y1,y2]`.
///
/// Source rows come first. When source responses are present the response
/// columns are included and left empty on target rows.
pub fn write_dataset_csv(sample: &DomainSample, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);

    let d = sample.dim();
    let mut header = String::from("domain");
    for j in 1..=d {
        header.push_str(&format!(",x{j}"));
    }
    if sample.source_y.is_some() {
        header.push_str(",y1,y2");
    }
    writeln!(w, "{header}").map_err(io_err)?;

    let mut emit = |domain: &str, x: &Matrix, y: Option<&Matrix>| -> Result<()> {
        for i in 0..x.rows() {
            let mut line = String::from(domain);
            for v in x.row(i) {
                line.push_str(&format!(",{v}"));
            }
            if sample.source_y.is_some() {
                match y {
                    Some(y) => {
                        for v in y.row(i) {
                            line.push_str(&format!(",{v}"));
                        }
                    }
                    None => line.push_str(",,"),
                }
            }
            writeln!(w, "{line}").map_err(io_err)?;
        }
        Ok(())
    };
    emit("source", &sample.source_x, sample.source_y.as_ref())?;
    emit("target", &sample.target_x, None)?;
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::summary;

    #[test]
    fn true_ratio_formula_cases() {
        let d1 = GammaShiftSpec::new(1).unwrap();
        assert_eq!(true_ratio(d1, &[1.0]).unwrap(), 2.0);
        let d2 = GammaShiftSpec::new(2).unwrap();
        assert!((true_ratio(d2, &[0.5, 2.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((true_ratio(d2, &[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(true_ratio(d1, &[0.0]).is_err());
        assert!(true_ratio(d1, &[-1.0]).is_err());
        assert!(true_ratio(d2, &[1.0]).is_err());
    }

    #[test]
    fn gamma_shift_column_means() {
        let mut rng = RngStream::new(1);
        let d1 = GammaShiftSpec::new(1).unwrap();
        let n = 100_000;
        let s = gen_gamma_shift(d1, n, n, &mut rng).unwrap();
        let sm = summary(&s.source_x.column(0)).unwrap();
        let tm = summary(&s.target_x.column(0)).unwrap();
        let se_s = sm.std / (n as f64).sqrt();
        let se_t = tm.std / (n as f64).sqrt();
        assert!((sm.mean - 0.5).abs() < 3.0 * se_s, "source mean {}", sm.mean);
        assert!((tm.mean - 1.0).abs() < 3.0 * se_t, "target mean {}", tm.mean);
    }

    #[test]
    fn gamma_shift_d5_fifth_column_mean() {
        let mut rng = RngStream::new(2);
        let d5 = GammaShiftSpec::new(5).unwrap();
        let s = gen_gamma_shift(d5, 50_000, 1, &mut rng).unwrap();
        let c = summary(&s.source_x.column(4)).unwrap();
        let se = c.std / 50_000f64.sqrt();
        assert!((c.mean - 2.5).abs() < 3.0 * se, "mean {}", c.mean);
        assert!(s.source_x.data().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn ratio_has_unit_source_mean() {
        // E_p[r0] = 1; also E_p[r0^2] = E_q[r0] = d+1 by change of measure.
        let mut rng = RngStream::new(3);
        let spec = GammaShiftSpec::new(2).unwrap();
        let n = 100_000;
        let s = gen_gamma_shift(spec, n, n, &mut rng).unwrap();
        let r_src = true_ratio_rows(spec, &s.source_x).unwrap();
        let m = summary(&r_src).unwrap();
        let se = m.std / (n as f64).sqrt();
        assert!((m.mean - 1.0).abs() < 3.0 * se, "mean {}", m.mean);

        let r2_src: Vec<f64> = r_src.iter().map(|r| r * r).collect();
        let r_tgt = true_ratio_rows(spec, &s.target_x).unwrap();
        let m2 = summary(&r2_src).unwrap();
        let mt = summary(&r_tgt).unwrap();
        let d = spec.d as f64;
        assert!((m2.mean - (d + 1.0)).abs() < 3.0 * m2.std / (n as f64).sqrt());
        assert!((mt.mean - (d + 1.0)).abs() < 3.0 * mt.std / (n as f64).sqrt());
    }

    #[test]
    fn f0_hand_cases() {
        let [a, b] = f0(&[1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(a, 0.0);
        assert_eq!(b, 0.0);
        let [a, b] = f0(&[1.5, 1.0, 1.0, 3.0, 0.0]);
        assert!((a - 2.0_f64.ln()).abs() < 1e-12);
        assert!((b - (-1.0_f64).exp()).abs() < 1e-12);
        // Indicator is strict at the threshold.
        let [_, b] = f0(&[0.0, 0.0, 0.0, 2.0, 0.0]);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn regression_noise_is_antithetic_and_zero_at_nu_zero() {
        let mut rng = RngStream::new(4);
        let spec = RegressionSpec::new(0.0).unwrap();
        let (x, y) = gen_regression(spec, 200, Domain::Source, &mut rng).unwrap();
        let f = f0_rows(&x);
        for i in 0..200 {
            assert_eq!(y.get(i, 0), f.get(i, 0));
            assert_eq!(y.get(i, 1), f.get(i, 1));
        }

        let spec = RegressionSpec::new(0.7).unwrap();
        let (x, y) = gen_regression(spec, 500, Domain::Target, &mut rng).unwrap();
        let f = f0_rows(&x);
        for i in 0..500 {
            // Residual components are negatives row-wise, up to the
            // rounding of adding and re-subtracting the mean.
            let r0 = y.get(i, 0) - f.get(i, 0);
            let r1 = y.get(i, 1) - f.get(i, 1);
            assert!((r0 + r1).abs() <= 1e-12, "row {i}: {r0} vs {r1}");
            // So the per-row sum of responses carries no noise.
            assert!((y.get(i, 0) + y.get(i, 1) - f.get(i, 0) - f.get(i, 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn regression_residual_covariance() {
        let mut rng = RngStream::new(5);
        let nu = 0.3;
        let spec = RegressionSpec::new(nu).unwrap();
        let n = 100_000;
        let (x, y) = gen_regression(spec, n, Domain::Source, &mut rng).unwrap();
        let f = f0_rows(&x);
        let mut c00 = 0.0;
        let mut c01 = 0.0;
        let mut c11 = 0.0;
        for i in 0..n {
            let a = y.get(i, 0) - f.get(i, 0);
            let b = y.get(i, 1) - f.get(i, 1);
            c00 += a * a;
            c01 += a * b;
            c11 += b * b;
        }
        let n = n as f64;
        let v = nu * nu;
        assert!((c00 / n - v).abs() < 0.01 * v.max(0.01));
        assert!((c11 / n - v).abs() < 0.01 * v.max(0.01));
        assert!((c01 / n + v).abs() < 0.01 * v.max(0.01));
    }

    #[test]
    fn dataset_csv_layout() {
        let mut rng = RngStream::new(6);
        let spec = RegressionSpec::new(0.1).unwrap();
        let (x, y) = gen_regression(spec, 3, Domain::Source, &mut rng).unwrap();
        let cov = GammaShiftSpec::new(5).unwrap();
        let tx = gen_covariates(cov, 2, Domain::Target, &mut rng).unwrap();
        let sample = DomainSample::new(x, tx, Some(y)).unwrap();
        let path = std::env::temp_dir().join("ratioshift_dataset_test.csv");
        write_dataset_csv(&sample, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "domain,x1,x2,x3,x4,x5,y1,y2");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("source,"));
        assert!(lines[5].starts_with("target,"));
        assert!(lines[5].ends_with(",,"));
        std::fs::remove_file(&path).ok();
    }
}
