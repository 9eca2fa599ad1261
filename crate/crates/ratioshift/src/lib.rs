//! Density-ratio estimation with Bregman losses over truncated networks,
//! and its consequences for error control under covariate shift.
//!
//! The density ratio `r0(x) = q(x)/p(x)` between a target and a source
//! covariate law may be unbounded. This crate estimates it by minimizing an
//! empirical Bregman objective (least-squares or logistic-regression
//! generator) over relu MLPs whose outputs are truncated to a
//! sample-size-dependent interval, and then uses the machinery on two
//! downstream problems where the ratio governs how well source-trained
//! models transfer:
//!
//! * nonparametric regression under covariate shift, comparing the plain
//!   source estimator against importance-weighted corrections that use the
//!   estimated (EDRC) or exact (ODRC) ratio as loss weights;
//! * conditional sampling with a stochastic-interpolant flow model, where a
//!   learned velocity field transports Gaussian noise to the conditional law
//!   along an ODE.
//!
//! Everything is seeded and deterministic: a run's configuration and base
//! seed fully determine every output byte.
//!
//! # Modules
//!
//! * [`matrix`], [`rng`] — dense linear algebra, seeded sampling (uniform,
//!   Gaussian, Gamma), summary statistics.
//! * [`nn`], [`opt`] — truncated relu MLPs, reverse-mode gradients, Adam.
//! * [`bregman`] — generators, divergences, and the training objectives.
//! * [`scenarios`] — the Gamma covariate-shift scenario with its
//!   closed-form ratio, and the two-output regression model on top of it.
//! * [`dre`] — ratio-estimator training and oracle evaluation.
//! * [`shift`] — source-only and ratio-corrected regression with
//!   cross-validated iteration counts.
//! * [`flow`] — stochastic interpolants, velocity fitting, ODE sampling,
//!   empirical Wasserstein evaluation.
//! * [`mod@bench`] — replicated studies, aggregation, CSV output; the CLI in
//!   `src/main.rs` is a thin wrapper over it.
//!
//! # Quick start
//!
//! ```
//! use ratioshift::bregman::BregmanKind;
//! use ratioshift::dre::{eval_ratio, fit_ratio, DreConfig};
//! use ratioshift::rng::RngStream;
//! use ratioshift::scenarios::{gen_gamma_shift, GammaShiftSpec};
//!
//! let scenario = GammaShiftSpec::new(1)?;
//! let mut rng = RngStream::new(7);
//! let sample = gen_gamma_shift(scenario, 500, 500, &mut rng)?;
//! let mut cfg = DreConfig::defaults(BregmanKind::LeastSquares, 500, 1, 42);
//! cfg.iterations = 200; // desk-scale demo
//! let model = fit_ratio(&sample, &cfg)?;
//! let mse = eval_ratio(&model, scenario, 500, &mut rng)?;
//! assert!(mse.source.is_finite() && mse.target.is_finite());
//! # Ok::<(), ratioshift::Error>(())
//! ```
//!
//! The `examples/` directory has one runnable walk-through per capability;
//! `cargo run --release --example ratio_fit_basic` is the place to start.

pub mod bench;
pub mod bregman;
pub mod dre;
pub mod error;
pub mod flow;
pub mod matrix;
pub mod nn;
pub mod opt;
pub mod rng;
pub mod scenarios;
pub mod shift;

pub use error::{Error, Result};
pub use matrix::{summary, Matrix, Summary};
pub use rng::{RngStream, RNG_ALGORITHM};
