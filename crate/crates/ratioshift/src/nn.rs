//! Multi-layer perceptrons with relu activations and truncated outputs.
//!
//! The hypothesis class used throughout the crate: relu MLPs whose
//! outputs are clamped to a sample-size-dependent interval. Truncation is the
//! piecewise clamp; the equivalent relu compositions are exposed alongside it
//! for cross-checking, since a truncated network is itself expressible as a
//! slightly deeper relu network.
//!
//! Gradients are reverse-accumulated by hand over the fixed architecture:
//! affine layers, relu, and the output clamp (which backpropagates zero
//! outside the interval and identity strictly inside).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Clamp `x` to `[a, b]`.
///
/// Rejects `a >= b`.
pub fn truncate(x: f64, a: f64, b: f64) -> Result<f64> {
    if a >= b {
        return Err(Error::InvalidArgument(format!(
            "truncation bounds must satisfy a < b, got a={a}, b={b}"
        )));
    }
    Ok(clamp(x, a, b))
}

#[inline]
pub(crate) fn clamp(x: f64, a: f64, b: f64) -> f64 {
    if x < a {
        a
    } else if x > b {
        b
    } else {
        x
    }
}

/// Relu-composition form of the clamp for bounds straddling zero (`a < 0 < b`):
/// `relu(-relu(-x+b)+b) - relu(-relu(x-a)-a)`.
pub fn truncate_relu_bipolar(x: f64, a: f64, b: f64) -> f64 {
    relu(-relu(-x + b) + b) - relu(-relu(x - a) - a)
}

/// Relu-composition form of the clamp for `0 <= a < b`:
/// `relu(-relu(-x+b)+b-a) + a`.
pub fn truncate_relu_offset(x: f64, a: f64, b: f64) -> f64 {
    relu(-relu(-x + b) + b - a) + a
}

/// Architecture of an MLP: layer widths plus optional output truncation.
///
/// Depth counts hidden layers; `hidden_widths` may be empty, in which case
/// the network is a single affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    pub out_lo: Option<f64>,
    pub out_hi: Option<f64>,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_widths: Vec<usize>,
        output_dim: usize,
        out_lo: Option<f64>,
        out_hi: Option<f64>,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_widths.contains(&0) {
            return Err(Error::InvalidArgument(
                "all layer widths must be at least 1".into(),
            ));
        }
        if let (Some(lo), Some(hi)) = (out_lo, out_hi) {
            if lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "output bounds must satisfy lo < hi, got lo={lo}, hi={hi}"
                )));
            }
        }
        Ok(MlpSpec {
            input_dim,
            hidden_widths,
            output_dim,
            out_lo,
            out_hi,
        })
    }

    /// Unbounded spec.
    pub fn unbounded(input_dim: usize, hidden_widths: Vec<usize>, output_dim: usize) -> Result<Self> {
        MlpSpec::new(input_dim, hidden_widths, output_dim, None, None)
    }

    /// `(fan_out, fan_in)` per affine layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden_widths.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden_widths);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[1], w[0])).collect()
    }

    fn clamp_output(&self, raw: f64) -> f64 {
        let mut y = raw;
        if let Some(lo) = self.out_lo {
            if y < lo {
                y = lo;
            }
        }
        if let Some(hi) = self.out_hi {
            if y > hi {
                y = hi;
            }
        }
        y
    }

    /// 1 strictly inside the truncation interval, else 0.
    fn clamp_grad_mask(&self, raw: f64) -> f64 {
        if let Some(lo) = self.out_lo {
            if raw <= lo {
                return 0.0;
            }
        }
        if let Some(hi) = self.out_hi {
            if raw >= hi {
                return 0.0;
            }
        }
        1.0
    }
}

/// One affine layer: weight of shape `(fan_out, fan_in)` and bias of length
/// `fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// All weights and biases of an MLP. Also used for gradient blocks and
/// optimizer moment accumulators, which mirror these shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<LayerParams>,
}

impl MlpParams {
    /// Zero-valued parameters shaped for `spec`.
    pub fn zeros_like(spec: &MlpSpec) -> MlpParams {
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(fan_out, fan_in)| LayerParams {
                weight: Matrix::zeros(fan_out, fan_in),
                bias: vec![0.0; fan_out],
            })
            .collect();
        MlpParams { layers }
    }

    pub fn matches_spec(&self, spec: &MlpSpec) -> bool {
        let dims = spec.layer_dims();
        self.layers.len() == dims.len()
            && self
                .layers
                .iter()
                .zip(&dims)
                .all(|(l, &(fan_out, fan_in))| {
                    l.weight.rows() == fan_out
                        && l.weight.cols() == fan_in
                        && l.bias.len() == fan_out
                })
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &MlpParams) {
        assert_eq!(self.layers.len(), other.layers.len(), "layer count mismatch");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    /// True when every weight and bias is finite.
    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weight.data().iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }

    /// Frobenius norm of each layer's weight matrix, input to output.
    ///
    /// No Lipschitz constraint is enforced anywhere in this crate; these
    /// norms are what callers log to observe the effective smoothness of a
    /// trained network.
    pub fn weight_norms(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| l.weight.data().iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// Writes parameters as a plain-text snapshot, one value per line:
    /// the layer count, then `fan_out`/`fan_in` per layer, then for each
    /// layer its weight values (row-major) followed by its bias values.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        let emit = |w: &mut BufWriter<File>, v: std::fmt::Arguments| {
            writeln!(w, "{v}").map_err(|e| Error::io(path.display().to_string(), e))
        };
        emit(&mut w, format_args!("{}", self.layers.len()))?;
        for l in &self.layers {
            emit(&mut w, format_args!("{}", l.weight.rows()))?;
            emit(&mut w, format_args!("{}", l.weight.cols()))?;
        }
        for l in &self.layers {
            for v in l.weight.data() {
                emit(&mut w, format_args!("{v}"))?;
            }
            for v in &l.bias {
                emit(&mut w, format_args!("{v}"))?;
            }
        }
        w.flush().map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Reads a snapshot written by [`MlpParams::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<MlpParams> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()
                .map_err(|e| Error::io(path.display().to_string(), e))?
                .ok_or_else(|| Error::Parse {
                    path: path.display().to_string(),
                    detail: format!("unexpected end of file reading {what}"),
                })
        };
        let parse_usize = |s: String, what: &str| -> Result<usize> {
            s.trim().parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                detail: format!("bad {what}: {s:?}"),
            })
        };
        let parse_f64 = |s: String| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                detail: format!("bad value: {s:?}"),
            })
        };

        let n_layers = parse_usize(next("layer count")?, "layer count")?;
        let mut dims = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let rows = parse_usize(next("weight rows")?, "weight rows")?;
            let cols = parse_usize(next("weight cols")?, "weight cols")?;
            dims.push((rows, cols));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (rows, cols) in dims {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(parse_f64(next("weight value")?)?);
            }
            let mut bias = Vec::with_capacity(rows);
            for _ in 0..rows {
                bias.push(parse_f64(next("bias value")?)?);
            }
            layers.push(LayerParams {
                weight: Matrix::from_vec(rows, cols, data)?,
                bias,
            });
        }
        Ok(MlpParams { layers })
    }
}

/// He-scaled initialization: weights drawn `N(0, 2/fan_in)`, biases zero.
pub fn init_params(spec: &MlpSpec, rng: &mut RngStream) -> MlpParams {
    let layers = spec
        .layer_dims()
        .into_iter()
        .map(|(fan_out, fan_in)| {
            let w_scale = (2.0 / fan_in as f64).sqrt();
            let mut weight = Matrix::zeros(fan_out, fan_in);
            for v in weight.data_mut() {
                *v = rng.next_gaussian() * w_scale;
            }
            LayerParams {
                weight,
                bias: vec![0.0; fan_out],
            }
        })
        .collect();
    MlpParams { layers }
}

/// `input * weight^T + bias`, the batched affine map of one layer.
fn affine_forward(input: &Matrix, layer: &LayerParams) -> Matrix {
    let (bsz, din) = (input.rows(), input.cols());
    let dout = layer.weight.rows();
    debug_assert_eq!(layer.weight.cols(), din);
    let mut out = Matrix::zeros(bsz, dout);
    for r in 0..bsz {
        let x = input.row(r);
        for o in 0..dout {
            let wrow = layer.weight.row(o);
            let mut acc = layer.bias[o];
            for k in 0..din {
                acc += x[k] * wrow[k];
            }
            out.set(r, o, acc);
        }
    }
    out
}

/// Evaluates the network on a batch of inputs (one row per sample).
///
/// With output bounds set, every entry of the result lies inside them.
pub fn forward(spec: &MlpSpec, params: &MlpParams, x: &Matrix) -> Result<Matrix> {
    if x.cols() != spec.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, spec expects {}",
            x.cols(),
            spec.input_dim
        )));
    }
    if !params.matches_spec(spec) {
        return Err(Error::ShapeMismatch("params do not match spec".into()));
    }
    let n_layers = params.layers.len();
    let mut act = x.clone();
    for (i, layer) in params.layers.iter().enumerate() {
        let mut out = affine_forward(&act, layer);
        if i + 1 < n_layers {
            for v in out.data_mut() {
                *v = relu(*v);
            }
        } else {
            for v in out.data_mut() {
                *v = spec.clamp_output(*v);
            }
        }
        act = out;
    }
    Ok(act)
}

/// How the output clamp treats gradients on the way back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationGrad {
    /// Zero outside the bounds, identity strictly inside: the exact
    /// subgradient of the clamp.
    Masked,
    /// Identity everywhere (straight-through). Training loops use this so
    /// that a sample pinned at a bound still pushes the raw output back
    /// toward the interior instead of freezing; the loss itself always sees
    /// the clamped value.
    PassThrough,
}

/// Loss and exact reverse-mode gradients for a batch.
///
/// `loss_fn` maps the (truncated) network outputs to a scalar loss and the
/// loss gradient with respect to each output entry. Truncation
/// backpropagates zero outside the bounds and identity strictly inside;
/// the relu subgradient at zero is taken as zero.
pub fn loss_and_grad<F>(
    spec: &MlpSpec,
    params: &MlpParams,
    x: &Matrix,
    loss_fn: F,
) -> Result<(f64, MlpParams)>
where
    F: FnOnce(&Matrix) -> (f64, Matrix),
{
    loss_and_grad_with(spec, params, x, loss_fn, TruncationGrad::Masked)
}

pub(crate) fn loss_and_grad_with<F>(
    spec: &MlpSpec,
    params: &MlpParams,
    x: &Matrix,
    loss_fn: F,
    trunc_grad: TruncationGrad,
) -> Result<(f64, MlpParams)>
where
    F: FnOnce(&Matrix) -> (f64, Matrix),
{
    if x.cols() != spec.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, spec expects {}",
            x.cols(),
            spec.input_dim
        )));
    }
    if !params.matches_spec(spec) {
        return Err(Error::ShapeMismatch("params do not match spec".into()));
    }
    let n_layers = params.layers.len();
    let bsz = x.rows();

    // Forward pass, keeping each layer's input activation and the raw
    // (pre-truncation) output for the clamp mask.
    let mut acts: Vec<Matrix> = Vec::with_capacity(n_layers);
    let mut act = x.clone();
    let mut raw_out = Matrix::zeros(0, 0);
    for (i, layer) in params.layers.iter().enumerate() {
        acts.push(act);
        let mut out = affine_forward(acts.last().unwrap(), layer);
        if i + 1 < n_layers {
            for v in out.data_mut() {
                *v = relu(*v);
            }
            act = out;
        } else {
            raw_out = out.clone();
            for v in out.data_mut() {
                *v = spec.clamp_output(*v);
            }
            act = out;
        }
    }
    let outputs = act;
    let (loss, mut delta) = loss_fn(&outputs);
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss = {loss}")));
    }
    if delta.rows() != outputs.rows() || delta.cols() != outputs.cols() {
        return Err(Error::ShapeMismatch(format!(
            "loss gradient is {}x{}, outputs are {}x{}",
            delta.rows(),
            delta.cols(),
            outputs.rows(),
            outputs.cols()
        )));
    }

    // Through the output clamp.
    if trunc_grad == TruncationGrad::Masked {
        for (d, &r) in delta.data_mut().iter_mut().zip(raw_out.data()) {
            *d *= spec.clamp_grad_mask(r);
        }
    }

    let mut grads = MlpParams::zeros_like(spec);
    for i in (0..n_layers).rev() {
        let layer = &params.layers[i];
        let input = &acts[i];
        let din = input.cols();
        let dout = layer.weight.rows();
        let g = &mut grads.layers[i];

        // Accumulate weight/bias gradients.
        for r in 0..bsz {
            let xrow = input.row(r);
            let drow = delta.row(r);
            for o in 0..dout {
                let d = drow[o];
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let base = o * din;
                let gw = &mut g.weight.data_mut()[base..base + din];
                for k in 0..din {
                    gw[k] += d * xrow[k];
                }
            }
        }

        if i == 0 {
            break;
        }
        // Delta for the previous layer: through the affine map, then relu.
        let mut prev = Matrix::zeros(bsz, din);
        for r in 0..bsz {
            let drow = delta.row(r);
            let base = r * din;
            for o in 0..dout {
                let d = drow[o];
                if d == 0.0 {
                    continue;
                }
                let wrow = layer.weight.row(o);
                let prow = &mut prev.data_mut()[base..base + din];
                for k in 0..din {
                    prow[k] += d * wrow[k];
                }
            }
        }
        // relu mask: its input was positive iff its output is positive.
        for (p, &a) in prev.data_mut().iter_mut().zip(acts[i].data()) {
            if a <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }

    Ok((loss, grads))
}

/// Smallest distance of any hidden pre-activation to its relu kink, and of
/// any raw output to a truncation bound, over the whole batch.
///
/// Finite-difference gradient checks reject inputs whose margin is small:
/// a perturbation of size h can then cross a kink and corrupt the
/// difference quotient.
pub fn min_kink_margin(spec: &MlpSpec, params: &MlpParams, x: &Matrix) -> Result<f64> {
    if x.cols() != spec.input_dim || !params.matches_spec(spec) {
        return Err(Error::ShapeMismatch("input or params do not match spec".into()));
    }
    let n_layers = params.layers.len();
    let mut margin = f64::INFINITY;
    let mut act = x.clone();
    for (i, layer) in params.layers.iter().enumerate() {
        let mut out = affine_forward(&act, layer);
        if i + 1 < n_layers {
            for v in out.data_mut() {
                margin = margin.min(v.abs());
                *v = relu(*v);
            }
        } else {
            for v in out.data_mut() {
                if let Some(lo) = spec.out_lo {
                    margin = margin.min((*v - lo).abs());
                }
                if let Some(hi) = spec.out_hi {
                    margin = margin.min((*v - hi).abs());
                }
                *v = spec.clamp_output(*v);
            }
        }
        act = out;
    }
    Ok(margin)
}

/// A spec paired with trained (or initialized) parameters.
#[derive(Debug, Clone)]
pub struct MlpModel {
    pub spec: MlpSpec,
    pub params: MlpParams,
}

impl MlpModel {
    pub fn new(spec: MlpSpec, params: MlpParams) -> Result<Self> {
        if !params.matches_spec(&spec) {
            return Err(Error::ShapeMismatch("params do not match spec".into()));
        }
        Ok(MlpModel { spec, params })
    }

    /// Batched evaluation.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        forward(&self.spec, &self.params, x)
    }

    /// Evaluation of a scalar-output network, returned as a flat vector.
    pub fn predict_scalar(&self, x: &Matrix) -> Result<Vec<f64>> {
        if self.spec.output_dim != 1 {
            return Err(Error::ShapeMismatch(format!(
                "predict_scalar on a network with output_dim={}",
                self.spec.output_dim
            )));
        }
        Ok(self.forward(x)?.column(0))
    }
}
