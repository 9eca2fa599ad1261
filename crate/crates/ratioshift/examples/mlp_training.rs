//! The network layer on its own: gradient checking, Adam training on a toy
//! regression, and parameter snapshots.
//!
//!     cargo run --release --example mlp_training

use ratioshift::matrix::Matrix;
use ratioshift::nn::{forward, init_params, loss_and_grad, MlpParams, MlpSpec};
use ratioshift::opt::{adam_step, AdamConfig, AdamState};
use ratioshift::rng::RngStream;

fn mse_loss(out: &Matrix, targets: &Matrix) -> (f64, Matrix) {
    let n = out.rows() as f64;
    let mut grad = Matrix::zeros(out.rows(), out.cols());
    let mut loss = 0.0;
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            let d = out.get(i, j) - targets.get(i, j);
            loss += d * d / n;
            grad.set(i, j, 2.0 * d / n);
        }
    }
    (loss, grad)
}

fn main() -> ratioshift::Result<()> {
    let mut rng = RngStream::new(3);

    // Gradient check on a small truncated network.
    let spec = MlpSpec::new(2, vec![8, 8], 1, Some(-3.0), Some(3.0))?;
    let params = init_params(&spec, &mut rng);
    let x = rng.sample_gaussian(16, 2);
    let targets = rng.sample_gaussian(16, 1);
    let (_, analytic) = loss_and_grad(&spec, &params, &x, |out| mse_loss(out, &targets))?;
    let h = 1e-5;
    let mut max_rel = 0.0f64;
    for li in 0..params.layers.len() {
        for idx in 0..params.layers[li].weight.data().len() {
            let mut plus = params.clone();
            plus.layers[li].weight.data_mut()[idx] += h;
            let mut minus = params.clone();
            minus.layers[li].weight.data_mut()[idx] -= h;
            let (lp, _) = loss_and_grad(&spec, &plus, &x, |out| mse_loss(out, &targets))?;
            let (lm, _) = loss_and_grad(&spec, &minus, &x, |out| mse_loss(out, &targets))?;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic.layers[li].weight.data()[idx];
            max_rel = max_rel.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
    }
    println!("gradient check vs central differences: max relative error {max_rel:.2e}");

    // Fit y = sin(x) on [-2, 2] with Adam.
    let n = 256;
    let xs: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
    let x = Matrix::from_vec(n, 1, xs)?;
    let y = Matrix::from_vec(n, 1, ys)?;

    let spec = MlpSpec::unbounded(1, vec![32, 32], 1)?;
    let mut params = init_params(&spec, &mut rng);
    let mut state = AdamState::new(&spec);
    let adam = AdamConfig::with_lr(1e-2)?;
    for step in 0..=1200 {
        let (loss, g) = loss_and_grad(&spec, &params, &x, |out| mse_loss(out, &y))?;
        if step % 300 == 0 {
            println!("step {step:5}: training MSE {loss:.6}");
        }
        if step == 1200 {
            break;
        }
        adam_step(&mut params, &g, &mut state, &adam);
    }

    // Snapshot round trip.
    let path = std::env::temp_dir().join("mlp_training_snapshot.txt");
    params.save(&path)?;
    let restored = MlpParams::load(&path)?;
    let before = forward(&spec, &params, &x)?;
    let after = forward(&spec, &restored, &x)?;
    let identical = before.data() == after.data();
    println!(
        "snapshot round trip through {}: outputs identical = {identical}",
        path.display()
    );
    std::fs::remove_file(&path).ok();
    Ok(())
}
