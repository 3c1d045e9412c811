//! Central finite-difference check of [`Mlp::backward`].

use super::matrix::Matrix;
use super::mlp::Mlp;
use crate::error::Result;

/// Fixed, non-uniform weights for reducing the output to a scalar, so that
/// no output unit's gradient cancels against another's.
fn reduction_weight(i: usize, j: usize) -> f64 {
    1.0 + 0.37 * ((i * 7 + j * 3) % 5) as f64
}

fn objective(net: &Mlp, input: &Matrix) -> Result<f64> {
    let y = net.predict(input)?;
    let mut total = 0.0;
    for i in 0..y.rows() {
        for (j, v) in y.row(i).iter().enumerate() {
            total += reduction_weight(i, j) * v;
        }
    }
    Ok(total)
}

/// Central differences at ε = 1e-6 carry round-off of about ε_mach·|f|/ε, up
/// to 1e-9 for objectives of order ten, so entries below 1e-5 are compared in
/// absolute terms.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-5)
}

/// Largest relative error between back-propagated and central-difference
/// gradients, over every parameter and every input entry.
pub fn gradient_check(net: &Mlp, input: &Matrix, eps: f64) -> Result<f64> {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let (y, cache) = net.forward(input)?;
    let mut seed = Matrix::zeros(y.rows(), y.cols());
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            seed[(i, j)] = reduction_weight(i, j);
        }
    }
    let (grads, input_grad) = net.backward(&cache, &seed)?;

    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    let blocks = grads.iter().count();
    for block in 0..blocks {
        let len = grads.iter().nth(block).unwrap().data().len();
        for k in 0..len {
            let original = net.params().nth(block).unwrap().data()[k];
            probe.params_mut().nth(block).unwrap().data_mut()[k] = original + eps;
            let plus = objective(&probe, input)?;
            probe.params_mut().nth(block).unwrap().data_mut()[k] = original - eps;
            let minus = objective(&probe, input)?;
            probe.params_mut().nth(block).unwrap().data_mut()[k] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.iter().nth(block).unwrap().data()[k];
            worst = worst.max(relative_error(analytic, numeric));
        }
    }

    let mut shifted = input.clone();
    for k in 0..input.data().len() {
        let original = input.data()[k];
        shifted.data_mut()[k] = original + eps;
        let plus = objective(net, &shifted)?;
        shifted.data_mut()[k] = original - eps;
        let minus = objective(net, &shifted)?;
        shifted.data_mut()[k] = original;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(input_grad.data()[k], numeric));
    }
    Ok(worst)
}
