//! Compares back-propagated gradients of random networks with central
//! finite differences.

use etcrl::nn::{gradient_check, Activation, Matrix, Mlp, MlpSpec, OutputActivation};
use etcrl::rng;
use rand::Rng;

fn main() -> etcrl::Result<()> {
    for (hidden, output) in [
        (Activation::Relu, OutputActivation::Linear),
        (Activation::Tanh, OutputActivation::Tanh),
        (Activation::Tanh, OutputActivation::Sigmoid),
    ] {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let mut r = rng::stream(seed, "gradcheck-example", 0);
            let net = Mlp::new(MlpSpec::uniform(vec![4, 16, 16, 3], hidden, output), &mut r)?;
            let input = Matrix::from_vec(5, 4, (0..20).map(|_| r.random_range(-1.0..1.0)).collect())?;
            worst = worst.max(gradient_check(&net, &input, 1e-6)?);
        }
        println!("{hidden:?} hidden, {output:?} output: max relative error {worst:.2e}");
    }
    Ok(())
}
