//! Open-loop simulation of the pendulum and the cart-pole, including the
//! energy drift of the integrator on the unactuated pendulum.

use etcrl::envs::{PlantParams, PlantState, Task};
use etcrl::rng;

fn main() -> etcrl::Result<()> {
    let pendulum = PlantParams::pendulum().noise_free();
    let mut r = rng::stream(0, "plant-example", 0);
    let mut state = PlantState { x: vec![2.0, 0.0] };
    let e0 = pendulum.pendulum_energy(&state.x);
    let mut energies = Vec::new();
    for _ in 0..500 {
        state = pendulum.step(&state, &[0.0], &mut r)?.0;
        energies.push(pendulum.pendulum_energy(&state.x));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    println!("pendulum energy: initial {e0:.4}, mean of first 100 steps {:.4}, of last 100 steps {:.4}", mean(&energies[..100]), mean(&energies[400..]));

    let noisy = PlantParams::pendulum();
    let start = noisy.reset(Task::Balance, &mut r);
    let mut x = start.clone();
    let mut fell_at = None;
    for k in 0..500 {
        x = noisy.step(&x, &[0.0], &mut r)?.0;
        if fell_at.is_none() && x.x[0].abs() > 0.2 {
            fell_at = Some(k);
        }
    }
    println!("uncontrolled upright pendulum from {:?} leaves |θ| <= 0.2 at step {fell_at:?}", start.x);

    let cart = PlantParams::cart_pole();
    let mut s = cart.reset(Task::Balance, &mut r);
    let mut steps = 0;
    while !etcrl::envs::terminated(&cart, &s) && steps < 2000 {
        s = cart.step(&s, &[1.0], &mut r)?.0;
        steps += 1;
    }
    println!("cart-pole pushed with 1 N terminates after {steps} steps at {:?}", s.x);
    Ok(())
}
