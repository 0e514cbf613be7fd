//! Finite-difference check of the hand-written backward pass, and what a
//! deliberately broken layer looks like.
//!
//!     cargo run --release --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rffjam::classifiers::classifier_layers;
use rffjam::nn::{gradient_check, GradCheckConfig, Loss, Network, Shape};

fn main() -> rffjam::Result<()> {
    let net = Network::new(Shape::new(1, 8, 8), &classifier_layers(&[2, 4], 3), 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
    let loss = Loss::CrossEntropy(1);
    let ok = gradient_check(&net, &x, &loss, &GradCheckConfig::default())?;
    println!("{} parameters, max relative error {ok:.2e}", net.n_params());
    let broken = GradCheckConfig {
        flip_layer: Some(0),
        ..GradCheckConfig::default()
    };
    println!("with layer 0 gradient negated: {:.2e}", gradient_check(&net, &x, &loss, &broken)?);
    Ok(())
}
