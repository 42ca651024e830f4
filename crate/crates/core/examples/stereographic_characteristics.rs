//! Compares single-vector flows in the axisymmetric field with the explicit
//! characteristics z0 e^{-λ(t)} in stereographic coordinates.
//!
//! `cargo run --release --example stereographic_characteristics`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_align::backward::flow_single;
use sphere_align::kinetic::{characteristic_map, solve_lambda, RadialDensity};
use sphere_align::sphere::{chord_distance, stereo_inverse};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = RadialDensity::tilted(3, 0.5)?;
    let sol = solve_lambda(&h, 10.0, 0.01)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let z0: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let v0 = stereo_inverse(&z0);
        for t in [1.0, 5.0, 10.0] {
            let flowed = flow_single(&sol, &v0, 0.0, t)?;
            let explicit = stereo_inverse(&characteristic_map(&z0, &sol, t)?);
            worst = worst.max(chord_distance(&flowed, &explicit)?);
        }
    }
    println!("λ(10) = {:.9}", sol.lambda_at(10.0)?);
    println!("largest gap between flow and characteristics: {worst:.3e}");
    Ok(())
}
