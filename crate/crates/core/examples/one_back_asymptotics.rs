//! Builds runs in which one particle tends to -Ω_∞ and checks the rates
//! λ = 1 - 2m and 3λ for several back masses.
//!
//! `cargo run --release --example one_back_asymptotics`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sphere_align::asymptotics::verify_theorem2;
use sphere_align::one_back::{random_offsets, synthesize, OneBackSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    println!("{:>5} {:>8} {:>10} {:>10} {:>10} {:>6}", "m", "λ", "bulk", "Ω", "back", "pass");
    for m in [0.1, 0.2, 0.3, 0.4] {
        let bulk = 5;
        let mut weights = vec![m];
        weights.extend(std::iter::repeat_n((1.0 - m) / bulk as f64, bulk));
        let lambda = 1.0 - 2.0 * m;
        let spec = OneBackSpec {
            weights,
            back_index: 0,
            offsets: random_offsets(bulk, 3, 0.5, &mut rng),
            horizon: 30.0 / lambda,
            dt: 1e-3,
            stride: None,
            frame: None,
        };
        let run = synthesize(&spec)?;
        let rep = verify_theorem2(&run.trajectory)?;
        let show = |x: Option<f64>| x.map_or("-".to_string(), |r| format!("{r:.5}"));
        println!(
            "{m:>5} {:>8.5} {:>10} {:>10} {:>10} {:>6}",
            rep.lambda,
            show(rep.rates.bulk),
            show(rep.rates.omega),
            show(rep.rates.back),
            rep.pass
        );
    }
    Ok(())
}
