//! Solves λ' = α(λ) for the tilted density 1 + β v·e_n and tabulates the
//! distances to δ_{e_n} against their reference decay laws.
//!
//! `cargo run --release --example axisymmetric_rates`

use sphere_align::experiments::reference_laws;
use sphere_align::kinetic::{solve_lambda, w1_to_dirac, w2sq_to_dirac, RadialDensity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for n in [2, 3, 4] {
        let h = RadialDensity::tilted(n, 0.5)?;
        let sol = solve_lambda(&h, 30.0, 0.01)?;
        let laws = reference_laws(n);
        println!("n = {n}: W1 / {}, W2 / {}", laws[0].0, laws[1].0);
        for t in [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0] {
            let lam = sol.lambda_at(t)?;
            let w1 = w1_to_dirac(&h, lam)?;
            let w2 = w2sq_to_dirac(&h, lam)?.sqrt();
            println!(
                "  t = {t:>4}: λ = {lam:>9.5}  α = {:.10}  W1 = {w1:.4e} ({:.5})  W2 = {w2:.4e} ({:.5})",
                sol.alpha_at(t)?,
                w1 / laws[0].1(t),
                w2 / laws[1].1(t)
            );
        }
    }
    Ok(())
}
