//! A density whose distance to the limit decays no faster than g(t) = 0.4 e^{-t/10}.
//!
//! `cargo run --release --example slow_decay`

use sphere_align::kinetic::{one_minus_alpha, slow_decay_density, solve_lambda, w1_to_dirac, DecayFn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = DecayFn::Exp { c: 0.4, tau: 10.0 };
    let h = slow_decay_density(g.clone(), 0.05, 3)?;
    println!("mass = {:.12}", h.mass()?);
    let sol = solve_lambda(&h, 40.0, 0.01)?;
    println!("{:>5} {:>12} {:>12} {:>12}", "t", "g", "1-α", "W1");
    for t in [0.0, 5.0, 10.0, 20.0, 40.0] {
        let lam = sol.lambda_at(t)?;
        println!(
            "{t:>5} {:>12.6e} {:>12.6e} {:>12.6e}",
            g.value(t),
            one_minus_alpha(&h, lam)?,
            w1_to_dirac(&h, lam)?
        );
    }
    Ok(())
}
