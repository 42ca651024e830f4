//! Integrates the two bundled textbook systems and prints their regime reports.
//!
//! `cargo run --release --example particle_regimes`

use sphere_align::asymptotics::verify_theorem2;
use sphere_align::particles::{integrate, mean_velocity};
use sphere_align::{UnitVector, WeightedConfiguration};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // equal masses at ±φ0: tan φ(t) = tan φ0 e^{-t}
    let phi0: f64 = 0.5;
    let pair = WeightedConfiguration::uniform(vec![
        UnitVector::new(vec![phi0.cos(), phi0.sin()])?,
        UnitVector::new(vec![phi0.cos(), -phi0.sin()])?,
    ])?;
    let traj = integrate(&pair, 40.0, 1e-3, true)?;
    for t in [0.0, 2.0, 5.0, 10.0] {
        let k = traj.times().iter().position(|&s| s >= t - 1e-12).unwrap();
        let v = &traj.states()[k].points()[0];
        let phi = v.coords()[1].atan2(v.coords()[0]);
        println!(
            "t = {t:>4}: tan φ = {:.12e}, closed form {:.12e}",
            phi.tan(),
            phi0.tan() * (-t).exp()
        );
    }
    let report = verify_theorem2(&traj)?;
    println!("symmetric pair: regime {}, λ = {}, pass {}", report.regime, report.lambda, report.pass);

    // m = 1/4 opposite m = 3/4 never moves
    let quarter = WeightedConfiguration::new(
        vec![0.25, 0.75],
        vec![UnitVector::new(vec![-1.0, 0.0])?, UnitVector::new(vec![1.0, 0.0])?],
    )?;
    let traj = integrate(&quarter, 40.0, 1e-3, true)?;
    let report = verify_theorem2(&traj)?;
    println!(
        "antipodal quarter: regime {} (particle {:?}), λ = {}, J = {:?}",
        report.regime,
        report.i0,
        report.lambda,
        mean_velocity(traj.last())
    );
    for c in &report.checks {
        println!("  {:<26} {}  {}", c.name, if c.pass { "ok " } else { "FAIL" }, c.detail);
    }
    Ok(())
}
