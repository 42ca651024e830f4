//! Finds the point that an aligned pair's mean field sends to -Ω_∞.
//!
//! `cargo run --release --example vback_shooting`

use sphere_align::backward::{compute_vback, verify_vback, AlignmentField, FieldRecord, ShootingOptions};
use sphere_align::particles::integrate;
use sphere_align::sphere::renormalize;
use sphere_align::{UnitVector, WeightedConfiguration};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = WeightedConfiguration::new(
        vec![0.4, 0.6],
        vec![UnitVector::new(vec![0.6, 0.8, 0.0])?, UnitVector::new(vec![0.6, -0.48, 0.64])?],
    )?;
    let traj = integrate(&cfg, 40.0, 1e-3, true)?;
    let field = FieldRecord::from_trajectory(&traj)?;
    let omega_inf = renormalize(&field.value(40.0))?;

    let shooting = compute_vback(&field, &omega_inf, &ShootingOptions::default())?;
    println!("Ω_∞    = {:?}", omega_inf.coords());
    println!("v_back = {:?}", shooting.v_back.coords());
    for (t, d) in shooting.shot_times.iter().skip(1).zip(&shooting.increments) {
        println!("  shot from T = {t:>6.2}: increment {d:.3e}");
    }
    let check = verify_vback(&field, &shooting.v_back, &omega_inf, 22.0, 1e-3)?;
    println!(
        "forward: v_back ends at v·Ω_∞ = {:.9}, displaced starts end at {:?}",
        check.back_final_dot,
        check.displaced.iter().map(|d| format!("{:.9}", d.final_dot)).collect::<Vec<_>>()
    );
    println!("verification passed: {}", check.pass);
    Ok(())
}
