//! Weak convergence of empirical measures to (1-m) δ_{Ω_∞} + m δ_{-Ω_∞}.
//!
//! `cargo run --release --example two_atom_limit`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sphere_align::measure::{sample, verify_theorem1, DensitySpec, MeasureSpec};
use sphere_align::one_back::{random_offsets, synthesize, OneBackSpec};
use sphere_align::particles::{integrate_with, IntegrationSettings};
use sphere_align::UnitVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // atomless: 10³ samples of 1 + 0.5 v·e_3
    let spec = MeasureSpec::new(
        3,
        Some(DensitySpec::Tilted { beta: 0.5, axis: UnitVector::north(3)? }),
        vec![],
    )?;
    let cfg = sample(&spec, 1000, 7)?;
    let traj = integrate_with(&cfg, &IntegrationSettings::new(15.0, 1e-3).with_stride(50))?;
    let rep = verify_theorem1(&traj, 0.01)?;
    println!("tilted sample: m = {}, W1(15) = {:.3e}, pass {}", rep.back_mass, rep.final_w1, rep.pass);

    // one atom of mass 0.2 sent to -Ω_∞
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let run = synthesize(&OneBackSpec {
        weights: vec![0.2, 0.5, 0.3],
        back_index: 0,
        offsets: random_offsets(2, 3, 0.5, &mut rng),
        horizon: 60.0 / 0.6,
        dt: 1e-3,
        stride: Some(20),
        frame: None,
    })?;
    let rep = verify_theorem1(&run.trajectory, 1e-4)?;
    println!(
        "one-back run: m = {}, |J| = {:.12}, W1(T) = {:.3e}, pass {}",
        rep.back_mass, rep.final_abs_j, rep.final_w1, rep.pass
    );
    for s in rep.series.iter().step_by(500) {
        println!(
            "  t = {:>6.1}: W1 = {:.3e}, mass near Ω_∞ {:.3}, near -Ω_∞ {:.3}",
            s.t, s.w1, s.split.plus, s.split.minus
        );
    }
    Ok(())
}
