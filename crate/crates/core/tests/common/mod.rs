#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sphere_align::measure::uniform_point;
use sphere_align::sphere::chord_distance;
use sphere_align::{UnitVector, WeightedConfiguration};

/// Random masses in `[0.5, 1.5]` normalized, points uniform.
pub fn random_config(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> WeightedConfiguration {
    let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let points = (0..count).map(|_| uniform_point(dim, rng)).collect();
    WeightedConfiguration::new(weights, points).unwrap()
}

/// Exact optimal transport cost to `(1-m) δ_Ω + m δ_{-Ω}` by vertex enumeration:
/// every optimal plan sends whole particles to `-Ω` except at most one split one.
pub fn brute_force_two_atom(weights: &[f64], points: &[UnitVector], omega: &UnitVector, m: f64) -> f64 {
    let anti = omega.neg();
    let plus: Vec<f64> = points.iter().map(|p| chord_distance(p, omega).unwrap()).collect();
    let minus: Vec<f64> = points.iter().map(|p| chord_distance(p, &anti).unwrap()).collect();
    let n = weights.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let full: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| weights[i]).sum();
        let base: f64 = (0..n)
            .map(|i| weights[i] * if mask & (1 << i) != 0 { minus[i] } else { plus[i] })
            .sum();
        if (full - m).abs() <= 1e-15 {
            best = best.min(base);
        }
        for s in (0..n).filter(|i| mask & (1 << i) == 0) {
            let x = m - full;
            if x >= 0.0 && x <= weights[s] {
                best = best.min(base + x * (minus[s] - plus[s]));
            }
        }
    }
    best
}
