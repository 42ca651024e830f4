//! Construction of runs in which exactly one particle converges to `-Ω_∞`.
//!
//! Such runs sit on a stable manifold whose transverse direction grows at
//! rate 1 in forward time, so forward integration in floating point drifts
//! off it long before the asymptotics can be observed. Here the run is built
//! from its end: a terminal state is written down from the asymptotic
//! expansion in the frame `Ω_∞ = e_n` and integrated backward to `t = 0`,
//! where the unstable direction is damped.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::particles::{FlatState, ParticleError, Trajectory, WeightedConfiguration, MAX_SNAPSHOTS};
use crate::sphere::{self, UnitVector};

/// Terminal data for a one-back run.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBackSpec {
    pub weights: Vec<f64>,
    pub back_index: usize,
    /// Asymptotic offsets `a_i` of the other particles in `R^{n-1}`
    /// (coordinates orthogonal to `Ω_∞ = e_n`), listed in particle order with
    /// the back particle skipped. Their weighted mean is removed.
    pub offsets: Vec<Vec<f64>>,
    /// Final time `T`; the run covers `[0, T]`.
    pub horizon: f64,
    pub dt: f64,
    pub stride: Option<usize>,
    /// Direction of `Ω_∞`; defaults to `e_n`.
    pub frame: Option<UnitVector>,
}

/// A synthesized run and the exact asymptotic data it was built from.
#[derive(Debug, Clone)]
pub struct OneBackRun {
    pub trajectory: Trajectory,
    pub omega_inf: UnitVector,
    /// `1 - 2 m_back`.
    pub lambda: f64,
    pub back_index: usize,
    /// `a_i` as vectors in `R^n` (zero for the back particle).
    pub offsets: Vec<Vec<f64>>,
}

/// Gaussian offsets with standard deviation `scale`, one per bulk particle.
pub fn random_offsets<R: Rng>(bulk: usize, dim: usize, scale: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..bulk)
        .map(|_| (0..dim - 1).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Builds the run by backward integration from the terminal state at `T`.
pub fn synthesize(spec: &OneBackSpec) -> Result<OneBackRun, ParticleError> {
    let count = spec.weights.len();
    if spec.back_index >= count || count < 2 {
        return Err(ParticleError::InvalidSettings(format!(
            "back index {} for {} particles",
            spec.back_index, count
        )));
    }
    let m_back = spec.weights[spec.back_index];
    if m_back >= 0.5 {
        return Err(ParticleError::InvalidSettings(format!(
            "back mass {m_back} must be below 1/2"
        )));
    }
    if spec.offsets.len() != count - 1 {
        return Err(ParticleError::InvalidSettings(format!(
            "{} offsets for {} bulk particles",
            spec.offsets.len(),
            count - 1
        )));
    }
    let tangent_dim = spec.offsets[0].len();
    if tangent_dim == 0 || spec.offsets.iter().any(|a| a.len() != tangent_dim) {
        return Err(ParticleError::InvalidSettings("offsets must share one dimension ≥ 1".into()));
    }
    if !(spec.dt > 0.0 && spec.horizon > 0.0 && spec.horizon.is_finite()) {
        return Err(ParticleError::InvalidSettings(format!(
            "horizon {} and dt {}",
            spec.horizon, spec.dt
        )));
    }
    let n = tangent_dim + 1;
    if let Some(frame) = &spec.frame {
        if frame.dim() != n {
            return Err(sphere::SphereError::DimensionMismatch {
                expected: n,
                found: frame.dim(),
            }
            .into());
        }
    }
    let lambda = 1.0 - 2.0 * m_back;

    let bulk_weights: Vec<f64> = (0..count)
        .filter(|&i| i != spec.back_index)
        .map(|i| spec.weights[i])
        .collect();
    let bulk_mass: f64 = bulk_weights.iter().sum();
    let mut mean = vec![0.0; tangent_dim];
    for (m, a) in bulk_weights.iter().zip(&spec.offsets) {
        for (mk, ak) in mean.iter_mut().zip(a) {
            *mk += m * ak / bulk_mass;
        }
    }
    let centred: Vec<Vec<f64>> = spec
        .offsets
        .iter()
        .map(|a| a.iter().zip(&mean).map(|(x, c)| x - c).collect())
        .collect();

    let steps = (spec.horizon / spec.dt).round().max(1.0) as usize;
    let horizon = steps as f64 * spec.dt;
    let decay = (-lambda * horizon).exp();
    let mut terminal = Vec::with_capacity(count);
    let mut bulk = centred.iter();
    for i in 0..count {
        if i == spec.back_index {
            let mut p = vec![0.0; n];
            p[n - 1] = -1.0;
            terminal.push(UnitVector::from_unit_unchecked(p));
        } else {
            let d: Vec<f64> = bulk.next().expect("offset per bulk particle").iter().map(|x| x * decay).collect();
            let dd = sphere::dot(&d, &d);
            if dd >= 1.0 {
                return Err(ParticleError::InvalidSettings(
                    "horizon too short for the given offsets".into(),
                ));
            }
            let mut p = d;
            p.push((1.0 - dd).sqrt());
            terminal.push(UnitVector::from_unit_unchecked(p));
        }
    }
    let end = WeightedConfiguration::with_coincident(spec.weights.clone(), terminal)?;

    let stride = spec
        .stride
        .unwrap_or_else(|| steps.div_ceil(MAX_SNAPSHOTS))
        .max(1);
    let mut state = FlatState::from_config(&end);
    let mut rev_states = vec![end.clone()];
    let mut rev_steps = vec![steps];
    for k in 1..=steps {
        state.rk4_step(-spec.dt, true);
        let remaining = steps - k;
        if remaining % stride == 0 {
            rev_states.push(state.to_config(&spec.weights));
            rev_steps.push(remaining);
        }
    }
    rev_states.reverse();
    rev_steps.reverse();
    let times: Vec<f64> = rev_steps.iter().map(|&k| k as f64 * spec.dt).collect();

    let (states, omega_inf, offsets) = match &spec.frame {
        None => (
            rev_states,
            UnitVector::north(n)?,
            embed_offsets(&centred, spec.back_index, n),
        ),
        Some(frame) => {
            let rot = sphere::rotation_from_north(frame);
            let states = rev_states.iter().map(|s| s.rotated(&rot)).collect();
            let offsets = embed_offsets(&centred, spec.back_index, n)
                .iter()
                .map(|a| sphere::apply_matrix(&rot, a))
                .collect();
            (states, frame.clone(), offsets)
        }
    };
    Ok(OneBackRun {
        trajectory: Trajectory::from_snapshots(times, states)?,
        omega_inf,
        lambda,
        back_index: spec.back_index,
        offsets,
    })
}

fn embed_offsets(centred: &[Vec<f64>], back_index: usize, n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(centred.len() + 1);
    let mut it = centred.iter();
    for i in 0..=centred.len() {
        if i == back_index {
            out.push(vec![0.0; n]);
        } else {
            let mut a = it.next().expect("offset").clone();
            a.push(0.0);
            out.push(a);
        }
    }
    out
}

/// Largest chord distance between a stored snapshot and the forward
/// re-integration of its predecessor over the same interval with step `dt`.
pub fn pseudo_orbit_defect(traj: &Trajectory, dt: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 1..traj.len() {
        let span = traj.times()[k] - traj.times()[k - 1];
        let steps = (span / dt).round().max(1.0) as usize;
        let h = span / steps as f64;
        let prev = &traj.states()[k - 1];
        let mut state = FlatState::from_config(prev);
        for _ in 0..steps {
            state.rk4_step(h, true);
        }
        let next = state.to_config(prev.weights());
        for (p, q) in next.points().iter().zip(traj.states()[k].points()) {
            worst = worst.max(sphere::chord_distance(p, q).expect("same dimension"));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::mean_velocity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(weights: Vec<f64>, horizon: f64) -> OneBackSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bulk = weights.len() - 1;
        OneBackSpec {
            weights,
            back_index: 0,
            offsets: random_offsets(bulk, 3, 0.5, &mut rng),
            horizon,
            dt: 1e-3,
            stride: Some(10),
            frame: None,
        }
    }

    #[test]
    fn terminal_state_matches_limit() {
        let run = synthesize(&spec(vec![0.2, 0.4, 0.4], 40.0)).unwrap();
        let last = run.trajectory.last();
        assert!((last.points()[0].coords()[2] + 1.0).abs() < 1e-15);
        let j = mean_velocity(last);
        assert!((crate::sphere::norm(&j) - 0.6).abs() < 1e-9);
        assert!((run.lambda - 0.6).abs() < 1e-15);
        assert_eq!(run.trajectory.times()[0], 0.0);
        assert!((run.trajectory.t_end() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn offsets_are_centred() {
        let run = synthesize(&spec(vec![0.1, 0.3, 0.2, 0.4], 10.0)).unwrap();
        let mut s = [0.0; 3];
        for (m, a) in run.trajectory.initial().weights().iter().zip(&run.offsets) {
            for k in 0..3 {
                s[k] += m * a[k];
            }
        }
        assert!(s.iter().all(|x| x.abs() < 1e-15));
        assert_eq!(run.offsets[0], vec![0.0; 3]);
    }

    #[test]
    fn pseudo_orbit_is_consistent_forward() {
        let run = synthesize(&spec(vec![0.3, 0.35, 0.35], 30.0)).unwrap();
        assert!(pseudo_orbit_defect(&run.trajectory, 1e-3) < 1e-11);
    }

    #[test]
    fn rejects_heavy_back_particle() {
        assert!(synthesize(&spec(vec![0.5, 0.25, 0.25], 10.0)).is_err());
    }

    #[test]
    fn frame_rotation() {
        let frame = UnitVector::new(vec![1.0, 2.0, 2.0]).unwrap();
        let mut s = spec(vec![0.2, 0.4, 0.4], 20.0);
        s.frame = Some(frame.clone());
        let run = synthesize(&s).unwrap();
        let back = &run.trajectory.last().points()[0];
        assert!(back.dot(frame.coords()) < -1.0 + 1e-14);
        for a in &run.offsets {
            assert!(sphere::dot(a, frame.coords()).abs() < 1e-14);
        }
    }

    #[test]
    fn synthesized_run_has_one_back_asymptotics() {
        let s = OneBackSpec {
            horizon: 26.0 / 0.6,
            ..spec(vec![0.2, 0.4, 0.4], 1.0)
        };
        let run = synthesize(&s).unwrap();
        let rep = crate::asymptotics::verify_theorem2(&run.trajectory).unwrap();
        assert_eq!(rep.i0, Some(0));
        assert!(rep.pass, "{:#?}", rep.checks);
        for (a, b) in rep.a_coeffs.iter().zip(&run.offsets).skip(1) {
            let a = a.as_ref().unwrap();
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(d < 1e-6, "{a:?} vs {b:?}");
        }
    }
}
