//! Measures on the sphere represented by weighted particles, and their
//! Wasserstein-1 distance to the limit `(1-m) δ_{Ω_∞} + m δ_{-Ω_∞}`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::asymptotics::{estimate_rate, SeriesRate, CLASSIFY_THRESHOLD};
use crate::particles::{ParticleError, Trajectory, WeightedConfiguration};
use crate::sphere::{self, chord_distance, SphereError, UnitVector};

/// Half-width of the band `|v·Ω_∞| < 0.5` reported as undecided.
pub const UNDECIDED_BAND: f64 = 0.5;

/// Cap on rejection attempts per accepted sample.
const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("invalid measure: {0}")]
    Invalid(String),
    #[error("density value {value} exceeds the declared envelope {envelope}")]
    EnvelopeViolated { value: f64, envelope: f64 },
    #[error("rejection sampler accepted nothing in {MAX_REJECTIONS} draws")]
    Starved,
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error(transparent)]
    Particles(#[from] ParticleError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

/// Absolutely continuous part of a measure, relative to the uniform measure.
#[derive(Clone)]
pub enum DensitySpec {
    /// `1 + β v·axis`, `|β| ≤ 1`.
    Tilted { beta: f64, axis: UnitVector },
    /// Any density bounded by `envelope`.
    Rejection {
        density: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        envelope: f64,
    },
}

impl fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::Tilted { beta, axis } => write!(f, "Tilted {{ beta: {beta}, axis: {axis:?} }}"),
            DensitySpec::Rejection { envelope, .. } => write!(f, "Rejection {{ envelope: {envelope} }}"),
        }
    }
}

impl DensitySpec {
    fn envelope(&self) -> f64 {
        match self {
            DensitySpec::Tilted { beta, .. } => 1.0 + beta.abs(),
            DensitySpec::Rejection { envelope, .. } => *envelope,
        }
    }

    fn value(&self, v: &[f64]) -> f64 {
        match self {
            DensitySpec::Tilted { beta, axis } => 1.0 + beta * axis.dot(v),
            DensitySpec::Rejection { density, .. } => density(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub point: UnitVector,
    pub mass: f64,
}

/// Density part plus atoms, total mass one.
#[derive(Debug, Clone)]
pub struct MeasureSpec {
    dim: usize,
    density: Option<DensitySpec>,
    atoms: Vec<Atom>,
}

impl MeasureSpec {
    pub fn new(dim: usize, density: Option<DensitySpec>, atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        if dim < 2 {
            return Err(SphereError::DimensionTooSmall(dim).into());
        }
        for a in &atoms {
            if a.point.dim() != dim {
                return Err(SphereError::DimensionMismatch {
                    expected: dim,
                    found: a.point.dim(),
                }
                .into());
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(MeasureError::Invalid(format!("atom mass {} is not positive", a.mass)));
            }
        }
        for i in 0..atoms.len() {
            for j in (i + 1)..atoms.len() {
                if chord_distance(&atoms[i].point, &atoms[j].point)? <= 1e-12 {
                    return Err(MeasureError::Invalid(format!(
                        "atoms {i} and {j} coincide; merge them into one atom"
                    )));
                }
            }
        }
        let atom_mass: f64 = atoms.iter().map(|a| a.mass).sum();
        match &density {
            None => {
                if (atom_mass - 1.0).abs() > 1e-12 {
                    return Err(MeasureError::Invalid(format!("atom masses sum to {atom_mass}, expected 1")));
                }
            }
            Some(d) => {
                if !(atom_mass < 1.0 - 1e-12) {
                    return Err(MeasureError::Invalid(format!(
                        "atoms carry mass {atom_mass}, leaving nothing for the density"
                    )));
                }
                match d {
                    DensitySpec::Tilted { beta, axis } => {
                        if !(beta.abs() <= 1.0) {
                            return Err(MeasureError::Invalid(format!("|beta| = {} exceeds 1", beta.abs())));
                        }
                        if axis.dim() != dim {
                            return Err(SphereError::DimensionMismatch {
                                expected: dim,
                                found: axis.dim(),
                            }
                            .into());
                        }
                    }
                    DensitySpec::Rejection { envelope, .. } => {
                        if !(*envelope > 0.0 && envelope.is_finite()) {
                            return Err(MeasureError::Invalid(format!("envelope {envelope} must be positive")));
                        }
                    }
                }
            }
        }
        Ok(Self { dim, density, atoms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density_mass(&self) -> f64 {
        match self.density {
            Some(_) => 1.0 - self.atoms.iter().map(|a| a.mass).sum::<f64>(),
            None => 0.0,
        }
    }
}

/// Uniform point on `S^{n-1}` by normalizing a Gaussian vector.
pub fn uniform_point<R: Rng>(dim: usize, rng: &mut R) -> UnitVector {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = sphere::renormalize(&g) {
            return u;
        }
    }
}

/// Atoms first (exact masses, in order), then `count` equal-weight density samples.
pub fn sample(spec: &MeasureSpec, count: usize, seed: u64) -> Result<WeightedConfiguration, MeasureError> {
    let mut weights: Vec<f64> = spec.atoms.iter().map(|a| a.mass).collect();
    let mut points: Vec<UnitVector> = spec.atoms.iter().map(|a| a.point.clone()).collect();
    if let Some(density) = &spec.density {
        if count == 0 {
            return Err(MeasureError::Invalid("density part needs at least one sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let envelope = density.envelope();
        let w = spec.density_mass() / count as f64;
        for _ in 0..count {
            let mut accepted = None;
            for _ in 0..MAX_REJECTIONS {
                let v = uniform_point(spec.dim, &mut rng);
                let value = density.value(v.coords());
                if value > envelope {
                    return Err(MeasureError::EnvelopeViolated { value, envelope });
                }
                if rng.random::<f64>() * envelope < value {
                    accepted = Some(v);
                    break;
                }
            }
            points.push(accepted.ok_or(MeasureError::Starved)?);
            weights.push(w);
        }
        // absorb the rounding of the equal split so the total is one
        let total: f64 = weights.iter().sum();
        let last = weights.len() - 1;
        weights[last] += 1.0 - total;
    }
    Ok(WeightedConfiguration::new(weights, points)?)
}

/// `(1-m) δ_{Ω_∞} + m δ_{-Ω_∞}` with `m < 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoAtomLimit {
    omega_inf: UnitVector,
    back_mass: f64,
}

impl TwoAtomLimit {
    pub fn new(omega_inf: UnitVector, back_mass: f64) -> Result<Self, MeasureError> {
        if !(0.0..0.5).contains(&back_mass) {
            return Err(MeasureError::Invalid(format!("back mass {back_mass} must lie in [0, 1/2)")));
        }
        Ok(Self { omega_inf, back_mass })
    }

    pub fn omega_inf(&self) -> &UnitVector {
        &self.omega_inf
    }

    pub fn back_mass(&self) -> f64 {
        self.back_mass
    }
}

/// Exact `W_1` (chordal cost) from a weighted configuration to a two-atom target.
///
/// Every particle goes to `Ω_∞` except mass `m`, which goes to `-Ω_∞`; the
/// particles cheapest to reroute, by `|v+Ω_∞| - |v-Ω_∞|`, fill that sink first.
pub fn w1_to_two_atom(cfg: &WeightedConfiguration, limit: &TwoAtomLimit) -> f64 {
    let omega = &limit.omega_inf;
    let anti = omega.neg();
    // (rerouting penalty, to Ω_∞, to -Ω_∞, mass)
    let mut legs: Vec<(f64, f64, f64, f64)> = cfg
        .points()
        .iter()
        .zip(cfg.weights())
        .map(|(v, m)| {
            let to_plus = chord_distance(v, omega).expect("dimension");
            let to_minus = chord_distance(v, &anti).expect("dimension");
            (to_minus - to_plus, to_plus, to_minus, *m)
        })
        .collect();
    legs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut remaining = limit.back_mass;
    let mut cost = 0.0;
    for (_, to_plus, to_minus, m) in legs {
        let moved = m.min(remaining.max(0.0));
        remaining -= moved;
        cost += moved * to_minus + (m - moved) * to_plus;
    }
    cost
}

/// Masses near `Ω_∞`, near `-Ω_∞`, and in the band `|v·Ω_∞| < band`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassSplit {
    pub plus: f64,
    pub minus: f64,
    pub undecided: f64,
}

pub fn mass_split(cfg: &WeightedConfiguration, omega_inf: &UnitVector, band: f64) -> MassSplit {
    let (mut plus, mut minus, mut undecided) = (0.0, 0.0, 0.0);
    for (v, m) in cfg.points().iter().zip(cfg.weights()) {
        let d = v.dot(omega_inf.coords());
        if d.abs() < band {
            undecided += m;
        } else if d > 0.0 {
            plus += m;
        } else {
            minus += m;
        }
    }
    MassSplit { plus, minus, undecided }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSample {
    pub t: f64,
    pub abs_j: f64,
    pub w1: f64,
    pub split: MassSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub omega_inf: UnitVector,
    pub back_index: Option<usize>,
    pub back_mass: f64,
    pub final_abs_j: f64,
    pub final_w1: f64,
    pub tolerance: f64,
    pub w1_rate: SeriesRate,
    pub monotone_final_half: bool,
    pub checks: Vec<crate::asymptotics::Check>,
    pub pass: bool,
    #[serde(skip)]
    pub series: Vec<MeasureSample>,
}

impl Theorem1Report {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        use crate::particles::fmt17;
        writeln!(out, "t,absJ,w1,mass_plus,mass_minus,mass_undecided")?;
        for s in &self.series {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt17(s.t),
                fmt17(s.abs_j),
                fmt17(s.w1),
                fmt17(s.split.plus),
                fmt17(s.split.minus),
                fmt17(s.split.undecided)
            )?;
        }
        Ok(())
    }
}

fn check(name: &str, pass: bool, detail: String) -> crate::asymptotics::Check {
    crate::asymptotics::Check {
        name: name.into(),
        pass,
        detail,
    }
}

/// Weak convergence of a particle run to its two-atom limit.
///
/// The particle tending to `-Ω_∞` (if any) is read off the final state; its
/// mass is the back mass `m` of the limit. Checks: `m < 1/2`, final `W_1`
/// below `tol`, `W_1` nonincreasing over the second half of the run, and
/// `|J(t_end)| = 1 - 2m` within `1e-6`.
pub fn verify_theorem1(traj: &Trajectory, tol: f64) -> Result<Theorem1Report, MeasureError> {
    let omega_inf = traj
        .omega_series()
        .last()
        .cloned()
        .flatten()
        .ok_or_else(|| MeasureError::Inconclusive("|J| vanishes at the end of the run".into()))?;
    let last = traj.last();
    let dots: Vec<f64> = last.points().iter().map(|v| v.dot(omega_inf.coords())).collect();
    let undecided = dots.iter().filter(|d| d.abs() <= CLASSIFY_THRESHOLD).count();
    if undecided > 0 {
        return Err(MeasureError::Inconclusive(format!(
            "{undecided} particles have not settled near ±Ω_∞"
        )));
    }
    let backs: Vec<usize> = (0..dots.len()).filter(|&i| dots[i] < -CLASSIFY_THRESHOLD).collect();
    if backs.len() > 1 {
        return Err(MeasureError::Inconclusive(format!("{} particles end near -Ω_∞", backs.len())));
    }
    let back_index = backs.first().copied();
    let back_mass = back_index.map_or(0.0, |i| last.weights()[i]);

    let mut checks = vec![check(
        "back_mass_below_half",
        back_mass < 0.5,
        format!("m = {back_mass}"),
    )];
    if back_mass >= 0.5 {
        return Ok(Theorem1Report {
            omega_inf,
            back_index,
            back_mass,
            final_abs_j: *traj.abs_j().last().expect("non-empty"),
            final_w1: f64::NAN,
            tolerance: tol,
            w1_rate: estimate_rate(&[]),
            monotone_final_half: false,
            checks,
            pass: false,
            series: Vec::new(),
        });
    }
    let limit = TwoAtomLimit::new(omega_inf.clone(), back_mass)?;
    let series: Vec<MeasureSample> = traj
        .times()
        .iter()
        .zip(traj.states())
        .zip(traj.abs_j())
        .map(|((t, s), a)| MeasureSample {
            t: *t,
            abs_j: a,
            w1: w1_to_two_atom(s, &limit),
            split: mass_split(s, &omega_inf, UNDECIDED_BAND),
        })
        .collect();
    let half = traj.t_end() / 2.0;
    let monotone_final_half = series
        .windows(2)
        .filter(|w| w[0].t >= half)
        .all(|w| w[1].w1 <= w[0].w1 + 1e-14);
    let final_w1 = series.last().expect("non-empty").w1;
    let final_abs_j = series.last().expect("non-empty").abs_j;
    let w1_rate = estimate_rate(&series.iter().map(|s| (s.t, s.w1)).collect::<Vec<_>>());

    checks.push(check(
        "final_w1",
        final_w1 < tol,
        format!("W1 = {final_w1:.3e} vs tolerance {tol:.1e}"),
    ));
    checks.push(check(
        "monotone_final_half",
        monotone_final_half,
        "W1 nonincreasing over the second half".into(),
    ));
    let expected = 1.0 - 2.0 * back_mass;
    checks.push(check(
        "abs_j_limit",
        (final_abs_j - expected).abs() <= 1e-6,
        format!("|J| = {final_abs_j:.12} vs 1 - 2m = {expected:.12}"),
    ));
    let pass = checks.iter().all(|c| c.pass);
    Ok(Theorem1Report {
        omega_inf,
        back_index,
        back_mass,
        final_abs_j,
        final_w1,
        tolerance: tol,
        w1_rate,
        monotone_final_half,
        checks,
        pass,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{integrate, mean_velocity};

    fn e(n: usize, k: usize) -> UnitVector {
        UnitVector::basis(n, k).unwrap()
    }

    #[test]
    fn pure_atoms() {
        let spec = MeasureSpec::new(2, None, vec![Atom { point: e(2, 0), mass: 1.0 }]).unwrap();
        let cfg = sample(&spec, 0, 1).unwrap();
        assert_eq!(cfg.len(), 1);
        assert_eq!(cfg.weights(), &[1.0]);
        let spec = MeasureSpec::new(
            2,
            None,
            vec![
                Atom { point: e(2, 0).neg(), mass: 0.25 },
                Atom { point: e(2, 0), mass: 0.75 },
            ],
        )
        .unwrap();
        let cfg = sample(&spec, 0, 1).unwrap();
        assert_eq!(mean_velocity(&cfg), vec![0.5, 0.0]);
    }

    #[test]
    fn spec_validation() {
        assert!(MeasureSpec::new(2, None, vec![Atom { point: e(2, 0), mass: 0.5 }]).is_err());
        let dup = vec![Atom { point: e(2, 0), mass: 0.5 }, Atom { point: e(2, 0), mass: 0.5 }];
        assert!(MeasureSpec::new(2, None, dup).is_err());
        let d = DensitySpec::Tilted { beta: 2.0, axis: e(3, 2) };
        assert!(MeasureSpec::new(3, Some(d), vec![]).is_err());
    }

    #[test]
    fn tilted_sample_moment() {
        let beta = 0.5;
        let spec = MeasureSpec::new(3, Some(DensitySpec::Tilted { beta, axis: e(3, 2) }), vec![]).unwrap();
        let count = 10_000;
        let cfg = sample(&spec, count, 42).unwrap();
        let j = mean_velocity(&cfg);
        assert!((j[2] - beta / 3.0).abs() < 3.0 / (count as f64).sqrt());
        let again = sample(&spec, count, 42).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn envelope_violation() {
        let d = DensitySpec::Rejection {
            density: Arc::new(|v: &[f64]| 1.0 + v[0]),
            envelope: 1.5,
        };
        let spec = MeasureSpec::new(2, Some(d), vec![]).unwrap();
        assert!(matches!(sample(&spec, 200, 3), Err(MeasureError::EnvelopeViolated { .. })));
    }

    #[test]
    fn w1_examples() {
        let cfg = WeightedConfiguration::new(vec![1.0], vec![e(3, 0)]).unwrap();
        let l0 = TwoAtomLimit::new(e(3, 0), 0.0).unwrap();
        assert_eq!(w1_to_two_atom(&cfg, &l0), 0.0);
        let l1 = TwoAtomLimit::new(e(3, 0), 0.25).unwrap();
        assert!((w1_to_two_atom(&cfg, &l1) - 0.5).abs() < 1e-15);
        assert!(TwoAtomLimit::new(e(3, 0), 0.5).is_err());
    }

    #[test]
    fn split_examples() {
        let cfg = WeightedConfiguration::new(vec![0.25, 0.75], vec![e(2, 0).neg(), e(2, 0)]).unwrap();
        let s = mass_split(&cfg, &e(2, 0), UNDECIDED_BAND);
        assert_eq!((s.plus, s.minus, s.undecided), (0.75, 0.25, 0.0));
        let cloud = WeightedConfiguration::uniform(vec![e(3, 0), e(3, 1), e(3, 2).neg()]).unwrap();
        let s = mass_split(&cloud, &e(3, 0), UNDECIDED_BAND);
        assert!(s.undecided > 0.0);
        assert!((s.plus + s.minus + s.undecided - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_pair_limit() {
        let cfg = WeightedConfiguration::new(vec![0.25, 0.75], vec![e(2, 0).neg(), e(2, 0)]).unwrap();
        let traj = integrate(&cfg, 5.0, 1e-3, true).unwrap();
        let rep = verify_theorem1(&traj, 1e-12).unwrap();
        assert_eq!(rep.back_index, Some(0));
        assert!(rep.series.iter().all(|s| s.w1 == 0.0));
        assert!(rep.pass, "{:?}", rep.checks);
    }
}
