//! The weighted particle system `dv_i/dt = P_{v_i⊥} J`, `J = Σ m_i v_i`.

use std::io::Write;

use thiserror::Error;

use crate::sphere::{self, chord_distance, SphereError, UnitVector};

/// Tolerance on `Σ m_i = 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Below this `|J|` the order parameter `Ω = J/|J|` is undefined.
pub const DEGENERATE_J: f64 = 1e-12;

/// Default integrator step.
pub const DEFAULT_DT: f64 = 1e-3;

/// Default snapshot budget per trajectory.
pub const MAX_SNAPSHOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParticleError {
    #[error("configuration has no particles")]
    Empty,
    #[error("{weights} weights for {points} points")]
    LengthMismatch { weights: usize, points: usize },
    #[error("weight m_{index} = {value} is not positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    MassNotNormalized(f64),
    #[error(
        "particles {i} and {j} start at the same point (distance {distance:e}); \
         merge them into one particle carrying the summed mass"
    )]
    CoincidentParticles { i: usize, j: usize, distance: f64 },
    #[error("|J| = {0:e} is degenerate; the order parameter is undefined")]
    DegenerateJ(f64),
    #[error("invalid integration settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

/// Masses `m_i > 0` summing to one and positions `v_i` on a common sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedConfiguration {
    weights: Vec<f64>,
    points: Vec<UnitVector>,
}

impl WeightedConfiguration {
    /// Validates masses and requires pairwise distinct starting points.
    pub fn new(weights: Vec<f64>, points: Vec<UnitVector>) -> Result<Self, ParticleError> {
        let cfg = Self::with_coincident(weights, points)?;
        for i in 0..cfg.len() {
            for j in (i + 1)..cfg.len() {
                let distance = chord_distance(&cfg.points[i], &cfg.points[j])?;
                if distance <= 1e-12 {
                    return Err(ParticleError::CoincidentParticles { i, j, distance });
                }
            }
        }
        Ok(cfg)
    }

    /// Same validation as [`new`](Self::new) except the distinctness check.
    ///
    /// Snapshots of converged runs legitimately contain particles closer than
    /// any fixed threshold.
    pub fn with_coincident(
        weights: Vec<f64>,
        points: Vec<UnitVector>,
    ) -> Result<Self, ParticleError> {
        if points.is_empty() {
            return Err(ParticleError::Empty);
        }
        if weights.len() != points.len() {
            return Err(ParticleError::LengthMismatch {
                weights: weights.len(),
                points: points.len(),
            });
        }
        let n = points[0].dim();
        for p in &points {
            if p.dim() != n {
                return Err(SphereError::DimensionMismatch {
                    expected: n,
                    found: p.dim(),
                }
                .into());
            }
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ParticleError::NonPositiveWeight { index, value });
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(ParticleError::MassNotNormalized(total));
        }
        Ok(Self { weights, points })
    }

    /// Equal masses `1/N`.
    pub fn uniform(points: Vec<UnitVector>) -> Result<Self, ParticleError> {
        let w = 1.0 / points.len().max(1) as f64;
        Self::new(vec![w; points.len()], points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    /// Applies `perm` (new index `k` takes old particle `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            weights: perm.iter().map(|&k| self.weights[k]).collect(),
            points: perm.iter().map(|&k| self.points[k].clone()).collect(),
        }
    }

    /// Applies an orthogonal matrix to every position.
    pub fn rotated(&self, rot: &[Vec<f64>]) -> Self {
        Self {
            weights: self.weights.clone(),
            points: self
                .points
                .iter()
                .map(|p| UnitVector::from_unit_unchecked(sphere::apply_matrix(rot, p.coords())))
                .collect(),
        }
    }
}

/// `J = Σ m_i v_i`.
pub fn mean_velocity(cfg: &WeightedConfiguration) -> Vec<f64> {
    weighted_sum(&cfg.weights, cfg.points.iter().map(|p| p.coords()), cfg.dim())
}

fn weighted_sum<'a>(weights: &[f64], points: impl Iterator<Item = &'a [f64]>, n: usize) -> Vec<f64> {
    let mut j = vec![0.0; n];
    for (m, v) in weights.iter().zip(points) {
        for (jk, vk) in j.iter_mut().zip(v) {
            *jk += m * vk;
        }
    }
    j
}

/// `Ω = J/|J|`.
pub fn order_parameter(cfg: &WeightedConfiguration) -> Result<UnitVector, ParticleError> {
    direction(&mean_velocity(cfg))
}

pub(crate) fn direction(j: &[f64]) -> Result<UnitVector, ParticleError> {
    let a = sphere::norm(j);
    if a <= DEGENERATE_J {
        return Err(ParticleError::DegenerateJ(a));
    }
    Ok(UnitVector::from_unit_unchecked(j.iter().map(|x| x / a).collect()))
}

/// Interaction energy `E = 1 - |J|²`.
pub fn energy(cfg: &WeightedConfiguration) -> f64 {
    let j = mean_velocity(cfg);
    1.0 - sphere::dot(&j, &j)
}

/// The pairwise form `½ Σ_{i,j} m_i m_j |v_i - v_j|²` of [`energy`].
pub fn pairwise_energy(cfg: &WeightedConfiguration) -> f64 {
    let mut e = 0.0;
    for i in 0..cfg.len() {
        for j in (i + 1)..cfg.len() {
            let d = chord_distance(&cfg.points[i], &cfg.points[j]).expect("same dimension");
            e += cfg.weights[i] * cfg.weights[j] * d * d;
        }
    }
    e
}

/// Velocities `P_{v_i⊥} J` of every particle.
pub fn rhs(cfg: &WeightedConfiguration) -> Vec<sphere::TangentVector> {
    let j = mean_velocity(cfg);
    cfg.points
        .iter()
        .map(|v| sphere::project_tangent(v, &j).expect("same dimension"))
        .collect()
}

/// `γ = -J·(v + w)`: `d/dt |v - w|² = γ |v - w|²` for two solutions of the
/// same single-vector flow.
pub fn repulsion_coefficient(j: &[f64], v: &UnitVector, w: &UnitVector) -> f64 {
    -(v.dot(j) + w.dot(j))
}

/// Fixed-step settings for [`integrate_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationSettings {
    pub t_end: f64,
    pub dt: f64,
    pub renormalize: bool,
    /// Store every `stride`-th step; `None` picks the smallest stride that
    /// keeps at most [`MAX_SNAPSHOTS`] snapshots.
    pub stride: Option<usize>,
}

impl IntegrationSettings {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            renormalize: true,
            stride: None,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = Some(stride);
        self
    }

    fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    fn effective_stride(&self) -> usize {
        self.stride
            .unwrap_or_else(|| self.steps().div_ceil(MAX_SNAPSHOTS))
            .max(1)
    }

    fn validate(&self) -> Result<(), ParticleError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ParticleError::InvalidSettings(format!("dt = {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(ParticleError::InvalidSettings(format!("t_end = {}", self.t_end)));
        }
        Ok(())
    }
}

/// Time-stamped record of a particle run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<WeightedConfiguration>,
    j_series: Vec<Vec<f64>>,
    omega_series: Vec<Option<UnitVector>>,
}

impl Trajectory {
    /// Builds a trajectory from snapshots; times must start at zero and increase.
    pub fn from_snapshots(
        times: Vec<f64>,
        states: Vec<WeightedConfiguration>,
    ) -> Result<Self, ParticleError> {
        if times.is_empty() || times.len() != states.len() {
            return Err(ParticleError::InvalidSettings(
                "trajectory needs one state per time".into(),
            ));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ParticleError::InvalidSettings(
                "trajectory times must start at 0 and increase strictly".into(),
            ));
        }
        let j_series: Vec<Vec<f64>> = states.iter().map(mean_velocity).collect();
        let omega_series = j_series.iter().map(|j| direction(j).ok()).collect();
        Ok(Self {
            times,
            states,
            j_series,
            omega_series,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[WeightedConfiguration] {
        &self.states
    }

    pub fn j_series(&self) -> &[Vec<f64>] {
        &self.j_series
    }

    /// `Ω(t_k)`, `None` where `|J| ≤ 1e-12`.
    pub fn omega_series(&self) -> &[Option<UnitVector>] {
        &self.omega_series
    }

    pub fn abs_j(&self) -> Vec<f64> {
        self.j_series.iter().map(|j| sphere::norm(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> &WeightedConfiguration {
        &self.states[0]
    }

    pub fn last(&self) -> &WeightedConfiguration {
        self.states.last().expect("non-empty trajectory")
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    /// Writes `t, J_1..J_n, absJ, E, v_{i,1}..v_{i,n}` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.states[0].dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|k| format!("J_{k}")));
        header.push("absJ".into());
        header.push("E".into());
        for i in 1..=self.states[0].len() {
            header.extend((1..=n).map(|k| format!("v_{i}_{k}")));
        }
        writeln!(out, "{}", header.join(","))?;
        for ((t, state), j) in self.times.iter().zip(&self.states).zip(&self.j_series) {
            let mut row = vec![fmt17(*t)];
            row.extend(j.iter().map(|x| fmt17(*x)));
            row.push(fmt17(sphere::norm(j)));
            row.push(fmt17(1.0 - sphere::dot(j, j)));
            for p in state.points() {
                row.extend(p.coords().iter().map(|x| fmt17(*x)));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Integrates with default stride and the given step.
pub fn integrate(
    cfg0: &WeightedConfiguration,
    t_end: f64,
    dt: f64,
    renormalize: bool,
) -> Result<Trajectory, ParticleError> {
    let settings = IntegrationSettings {
        renormalize,
        ..IntegrationSettings::new(t_end, dt)
    };
    integrate_with(cfg0, &settings)
}

/// Classical fourth-order Runge–Kutta with per-step renormalization.
pub fn integrate_with(
    cfg0: &WeightedConfiguration,
    settings: &IntegrationSettings,
) -> Result<Trajectory, ParticleError> {
    settings.validate()?;
    let steps = settings.steps();
    let stride = settings.effective_stride();
    let mut state = FlatState::from_config(cfg0);
    let mut times = vec![0.0];
    let mut states = vec![cfg0.clone()];
    for k in 1..=steps {
        state.rk4_step(settings.dt, settings.renormalize);
        if k % stride == 0 || k == steps {
            times.push(k as f64 * settings.dt);
            states.push(state.to_config(&cfg0.weights));
        }
    }
    Trajectory::from_snapshots(times, states)
}

/// Positions packed as one `N × n` buffer for the stepping loop.
pub(crate) struct FlatState {
    pub(crate) n: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) x: Vec<f64>,
    scratch: [Vec<f64>; 5],
}

impl FlatState {
    pub(crate) fn from_config(cfg: &WeightedConfiguration) -> Self {
        let n = cfg.dim();
        let x: Vec<f64> = cfg.points.iter().flat_map(|p| p.coords().iter().copied()).collect();
        let len = x.len();
        Self {
            n,
            weights: cfg.weights.clone(),
            x,
            scratch: std::array::from_fn(|_| vec![0.0; len]),
        }
    }

    pub(crate) fn to_config(&self, weights: &[f64]) -> WeightedConfiguration {
        WeightedConfiguration {
            weights: weights.to_vec(),
            points: self
                .x
                .chunks(self.n)
                .map(|c| UnitVector::from_unit_unchecked(c.to_vec()))
                .collect(),
        }
    }

    fn velocity(n: usize, weights: &[f64], x: &[f64], out: &mut [f64]) {
        let j = weighted_sum(weights, x.chunks(n), n);
        for (v, o) in x.chunks(n).zip(out.chunks_mut(n)) {
            let vj = sphere::dot(v, &j);
            for k in 0..n {
                o[k] = j[k] - vj * v[k];
            }
        }
    }

    /// One RK4 step of size `h` (negative `h` integrates backward).
    pub(crate) fn rk4_step(&mut self, h: f64, renormalize: bool) {
        let n = self.n;
        let [k1, k2, k3, k4, tmp] = &mut self.scratch;
        Self::velocity(n, &self.weights, &self.x, k1);
        for i in 0..self.x.len() {
            tmp[i] = self.x[i] + 0.5 * h * k1[i];
        }
        Self::velocity(n, &self.weights, tmp, k2);
        for i in 0..self.x.len() {
            tmp[i] = self.x[i] + 0.5 * h * k2[i];
        }
        Self::velocity(n, &self.weights, tmp, k3);
        for i in 0..self.x.len() {
            tmp[i] = self.x[i] + h * k3[i];
        }
        Self::velocity(n, &self.weights, tmp, k4);
        for i in 0..self.x.len() {
            self.x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if renormalize {
            for v in self.x.chunks_mut(n) {
                let r = sphere::norm(v);
                v.iter_mut().for_each(|c| *c /= r);
            }
        }
    }
}
