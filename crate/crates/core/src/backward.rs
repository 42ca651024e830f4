//! The single-vector flow `dv/dt = P_{v⊥} J(t)` in a prescribed field, and the
//! unique starting point whose forward orbit tends to `-Ω_∞`.
//!
//! Near `-Ω_∞` two orbits separate at rate `|J|`, so in backward time every
//! orbit ending at `-Ω_∞` is attracted to the same one. Shooting backward from
//! `-Ω_∞` at later and later times `T_k` therefore converges to that point.

use serde::Serialize;
use thiserror::Error;

use crate::particles::{Trajectory, WeightedConfiguration};
use crate::sphere::{self, chord_distance, SphereError, UnitVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackwardError {
    #[error("time {t} lies outside the field range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("shooting did not converge before t = {end} (last increment {last:e}); extend the run")]
    NotConverged { end: f64, last: f64, increments: Vec<f64> },
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

/// A time-dependent driving vector `J(t)`.
pub trait AlignmentField {
    fn value(&self, t: f64) -> Vec<f64>;
    /// Closed interval on which [`value`](Self::value) is defined.
    fn range(&self) -> (f64, f64);
    fn dim(&self) -> usize;

    /// `|J|` at the end of the range, the asymptotic alignment strength.
    fn terminal_strength(&self) -> f64 {
        sphere::norm(&self.value(self.range().1))
    }
}

/// Sampled field with piecewise-cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRecord {
    times: Vec<f64>,
    j_values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl FieldRecord {
    /// Samples with slopes from finite differences.
    pub fn new(times: Vec<f64>, j_values: Vec<Vec<f64>>) -> Result<Self, BackwardError> {
        validate(&times, &j_values)?;
        let k = times.len();
        let slopes = (0..k)
            .map(|i| {
                let (a, b) = match i {
                    0 => (0, 1.min(k - 1)),
                    i if i == k - 1 => (i - 1, i),
                    i => (i - 1, i + 1),
                };
                if a == b {
                    return vec![0.0; j_values[i].len()];
                }
                let h = times[b] - times[a];
                j_values[b].iter().zip(&j_values[a]).map(|(x, y)| (x - y) / h).collect()
            })
            .collect();
        Ok(Self {
            times,
            j_values,
            slopes,
        })
    }

    /// Field of a particle run, with the exact slopes `dJ/dt = Σ m_i P_{v_i⊥} J`.
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self, BackwardError> {
        let times = traj.times().to_vec();
        let j_values = traj.j_series().to_vec();
        validate(&times, &j_values)?;
        let slopes = traj.states().iter().zip(&j_values).map(|(s, j)| field_slope(s, j)).collect();
        Ok(Self {
            times,
            j_values,
            slopes,
        })
    }

    /// `J(t) ≡ j` on `[0, t_end]`.
    pub fn constant(j: Vec<f64>, t_end: f64) -> Result<Self, BackwardError> {
        let zero = vec![0.0; j.len()];
        let times = vec![0.0, t_end];
        let j_values = vec![j.clone(), j];
        validate(&times, &j_values)?;
        Ok(Self {
            times,
            j_values,
            slopes: vec![zero.clone(), zero],
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn j_values(&self) -> &[Vec<f64>] {
        &self.j_values
    }
}

fn field_slope(state: &WeightedConfiguration, j: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; j.len()];
    for (m, v) in state.weights().iter().zip(state.points()) {
        let vj = v.dot(j);
        for (o, (jk, vk)) in out.iter_mut().zip(j.iter().zip(v.coords())) {
            *o += m * (jk - vj * vk);
        }
    }
    out
}

fn validate(times: &[f64], j_values: &[Vec<f64>]) -> Result<(), BackwardError> {
    if times.len() < 2 || times.len() != j_values.len() {
        return Err(BackwardError::InvalidField("need at least two samples, one J per time".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BackwardError::InvalidField("times must increase strictly".into()));
    }
    let n = j_values[0].len();
    if n < 2 || j_values.iter().any(|j| j.len() != n) {
        return Err(BackwardError::InvalidField("J samples must share one dimension ≥ 2".into()));
    }
    let norms: Vec<f64> = j_values.iter().map(|j| sphere::norm(j)).collect();
    if let Some(k) = norms.windows(2).position(|w| w[1] < w[0] - 1e-9) {
        return Err(BackwardError::InvalidField(format!(
            "|J| decreases between t = {} and t = {}",
            times[k],
            times[k + 1]
        )));
    }
    if norms.iter().any(|a| !(*a <= 1.0 + 1e-12)) {
        return Err(BackwardError::InvalidField("|J| exceeds 1".into()));
    }
    Ok(())
}

impl AlignmentField for FieldRecord {
    fn value(&self, t: f64) -> Vec<f64> {
        let last = self.times.len() - 1;
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p => (p - 1).min(last - 1),
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (0..self.j_values[k].len())
            .map(|i| {
                h00 * self.j_values[k][i]
                    + h10 * h * self.slopes[k][i]
                    + h01 * self.j_values[k + 1][i]
                    + h11 * h * self.slopes[k + 1][i]
            })
            .collect()
    }

    fn range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("non-empty"))
    }

    fn dim(&self) -> usize {
        self.j_values[0].len()
    }
}

/// Default step of the single-vector integrator.
pub const FLOW_DT: f64 = 1e-3;

fn check_range<F: AlignmentField + ?Sized>(field: &F, t: f64) -> Result<(), BackwardError> {
    let (start, end) = field.range();
    let slack = 1e-12 * (1.0 + end.abs());
    if t < start - slack || t > end + slack {
        return Err(BackwardError::OutOfRange { t, start, end });
    }
    Ok(())
}

fn velocity(j: &[f64], v: &[f64]) -> Vec<f64> {
    let vj = sphere::dot(v, j);
    j.iter().zip(v).map(|(a, b)| a - vj * b).collect()
}

fn rk4<F: AlignmentField + ?Sized>(field: &F, v: &mut Vec<f64>, t: f64, h: f64) {
    let k1 = velocity(&field.value(t), v);
    let y: Vec<f64> = v.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let jm = field.value(t + 0.5 * h);
    let k2 = velocity(&jm, &y);
    let y: Vec<f64> = v.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = velocity(&jm, &y);
    let y: Vec<f64> = v.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = velocity(&field.value(t + h), &y);
    for i in 0..v.len() {
        v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let r = sphere::norm(v);
    v.iter_mut().for_each(|x| *x /= r);
}

/// Flows `v0` from `t0` to `t1` (backward when `t1 < t0`) with the default step.
pub fn flow_single<F: AlignmentField + ?Sized>(
    field: &F,
    v0: &UnitVector,
    t0: f64,
    t1: f64,
) -> Result<UnitVector, BackwardError> {
    flow_single_with(field, v0, t0, t1, FLOW_DT)
}

/// [`flow_single`] with an explicit step size.
pub fn flow_single_with<F: AlignmentField + ?Sized>(
    field: &F,
    v0: &UnitVector,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<UnitVector, BackwardError> {
    Ok(flow_path(field, v0, t0, t1, dt, usize::MAX)?
        .pop()
        .expect("path holds the endpoint")
        .1)
}

/// Orbit of `v0` from `t0` to `t1`, recorded every `every` steps and at the end.
pub fn flow_path<F: AlignmentField + ?Sized>(
    field: &F,
    v0: &UnitVector,
    t0: f64,
    t1: f64,
    dt: f64,
    every: usize,
) -> Result<Vec<(f64, UnitVector)>, BackwardError> {
    if v0.dim() != field.dim() {
        return Err(SphereError::DimensionMismatch {
            expected: field.dim(),
            found: v0.dim(),
        }
        .into());
    }
    check_range(field, t0)?;
    check_range(field, t1)?;
    if !(dt > 0.0) {
        return Err(BackwardError::InvalidField(format!("step {dt}")));
    }
    let span = t1 - t0;
    let steps = (span.abs() / dt).ceil() as usize;
    let mut path = vec![(t0, v0.clone())];
    if steps == 0 {
        return Ok(path);
    }
    let h = span / steps as f64;
    let mut v = v0.coords().to_vec();
    for k in 0..steps {
        rk4(field, &mut v, t0 + k as f64 * h, h);
        if (k + 1) % every == 0 || k + 1 == steps {
            path.push((t0 + (k + 1) as f64 * h, UnitVector::from_unit_unchecked(v.clone())));
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingOptions {
    /// `T_0` is chosen so that `e^{-λ T_0}` is below this.
    pub t0_decay: f64,
    pub step: f64,
    pub tol: f64,
    pub min_shots: usize,
    pub dt: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            t0_decay: 1e-3,
            step: 5.0,
            tol: 1e-10,
            min_shots: 3,
            dt: 2.5e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shooting {
    pub v_back: UnitVector,
    pub shot_times: Vec<f64>,
    /// `|w_k - w_{k-1}|` for consecutive shots.
    pub increments: Vec<f64>,
    /// Ratios of consecutive increments.
    pub contraction: Vec<f64>,
}

/// Backward shooting from `-Ω_∞` at `T_k = T_0 + k·step`.
pub fn compute_vback<F: AlignmentField + ?Sized>(
    field: &F,
    omega_inf: &UnitVector,
    opts: &ShootingOptions,
) -> Result<Shooting, BackwardError> {
    let lambda = field.terminal_strength();
    let (start, end) = field.range();
    if !(lambda > 0.0) {
        return Err(BackwardError::InvalidField("terminal |J| is zero".into()));
    }
    let t0 = start + (1.0 / opts.t0_decay).ln() / lambda;
    let target = omega_inf.neg();
    let mut shot_times = Vec::new();
    let mut shots: Vec<UnitVector> = Vec::new();
    let mut increments = Vec::new();
    let mut k = 0;
    loop {
        let t_k = t0 + k as f64 * opts.step;
        if t_k > end + 1e-12 * (1.0 + end.abs()) {
            return Err(BackwardError::NotConverged {
                end,
                last: increments.last().copied().unwrap_or(f64::INFINITY),
                increments,
            });
        }
        let w = flow_single_with(field, &target, t_k, start, opts.dt)?;
        if let Some(prev) = shots.last() {
            increments.push(chord_distance(prev, &w)?);
        }
        shots.push(w);
        shot_times.push(t_k);
        if shots.len() >= opts.min_shots && increments.last().is_some_and(|d| *d < opts.tol) {
            break;
        }
        k += 1;
    }
    let contraction = increments
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    Ok(Shooting {
        v_back: shots.pop().expect("at least one shot"),
        shot_times,
        increments,
        contraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacedRun {
    pub direction: Vec<f64>,
    pub sign: f64,
    pub final_dot: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VbackVerification {
    pub t_end: f64,
    pub delta: f64,
    /// `v(t_end)·Ω_∞` for the orbit of `v_back`.
    pub back_final_dot: f64,
    pub back_pass: bool,
    pub displaced: Vec<DisplacedRun>,
    /// Smallest final `v·Ω_∞` over the mesh circle around `v_back`.
    pub mesh_min_dot: f64,
    pub mesh_pass: bool,
    pub pass: bool,
    /// Orbit of `v_back` (every 1000 steps) when it fails to stay near `-Ω_∞`.
    pub offending: Option<Vec<(f64, Vec<f64>)>>,
}

/// Displacement used for the instability check.
pub const DISPLACEMENT: f64 = 1e-6;
/// Radius and size of the isolation mesh.
pub const MESH_RADIUS: f64 = 1e-4;
pub const MESH_POINTS: usize = 32;

/// Two orthonormal tangent directions at `v` (one when `n = 2`).
fn tangent_frame(v: &UnitVector) -> Vec<Vec<f64>> {
    let n = v.dim();
    let mut frame: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let mut u = sphere::project_tangent(v, &e).expect("dimension").vec;
        for f in &frame {
            let c = sphere::dot(&u, f);
            u.iter_mut().zip(f).for_each(|(x, y)| *x -= c * y);
        }
        let r = sphere::norm(&u);
        if r > 0.3 {
            frame.push(u.iter().map(|x| x / r).collect());
        }
        if frame.len() == 2.min(n - 1) {
            break;
        }
    }
    frame
}

fn displaced(v: &UnitVector, dir: &[f64], eps: f64) -> UnitVector {
    let w: Vec<f64> = v.coords().iter().zip(dir).map(|(a, d)| a + eps * d).collect();
    sphere::renormalize(&w).expect("nonzero")
}

/// Forward checks: the orbit of `v_back` ends at `-Ω_∞`; nearby orbits end at `Ω_∞`.
pub fn verify_vback<F: AlignmentField + ?Sized>(
    field: &F,
    v_back: &UnitVector,
    omega_inf: &UnitVector,
    t_end: f64,
    dt: f64,
) -> Result<VbackVerification, BackwardError> {
    let start = field.range().0;
    let path = flow_path(field, v_back, start, t_end, dt, 1000)?;
    let back_final_dot = path.last().expect("endpoint").1.dot(omega_inf.coords());
    let back_pass = back_final_dot < -1.0 + 1e-6;

    let frame = tangent_frame(v_back);
    let mut runs = Vec::new();
    for dir in &frame {
        for sign in [1.0, -1.0] {
            let v0 = displaced(v_back, dir, sign * DISPLACEMENT);
            let end = flow_single_with(field, &v0, start, t_end, dt)?;
            let final_dot = end.dot(omega_inf.coords());
            runs.push(DisplacedRun {
                direction: dir.clone(),
                sign,
                final_dot,
                pass: final_dot > 1.0 - 1e-6,
            });
        }
    }

    let mut mesh_min_dot = f64::INFINITY;
    for k in 0..MESH_POINTS {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / MESH_POINTS as f64;
        let dir: Vec<f64> = if frame.len() == 1 {
            frame[0].iter().map(|x| x * theta.cos().signum()).collect()
        } else {
            frame[0]
                .iter()
                .zip(&frame[1])
                .map(|(a, b)| a * theta.cos() + b * theta.sin())
                .collect()
        };
        let end = flow_single_with(field, &displaced(v_back, &dir, MESH_RADIUS), start, t_end, dt)?;
        mesh_min_dot = mesh_min_dot.min(end.dot(omega_inf.coords()));
    }
    let mesh_pass = mesh_min_dot > 0.0;
    let pass = back_pass && mesh_pass && runs.iter().all(|r| r.pass);
    Ok(VbackVerification {
        t_end,
        delta: DISPLACEMENT,
        back_final_dot,
        back_pass,
        displaced: runs,
        mesh_min_dot,
        mesh_pass,
        pass,
        offending: (!back_pass)
            .then(|| path.iter().map(|(t, v)| (*t, v.coords().to_vec())).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::integrate;

    fn e(n: usize, k: usize) -> UnitVector {
        UnitVector::basis(n, k).unwrap()
    }

    #[test]
    fn constant_field_fixed_points() {
        let field = FieldRecord::constant(vec![0.5, 0.0, 0.0], 10.0).unwrap();
        let a = flow_single(&field, &e(3, 0), 0.0, 10.0).unwrap();
        assert!(chord_distance(&a, &e(3, 0)).unwrap() < 1e-15);
        let b = flow_single(&field, &e(3, 0).neg(), 0.0, 10.0).unwrap();
        assert!(chord_distance(&b, &e(3, 0).neg()).unwrap() < 1e-15);
    }

    #[test]
    fn constant_field_closed_form() {
        let field = FieldRecord::constant(vec![1.0, 0.0], 3.0).unwrap();
        let phi0: f64 = 1.1;
        let v0 = UnitVector::new(vec![phi0.cos(), phi0.sin()]).unwrap();
        for t in [0.5, 1.0, 3.0] {
            let v = flow_single(&field, &v0, 0.0, t).unwrap();
            let phi = v.coords()[1].atan2(v.coords()[0]);
            assert!(((0.5 * phi).tan() - (0.5 * phi0).tan() * (-t).exp()).abs() < 1e-8);
        }
        let back = flow_single(&field, &flow_single(&field, &v0, 0.0, 3.0).unwrap(), 3.0, 0.0).unwrap();
        assert!(chord_distance(&back, &v0).unwrap() < 1e-10);
    }

    #[test]
    fn out_of_range() {
        let field = FieldRecord::constant(vec![1.0, 0.0], 3.0).unwrap();
        assert!(matches!(
            flow_single(&field, &e(2, 0), 0.0, 4.0),
            Err(BackwardError::OutOfRange { .. })
        ));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let times: Vec<f64> = (0..6).map(|k| k as f64 * 0.5).collect();
        let j: Vec<Vec<f64>> = times.iter().map(|t| vec![0.1 + 0.01 * t * t * t, 0.0]).collect();
        let mut rec = FieldRecord::new(times.clone(), j).unwrap();
        rec.slopes = times.iter().map(|t| vec![0.03 * t * t, 0.0]).collect();
        let t = 1.37;
        assert!((rec.value(t)[0] - (0.1 + 0.01 * t * t * t)).abs() < 1e-15);
    }

    #[test]
    fn rejects_decreasing_field() {
        let err = FieldRecord::new(vec![0.0, 1.0], vec![vec![0.5, 0.0], vec![0.4, 0.0]]).unwrap_err();
        assert!(matches!(err, BackwardError::InvalidField(_)));
    }

    #[test]
    fn constant_field_vback() {
        let field = FieldRecord::constant(vec![0.5, 0.0, 0.0], 60.0).unwrap();
        let s = compute_vback(&field, &e(3, 0), &ShootingOptions::default()).unwrap();
        assert!(chord_distance(&s.v_back, &e(3, 0).neg()).unwrap() < 1e-14);
        let rep = verify_vback(&field, &s.v_back, &e(3, 0), 45.0, 1e-3).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn displaced_start_escapes() {
        let field = FieldRecord::constant(vec![1.0, 0.0], 30.0).unwrap();
        let v0 = displaced(&e(2, 0).neg(), &[0.0, 1.0], 1e-6);
        let end = flow_single(&field, &v0, 0.0, 30.0).unwrap();
        assert!(end.coords()[0] > 1.0 - 1e-6);
    }

    #[test]
    fn antipodal_pair_vback_is_back_particle() {
        let cfg = WeightedConfiguration::new(vec![0.25, 0.75], vec![e(2, 0).neg(), e(2, 0)]).unwrap();
        let traj = integrate(&cfg, 60.0, 1e-3, true).unwrap();
        let field = FieldRecord::from_trajectory(&traj).unwrap();
        let s = compute_vback(&field, &e(2, 0), &ShootingOptions::default()).unwrap();
        assert!(chord_distance(&s.v_back, &cfg.points()[0]).unwrap() < 1e-12);
    }
}
