//! Config-driven experiment runners behind the `sphere-align` binary.
//!
//! Each runner parses a strict JSON document, runs one verification and
//! returns its output files in memory. Files are written only when the run
//! finishes, each through a temporary file and a rename, so a failed run
//! leaves nothing behind.
//!
//! Exit codes: 0 all checks pass, 2 invalid config or inadmissible input,
//! 3 inconclusive or non-converged numerics, 4 completed with a failed
//! check, 1 output I/O failure.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{verify_theorem2, AnalysisError};
use crate::backward::{compute_vback, verify_vback, AlignmentField, BackwardError, FieldRecord, ShootingOptions, VbackVerification};
use crate::kinetic::{
    self, one_minus_alpha, slow_decay_density, solve_lambda, w1_to_dirac, w2sq_to_dirac, DecayFn, KineticError,
    RadialDensity,
};
use crate::measure::{self, verify_theorem1, Atom, DensitySpec, MeasureError, MeasureSpec};
use crate::one_back::{random_offsets, synthesize, OneBackSpec};
use crate::particles::{fmt17, integrate_with, IntegrationSettings, ParticleError, Trajectory, WeightedConfiguration, DEFAULT_DT};
use crate::sphere::{self, SphereError, UnitVector};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Largest number of stored coordinates per run before snapshots are thinned.
const SNAPSHOT_BUDGET: usize = 4_000_000;
const MAX_STORED_SNAPSHOTS: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Particles,
    Vback,
    Kinetic,
    SlowDecay,
    Measure,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => EXIT_CONFIG,
            ExperimentError::Inconclusive(_) | ExperimentError::Numerical(_) => EXIT_INCONCLUSIVE,
            ExperimentError::Output(_) => EXIT_IO,
        }
    }
}

impl From<ParticleError> for ExperimentError {
    fn from(e: ParticleError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

impl From<SphereError> for ExperimentError {
    fn from(e: SphereError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

impl From<AnalysisError> for ExperimentError {
    fn from(e: AnalysisError) -> Self {
        ExperimentError::Inconclusive(e.to_string())
    }
}

impl From<BackwardError> for ExperimentError {
    fn from(e: BackwardError) -> Self {
        match e {
            BackwardError::NotConverged { .. } => ExperimentError::Inconclusive(e.to_string()),
            _ => ExperimentError::Config(e.to_string()),
        }
    }
}

impl From<KineticError> for ExperimentError {
    fn from(e: KineticError) -> Self {
        match e {
            KineticError::Quadrature(_) => ExperimentError::Numerical(e.to_string()),
            _ => ExperimentError::Config(e.to_string()),
        }
    }
}

impl From<MeasureError> for ExperimentError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Inconclusive(_) => ExperimentError::Inconclusive(e.to_string()),
            MeasureError::Starved => ExperimentError::Numerical(e.to_string()),
            _ => ExperimentError::Config(e.to_string()),
        }
    }
}

/// Result of a completed run: pass flag, human-readable lines, output files.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub summary: Vec<String>,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

// ---------------------------------------------------------------- configs

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_offset_scale() -> f64 {
    0.5
}

/// Initial system shared by the particle, v_back and measure commands.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Inline {
        weights: Vec<f64>,
        points: Vec<Vec<f64>>,
    },
    /// Uniform points; masses equal, or drawn from `[0.5, 1.5]` and normalized.
    Random {
        count: usize,
        dim: usize,
        #[serde(default)]
        random_weights: bool,
    },
    /// Run built backward from a terminal state in which particle
    /// `back_index` sits at `-Ω_∞`; offsets are drawn with `offset_scale`
    /// unless given (in `R^{dim-1}`, one per other particle).
    OneBack {
        weights: Vec<f64>,
        back_index: usize,
        dim: usize,
        #[serde(default = "default_offset_scale")]
        offset_scale: f64,
        #[serde(default)]
        offsets: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        omega_inf: Option<Vec<f64>>,
    },
    /// Empirical measure: atoms plus `count` samples of the density part.
    Sampled {
        dim: usize,
        density: Option<DensityConfig>,
        atoms: Vec<AtomConfig>,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    Uniform,
    /// `1 + β v·axis`; axis defaults to `e_n`.
    Tilted {
        beta: f64,
        #[serde(default)]
        axis: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesConfig {
    pub system: SystemConfig,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub stride: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    /// `J(t) ≡ j` on `[0, t_end]`.
    Constant { j: Vec<f64>, t_end: f64 },
    /// `J(t)` recorded from a particle run.
    System {
        system: SystemConfig,
        t_end: f64,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default)]
        stride: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    pub t0_decay: f64,
    pub step: f64,
    pub tol: f64,
    pub min_shots: usize,
    pub dt: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        let o = ShootingOptions::default();
        Self {
            t0_decay: o.t0_decay,
            step: o.step,
            tol: o.tol,
            min_shots: o.min_shots,
            dt: o.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VbackConfig {
    pub field: FieldConfig,
    /// Defaults to the direction of `J` at the end of the field.
    #[serde(default)]
    pub omega_inf: Option<Vec<f64>>,
    /// Horizon of the forward checks; defaults to `min(end, 22/λ)`.
    #[serde(default)]
    pub verify_t_end: Option<f64>,
    #[serde(default = "default_dt")]
    pub verify_dt: f64,
    #[serde(default)]
    pub shooting: ShootingConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayConfig {
    /// `c e^{-t/τ}`.
    Exp { c: f64, tau: f64 },
    /// Never decays; always rejected.
    Constant { c: f64 },
}

impl DecayConfig {
    fn build(&self) -> Result<DecayFn, ExperimentError> {
        match self {
            DecayConfig::Exp { c, tau } => Ok(DecayFn::Exp { c: *c, tau: *tau }),
            DecayConfig::Constant { c } => Err(ExperimentError::Config(format!(
                "g ≡ {c} does not decrease to 0 and is not admissible"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialConfig {
    Tilted { beta: f64 },
    SlowDecay { g: DecayConfig, eps: f64 },
    Table { r: Vec<f64>, h: Vec<f64> },
}

impl RadialConfig {
    fn build(&self, dim: usize) -> Result<RadialDensity, ExperimentError> {
        Ok(match self {
            RadialConfig::Tilted { beta } => RadialDensity::tilted(dim, *beta)?,
            RadialConfig::SlowDecay { g, eps } => slow_decay_density(g.build()?, *eps, dim)?,
            RadialConfig::Table { r, h } => RadialDensity::table(dim, r.clone(), h.clone())?,
        })
    }

    fn label(&self) -> &'static str {
        match self {
            RadialConfig::Tilted { .. } => "tilted",
            RadialConfig::SlowDecay { .. } => "slow_decay",
            RadialConfig::Table { .. } => "table",
        }
    }
}

fn default_dims() -> Vec<usize> {
    vec![2, 3, 4]
}

fn default_kinetic_t_end() -> f64 {
    30.0
}

fn default_kinetic_dt() -> f64 {
    0.01
}

fn default_every() -> usize {
    10
}

fn default_rate_window() -> [f64; 2] {
    [15.0, 30.0]
}

fn default_max_spread() -> f64 {
    1.15
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticConfig {
    pub density: RadialConfig,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_kinetic_t_end")]
    pub t_end: f64,
    #[serde(default = "default_kinetic_dt")]
    pub dt: f64,
    /// Output every `every`-th grid point.
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "default_rate_window")]
    pub rate_window: [f64; 2],
    /// Largest allowed max/min of each rate ratio over the window.
    #[serde(default = "default_max_spread")]
    pub max_spread: f64,
    /// Defaults to true for the tilted density only.
    #[serde(default)]
    pub check_rates: Option<bool>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_slow_t_end() -> f64 {
    40.0
}

fn default_check_times() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 20.0, 40.0]
}

fn default_slow_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowDecayConfig {
    pub g: DecayConfig,
    pub eps: f64,
    pub dim: usize,
    #[serde(default = "default_slow_t_end")]
    pub t_end: f64,
    #[serde(default = "default_kinetic_dt")]
    pub dt: f64,
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "default_check_times")]
    pub check_times: Vec<f64>,
    #[serde(default = "default_slow_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_measure_tolerance() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub system: SystemConfig,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub stride: Option<usize>,
    /// Bound on the final `W_1` to the two-atom limit.
    #[serde(default = "default_measure_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

// ---------------------------------------------------------------- systems

fn unit_from_config(coords: &[f64], what: &str) -> Result<UnitVector, ExperimentError> {
    let r = sphere::norm(coords);
    if !((r - 1.0).abs() <= 1e-9) {
        return Err(ExperimentError::Config(format!("{what} has norm {r}, expected a unit vector")));
    }
    Ok(UnitVector::new(coords.to_vec())?)
}

fn default_stride(steps: usize, values_per_state: usize) -> usize {
    let budget = (SNAPSHOT_BUDGET / values_per_state.max(1)).clamp(200, MAX_STORED_SNAPSHOTS);
    steps.div_ceil(budget).max(1)
}

fn check_time_grid(t_end: f64, dt: f64) -> Result<usize, ExperimentError> {
    if !(t_end > 0.0 && t_end.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(ExperimentError::Config(format!("t_end = {t_end} and dt = {dt} must be positive")));
    }
    Ok((t_end / dt).round().max(1.0) as usize)
}

fn initial_configuration(system: &SystemConfig, rng: &mut ChaCha8Rng) -> Result<WeightedConfiguration, ExperimentError> {
    match system {
        SystemConfig::Inline { weights, points } => {
            let points = points
                .iter()
                .enumerate()
                .map(|(i, p)| unit_from_config(p, &format!("point {i}")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(WeightedConfiguration::new(weights.clone(), points)?)
        }
        SystemConfig::Random {
            count,
            dim,
            random_weights,
        } => {
            if *count == 0 || *dim < 2 {
                return Err(ExperimentError::Config(format!("random system needs count ≥ 1 and dim ≥ 2")));
            }
            let points: Vec<UnitVector> = (0..*count).map(|_| measure::uniform_point(*dim, rng)).collect();
            if !random_weights {
                return Ok(WeightedConfiguration::uniform(points)?);
            }
            let raw: Vec<f64> = (0..*count).map(|_| rng.random_range(0.5..1.5)).collect();
            let total: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let drift = 1.0 - weights.iter().sum::<f64>();
            weights[count - 1] += drift;
            Ok(WeightedConfiguration::new(weights, points)?)
        }
        SystemConfig::Sampled {
            dim,
            density,
            atoms,
            count,
        } => {
            let density = match density {
                None => None,
                Some(DensityConfig::Uniform) => Some(DensitySpec::Tilted {
                    beta: 0.0,
                    axis: UnitVector::north(*dim)?,
                }),
                Some(DensityConfig::Tilted { beta, axis }) => Some(DensitySpec::Tilted {
                    beta: *beta,
                    axis: match axis {
                        Some(a) => unit_from_config(a, "density axis")?,
                        None => UnitVector::north(*dim)?,
                    },
                }),
            };
            let atoms = atoms
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    Ok(Atom {
                        point: unit_from_config(&a.point, &format!("atom {i}"))?,
                        mass: a.mass,
                    })
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            let spec = MeasureSpec::new(*dim, density, atoms)?;
            Ok(measure::sample(&spec, *count, rng.random())?)
        }
        SystemConfig::OneBack { .. } => unreachable!("one-back systems are synthesized, not integrated"),
    }
}

/// Trajectory of a configured system over `[0, t_end]`.
pub fn run_system(
    system: &SystemConfig,
    t_end: f64,
    dt: f64,
    stride: Option<usize>,
    seed: u64,
) -> Result<Trajectory, ExperimentError> {
    let steps = check_time_grid(t_end, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let SystemConfig::OneBack {
        weights,
        back_index,
        dim,
        offset_scale,
        offsets,
        omega_inf,
    } = system
    {
        if *dim < 2 {
            return Err(ExperimentError::Config(format!("dim = {dim} must be at least 2")));
        }
        if weights.is_empty() {
            return Err(ParticleError::Empty.into());
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > crate::particles::MASS_TOLERANCE {
            return Err(ParticleError::MassNotNormalized(total).into());
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
            return Err(ParticleError::NonPositiveWeight { index, value }.into());
        }
        let offsets = match offsets {
            Some(o) => o.clone(),
            None => random_offsets(weights.len().saturating_sub(1), *dim, *offset_scale, &mut rng),
        };
        let frame = omega_inf.as_ref().map(|o| unit_from_config(o, "omega_inf")).transpose()?;
        let spec = OneBackSpec {
            weights: weights.clone(),
            back_index: *back_index,
            offsets,
            horizon: t_end,
            dt,
            stride: Some(stride.unwrap_or_else(|| default_stride(steps, weights.len() * dim))),
            frame,
        };
        return Ok(synthesize(&spec)?.trajectory);
    }
    let cfg = initial_configuration(system, &mut rng)?;
    let settings = IntegrationSettings::new(t_end, dt)
        .with_stride(stride.unwrap_or_else(|| default_stride(steps, cfg.len() * cfg.dim())));
    Ok(integrate_with(&cfg, &settings)?)
}

// ---------------------------------------------------------------- runners

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

/// Long-time regime, rates and expansion of a particle run.
pub fn run_particles(config: &ParticlesConfig, seed: u64) -> Result<Outcome, ExperimentError> {
    let traj = run_system(&config.system, config.t_end, config.dt, config.stride, seed)?;
    let report = verify_theorem2(&traj)?;
    if report.is_inconclusive() {
        let reason = report
            .checks
            .iter()
            .find(|c| c.name == "classification")
            .map(|c| c.detail.clone())
            .unwrap_or_default();
        return Err(ExperimentError::Inconclusive(reason));
    }
    let mut summary = vec![format!(
        "regime {}{} with lambda = {:.9}",
        report.regime,
        report.i0.map(|i| format!(" (particle {i})")).unwrap_or_default(),
        report.lambda
    )];
    summary.extend(
        report
            .checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail)),
    );
    Ok(Outcome {
        pass: report.pass,
        summary,
        files: vec![
            ("trajectory.csv".into(), csv_bytes(|b| traj.write_csv(b))),
            ("regime_report.json".into(), json_bytes(&report)),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VbackReport {
    pub v_back: Vec<f64>,
    pub omega_inf: Vec<f64>,
    pub lambda: f64,
    pub shot_times: Vec<f64>,
    pub increments: Vec<f64>,
    pub contraction: Vec<f64>,
    /// Each increment is below its predecessor or at roundoff level.
    pub geometric: bool,
    pub verification: VbackVerification,
    pub pass: bool,
}

/// Point flowing to `-Ω_∞` under a configured field, plus forward checks.
pub fn run_vback(config: &VbackConfig, seed: u64) -> Result<Outcome, ExperimentError> {
    let field = match &config.field {
        FieldConfig::Constant { j, t_end } => FieldRecord::constant(j.clone(), *t_end)?,
        FieldConfig::System {
            system,
            t_end,
            dt,
            stride,
        } => FieldRecord::from_trajectory(&run_system(system, *t_end, *dt, *stride, seed)?)?,
    };
    let (start, end) = field.range();
    let omega_inf = match &config.omega_inf {
        Some(o) => unit_from_config(o, "omega_inf")?,
        None => sphere::renormalize(&field.value(end))
            .map_err(|_| ExperimentError::Config("field vanishes at its end; give omega_inf".into()))?,
    };
    let s = &config.shooting;
    let opts = ShootingOptions {
        t0_decay: s.t0_decay,
        step: s.step,
        tol: s.tol,
        min_shots: s.min_shots,
        dt: s.dt,
    };
    let shooting = compute_vback(&field, &omega_inf, &opts)?;
    let lambda = field.terminal_strength();
    let verify_t_end = config.verify_t_end.unwrap_or_else(|| end.min(start + 22.0 / lambda));
    let verification = verify_vback(&field, &shooting.v_back, &omega_inf, verify_t_end, config.verify_dt)?;
    let geometric = shooting.increments.windows(2).all(|w| w[1] <= w[0] || w[1] < 1e-13);
    let pass = geometric && verification.pass;
    let report = VbackReport {
        v_back: shooting.v_back.coords().to_vec(),
        omega_inf: omega_inf.coords().to_vec(),
        lambda,
        shot_times: shooting.shot_times.clone(),
        increments: shooting.increments.clone(),
        contraction: shooting.contraction.clone(),
        geometric,
        verification,
        pass,
    };
    let summary = vec![
        format!("v_back = {:?}", report.v_back),
        format!(
            "{} shots, last increment {:.3e}, geometric {}",
            report.shot_times.len(),
            report.increments.last().copied().unwrap_or(0.0),
            geometric
        ),
        format!(
            "forward checks to t = {:.3}: back orbit {}, displaced {}, mesh {}",
            report.verification.t_end,
            report.verification.back_pass,
            report.verification.displaced.iter().all(|d| d.pass),
            report.verification.mesh_pass
        ),
    ];
    Ok(Outcome {
        pass,
        summary,
        files: vec![("vback_report.json".into(), json_bytes(&report))],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateLawCheck {
    pub quantity: String,
    pub reference: String,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub spread: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionRates {
    pub dim: usize,
    pub alpha0: f64,
    pub lambda_end: f64,
    pub laws: Vec<RateLawCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesReport {
    pub density: String,
    pub window: [f64; 2],
    pub max_spread: f64,
    pub checked: bool,
    pub dims: Vec<DimensionRates>,
    pub pass: bool,
}

/// Reference decay laws of `W_1` and `W_2` for densities positive at `-e_n`.
pub fn reference_laws(dim: usize) -> [(&'static str, fn(f64) -> f64); 2] {
    match dim {
        2 => [
            ("(1+t)e^{-t}", |t| (1.0 + t) * (-t).exp()),
            ("e^{-t/2}", |t| (-0.5 * t).exp()),
        ],
        3 => [
            ("e^{-t}", |t| (-t).exp()),
            ("sqrt(1+t)e^{-t}", |t| (1.0 + t).sqrt() * (-t).exp()),
        ],
        _ => [("e^{-t}", |t| (-t).exp()), ("e^{-t}", |t| (-t).exp())],
    }
}

fn ratio_check(quantity: &str, reference: &str, ratios: &[f64], max_spread: f64) -> RateLawCheck {
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = max_ratio / min_ratio;
    RateLawCheck {
        quantity: quantity.into(),
        reference: reference.into(),
        min_ratio,
        max_ratio,
        spread,
        pass: !ratios.is_empty() && min_ratio > 0.0 && spread < max_spread,
    }
}

/// Axisymmetric solution per dimension, exported with distance-rate checks.
pub fn run_kinetic(config: &KineticConfig) -> Result<Outcome, ExperimentError> {
    check_time_grid(config.t_end, config.dt)?;
    if config.dims.is_empty() {
        return Err(ExperimentError::Config("dims must not be empty".into()));
    }
    let [lo, hi] = config.rate_window;
    let checked = config
        .check_rates
        .unwrap_or(matches!(config.density, RadialConfig::Tilted { .. }));
    if checked && !(lo < hi && hi <= config.t_end + 1e-9) {
        return Err(ExperimentError::Config(format!(
            "rate window [{lo}, {hi}] must lie inside [0, {}]",
            config.t_end
        )));
    }
    let mut csv = String::from("n,t,lambda,alpha,w1,w2\n");
    let mut dims = Vec::new();
    let mut summary = Vec::new();
    for &dim in &config.dims {
        let h = config.density.build(dim)?;
        let sol = solve_lambda(&h, config.t_end, config.dt)?;
        let times = sol.times();
        let last = times.len() - 1;
        let mut w1_ratios = Vec::new();
        let mut w2_ratios = Vec::new();
        let laws = reference_laws(dim);
        for k in (0..=last).filter(|k| k % config.every.max(1) == 0 || *k == last) {
            let (t, lam) = (times[k], sol.lambda_series()[k]);
            let w1 = w1_to_dirac(&h, lam)?;
            let w2 = w2sq_to_dirac(&h, lam)?.sqrt();
            csv.push_str(&format!(
                "{dim},{},{},{},{},{}\n",
                fmt17(t),
                fmt17(lam),
                fmt17(sol.alpha_series()[k]),
                fmt17(w1),
                fmt17(w2)
            ));
            if t >= lo - 1e-9 && t <= hi + 1e-9 {
                w1_ratios.push(w1 / laws[0].1(t));
                w2_ratios.push(w2 / laws[1].1(t));
            }
        }
        let laws = if checked {
            vec![
                ratio_check("w1", laws[0].0, &w1_ratios, config.max_spread),
                ratio_check("w2", laws[1].0, &w2_ratios, config.max_spread),
            ]
        } else {
            Vec::new()
        };
        for l in &laws {
            summary.push(format!(
                "{} n={dim} {}/{}: spread {:.4}",
                if l.pass { "pass" } else { "FAIL" },
                l.quantity,
                l.reference,
                l.spread
            ));
        }
        dims.push(DimensionRates {
            dim,
            alpha0: sol.alpha_series()[0],
            lambda_end: sol.lambda_series()[last],
            laws,
        });
    }
    let pass = dims.iter().flat_map(|d| &d.laws).all(|l| l.pass);
    let report = RatesReport {
        density: config.density.label().into(),
        window: config.rate_window,
        max_spread: config.max_spread,
        checked,
        dims,
        pass,
    };
    if !checked {
        summary.push("rate checks disabled".into());
    }
    Ok(Outcome {
        pass,
        summary,
        files: vec![
            ("kinetic.csv".into(), csv.into_bytes()),
            ("rates_report.json".into(), json_bytes(&report)),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowDecaySample {
    pub t: f64,
    pub g: f64,
    pub one_minus_alpha: f64,
    pub w1: f64,
    pub lower_bound_holds: bool,
    pub w1_bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowDecayReport {
    pub mass: f64,
    pub alpha0: f64,
    pub tolerance: f64,
    pub checkpoints: Vec<SlowDecaySample>,
    pub all_rows_hold: bool,
    pub pass: bool,
}

/// Density whose distance to the limit decays no faster than a given `g`.
pub fn run_slowdecay(config: &SlowDecayConfig) -> Result<Outcome, ExperimentError> {
    check_time_grid(config.t_end, config.dt)?;
    let g = config.g.build()?;
    let h = slow_decay_density(g.clone(), config.eps, config.dim)?;
    let mass = h.mass()?;
    let sol = solve_lambda(&h, config.t_end, config.dt)?;
    let tol = config.tolerance;
    let sample = |t: f64, lam: f64| -> Result<SlowDecaySample, ExperimentError> {
        let oma = one_minus_alpha(&h, lam)?;
        let w1 = w1_to_dirac(&h, lam)?;
        let gt = g.value(t);
        Ok(SlowDecaySample {
            t,
            g: gt,
            one_minus_alpha: oma,
            w1,
            lower_bound_holds: oma >= gt - tol,
            w1_bound_holds: w1 >= oma - tol,
        })
    };
    let mut csv = String::from("t,g,one_minus_alpha,w1\n");
    let mut all_rows_hold = true;
    let times = sol.times();
    let last = times.len() - 1;
    for k in (0..=last).filter(|k| k % config.every.max(1) == 0 || *k == last) {
        let s = sample(times[k], sol.lambda_series()[k])?;
        all_rows_hold &= s.lower_bound_holds && s.w1_bound_holds;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt17(s.t),
            fmt17(s.g),
            fmt17(s.one_minus_alpha),
            fmt17(s.w1)
        ));
    }
    let checkpoints = config
        .check_times
        .iter()
        .map(|&t| sample(t, sol.lambda_at(t)?))
        .collect::<Result<Vec<_>, _>>()?;
    let alpha0 = sol.alpha_series()[0];
    let pass = all_rows_hold
        && checkpoints.iter().all(|s| s.lower_bound_holds && s.w1_bound_holds)
        && (mass - 1.0).abs() <= kinetic::MASS_TOLERANCE
        && alpha0 > 0.0;
    let mut summary = vec![format!("mass {mass:.12}, alpha(0) = {alpha0:.6}")];
    summary.extend(checkpoints.iter().map(|s| {
        format!(
            "t = {:>5}: g = {:.6e}, 1-alpha = {:.6e}, W1 = {:.6e}{}",
            s.t,
            s.g,
            s.one_minus_alpha,
            s.w1,
            if s.lower_bound_holds && s.w1_bound_holds { "" } else { "  FAIL" }
        )
    }));
    let report = SlowDecayReport {
        mass,
        alpha0,
        tolerance: tol,
        checkpoints,
        all_rows_hold,
        pass,
    };
    Ok(Outcome {
        pass,
        summary,
        files: vec![
            ("slowdecay.csv".into(), csv.into_bytes()),
            ("slowdecay_report.json".into(), json_bytes(&report)),
        ],
    })
}

/// Weak convergence of an empirical measure to its two-atom limit.
pub fn run_measure(config: &MeasureConfig, seed: u64) -> Result<Outcome, ExperimentError> {
    let traj = run_system(&config.system, config.t_end, config.dt, config.stride, seed)?;
    let report = verify_theorem1(&traj, config.tolerance)?;
    let mut summary = vec![format!(
        "back particle {:?} with mass {}, final |J| = {:.12}, final W1 = {:.3e}",
        report.back_index, report.back_mass, report.final_abs_j, report.final_w1
    )];
    summary.extend(
        report
            .checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail)),
    );
    Ok(Outcome {
        pass: report.pass,
        summary,
        files: vec![
            ("measure.csv".into(), csv_bytes(|b| report.write_csv(b))),
            ("theorem1_report.json".into(), json_bytes(&report)),
        ],
    })
}

// ---------------------------------------------------------------- driver

fn parse<T: DeserializeOwned>(text: &str) -> Result<T, ExperimentError> {
    serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
}

/// Parses `text` for `command` and runs it; `seed` overrides the config's.
pub fn run_text(command: Command, text: &str, seed: Option<u64>) -> Result<Outcome, ExperimentError> {
    match command {
        Command::Particles => {
            let c: ParticlesConfig = parse(text)?;
            run_particles(&c, seed.or(c.seed).unwrap_or(0))
        }
        Command::Vback => {
            let c: VbackConfig = parse(text)?;
            run_vback(&c, seed.or(c.seed).unwrap_or(0))
        }
        Command::Kinetic => run_kinetic(&parse(text)?),
        Command::SlowDecay => run_slowdecay(&parse(text)?),
        Command::Measure => {
            let c: MeasureConfig = parse(text)?;
            run_measure(&c, seed.or(c.seed).unwrap_or(0))
        }
    }
}

/// Writes every file through a temporary sibling and a rename. On failure
/// the files already placed are removed again.
pub fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut placed = Vec::new();
    for (name, bytes) in files {
        let target = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        let result = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, &target));
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            for p in &placed {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        placed.push(target);
    }
    Ok(placed)
}

/// Full command: read config, run, write outputs, report. Returns the exit code.
pub fn execute(command: Command, config: &Path, out: &Path, seed: Option<u64>, quiet: bool) -> i32 {
    let outcome = fs::read_to_string(config)
        .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", config.display())))
        .and_then(|text| run_text(command, &text, seed));
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Err(e) = write_outputs(out, &outcome.files) {
        eprintln!("error: writing outputs to {}: {e}", out.display());
        return EXIT_IO;
    }
    if !quiet {
        for line in &outcome.summary {
            println!("{line}");
        }
        println!(
            "{}: wrote {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", ")
        );
    }
    outcome.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"system": {"kind": "inline", "weights": [1.0], "points": [[1.0, 0.0]]}, "t_end": 1.0, "colour": 3}"#;
        assert!(matches!(run_text(Command::Particles, text, None), Err(ExperimentError::Config(_))));
        let text = r#"{"system": {"kind": "inline", "weights": [1.0], "points": [[1.0, 0.0]], "x": 1}, "t_end": 1.0}"#;
        assert!(matches!(run_text(Command::Particles, text, None), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn non_unit_points_rejected() {
        let text = r#"{"system": {"kind": "inline", "weights": [0.5, 0.5], "points": [[2.0, 0.0], [0.0, 1.0]]}, "t_end": 1.0}"#;
        let err = run_text(Command::Particles, text, None).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn constant_decay_rejected() {
        let text = r#"{"g": {"kind": "constant", "c": 0.1}, "eps": 0.05, "dim": 3}"#;
        assert_eq!(run_text(Command::SlowDecay, text, None).unwrap_err().exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn constant_field_vback() {
        let text = r#"{"field": {"kind": "constant", "j": [0.5, 0.0, 0.0], "t_end": 60.0}}"#;
        let out = run_text(Command::Vback, text, None).unwrap();
        assert!(out.pass, "{:?}", out.summary);
        let v: serde_json::Value = serde_json::from_slice(out.file("vback_report.json").unwrap()).unwrap();
        assert_eq!(v["v_back"][0].as_f64().unwrap(), -1.0);
    }

    #[test]
    fn stride_budget() {
        assert_eq!(default_stride(40_000, 2), 8);
        assert_eq!(default_stride(15_000, 3_000), 15_000usize.div_ceil(1_333));
    }

    #[test]
    fn outputs_replace_atomically() {
        let dir = std::env::temp_dir().join(format!("sphere-align-out-{}", std::process::id()));
        let files = vec![("a.txt".to_string(), b"one".to_vec())];
        write_outputs(&dir, &files).unwrap();
        write_outputs(&dir, &[("a.txt".to_string(), b"two".to_vec())]).unwrap();
        assert_eq!(fs::read(dir.join("a.txt")).unwrap(), b"two");
        assert!(!dir.join(".a.txt.tmp").exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
