//! Long-time behaviour of particle trajectories.
//!
//! A converged run is either aligned (every particle tends to `Ω_∞`, particles
//! at rate 1 and `Ω` at rate 3) or has exactly one particle tending to `-Ω_∞`
//! (rates `λ` and `3λ` with `λ = 1 - 2 m_back`). This module classifies runs,
//! fits those rates and extracts the first-order offsets `a_i` in
//! `v_i ≈ (1 - ½|a_i|² e^{-2λt}) Ω_∞ + e^{-λt} a_i`.

use serde::Serialize;
use thiserror::Error;

use crate::particles::Trajectory;
use crate::sphere::{self, chord_distance, UnitVector};

/// Values at or below this are treated as roundoff inside a fit window.
pub const FIT_FLOOR: f64 = 1e-13;
pub const MIN_FIT_SAMPLES: usize = 10;
/// Series whose maximum stays below this are reported as stationary.
pub const STATIONARY: f64 = 1e-12;
pub const CLASSIFY_THRESHOLD: f64 = 0.9;
/// Decades used to pick fit windows.
pub const WINDOW_HIGH: f64 = 1e-2;
pub const WINDOW_LOW: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("only {found} samples in the fit window (need {MIN_FIT_SAMPLES})")]
    InsufficientSamples { found: usize },
    #[error("sample y = {y:e} at t = {t} is below the numerical floor")]
    BelowFloor { t: f64, y: f64 },
    #[error("|J(0)| = {0:e}: the order parameter is undefined")]
    DegenerateJ(f64),
    #[error("trajectory ends at t = {t_end} before the extraction window closes at t = {needed}")]
    WindowEmpty { t_end: f64, needed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    /// Root-mean-square residual of `log y`.
    pub residual: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

/// Least-squares fit of `log y = c - rate·t` over samples with `t` in `window`.
pub fn fit_rate(samples: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit, AnalysisError> {
    let inside: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if inside.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::InsufficientSamples { found: inside.len() });
    }
    if let Some(&(t, y)) = inside.iter().find(|(_, y)| !(*y > FIT_FLOOR)) {
        return Err(AnalysisError::BelowFloor { t, y });
    }
    let k = inside.len() as f64;
    let t_mean = inside.iter().map(|p| p.0).sum::<f64>() / k;
    let l_mean = inside.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(t, y) in &inside {
        sxx += (t - t_mean) * (t - t_mean);
        sxy += (t - t_mean) * (y.ln() - l_mean);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = l_mean - slope * t_mean;
    let ss: f64 = inside
        .iter()
        .map(|&(t, y)| (y.ln() - intercept - slope * t).powi(2))
        .sum();
    Ok(RateFit {
        rate: -slope,
        intercept,
        residual: (ss / k).sqrt(),
        samples: inside.len(),
        window,
    })
}

/// Time window where `y` has settled below `high` for good and is still above `low`.
pub fn decade_window(samples: &[(f64, f64)], high: f64, low: f64) -> Option<(f64, f64)> {
    let start = match samples.iter().rposition(|(_, y)| *y >= high) {
        Some(k) => k + 1,
        None => 0,
    };
    let stop = samples.iter().rposition(|(_, y)| *y > low)?;
    if start >= samples.len() || stop <= start {
        return None;
    }
    Some((samples[start].0, samples[stop].0))
}

/// Rate estimate for one decaying series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRate {
    pub fit: Option<RateFit>,
    pub stationary: bool,
    pub note: Option<String>,
}

impl SeriesRate {
    pub fn rate(&self) -> Option<f64> {
        self.fit.map(|f| f.rate)
    }

    fn matches(&self, expected: f64, rel_tol: f64) -> bool {
        self.stationary
            || self
                .fit
                .is_some_and(|f| ((f.rate - expected) / expected).abs() <= rel_tol)
    }
}

/// Fits a decaying series over its `(1e-10, 1e-2)` decade window.
pub fn estimate_rate(series: &[(f64, f64)]) -> SeriesRate {
    let peak = series.iter().map(|p| p.1).fold(0.0, f64::max);
    if peak < STATIONARY {
        return SeriesRate {
            fit: None,
            stationary: true,
            note: None,
        };
    }
    let outcome = decade_window(series, WINDOW_HIGH, WINDOW_LOW)
        .ok_or_else(|| "series never crosses the fit window".to_string())
        .and_then(|w| fit_rate(series, w).map_err(|e| e.to_string()));
    match outcome {
        Ok(fit) => SeriesRate {
            fit: Some(fit),
            stationary: false,
            note: None,
        },
        Err(note) => SeriesRate {
            fit: None,
            stationary: false,
            note: Some(note),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Regime {
    Aligned,
    OneBack { index: usize },
    Inconclusive { reason: String },
}

/// Window estimates of `lim e^{λt} P_{Ω_∞⊥} v_i`; `None` for the particle tending to `-Ω_∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetEstimate {
    pub coeffs: Vec<Option<Vec<f64>>>,
    /// Distance between the averages over the two halves of the window.
    pub variation: Vec<Option<f64>>,
    pub window: (f64, f64),
    /// `Ω(t)` at the end of the window. Roundoff lets the computed `Ω`
    /// wander by ~1e-14 later on, which `e^{λt}` would amplify.
    pub reference: UnitVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Relative change of `|J|` over the final tenth of the run.
    pub abs_j_change: f64,
    pub final_dots: Vec<f64>,
    pub expansion_residual: Option<SeriesRate>,
    pub offset_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub omega_inf: UnitVector,
    /// `|J(t_end)|`.
    pub lambda: f64,
    pub particle_rates: Vec<SeriesRate>,
    /// Rate of `max_i |v_i - Ω_∞|` over the particles tending to `Ω_∞`.
    pub bulk_rate: SeriesRate,
    pub omega_rate: SeriesRate,
    pub back_rate: Option<SeriesRate>,
    pub offsets: Option<OffsetEstimate>,
    pub residuals: Diagnostics,
}

impl RegimeReport {
    pub fn back_index(&self) -> Option<usize> {
        match self.regime {
            Regime::OneBack { index } => Some(index),
            _ => None,
        }
    }
}

fn signed_target(omega: &UnitVector, back: bool) -> UnitVector {
    if back {
        omega.neg()
    } else {
        omega.clone()
    }
}

/// Classifies `traj` and fits every rate it can.
pub fn classify_regime(traj: &Trajectory) -> Result<RegimeReport, AnalysisError> {
    let abs_j = traj.abs_j();
    if abs_j[0] <= crate::particles::DEGENERATE_J {
        return Err(AnalysisError::DegenerateJ(abs_j[0]));
    }
    let t_end = traj.t_end();
    let k_tail = traj
        .times()
        .iter()
        .position(|&t| t >= 0.9 * t_end)
        .unwrap_or(0);
    let lambda = *abs_j.last().expect("non-empty");
    let abs_j_change = (lambda - abs_j[k_tail]).abs() / lambda;
    let omega_inf = traj
        .omega_series()
        .last()
        .cloned()
        .flatten()
        .expect("|J| is nondecreasing, so Ω exists at the end");
    let last = traj.last();
    let final_dots: Vec<f64> = last.points().iter().map(|v| v.dot(omega_inf.coords())).collect();

    let negatives: Vec<usize> = (0..final_dots.len())
        .filter(|&i| final_dots[i] < -CLASSIFY_THRESHOLD)
        .collect();
    let positives = final_dots.iter().filter(|d| **d > CLASSIFY_THRESHOLD).count();
    let mut regime = if positives == final_dots.len() {
        Regime::Aligned
    } else if negatives.len() == 1 && positives == final_dots.len() - 1 {
        Regime::OneBack { index: negatives[0] }
    } else {
        Regime::Inconclusive {
            reason: format!(
                "{} particles near Ω_∞, {} near -Ω_∞, {} undecided",
                positives,
                negatives.len(),
                final_dots.len() - positives - negatives.len()
            ),
        }
    };
    if abs_j_change >= 1e-10 && !matches!(regime, Regime::Inconclusive { .. }) {
        regime = Regime::Inconclusive {
            reason: format!("|J| has not stabilised (relative change {abs_j_change:.3e} over the final 10%)"),
        };
    }
    let back = match regime {
        Regime::OneBack { index } => Some(index),
        _ => None,
    };

    let mut residuals = Diagnostics {
        abs_j_change,
        final_dots: final_dots.clone(),
        expansion_residual: None,
        offset_note: None,
    };
    if let Regime::Inconclusive { .. } = regime {
        return Ok(RegimeReport {
            regime,
            omega_inf,
            lambda,
            particle_rates: Vec::new(),
            bulk_rate: SeriesRate {
                fit: None,
                stationary: false,
                note: Some("inconclusive run".into()),
            },
            omega_rate: SeriesRate {
                fit: None,
                stationary: false,
                note: Some("inconclusive run".into()),
            },
            back_rate: None,
            offsets: None,
            residuals,
        });
    }

    let n_particles = last.len();
    let targets: Vec<UnitVector> = (0..n_particles)
        .map(|i| signed_target(&omega_inf, Some(i) == back))
        .collect();
    let particle_series: Vec<Vec<(f64, f64)>> = (0..n_particles)
        .map(|i| {
            traj.times()
                .iter()
                .zip(traj.states())
                .map(|(t, s)| (*t, chord_distance(&s.points()[i], &targets[i]).expect("dimension")))
                .collect()
        })
        .collect();
    let particle_rates: Vec<SeriesRate> = particle_series.iter().map(|s| estimate_rate(s)).collect();
    let bulk_series: Vec<(f64, f64)> = (0..traj.len())
        .map(|k| {
            let y = (0..n_particles)
                .filter(|&i| Some(i) != back)
                .map(|i| particle_series[i][k].1)
                .fold(0.0, f64::max);
            (traj.times()[k], y)
        })
        .collect();
    let bulk_rate = estimate_rate(&bulk_series);
    let omega_series: Vec<(f64, f64)> = traj
        .times()
        .iter()
        .zip(traj.omega_series())
        .filter_map(|(t, o)| o.as_ref().map(|o| (*t, chord_distance(o, &omega_inf).expect("dimension"))))
        .collect();
    // The 3λ rates only hold once the bulk is in its own asymptotic window.
    let settled = bulk_rate.fit.map_or(0.0, |f| f.window.0);
    let after = |series: &[(f64, f64)]| -> Vec<(f64, f64)> { series.iter().copied().filter(|p| p.0 >= settled).collect() };
    let omega_rate = estimate_rate(&after(&omega_series));
    let back_rate = back.map(|i| estimate_rate(&after(&particle_series[i])));

    let offsets = match extract_ai(traj, &omega_inf, lambda) {
        Ok(est) => {
            residuals.expansion_residual = Some(estimate_rate(&expansion_residual(traj, lambda, &est)));
            Some(est)
        }
        Err(e) => {
            residuals.offset_note = Some(e.to_string());
            None
        }
    };

    Ok(RegimeReport {
        regime,
        omega_inf,
        lambda,
        particle_rates,
        bulk_rate,
        omega_rate,
        back_rate,
        offsets,
        residuals,
    })
}

/// Bulk distance to `Ω_∞` at which the offset window opens.
pub const OFFSET_HIGH: f64 = 1e-3;
/// Bulk distance at which it closes.
pub const OFFSET_LOW: f64 = 1e-6;

/// Snapshot indices after the transient in which the largest bulk distance
/// `max_i |v_i - Ω_∞|` lies in `[OFFSET_LOW, OFFSET_HIGH]`.
///
/// An empty window with the bulk already at `Ω_∞` to within
/// [`STATIONARY`] is returned as `Ok(None)`.
fn offset_window(
    traj: &Trajectory,
    omega_inf: &UnitVector,
    bulk: &[usize],
    lambda: f64,
) -> Result<Option<Vec<usize>>, AnalysisError> {
    let d_max: Vec<f64> = traj
        .states()
        .iter()
        .map(|s| {
            bulk.iter()
                .map(|&i| chord_distance(&s.points()[i], omega_inf).expect("dimension"))
                .fold(0.0, f64::max)
        })
        .collect();
    let Some(start) = (0..d_max.len()).rev().take_while(|&k| d_max[k] <= OFFSET_HIGH).last() else {
        return Err(AnalysisError::WindowEmpty {
            t_end: traj.t_end(),
            needed: traj.t_end() + (1.0 / OFFSET_LOW).ln() / lambda,
        });
    };
    let ks: Vec<usize> = (start..d_max.len()).take_while(|&k| d_max[k] >= OFFSET_LOW).collect();
    if ks.is_empty() && d_max[start..].iter().all(|d| *d <= STATIONARY) {
        return Ok(None);
    }
    if ks.last().is_some_and(|&k| k + 1 == d_max.len()) && d_max[d_max.len() - 1] > OFFSET_LOW {
        return Err(AnalysisError::WindowEmpty {
            t_end: traj.t_end(),
            needed: traj.times()[start] + (OFFSET_HIGH / OFFSET_LOW).ln() / lambda,
        });
    }
    if ks.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::InsufficientSamples { found: ks.len() });
    }
    Ok(Some(ks))
}

/// Averages `e^{λt} P_{Ω_∞⊥} v_i(t)` over the window in which the bulk
/// distance falls from `1e-3` to `1e-6`,
/// extrapolated through the `e^{-2λt}` correction.
pub fn extract_ai(
    traj: &Trajectory,
    omega_inf: &UnitVector,
    lambda: f64,
) -> Result<OffsetEstimate, AnalysisError> {
    let n = omega_inf.dim();
    let last = traj.last();
    let bulk: Vec<usize> = (0..last.len())
        .filter(|&i| last.points()[i].dot(omega_inf.coords()) >= 0.0)
        .collect();
    let Some(ks) = offset_window(traj, omega_inf, &bulk, lambda)? else {
        let t = traj.t_end();
        return Ok(OffsetEstimate {
            coeffs: (0..last.len())
                .map(|i| bulk.contains(&i).then(|| vec![0.0; n]))
                .collect(),
            variation: (0..last.len()).map(|i| bulk.contains(&i).then_some(0.0)).collect(),
            window: (t, t),
            reference: omega_inf.clone(),
        });
    };
    let window = (traj.times()[ks[0]], traj.times()[ks[ks.len() - 1]]);
    let reference = traj.omega_series()[ks[ks.len() - 1]]
        .clone()
        .unwrap_or_else(|| omega_inf.clone());
    let half = ks.len() / 2;
    let mut coeffs = Vec::with_capacity(last.len());
    let mut variation = Vec::with_capacity(last.len());
    for i in 0..last.len() {
        if !bulk.contains(&i) {
            coeffs.push(None);
            variation.push(None);
            continue;
        }
        let scaled = |k: usize| -> Vec<f64> {
            let t = traj.times()[k];
            let v = &traj.states()[k].points()[i];
            let p = sphere::project_tangent(&reference, v.coords()).expect("dimension");
            p.vec.iter().map(|x| x * (lambda * t).exp()).collect()
        };
        let average = |range: &[usize]| -> Vec<f64> {
            let mut acc = vec![0.0; n];
            for &k in range {
                for (a, x) in acc.iter_mut().zip(scaled(k)) {
                    *a += x;
                }
            }
            acc.iter().map(|a| a / range.len() as f64).collect()
        };
        let first = average(&ks[..half]);
        let second = average(&ks[half..]);
        let diff: Vec<f64> = first.iter().zip(&second).map(|(a, b)| a - b).collect();
        variation.push(Some(sphere::norm(&diff)));
        // intercept of a + b e^{-2λt} removes the leading correction
        let xs: Vec<f64> = ks.iter().map(|&k| (-2.0 * lambda * traj.times()[k]).exp()).collect();
        let ys: Vec<Vec<f64>> = ks.iter().map(|&k| scaled(k)).collect();
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
        let mean = average(&ks);
        let a: Vec<f64> = (0..n)
            .map(|c| {
                let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y[c] - mean[c])).sum();
                mean[c] - sxy / sxx * xm
            })
            .collect();
        coeffs.push(Some(a));
    }
    Ok(OffsetEstimate {
        coeffs,
        variation,
        window,
        reference,
    })
}

/// `max_i |v_i - [(1 - ½|a_i|² e^{-2λt}) Ω_∞ + e^{-λt} a_i]|` over the particles tending to `Ω_∞`,
/// with `Ω_∞` taken as the reference direction of `offsets`.
pub fn expansion_residual(
    traj: &Trajectory,
    lambda: f64,
    offsets: &OffsetEstimate,
) -> Vec<(f64, f64)> {
    traj.times()
        .iter()
        .zip(traj.states())
        .map(|(&t, state)| {
            let decay = (-lambda * t).exp();
            let mut worst: f64 = 0.0;
            for (v, a) in state.points().iter().zip(&offsets.coeffs) {
                let Some(a) = a else { continue };
                let c = 1.0 - 0.5 * sphere::dot(a, a) * decay * decay;
                let r: Vec<f64> = v
                    .coords()
                    .iter()
                    .zip(offsets.reference.coords())
                    .zip(a)
                    .map(|((x, o), ak)| x - c * o - decay * ak)
                    .collect();
                worst = worst.max(sphere::norm(&r));
            }
            (t, worst)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

/// Regime report plus every quantitative check on the long-time behaviour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub regime: String,
    pub i0: Option<usize>,
    pub lambda: f64,
    pub omega_inf: UnitVector,
    pub rates: RatesView,
    pub a_coeffs: Vec<Option<Vec<f64>>>,
    pub residuals: Diagnostics,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip)]
    pub report: RegimeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesView {
    pub particles: Vec<Option<f64>>,
    pub bulk: Option<f64>,
    pub omega: Option<f64>,
    pub back: Option<f64>,
}

impl AsymptoticReport {
    pub fn is_inconclusive(&self) -> bool {
        matches!(self.report.regime, Regime::Inconclusive { .. })
    }
}

fn rate_detail(s: &SeriesRate, expected: f64, tol: f64) -> String {
    match (&s.fit, s.stationary) {
        (_, true) => "stationary series".into(),
        (Some(f), _) => format!("fitted {:.6} vs {:.6} (rel. tol {tol})", f.rate, expected),
        (None, _) => s.note.clone().unwrap_or_else(|| "no fit".into()),
    }
}

/// Classifies `traj` and checks rates, `λ`, and the `a_i` expansion.
pub fn verify_theorem2(traj: &Trajectory) -> Result<AsymptoticReport, AnalysisError> {
    let report = classify_regime(traj)?;
    let lambda = report.lambda;
    let mut checks = Vec::new();
    let (regime, i0) = match &report.regime {
        Regime::Aligned => ("aligned".to_string(), None),
        Regime::OneBack { index } => ("one_back".to_string(), Some(*index)),
        Regime::Inconclusive { reason } => {
            checks.push(Check::new("classification", false, reason.clone()));
            ("inconclusive".to_string(), None)
        }
    };
    if i0.is_some() || regime == "aligned" {
        checks.push(Check::new(
            "bulk_rate",
            report.bulk_rate.matches(lambda, 0.05),
            rate_detail(&report.bulk_rate, lambda, 0.05),
        ));
        checks.push(Check::new(
            "omega_rate",
            report.omega_rate.matches(3.0 * lambda, 0.10),
            rate_detail(&report.omega_rate, 3.0 * lambda, 0.10),
        ));
        if let (Some(i), Some(back)) = (i0, &report.back_rate) {
            checks.push(Check::new(
                "back_rate",
                back.matches(3.0 * lambda, 0.10),
                rate_detail(back, 3.0 * lambda, 0.10),
            ));
            let m = traj.initial().weights()[i];
            let expected = 1.0 - 2.0 * m;
            checks.push(Check::new(
                "lambda_from_mass",
                (lambda - expected).abs() <= 1e-6,
                format!("|J(t_end)| = {lambda:.12} vs 1 - 2m = {expected:.12}"),
            ));
        }
        match (&report.offsets, &report.residuals.expansion_residual) {
            (Some(est), Some(res)) => {
                checks.push(Check::new(
                    "expansion_residual_rate",
                    res.matches(3.0 * lambda, 0.15),
                    rate_detail(res, 3.0 * lambda, 0.15),
                ));
                let weights = traj.initial().weights();
                let mut sum = vec![0.0; report.omega_inf.dim()];
                let mut worst_dot: f64 = 0.0;
                for (m, a) in weights.iter().zip(&est.coeffs) {
                    let Some(a) = a else { continue };
                    for (s, x) in sum.iter_mut().zip(a) {
                        *s += m * x;
                    }
                    let na = sphere::norm(a);
                    if na > 0.0 {
                        worst_dot = worst_dot.max(report.omega_inf.dot(a).abs() / na);
                    }
                }
                let s = sphere::norm(&sum);
                checks.push(Check::new(
                    "offsets_weighted_sum",
                    s < 1e-6,
                    format!("|Σ m_i a_i| = {s:.3e}"),
                ));
                checks.push(Check::new(
                    "offsets_orthogonal",
                    worst_dot <= 1e-6,
                    format!("max |a_i·Ω_∞|/|a_i| = {worst_dot:.3e}"),
                ));
            }
            _ => checks.push(Check::new(
                "expansion_residual_rate",
                false,
                report
                    .residuals
                    .offset_note
                    .clone()
                    .unwrap_or_else(|| "offsets unavailable".into()),
            )),
        }
    }
    let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
    Ok(AsymptoticReport {
        regime,
        i0,
        lambda,
        omega_inf: report.omega_inf.clone(),
        rates: RatesView {
            particles: report.particle_rates.iter().map(SeriesRate::rate).collect(),
            bulk: report.bulk_rate.rate(),
            omega: report.omega_rate.rate(),
            back: report.back_rate.as_ref().and_then(SeriesRate::rate),
        },
        a_coeffs: report
            .offsets
            .as_ref()
            .map(|o| o.coeffs.clone())
            .unwrap_or_default(),
        residuals: report.residuals.clone(),
        checks,
        pass,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{integrate, WeightedConfiguration};

    fn samples(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> Vec<(f64, f64)> {
        (0..=k)
            .map(|j| {
                let t = a + (b - a) * j as f64 / k as f64;
                (t, f(t))
            })
            .collect()
    }

    #[test]
    fn fit_rate_examples() {
        let s = samples(|t| 5.0 * (-2.0 * t).exp(), 0.0, 5.0, 200);
        let f = fit_rate(&s, (0.0, 5.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-10);
        assert!((f.intercept - 5f64.ln()).abs() < 1e-10);

        let s = samples(|t| (-t).exp() * (1.0 + (-2.0 * t).exp()), 0.0, 10.0, 1000);
        let f = fit_rate(&s, (5.0, 10.0)).unwrap();
        assert!((f.rate - 1.0).abs() < 1e-3);

        let s = samples(|_| 0.3, 0.0, 1.0, 50);
        assert!(fit_rate(&s, (0.0, 1.0)).unwrap().rate.abs() < 1e-12);
    }

    #[test]
    fn fit_rate_errors() {
        let s = samples(|t| (-t).exp(), 0.0, 1.0, 5);
        assert!(matches!(fit_rate(&s, (0.0, 1.0)), Err(AnalysisError::InsufficientSamples { found: 6 })));
        let s = samples(|t| (-40.0 * t).exp(), 0.0, 1.0, 50);
        assert!(matches!(fit_rate(&s, (0.0, 1.0)), Err(AnalysisError::BelowFloor { .. })));
    }

    #[test]
    fn decade_window_bounds() {
        let s = samples(|t| (-t).exp(), 0.0, 30.0, 3000);
        let (lo, hi) = decade_window(&s, 1e-2, 1e-10).unwrap();
        assert!((lo - 100f64.ln()).abs() < 0.011);
        assert!((hi - 1e10f64.ln()).abs() < 0.011);
    }

    fn pair(phi: f64) -> WeightedConfiguration {
        WeightedConfiguration::new(
            vec![0.5, 0.5],
            vec![
                UnitVector::new(vec![phi.cos(), phi.sin()]).unwrap(),
                UnitVector::new(vec![phi.cos(), -phi.sin()]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn symmetric_pair_is_aligned() {
        let phi = std::f64::consts::FRAC_PI_4;
        let traj = integrate(&pair(phi), 40.0, 1e-3, true).unwrap();
        let rep = verify_theorem2(&traj).unwrap();
        assert_eq!(rep.regime, "aligned");
        assert!((rep.lambda - 1.0).abs() < 1e-12);
        assert!(rep.pass, "{:#?}", rep.checks);
        let a = rep.a_coeffs[0].as_ref().unwrap();
        assert!(a[0].abs() < 1e-12);
        assert!((a[1] - phi.tan()).abs() < 1e-6);
        let b = rep.a_coeffs[1].as_ref().unwrap();
        assert!((a[1] + b[1]).abs() < 1e-8);
    }

    #[test]
    fn antipodal_quarter_is_one_back() {
        let cfg = WeightedConfiguration::new(
            vec![0.25, 0.75],
            vec![UnitVector::new(vec![-1.0, 0.0]).unwrap(), UnitVector::new(vec![1.0, 0.0]).unwrap()],
        )
        .unwrap();
        let traj = integrate(&cfg, 40.0, 1e-3, true).unwrap();
        let rep = verify_theorem2(&traj).unwrap();
        assert_eq!(rep.i0, Some(0));
        assert!((rep.lambda - 0.5).abs() < 1e-12);
        assert!(rep.pass, "{:#?}", rep.checks);
    }

    #[test]
    fn zero_j_is_an_error() {
        let cfg = WeightedConfiguration::new(
            vec![0.5, 0.5],
            vec![UnitVector::new(vec![-1.0, 0.0]).unwrap(), UnitVector::new(vec![1.0, 0.0]).unwrap()],
        )
        .unwrap();
        let traj = integrate(&cfg, 1.0, 1e-3, true).unwrap();
        assert!(matches!(classify_regime(&traj), Err(AnalysisError::DegenerateJ(_))));
    }

    #[test]
    fn short_run_is_inconclusive() {
        let traj = integrate(&pair(1.2), 0.5, 1e-3, true).unwrap();
        let rep = classify_regime(&traj).unwrap();
        assert!(matches!(rep.regime, Regime::Inconclusive { .. }));
    }
}
