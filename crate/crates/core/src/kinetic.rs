//! Axisymmetric solutions of the continuum equation.
//!
//! For an initial density `f_0(v) = h(|s(v)|)` (stereographic radius `r`),
//! characteristics in stereographic coordinates are `z(t) = z_0 e^{-λ(t)}`
//! with `λ' = α(λ)`, `α = J·e_n`. All quantities reduce to one-dimensional
//! integrals against the radial weight `h(r) r^{n-2} (1+r²)^{-(n-1)}`,
//! normalized by `b_n`. Densities are taken with respect to the normalized
//! uniform measure on the sphere, so `h ≡ 1` is the uniform distribution.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::backward::AlignmentField;
use crate::particles::fmt17;
use crate::quadrature::{integrate_half_line, QuadError, QuadOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticError {
    #[error("dimension {0} is below 2")]
    Dimension(usize),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("density has total mass {0}, expected 1")]
    NotNormalized(f64),
    #[error("inadmissible decay profile: {0}")]
    Inadmissible(String),
    #[error("α(0) = {0} is not positive; the initial mean direction is degenerate or reversed")]
    DegenerateAlpha(f64),
    #[error("time {t} lies outside the solution range [0, {end}]")]
    OutOfRange { t: f64, end: f64 },
    #[error("no closed form for dimension {0}")]
    Unsupported(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Relative accuracy of every radial integral.
pub const KINETIC_QUAD: QuadOptions = QuadOptions {
    abs_tol: 0.0,
    rel_tol: 1e-11,
    max_subdivisions: 4000,
};

/// Tolerance of the normalization check.
pub const MASS_TOLERANCE: f64 = 1e-8;

/// `α(0)` at or below this counts as zero initial mean.
pub const DEGENERATE_ALPHA: f64 = 1e-10;

/// Decreasing profile `g` with `g(t) → 0` used by the slow-decay density.
#[derive(Clone)]
pub enum DecayFn {
    /// `c e^{-t/τ}`.
    Exp { c: f64, tau: f64 },
    /// Arbitrary profile with its derivative.
    Custom {
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        dg: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for DecayFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayFn::Exp { c, tau } => write!(f, "Exp {{ c: {c}, tau: {tau} }}"),
            DecayFn::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl DecayFn {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            DecayFn::Exp { c, tau } => c * (-t / tau).exp(),
            DecayFn::Custom { g, .. } => g(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            DecayFn::Exp { c, tau } => -c / tau * (-t / tau).exp(),
            DecayFn::Custom { dg, .. } => dg(t),
        }
    }

    fn validate(&self) -> Result<(), KineticError> {
        match self {
            DecayFn::Exp { c, tau } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(KineticError::Inadmissible(format!("amplitude c = {c} must be positive")));
                }
                if !(*tau > 0.0 && tau.is_finite()) {
                    return Err(KineticError::Inadmissible(format!(
                        "time scale tau = {tau} must be positive and finite for g to decrease to 0"
                    )));
                }
            }
            DecayFn::Custom { g, dg } => {
                let grid: Vec<f64> = (0..=400).map(|k| k as f64 * 0.5).collect();
                if grid.iter().any(|&t| dg(t) > 0.0 || !g(t).is_finite()) {
                    return Err(KineticError::Inadmissible("g must be finite and nonincreasing".into()));
                }
                if !(g(grid[grid.len() - 1]) < 1e-3 * g(0.0)) {
                    return Err(KineticError::Inadmissible("g must decay to 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Shape of the radial profile `h`.
#[derive(Clone)]
pub enum Profile {
    Uniform,
    /// `h(r) = 1 + β (1-r²)/(1+r²)`, i.e. `f_0 ∝ 1 + β v·e_n`.
    Tilted { beta: f64 },
    /// Mass `1 - g(0)` spread near the north pole and the rest released
    /// slowly from the southern hemisphere according to `g`.
    SlowDecay { g: DecayFn, eps: f64 },
    /// Linear interpolation of `(r_k, h_k)`, constant below the first node
    /// and zero beyond the last.
    Table { r: Vec<f64>, h: Vec<f64> },
    Custom {
        h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        breakpoints: Vec<f64>,
    },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Uniform => write!(f, "Uniform"),
            Profile::Tilted { beta } => write!(f, "Tilted {{ beta: {beta} }}"),
            Profile::SlowDecay { g, eps } => write!(f, "SlowDecay {{ g: {g:?}, eps: {eps} }}"),
            Profile::Table { r, .. } => write!(f, "Table {{ {} nodes }}", r.len()),
            Profile::Custom { breakpoints, .. } => write!(f, "Custom {{ breakpoints: {breakpoints:?} }}"),
        }
    }
}

/// Axisymmetric initial density `h(r)` on `S^{n-1}`.
#[derive(Debug, Clone)]
pub struct RadialDensity {
    dim: usize,
    profile: Profile,
    b_n: f64,
}

/// Surface area of the unit sphere `S^k`.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        k => 2.0 * PI / (k as f64 - 1.0) * sphere_area(k - 2),
    }
}

fn radial_measure(n: usize, r: f64) -> f64 {
    if r <= 1.0 {
        r.powi(n as i32 - 2) / (1.0 + r * r).powi(n as i32 - 1)
    } else {
        let u = 1.0 / (r * r);
        r.powi(-(n as i32)) / (1.0 + u).powi(n as i32 - 1)
    }
}

/// `(b_n, c_n)`: `b_n = ∫_0^∞ r^{n-2}(1+r²)^{-(n-1)} dr` and `c_n = b_n |S^{n-2}|`.
pub fn constant_bn_cn(n: usize) -> Result<(f64, f64), KineticError> {
    if n < 2 {
        return Err(KineticError::Dimension(n));
    }
    let opts = QuadOptions {
        rel_tol: 1e-13,
        ..KINETIC_QUAD
    };
    let b = integrate_half_line(|r| radial_measure(n, r), &[1.0], &opts)?.value;
    Ok((b, b * sphere_area(n - 2)))
}

impl RadialDensity {
    fn build(dim: usize, profile: Profile) -> Result<Self, KineticError> {
        let (b_n, _) = constant_bn_cn(dim)?;
        let d = Self { dim, profile, b_n };
        let mass = d.mass()?;
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(KineticError::NotNormalized(mass));
        }
        Ok(d)
    }

    /// `h ≡ 1`.
    pub fn uniform(dim: usize) -> Result<Self, KineticError> {
        Self::build(dim, Profile::Uniform)
    }

    /// `f_0 ∝ 1 + β v·e_n` with `|β| ≤ 1`.
    pub fn tilted(dim: usize, beta: f64) -> Result<Self, KineticError> {
        if !(beta.abs() <= 1.0) {
            return Err(KineticError::InvalidDensity(format!("|beta| = {} exceeds 1", beta.abs())));
        }
        Self::build(dim, Profile::Tilted { beta })
    }

    /// Tabulated profile; nodes must increase and values be nonnegative.
    pub fn table(dim: usize, r: Vec<f64>, h: Vec<f64>) -> Result<Self, KineticError> {
        if r.len() < 2 || r.len() != h.len() {
            return Err(KineticError::InvalidDensity("table needs ≥ 2 nodes and one value per node".into()));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(KineticError::InvalidDensity("table radii must be nonnegative and increasing".into()));
        }
        if h.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(KineticError::InvalidDensity("table values must be finite and nonnegative".into()));
        }
        Self::build(dim, Profile::Table { r, h })
    }

    /// Arbitrary nonnegative profile; `breakpoints` lists its discontinuities.
    pub fn custom(
        dim: usize,
        h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        breakpoints: Vec<f64>,
    ) -> Result<Self, KineticError> {
        Self::build(dim, Profile::Custom { h, breakpoints })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn b_n(&self) -> f64 {
        self.b_n
    }

    /// `h(r)`.
    pub fn h(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::Uniform => 1.0,
            Profile::Tilted { beta } => {
                let c = if r <= 1.0 {
                    (1.0 - r * r) / (1.0 + r * r)
                } else {
                    let u = 1.0 / (r * r);
                    (u - 1.0) / (u + 1.0)
                };
                1.0 + beta * c
            }
            Profile::SlowDecay { .. } => self.weighted(r) / radial_measure(self.dim, r),
            Profile::Table { r: nodes, h } => {
                if r <= nodes[0] {
                    return h[0];
                }
                if r > nodes[nodes.len() - 1] {
                    return 0.0;
                }
                let k = nodes.partition_point(|&x| x < r).max(1);
                let s = (r - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
                h[k - 1] + s * (h[k] - h[k - 1])
            }
            Profile::Custom { h, .. } => h(r),
        }
    }

    /// `h(r) r^{n-2} (1+r²)^{-(n-1)}`.
    pub fn weighted(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::SlowDecay { g, eps } => {
                let inner = if r < *eps {
                    (1.0 - g.value(0.0)) / eps
                } else if r >= 1.0 {
                    -g.derivative(r.ln()) / r
                } else {
                    0.0
                };
                self.b_n * inner
            }
            _ => self.h(r) * radial_measure(self.dim, r),
        }
    }

    /// Discontinuities and kinks of `h`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.profile {
            Profile::SlowDecay { eps, .. } => vec![*eps, 1.0],
            Profile::Table { r, .. } => r.iter().copied().filter(|x| *x > 0.0).collect(),
            Profile::Custom { breakpoints, .. } => breakpoints.clone(),
            _ => Vec::new(),
        }
    }

    /// `b_n^{-1} ∫ kernel(r) W(r) dr` split at the density breakpoints and `extra`.
    pub fn radial_integral<K: Fn(f64) -> f64>(&self, kernel: K, extra: &[f64]) -> Result<f64, KineticError> {
        let mut cuts = self.breakpoints();
        cuts.push(1.0);
        cuts.extend_from_slice(extra);
        let value = integrate_half_line(|r| kernel(r) * self.weighted(r), &cuts, &KINETIC_QUAD)?.value;
        Ok(value / self.b_n)
    }

    /// Total mass `b_n^{-1} ∫ W dr`.
    pub fn mass(&self) -> Result<f64, KineticError> {
        self.radial_integral(|_| 1.0, &[])
    }
}

fn lambda_cut(lam: f64) -> Vec<f64> {
    if lam > 0.0 {
        vec![lam.exp()]
    } else {
        Vec::new()
    }
}

/// `2x/(1+x)` for `x = r² e^{-2λ}`.
fn alpha_kernel(r: f64, lam: f64) -> f64 {
    let y = r * (-lam).exp();
    let x = y * y;
    if x <= 1.0 {
        2.0 * x / (1.0 + x)
    } else {
        2.0 / (1.0 + 1.0 / x)
    }
}

/// `1 - α(λ)`, computed directly to keep relative accuracy when `α → 1`.
pub fn one_minus_alpha(h: &RadialDensity, lam: f64) -> Result<f64, KineticError> {
    h.radial_integral(|r| alpha_kernel(r, lam), &lambda_cut(lam))
}

/// `α(λ) = J·e_n` after the characteristics have contracted by `e^{-λ}`.
pub fn alpha_of_lambda(h: &RadialDensity, lam: f64) -> Result<f64, KineticError> {
    Ok(1.0 - one_minus_alpha(h, lam)?)
}

/// `dα/dλ = b_n^{-1} ∫ 4x/(1+x)² W dr ≥ 0`.
pub fn dalpha_dlambda(h: &RadialDensity, lam: f64) -> Result<f64, KineticError> {
    let kernel = |r: f64| {
        let y = r * (-lam).exp();
        if y <= 1.0 {
            let x = y * y;
            4.0 * x / ((1.0 + x) * (1.0 + x))
        } else {
            let u = 1.0 / (y * y);
            4.0 * u / ((1.0 + u) * (1.0 + u))
        }
    };
    h.radial_integral(kernel, &lambda_cut(lam))
}

/// `W_1(f, δ_{e_n})` at contraction `λ`: `b_n^{-1} ∫ 2y/√(1+y²) W dr`, `y = r e^{-λ}`.
pub fn w1_to_dirac(h: &RadialDensity, lam: f64) -> Result<f64, KineticError> {
    let kernel = |r: f64| {
        let y = r * (-lam).exp();
        if y <= 1.0 {
            2.0 * y / (1.0 + y * y).sqrt()
        } else {
            2.0 / (1.0 + 1.0 / (y * y)).sqrt()
        }
    };
    h.radial_integral(kernel, &lambda_cut(lam))
}

/// `W_2²(f, δ_{e_n}) = 2(1 - α)`.
pub fn w2sq_to_dirac(h: &RadialDensity, lam: f64) -> Result<f64, KineticError> {
    Ok(2.0 * one_minus_alpha(h, lam)?)
}

/// `e^{-λ} atanh(s)/s` with `s = √(1 - e^{-2λ})`, the value of
/// `∫_0^∞ r e^{-λ} / (√(1+r²e^{-2λ}) (1+r²)) dr`. For uniform data on the
/// circle, `W_1 = (4/π)` times this.
pub fn closed_form_w1_n2(lam: f64) -> f64 {
    let s2 = -(-2.0 * lam).exp_m1();
    if lam < 1e-4 {
        return (-lam).exp() * (1.0 + s2 / 3.0 + s2 * s2 / 5.0 + s2 * s2 * s2 / 7.0);
    }
    let s = s2.sqrt();
    // atanh(s) = ln(1+s) + λ because 1 - s = e^{-2λ}/(1+s).
    (-lam).exp() * (s.ln_1p() + lam) / s
}

/// Closed-form `W_2` kernels for uniform data:
/// `n = 2`: `π e^{-λ} / (2(1+e^{-λ}))`, with `1 - α = (4/π)·kernel`;
/// `n = 3`: `e^{-2λ}(2λ - 1 + e^{-2λ}) / (2(1-e^{-2λ})²)`, with `1 - α = 4·kernel`.
pub fn closed_form_w2sq_kernels(n: usize, lam: f64) -> Result<f64, KineticError> {
    match n {
        2 => {
            let a = (-lam).exp();
            Ok(PI * a / (2.0 * (1.0 + a)))
        }
        3 => {
            let x = 2.0 * lam;
            let e = (-x).exp();
            let one_minus_e = -(-x).exp_m1();
            if lam < 1e-4 {
                // (x - 1 + e^{-x}) / (1 - e^{-x})² expanded to fourth order
                let ratio = 0.5 + x / 3.0 + x * x / 12.0 + x.powi(3) / 180.0 - x.powi(4) / 720.0;
                return Ok(0.5 * e * ratio);
            }
            Ok(e * (x + (-x).exp_m1()) / (2.0 * one_minus_e * one_minus_e))
        }
        n => Err(KineticError::Unsupported(n)),
    }
}

/// Slow-decay construction: `1 - α(t) ≥ g(t)` for all `t`.
pub fn slow_decay_density(g: DecayFn, eps: f64, n: usize) -> Result<RadialDensity, KineticError> {
    g.validate()?;
    let g0 = g.value(0.0);
    if !(g0 < 0.5) {
        return Err(KineticError::Inadmissible(format!("g(0) = {g0} must be below 1/2")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(KineticError::Inadmissible(format!("eps = {eps} must lie in (0, 1)")));
    }
    let bound = 2.0 * g0 + 2.0 * eps * eps / 3.0 * (1.0 - g0);
    if !(bound < 1.0) {
        return Err(KineticError::Inadmissible(format!(
            "eps too large: 2g(0) + (2eps²/3)(1-g(0)) = {bound} ≥ 1"
        )));
    }
    let d = RadialDensity::build(n, Profile::SlowDecay { g, eps })?;
    let a0 = alpha_of_lambda(&d, 0.0)?;
    if !(a0 > DEGENERATE_ALPHA) {
        return Err(KineticError::DegenerateAlpha(a0));
    }
    Ok(d)
}

/// `λ(t)` and `α(t)` on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisymSolution {
    dim: usize,
    times: Vec<f64>,
    lambda: Vec<f64>,
    alpha: Vec<f64>,
    /// `dα/dt = α'(λ)·α`.
    alpha_rate: Vec<f64>,
}

/// Solves `λ' = α(λ)`, `λ(0) = 0` with classical RK4.
pub fn solve_lambda(h: &RadialDensity, t_end: f64, dt: f64) -> Result<AxisymSolution, KineticError> {
    if !(t_end > 0.0 && dt > 0.0 && t_end.is_finite()) {
        return Err(KineticError::OutOfRange { t: t_end, end: t_end });
    }
    let a0 = alpha_of_lambda(h, 0.0)?;
    if !(a0 > DEGENERATE_ALPHA) {
        return Err(KineticError::DegenerateAlpha(a0));
    }
    let steps = (t_end / dt).ceil() as usize;
    let step = t_end / steps as f64;
    let mut sol = AxisymSolution {
        dim: h.dim(),
        times: Vec::with_capacity(steps + 1),
        lambda: Vec::with_capacity(steps + 1),
        alpha: Vec::with_capacity(steps + 1),
        alpha_rate: Vec::with_capacity(steps + 1),
    };
    let mut lam = 0.0;
    let mut alpha = a0;
    for k in 0..=steps {
        sol.times.push(k as f64 * step);
        sol.lambda.push(lam);
        sol.alpha.push(alpha);
        sol.alpha_rate.push(dalpha_dlambda(h, lam)? * alpha);
        if k == steps {
            break;
        }
        let k1 = alpha;
        let k2 = alpha_of_lambda(h, lam + 0.5 * step * k1)?;
        let k3 = alpha_of_lambda(h, lam + 0.5 * step * k2)?;
        let k4 = alpha_of_lambda(h, lam + step * k3)?;
        lam += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        alpha = alpha_of_lambda(h, lam)?;
    }
    Ok(sol)
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = ((t - t0) / h).clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * d1
}

impl AxisymSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn lambda_series(&self) -> &[f64] {
        &self.lambda
    }

    pub fn alpha_series(&self) -> &[f64] {
        &self.alpha
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    fn locate(&self, t: f64) -> Result<usize, KineticError> {
        let end = self.t_end();
        if t < -1e-12 || t > end * (1.0 + 1e-12) + 1e-12 {
            return Err(KineticError::OutOfRange { t, end });
        }
        let last = self.times.len() - 1;
        Ok(match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p => (p - 1).min(last - 1),
        })
    }

    /// `λ(t)` by cubic Hermite interpolation (slopes `α`).
    pub fn lambda_at(&self, t: f64) -> Result<f64, KineticError> {
        let k = self.locate(t)?;
        Ok(hermite(
            self.times[k],
            self.times[k + 1],
            self.lambda[k],
            self.lambda[k + 1],
            self.alpha[k],
            self.alpha[k + 1],
            t,
        ))
    }

    /// `α(t)` by cubic Hermite interpolation.
    pub fn alpha_at(&self, t: f64) -> Result<f64, KineticError> {
        let k = self.locate(t)?;
        Ok(hermite(
            self.times[k],
            self.times[k + 1],
            self.alpha[k],
            self.alpha[k + 1],
            self.alpha_rate[k],
            self.alpha_rate[k + 1],
            t,
        ))
    }

    /// Writes `t, lambda, alpha, w1, w2` every `every` grid points.
    pub fn write_csv<W: Write>(&self, h: &RadialDensity, every: usize, mut out: W) -> Result<(), KineticError> {
        let io = |e: std::io::Error| KineticError::InvalidDensity(format!("write failed: {e}"));
        writeln!(out, "t,lambda,alpha,w1,w2").map_err(io)?;
        let last = self.times.len() - 1;
        for k in (0..=last).filter(|k| k % every.max(1) == 0 || *k == last) {
            let lam = self.lambda[k];
            let w1 = w1_to_dirac(h, lam)?;
            let w2 = w2sq_to_dirac(h, lam)?.sqrt();
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(self.times[k]),
                fmt17(lam),
                fmt17(self.alpha[k]),
                fmt17(w1),
                fmt17(w2)
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

/// The axisymmetric solution drives single vectors with `J(t) = α(t) e_n`.
impl AlignmentField for AxisymSolution {
    fn value(&self, t: f64) -> Vec<f64> {
        let mut j = vec![0.0; self.dim];
        j[self.dim - 1] = self.alpha_at(t.clamp(0.0, self.t_end())).expect("clamped time");
        j
    }

    fn range(&self) -> (f64, f64) {
        (0.0, self.t_end())
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// `z_0 e^{-λ(t)}`.
pub fn characteristic_map(z0: &[f64], sol: &AxisymSolution, t: f64) -> Result<Vec<f64>, KineticError> {
    let decay = (-sol.lambda_at(t)?).exp();
    Ok(z0.iter().map(|z| z * decay).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let (b2, c2) = constant_bn_cn(2).unwrap();
        assert!((b2 - PI / 2.0).abs() < 1e-12);
        assert!((c2 - PI).abs() < 1e-12);
        let (b3, c3) = constant_bn_cn(3).unwrap();
        assert!((b3 - 0.5).abs() < 1e-12);
        assert!((c3 - PI).abs() < 1e-12);
        assert!(constant_bn_cn(1).is_err());
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn uniform_alpha_is_zero() {
        for n in 2..=4 {
            let d = RadialDensity::uniform(n).unwrap();
            assert!(alpha_of_lambda(&d, 0.0).unwrap().abs() < 1e-10);
            assert!((w2sq_to_dirac(&d, 0.0).unwrap() - 2.0).abs() < 1e-10);
            // contracting the uniform measure toward e_n gives a positive mean
            assert!(alpha_of_lambda(&d, 0.7).unwrap() > 0.1);
        }
    }

    #[test]
    fn tilted_alpha_at_zero() {
        for n in 2..=4 {
            let d = RadialDensity::tilted(n, 0.5).unwrap();
            assert!((alpha_of_lambda(&d, 0.0).unwrap() - 0.5 / n as f64).abs() < 1e-10);
        }
        let d = RadialDensity::tilted(3, 0.5).unwrap();
        assert!((alpha_of_lambda(&d, 60.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(RadialDensity::tilted(3, 1.5).is_err());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let d2 = RadialDensity::uniform(2).unwrap();
        let d3 = RadialDensity::uniform(3).unwrap();
        for lam in [0.1, 1.0, 5.0, 15.0] {
            let w1 = w1_to_dirac(&d2, lam).unwrap();
            assert!((w1 - 4.0 / PI * closed_form_w1_n2(lam)).abs() < 1e-10 * w1.max(1e-300));
            let k2 = closed_form_w2sq_kernels(2, lam).unwrap();
            let oma2 = 1.0 - alpha_of_lambda(&d2, lam).unwrap();
            assert!((oma2 - 4.0 / PI * k2).abs() < 1e-10);
            let k3 = closed_form_w2sq_kernels(3, lam).unwrap();
            assert!((one_minus_alpha(&d3, lam).unwrap() - 4.0 * k3).abs() < 1e-10);
        }
        assert!((closed_form_w2sq_kernels(2, 0.0).unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((closed_form_w2sq_kernels(3, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((closed_form_w1_n2(0.0) - 1.0).abs() < 1e-15);
        // continuity across the series switch
        for n in [2usize, 3] {
            let a = closed_form_w2sq_kernels(n, 0.99999e-4).unwrap();
            let b = closed_form_w2sq_kernels(n, 1.00001e-4).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
        assert!((closed_form_w1_n2(0.99999e-4) - closed_form_w1_n2(1.00001e-4)).abs() < 1e-8);
        assert!(closed_form_w2sq_kernels(4, 1.0).is_err());
    }

    #[test]
    fn w1_kernel_asymptotics() {
        let ratio = |lam: f64| closed_form_w1_n2(lam) / (lam * (-lam).exp());
        assert!((ratio(15.0) - (1.0 + 2f64.ln() / 15.0)).abs() < 1e-9);
        assert!((ratio(70.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn slow_decay_admissibility() {
        let g = DecayFn::Exp { c: 0.4, tau: 10.0 };
        let d = slow_decay_density(g.clone(), 0.05, 2).unwrap();
        assert!((d.mass().unwrap() - 1.0).abs() < 1e-8);
        let a0 = alpha_of_lambda(&d, 0.0).unwrap();
        assert!(a0 > 0.198);
        assert!(slow_decay_density(DecayFn::Exp { c: 0.6, tau: 10.0 }, 0.05, 2).is_err());
        assert!(slow_decay_density(DecayFn::Exp { c: 0.1, tau: f64::INFINITY }, 0.05, 2).is_err());
        assert!(slow_decay_density(DecayFn::Exp { c: 0.49, tau: 1.0 }, 0.9, 2).is_err());
    }

    #[test]
    fn table_density() {
        // piecewise-linear table of the uniform profile, cut far out
        let r: Vec<f64> = (0..=400).map(|k| k as f64 * 0.25).collect();
        let h = vec![1.0; r.len()];
        let err = RadialDensity::table(3, r.clone(), h).unwrap_err();
        assert!(matches!(err, KineticError::NotNormalized(m) if m < 1.0));
        assert!(RadialDensity::table(3, vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn lambda_ode() {
        let d = RadialDensity::tilted(3, 0.5).unwrap();
        let sol = solve_lambda(&d, 10.0, 0.01).unwrap();
        for w in sol.alpha_series().windows(2) {
            assert!(w[1] >= w[0] - 1e-10);
        }
        for (t, l) in sol.times().iter().zip(sol.lambda_series()) {
            assert!(*l <= *t + 1e-12);
        }
        let l10 = sol.lambda_at(10.0).unwrap();
        assert!(l10 / 10.0 > 0.8);
        assert!(solve_lambda(&RadialDensity::uniform(3).unwrap(), 1.0, 0.01).is_err());
        let z = characteristic_map(&[0.3, -0.2], &sol, 0.0).unwrap();
        assert_eq!(z, vec![0.3, -0.2]);
        assert!(characteristic_map(&[0.3], &sol, 11.0).is_err());
    }
}
