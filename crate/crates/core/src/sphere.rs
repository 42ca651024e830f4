//! Elementary geometry of the unit sphere `S^{n-1}`.
//!
//! Points are stored as plain coordinate vectors; the dimension `n` is a
//! runtime quantity. The stereographic maps are taken from the south pole
//! `-e_n`, so the north pole `e_n` maps to the origin of `R^{n-1}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|v| - 1` for values handed out by this module.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Minimum admissible `1 + v·e_n` for the stereographic projection.
pub const SOUTH_POLE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SphereError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sphere dimension must satisfy n >= 2, got n = {0}")]
    DimensionTooSmall(usize),
    #[error("cannot normalize a vector of norm {0:e}")]
    ZeroVector(f64),
    #[error("point is at the south pole (1 + v·e_n = {0:e}); stereographic projection is singular there")]
    SouthPole(f64),
    #[error("non-finite coordinate")]
    NonFinite,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dims(expected: usize, found: usize) -> Result<(), SphereError> {
    if expected == found {
        Ok(())
    } else {
        Err(SphereError::DimensionMismatch { expected, found })
    }
}

/// A point of `S^{n-1}`, `n >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `coords` onto the sphere.
    pub fn new(coords: Vec<f64>) -> Result<Self, SphereError> {
        renormalize(&coords)
    }

    /// The basis vector `e_k` (zero-based `k`) of `R^n`.
    pub fn basis(n: usize, k: usize) -> Result<Self, SphereError> {
        if n < 2 {
            return Err(SphereError::DimensionTooSmall(n));
        }
        assert!(k < n, "basis index {k} out of range for n = {n}");
        let mut coords = vec![0.0; n];
        coords[k] = 1.0;
        Ok(UnitVector(coords))
    }

    /// The north pole `e_n`.
    pub fn north(n: usize) -> Result<Self, SphereError> {
        Self::basis(n, n.saturating_sub(1))
    }

    /// Wraps coordinates already known to be unit length (up to rounding).
    pub(crate) fn from_unit_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!((norm(&coords) - 1.0).abs() < 1e-9);
        UnitVector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn neg(&self) -> UnitVector {
        UnitVector(self.0.iter().map(|x| -x).collect())
    }
}

impl<'de> Deserialize<'de> for UnitVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(deserializer)?;
        UnitVector::new(coords).map_err(serde::de::Error::custom)
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A vector in the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: UnitVector,
    pub vec: Vec<f64>,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }
}

/// `P_{v⊥} u = u - (v·u) v`.
pub fn project_tangent(v: &UnitVector, u: &[f64]) -> Result<TangentVector, SphereError> {
    check_dims(v.dim(), u.len())?;
    let vu = v.dot(u);
    let vec = u.iter().zip(v.coords()).map(|(ui, vi)| ui - vu * vi).collect();
    Ok(TangentVector {
        base: v.clone(),
        vec,
    })
}

/// `w / |w|`.
pub fn renormalize(w: &[f64]) -> Result<UnitVector, SphereError> {
    if w.len() < 2 {
        return Err(SphereError::DimensionTooSmall(w.len()));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(SphereError::NonFinite);
    }
    // scale first so that tiny and huge inputs do not under/overflow
    let scale = w.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale <= 1e-300 {
        return Err(SphereError::ZeroVector(scale));
    }
    let scaled: Vec<f64> = w.iter().map(|x| x / scale).collect();
    let r = norm(&scaled);
    Ok(UnitVector(scaled.into_iter().map(|x| x / r).collect()))
}

/// Stereographic projection `s(v) = P_{e_n⊥} v / (1 + v·e_n)`, returned as
/// the first `n - 1` coordinates.
pub fn stereo_forward(v: &UnitVector) -> Result<Vec<f64>, SphereError> {
    let n = v.dim();
    let denom = 1.0 + v.coords()[n - 1];
    if denom <= SOUTH_POLE_GUARD {
        return Err(SphereError::SouthPole(denom));
    }
    Ok(v.coords()[..n - 1].iter().map(|x| x / denom).collect())
}

/// Inverse stereographic map `p(z) = (2z, 1 - |z|²) / (1 + |z|²)`.
pub fn stereo_inverse(z: &[f64]) -> UnitVector {
    let zz = dot(z, z);
    let mut coords: Vec<f64> = z.iter().map(|x| 2.0 * x / (1.0 + zz)).collect();
    coords.push((1.0 - zz) / (1.0 + zz));
    UnitVector(coords)
}

/// Chordal distance `|u - v|` between two unit vectors.
///
/// Evaluated as `2 sin(θ/2)` with `θ = atan2(|u∧v|, u·v)` so that nearly
/// equal and nearly antipodal pairs keep full relative precision.
pub fn chord_distance(u: &UnitVector, v: &UnitVector) -> Result<f64, SphereError> {
    check_dims(u.dim(), v.dim())?;
    let (a, b) = (u.coords(), v.coords());
    let mut wedge2 = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let w = a[i] * b[j] - a[j] * b[i];
            wedge2 += w * w;
        }
    }
    let theta = wedge2.sqrt().atan2(dot(a, b));
    Ok(2.0 * (0.5 * theta).sin())
}

/// Rotation acting on coordinate planes; used to move `e_n` onto a target axis.
///
/// Returns the orthogonal matrix (row-major, `n × n`) of the reflection-free
/// rotation in the plane spanned by `e_n` and `target` mapping `e_n` to `target`.
pub fn rotation_from_north(target: &UnitVector) -> Vec<Vec<f64>> {
    let n = target.dim();
    let t = target.coords();
    let c = t[n - 1];
    let mut rot = vec![vec![0.0; n]; n];
    for (i, row) in rot.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    // w = P_{e_n⊥} target
    let w: Vec<f64> = t[..n - 1].to_vec();
    let s = norm(&w);
    if s < 1e-300 {
        if c < 0.0 {
            // half-turn in the (e_1, e_n) plane
            rot[0][0] = -1.0;
            rot[n - 1][n - 1] = -1.0;
        }
        return rot;
    }
    let u: Vec<f64> = w.iter().map(|x| x / s).collect();
    // R = I + s (u e_n^T - e_n u^T) + (c - 1)(u u^T + e_n e_n^T)
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            rot[i][j] += (c - 1.0) * u[i] * u[j];
        }
        rot[i][n - 1] += s * u[i];
        rot[n - 1][i] -= s * u[i];
    }
    rot[n - 1][n - 1] += c - 1.0;
    rot
}

/// Applies a row-major square matrix to a vector.
pub fn apply_matrix(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uv(c: &[f64]) -> UnitVector {
        UnitVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let e1 = UnitVector::basis(2, 0).unwrap();
        assert_eq!(project_tangent(&e1, &[1.0, 0.0]).unwrap().vec, vec![0.0, 0.0]);
        assert_eq!(project_tangent(&e1, &[0.0, 1.0]).unwrap().vec, vec![0.0, 1.0]);
        let d = uv(&[1.0, 1.0]);
        let p = project_tangent(&d, &[1.0, 0.0]).unwrap().vec;
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] + 0.5).abs() < 1e-15);
        assert!(matches!(
            project_tangent(&d, &[1.0, 0.0, 0.0]),
            Err(SphereError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn renormalize_examples() {
        let v = renormalize(&[3.0, 4.0]).unwrap();
        assert!((v.coords()[0] - 0.6).abs() < 1e-15 && (v.coords()[1] - 0.8).abs() < 1e-15);
        assert!(matches!(renormalize(&[0.0, 0.0, 0.0]), Err(SphereError::ZeroVector(_))));
        let v = renormalize(&[1.0 + 1e-9, 0.0]).unwrap();
        assert!((v.coords()[0] - 1.0).abs() < 1e-12);
        assert!(matches!(renormalize(&[1.0]), Err(SphereError::DimensionTooSmall(1))));
    }

    #[test]
    fn stereo_examples() {
        let north = UnitVector::north(3).unwrap();
        assert_eq!(stereo_forward(&north).unwrap(), vec![0.0, 0.0]);
        let eq = UnitVector::basis(2, 0).unwrap();
        assert!((stereo_forward(&eq).unwrap()[0] - 1.0).abs() < 1e-15);
        let th = std::f64::consts::FRAC_PI_3;
        let v = uv(&[th.sin(), 0.0, th.cos()]);
        let z = stereo_forward(&v).unwrap();
        assert!((z[0] - 1.0 / 3f64.sqrt()).abs() < 1e-15 && z[1] == 0.0);
        assert!(matches!(
            stereo_forward(&north.neg()),
            Err(SphereError::SouthPole(_))
        ));

        assert_eq!(stereo_inverse(&[0.0, 0.0]).coords(), &[0.0, 0.0, 1.0]);
        let p = stereo_inverse(&[1.0]);
        assert!((p.coords()[0] - 1.0).abs() < 1e-15 && p.coords()[1].abs() < 1e-15);
        let p = stereo_inverse(&[0.6, 0.8]);
        assert!(p.coords()[2].abs() < 1e-15);
    }

    #[test]
    fn chord_examples() {
        let a = uv(&[0.3, -0.2, 0.9]);
        assert_eq!(chord_distance(&a, &a).unwrap(), 0.0);
        assert!((chord_distance(&a, &a.neg()).unwrap() - 2.0).abs() < 1e-15);
        let e1 = UnitVector::basis(3, 0).unwrap();
        let e2 = UnitVector::basis(3, 1).unwrap();
        assert!((chord_distance(&e1, &e2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        // tiny separations keep relative precision
        let b = uv(&[1e-20, 0.0, 1.0]);
        let c = UnitVector::north(3).unwrap();
        assert!((chord_distance(&b, &c).unwrap() / 1e-20 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_maps_north_to_target() {
        for t in [[0.3, -0.4, 0.5], [0.0, 0.0, -1.0], [1.0, 2.0, -0.1]] {
            let target = uv(&t);
            let r = rotation_from_north(&target);
            let img = apply_matrix(&r, UnitVector::north(3).unwrap().coords());
            for (a, b) in img.iter().zip(target.coords()) {
                assert!((a - b).abs() < 1e-14);
            }
            // orthogonality
            for i in 0..3 {
                for j in 0..3 {
                    let s: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                    assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
        }
    }
}
