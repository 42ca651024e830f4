//! Alignment dynamics of unit vectors on the sphere.
//!
//! Particles `v_i` with masses `m_i` follow `dv_i/dt = P_{v_i⊥} J` where
//! `J = Σ m_i v_i`. The crate integrates that system, classifies its long-time
//! regime, computes the unique point that flows to `-Ω_∞`, solves the
//! axisymmetric continuum equation through stereographic characteristics and
//! measures Wasserstein distances to the one- and two-atom limits.

pub mod asymptotics;
pub mod backward;
pub mod experiments;
pub mod kinetic;
pub mod measure;
pub mod one_back;
pub mod particles;
pub mod quadrature;
pub mod sphere;

pub use particles::{Trajectory, WeightedConfiguration};
pub use sphere::{TangentVector, UnitVector};
