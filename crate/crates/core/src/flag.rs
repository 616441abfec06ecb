//! Points of the flag manifold and the projective group action.
//!
//! For SL₂(ℝ) a point is a line through `(cos θ, sin θ)`, `θ ∈ [0, π)`.
//! For SL₂(ℂ) a point of ℂP¹ is carried to the unit sphere by the Hopf map
//! `[z₀ : z₁] ↦ (2 Re z₀z̄₁, 2 Im z₀z̄₁, |z₀|² − |z₁|²) / (|z₀|² + |z₁|²)`,
//! under which SU(2) acts by rotations and the Fubini–Study measure is the
//! round measure. The base point (the line of `e₁`) is θ = 0 resp. the
//! north pole.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Backend, GroupElement, Mat2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlagPoint {
    Line { theta: f64 },
    Sphere { xyz: [f64; 3] },
}

impl FlagPoint {
    pub fn line(theta: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        if t >= PI {
            t = 0.0;
        }
        FlagPoint::Line { theta: t }
    }

    pub fn sphere(xyz: [f64; 3]) -> Result<Self> {
        let n = (xyz[0] * xyz[0] + xyz[1] * xyz[1] + xyz[2] * xyz[2]).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Config("sphere point must be a finite nonzero vector".into()));
        }
        Ok(FlagPoint::Sphere { xyz: [xyz[0] / n, xyz[1] / n, xyz[2] / n] })
    }

    /// Point with polar angle `theta` and azimuth `phi`.
    pub fn spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        FlagPoint::Sphere { xyz: [st * cp, st * sp, ct] }
    }

    /// The point fixed by the upper-triangular subgroup.
    pub fn base(backend: Backend) -> Self {
        match backend {
            Backend::Sl2R => FlagPoint::Line { theta: 0.0 },
            Backend::Sl2C => FlagPoint::Sphere { xyz: [0.0, 0.0, 1.0] },
        }
    }

    /// Haar-distributed random point.
    pub fn random(backend: Backend, rng: &mut impl Rng) -> Self {
        match backend {
            Backend::Sl2R => FlagPoint::line(rng.random::<f64>() * PI),
            Backend::Sl2C => {
                let z = 2.0 * rng.random::<f64>() - 1.0;
                let phi = 2.0 * PI * rng.random::<f64>();
                let s = (1.0 - z * z).max(0.0).sqrt();
                FlagPoint::Sphere { xyz: [s * phi.cos(), s * phi.sin(), z] }
            }
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            FlagPoint::Line { .. } => Backend::Sl2R,
            FlagPoint::Sphere { .. } => Backend::Sl2C,
        }
    }

    /// A unit vector spanning the line. The sphere chart switches
    /// hemispheres so the normalizing denominator stays ≥ 2.
    pub fn vector(&self) -> [C64; 2] {
        match *self {
            FlagPoint::Line { theta } => {
                let (s, c) = theta.sin_cos();
                [c.into(), s.into()]
            }
            FlagPoint::Sphere { xyz: [x, y, z] } => {
                if z >= 0.0 {
                    let n = (2.0 * (1.0 + z)).sqrt();
                    [C64::new((1.0 + z) / n, 0.0), C64::new(x / n, -y / n)]
                } else {
                    let n = (2.0 * (1.0 - z)).sqrt();
                    [C64::new(x / n, y / n), C64::new((1.0 - z) / n, 0.0)]
                }
            }
        }
    }

    /// The line spanned by a nonzero vector.
    pub fn from_vector(backend: Backend, v: [C64; 2]) -> Self {
        match backend {
            Backend::Sl2R => FlagPoint::line(v[1].re.atan2(v[0].re)),
            Backend::Sl2C => {
                let n2 = v[0].norm_sqr() + v[1].norm_sqr();
                let w = v[0] * v[1].conj();
                let x = 2.0 * w.re / n2;
                let y = 2.0 * w.im / n2;
                let z = (v[0].norm_sqr() - v[1].norm_sqr()) / n2;
                let n = (x * x + y * y + z * z).sqrt();
                FlagPoint::Sphere { xyz: [x / n, y / n, z / n] }
            }
        }
    }

    /// A compact `k` with `k · base = self`.
    pub fn compact_representative(&self) -> GroupElement {
        let v = self.vector();
        let m = Mat2::from_columns(v, [-v[1].conj(), v[0].conj()]);
        GroupElement::new(self.backend(), m).expect("unit vector gives a unitary matrix")
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            FlagPoint::Line { theta } => Some(theta),
            FlagPoint::Sphere { .. } => None,
        }
    }

    pub fn xyz(&self) -> Option<[f64; 3]> {
        match *self {
            FlagPoint::Sphere { xyz } => Some(xyz),
            FlagPoint::Line { .. } => None,
        }
    }

    /// Chordal distance (on the circle of angles 2θ, resp. in ℝ³).
    pub fn distance(&self, other: &FlagPoint) -> f64 {
        match (*self, *other) {
            (FlagPoint::Line { theta: a }, FlagPoint::Line { theta: b }) => {
                let d = (a - b).rem_euclid(PI);
                d.min(PI - d)
            }
            (FlagPoint::Sphere { xyz: a }, FlagPoint::Sphere { xyz: b }) => {
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            }
            _ => f64::INFINITY,
        }
    }

    /// Deviation from the manifold (|θ| range resp. | ‖x‖ − 1 |).
    pub fn manifold_defect(&self) -> f64 {
        match *self {
            FlagPoint::Line { theta } => {
                if (0.0..PI).contains(&theta) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            FlagPoint::Sphere { xyz } => ((xyz[0] * xyz[0] + xyz[1] * xyz[1] + xyz[2] * xyz[2]).sqrt() - 1.0).abs(),
        }
    }
}

/// The projective action `g · [v] = [g v]`.
pub fn act_on_flag(g: &GroupElement, xi: &FlagPoint) -> FlagPoint {
    FlagPoint::from_vector(g.backend(), g.apply(xi.vector()))
}
