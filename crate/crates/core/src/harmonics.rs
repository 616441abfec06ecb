//! Orthonormal harmonic bases on the flag manifold, normalized against the
//! probability Haar measure.
//!
//! * SL₂(ℝ): `1, √2 cos 2nθ, √2 sin 2nθ` for `1 ≤ n ≤ cutoff`. The isotypic
//!   label is `n`.
//! * SL₂(ℂ): complex spherical harmonics `Y_ℓ^m` (Condon–Shortley phase)
//!   scaled by `√(4π)`, for `ℓ ≤ cutoff`, `−ℓ ≤ m ≤ ℓ`.
//!
//! Labels are enumerated by ascending τ, then ascending inner index
//! (constant, cos, sin; resp. `m` from `−ℓ` to `ℓ`). This order is part of
//! the file formats.

use std::f64::consts::SQRT_2;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flag::FlagPoint;
use crate::group::Backend;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InnerIndex {
    Constant,
    Cos,
    Sin,
    Order(i32),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisLabel {
    pub tau: u32,
    pub inner_index: InnerIndex,
    /// c(τ) = 1 + Laplace–Beltrami eigenvalue.
    pub casimir_value: f64,
    pub dim_tau: u32,
}

impl BasisLabel {
    pub fn short_name(&self) -> String {
        match self.inner_index {
            InnerIndex::Constant => "n0".to_string(),
            InnerIndex::Cos => format!("n{}c", self.tau),
            InnerIndex::Sin => format!("n{}s", self.tau),
            InnerIndex::Order(m) => format!("l{}m{}", self.tau, m),
        }
    }
}

/// Laplace–Beltrami eigenvalue on the isotypic space τ: `4n²` on the circle
/// `K/M` parametrized by θ, `ℓ(ℓ+1)` on the round sphere.
pub fn laplace_eigenvalue(backend: Backend, tau: u32) -> u64 {
    let t = u64::from(tau);
    match backend {
        Backend::Sl2R => 4 * t * t,
        Backend::Sl2C => t * (t + 1),
    }
}

/// `c(τ) = 1 + λ_τ`.
pub fn casimir_value(backend: Backend, tau: u32) -> f64 {
    (1 + laplace_eigenvalue(backend, tau)) as f64
}

pub fn dim_tau(backend: Backend, tau: u32) -> u32 {
    match backend {
        Backend::Sl2R => {
            if tau == 0 {
                1
            } else {
                2
            }
        }
        Backend::Sl2C => 2 * tau + 1,
    }
}

/// Number of basis functions with `τ ≤ cutoff`.
pub fn basis_dim(backend: Backend, cutoff: u32) -> usize {
    let c = cutoff as usize;
    match backend {
        Backend::Sl2R => 2 * c + 1,
        Backend::Sl2C => (c + 1) * (c + 1),
    }
}

/// Index range of the labels with isotypic label τ.
pub fn tau_range(backend: Backend, tau: u32) -> std::ops::Range<usize> {
    let t = tau as usize;
    match backend {
        Backend::Sl2R => {
            if t == 0 {
                0..1
            } else {
                2 * t - 1..2 * t + 1
            }
        }
        Backend::Sl2C => t * t..(t + 1) * (t + 1),
    }
}

/// The canonical basis up to a cutoff on τ.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    backend: Backend,
    cutoff: u32,
    labels: Vec<BasisLabel>,
}

impl HarmonicBasis {
    pub fn new(backend: Backend, cutoff: u32) -> Self {
        let mut labels = Vec::with_capacity(basis_dim(backend, cutoff));
        for tau in 0..=cutoff {
            let casimir_value = casimir_value(backend, tau);
            let dim_tau = dim_tau(backend, tau);
            let mut push = |inner_index| labels.push(BasisLabel { tau, inner_index, casimir_value, dim_tau });
            match backend {
                Backend::Sl2R if tau == 0 => push(InnerIndex::Constant),
                Backend::Sl2R => {
                    push(InnerIndex::Cos);
                    push(InnerIndex::Sin);
                }
                Backend::Sl2C => {
                    let l = tau as i32;
                    for m in -l..=l {
                        push(InnerIndex::Order(m));
                    }
                }
            }
        }
        HarmonicBasis { backend, cutoff, labels }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn index_of(&self, tau: u32, inner: InnerIndex) -> Option<usize> {
        if tau > self.cutoff {
            return None;
        }
        let idx = match (self.backend, inner) {
            (Backend::Sl2R, InnerIndex::Constant) if tau == 0 => 0,
            (Backend::Sl2R, InnerIndex::Cos) if tau > 0 => 2 * tau as usize - 1,
            (Backend::Sl2R, InnerIndex::Sin) if tau > 0 => 2 * tau as usize,
            (Backend::Sl2C, InnerIndex::Order(m)) if m.unsigned_abs() <= tau => {
                let l = tau as i64;
                (l * l + l + m as i64) as usize
            }
            _ => return None,
        };
        Some(idx)
    }

    /// Values of every basis function at ξ, in canonical order.
    pub fn eval_all(&self, xi: &FlagPoint, out: &mut [C64]) {
        debug_assert_eq!(out.len(), self.dim());
        match *xi {
            FlagPoint::Line { theta } => eval_circle(self.cutoff, theta, out),
            FlagPoint::Sphere { xyz } => eval_sphere(self.cutoff, xyz, out),
        }
    }

    pub fn eval_vec(&self, xi: &FlagPoint) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        self.eval_all(xi, &mut out);
        out
    }

    pub fn eval(&self, index: usize, xi: &FlagPoint) -> C64 {
        let label = self.labels[index];
        match (*xi, label.inner_index) {
            (FlagPoint::Line { .. }, InnerIndex::Constant) => C64::new(1.0, 0.0),
            (FlagPoint::Line { theta }, InnerIndex::Cos) => {
                C64::from(SQRT_2 * (2.0 * f64::from(label.tau) * theta).cos())
            }
            (FlagPoint::Line { theta }, InnerIndex::Sin) => {
                C64::from(SQRT_2 * (2.0 * f64::from(label.tau) * theta).sin())
            }
            _ => {
                let small = HarmonicBasis::new(self.backend, label.tau);
                small.eval_vec(xi)[index]
            }
        }
    }
}

fn eval_circle(cutoff: u32, theta: f64, out: &mut [C64]) {
    out[0] = C64::new(1.0, 0.0);
    for n in 1..=cutoff as usize {
        let (s, c) = (2.0 * n as f64 * theta).sin_cos();
        out[2 * n - 1] = C64::from(SQRT_2 * c);
        out[2 * n] = C64::from(SQRT_2 * s);
    }
}

/// Fully normalized associated Legendre functions `P̄_ℓ^m(cos θ)` for
/// `0 ≤ m ≤ ℓ ≤ lmax`, including the Condon–Shortley phase and the
/// `√(2ℓ+1)` factor so that `P̄_ℓ^m(cos θ) e^{imφ}` has unit mean square on
/// the sphere. Stored at `ℓ(ℓ+1)/2 + m`.
pub fn legendre_table(lmax: u32, cos_theta: f64, sin_theta: f64) -> Vec<f64> {
    let lmax = lmax as usize;
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut p = vec![0.0; (lmax + 1) * (lmax + 2) / 2];
    p[0] = 1.0;
    for m in 1..=lmax {
        let mf = m as f64;
        p[idx(m, m)] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_theta * p[idx(m - 1, m - 1)];
    }
    for m in 0..lmax {
        p[idx(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * cos_theta * p[idx(m, m)];
    }
    for m in 0..=lmax {
        let mf = m as f64;
        for l in m + 2..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[idx(l, m)] = a * (cos_theta * p[idx(l - 1, m)] - b * p[idx(l - 2, m)]);
        }
    }
    p
}

fn eval_sphere(cutoff: u32, xyz: [f64; 3], out: &mut [C64]) {
    let [x, y, z] = xyz;
    let rho = x.hypot(y);
    let e_phi = if rho > 0.0 { C64::new(x / rho, y / rho) } else { C64::new(1.0, 0.0) };
    let table = legendre_table(cutoff, z, rho);
    let lmax = cutoff as usize;
    let mut phase = C64::new(1.0, 0.0);
    for m in 0..=lmax {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for l in m..=lmax {
            let p = table[l * (l + 1) / 2 + m];
            let v = phase * p;
            let base = l * l + l;
            out[base + m] = v;
            if m > 0 {
                out[base - m] = v.conj() * sign;
            }
        }
        phase *= e_phi;
    }
}

/// A function on the flag manifold as coefficients over the canonical basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionCoefficients {
    pub backend: Backend,
    pub cutoff: u32,
    pub values: Vec<C64>,
}

impl FunctionCoefficients {
    pub fn zeros(backend: Backend, cutoff: u32) -> Self {
        FunctionCoefficients { backend, cutoff, values: vec![C64::new(0.0, 0.0); basis_dim(backend, cutoff)] }
    }

    pub fn from_values(backend: Backend, cutoff: u32, values: Vec<C64>) -> Result<Self> {
        if values.len() != basis_dim(backend, cutoff) {
            return Err(Error::Config(format!(
                "{} coefficients do not match cutoff {cutoff} ({} expected)",
                values.len(),
                basis_dim(backend, cutoff)
            )));
        }
        Ok(FunctionCoefficients { backend, cutoff, values })
    }

    /// Unit coefficient at one label.
    pub fn unit(backend: Backend, cutoff: u32, index: usize) -> Self {
        let mut u = Self::zeros(backend, cutoff);
        u.values[index] = C64::new(1.0, 0.0);
        u
    }

    /// Uniform random coefficients on the labels with τ in `band`, zero
    /// elsewhere. Real for SL₂(ℝ), complex for SL₂(ℂ).
    pub fn random(backend: Backend, cutoff: u32, band: std::ops::RangeInclusive<u32>, rng: &mut impl Rng) -> Self {
        let mut u = Self::zeros(backend, cutoff);
        for tau in band {
            if tau > cutoff {
                break;
            }
            for i in tau_range(backend, tau) {
                let re = 2.0 * rng.random::<f64>() - 1.0;
                let im = if backend.is_real() { 0.0 } else { 2.0 * rng.random::<f64>() - 1.0 };
                u.values[i] = C64::new(re, im);
            }
        }
        u
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self, other⟩ = Σ aᵢ conj(bᵢ)`.
    pub fn inner(&self, other: &FunctionCoefficients) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        FunctionCoefficients {
            backend: self.backend,
            cutoff: self.cutoff,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn normalized(&self) -> Self {
        self.scaled(C64::from(1.0 / self.norm()))
    }

    pub fn sub(&self, other: &FunctionCoefficients) -> Self {
        FunctionCoefficients {
            backend: self.backend,
            cutoff: self.cutoff,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// Zero-pads or truncates to another cutoff.
    pub fn with_cutoff(&self, cutoff: u32) -> Self {
        let mut out = Self::zeros(self.backend, cutoff);
        let n = out.values.len().min(self.values.len());
        out.values[..n].copy_from_slice(&self.values[..n]);
        out
    }

    pub fn synthesize(&self, xi: &FlagPoint) -> C64 {
        let basis = HarmonicBasis::new(self.backend, self.cutoff);
        self.synthesize_with(&basis, xi)
    }

    pub fn synthesize_with(&self, basis: &HarmonicBasis, xi: &FlagPoint) -> C64 {
        let mut vals = vec![C64::new(0.0, 0.0); basis.dim()];
        basis.eval_all(xi, &mut vals);
        vals.iter().zip(&self.values).map(|(e, c)| e * c).sum()
    }

    /// Largest imaginary part (nonzero only for SL₂(ℂ) coefficients).
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}
