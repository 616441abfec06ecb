//! Quadrature on the flag manifold and projection onto the harmonic basis.
//!
//! A rule of band limit `B` integrates exactly every polynomial of degree
//! `≤ B` in the harmonic variables: trigonometric polynomials in `2θ` of
//! degree `≤ B` on the circle (`B + 1` uniform nodes), and spherical
//! polynomials of degree `≤ B` on the sphere (`⌈(B+1)/2⌉` Gauss–Legendre
//! rings in `cos θ` times `B + 1` uniform azimuths). Products of two basis
//! functions up to cutoff `L` are integrated exactly when `B ≥ 2L`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flag::FlagPoint;
use crate::group::Backend;
use crate::harmonics::{legendre_table, FunctionCoefficients, HarmonicBasis};

/// Gauss–Legendre nodes and weights on `[−1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Clone, Debug)]
enum Layout {
    /// Circle: `n` uniform nodes `θ_q = π q / n`.
    Uniform { n: usize },
    /// Sphere: Gauss–Legendre rings in `cos θ`, `n_phi` uniform azimuths.
    Rings { cos_theta: Vec<f64>, ring_weight: Vec<f64>, n_phi: usize },
}

/// A positive quadrature rule for the probability Haar measure.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    backend: Backend,
    band_limit: u32,
    layout: Layout,
    nodes: Vec<FlagPoint>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds and verifies a rule exact up to `band_limit`.
    pub fn new(backend: Backend, band_limit: u32) -> Result<Self> {
        let b = band_limit as usize;
        let (layout, nodes, weights) = match backend {
            Backend::Sl2R => {
                let n = b + 1;
                let nodes = (0..n).map(|q| FlagPoint::line(PI * q as f64 / n as f64)).collect();
                (Layout::Uniform { n }, nodes, vec![1.0 / n as f64; n])
            }
            Backend::Sl2C => {
                let n_theta = (b + 2) / 2;
                let n_phi = b + 1;
                let (x, w) = gauss_legendre(n_theta);
                let mut nodes = Vec::with_capacity(n_theta * n_phi);
                let mut weights = Vec::with_capacity(n_theta * n_phi);
                for (&ct, &wt) in x.iter().zip(&w) {
                    let st = (1.0 - ct * ct).max(0.0).sqrt();
                    for p in 0..n_phi {
                        let phi = 2.0 * PI * p as f64 / n_phi as f64;
                        nodes.push(FlagPoint::Sphere { xyz: [st * phi.cos(), st * phi.sin(), ct] });
                        weights.push(0.5 * wt / n_phi as f64);
                    }
                }
                let ring_weight = w.iter().map(|wt| 0.5 * wt / n_phi as f64).collect();
                (Layout::Rings { cos_theta: x, ring_weight, n_phi }, nodes, weights)
            }
        };
        let rule = QuadratureRule { backend, band_limit, layout, nodes, weights };
        rule.verify_exactness()?;
        Ok(rule)
    }

    /// Rule with band limit `oversampling × cutoff` (at least `2 × cutoff`).
    pub fn for_cutoff(backend: Backend, cutoff: u32, oversampling: u32) -> Result<Self> {
        if oversampling < 2 {
            return Err(Error::Config(format!("oversampling {oversampling} must be at least 2")));
        }
        Self::new(backend, (oversampling * cutoff).max(2))
    }

    /// Rule for pullbacks `u ∘ g` of functions band-limited to `cutoff`,
    /// where `g` stretches the flag manifold by at most `distortion`
    /// (`e^{2t}` for Cartan coordinate `t`). The band is the larger of
    /// `oversampling × cutoff` and `2(1 + distortion) × cutoff + 40`; the
    /// factor 2 covers the tail beyond the largest local frequency.
    pub fn for_pullback(backend: Backend, cutoff: u32, oversampling: u32, distortion: f64) -> Result<Self> {
        if oversampling < 2 {
            return Err(Error::Config(format!("oversampling {oversampling} must be at least 2")));
        }
        let stretched = (2.0 * (1.0 + distortion.max(1.0)) * cutoff as f64).ceil() as u32 + 40;
        Self::new(backend, (oversampling * cutoff).max(stretched))
    }

    fn verify_exactness(&self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::QuadratureExactness { moment: 0, error: (total - 1.0).abs() });
        }
        match &self.layout {
            Layout::Uniform { .. } => {
                for f in 1..=self.band_limit {
                    let s: C64 = self
                        .nodes
                        .iter()
                        .zip(&self.weights)
                        .map(|(xi, w)| C64::from_polar(*w, 2.0 * f as f64 * xi.theta().unwrap()))
                        .sum();
                    if s.norm() > 1e-12 {
                        return Err(Error::QuadratureExactness { moment: f, error: s.norm() });
                    }
                }
            }
            Layout::Rings { cos_theta, ring_weight, n_phi } => {
                // ∫ P_p(cos θ) = 0 for p ≥ 1; azimuthal exactness holds by
                // construction for |m| < n_phi.
                let np = *n_phi as f64;
                for p in 1..=self.band_limit as usize {
                    let s: f64 = cos_theta
                        .iter()
                        .zip(ring_weight)
                        .map(|(&x, &w)| w * np * legendre_and_derivative(p, x).0)
                        .sum();
                    if s.abs() > 1e-12 {
                        return Err(Error::QuadratureExactness { moment: p as u32, error: s.abs() });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn band_limit(&self) -> u32 {
        self.band_limit
    }

    pub fn nodes(&self) -> &[FlagPoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, samples: &[C64]) -> C64 {
        samples.iter().zip(&self.weights).map(|(s, w)| s * *w).sum()
    }

    fn check_band(&self, basis: &HarmonicBasis) -> Result<()> {
        let needed = 2 * basis.cutoff();
        if self.band_limit < needed || basis.backend() != self.backend {
            return Err(Error::Bandlimit { band: self.band_limit, cutoff: basis.cutoff(), needed });
        }
        Ok(())
    }

    /// Samples of a band-limited function at the nodes.
    pub fn sample(&self, basis: &HarmonicBasis, u: &FunctionCoefficients) -> Vec<C64> {
        self.nodes.par_iter().map(|xi| u.synthesize_with(basis, xi)).collect()
    }

    /// Coefficients of the function with the given node samples.
    pub fn analyze(&self, basis: &HarmonicBasis, samples: &[C64]) -> Result<FunctionCoefficients> {
        if samples.len() != self.len() {
            return Err(Error::Config("sample count does not match quadrature".into()));
        }
        let m = self.project(basis, 1, |q, _, out| out[0] = samples[q])?;
        FunctionCoefficients::from_values(basis.backend(), basis.cutoff(), m.column(0).iter().copied().collect())
    }

    /// Projects `ncols` functions, given pointwise by `f(node index, node,
    /// out)`, onto the basis. Returns the `dim × ncols` coefficient matrix
    /// `Σ_q w_q conj(e_i(ξ_q)) f_j(ξ_q)`.
    ///
    /// Node evaluation runs in parallel; every reduction happens in a fixed
    /// order, so the result does not depend on the thread count.
    pub fn project<F>(&self, basis: &HarmonicBasis, ncols: usize, f: F) -> Result<DMatrix<C64>>
    where
        F: Fn(usize, &FlagPoint, &mut [C64]) + Sync,
    {
        self.check_band(basis)?;
        let dim = basis.dim();
        match &self.layout {
            Layout::Uniform { n } => {
                let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..*n)
                    .into_par_iter()
                    .map(|q| {
                        let xi = &self.nodes[q];
                        let mut vals = vec![C64::new(0.0, 0.0); ncols];
                        f(q, xi, &mut vals);
                        let w = self.weights[q];
                        let e: Vec<C64> = basis.eval_vec(xi).into_iter().map(|e| e.conj() * w).collect();
                        (e, vals)
                    })
                    .collect();
                let a = DMatrix::from_fn(dim, *n, |i, q| rows[q].0[i]);
                let b = DMatrix::from_fn(*n, ncols, |q, j| rows[q].1[j]);
                Ok(a * b)
            }
            Layout::Rings { cos_theta, ring_weight, n_phi } => {
                let lmax = basis.cutoff() as usize;
                let nm = 2 * lmax + 1;
                let n_phi = *n_phi;
                // e^{-imφ_p} for m = −L..L.
                let dft = DMatrix::from_fn(nm, n_phi, |mi, p| {
                    let m = mi as f64 - lmax as f64;
                    C64::from_polar(1.0, -m * 2.0 * PI * p as f64 / n_phi as f64)
                });
                // Per ring: azimuthal Fourier coefficients S[m][j].
                let rings: Vec<DMatrix<C64>> = (0..cos_theta.len())
                    .into_par_iter()
                    .map(|r| {
                        let mut vals = DMatrix::zeros(n_phi, ncols);
                        let mut buf = vec![C64::new(0.0, 0.0); ncols];
                        for p in 0..n_phi {
                            let q = r * n_phi + p;
                            f(q, &self.nodes[q], &mut buf);
                            for j in 0..ncols {
                                vals[(p, j)] = buf[j];
                            }
                        }
                        &dft * vals
                    })
                    .collect();
                let tables: Vec<Vec<f64>> = cos_theta
                    .iter()
                    .map(|&x| legendre_table(basis.cutoff(), x, (1.0 - x * x).max(0.0).sqrt()))
                    .collect();
                let per_m: Vec<(i64, DMatrix<C64>)> = (-(lmax as i64)..=lmax as i64)
                    .into_par_iter()
                    .map(|m| {
                        let ma = m.unsigned_abs() as usize;
                        let sign = if m < 0 && ma % 2 == 1 { -1.0 } else { 1.0 };
                        let nl = lmax + 1 - ma;
                        let a = DMatrix::from_fn(nl, cos_theta.len(), |li, r| {
                            let l = ma + li;
                            C64::from(sign * ring_weight[r] * tables[r][l * (l + 1) / 2 + ma])
                        });
                        let mi = (m + lmax as i64) as usize;
                        let b = DMatrix::from_fn(cos_theta.len(), ncols, |r, j| rings[r][(mi, j)]);
                        (m, a * b)
                    })
                    .collect();
                let mut out = DMatrix::zeros(dim, ncols);
                for (m, block) in per_m {
                    let ma = m.unsigned_abs() as usize;
                    for li in 0..block.nrows() {
                        let l = ma + li;
                        let row = (l * l + l) as i64 + m;
                        for j in 0..ncols {
                            out[(row as usize, j)] = block[(li, j)];
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        for p in 0..=13 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
            assert!((s - exact).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        for (backend, cutoff) in [(Backend::Sl2R, 32), (Backend::Sl2C, 12)] {
            let basis = HarmonicBasis::new(backend, cutoff);
            let quad = QuadratureRule::for_cutoff(backend, cutoff, 2).unwrap();
            let gram =
                quad.project(&basis, basis.dim(), |_, xi, out| out.copy_from_slice(&basis.eval_vec(xi))).unwrap();
            let err = (&gram - DMatrix::<C64>::identity(basis.dim(), basis.dim()))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "{backend}: {err:e}");
        }
    }

    #[test]
    fn analyze_synthesize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (backend, cutoff) in [(Backend::Sl2R, 20), (Backend::Sl2C, 10)] {
            let basis = HarmonicBasis::new(backend, cutoff);
            let quad = QuadratureRule::for_cutoff(backend, cutoff, 4).unwrap();
            let u = FunctionCoefficients::random(backend, cutoff, 0..=cutoff, &mut rng);
            let samples = quad.sample(&basis, &u);
            let back = quad.analyze(&basis, &samples).unwrap();
            let err = back.sub(&u).values.iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(err < 1e-12);
            // Parseval through direct quadrature of |u|².
            let direct: f64 = samples.iter().zip(quad.weights()).map(|(s, w)| s.norm_sqr() * w).sum();
            assert!((direct - u.norm().powi(2)).abs() / direct < 1e-12);
        }
    }

    #[test]
    fn pure_basis_function_analyzes_to_unit_vector() {
        let basis = HarmonicBasis::new(Backend::Sl2C, 6);
        let quad = QuadratureRule::for_cutoff(Backend::Sl2C, 6, 2).unwrap();
        let k = 23;
        let samples: Vec<C64> = quad.nodes().iter().map(|xi| basis.eval(k, xi)).collect();
        let u = quad.analyze(&basis, &samples).unwrap();
        for (i, c) in u.values.iter().enumerate() {
            let expect = if i == k { 1.0 } else { 0.0 };
            assert!((c - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn band_limit_mismatch_is_a_config_error() {
        let basis = HarmonicBasis::new(Backend::Sl2R, 10);
        let quad = QuadratureRule::new(Backend::Sl2R, 15).unwrap();
        assert!(matches!(quad.analyze(&basis, &vec![C64::new(0.0, 0.0); quad.len()]), Err(Error::Bandlimit { .. })));
    }
}
