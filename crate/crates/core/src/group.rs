//! Lie-theoretic primitives for SL₂(ℝ) and SL₂(ℂ).
//!
//! Both groups are handled through one complex 2×2 code path; for the real
//! backend every entry has zero imaginary part and all operations preserve
//! that. The maximal compact subgroup is SO(2) resp. SU(2), the Cartan
//! subspace 𝔞 is spanned by `H = diag(1, −1)` and `N` is the upper unipotent
//! group.

use std::fmt;
use std::ops::Mul;
use std::sync::LazyLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flag::FlagPoint;

/// The two supported groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    /// SL₂(ℝ) acting on the real projective line.
    #[serde(rename = "SL2R")]
    Sl2R,
    /// SL₂(ℂ) acting on the Riemann sphere.
    #[serde(rename = "SL2C")]
    Sl2C,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Sl2R => "SL2R",
            Backend::Sl2C => "SL2C",
        }
    }

    pub fn spec(self) -> &'static GroupSpec {
        match self {
            Backend::Sl2R => &SL2R_SPEC,
            Backend::Sl2C => &SL2C_SPEC,
        }
    }

    /// Whether coefficients and operator matrices live over ℝ.
    pub fn is_real(self) -> bool {
        matches!(self, Backend::Sl2R)
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A complex 2×2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2::new(a, ZERO, ZERO, d)
    }

    pub fn from_columns(c0: [C64; 2], c1: [C64; 2]) -> Self {
        Mat2([[c0[0], c1[0]], [c0[1], c1[1]]])
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0], m[1][0], m[0][1], m[1][1])
    }

    /// Adjugate; equals the inverse for unimodular matrices.
    pub fn adjugate(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[1][1], -m[0][1], -m[1][0], m[0][0])
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn add(&self, other: &Mat2) -> Self {
        let (a, b) = (&self.0, &other.0);
        Mat2::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }

    pub fn sub(&self, other: &Mat2) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn commutator(&self, other: &Mat2) -> Self {
        (*self * *other).sub(&(*other * *self))
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn column(&self, j: usize) -> [C64; 2] {
        [self.0[0][j], self.0[1][j]]
    }

    /// Real Frobenius inner product `Re tr(X Y*)`.
    pub fn frobenius_dot(&self, other: &Mat2) -> f64 {
        (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (self.0[i][j] * other.0[i][j].conj()).re).sum()
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (self.0[i][j] - other.0[i][j]).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_imag(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Distance from the unitary group, `max |(M*M − 1)_{ij}|`.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Mat2::IDENTITY)
    }

    /// Exponential of a traceless matrix, using `X² = −det(X)·1`.
    pub fn exp_traceless(&self) -> Self {
        let s = (-self.det()).sqrt();
        let sinhc = if s.norm() < 1e-4 {
            let s2 = s * s;
            ONE + s2 / 6.0 + s2 * s2 / 120.0
        } else {
            s.sinh() / s
        };
        Mat2::IDENTITY.scale(s.cosh()).add(&self.scale(sinhc))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

fn vec_norm(v: [C64; 2]) -> f64 {
    v[0].norm().hypot(v[1].norm())
}

/// Completes a unit vector `u` to the special unitary `[u, (−ū₁, ū₀)]`.
/// Real input gives a rotation.
fn special_unitary_from_column(u: [C64; 2]) -> Mat2 {
    Mat2::from_columns(u, [-u[1].conj(), u[0].conj()])
}

/// Fixed data attached to a backend: the ordered real basis of the Lie
/// algebra, the Gram matrix of `⟨X, Y⟩ = −B(X, θY)` in that basis, and ρ.
#[derive(Clone, Debug)]
pub struct GroupSpec {
    pub backend: Backend,
    /// Rank of the maximal compact subgroup.
    pub rank_of_compact: u32,
    /// Ordered real basis of the Lie algebra. The first element is always
    /// `H = diag(1, −1)`, the generator of 𝔞.
    pub basis: Vec<Mat2>,
    /// Which basis elements lie in 𝔨 (`θX = X`).
    pub compact: Vec<bool>,
    pub killing_gram: DMatrix<f64>,
    /// ρ(H) for the unit generator `H` of 𝔞.
    pub rho_coefficient: f64,
}

static SL2R_SPEC: LazyLock<GroupSpec> = LazyLock::new(|| GroupSpec::compute(Backend::Sl2R));
static SL2C_SPEC: LazyLock<GroupSpec> = LazyLock::new(|| GroupSpec::compute(Backend::Sl2C));

impl GroupSpec {
    fn compute(backend: Backend) -> Self {
        let h = Mat2::real(1.0, 0.0, 0.0, -1.0);
        let s = Mat2::real(0.0, 1.0, 1.0, 0.0);
        let w = Mat2::real(0.0, 1.0, -1.0, 0.0);
        let basis = match backend {
            Backend::Sl2R => vec![h, s, w],
            Backend::Sl2C => vec![h, s, w, h.scale(I), s.scale(I), w.scale(I)],
        };
        // θX = −X*; X ∈ 𝔨 iff X is skew-hermitian.
        let compact: Vec<bool> = basis.iter().map(|b| b.adjoint().scale(-ONE) == *b).collect();
        let dim = basis.len();

        let ad: Vec<DMatrix<f64>> = basis.iter().map(|x| ad_matrix(&basis, x)).collect();
        let killing = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a * b).trace();
        let mut gram = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let theta_bj = basis[j].adjoint().scale(-ONE);
                gram[(i, j)] = -killing(&ad[i], &ad_matrix(&basis, &theta_bj));
            }
        }

        // ρ(H) is half the sum of the positive eigenvalues of ad H, counted
        // with multiplicity. The basis is orthogonal with equal Frobenius
        // norms, so ad H is symmetric in it.
        let ad_h = &ad[0];
        let sym = (ad_h + ad_h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let rho = 0.5 * eig.eigenvalues.iter().filter(|&&l| l > 1e-9).sum::<f64>();

        GroupSpec { backend, rank_of_compact: 1, basis, compact, killing_gram: gram, rho_coefficient: rho }
    }

    pub fn algebra_dim(&self) -> usize {
        self.basis.len()
    }

    /// Killing norm of `H = diag(1, −1)`.
    pub fn h_norm(&self) -> f64 {
        self.killing_gram[(0, 0)].sqrt()
    }

    /// Dual norm of ρ on 𝔞.
    pub fn rho_norm(&self) -> f64 {
        self.rho_coefficient / self.h_norm()
    }

    /// Coordinates of a traceless matrix in the ordered basis.
    pub fn coordinates(&self, x: &Mat2) -> Vec<f64> {
        coordinates(&self.basis, x)
    }

    pub fn matrix_of(&self, coords: &[f64]) -> Mat2 {
        self.basis.iter().zip(coords).fold(Mat2::ZERO, |acc, (b, &c)| acc.add(&b.scale(c.into())))
    }
}

fn coordinates(basis: &[Mat2], x: &Mat2) -> Vec<f64> {
    basis.iter().map(|b| x.frobenius_dot(b) / b.frobenius_dot(b)).collect()
}

fn ad_matrix(basis: &[Mat2], x: &Mat2) -> DMatrix<f64> {
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    for (j, b) in basis.iter().enumerate() {
        for (i, c) in coordinates(basis, &x.commutator(b)).into_iter().enumerate() {
            m[(i, j)] = c;
        }
    }
    m
}

/// A Lie algebra element in the backend's ordered real basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraVector {
    pub backend: Backend,
    pub coordinates: Vec<f64>,
}

impl AlgebraVector {
    pub fn zero(backend: Backend) -> Self {
        AlgebraVector { backend, coordinates: vec![0.0; backend.spec().algebra_dim()] }
    }

    /// The element `t·H = diag(t, −t)` of 𝔞.
    pub fn from_a(backend: Backend, t: f64) -> Self {
        let mut v = Self::zero(backend);
        v.coordinates[0] = t;
        v
    }

    /// The 𝔞-coordinate `t` (meaningful for 𝔞-valued vectors).
    pub fn a_coordinate(&self) -> f64 {
        self.coordinates[0]
    }

    pub fn scaled(&self, c: f64) -> Self {
        AlgebraVector { backend: self.backend, coordinates: self.coordinates.iter().map(|x| x * c).collect() }
    }

    pub fn to_matrix(&self) -> Mat2 {
        self.backend.spec().matrix_of(&self.coordinates)
    }
}

/// `sqrt(xᵀ G x)` with `G` the Killing Gram matrix.
pub fn killing_norm(x: &AlgebraVector) -> f64 {
    let g = &x.backend.spec().killing_gram;
    let c = &x.coordinates;
    let mut acc = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            acc += c[i] * g[(i, j)] * c[j];
        }
    }
    acc.max(0.0).sqrt()
}

/// A unimodular 2×2 matrix over the backend's field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupElement {
    backend: Backend,
    m: Mat2,
}

impl GroupElement {
    /// Builds a group element, dividing by a square root of the determinant.
    pub fn new(backend: Backend, m: Mat2) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("group element"));
        }
        let scale = m.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        if backend.is_real() && m.max_imag() > 1e-14 * scale.max(1.0) {
            return Err(Error::InvalidElement("SL2R element has complex entries".into()));
        }
        let m = if backend.is_real() { Mat2::real(m.0[0][0].re, m.0[0][1].re, m.0[1][0].re, m.0[1][1].re) } else { m };
        let det = m.det();
        if det.norm() <= 1e-300 || det.norm() < 1e-12 * scale * scale {
            return Err(Error::InvalidElement("singular matrix".into()));
        }
        if backend.is_real() && det.re <= 0.0 {
            return Err(Error::InvalidElement("SL2R element needs positive determinant".into()));
        }
        let root = if backend.is_real() { C64::from(det.re.sqrt()) } else { det.sqrt() };
        let g = GroupElement { backend, m: m.scale(root.inv()) };
        let drift = (g.m.det() - ONE).norm();
        if drift > 1e-12 {
            return Err(Error::InvalidElement(format!("determinant drift {drift:e} after renormalization")));
        }
        Ok(g)
    }

    /// Like [`GroupElement::new`] but refuses inputs with `|det − 1| > tol`.
    pub fn new_unimodular(backend: Backend, m: Mat2, tol: f64) -> Result<Self> {
        let drift = (m.det() - ONE).norm();
        if !(drift <= tol) {
            return Err(Error::InvalidElement(format!("|det − 1| = {drift:e} exceeds {tol:e}")));
        }
        Self::new(backend, m)
    }

    pub fn identity(backend: Backend) -> Self {
        GroupElement { backend, m: Mat2::IDENTITY }
    }

    /// `exp(X)` for `X` in the Lie algebra.
    pub fn exp(x: &AlgebraVector) -> Result<Self> {
        Self::new(x.backend, x.to_matrix().exp_traceless())
    }

    /// `exp(t·H) = diag(eᵗ, e⁻ᵗ)`.
    pub fn exp_a(backend: Backend, t: f64) -> Self {
        GroupElement { backend, m: Mat2::real(t.exp(), 0.0, 0.0, (-t).exp()) }
    }

    /// Rotation by `φ`; acts on line angles as `θ ↦ θ + φ`.
    pub fn rotation(backend: Backend, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        GroupElement { backend, m: Mat2::real(c, -s, s, c) }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    /// Exact inverse through the adjugate.
    pub fn inverse(&self) -> Self {
        GroupElement { backend: self.backend, m: self.m.adjugate() }
    }

    pub fn compose(&self, other: &GroupElement) -> Self {
        assert_eq!(self.backend, other.backend, "backend mismatch in product");
        let p = self.m * other.m;
        // Renormalize to keep long products on the group.
        let det = p.det();
        let root = if self.backend.is_real() { C64::from(det.re.sqrt()) } else { det.sqrt() };
        GroupElement { backend: self.backend, m: p.scale(root.inv()) }
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        self.m.apply(v)
    }

    /// Whether the element lies in the maximal compact subgroup.
    pub fn is_compact(&self, tol: f64) -> bool {
        self.m.unitarity_defect() <= tol
    }

    pub fn max_abs_diff(&self, other: &GroupElement) -> f64 {
        self.m.max_abs_diff(&other.m)
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;

    fn mul(self, rhs: GroupElement) -> GroupElement {
        self.compose(&rhs)
    }
}

/// `g = k1 · exp(diag(t, −t)) · k2` with `t ≥ 0` and `k1, k2` compact.
#[derive(Clone, Copy, Debug)]
pub struct CartanFactors {
    pub k1: GroupElement,
    pub a_coordinate: f64,
    pub k2: GroupElement,
}

impl CartanFactors {
    /// κ(g) as an element of 𝔞⁺.
    pub fn kappa(&self) -> AlgebraVector {
        AlgebraVector::from_a(self.k1.backend, self.a_coordinate)
    }

    pub fn reconstruct(&self) -> Mat2 {
        let t = self.a_coordinate;
        *self.k1.matrix() * Mat2::real(t.exp(), 0.0, 0.0, (-t).exp()) * *self.k2.matrix()
    }
}

/// Cartan (KA⁺K) decomposition from the eigen-decomposition of `g*g`.
///
/// With `g*g = k2* diag(e²ᵗ, e⁻²ᵗ) k2`, the first column of `k2*` is the top
/// eigenvector `v`, and `k1` is completed from `g v e⁻ᵗ`. For compact `g`
/// (`t = 0`) the factors are `k1 = g`, `k2 = e`.
pub fn cartan_project(g: &GroupElement) -> Result<CartanFactors> {
    let backend = g.backend;
    let m = g.m.adjoint() * g.m;
    let p = m.0[0][0].re;
    let r = m.0[1][1].re;
    let q = m.0[0][1];
    let half = 0.5 * (p - r);
    let disc = half.hypot(q.norm());
    let lambda_minus_one = (0.5 * (p + r) - 1.0) + disc;
    if !lambda_minus_one.is_finite() {
        return Err(Error::NonFinite("Cartan projection"));
    }
    if disc <= 1e-15 {
        return Ok(CartanFactors { k1: *g, a_coordinate: 0.0, k2: GroupElement::identity(backend) });
    }
    let t = 0.5 * lambda_minus_one.max(0.0).ln_1p();

    let v = if half >= 0.0 { [C64::from(half + disc), q.conj()] } else { [q, C64::from(disc - half)] };
    let nv = vec_norm(v);
    let v = [v[0] / nv, v[1] / nv];
    let k2 = special_unitary_from_column(v).adjoint();

    let gv = g.m.apply(v);
    let ngv = vec_norm(gv);
    let u = [gv[0] / ngv, gv[1] / ngv];
    let k1 = special_unitary_from_column(u);

    Ok(CartanFactors { k1: GroupElement { backend, m: k1 }, a_coordinate: t, k2: GroupElement { backend, m: k2 } })
}

/// `log` of the largest singular value of `g`.
pub fn cartan_coordinate(g: &GroupElement) -> f64 {
    cartan_project(g).map(|c| c.a_coordinate).unwrap_or(f64::NAN)
}

/// Killing norm of κ(g).
pub fn kappa_norm(g: &GroupElement) -> f64 {
    cartan_coordinate(g) * g.backend.spec().h_norm()
}

/// `g = k · exp(diag(t, −t)) · n` with `n = [[1, x], [0, 1]]`.
#[derive(Clone, Copy, Debug)]
pub struct IwasawaFactors {
    pub k: GroupElement,
    pub h_coordinate: f64,
    /// The off-diagonal entry `x` of the unipotent factor.
    pub n_upper: C64,
}

impl IwasawaFactors {
    pub fn h(&self) -> AlgebraVector {
        AlgebraVector::from_a(self.k.backend, self.h_coordinate)
    }

    pub fn n_matrix(&self) -> Mat2 {
        Mat2::new(ONE, self.n_upper, ZERO, ONE)
    }

    pub fn reconstruct(&self) -> Mat2 {
        let t = self.h_coordinate;
        *self.k.matrix() * Mat2::real(t.exp(), 0.0, 0.0, (-t).exp()) * self.n_matrix()
    }
}

/// Iwasawa (KAN) decomposition by Gram–Schmidt on the columns of `g`.
pub fn iwasawa_decompose(g: &GroupElement) -> IwasawaFactors {
    let c0 = g.m.column(0);
    let r11 = vec_norm(c0);
    let k0 = [c0[0] / r11, c0[1] / r11];
    let k = special_unitary_from_column(k0);
    let r12 = k0[0].conj() * g.m.0[0][1] + k0[1].conj() * g.m.0[1][1];
    IwasawaFactors { k: GroupElement { backend: g.backend, m: k }, h_coordinate: r11.ln(), n_upper: r12 / r11 }
}

/// How a flag point `ξ = kP` enters the Iwasawa cocycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CocycleConvention {
    /// `σ(g, ξ) = H(g k)`. Satisfies the cocycle identity and the
    /// change-of-variables formula; used everywhere in this crate.
    RightCompact,
    /// `σ(g, ξ) = H(g k⁻¹)`. Kept only so the choice can be tested.
    InverseCompact,
}

/// The Iwasawa cocycle `σ(g, ξ) = H(g k_ξ) = log ‖g v‖ · H` where `k_ξ` is a
/// compact representative sending the base line to ξ and `v` its unit
/// vector.
pub fn iwasawa_cocycle(g: &GroupElement, xi: &FlagPoint) -> AlgebraVector {
    iwasawa_cocycle_with(CocycleConvention::RightCompact, g, xi)
}

pub fn iwasawa_cocycle_with(convention: CocycleConvention, g: &GroupElement, xi: &FlagPoint) -> AlgebraVector {
    let k = xi.compact_representative();
    let k = match convention {
        CocycleConvention::RightCompact => k,
        CocycleConvention::InverseCompact => k.inverse(),
    };
    iwasawa_decompose(&g.compose(&k)).h()
}

/// The 𝔞-coordinate of σ(g, ξ), computed directly as `log ‖g v‖`.
pub fn cocycle_coordinate(g: &GroupElement, xi: &FlagPoint) -> f64 {
    vec_norm(g.apply(xi.vector())).ln()
}

/// `log` of the Radon–Nikodym weight, `−2ρ(σ(g, ξ))`.
pub fn log_radon_nikodym_weight(g: &GroupElement, xi: &FlagPoint) -> f64 {
    -2.0 * g.backend.spec().rho_coefficient * cocycle_coordinate(g, xi)
}

/// Density of `(g⁻¹)_* m` against `m` at ξ: `e^{−2ρ(σ(g, ξ))}`.
pub fn radon_nikodym_weight(g: &GroupElement, xi: &FlagPoint) -> f64 {
    log_radon_nikodym_weight(g, xi).exp()
}

/// `exp(X)` with the algebra coordinates of `X` uniform in `[−scale, scale]`.
pub fn random_element(backend: Backend, rng: &mut impl Rng, scale: f64) -> GroupElement {
    let coords: Vec<f64> =
        (0..backend.spec().algebra_dim()).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    GroupElement::exp(&AlgebraVector { backend, coordinates: coords }).expect("exp of a finite algebra element")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flag::FlagPoint;
    use nalgebra::Matrix2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn killing_gram_matches_trace_formula() {
        // B(X, Y) = 4 tr(XY) on sl2(R); on sl2(C) viewed as a real algebra
        // the real Killing form is 8 Re tr(XY).
        for (backend, factor) in [(Backend::Sl2R, 4.0), (Backend::Sl2C, 8.0)] {
            let spec = backend.spec();
            for i in 0..spec.algebra_dim() {
                for j in 0..spec.algebra_dim() {
                    let x = spec.basis[i];
                    let theta_y = spec.basis[j].adjoint().scale(-ONE);
                    let expected = -factor * (x * theta_y).trace().re;
                    assert!((spec.killing_gram[(i, j)] - expected).abs() < 1e-12);
                }
            }
            let eig = SymmetricEigen::new(spec.killing_gram.clone());
            assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn h_norm_and_rho() {
        let r = Backend::Sl2R.spec();
        assert!((r.h_norm() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((r.rho_coefficient - 1.0).abs() < 1e-12);
        let c = Backend::Sl2C.spec();
        assert!((c.h_norm() - 4.0).abs() < 1e-12);
        assert!((c.rho_coefficient - 2.0).abs() < 1e-12);
        assert_eq!(c.compact, vec![false, false, true, true, true, false]);
    }

    #[test]
    fn killing_norm_basics() {
        let b = Backend::Sl2R;
        assert_eq!(killing_norm(&AlgebraVector::zero(b)), 0.0);
        assert!((killing_norm(&AlgebraVector::from_a(b, 1.0)) - 8f64.sqrt()).abs() < 1e-12);
        let x = AlgebraVector { backend: b, coordinates: vec![0.3, -1.2, 0.7] };
        let n = killing_norm(&x);
        assert!((killing_norm(&x.scaled(-2.5)) - 2.5 * n).abs() < 1e-12);
    }

    #[test]
    fn construction_renormalizes_determinant() {
        let g = GroupElement::new(Backend::Sl2R, Mat2::real(2.0, 1.0, 1.0, 3.0)).unwrap();
        assert!((g.matrix().det() - ONE).norm() < 1e-14);
        assert!(GroupElement::new(Backend::Sl2R, Mat2::real(0.0, 1.0, 1.0, 0.0)).is_err());
        assert!(GroupElement::new(Backend::Sl2R, Mat2::real(1.0, 2.0, 2.0, 4.0)).is_err());
        let z = Mat2::new(C64::new(1.0, 1.0), ZERO, ZERO, ONE);
        assert!(GroupElement::new(Backend::Sl2R, z).is_err());
        assert!(GroupElement::new(Backend::Sl2C, z).is_ok());
        assert!(GroupElement::new_unimodular(Backend::Sl2R, Mat2::real(2.0, 0.0, 0.0, 1.0), 1e-6).is_err());
    }

    #[test]
    fn cartan_identity_and_compact() {
        for backend in [Backend::Sl2R, Backend::Sl2C] {
            let e = GroupElement::identity(backend);
            let c = cartan_project(&e).unwrap();
            assert_eq!(c.a_coordinate, 0.0);
            assert_eq!(c.k1, e);
            assert_eq!(c.k2, e);
            let k = GroupElement::rotation(backend, 0.83);
            let c = cartan_project(&k).unwrap();
            assert_eq!(c.a_coordinate, 0.0);
            assert_eq!(c.k1, k);
        }
    }

    #[test]
    fn cartan_matches_singular_value_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for backend in [Backend::Sl2R, Backend::Sl2C] {
            for _ in 0..200 {
                let g = random_element(backend, &mut rng, 0.6);
                let c = cartan_project(&g).unwrap();
                let m = g.matrix().0;
                let oracle = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]).singular_values();
                let smax = oracle.max();
                assert!((c.a_coordinate - smax.ln()).abs() < 1e-10);
                assert!(c.a_coordinate >= 0.0);
                assert!(c.reconstruct().max_abs_diff(g.matrix()) < 1e-10);
                assert!(c.k1.matrix().unitarity_defect() < 1e-12);
                assert!(c.k2.matrix().unitarity_defect() < 1e-12);
                if backend.is_real() {
                    assert_eq!(c.k1.matrix().max_imag(), 0.0);
                }
            }
        }
    }

    #[test]
    fn cartan_on_diagonal() {
        let g = GroupElement::new(Backend::Sl2R, Mat2::real(2.0, 0.0, 0.0, 0.5)).unwrap();
        assert!((cartan_coordinate(&g) - 2f64.ln()).abs() < 1e-14);
        let g = GroupElement::new(Backend::Sl2R, Mat2::real(0.5, 0.0, 0.0, 2.0)).unwrap();
        assert!((cartan_coordinate(&g) - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn iwasawa_triangular_and_compact() {
        let a = 1.7;
        let g = GroupElement::new(Backend::Sl2R, Mat2::real(a, 0.4, 0.0, 1.0 / a)).unwrap();
        let f = iwasawa_decompose(&g);
        assert!(f.k.max_abs_diff(&GroupElement::identity(Backend::Sl2R)) < 1e-15);
        assert!((f.h_coordinate - a.ln()).abs() < 1e-15);
        let k = GroupElement::rotation(Backend::Sl2C, -2.1);
        let f = iwasawa_decompose(&k);
        assert!(f.h_coordinate.abs() < 1e-15);
        assert!(f.n_upper.norm() < 1e-15);
    }

    #[test]
    fn iwasawa_matches_qr_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for backend in [Backend::Sl2R, Backend::Sl2C] {
            for _ in 0..200 {
                let g = random_element(backend, &mut rng, 0.8);
                let f = iwasawa_decompose(&g);
                assert!(f.reconstruct().max_abs_diff(g.matrix()) < 1e-10);
                assert!(f.k.matrix().unitarity_defect() < 1e-12);
                // Householder QR, then fix signs so R has a positive diagonal.
                let m = g.matrix().0;
                let qr = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]).qr();
                let r = qr.r();
                let t_oracle = r[(0, 0)].norm().ln();
                assert!((f.h_coordinate - t_oracle).abs() < 1e-10);
                // Rescaling R's rows by unit phases leaves r01/r00 unchanged.
                let x_oracle = r[(0, 1)] / r[(0, 0)];
                assert!((f.n_upper - x_oracle).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cocycle_identity_and_convention_choice() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for backend in [Backend::Sl2R, Backend::Sl2C] {
            let mut worst_inverse = 0.0f64;
            for _ in 0..300 {
                let g = random_element(backend, &mut rng, 0.5);
                let h = random_element(backend, &mut rng, 0.5);
                let xi = FlagPoint::random(backend, &mut rng);
                let gh = g.compose(&h);
                let hxi = crate::flag::act_on_flag(&h, &xi);
                let lhs = iwasawa_cocycle(&gh, &xi).a_coordinate();
                let rhs = iwasawa_cocycle(&g, &hxi).a_coordinate() + iwasawa_cocycle(&h, &xi).a_coordinate();
                assert!((lhs - rhs).abs() < 1e-9);
                assert!((lhs - cocycle_coordinate(&gh, &xi)).abs() < 1e-12);

                let c = CocycleConvention::InverseCompact;
                let lhs = iwasawa_cocycle_with(c, &gh, &xi).a_coordinate();
                let rhs =
                    iwasawa_cocycle_with(c, &g, &hxi).a_coordinate() + iwasawa_cocycle_with(c, &h, &xi).a_coordinate();
                worst_inverse = worst_inverse.max((lhs - rhs).abs());
            }
            assert!(worst_inverse > 1e-3, "H(gk⁻¹) unexpectedly satisfies the identity");
        }
    }

    #[test]
    fn cocycle_vanishes_on_compact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for backend in [Backend::Sl2R, Backend::Sl2C] {
            for _ in 0..50 {
                let xi = FlagPoint::random(backend, &mut rng);
                let e = GroupElement::identity(backend);
                assert!(iwasawa_cocycle(&e, &xi).a_coordinate().abs() < 1e-15);
                let k = GroupElement::rotation(backend, rng.random::<f64>() * 6.0);
                assert!(iwasawa_cocycle(&k, &xi).a_coordinate().abs() < 1e-14);
                assert!((radon_nikodym_weight(&k, &xi) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exp_of_compact_direction_is_rotation() {
        let b = Backend::Sl2R;
        let w = AlgebraVector { backend: b, coordinates: vec![0.0, 0.0, -0.4] };
        let g = GroupElement::exp(&w).unwrap();
        assert!(g.max_abs_diff(&GroupElement::rotation(b, 0.4)) < 1e-15);
        let h = AlgebraVector::from_a(b, 0.3);
        let g = GroupElement::exp(&h).unwrap();
        assert!(g.max_abs_diff(&GroupElement::exp_a(b, 0.3)) < 1e-15);
    }
}
