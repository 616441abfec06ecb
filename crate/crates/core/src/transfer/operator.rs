use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flag::act_on_flag;
use crate::group::{radon_nikodym_weight, Backend, GroupElement};
use crate::harmonics::{FunctionCoefficients, HarmonicBasis};
use crate::measure::SupportMeasure;
use crate::quadrature::QuadratureRule;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    /// Quadrature band limit as a multiple of the cutoff.
    pub oversampling: u32,
    /// Maximum entry change allowed when the quadrature band doubles;
    /// `None` skips the check.
    pub self_check_tol: Option<f64>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { oversampling: 4, self_check_tol: Some(1e-9) }
    }
}

impl AssemblyOptions {
    pub fn unchecked(oversampling: u32) -> Self {
        AssemblyOptions { oversampling, self_check_tol: None }
    }
}

/// Dense matrix `⟨T e_j, e_i⟩` (or of `T*`) in the canonical basis order.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub backend: Backend,
    pub cutoff: u32,
    pub adjoint: bool,
    pub matrix: DMatrix<C64>,
    pub quadrature_band: u32,
    pub measure_hash: String,
    /// Largest entry change observed in the doubling self-check, if run.
    pub self_check_delta: Option<f64>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, u: &FunctionCoefficients) -> FunctionCoefficients {
        let v = DVector::from_column_slice(&u.with_cutoff(self.cutoff).values);
        let w = &self.matrix * v;
        FunctionCoefficients { backend: self.backend, cutoff: self.cutoff, values: w.iter().copied().collect() }
    }

    pub fn top_singular_value(&self) -> f64 {
        super::top_singular_value(&self.matrix)
    }

    /// `max_i |T e₀ − e₀|_i`; zero when constants are preserved.
    pub fn constant_column_defect(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let target = if i == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                (self.matrix[(i, 0)] - target).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest entry of `self − other*`.
    pub fn adjoint_defect(&self, other: &OperatorMatrix) -> f64 {
        (&self.matrix - other.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// The matrix with every entry conjugated-transposed and the adjoint flag
    /// flipped.
    pub fn adjoint_matrix(&self) -> OperatorMatrix {
        OperatorMatrix { matrix: self.matrix.adjoint(), adjoint: !self.adjoint, ..self.clone() }
    }
}

/// `T` with entries `Σ_g μ(g) ∫ e_j(g⁻¹ξ) conj(e_i(ξ)) dm(ξ)`.
pub fn assemble_markov(mu: &SupportMeasure, cutoff: u32, options: AssemblyOptions) -> Result<OperatorMatrix> {
    let inverses: Vec<(GroupElement, f64)> = mu.atoms().iter().map(|a| (a.element.inverse(), a.weight)).collect();
    assemble(mu, cutoff, options, false, move |xi| inverses.iter().map(|(g, w)| (act_on_flag(g, xi), *w)).collect())
}

/// `T*` with entries `Σ_g μ(g) ∫ e_j(gη) e^{−2ρ(σ(g,η))} conj(e_i(η)) dm(η)`.
pub fn assemble_adjoint(mu: &SupportMeasure, cutoff: u32, options: AssemblyOptions) -> Result<OperatorMatrix> {
    let atoms: Vec<(GroupElement, f64)> = mu.atoms().iter().map(|a| (a.element, a.weight)).collect();
    assemble(mu, cutoff, options, true, move |eta| {
        atoms.iter().map(|(g, w)| (act_on_flag(g, eta), w * radon_nikodym_weight(g, eta))).collect()
    })
}

fn assemble<F>(
    mu: &SupportMeasure,
    cutoff: u32,
    options: AssemblyOptions,
    adjoint: bool,
    pullback: F,
) -> Result<OperatorMatrix>
where
    F: Fn(&crate::flag::FlagPoint) -> Vec<(crate::flag::FlagPoint, f64)> + Sync,
{
    let backend = mu.backend();
    let basis = HarmonicBasis::new(backend, cutoff);
    let distortion = (2.0 * mu.epsilon() / backend.spec().h_norm()).exp();
    let quad = QuadratureRule::for_pullback(backend, cutoff, options.oversampling, distortion)?;
    let matrix = assemble_on(&basis, &quad, &pullback)?;
    let mut self_check_delta = None;
    if let Some(tol) = options.self_check_tol {
        let fine = QuadratureRule::new(backend, 2 * quad.band_limit())?;
        let check = assemble_on(&basis, &fine, &pullback)?;
        let (mut worst, mut at) = (0.0, (0, 0));
        for j in 0..matrix.ncols() {
            for i in 0..matrix.nrows() {
                let d = (matrix[(i, j)] - check[(i, j)]).norm();
                if d > worst {
                    worst = d;
                    at = (i, j);
                }
            }
        }
        if worst > tol {
            return Err(Error::QuadratureSelfCheck { row: at.0, col: at.1, delta: worst, tolerance: tol });
        }
        self_check_delta = Some(worst);
    }
    Ok(OperatorMatrix {
        backend,
        cutoff,
        adjoint,
        matrix,
        quadrature_band: quad.band_limit(),
        measure_hash: mu.hash(),
        self_check_delta,
    })
}

fn assemble_on<F>(basis: &HarmonicBasis, quad: &QuadratureRule, pullback: &F) -> Result<DMatrix<C64>>
where
    F: Fn(&crate::flag::FlagPoint) -> Vec<(crate::flag::FlagPoint, f64)> + Sync,
{
    let dim = basis.dim();
    quad.project(basis, dim, |_, xi, out| {
        out.fill(C64::new(0.0, 0.0));
        let mut vals = vec![C64::new(0.0, 0.0); dim];
        for (eta, w) in pullback(xi) {
            basis.eval_all(&eta, &mut vals);
            for (o, v) in out.iter_mut().zip(&vals) {
                *o += v * w;
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::InnerIndex;
    use crate::measure::{build_measure, MeasureFamilySpec};

    #[test]
    fn dirac_at_identity_is_identity() {
        for (backend, cutoff) in [(Backend::Sl2R, 16), (Backend::Sl2C, 6)] {
            let mu = SupportMeasure::dirac(GroupElement::identity(backend));
            for op in [
                assemble_markov(&mu, cutoff, AssemblyOptions::default()).unwrap(),
                assemble_adjoint(&mu, cutoff, AssemblyOptions::default()).unwrap(),
            ] {
                let err = (&op.matrix - DMatrix::<C64>::identity(op.dim(), op.dim()))
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-12, "{backend}: {err:e}");
            }
        }
    }

    #[test]
    fn rotation_pair_is_diagonal_cosines() {
        let phi = 1.0;
        let mu = build_measure(Backend::Sl2R, &MeasureFamilySpec::RotationPair { phi }).unwrap();
        let op = assemble_markov(&mu, 32, AssemblyOptions::default()).unwrap();
        let basis = HarmonicBasis::new(Backend::Sl2R, 32);
        for i in 0..op.dim() {
            for j in 0..op.dim() {
                let n = basis.labels()[j].tau as f64;
                let expected = if i == j { (2.0 * n * phi).cos() } else { 0.0 };
                assert!((op.matrix[(i, j)] - C64::from(expected)).norm() < 1e-12, "({i},{j})");
            }
        }
        assert!(basis.index_of(3, InnerIndex::Sin).is_some());
    }

    #[test]
    fn constants_are_preserved_and_adjoint_matches() {
        for (backend, cutoff) in [(Backend::Sl2R, 24), (Backend::Sl2C, 6)] {
            let mu = build_measure(backend, &MeasureFamilySpec::ExpBasisFamily { eps: 0.3 }).unwrap();
            let t = assemble_markov(&mu, cutoff, AssemblyOptions::default()).unwrap();
            let ts = assemble_adjoint(&mu, cutoff, AssemblyOptions::default()).unwrap();
            assert!(t.constant_column_defect() < 1e-12);
            assert!(ts.adjoint_defect(&t) < 1e-9, "{backend}: {:e}", ts.adjoint_defect(&t));
            for j in 0..ts.dim() {
                let expected = if j == 0 { 1.0 } else { 0.0 };
                assert!((ts.matrix[(0, j)] - C64::from(expected)).norm() < 1e-12);
            }
            let bound = (backend.spec().rho_norm() * mu.epsilon()).exp();
            assert!(t.top_singular_value() <= bound + 1e-6);
        }
    }

    #[test]
    fn self_check_reports_offending_entry() {
        let mu = build_measure(Backend::Sl2R, &MeasureFamilySpec::ExpBasisFamily { eps: 2.0 }).unwrap();
        let r = assemble_markov(&mu, 16, AssemblyOptions { oversampling: 2, self_check_tol: Some(1e-14) });
        assert!(matches!(r, Err(Error::QuadratureSelfCheck { .. })));
    }
}
