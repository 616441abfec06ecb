//! Finitely supported probability measures on the group and the candidate
//! families used by the experiments.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::{kappa_norm, AlgebraVector, Backend, GroupElement, Mat2};
use crate::C64;

const MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct Atom {
    pub element: GroupElement,
    pub weight: f64,
}

/// A finitely supported probability measure μ on the group.
#[derive(Clone, Debug)]
pub struct SupportMeasure {
    backend: Backend,
    atoms: Vec<Atom>,
    epsilon: f64,
    symmetric: bool,
}

impl SupportMeasure {
    /// Validates weights (positive, summing to 1 within 1e−9, then
    /// renormalized) and caches `ε(μ) = max ‖κ(g)‖` and the symmetric flag.
    pub fn new(backend: Backend, atoms: Vec<(GroupElement, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let mut total = 0.0;
        for (g, w) in &atoms {
            if g.backend() != backend {
                return Err(Error::BackendMismatch { expected: backend, found: g.backend() });
            }
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        let atoms: Vec<Atom> = atoms.into_iter().map(|(element, w)| Atom { element, weight: w / total }).collect();
        let epsilon = atoms.iter().map(|a| kappa_norm(&a.element)).fold(0.0, f64::max);
        let symmetric = atoms.iter().all(|a| {
            let inv = a.element.inverse();
            atoms.iter().any(|b| b.element.max_abs_diff(&inv) <= MERGE_TOL && (b.weight - a.weight).abs() <= MERGE_TOL)
        });
        Ok(SupportMeasure { backend, atoms, epsilon, symmetric })
    }

    /// The Dirac mass at `g`.
    pub fn dirac(g: GroupElement) -> Self {
        Self::new(g.backend(), vec![(g, 1.0)]).expect("a Dirac mass is a valid measure")
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `max_{g ∈ supp μ} ‖κ(g)‖`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Whether every atom lies in the maximal compact subgroup.
    pub fn is_compact(&self) -> bool {
        self.atoms.iter().all(|a| a.element.is_compact(1e-12))
    }

    /// Hex SHA-256 of the backend tag and the little-endian atom data.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.backend.name().as_bytes());
        for a in &self.atoms {
            for z in a.element.matrix().0.iter().flatten() {
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
            h.update(a.weight.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// `½(μ + μ̌)` with `μ̌` the image of μ under inversion. Atoms equal within
/// 1e−12 are merged.
pub fn symmetrize(mu: &SupportMeasure) -> SupportMeasure {
    let mut merged: Vec<(GroupElement, f64)> = Vec::new();
    let both = mu
        .atoms
        .iter()
        .map(|a| (a.element, 0.5 * a.weight))
        .chain(mu.atoms.iter().map(|a| (a.element.inverse(), 0.5 * a.weight)));
    for (g, w) in both {
        match merged.iter_mut().find(|(h, _)| h.max_abs_diff(&g) <= MERGE_TOL) {
            Some(slot) => slot.1 += w,
            None => merged.push((g, w)),
        }
    }
    let mut out = SupportMeasure::new(mu.backend, merged).expect("symmetrization keeps weights valid");
    out.symmetric = true;
    out
}

/// A 2×2 matrix entry in configs: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntrySpec {
    Real(f64),
    Complex([f64; 2]),
}

impl EntrySpec {
    fn value(self) -> C64 {
        match self {
            EntrySpec::Real(x) => C64::new(x, 0.0),
            EntrySpec::Complex([re, im]) => C64::new(re, im),
        }
    }
}

/// Row-major 2×2 matrix as written in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec(pub [[EntrySpec; 2]; 2]);

impl MatrixSpec {
    pub fn to_mat2(&self) -> Mat2 {
        let m = &self.0;
        Mat2::new(m[0][0].value(), m[0][1].value(), m[1][0].value(), m[1][1].value())
    }

    pub fn real(rows: [[f64; 2]; 2]) -> Self {
        MatrixSpec(rows.map(|r| r.map(EntrySpec::Real)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub matrix: MatrixSpec,
    pub weight: f64,
}

/// Candidate step distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureFamilySpec {
    /// Atoms taken as given.
    ExplicitAtoms { atoms: Vec<AtomSpec> },
    /// `{exp(±ε X)}` for `X` in the fixed Lie-algebra basis, uniform weights.
    ExpBasisFamily { eps: f64 },
    /// `½(δ_{r_φ} + δ_{r_{−φ}})` for the rotation `r_φ`.
    RotationPair { phi: f64 },
    /// `{exp(±ε X)} ∪ {h exp(±ε X) h⁻¹}` over the basis, uniform weights.
    ConjugatedPair { eps: f64, conjugator: MatrixSpec },
}

impl MeasureFamilySpec {
    /// The same family with its scale parameter replaced.
    pub fn with_eps(&self, eps: f64) -> Option<Self> {
        match self {
            MeasureFamilySpec::ExpBasisFamily { .. } => Some(MeasureFamilySpec::ExpBasisFamily { eps }),
            MeasureFamilySpec::ConjugatedPair { conjugator, .. } => {
                Some(MeasureFamilySpec::ConjugatedPair { eps, conjugator: conjugator.clone() })
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureFamilySpec::ExpBasisFamily { eps } | MeasureFamilySpec::ConjugatedPair { eps, .. } => {
                if *eps == 0.0 {
                    return Err(Error::DegenerateMeasure("ε = 0 makes every atom the identity".into()));
                }
                if !(*eps > 0.0 && *eps <= 10.0) {
                    return Err(Error::InvalidMeasure(format!("ε = {eps} outside (0, 10]")));
                }
            }
            MeasureFamilySpec::RotationPair { phi } => {
                if !phi.is_finite() {
                    return Err(Error::InvalidMeasure("rotation angle must be finite".into()));
                }
            }
            MeasureFamilySpec::ExplicitAtoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidMeasure("no atoms".into()));
                }
            }
        }
        Ok(())
    }
}

fn exp_basis_atoms(backend: Backend, eps: f64) -> Result<Vec<GroupElement>> {
    let dim = backend.spec().algebra_dim();
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut x = AlgebraVector::zero(backend);
            x.coordinates[i] = sign * eps;
            out.push(GroupElement::exp(&x)?);
        }
    }
    Ok(out)
}

fn uniform(backend: Backend, atoms: Vec<GroupElement>) -> Result<SupportMeasure> {
    let w = 1.0 / atoms.len() as f64;
    SupportMeasure::new(backend, atoms.into_iter().map(|g| (g, w)).collect())
}

pub fn build_measure(backend: Backend, spec: &MeasureFamilySpec) -> Result<SupportMeasure> {
    spec.validate()?;
    let mu = match spec {
        MeasureFamilySpec::ExplicitAtoms { atoms } => {
            let atoms = atoms
                .iter()
                .map(|a| Ok((GroupElement::new(backend, a.matrix.to_mat2())?, a.weight)))
                .collect::<Result<Vec<_>>>()?;
            SupportMeasure::new(backend, atoms)?
        }
        MeasureFamilySpec::ExpBasisFamily { eps } => uniform(backend, exp_basis_atoms(backend, *eps)?)?,
        MeasureFamilySpec::RotationPair { phi } => {
            uniform(backend, vec![GroupElement::rotation(backend, *phi), GroupElement::rotation(backend, -*phi)])?
        }
        MeasureFamilySpec::ConjugatedPair { eps, conjugator } => {
            let h = GroupElement::new(backend, conjugator.to_mat2())?;
            let hinv = h.inverse();
            let base = exp_basis_atoms(backend, *eps)?;
            let conj: Vec<GroupElement> = base.iter().map(|g| h.compose(g).compose(&hinv)).collect();
            uniform(backend, base.into_iter().chain(conj).collect())?
        }
    };
    for a in mu.atoms() {
        let drift = (a.element.matrix().det() - C64::new(1.0, 0.0)).norm();
        if drift > 1e-12 {
            return Err(Error::InvalidMeasure(format!("determinant drift {drift:e}")));
        }
    }
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_basis_family_is_symmetric_with_bounded_epsilon() {
        for backend in [Backend::Sl2R, Backend::Sl2C] {
            let c = backend.spec().h_norm();
            for eps in [0.1, 0.25, 0.5] {
                let mu = build_measure(backend, &MeasureFamilySpec::ExpBasisFamily { eps }).unwrap();
                assert!(mu.is_symmetric());
                assert_eq!(mu.atoms().len(), 2 * backend.spec().algebra_dim());
                // exp(εX) with X ∈ 𝔭 of norm ‖H‖ has κ-norm ε‖H‖.
                assert!(mu.epsilon() <= c * eps + 1e-12);
                assert!((mu.epsilon() - c * eps).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn epsilon_is_increasing_in_scale() {
        let mut last = 0.0;
        for i in 1..40 {
            let eps = 0.05 * i as f64;
            let mu = build_measure(Backend::Sl2R, &MeasureFamilySpec::ExpBasisFamily { eps }).unwrap();
            assert!(mu.epsilon() > last);
            last = mu.epsilon();
        }
    }

    #[test]
    fn rotation_pair_is_compact() {
        let mu = build_measure(Backend::Sl2R, &MeasureFamilySpec::RotationPair { phi: 1.0 }).unwrap();
        assert_eq!(mu.epsilon(), 0.0);
        assert!(mu.is_symmetric());
        assert!(mu.is_compact());
    }

    #[test]
    fn zero_scale_is_rejected() {
        let r = build_measure(Backend::Sl2R, &MeasureFamilySpec::ExpBasisFamily { eps: 0.0 });
        assert!(matches!(r, Err(Error::DegenerateMeasure(_))));
    }

    #[test]
    fn symmetrize_dirac_and_symmetric() {
        let g = GroupElement::new(Backend::Sl2R, Mat2::real(1.0, 0.3, 0.1, 1.03)).unwrap();
        let s = symmetrize(&SupportMeasure::dirac(g));
        assert_eq!(s.atoms().len(), 2);
        assert!(s.is_symmetric());
        assert!((s.atoms()[0].weight - 0.5).abs() < 1e-15);
        assert!(s.atoms()[1].element.max_abs_diff(&g.inverse()) < 1e-15);
        assert!((s.epsilon() - SupportMeasure::dirac(g).epsilon()).abs() < 1e-12);

        let mu = build_measure(Backend::Sl2C, &MeasureFamilySpec::ExpBasisFamily { eps: 0.2 }).unwrap();
        let s = symmetrize(&mu);
        assert_eq!(s.atoms().len(), mu.atoms().len());
        for (a, b) in s.atoms().iter().zip(mu.atoms()) {
            assert!(a.element.max_abs_diff(&b.element) < 1e-15);
            assert!((a.weight - b.weight).abs() < 1e-15);
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = MeasureFamilySpec::ConjugatedPair {
            eps: 0.25,
            conjugator: MatrixSpec::real([[1.2, 0.4], [0.0, 1.0 / 1.2]]),
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"conjugated-pair\""));
        let back: MeasureFamilySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
