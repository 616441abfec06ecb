//! Cartan and Iwasawa factors of a single matrix.

use fslab_core::group::{cartan_project, iwasawa_decompose};
use fslab_core::measure::MatrixSpec;
use fslab_core::{Backend, GroupElement, Mat2, C64};
use serde::Serialize;

use crate::CliError;

/// Inputs with `|det − 1|` above this are rejected.
pub const DET_TOLERANCE: f64 = 1e-6;

type Rows = [[[f64; 2]; 2]; 2];

fn rows(m: &Mat2) -> Rows {
    m.0.map(|row| row.map(|z| [z.re, z.im]))
}

#[derive(Clone, Debug, Serialize)]
pub struct CartanOutput {
    /// `t` in `g = k1 · diag(eᵗ, e⁻ᵗ) · k2`.
    pub t: f64,
    pub kappa_norm: f64,
    pub k1: Rows,
    pub k2: Rows,
    pub reconstruction_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IwasawaOutput {
    /// `t` in `g = k · diag(eᵗ, e⁻ᵗ) · n`.
    pub t: f64,
    pub h_norm: f64,
    pub k: Rows,
    /// Upper-right entry of `n` as `[re, im]`.
    pub n_upper: [f64; 2],
    pub reconstruction_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub backend: Backend,
    pub det_error: f64,
    pub cartan: CartanOutput,
    pub iwasawa: IwasawaOutput,
}

/// Parses `[[a, b], [c, d]]` with real or `[re, im]` entries. Without an
/// explicit backend, any nonzero imaginary part selects SL2C.
pub fn parse_matrix(text: &str, backend: Option<Backend>) -> Result<(Backend, Mat2), CliError> {
    let spec: MatrixSpec = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("malformed matrix: {e}")))?;
    let m = spec.to_mat2();
    if !m.is_finite() {
        return Err(CliError::Usage("malformed matrix: non-finite entry".into()));
    }
    let backend = backend.unwrap_or(if m.max_imag() == 0.0 { Backend::Sl2R } else { Backend::Sl2C });
    Ok((backend, m))
}

fn fmt_entry(z: [f64; 2], real: bool) -> String {
    if real {
        format!("{:.9}", z[0])
    } else {
        format!("{:.9}{:+.9}i", z[0], z[1])
    }
}

fn fmt_matrix(m: &Rows, real: bool) -> String {
    let row = |r: &[[f64; 2]; 2]| format!("[{}, {}]", fmt_entry(r[0], real), fmt_entry(r[1], real));
    format!("[{}, {}]", row(&m[0]), row(&m[1]))
}

impl Decomposition {
    pub fn to_text(&self) -> String {
        let real = self.backend.is_real();
        let (c, i) = (&self.cartan, &self.iwasawa);
        format!(
            "backend {}  |det - 1| {:.3e}\n\
             cartan   t {:.12}  |kappa| {:.12}  reconstruction error {:.3e}\n\
             \x20 k1 {}\n\
             \x20 k2 {}\n\
             iwasawa  t {:.12}  |H| {:.12}  reconstruction error {:.3e}\n\
             \x20 k  {}\n\
             \x20 n  [[1, {}], [0, 1]]\n",
            self.backend,
            self.det_error,
            c.t,
            c.kappa_norm,
            c.reconstruction_error,
            fmt_matrix(&c.k1, real),
            fmt_matrix(&c.k2, real),
            i.t,
            i.h_norm,
            i.reconstruction_error,
            fmt_matrix(&i.k, real),
            fmt_entry(i.n_upper, real),
        )
    }
}

pub fn decompose(backend: Backend, m: Mat2) -> Result<Decomposition, CliError> {
    let det_error = (m.det() - C64::new(1.0, 0.0)).norm();
    let g = GroupElement::new_unimodular(backend, m, DET_TOLERANCE).map_err(|e| CliError::Usage(e.to_string()))?;
    let h_norm = backend.spec().h_norm();
    let c = cartan_project(&g)?;
    let i = iwasawa_decompose(&g);
    Ok(Decomposition {
        backend,
        det_error,
        cartan: CartanOutput {
            t: c.a_coordinate,
            kappa_norm: c.a_coordinate * h_norm,
            k1: rows(c.k1.matrix()),
            k2: rows(c.k2.matrix()),
            reconstruction_error: c.reconstruct().max_abs_diff(g.matrix()),
        },
        iwasawa: IwasawaOutput {
            t: i.h_coordinate,
            h_norm: i.h_coordinate.abs() * h_norm,
            k: rows(i.k.matrix()),
            n_upper: [i.n_upper.re, i.n_upper.im],
            reconstruction_error: i.reconstruct().max_abs_diff(g.matrix()),
        },
    })
}
