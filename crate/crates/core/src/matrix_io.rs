//! Binary operator-matrix files.
//!
//! Layout: the 8-byte magic `FSLMAT01`, little-endian `u32` rows and cols,
//! a `u8` field flag (0 real, 1 complex interleaved), a `u8` adjoint flag,
//! two reserved zero bytes, then row-major little-endian `f64` values. A
//! JSON sidecar records how the matrix was produced.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::Backend;
use crate::transfer::OperatorMatrix;
use crate::{BASIS_ORDER_VERSION, C64};

pub const MAGIC: &[u8; 8] = b"FSLMAT01";
const HEADER_LEN: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub backend: Backend,
    pub cutoff: u32,
    pub basis_order_version: u32,
    pub measure_hash: String,
    pub quadrature_order: u32,
    pub adjoint: bool,
}

impl MatrixSidecar {
    pub fn for_operator(op: &OperatorMatrix) -> Self {
        MatrixSidecar {
            backend: op.backend,
            cutoff: op.cutoff,
            basis_order_version: BASIS_ORDER_VERSION,
            measure_hash: op.measure_hash.clone(),
            quadrature_order: op.quadrature_band,
            adjoint: op.adjoint,
        }
    }
}

/// Matrix contents of a file, before pairing with a sidecar.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMatrix {
    pub matrix: DMatrix<C64>,
    pub complex: bool,
    pub adjoint: bool,
}

/// Serializes a matrix. `complex = false` stores real parts only and fails
/// if any imaginary part is nonzero.
pub fn encode(matrix: &DMatrix<C64>, complex: bool, adjoint: bool) -> Result<Vec<u8>> {
    let (rows, cols) = matrix.shape();
    let rows32 = u32::try_from(rows).map_err(|_| Error::MatrixFormat("too many rows".into()))?;
    let cols32 = u32::try_from(cols).map_err(|_| Error::MatrixFormat("too many columns".into()))?;
    let per = if complex { 16 } else { 8 };
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * per);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows32.to_le_bytes());
    out.extend_from_slice(&cols32.to_le_bytes());
    out.push(u8::from(complex));
    out.push(u8::from(adjoint));
    out.extend_from_slice(&[0, 0]);
    for i in 0..rows {
        for j in 0..cols {
            let z = matrix[(i, j)];
            if !complex && z.im != 0.0 {
                return Err(Error::MatrixFormat(format!("entry ({i},{j}) is not real")));
            }
            out.extend_from_slice(&z.re.to_le_bytes());
            if complex {
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<RawMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::MatrixFormat("missing FSLMAT01 header".into()));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let complex = match bytes[16] {
        0 => false,
        1 => true,
        f => return Err(Error::MatrixFormat(format!("unknown field flag {f}"))),
    };
    let adjoint = match bytes[17] {
        0 => false,
        1 => true,
        f => return Err(Error::MatrixFormat(format!("unknown adjoint flag {f}"))),
    };
    let per = if complex { 16 } else { 8 };
    let expected = HEADER_LEN + rows * cols * per;
    if bytes.len() != expected {
        return Err(Error::MatrixFormat(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let f = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
    let matrix = DMatrix::from_fn(rows, cols, |i, j| {
        let off = HEADER_LEN + (i * cols + j) * per;
        C64::new(f(off), if complex { f(off + 8) } else { 0.0 })
    });
    Ok(RawMatrix { matrix, complex, adjoint })
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    path.with_file_name(name)
}

/// Writes `path` and `path.json`. Real-backend operators are stored as real
/// matrices.
pub fn write_operator(path: &Path, op: &OperatorMatrix) -> Result<()> {
    let complex = !op.backend.is_real() || op.matrix.iter().any(|z| z.im != 0.0);
    let bytes = encode(&op.matrix, complex, op.adjoint)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    let sidecar = serde_json::to_string_pretty(&MatrixSidecar::for_operator(op))?;
    std::fs::write(sidecar_path(path), sidecar + "\n")?;
    Ok(())
}

pub fn read_operator(path: &Path) -> Result<OperatorMatrix> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let raw = decode(&bytes)?;
    let sidecar: MatrixSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    if sidecar.basis_order_version != BASIS_ORDER_VERSION {
        return Err(Error::BasisOrder(sidecar.basis_order_version, BASIS_ORDER_VERSION));
    }
    if sidecar.adjoint != raw.adjoint {
        return Err(Error::MatrixFormat("adjoint flag disagrees with sidecar".into()));
    }
    let dim = crate::harmonics::basis_dim(sidecar.backend, sidecar.cutoff);
    if raw.matrix.shape() != (dim, dim) {
        return Err(Error::MatrixFormat(format!(
            "shape {:?} does not match cutoff {}",
            raw.matrix.shape(),
            sidecar.cutoff
        )));
    }
    Ok(OperatorMatrix {
        backend: sidecar.backend,
        cutoff: sidecar.cutoff,
        adjoint: raw.adjoint,
        matrix: raw.matrix,
        quadrature_band: sidecar.quadrature_order,
        measure_hash: sidecar.measure_hash,
        self_check_delta: None,
    })
}
