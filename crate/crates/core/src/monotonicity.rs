//! Loewner-order tests between ND matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::nd_map::NdMatrix;

/// Relative slack for noiseless data.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoewnerVerdict {
    pub holds: bool,
    /// Smallest eigenvalue of `A - B`.
    pub lambda_min: f64,
    /// `lambda_min / ‖A - B‖₂` (0 when the difference vanishes).
    pub margin: f64,
    pub tolerance_used: f64,
    /// `max(‖A‖₂, ‖B‖₂)`.
    pub scale: f64,
}

/// Tolerance policy: `max(1e-8, 2·noise)` for the declared noise level.
pub fn tolerance_for(measured: &NdMatrix) -> f64 {
    DEFAULT_TOLERANCE.max(2.0 * measured.provenance.noise_level)
}

fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m)
        .into_iter()
        .fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Decides `A ≥ B`: holds iff `λ_min(A - B) ≥ -tol·max(‖A‖₂, ‖B‖₂)`.
pub fn loewner_geq(a: &NdMatrix, b: &NdMatrix, tol: f64) -> Result<LoewnerVerdict> {
    if a.order() != b.order() {
        return Err(Error::Data(format!(
            "cannot compare orders {} and {}",
            a.order(),
            b.order()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance {tol} must be positive")));
    }
    Ok(loewner_geq_matrices(&a.matrix, &b.matrix, tol))
}

pub(crate) fn loewner_geq_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> LoewnerVerdict {
    let diff = a - b;
    let eig = symmetric_eigenvalues(&diff);
    let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let diff_norm = eig.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let scale = spectral_norm(a).max(spectral_norm(b));
    let margin = if diff_norm > 0.0 {
        lambda_min / diff_norm
    } else {
        0.0
    };
    LoewnerVerdict {
        holds: lambda_min >= -tol * scale,
        lambda_min,
        margin,
        tolerance_used: tol,
        scale,
    }
}
