//! Positive semidefiniteness tests for small dense symmetric matrices.

use nalgebra::DMatrix;
use serde::Serialize;

/// Relative tolerance: min eigenvalue ≥ −PSD_TOL·(1 + spectral norm).
pub const PSD_TOL: f64 = 1e-9;

pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenVerdict {
    pub min_eig: f64,
    pub spectral_norm: f64,
    pub psd: bool,
}

/// Verdict from a full symmetric eigensolve (Householder tridiagonalisation
/// followed by implicit QR).
pub fn eigen_verdict(sym: &DMatrix<f64>, tol: f64) -> EigenVerdict {
    let eig = sym.clone().symmetric_eigenvalues();
    let min_eig = eig.min();
    let spectral_norm = eig.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    EigenVerdict {
        min_eig,
        spectral_norm,
        psd: min_eig >= -tol * (1.0 + spectral_norm),
    }
}

/// Cholesky with complete diagonal pivoting. Elimination stops once every
/// remaining pivot is below the threshold; the matrix is then declared PSD
/// when the leftover Schur complement is negligible.
pub fn pivoted_cholesky_psd(sym: &DMatrix<f64>, tol: f64) -> bool {
    let n = sym.nrows();
    let threshold = tol * (1.0 + max_abs(sym)) * n as f64;
    let mut s = sym.clone();
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        let (pos, &p) = active
            .iter()
            .enumerate()
            .max_by(|a, b| s[(*a.1, *a.1)].total_cmp(&s[(*b.1, *b.1)]))
            .unwrap();
        let d = s[(p, p)];
        if d < -threshold {
            return false;
        }
        if d <= threshold {
            return active
                .iter()
                .all(|&i| active.iter().all(|&j| s[(i, j)].abs() <= threshold));
        }
        active.swap_remove(pos);
        for &i in &active {
            let li = s[(i, p)] / d;
            for &j in &active {
                s[(i, j)] -= li * s[(p, j)];
            }
        }
    }
    true
}
