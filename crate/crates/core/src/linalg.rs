//! Shared 3x3 symmetric solves for normal equations and information matrices.

use nalgebra::{Matrix3, Vector3};

/// Condition-number ceiling past which a design or information matrix is
/// treated as rank deficient.
pub(crate) const CONDITION_LIMIT: f64 = 1e12;

pub(crate) const COLUMN_NAMES: [&str; 3] = ["intercept", "treatment", "exposure"];

/// Inverts a symmetric positive-definite 3x3 matrix through its eigenvalue
/// decomposition, rejecting indefinite or ill-conditioned input. On failure
/// the returned name points at the design column most aligned with the
/// deficient direction.
pub(crate) fn invert_spd(m: &Matrix3<f64>) -> Result<Matrix3<f64>, &'static str> {
    if let Some(bad) = m.iter().position(|v| !v.is_finite()) {
        return Err(COLUMN_NAMES[bad / 3]);
    }
    let eigen = m.symmetric_eigen();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut min_idx = 0;
    for (i, &l) in eigen.eigenvalues.iter().enumerate() {
        if l < min {
            min = l;
            min_idx = i;
        }
        max = max.max(l);
    }
    if !min.is_finite() || min <= 0.0 || max / min > CONDITION_LIMIT {
        let dir = eigen.eigenvectors.column(min_idx);
        return Err(deficient_column(&Vector3::new(dir[0], dir[1], dir[2])));
    }
    let inv_diag = Vector3::from_iterator(eigen.eigenvalues.iter().map(|&l| 1.0 / l));
    let inv = eigen.eigenvectors * Matrix3::from_diagonal(&inv_diag) * eigen.eigenvectors.transpose();
    // the reconstruction is symmetric only up to rounding; make it exact
    Ok((inv + inv.transpose()) * 0.5)
}

/// Largest component of the near-null direction decides which column gets
/// named; near ties blame the later column so a degenerate treatment or
/// exposure column is reported rather than the always-present intercept.
fn deficient_column(dir: &Vector3<f64>) -> &'static str {
    let amax = dir.amax();
    let mut idx = 0;
    for i in 0..3 {
        if dir[i].abs() >= 0.5 * amax {
            idx = i;
        }
    }
    COLUMN_NAMES[idx]
}
