//! Dense linear-algebra helpers on top of `nalgebra`.
//!
//! Rank decisions treat singular values below `1e-12 * sigma_max` as zero.

use nalgebra::DMatrix;

use crate::error::{KuraError, Result};

/// Relative cutoff for numerically zero singular values.
pub const RANK_RCOND: f64 = 1e-12;

fn singular_cutoff(sv: &nalgebra::DVector<f64>) -> f64 {
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    RANK_RCOND * smax
}

/// Moore–Penrose pseudoinverse via SVD.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let cutoff = singular_cutoff(&svd.singular_values);
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            // out += v_k * u_k^T / s
            let vk = v_t.row(k).transpose();
            let uk = u.column(k);
            out += (vk * uk.transpose()) / s;
        }
    }
    out
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let cutoff = singular_cutoff(&sv);
    sv.iter().filter(|&&s| s > cutoff && s > 0.0).count()
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Induced infinity norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Weighted graph Laplacian `D - A` of a symmetric adjacency matrix.
pub fn laplacian(adj: &DMatrix<f64>) -> DMatrix<f64> {
    let n = adj.nrows();
    let mut l = -adj.clone();
    for i in 0..n {
        l[(i, i)] = adj.row(i).sum() - adj[(i, i)];
    }
    l
}

/// Solves `A^T P + P A = -I` for symmetric `P`.
///
/// Uses the Kronecker-vectorized linear system, so it is meant for the small
/// matrices produced by the certificate module (n up to a few dozen).
pub fn solve_lyapunov(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(KuraError::DimensionMismatch(format!(
            "Lyapunov equation needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    // column-major vec: vec(A^T P) = (I ⊗ A^T) vec P, vec(P A) = (A^T ⊗ I) vec P
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -nalgebra::DVector::from_column_slice(eye.as_slice());
    let sol = k.lu().solve(&rhs).ok_or_else(|| {
        KuraError::AssumptionViolated("Lyapunov operator is singular (matrix not Hurwitz)".into())
    })?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// Maps an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}
