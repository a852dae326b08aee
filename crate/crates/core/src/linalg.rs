//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric inverse square root `V diag(λ^{-1/2}) Vᵀ`, with eigenvalues
/// floored at `floor_rel · λ_max`.
pub fn inv_sqrt_sym(m: &DMatrix<f64>, floor_rel: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("matrix is not square".into()));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Singular("matrix has no positive eigenvalue".into()));
    }
    let floor = floor_rel * max;
    let d = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&d) * v.transpose())
}

/// Ratio of the extreme eigenvalues of a symmetric matrix.
pub fn condition_number_sym(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Orthogonal projector onto the column space of `x`, built from the SVD.
/// Directions whose squared singular value is below `tol · s_max²` are
/// dropped, which is the same as a pseudoinverse of `xᵀx` at relative
/// tolerance `tol`. Returns the projector and the numerical rank.
pub fn column_projector(x: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, usize) {
    let rows = x.nrows();
    if x.ncols() == 0 {
        return (DMatrix::zeros(rows, rows), 0);
    }
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut p = DMatrix::zeros(rows, rows);
    let mut rank = 0;
    if smax > 0.0 {
        for (k, s) in svd.singular_values.iter().enumerate() {
            if s * s > tol * smax * smax {
                let col = u.column(k);
                p += &col * col.transpose();
                rank += 1;
            }
        }
    }
    (p, rank)
}

/// Solves `a x = b` by LU with two steps of iterative refinement, falling
/// back to an SVD least-squares solve when the factorization fails.
pub fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "system {}x{} with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let lu = a.clone().lu();
    if let Some(mut x) = lu.solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            for _ in 0..2 {
                let r = b - a * &x;
                match lu.solve(&r) {
                    Some(dx) if dx.iter().all(|v| v.is_finite()) => x += dx,
                    _ => break,
                }
            }
            return Ok(x);
        }
    }
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(b, 1e-14 * svd.singular_values.max())
        .map_err(|e| Error::Singular(e.to_string()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("least-squares fallback produced non-finite values".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inv_sqrt_squares_to_inverse() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let s = inv_sqrt_sym(&m, 1e-12).unwrap();
        let should_be_identity = &s * &m * &s;
        assert!((should_be_identity - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn projector_of_rank_deficient_design() {
        let x = DMatrix::from_row_slice(4, 3, &[1., 2., 3., 0., 1., 1., 1., 0., 1., 2., 1., 3.]);
        let (p, rank) = column_projector(&x, 1e-10);
        assert_eq!(rank, 2);
        assert!((&p * &p - &p).amax() < 1e-12);
        assert!((p.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn refined_solve_matches_residual() {
        let a = DMatrix::from_fn(20, 20, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 1.0 } else { 0.0 });
        let b = DVector::from_fn(20, |i, _| (i as f64).sin());
        let x = solve_refined(&a, &b).unwrap();
        assert!((&a * &x - &b).amax() < 1e-13);
    }
}
