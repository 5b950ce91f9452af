//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

/// Numerical rank with singular values below `rel_tol * sigma_max` treated as zero.
pub fn rank(mat: &DMatrix<f64>, rel_tol: f64) -> usize {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return 0;
    }
    let svd = mat.clone().svd(false, false);
    let max_sv = svd.singular_values.max();
    if max_sv <= 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > rel_tol * max_sv).count()
}

/// 2-norm condition estimate, `f64::INFINITY` for singular input.
pub fn condition_estimate(mat: &DMatrix<f64>) -> f64 {
    let svd = mat.clone().svd(false, false);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if min_sv <= 0.0 {
        f64::INFINITY
    } else {
        max_sv / min_sv
    }
}

/// Minimum-norm least-squares solve via SVD.
pub fn lstsq(mat: &DMatrix<f64>, rhs: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let svd = mat.clone().svd(true, true);
    let eps = rel_tol * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(rhs, eps).expect("svd solve with computed factors")
}

/// Moore-Penrose pseudoinverse with the crate-wide singular value cutoff.
pub fn pseudo_inverse(mat: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = mat.clone().svd(true, true);
    let eps = rel_tol * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.pseudo_inverse(eps).expect("svd pseudo inverse with computed factors")
}

/// Infinity norm of a vector, zero for empty input.
pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_rank_deficient_matrix() {
        // two identical rows
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 0.0, 1.0, 0.0]);
        assert_eq!(rank(&m, 1e-9), 2);
    }

    #[test]
    fn lstsq_consistent_system() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let x = lstsq(&m, &b, 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }
}
