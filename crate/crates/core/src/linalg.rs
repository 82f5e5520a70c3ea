//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimum-norm least-squares solution together with the numerical rank that was used.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    pub rank: usize,
    pub cols: usize,
}

impl LstsqSolution {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.cols
    }
}

fn rank_tolerance(smax: f64, rows: usize, cols: usize) -> f64 {
    smax * rows.max(cols) as f64 * f64::EPSILON
}

fn solve_svd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<LstsqSolution> {
    let (m, n) = a.shape();
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 || !smax.is_finite() {
        if !smax.is_finite() {
            return Err(Error::InvalidInput(
                "non-finite least-squares matrix".into(),
            ));
        }
        return Ok(LstsqSolution {
            x: DVector::zeros(n),
            rank: 0,
            cols: n,
        });
    }
    let tol = rank_tolerance(smax, m, n);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let x = svd
        .solve(b, tol)
        .map_err(|e| Error::InvalidInput(format!("least-squares solve failed: {e}")))?;
    Ok(LstsqSolution { x, rank, cols: n })
}

/// `argmin ‖A x − b‖₂` with minimum norm among minimizers.
///
/// Tall systems are first reduced with a Householder QR so the SVD runs on
/// the small triangular factor.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LstsqSolution> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            context: "least-squares rhs",
            expected: m,
            found: b.len(),
        });
    }
    if m > n {
        let qr = a.clone().qr();
        let mut qtb = b.clone();
        qr.q_tr_mul(&mut qtb);
        let c = qtb.rows(0, n).into_owned();
        solve_svd(qr.r(), &c)
    } else {
        solve_svd(a.clone(), b)
    }
}

/// Moore–Penrose pseudo-inverse with the standard `σ_max · max(m, n) · ε` cutoff.
pub fn pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = a.shape();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = rank_tolerance(smax, m, n);
    svd.pseudo_inverse(tol)
        .map_err(|e| Error::InvalidInput(format!("pseudo-inverse failed: {e}")))
}

/// Leading left singular vectors and the full (descending) singular spectrum.
#[derive(Debug, Clone)]
pub struct LeftSingular {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
}

/// Computes the `k` leading left singular vectors of `a`.
///
/// Wide (and large, nearly square) matrices go through the symmetric
/// eigendecomposition of `A Aᵀ`, which is far cheaper than a full SVD when
/// the column count is comparable to or exceeds the row count. Singular
/// values on that path are recomputed as `‖Aᵀuᵢ‖`.
pub fn left_singular(a: &DMatrix<f64>, k: usize) -> Result<LeftSingular> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let (u_all, sv, tol) = if n > m || (m > 256 && 2 * n > m) {
        let gram = a * a.transpose();
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| {
            eig.eigenvalues[j]
                .total_cmp(&eig.eigenvalues[i])
                .then(i.cmp(&j))
        });
        let u = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        // sqrt(λ) loses everything below √ε·σ_max; ‖Aᵀuᵢ‖ is accurate to
        // O(ε σ_max) absolute, so the usual SVD cutoff applies.
        let proj = a.tr_mul(&u);
        let norms: Vec<f64> = proj.column_iter().map(|c| c.norm()).collect();
        let mut by_sv: Vec<usize> = (0..m).collect();
        by_sv.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
        let sv: Vec<f64> = by_sv.iter().map(|&i| norms[i]).collect();
        let u = DMatrix::from_fn(m, m, |r, c| u[(r, by_sv[c])]);
        let tol = rank_tolerance(sv[0], m, n);
        (u, sv, tol)
    } else {
        let svd = a.clone().svd(true, false);
        let u_raw = svd.u.expect("requested U");
        let p = svd.singular_values.len();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[j]
                .total_cmp(&svd.singular_values[i])
                .then(i.cmp(&j))
        });
        let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let u = DMatrix::from_fn(m, p, |r, c| u_raw[(r, order[c])]);
        let tol = rank_tolerance(sv[0], m, n);
        (u, sv, tol)
    };
    let numerical_rank = sv.iter().filter(|&&s| s > tol).count();
    if k > numerical_rank {
        return Err(Error::RankExceeded {
            requested: k,
            numerical_rank,
        });
    }
    Ok(LeftSingular {
        u: u_all.columns(0, k).into_owned(),
        singular_values: sv,
        numerical_rank,
    })
}

/// Flips each column so that its largest-magnitude entry is positive (first one on ties).
pub fn fix_column_signs(u: &mut DMatrix<f64>) {
    for mut col in u.column_iter_mut() {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// `max |(QᵀQ − I)_ij|`.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let mut err: f64 = 0.0;
    for c in 0..g.ncols() {
        for r in 0..g.nrows() {
            let target = if r == c { 1.0 } else { 0.0 };
            err = err.max((g[(r, c)] - target).abs());
        }
    }
    err
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_tall_full_rank() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let s = lstsq(&a, &b).unwrap();
        assert!(s.is_full_rank());
        assert!((s.x[0] - 1.0).abs() < 1e-14 && (s.x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lstsq_rank_deficient_min_norm() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0, 2.0]);
        let s = lstsq(&a, &b).unwrap();
        assert_eq!(s.rank, 1);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wide_and_tall_paths_agree() {
        let a = DMatrix::from_fn(4, 9, |r, c| {
            ((r * 7 + c * 3) % 5) as f64 + 0.1 * (r as f64) - 0.3 * c as f64
        });
        let wide = left_singular(&a, 3).unwrap();
        let tall = left_singular(&a.transpose(), 3).unwrap();
        let svd = a.clone().svd(false, false);
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        for i in 0..3 {
            assert!((wide.singular_values[i] - s[i]).abs() < 1e-10 * s[0]);
            assert!((tall.singular_values[i] - s[i]).abs() < 1e-12 * s[0]);
        }
        assert!(orthonormality_error(&wide.u) < 1e-12);
    }

    #[test]
    fn sign_convention() {
        let mut u = DMatrix::from_column_slice(3, 1, &[0.1, -0.9, 0.3]);
        fix_column_signs(&mut u);
        assert_eq!(u[(1, 0)], 0.9);
    }
}
