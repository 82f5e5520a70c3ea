use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::pinv;

/// Sample set and the gappy least-squares operator `A = [PΦ_r]⁺`.
///
/// Sampled dofs are ordered like a state vector restricted to the sample:
/// all χ rows (`i`) first, then all ψ rows (`i + N`).
#[derive(Debug, Clone, PartialEq)]
pub struct GnatOperator {
    pub sample_ids: Vec<usize>,
    pub sampled_dofs: Vec<usize>,
    /// `M_r × 2n̆`.
    pub a: DMatrix<f64>,
}

impl GnatOperator {
    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }
}

pub(crate) fn sampled_dofs(ids: &[usize], n: usize) -> Vec<usize> {
    ids.iter()
        .copied()
        .chain(ids.iter().map(|&i| i + n))
        .collect()
}

pub(crate) fn check_sample_ids(ids: &[usize], n: usize) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::InvalidInput("empty sample set".into()));
    }
    if !ids.windows(2).all(|w| w[0] < w[1]) || *ids.last().expect("non-empty") >= n {
        return Err(Error::InvalidInput(format!(
            "sample ids must be strictly increasing and < {n}: {ids:?}"
        )));
    }
    Ok(())
}

/// Columns of `m` that are numerically dependent on earlier columns, by
/// greedy Gram–Schmidt with re-orthogonalization.
fn dependent_columns(m: &DMatrix<f64>) -> Vec<usize> {
    let mut q: Vec<nalgebra::DVector<f64>> = Vec::new();
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut dependent = Vec::new();
    for (j, col) in m.column_iter().enumerate() {
        let mut v = col.into_owned();
        for _ in 0..2 {
            for u in &q {
                let d = u.dot(&v);
                v.axpy(-d, u, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
            dependent.push(j);
        } else {
            q.push(v / norm);
        }
    }
    dependent
}

/// Gappy operator for `phi_r` restricted to the particles in `sample_ids` (sorted).
pub fn gnat_operator(phi_r: &DMatrix<f64>, sample_ids: &[usize]) -> Result<GnatOperator> {
    let n = phi_r.nrows() / 2;
    check_sample_ids(sample_ids, n)?;
    let dofs = sampled_dofs(sample_ids, n);
    let m_r = phi_r.ncols();
    if dofs.len() < m_r {
        return Err(Error::InvalidInput(format!(
            "{} sampled dofs cannot determine {m_r} residual coordinates",
            dofs.len()
        )));
    }
    let p_phi = DMatrix::from_fn(dofs.len(), m_r, |r, c| phi_r[(dofs[r], c)]);
    let dependent = dependent_columns(&p_phi);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    let a = pinv(&p_phi)?;
    Ok(GnatOperator {
        sample_ids: sample_ids.to_vec(),
        sampled_dofs: dofs,
        a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_sampling_of_orthonormal_basis_is_transpose() {
        let phi = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let op = gnat_operator(&phi, &[0, 1]).unwrap();
        // dofs are [0, 1, 2, 3] in this order, so A equals Φᵀ
        assert!((op.a.clone() - phi.transpose()).abs().max() < 1e-14);
    }

    #[test]
    fn unit_norm_single_column() {
        let mut phi = DMatrix::zeros(6, 1);
        phi[(1, 0)] = 0.6;
        phi[(4, 0)] = 0.8;
        let op = gnat_operator(&phi, &[1]).unwrap();
        assert_eq!(op.sampled_dofs, vec![1, 4]);
        assert!((op.a[(0, 0)] - 0.6).abs() < 1e-14 && (op.a[(0, 1)] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn dependent_columns_are_named() {
        let phi = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        // particle 0 only sees column 0; column 1 vanishes on its dofs
        assert!(
            matches!(gnat_operator(&phi, &[0]), Err(Error::RankDeficient { columns }) if columns == vec![1])
        );
    }
}
