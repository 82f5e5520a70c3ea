use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{fix_column_signs, left_singular};

/// Orthonormal trial basis `Φ` with its singular values and reference state.
///
/// Reduced states map back to the full space as `x = x_ref + Φ x̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub phi: DMatrix<f64>,
    /// The `M` retained singular values, non-increasing.
    pub singular_values: Vec<f64>,
    /// Full singular spectrum of the snapshot matrix.
    pub spectrum: Vec<f64>,
    pub x_ref: Vec<f64>,
}

/// Whether snapshots are shifted by the reference state before the SVD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Factor `[x¹ .. x^{N_t}]` as collected.
    Raw,
    /// Factor `[x¹ − x_ref .. x^{N_t} − x_ref]`, consistent with `x = x_ref + Φ x̂`.
    #[default]
    Reference,
}

/// Thin SVD of the snapshot matrix truncated to `m` columns, with the sign
/// convention that each column's largest-magnitude entry is positive.
pub fn build_pod(
    snapshots: &DMatrix<f64>,
    m: usize,
    x_ref: &[f64],
    centering: Centering,
) -> Result<PodBasis> {
    check_len("reference state", snapshots.nrows(), x_ref.len())?;
    if m == 0 || m > snapshots.nrows().min(snapshots.ncols()) {
        return Err(Error::InvalidInput(format!(
            "basis size {m} must lie in [1, min({}, {})]",
            snapshots.nrows(),
            snapshots.ncols()
        )));
    }
    let ls = match centering {
        Centering::Raw => left_singular(snapshots, m)?,
        Centering::Reference => {
            let shift = DVector::from_column_slice(x_ref);
            let mut s = snapshots.clone();
            for mut col in s.column_iter_mut() {
                col -= &shift;
            }
            left_singular(&s, m)?
        }
    };
    let mut phi = ls.u;
    fix_column_signs(&mut phi);
    Ok(PodBasis {
        phi,
        singular_values: ls.singular_values[..m].to_vec(),
        spectrum: ls.singular_values,
        x_ref: x_ref.to_vec(),
    })
}

impl PodBasis {
    pub fn m(&self) -> usize {
        self.phi.ncols()
    }

    pub fn n_dofs(&self) -> usize {
        self.phi.nrows()
    }

    /// `x̂ = Φᵀ (x − x_ref)`.
    pub fn project(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_len("projected state", self.n_dofs(), x.len())?;
        let d = DVector::from_iterator(x.len(), x.iter().zip(&self.x_ref).map(|(a, b)| a - b));
        Ok(self.phi.tr_mul(&d))
    }

    /// `x_ref + Φ x̂`.
    pub fn reconstruct(&self, x_hat: &DVector<f64>) -> Vec<f64> {
        let y = &self.phi * x_hat;
        y.iter().zip(&self.x_ref).map(|(a, b)| a + b).collect()
    }

    /// Fraction of snapshot energy captured, `Σ_{i≤M} σᵢ² / Σ σᵢ²`.
    pub fn energy_fraction(&self) -> f64 {
        let total: f64 = self.spectrum.iter().map(|s| s * s).sum();
        let kept: f64 = self.singular_values.iter().map(|s| s * s).sum();
        if total == 0.0 {
            1.0
        } else {
            kept / total
        }
    }
}

/// `ΦΣ̂`, read as `N` pseudo-particle positions in the usual state layout.
pub fn weighted_pod_space(basis: &PodBasis) -> Vec<f64> {
    let s = DVector::from_column_slice(&basis.singular_values);
    (&basis.phi * s).as_slice().to_vec()
}

/// Orthonormal basis of the time-discrete residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBasis {
    pub phi_r: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl ResidualBasis {
    pub fn m_r(&self) -> usize {
        self.phi_r.ncols()
    }

    pub fn n_dofs(&self) -> usize {
        self.phi_r.nrows()
    }
}

/// POD of residual snapshots (no centering).
pub fn build_residual_basis(snapshots: &DMatrix<f64>, m_r: usize) -> Result<ResidualBasis> {
    if m_r == 0 || m_r > snapshots.nrows().min(snapshots.ncols()) {
        return Err(Error::InvalidInput(format!(
            "residual basis size {m_r} must lie in [1, min({}, {})]",
            snapshots.nrows(),
            snapshots.ncols()
        )));
    }
    let ls = left_singular(snapshots, m_r)?;
    let mut phi_r = ls.u;
    fix_column_signs(&mut phi_r);
    Ok(ResidualBasis {
        phi_r,
        singular_values: ls.singular_values[..m_r].to_vec(),
    })
}
