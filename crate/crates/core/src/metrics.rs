//! Quantities of interest, error measures, speed-up and a posteriori bounds.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::integrators::{trapezoidal_residual, MultistepScheme};
use crate::kernel::{hamiltonian, pairwise_velocity, position, ParticleSystem};

/// `|H_rom − H_fom| / |H_fom|`.
pub fn ae_hamiltonian(h_fom: f64, h_rom: f64) -> Result<f64> {
    if h_fom == 0.0 || !h_fom.is_finite() || !h_rom.is_finite() {
        return Err(Error::InvalidInput(format!(
            "relative Hamiltonian error undefined for H_fom = {h_fom}, H_rom = {h_rom}"
        )));
    }
    Ok((h_rom - h_fom).abs() / h_fom.abs())
}

/// `(1 / lN) Σᵢ ‖pos_fom,i − pos_rom,i‖₂`.
pub fn mae_trajectory(state_fom: &[f64], state_rom: &[f64], l: f64) -> Result<f64> {
    check_len("ROM state", state_fom.len(), state_rom.len())?;
    if !(l > 0.0) || !state_fom.len().is_multiple_of(2) || state_fom.is_empty() {
        return Err(Error::InvalidInput(format!(
            "MAE needs l > 0 and a non-empty state (l = {l})"
        )));
    }
    let n = state_fom.len() / 2;
    let sum: f64 = (0..n)
        .map(|i| {
            let (a, b) = (position(state_fom, i), position(state_rom, i));
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .sum();
    Ok(sum / (l * n as f64))
}

/// Distance between the first and last particle of `x0`.
pub fn characteristic_length(x0: &[f64]) -> Result<f64> {
    let n = x0.len() / 2;
    if n < 2 {
        return Err(Error::InvalidInput(
            "characteristic length needs two particles".into(),
        ));
    }
    let (a, b) = (position(x0, 0), position(x0, n - 1));
    let l = (b[0] - a[0]).hypot(b[1] - a[1]);
    if !(l > 0.0) {
        return Err(Error::InvalidInput("end particles coincide".into()));
    }
    Ok(l)
}

/// `SF = T_fom / T_rom`.
pub fn speedup_factor(t_fom: f64, t_rom: f64) -> Result<f64> {
    if !(t_fom > 0.0) || !(t_rom > 0.0) {
        return Err(Error::InvalidInput(format!(
            "wall times must be positive ({t_fom}, {t_rom})"
        )));
    }
    Ok(t_fom / t_rom)
}

/// Form of the history weights `η_j` in the error recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaForm {
    /// `η_j = (|α_j| − |β_j κ Δt|) / h`.
    Published,
    /// `η_j = (|α_j| + |β_j| κ Δt) / h`, which follows from the triangle inequality.
    #[default]
    Triangle,
}

/// `δⁿ ≤ ‖rⁿ‖ / h + Σ_j η_j δ^{n−j}` with `h = |α₀| − |β₀| κ Δt`.
///
/// `delta0` holds the errors at the `k̆` starting levels, oldest first. The
/// returned vector has one entry per residual norm (steps `1..=N_t`).
pub fn state_error_bound(
    residual_norms: &[f64],
    kappa: f64,
    dt: f64,
    scheme: &MultistepScheme,
    delta0: &[f64],
    form: EtaForm,
) -> Result<Vec<f64>> {
    let k = scheme.steps();
    if scheme.beta.len() != k + 1 || k == 0 {
        return Err(Error::InvalidInput(
            "scheme needs matching alpha/beta of length >= 2".into(),
        ));
    }
    check_len("starting errors", k, delta0.len())?;
    if !(kappa >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need kappa >= 0 and dt > 0 (kappa = {kappa}, dt = {dt})"
        )));
    }
    let h = scheme.alpha[0].abs() - scheme.beta[0].abs() * kappa * dt;
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dt = {dt} violates dt < |α₀| / (|β₀| κ) for kappa = {kappa}"
        )));
    }
    let eta: Vec<f64> = (1..=k)
        .map(|j| {
            let a = scheme.alpha[j].abs();
            let b = (scheme.beta[j] * kappa * dt).abs();
            match form {
                EtaForm::Published => (a - b) / h,
                EtaForm::Triangle => (a + b) / h,
            }
        })
        .collect();
    let mut history: Vec<f64> = delta0.to_vec();
    let mut out = Vec::with_capacity(residual_norms.len());
    for &r in residual_norms {
        let len = history.len();
        let d = r / h + (1..=k).map(|j| eta[j - 1] * history[len - j]).sum::<f64>();
        history.push(d);
        out.push(d);
    }
    Ok(out)
}

/// `‖rⁿ‖₂` of the full-order trapezoidal residual evaluated along an approximate
/// trajectory `x̃¹ .. x̃^{N_t}` that starts from `x0`.
pub fn trajectory_residual_norms<'a>(
    x0: &[f64],
    states: impl IntoIterator<Item = &'a [f64]>,
    sys: &ParticleSystem,
    dt: f64,
) -> Result<Vec<f64>> {
    let mut prev = x0.to_vec();
    let mut f_prev = pairwise_velocity(&prev, sys)?;
    let mut out = Vec::new();
    for x in states {
        let f = pairwise_velocity(x, sys)?;
        let r = trapezoidal_residual(x, &prev, &f_prev, &f, dt)?;
        out.push(r.iter().map(|v| v * v).sum::<f64>().sqrt());
        prev = x.to_vec();
        f_prev = f;
    }
    Ok(out)
}

/// QoI bound: the state bound scaled by the QoI Lipschitz constant.
pub fn qoi_error_bound(state_bounds: &[f64], kappa_g: f64) -> Result<Vec<f64>> {
    if !(kappa_g >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "kappa_g must be >= 0, got {kappa_g}"
        )));
    }
    Ok(state_bounds.iter().map(|d| kappa_g * d).collect())
}

/// Heuristic Lipschitz estimate `max ‖f(x) − f(x̃)‖ / ‖x − x̃‖` over paired states.
pub fn empirical_kappa<'a>(
    fom: impl IntoIterator<Item = &'a [f64]>,
    rom: impl IntoIterator<Item = &'a [f64]>,
    sys: &ParticleSystem,
) -> Result<f64> {
    let mut kappa: f64 = 0.0;
    for (a, b) in fom.into_iter().zip(rom) {
        let dx: f64 = a
            .iter()
            .zip(b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        if dx == 0.0 {
            continue;
        }
        let (fa, fb) = (pairwise_velocity(a, sys)?, pairwise_velocity(b, sys)?);
        let df: f64 = fa
            .iter()
            .zip(&fb)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        kappa = kappa.max(df / dx);
    }
    Ok(kappa)
}

/// Per-step and time-averaged QoI errors of one reduced run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub ae_h: Vec<f64>,
    pub mae_d: Vec<f64>,
    pub mean_ae_h: f64,
    pub mean_mae_d: f64,
    pub sf: Option<f64>,
    pub l: f64,
}

impl ErrorReport {
    /// Compares paired states over steps `1..=N_t`.
    pub fn compute<'a>(
        fom: impl IntoIterator<Item = &'a [f64]>,
        rom: impl IntoIterator<Item = &'a [f64]>,
        sys: &ParticleSystem,
        l: f64,
    ) -> Result<Self> {
        let mut ae_h = Vec::new();
        let mut mae_d = Vec::new();
        for (a, b) in fom.into_iter().zip(rom) {
            ae_h.push(ae_hamiltonian(hamiltonian(a, sys)?, hamiltonian(b, sys)?)?);
            mae_d.push(mae_trajectory(a, b, l)?);
        }
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        Ok(Self {
            mean_ae_h: mean(&ae_h),
            mean_mae_d: mean(&mae_d),
            ae_h,
            mae_d,
            sf: None,
            l,
        })
    }

    pub fn with_speedup(mut self, sf: f64) -> Self {
        self.sf = Some(sf);
        self
    }

    /// One row per step: `step,ae_h,mae_d`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,ae_h,mae_d\n");
        for (k, (a, m)) in self.ae_h.iter().zip(&self.mae_d).enumerate() {
            let _ = writeln!(s, "{},{:e},{:e}", k + 1, a, m);
        }
        s
    }

    /// Summary without per-step series or timing.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "steps": self.ae_h.len(),
            "mean_ae_h": self.mean_ae_h,
            "mean_mae_d": self.mean_mae_d,
            "l": self.l,
        })
    }
}
