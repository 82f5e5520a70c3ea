//! Greedy selection of sample particles from a residual basis.
//!
//! Each iteration fits the next group of basis vectors on the dofs sampled so
//! far and picks the particles where that fit is worst. A particle `l` owns
//! the two dofs `l` and `l + N`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::lstsq;

/// Sorted ids of `n_target` particles, including every id in `preseed`.
pub fn greedy_sample(
    phi_r: &DMatrix<f64>,
    n_target: usize,
    preseed: &[usize],
) -> Result<Vec<usize>> {
    let nd = phi_r.nrows();
    if !nd.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "residual basis has odd row count {nd}"
        )));
    }
    let n = nd / 2;
    let m_r = phi_r.ncols();
    if n_target > n {
        return Err(Error::InvalidInput(format!(
            "cannot sample {n_target} of {n} particles"
        )));
    }
    let mut sampled = vec![false; n];
    let mut chosen: Vec<usize> = Vec::with_capacity(n_target);
    for &p in preseed {
        if p >= n {
            return Err(Error::InvalidInput(format!(
                "preseed id {p} out of range (N = {n})"
            )));
        }
        if !sampled[p] {
            sampled[p] = true;
            chosen.push(p);
        }
    }
    if chosen.len() > n_target {
        return Err(Error::InvalidInput(format!(
            "{} preseeded particles exceed the target of {n_target}",
            chosen.len()
        )));
    }
    let n_a = n_target - chosen.len();
    if n_a == 0 || m_r == 0 {
        chosen.sort_unstable();
        return Ok(chosen);
    }
    let n_c = m_r.min(2 * n_target);
    let n_it = n_c.min(n_a);
    let (n_ci_min, n_ci_rem) = (n_c / n_it, n_c % n_it);
    let (n_ai_min, n_ai_rem) = (n_a / n_it, n_a % n_it);

    let mut n_b = 0usize;
    for it in 1..=n_it {
        let n_ci = n_ci_min + usize::from(it <= n_ci_rem);
        let n_ai = n_ai_min + usize::from(it <= n_ai_rem);
        let working = working_vectors(phi_r, &chosen, n, n_b, n_ci)?;
        for _ in 0..n_ai {
            let mut best: Option<(usize, f64)> = None;
            for l in 0..n {
                if sampled[l] {
                    continue;
                }
                let score: f64 = working
                    .column_iter()
                    .map(|r| r[l] * r[l] + r[l + n] * r[l + n])
                    .sum();
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((l, score));
                }
            }
            let (l, _) = best.expect("fewer sampled particles than N");
            sampled[l] = true;
            chosen.push(l);
        }
        n_b += n_ci;
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Columns `n_b .. n_b + n_ci` of `Φ_r`, minus their least-squares fit by the
/// first `n_b` columns on the dofs of the already chosen particles.
fn working_vectors(
    phi_r: &DMatrix<f64>,
    chosen: &[usize],
    n: usize,
    n_b: usize,
    n_ci: usize,
) -> Result<DMatrix<f64>> {
    let targets = phi_r.columns(n_b, n_ci).into_owned();
    if n_b == 0 || chosen.is_empty() {
        return Ok(targets);
    }
    let rows: Vec<usize> = chosen
        .iter()
        .copied()
        .chain(chosen.iter().map(|&l| l + n))
        .collect();
    let basis = phi_r.columns(0, n_b);
    let sampled_basis = DMatrix::from_fn(rows.len(), n_b, |r, c| basis[(rows[r], c)]);
    let mut out = targets.clone();
    for q in 0..n_ci {
        let rhs = DVector::from_fn(rows.len(), |r, _| targets[(rows[r], q)]);
        let alpha = lstsq(&sampled_basis, &rhs)?.x;
        let fit = basis * alpha;
        let mut col = out.column_mut(q);
        col -= fit;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_concentrated_column_picks_its_particle() {
        let mut phi = DMatrix::zeros(10, 1);
        phi[(3, 0)] = 0.6;
        phi[(8, 0)] = 0.8;
        assert_eq!(greedy_sample(&phi, 1, &[]).unwrap(), vec![3]);
    }

    #[test]
    fn preseed_alone_satisfies_target() {
        let phi = DMatrix::from_element(8, 2, 0.5);
        assert_eq!(greedy_sample(&phi, 1, &[1]).unwrap(), vec![1]);
        assert!(greedy_sample(&phi, 5, &[]).is_err());
    }

    #[test]
    fn returns_exactly_n_target_sorted() {
        let phi = DMatrix::from_fn(40, 3, |r, c| ((r * 13 + c * 7) % 11) as f64 - 5.0);
        let ids = greedy_sample(&phi, 9, &[0]).unwrap();
        assert_eq!(ids.len(), 9);
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        assert!(ids.contains(&0));
    }
}
