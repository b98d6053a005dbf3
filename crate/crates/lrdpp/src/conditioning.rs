//! Conditioning the kernel on an observed partial basket.
//!
//! Given observed items A, the conditioned kernel over the remaining items is
//! L^A = V^A (V^A)^T with V^A = V_comp Z^A, where Z^A projects trait rows
//! onto the orthogonal complement of span{v_a : a in A}. Everything stays in
//! K-dimensional trait space; the M x M conditioned kernel never exists.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kernel::TraitMatrix;
use crate::linalg::PivotedCholesky;

/// Z^A = I_K - V_A^T (V_A V_A^T)^{-1} V_A, the projector onto the subspace
/// orthogonal to the observed items' trait rows. Idempotent and symmetric.
///
/// A singular V_A V_A^T (including |A| > K) means the observed basket itself
/// has probability zero, so there is nothing to condition on.
pub fn complement_projection(v: &TraitMatrix, observed: &[usize]) -> Result<Array2<f64>> {
    let k = v.rank();
    let mut obs = observed.to_vec();
    obs.sort_unstable();
    obs.dedup();

    if obs.is_empty() {
        return Ok(Array2::eye(k));
    }
    if obs.len() > k {
        return Err(Error::ZeroProbabilityBasket);
    }
    let rows = v.rows(&obs)?;
    let gram = rows.dot(&rows.t());
    let solved = PivotedCholesky::decompose(gram.view())
        .solve(rows.view())
        .ok_or(Error::ZeroProbabilityBasket)?;

    if obs.len() == k {
        // K independent observed rows span all of trait space, so the
        // orthogonal complement is exactly zero; skip the noisy subtraction.
        return Ok(Array2::zeros((k, k)));
    }
    let mut z = Array2::<f64>::eye(k) - rows.t().dot(&solved);
    // Symmetric in exact arithmetic; scrub rounding drift.
    z = (&z + &z.t()) * 0.5;
    Ok(z)
}

/// The kernel conditioned on a set of observed items, restricted to the rest
/// of the catalog.
#[derive(Debug, Clone)]
pub struct ConditionedModel {
    /// Projected trait rows, one per candidate, in `candidates` order.
    v_cond: Array2<f64>,
    /// Original catalog indices of the remaining items, ascending.
    candidates: Vec<usize>,
    /// The observed items, sorted and deduplicated.
    observed: Vec<usize>,
    /// Trace of the conditioned kernel: sum of squared projected row norms.
    normalizer_e1: f64,
}

/// Projects every unobserved item's trait row with Z^A.
pub fn condition(v: &TraitMatrix, observed: &[usize]) -> Result<ConditionedModel> {
    let z = complement_projection(v, observed)?;
    let mut obs = observed.to_vec();
    obs.sort_unstable();
    obs.dedup();

    let mut in_a = vec![false; v.n_items()];
    for &item in &obs {
        in_a[item] = true;
    }
    let candidates: Vec<usize> = (0..v.n_items()).filter(|&i| !in_a[i]).collect();
    let v_cond = v.rows(&candidates)?.dot(&z);
    let norms: Vec<f64> = v_cond
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|x| x * x).sum())
        .collect();
    let normalizer_e1 = elementary_symmetric(&norms, 1);
    Ok(ConditionedModel { v_cond, candidates, observed: obs, normalizer_e1 })
}

impl ConditionedModel {
    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    /// Projected trait rows, aligned with `candidates`.
    pub fn traits(&self) -> &Array2<f64> {
        &self.v_cond
    }

    /// First elementary symmetric polynomial of the squared projected norms,
    /// cached at construction. Equals the trace of the conditioned kernel.
    pub fn normalizer_e1(&self) -> f64 {
        self.normalizer_e1
    }

    /// P(next item is b | basket contains the observed items and exactly one
    /// more): squared projected norm over their sum. The normalizer is the
    /// first elementary symmetric polynomial of the squared norms, i.e. the
    /// trace of the conditioned kernel; no eigendecomposition happens.
    pub fn next_item_probabilities(&self) -> Result<Vec<(usize, f64)>> {
        if self.candidates.is_empty() {
            return Err(Error::NoCandidates);
        }
        let norms: Vec<f64> = self
            .v_cond
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|x| x * x).sum())
            .collect();
        let e1 = self.normalizer_e1;
        if !(e1 > 0.0) {
            return Err(Error::NoProbabilityMass);
        }
        Ok(self
            .candidates
            .iter()
            .zip(norms)
            .map(|(&b, n)| (b, n / e1))
            .collect())
    }
}

/// e_k(xs), the sum over all k-element subsets of the product of their
/// entries, by the standard one-pass recurrence. e_0 = 1; k beyond the
/// number of entries gives 0.
pub fn elementary_symmetric(xs: &[f64], k: usize) -> f64 {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &x in xs {
        for j in (1..=k).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e[k]
}

/// Conditions on `observed` and returns the `top_n` most likely next items,
/// highest probability first. Equal probabilities order by catalog index.
pub fn complete_basket(
    v: &TraitMatrix,
    observed: &[usize],
    top_n: usize,
) -> Result<Vec<(usize, f64)>> {
    let mut scored = condition(v, observed)?.next_item_probabilities()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(top_n);
    Ok(scored)
}
