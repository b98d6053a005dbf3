//! Regularized log-likelihood of a basket collection and its gradient.
//!
//! f(V) = sum_n log det L_[n]  -  N log det(L + I)  -  (alpha/2) sum_i lambda_i ||v_i||^2
//!
//! lambda_i is inverse item popularity, so rarely-seen items are pulled
//! toward zero harder than well-estimated ones. A mini-batch gradient scales
//! the data term by N_total / |batch|, which keeps it an unbiased estimate of
//! the full gradient; normalizer and regularizer terms always enter at full
//! strength.

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::{Basket, BasketDataset};
use crate::error::{Error, Result};
use crate::kernel::TraitMatrix;
use crate::linalg::PivotedCholesky;

/// Stand-in occurrence count for items never seen in training, so their
/// regularization weight stays finite (and maximal).
pub const ZERO_COUNT_EPSILON: f64 = 0.5;

/// Baskets per parallel work unit. Fixed so the reduction order, and hence
/// the floating-point result, does not depend on the thread count.
const PAR_CHUNK: usize = 64;

/// Per-item regularization weights lambda_i plus the global strength alpha.
#[derive(Debug, Clone)]
pub struct RegularizationWeights {
    alpha: f64,
    lambda: Vec<f64>,
}

impl RegularizationWeights {
    /// lambda_i = 1 / C(i), with C(i) = [`ZERO_COUNT_EPSILON`] for items
    /// that never occur.
    pub fn from_counts(counts: &[usize], alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "regularization strength must be finite and non-negative, got {alpha}"
            )));
        }
        let lambda = counts
            .iter()
            .map(|&c| if c == 0 { 1.0 / ZERO_COUNT_EPSILON } else { 1.0 / c as f64 })
            .collect();
        Ok(RegularizationWeights { alpha, lambda })
    }

    pub fn popularity(dataset: &BasketDataset, alpha: f64) -> Result<Self> {
        Self::from_counts(dataset.counts(), alpha)
    }

    /// No regularization at all.
    pub fn none(m: usize) -> Self {
        RegularizationWeights { alpha: 0.0, lambda: vec![1.0; m] }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    fn penalty(&self, v: &TraitMatrix) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (i, row) in v.matrix().rows().into_iter().enumerate() {
            let norm_sq: f64 = row.iter().map(|x| x * x).sum();
            acc += self.lambda[i] * norm_sq;
        }
        0.5 * self.alpha * acc
    }

    fn check_len(&self, m: usize) -> Result<()> {
        if self.lambda.len() != m {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} regularization weights for {} items",
                    self.lambda.len(),
                    m
                ),
            });
        }
        Ok(())
    }
}

/// Full regularized log-likelihood. A basket with a singular Gram matrix has
/// probability zero, so the objective is negative infinity rather than an
/// error; only structural problems (bad indices, mismatched weights) fail.
pub fn objective(v: &TraitMatrix, baskets: &[Basket], reg: &RegularizationWeights) -> Result<f64> {
    reg.check_len(v.n_items())?;
    let mut data = 0.0;
    for basket in baskets {
        let ld = v.log_det_basket(basket.items())?;
        if ld == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        data += ld;
    }
    Ok(data - baskets.len() as f64 * v.log_normalizer() - reg.penalty(v))
}

/// Gradient of [`objective`] evaluated on a mini-batch.
///
/// `n_total` is the size of the full training set the batch was drawn from.
/// An empty batch contributes a zero data term. A basket whose Gram matrix is
/// singular makes the gradient undefined and is reported as an error naming
/// the basket.
pub fn gradient(
    v: &TraitMatrix,
    batch: &[Basket],
    n_total: usize,
    reg: &RegularizationWeights,
    parallel: bool,
) -> Result<Array2<f64>> {
    let (m, k) = (v.n_items(), v.rank());
    reg.check_len(m)?;

    let mut grad = Array2::<f64>::zeros((m, k));

    if !batch.is_empty() {
        let data = if parallel {
            let partials: Vec<Array2<f64>> = batch
                .par_chunks(PAR_CHUNK)
                .enumerate()
                .map(|(ci, chunk)| data_term(v, chunk, ci * PAR_CHUNK))
                .collect::<Result<_>>()?;
            // Summed in chunk order: same answer no matter the thread count.
            let mut acc = Array2::<f64>::zeros((m, k));
            for p in partials {
                acc += &p;
            }
            acc
        } else {
            data_term(v, batch, 0)?
        };
        let scale = n_total as f64 / batch.len() as f64;
        grad.scaled_add(scale, &data);
    }

    // d/dV [-N log det(I_K + V^T V)] = -2N V (I_K + V^T V)^{-1}
    let mut a = v.matrix().t().dot(v.matrix());
    for i in 0..k {
        a[[i, i]] += 1.0;
    }
    let solved = PivotedCholesky::decompose(a.view())
        .solve(v.matrix().t())
        .ok_or_else(|| Error::NonFinite {
            context: "I + V^T V factorization (overflow)".into(),
        })?;
    grad.scaled_add(-2.0 * n_total as f64, &solved.t());

    if reg.alpha() > 0.0 {
        for (i, mut row) in grad.rows_mut().into_iter().enumerate() {
            let pull = reg.alpha * reg.lambda[i];
            row.scaled_add(-pull, &v.matrix().row(i));
        }
    }
    Ok(grad)
}

/// Unscaled data term: sum over baskets of 2 (L_[n])^{-1} V_[n], scattered
/// back into the basket's rows.
fn data_term(v: &TraitMatrix, baskets: &[Basket], offset: usize) -> Result<Array2<f64>> {
    let mut acc = Array2::<f64>::zeros((v.n_items(), v.rank()));
    for (pos, basket) in baskets.iter().enumerate() {
        let rows = v.rows(basket.items())?;
        let gram = rows.dot(&rows.t());
        let solved = PivotedCholesky::decompose(gram.view())
            .solve(rows.view())
            .ok_or_else(|| Error::SingularBasketGram {
                items: basket.items().to_vec(),
                position: offset + pos,
            })?;
        for (r, &item) in basket.items().iter().enumerate() {
            acc.row_mut(item).scaled_add(2.0, &solved.row(r));
        }
    }
    Ok(acc)
}
