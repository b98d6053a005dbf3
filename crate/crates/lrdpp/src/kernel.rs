//! Low-rank kernel L = V V^T and the subset probabilities it induces.
//!
//! V is M x K with one row per catalog item. All determinant work happens on
//! K x K or |Y| x |Y| Gram matrices, so nothing here materializes the M x M
//! kernel.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::PivotedCholesky;

/// Item trait matrix. Entries are validated finite at construction, so the
/// probability routines never see NaN or infinity in V itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitMatrix {
    v: Array2<f64>,
}

impl TraitMatrix {
    pub fn new(v: Array2<f64>) -> Result<Self> {
        if v.nrows() == 0 || v.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: format!("trait matrix must be non-empty, got {}x{}", v.nrows(), v.ncols()),
            });
        }
        if let Some((idx, _)) = v.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("trait matrix entry ({},{})", idx.0, idx.1),
            });
        }
        Ok(TraitMatrix { v })
    }

    pub fn from_vec(m: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        let v = Array2::from_shape_vec((m, k), values).map_err(|e| Error::DimensionMismatch {
            context: format!("{m}x{k} trait matrix: {e}"),
        })?;
        TraitMatrix::new(v)
    }

    /// Gaussian N(0, scale^2) initialization.
    pub fn random(m: usize, k: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidConfig(format!("init scale must be positive, got {scale}")));
        }
        let normal = Normal::new(0.0, scale).expect("scale validated above");
        let v = Array2::from_shape_fn((m, k), |_| normal.sample(rng));
        TraitMatrix::new(v)
    }

    pub fn n_items(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.v
    }

    /// Gathers the rows for `items` into a dense |items| x K block.
    pub(crate) fn rows(&self, items: &[usize]) -> Result<Array2<f64>> {
        for &item in items {
            if item >= self.n_items() {
                return Err(Error::ItemOutOfRange { item, m: self.n_items() });
            }
        }
        Ok(self.v.select(Axis(0), items))
    }

    /// log det L_Y for the submatrix indexed by `items`.
    ///
    /// Subsets larger than K, and any other rank-deficient Gram, come back as
    /// negative infinity (probability zero), not an error. The empty subset
    /// has determinant one.
    pub fn log_det_basket(&self, items: &[usize]) -> Result<f64> {
        if items.is_empty() {
            return Ok(0.0);
        }
        if items.len() > self.rank() {
            // L_Y = V_Y V_Y^T has rank at most K.
            for &item in items {
                if item >= self.n_items() {
                    return Err(Error::ItemOutOfRange { item, m: self.n_items() });
                }
            }
            return Ok(f64::NEG_INFINITY);
        }
        let rows = self.rows(items)?;
        let gram = rows.dot(&rows.t());
        Ok(PivotedCholesky::decompose(gram.view())
            .log_det()
            .unwrap_or(f64::NEG_INFINITY))
    }

    /// log det(L + I_M), computed as log det(I_K + V^T V).
    ///
    /// That matrix dominates the identity, so the factorization can only fail
    /// through floating-point overflow; the result is +infinity in that case.
    pub fn log_normalizer(&self) -> f64 {
        let k = self.rank();
        let mut a = self.v.t().dot(&self.v);
        for i in 0..k {
            a[[i, i]] += 1.0;
        }
        PivotedCholesky::decompose(a.view())
            .log_det()
            .unwrap_or(f64::INFINITY)
    }

    /// log P(Y) = log det L_Y - log det(L + I).
    pub fn dpp_log_prob(&self, items: &[usize]) -> Result<f64> {
        Ok(self.log_det_basket(items)? - self.log_normalizer())
    }
}
