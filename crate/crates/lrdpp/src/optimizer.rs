//! Stochastic gradient ascent on the regularized log-likelihood with
//! Nesterov momentum and a hyperbolically annealed step size.
//!
//! One iteration consumes one mini-batch; an epoch is one shuffled pass over
//! the training baskets. The full objective is evaluated once per epoch, both
//! for the trace and for the relative-change convergence test.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Basket, BasketDataset};
use crate::error::{Error, Result};
use crate::kernel::TraitMatrix;
use crate::likelihood::{self, RegularizationWeights};

/// Training hyperparameters. `Default` gives the settings that work well on
/// retail basket data of a few thousand items.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Number of trait dimensions K.
    pub k: usize,
    /// Regularization strength.
    pub alpha: f64,
    /// Base learning rate.
    pub epsilon0: f64,
    /// Momentum coefficient.
    pub beta: f64,
    /// Baskets per gradient step.
    pub batch_size: usize,
    /// Relative objective change below which an epoch declares convergence.
    pub delta: f64,
    /// Hard cap on gradient steps.
    pub max_iters: usize,
    /// Annealing horizon T; `None` derives ten epochs' worth of steps.
    pub t_anneal: Option<f64>,
    /// Standard deviation of the Gaussian initialization.
    pub init_scale: f64,
    /// Seed for initialization and epoch shuffling.
    pub seed: u64,
    /// Evaluate mini-batch gradients on a thread pool. Results stay
    /// deterministic for a fixed seed but round differently than the
    /// sequential path.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 30,
            alpha: 1.0,
            epsilon0: 1e-5,
            beta: 0.95,
            batch_size: 1000,
            delta: 1e-5,
            max_iters: 10_000,
            t_anneal: None,
            init_scale: 0.1,
            seed: 0,
            parallel: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be finite and non-negative, got {}", self.alpha));
        }
        if !(self.epsilon0.is_finite() && self.epsilon0 > 0.0) {
            return bad(format!("epsilon0 must be positive, got {}", self.epsilon0));
        }
        if !(self.beta.is_finite() && (0.0..=1.0).contains(&self.beta)) {
            return bad(format!("beta must lie in [0,1], got {}", self.beta));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad(format!("delta must be finite and positive, got {}", self.delta));
        }
        if self.max_iters == 0 {
            return bad("max iterations must be at least 1".into());
        }
        if let Some(t) = self.t_anneal {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("annealing horizon must be positive, got {t}"));
            }
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return bad(format!("init scale must be positive, got {}", self.init_scale));
        }
        Ok(())
    }
}

/// Ten epochs' worth of steps, the annealing horizon used when none is given.
pub fn default_t_anneal(n_baskets: usize, batch_size: usize) -> f64 {
    10.0 * (n_baskets as f64 / batch_size as f64).ceil().max(1.0)
}

/// epsilon_t = epsilon_0 / (1 + t / T).
pub fn learning_rate(t: usize, epsilon0: f64, t_anneal: f64) -> f64 {
    epsilon0 / (1.0 + t as f64 / t_anneal)
}

/// One Nesterov update. `grad` must be the gradient at the lookahead point
/// V + beta W. Velocity and position are updated in place:
/// W <- beta W + (1 - beta) lr grad, then V <- V + W.
pub fn nag_step(
    v: &mut Array2<f64>,
    w: &mut Array2<f64>,
    grad: ArrayView2<'_, f64>,
    beta: f64,
    lr: f64,
) {
    w.mapv_inplace(|x| x * beta);
    w.scaled_add((1.0 - beta) * lr, &grad);
    *v += &*w;
}

/// Relative objective change test. Never true when either value is
/// non-finite or the previous objective is exactly zero.
pub fn converged(f_prev: f64, f_curr: f64, delta: f64) -> bool {
    if !f_prev.is_finite() || !f_curr.is_finite() || f_prev == 0.0 {
        return false;
    }
    (f_curr - f_prev).abs() / f_prev.abs() <= delta
}

/// One line of the training trace, written at the end of each epoch.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    /// Total gradient steps taken so far.
    pub iteration: usize,
    /// 1-based epoch number.
    pub epoch: usize,
    /// Step size in effect at the end of the epoch.
    pub learning_rate: f64,
    /// Full-data regularized objective.
    pub objective: f64,
    /// Whatever the monitor returned, typically held-out mean log-likelihood.
    pub heldout: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub converged: bool,
    pub iterations_run: usize,
    /// The annealing horizon actually used.
    pub t_anneal: f64,
}

/// Trains a trait matrix on `dataset`. Equivalent to
/// [`train_with_monitor`] with a monitor that reports nothing.
pub fn train(dataset: &BasketDataset, config: &TrainConfig) -> Result<(TraitMatrix, TrainTrace)> {
    train_with_monitor(dataset, config, |_| None)
}

/// Trains a trait matrix, invoking `monitor` on the current parameters after
/// every epoch; its return value lands in the trace's held-out column.
///
/// Fails up front if any basket exceeds `k` items (such a basket has
/// probability zero under any rank-k kernel, so the likelihood is degenerate
/// from the start) or holds fewer than two (nothing to co-occur). Failures
/// mid-run return the trace collected so far inside the error.
pub fn train_with_monitor(
    dataset: &BasketDataset,
    config: &TrainConfig,
    mut monitor: impl FnMut(&TraitMatrix) -> Option<f64>,
) -> Result<(TraitMatrix, TrainTrace)> {
    config.validate()?;
    let n = dataset.n_baskets();
    if n == 0 {
        return Err(Error::NoBaskets);
    }
    let oversized: Vec<(usize, usize)> = dataset
        .baskets()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.len() > config.k)
        .map(|(i, b)| (i, b.len()))
        .collect();
    if !oversized.is_empty() {
        return Err(Error::BasketTooLarge { k: config.k, baskets: oversized });
    }
    let undersized: Vec<(usize, usize)> = dataset
        .baskets()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.len() < 2)
        .map(|(i, b)| (i, b.len()))
        .collect();
    if !undersized.is_empty() {
        return Err(Error::BasketTooSmall { baskets: undersized });
    }

    let reg = RegularizationWeights::popularity(dataset, config.alpha)?;
    let t_anneal = config
        .t_anneal
        .unwrap_or_else(|| default_t_anneal(n, config.batch_size));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut v = TraitMatrix::random(dataset.n_items(), config.k, config.init_scale, &mut rng)?
        .matrix()
        .clone();
    let mut w = Array2::<f64>::zeros(v.raw_dim());

    let all = dataset.baskets();
    let mut order: Vec<Basket> = all.to_vec();

    let mut records: Vec<TraceRecord> = Vec::new();
    let mut f_prev = likelihood::objective(&TraitMatrix::new(v.clone())?, all, &reg)?;
    let mut t = 0usize;
    let mut epoch = 0usize;
    let mut did_converge = false;

    let abort = |reason: String, records: Vec<TraceRecord>, t: usize| Error::TrainingAborted {
        reason,
        trace: Box::new(TrainTrace {
            records,
            converged: false,
            iterations_run: t,
            t_anneal,
        }),
    };

    'training: while t < config.max_iters {
        epoch += 1;
        order.shuffle(&mut rng);

        for chunk in order.chunks(config.batch_size) {
            if t >= config.max_iters {
                break;
            }
            t += 1;
            let lr = learning_rate(t, config.epsilon0, t_anneal);

            let lookahead = {
                let mut ahead = v.clone();
                ahead.scaled_add(config.beta, &w);
                match TraitMatrix::new(ahead) {
                    Ok(tm) => tm,
                    Err(e) => {
                        return Err(abort(format!("lookahead parameters: {e}"), records, t))
                    }
                }
            };
            let grad = match likelihood::gradient(&lookahead, chunk, n, &reg, config.parallel) {
                Ok(g) => g,
                Err(e) => return Err(abort(format!("gradient: {e}"), records, t)),
            };
            if grad.iter().any(|x| !x.is_finite()) {
                let e = Error::NonFiniteGradient { iteration: t };
                return Err(abort(e.to_string(), records, t));
            }
            nag_step(&mut v, &mut w, grad.view(), config.beta, lr);
        }

        let current = match TraitMatrix::new(v.clone()) {
            Ok(tm) => tm,
            Err(e) => return Err(abort(format!("parameters: {e}"), records, t)),
        };
        let f_curr = match likelihood::objective(&current, all, &reg) {
            Ok(f) => f,
            Err(e) => return Err(abort(format!("objective: {e}"), records, t)),
        };
        records.push(TraceRecord {
            iteration: t,
            epoch,
            learning_rate: learning_rate(t, config.epsilon0, t_anneal),
            objective: f_curr,
            heldout: monitor(&current),
        });
        if !f_curr.is_finite() {
            return Err(abort(
                format!("objective became non-finite ({f_curr}) at epoch {epoch}"),
                records,
                t,
            ));
        }
        if converged(f_prev, f_curr, config.delta) {
            did_converge = true;
            break 'training;
        }
        f_prev = f_curr;
    }

    let trace = TrainTrace {
        records,
        converged: did_converge,
        iterations_run: t,
        t_anneal,
    };
    Ok((TraitMatrix::new(v)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ItemCatalog;
    use ndarray::array;
    use std::sync::Arc;

    fn tiny_dataset() -> BasketDataset {
        let ids: Vec<String> = (0..6).map(|i| format!("item{i}")).collect();
        let catalog = Arc::new(ItemCatalog::from_ids(ids).unwrap());
        let baskets = vec![
            Basket::new(vec![0, 1]),
            Basket::new(vec![0, 2]),
            Basket::new(vec![1, 2]),
            Basket::new(vec![3, 4]),
            Basket::new(vec![3, 5]),
            Basket::new(vec![4, 5]),
            Basket::new(vec![0, 1, 2]),
            Basket::new(vec![3, 4, 5]),
        ];
        BasketDataset::new(baskets, catalog).unwrap()
    }

    fn fast_config() -> TrainConfig {
        TrainConfig {
            k: 3,
            alpha: 0.5,
            epsilon0: 5e-3,
            batch_size: 4,
            delta: 1e-300,
            max_iters: 60,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learning_rate_anneals_hyperbolically() {
        assert_eq!(learning_rate(0, 1e-5, 100.0), 1e-5);
        assert!((learning_rate(100, 1e-5, 100.0) - 5e-6).abs() < 1e-20);
        assert!((learning_rate(300, 1e-5, 100.0) - 2.5e-6).abs() < 1e-20);
    }

    #[test]
    fn default_horizon_is_ten_epochs() {
        assert_eq!(default_t_anneal(1000, 100), 100.0);
        assert_eq!(default_t_anneal(1001, 100), 110.0);
        assert_eq!(default_t_anneal(5, 100), 10.0);
    }

    #[test]
    fn convergence_test_guards_degenerate_values() {
        assert!(converged(-10.0, -10.0 + 1e-7, 1e-5));
        assert!(!converged(-10.0, -10.5, 1e-5));
        assert!(!converged(0.0, 0.0, 1e-5));
        assert!(!converged(f64::NEG_INFINITY, -1.0, 1e-5));
        assert!(!converged(-1.0, f64::NAN, 1e-5));
        assert!(converged(-2.0, -2.0, 0.0));
    }

    #[test]
    fn nag_step_accumulates_momentum() {
        let mut v = array![[1.0, 0.0]];
        let mut w = array![[0.0, 0.0]];
        let g = array![[2.0, -4.0]];
        nag_step(&mut v, &mut w, g.view(), 0.5, 0.1);
        // W = 0.5*0 + 0.5*0.1*g = 0.05 g
        assert!((w[[0, 0]] - 0.1).abs() < 1e-15);
        assert!((v[[0, 0]] - 1.1).abs() < 1e-15);
        nag_step(&mut v, &mut w, g.view(), 0.5, 0.1);
        // W = 0.5*0.1 + 0.05*2 = 0.15
        assert!((w[[0, 0]] - 0.15).abs() < 1e-15);
        assert!((v[[0, 0]] - 1.25).abs() < 1e-15);
        assert!((v[[0, 1]] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_momentum_ignores_the_gradient() {
        let mut v = array![[1.0, 2.0]];
        let mut w = array![[0.25, -0.5]];
        let g = array![[100.0, 100.0]];
        nag_step(&mut v, &mut w, g.view(), 1.0, 0.1);
        assert_eq!(w, array![[0.25, -0.5]]);
        assert_eq!(v, array![[1.25, 1.5]]);
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let base = TrainConfig::default();
        let cases = [
            TrainConfig { k: 0, ..base.clone() },
            TrainConfig { alpha: -1.0, ..base.clone() },
            TrainConfig { epsilon0: 0.0, ..base.clone() },
            TrainConfig { beta: 1.5, ..base.clone() },
            TrainConfig { beta: -0.1, ..base.clone() },
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig { delta: f64::NAN, ..base.clone() },
            TrainConfig { delta: 0.0, ..base.clone() },
            TrainConfig { max_iters: 0, ..base.clone() },
            TrainConfig { t_anneal: Some(0.0), ..base.clone() },
            TrainConfig { init_scale: 0.0, ..base.clone() },
        ];
        for cfg in cases {
            assert!(matches!(
                train(&tiny_dataset(), &cfg),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn oversized_baskets_are_rejected_up_front() {
        let cfg = TrainConfig { k: 2, ..fast_config() };
        match train(&tiny_dataset(), &cfg) {
            Err(Error::BasketTooLarge { k, baskets }) => {
                assert_eq!(k, 2);
                assert_eq!(baskets, vec![(6, 3), (7, 3)]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undersized_baskets_are_rejected_up_front() {
        let catalog = Arc::new(
            ItemCatalog::from_ids(vec!["a".into(), "b".into(), "c".into()]).unwrap(),
        );
        let baskets = vec![Basket::new(vec![0, 1]), Basket::new(vec![2])];
        let ds = BasketDataset::new(baskets, catalog).unwrap();
        match train(&ds, &fast_config()) {
            Err(Error::BasketTooSmall { baskets }) => assert_eq!(baskets, vec![(1, 1)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn training_improves_the_objective_and_is_deterministic() {
        let ds = tiny_dataset();
        let cfg = fast_config();
        let (v1, trace1) = train(&ds, &cfg).unwrap();
        let (v2, trace2) = train(&ds, &cfg).unwrap();

        assert_eq!(v1.matrix(), v2.matrix());
        assert_eq!(trace1.records.len(), trace2.records.len());
        assert!(trace1.iterations_run <= cfg.max_iters);

        let first = trace1.records.first().unwrap().objective;
        let last = trace1.records.last().unwrap().objective;
        assert!(last > first, "objective went from {first} to {last}");

        let (v3, _) = train(&ds, &TrainConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(v1.matrix(), v3.matrix());
    }

    #[test]
    fn loose_delta_converges_immediately() {
        let ds = tiny_dataset();
        let cfg = TrainConfig { delta: 10.0, max_iters: 1000, ..fast_config() };
        let (_, trace) = train(&ds, &cfg).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].epoch, 1);
        // 8 baskets, batch 4: one epoch is 2 steps.
        assert_eq!(trace.iterations_run, 2);
    }

    #[test]
    fn iteration_cap_stops_mid_epoch() {
        let ds = tiny_dataset();
        let cfg = TrainConfig { max_iters: 3, ..fast_config() };
        let (_, trace) = train(&ds, &cfg).unwrap();
        assert!(!trace.converged);
        assert_eq!(trace.iterations_run, 3);
        let last = trace.records.last().unwrap();
        assert_eq!(last.epoch, 2);
        assert_eq!(last.iteration, 3);
    }

    #[test]
    fn monitor_runs_once_per_epoch() {
        let ds = tiny_dataset();
        let cfg = TrainConfig { max_iters: 6, ..fast_config() };
        let mut calls = 0usize;
        let (_, trace) = train_with_monitor(&ds, &cfg, |tm| {
            calls += 1;
            assert_eq!(tm.n_items(), 6);
            Some(calls as f64)
        })
        .unwrap();
        assert_eq!(calls, trace.records.len());
        for (i, rec) in trace.records.iter().enumerate() {
            assert_eq!(rec.heldout, Some((i + 1) as f64));
            assert_eq!(rec.epoch, i + 1);
        }
        // 6 steps at 2 per epoch.
        assert_eq!(trace.records.len(), 3);
    }

    #[test]
    fn trace_reports_the_resolved_horizon() {
        let ds = tiny_dataset();
        let (_, trace) = train(&ds, &TrainConfig { max_iters: 2, ..fast_config() }).unwrap();
        // 8 baskets at batch 4 is 2 steps per epoch, times ten.
        assert_eq!(trace.t_anneal, 20.0);
        let cfg = TrainConfig { t_anneal: Some(7.5), max_iters: 2, ..fast_config() };
        let (_, trace) = train(&ds, &cfg).unwrap();
        assert_eq!(trace.t_anneal, 7.5);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let catalog = Arc::new(ItemCatalog::from_ids(vec!["a".into()]).unwrap());
        let ds = BasketDataset::new(vec![], catalog).unwrap();
        assert!(matches!(
            train(&ds, &TrainConfig::default()),
            Err(Error::NoBaskets)
        ));
    }
}
