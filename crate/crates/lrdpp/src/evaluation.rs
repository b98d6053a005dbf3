//! Held-one-out basket completion evaluation.
//!
//! Each test basket becomes one instance: a single item, chosen by a seeded
//! draw, is hidden, the model scores every item outside the remaining
//! basket, and the hidden item's position in that ranking drives the
//! metrics. Ranks break ties toward the lower catalog index; the percentile
//! rank deliberately uses the literal >= count, so a scorer that assigns
//! every candidate the same value earns a percentile of 100, not 50.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conditioning;
use crate::data::BasketDataset;
use crate::error::{Error, Result};
use crate::kernel::TraitMatrix;
use crate::likelihood::ZERO_COUNT_EPSILON;

/// One evaluation case: the basket minus one hidden item.
#[derive(Debug, Clone)]
pub struct EvalInstance {
    pub observed: Vec<usize>,
    pub held_out: usize,
}

/// Scores for every candidate item, aligned index-for-index.
#[derive(Debug, Clone)]
pub struct CandidateScores {
    pub candidates: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Anything that can rank candidate items given a partial basket.
pub trait CandidateScorer {
    fn score(&self, instance: &EvalInstance) -> Result<CandidateScores>;
}

impl CandidateScorer for TraitMatrix {
    fn score(&self, instance: &EvalInstance) -> Result<CandidateScores> {
        let scored = conditioning::condition(self, &instance.observed)?
            .next_item_probabilities()?;
        let (candidates, scores) = scored.into_iter().unzip();
        Ok(CandidateScores { candidates, scores })
    }
}

/// Seeded baseline that scores candidates uniformly at random, independently
/// per instance. Stateless: the score is a hash of (seed, observed items,
/// candidate), so repeated calls agree.
#[derive(Debug, Clone)]
pub struct UniformRandomScorer {
    pub seed: u64,
    pub n_items: usize,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl CandidateScorer for UniformRandomScorer {
    fn score(&self, instance: &EvalInstance) -> Result<CandidateScores> {
        let mut in_basket = vec![false; self.n_items];
        for &item in &instance.observed {
            if item >= self.n_items {
                return Err(Error::ItemOutOfRange { item, m: self.n_items });
            }
            in_basket[item] = true;
        }
        let mut obs_hash = splitmix(self.seed ^ instance.observed.len() as u64);
        for &item in &instance.observed {
            obs_hash = splitmix(obs_hash ^ item as u64);
        }
        let mut candidates = Vec::new();
        let mut scores = Vec::new();
        for b in 0..self.n_items {
            if in_basket[b] {
                continue;
            }
            candidates.push(b);
            let bits = splitmix(obs_hash ^ (b as u64).wrapping_mul(0xA24B_AED4_963E_E407));
            scores.push((bits >> 11) as f64 / (1u64 << 53) as f64);
        }
        if candidates.is_empty() {
            return Err(Error::NoCandidates);
        }
        Ok(CandidateScores { candidates, scores })
    }
}

/// Hides one uniformly chosen item per basket. Baskets need at least two
/// items so something remains observed; smaller ones never reach this point
/// through the parser.
pub fn make_instances(dataset: &BasketDataset, seed: u64) -> Vec<EvalInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(dataset.n_baskets());
    for basket in dataset.baskets() {
        if basket.len() < 2 {
            continue;
        }
        let hide = rng.gen_range(0..basket.len());
        let mut observed = basket.items().to_vec();
        let held_out = observed.remove(hide);
        out.push(EvalInstance { observed, held_out });
    }
    out
}

/// Percentile of `held_out` among the candidates:
/// 100 / |C| * #{ j' in C : p(held_out) >= p(j') }.
/// `None` when the held-out item was not scored.
pub fn percentile_rank(scores: &CandidateScores, held_out: usize) -> Option<f64> {
    let pos = scores.candidates.iter().position(|&c| c == held_out)?;
    let p = scores.scores[pos];
    let better_or_equal = scores.scores.iter().filter(|&&q| p >= q).count();
    Some(100.0 * better_or_equal as f64 / scores.candidates.len() as f64)
}

/// 1-based rank of `held_out` when candidates sort by descending score with
/// ties broken toward the lower catalog index.
pub fn rank_of(scores: &CandidateScores, held_out: usize) -> Option<usize> {
    let pos = scores.candidates.iter().position(|&c| c == held_out)?;
    let (p, idx) = (scores.scores[pos], scores.candidates[pos]);
    let ahead = scores
        .candidates
        .iter()
        .zip(&scores.scores)
        .filter(|&(&c, &q)| q > p || (q == p && c < idx))
        .count();
    Some(ahead + 1)
}

/// Aggregated completion metrics.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Mean percentile rank; 50 is chance, 100 is perfect.
    pub mpr: f64,
    /// (k, fraction of instances whose hidden item ranked in the top k).
    pub precision_at: Vec<(usize, f64)>,
    /// Same hits reweighted by inverse held-out popularity.
    pub pop_weighted_precision_at: Vec<(usize, f64)>,
    /// Popularity exponent used for the weighted rows.
    pub beta: f64,
    pub n_instances: usize,
    pub n_skipped: usize,
    /// Why instances were skipped, keyed by the error message.
    pub skip_reasons: BTreeMap<String, usize>,
}

/// Scores every instance and aggregates. Instances the scorer cannot handle
/// (zero-probability observed set, no remaining mass, ...) are skipped and
/// tallied, not fatal. Weights for the popularity-weighted rows are
/// w_t = C(t)^-beta with the held-out item's training count C(t), zero
/// counts replaced by [`ZERO_COUNT_EPSILON`]; beta = 0 reproduces the plain
/// rows exactly.
pub fn evaluate(
    scorer: &impl CandidateScorer,
    instances: &[EvalInstance],
    train_counts: &[usize],
    ks: &[usize],
    beta: f64,
) -> Result<EvalReport> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "popularity exponent must be finite and non-negative, got {beta}"
        )));
    }
    if instances.is_empty() {
        return Err(Error::EmptyInstances);
    }

    let mut skip_reasons: BTreeMap<String, usize> = BTreeMap::new();
    let skip = |reason: String, map: &mut BTreeMap<String, usize>| {
        *map.entry(reason).or_insert(0) += 1;
    };

    let mut pr_sum = 0.0;
    let mut n_scored = 0usize;
    // Per cutoff: plain hit count, weighted hit mass, total weight.
    let mut plain = vec![0.0f64; ks.len()];
    let mut weighted = vec![0.0f64; ks.len()];
    let mut weight_total = 0.0f64;
    let mut plain_total = 0.0f64;

    for instance in instances {
        if instance.held_out >= train_counts.len() {
            return Err(Error::ItemOutOfRange {
                item: instance.held_out,
                m: train_counts.len(),
            });
        }
        let scores = match scorer.score(instance) {
            Ok(s) => s,
            Err(e) => {
                skip(e.to_string(), &mut skip_reasons);
                continue;
            }
        };
        if scores.candidates.len() != scores.scores.len()
            || scores.scores.iter().any(|s| !s.is_finite())
        {
            skip("malformed candidate scores".into(), &mut skip_reasons);
            continue;
        }
        let (pr, rank) = match (
            percentile_rank(&scores, instance.held_out),
            rank_of(&scores, instance.held_out),
        ) {
            (Some(pr), Some(rank)) => (pr, rank),
            _ => {
                skip("held-out item not scored".into(), &mut skip_reasons);
                continue;
            }
        };

        n_scored += 1;
        pr_sum += pr;

        let count = train_counts[instance.held_out];
        let c = if count == 0 { ZERO_COUNT_EPSILON } else { count as f64 };
        let w = c.powf(-beta);
        weight_total += w;
        plain_total += 1.0;
        for (i, &k) in ks.iter().enumerate() {
            if rank <= k {
                plain[i] += 1.0;
                weighted[i] += w;
            }
        }
    }

    if n_scored == 0 {
        return Err(Error::EmptyInstances);
    }
    Ok(EvalReport {
        mpr: pr_sum / n_scored as f64,
        precision_at: ks
            .iter()
            .zip(&plain)
            .map(|(&k, &h)| (k, h / plain_total))
            .collect(),
        pop_weighted_precision_at: ks
            .iter()
            .zip(&weighted)
            .map(|(&k, &h)| (k, h / weight_total))
            .collect(),
        beta,
        n_instances: n_scored,
        n_skipped: instances.len() - n_scored,
        skip_reasons,
    })
}

/// Mean log P(Y) over the dataset's baskets, with the count of baskets the
/// model gives probability zero. Any such basket makes the mean negative
/// infinity; callers that want a finite diagnostic should check the count.
pub fn mean_log_likelihood(v: &TraitMatrix, dataset: &BasketDataset) -> Result<(f64, usize)> {
    if dataset.n_baskets() == 0 {
        return Err(Error::NoBaskets);
    }
    let log_norm = v.log_normalizer();
    let mut acc = 0.0;
    let mut n_zero = 0usize;
    for basket in dataset.baskets() {
        let ld = v.log_det_basket(basket.items())?;
        if ld == f64::NEG_INFINITY {
            n_zero += 1;
        }
        acc += ld - log_norm;
    }
    Ok((acc / dataset.n_baskets() as f64, n_zero))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Basket, ItemCatalog};
    use std::sync::Arc;

    struct Cheat;
    impl CandidateScorer for Cheat {
        fn score(&self, instance: &EvalInstance) -> Result<CandidateScores> {
            // Knows the answer: the hidden item gets the top score.
            let m = 10;
            let candidates: Vec<usize> =
                (0..m).filter(|b| !instance.observed.contains(b)).collect();
            let scores = candidates
                .iter()
                .map(|&c| if c == instance.held_out { 1.0 } else { 0.1 })
                .collect();
            Ok(CandidateScores { candidates, scores })
        }
    }

    struct FailOn(usize);
    impl CandidateScorer for FailOn {
        fn score(&self, instance: &EvalInstance) -> Result<CandidateScores> {
            if instance.held_out == self.0 {
                return Err(Error::NoProbabilityMass);
            }
            Cheat.score(instance)
        }
    }

    fn dataset(baskets: &[&[usize]], m: usize) -> BasketDataset {
        let ids: Vec<String> = (0..m).map(|i| format!("i{i}")).collect();
        let catalog = Arc::new(ItemCatalog::from_ids(ids).unwrap());
        let baskets = baskets.iter().map(|b| Basket::new(b.to_vec())).collect();
        BasketDataset::new(baskets, catalog).unwrap()
    }

    fn scores(candidates: &[usize], scores_: &[f64]) -> CandidateScores {
        CandidateScores { candidates: candidates.to_vec(), scores: scores_.to_vec() }
    }

    #[test]
    fn percentile_rank_counts_greater_or_equal() {
        let s = scores(&[10, 20, 30, 40], &[0.5, 0.2, 0.2, 0.1]);
        assert_eq!(percentile_rank(&s, 10), Some(100.0));
        assert_eq!(percentile_rank(&s, 20), Some(75.0));
        assert_eq!(percentile_rank(&s, 30), Some(75.0));
        assert_eq!(percentile_rank(&s, 40), Some(25.0));
        assert_eq!(percentile_rank(&s, 99), None);
    }

    #[test]
    fn all_ties_score_a_perfect_percentile() {
        let s = scores(&[1, 2, 3], &[0.25, 0.25, 0.25]);
        for c in [1, 2, 3] {
            assert_eq!(percentile_rank(&s, c), Some(100.0));
        }
    }

    #[test]
    fn rank_breaks_ties_by_catalog_index() {
        let s = scores(&[5, 7, 9], &[0.3, 0.5, 0.3]);
        assert_eq!(rank_of(&s, 7), Some(1));
        assert_eq!(rank_of(&s, 5), Some(2));
        assert_eq!(rank_of(&s, 9), Some(3));
        let tied = scores(&[5, 7, 9], &[0.2, 0.2, 0.2]);
        assert_eq!(rank_of(&tied, 5), Some(1));
        assert_eq!(rank_of(&tied, 9), Some(3));
    }

    #[test]
    fn instances_hide_one_item_deterministically() {
        let ds = dataset(&[&[0, 1, 2], &[3, 4], &[5, 6, 7, 8]], 10);
        let a = make_instances(&ds, 42);
        let b = make_instances(&ds, 42);
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.held_out, y.held_out);
            assert_eq!(x.observed, y.observed);
        }
        for (inst, basket) in a.iter().zip(ds.baskets()) {
            let mut rebuilt = inst.observed.clone();
            rebuilt.push(inst.held_out);
            rebuilt.sort_unstable();
            assert_eq!(rebuilt, basket.items());
        }
    }

    #[test]
    fn cheating_scorer_gets_perfect_metrics() {
        let ds = dataset(&[&[0, 1], &[2, 3], &[4, 5], &[6, 7]], 10);
        let instances = make_instances(&ds, 1);
        let report =
            evaluate(&Cheat, &instances, &vec![1usize; 10], &[1, 5], 0.5).unwrap();
        assert_eq!(report.mpr, 100.0);
        assert_eq!(report.precision_at, vec![(1, 1.0), (5, 1.0)]);
        assert_eq!(report.pop_weighted_precision_at, vec![(1, 1.0), (5, 1.0)]);
        assert_eq!(report.n_instances, 4);
        assert_eq!(report.n_skipped, 0);
    }

    #[test]
    fn zero_beta_weighted_precision_is_bitwise_plain() {
        let ds = dataset(&[&[0, 1], &[2, 3], &[4, 5], &[1, 6], &[2, 7]], 10);
        let instances = make_instances(&ds, 9);
        let scorer = UniformRandomScorer { seed: 3, n_items: 10 };
        let counts = [5, 3, 0, 1, 2, 8, 1, 1, 0, 4];
        let report = evaluate(&scorer, &instances, &counts, &[1, 3, 5], 0.0).unwrap();
        for ((k1, p), (k2, pw)) in report
            .precision_at
            .iter()
            .zip(&report.pop_weighted_precision_at)
        {
            assert_eq!(k1, k2);
            assert_eq!(p.to_bits(), pw.to_bits());
        }
    }

    #[test]
    fn popularity_weighting_matches_hand_arithmetic() {
        // Two instances; the cheat scorer hits both at k >= 1, and we verify
        // the weighted average directly for a scorer that misses one.
        struct HitFirst;
        impl CandidateScorer for HitFirst {
            fn score(&self, instance: &EvalInstance) -> Result<CandidateScores> {
                // Hidden item wins only when it is item 1.
                let candidates: Vec<usize> =
                    (0..4).filter(|b| !instance.observed.contains(b)).collect();
                let scores = candidates
                    .iter()
                    .map(|&c| if c == 1 { 0.9 } else { 0.9 - c as f64 / 10.0 })
                    .collect();
                Ok(CandidateScores { candidates, scores })
            }
        }
        let instances = vec![
            EvalInstance { observed: vec![0], held_out: 1 },
            EvalInstance { observed: vec![0], held_out: 2 },
        ];
        // counts: item1 seen once, item2 seen four times.
        let counts = [3, 1, 4, 2];
        let report = evaluate(&HitFirst, &instances, &counts, &[1], 0.5).unwrap();
        assert_eq!(report.precision_at[0].1, 0.5);
        // w1 = 1^-0.5 = 1, w2 = 4^-0.5 = 0.5; hit only on instance 1.
        let want = 1.0 / 1.5;
        assert!((report.pop_weighted_precision_at[0].1 - want).abs() < 1e-15);
    }

    #[test]
    fn zero_count_held_out_items_use_the_epsilon_weight() {
        let instances = vec![
            EvalInstance { observed: vec![0], held_out: 1 },
            EvalInstance { observed: vec![0], held_out: 2 },
        ];
        let counts = [3, 0, 1, 2];
        let report = evaluate(&Cheat, &instances, &counts, &[1], 1.0).unwrap();
        // Both hit; weights 1/0.5 = 2 and 1/1 = 1. Weighted precision is 1.
        assert_eq!(report.pop_weighted_precision_at[0].1, 1.0);
    }

    #[test]
    fn scorer_failures_are_skipped_and_tallied() {
        let instances = vec![
            EvalInstance { observed: vec![0], held_out: 1 },
            EvalInstance { observed: vec![0], held_out: 2 },
            EvalInstance { observed: vec![0], held_out: 3 },
        ];
        let report =
            evaluate(&FailOn(2), &instances, &vec![1; 10], &[1], 0.5).unwrap();
        assert_eq!(report.n_instances, 2);
        assert_eq!(report.n_skipped, 1);
        assert_eq!(report.skip_reasons.len(), 1);
        let (reason, n) = report.skip_reasons.iter().next().unwrap();
        assert_eq!(n, &1);
        assert!(reason.contains("no probability mass"));
    }

    #[test]
    fn fully_failing_evaluation_is_an_error() {
        let instances = vec![EvalInstance { observed: vec![0], held_out: 2 }];
        assert!(matches!(
            evaluate(&FailOn(2), &instances, &vec![1; 10], &[1], 0.5),
            Err(Error::EmptyInstances)
        ));
        let none: Vec<EvalInstance> = vec![];
        assert!(matches!(
            evaluate(&Cheat, &none, &vec![1; 10], &[1], 0.5),
            Err(Error::EmptyInstances)
        ));
    }

    #[test]
    fn trait_matrix_scorer_excludes_observed_items() {
        let v = TraitMatrix::from_vec(
            4,
            2,
            vec![0.9, 0.1, 0.2, 0.8, 0.5, 0.5, 0.3, -0.3],
        )
        .unwrap();
        let instance = EvalInstance { observed: vec![1], held_out: 3 };
        let s = v.score(&instance).unwrap();
        assert_eq!(s.candidates, vec![0, 2, 3]);
        let total: f64 = s.scores.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_log_likelihood_counts_zero_probability_baskets() {
        let v = TraitMatrix::from_vec(
            4,
            2,
            vec![0.9, 0.1, 0.2, 0.8, 0.5, 0.5, 0.3, -0.3],
        )
        .unwrap();
        let ok = dataset(&[&[0, 1], &[2, 3]], 4);
        let (mean, zeros) = mean_log_likelihood(&v, &ok).unwrap();
        let want = (v.dpp_log_prob(&[0, 1]).unwrap() + v.dpp_log_prob(&[2, 3]).unwrap()) / 2.0;
        assert!((mean - want).abs() < 1e-12);
        assert_eq!(zeros, 0);

        // A three-item basket under a rank-2 kernel has probability zero.
        let bad = dataset(&[&[0, 1], &[1, 2, 3]], 4);
        let (mean, zeros) = mean_log_likelihood(&v, &bad).unwrap();
        assert_eq!(mean, f64::NEG_INFINITY);
        assert_eq!(zeros, 1);
    }

    #[test]
    fn random_scorer_is_deterministic_per_instance() {
        let scorer = UniformRandomScorer { seed: 5, n_items: 20 };
        let inst = EvalInstance { observed: vec![2, 9], held_out: 4 };
        let a = scorer.score(&inst).unwrap();
        let b = scorer.score(&inst).unwrap();
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.candidates.len(), 18);
        assert!(a.scores.iter().all(|s| (0.0..1.0).contains(s)));
        // Different observed sets draw different scores.
        let other = EvalInstance { observed: vec![2, 10], held_out: 4 };
        assert_ne!(scorer.score(&other).unwrap().scores, a.scores);
    }
}
