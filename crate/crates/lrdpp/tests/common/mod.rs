//! Synthetic baskets drawn from a planted low-rank model by exhaustive
//! enumeration, so end-to-end tests learn from data with known structure.

use std::sync::Arc;

use lrdpp::data::{Basket, BasketDataset, ItemCatalog};
use lrdpp::kernel::TraitMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn planted_model(m: usize, k: usize, seed: u64) -> TraitMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TraitMatrix::random(m, k, 0.9, &mut rng).unwrap()
}

/// Every basket of size 2..=K weighted by det L_Y, sampled with replacement.
/// Exhaustive by design; keep the catalog tiny.
pub fn sample_baskets(v: &TraitMatrix, n: usize, seed: u64) -> Vec<Basket> {
    let m = v.n_items();
    assert!(m <= 16, "enumeration sampler is for tiny catalogs");
    let mut support: Vec<(Vec<usize>, f64)> = Vec::new();
    for mask in 0u32..(1 << m) {
        let size = mask.count_ones() as usize;
        if size < 2 || size > v.rank() {
            continue;
        }
        let items: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let w = v.log_det_basket(&items).unwrap().exp();
        if w > 0.0 {
            support.push((items, w));
        }
    }
    let total: f64 = support.iter().map(|(_, w)| w).sum();
    assert!(total > 0.0, "planted model has no basket mass");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut target = rng.gen::<f64>() * total;
            for (items, w) in &support {
                target -= w;
                if target <= 0.0 {
                    return Basket::new(items.clone());
                }
            }
            Basket::new(support.last().unwrap().0.clone())
        })
        .collect()
}

pub fn synthetic_dataset(v: &TraitMatrix, n: usize, seed: u64) -> BasketDataset {
    let ids = (0..v.n_items()).map(|i| format!("item{i:02}")).collect();
    let catalog = Arc::new(ItemCatalog::from_ids(ids).unwrap());
    BasketDataset::new(sample_baskets(v, n, seed), catalog).unwrap()
}
