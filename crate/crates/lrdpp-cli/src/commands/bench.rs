use std::hint::black_box;
use std::process::ExitCode;
use std::time::Instant;

use clap::Args;
use lrdpp::conditioning::condition;
use lrdpp::kernel::TraitMatrix;
use lrdpp::oracle::DenseKernel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{print_config, CliResult};

#[derive(Args)]
pub struct BenchArgs {
    /// Catalog sizes to measure.
    #[arg(long, value_delimiter = ',', default_value = "100,500,1000,2000")]
    m_values: Vec<usize>,

    /// Latent traits per item.
    #[arg(long, default_value_t = 15)]
    k: usize,

    /// Observed basket size per prediction.
    #[arg(long, default_value_t = 3)]
    basket_size: usize,

    /// Predictions averaged per row.
    #[arg(long, default_value_t = 3)]
    trials: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run(args: BenchArgs, threads: usize) -> CliResult {
    if args.trials == 0 {
        return Err("--trials must be at least 1".into());
    }
    if args.basket_size == 0 || args.basket_size > args.k {
        return Err(format!(
            "--basket-size must lie in 1..=K (K = {}), got {}",
            args.k, args.basket_size
        )
        .into());
    }
    print_config(
        "bench",
        &[
            (
                "m_values",
                args.m_values
                    .iter()
                    .map(|m| m.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("k", args.k.to_string()),
            ("basket_size", args.basket_size.to_string()),
            ("trials", args.trials.to_string()),
            ("seed", args.seed.to_string()),
            ("threads", threads.to_string()),
        ],
    );

    println!(
        "{:>6} {:>6} {:>14} {:>14} {:>9} {:>13} {:>13}",
        "M", "K", "low_rank_ms", "full_rank_ms", "speedup", "model_bytes", "kernel_bytes"
    );
    for &m in &args.m_values {
        if args.basket_size >= m {
            return Err(format!("--basket-size {} needs M > it, got M = {m}", args.basket_size).into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ m as u64);
        let scale = 1.0 / (args.k as f64).sqrt();
        let v = TraitMatrix::random(m, args.k, scale, &mut rng)?;
        // Skips the O(M^3) PSD validation; V V^T is PSD by construction.
        let dense = DenseKernel::from_psd_factor(v.matrix());

        let baskets: Vec<Vec<usize>> = (0..args.trials)
            .map(|_| rand::seq::index::sample(&mut rng, m, args.basket_size).into_vec())
            .collect();

        let started = Instant::now();
        for basket in &baskets {
            black_box(condition(&v, basket)?.next_item_probabilities()?);
        }
        let low_ms = started.elapsed().as_secs_f64() * 1e3 / args.trials as f64;

        let started = Instant::now();
        for basket in &baskets {
            black_box(dense.condition_via_inverse(basket)?.next_item_probabilities()?);
        }
        let full_ms = started.elapsed().as_secs_f64() * 1e3 / args.trials as f64;

        println!(
            "{:>6} {:>6} {:>14.4} {:>14.4} {:>9.1} {:>13} {:>13}",
            m,
            args.k,
            low_ms,
            full_ms,
            full_ms / low_ms,
            m * args.k * 8,
            m * m * 8
        );
    }
    Ok(ExitCode::SUCCESS)
}
