use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use lrdpp::data::MIN_BASKET_SIZE;
use lrdpp::evaluation::mean_log_likelihood;
use lrdpp::optimizer::default_t_anneal;
use lrdpp::{parse_baskets, save_model, train_with_monitor, BasketDataset, Error, TrainConfig};

use super::{open, print_config, CliResult};

#[derive(Args)]
pub struct TrainArgs {
    /// Basket file: one basket per line, comma-separated item ids.
    #[arg(long)]
    data: PathBuf,

    /// Where to write the model; the training trace goes to "<out>.trace".
    #[arg(long)]
    out: PathBuf,

    /// Number of latent traits per item.
    #[arg(long, default_value_t = 30)]
    k: usize,

    /// Regularization strength.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// Initial learning rate.
    #[arg(long, default_value_t = 1e-5)]
    epsilon0: f64,

    /// Momentum coefficient.
    #[arg(long, default_value_t = 0.95)]
    beta: f64,

    /// Baskets per gradient step.
    #[arg(long, default_value_t = 1000)]
    batch: usize,

    /// Learning-rate annealing horizon; defaults to ten epochs of batches.
    #[arg(long)]
    t_anneal: Option<f64>,

    /// Relative objective change per epoch that counts as converged.
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,

    /// Hard cap on gradient steps.
    #[arg(long, default_value_t = 10000)]
    max_iters: usize,

    /// Seed for the split, the initialization, and batch shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Fraction of baskets held out to monitor test log-likelihood;
    /// 0 trains on everything.
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,

    /// Standard deviation of the Gaussian initialization.
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
}

pub fn run(args: TrainArgs, threads: usize) -> CliResult {
    let dataset = parse_baskets(open(&args.data)?, MIN_BASKET_SIZE)?;

    if !(args.test_fraction.is_finite() && (0.0..1.0).contains(&args.test_fraction)) {
        return Err(format!(
            "--test-fraction must lie in [0,1), got {}",
            args.test_fraction
        )
        .into());
    }
    let (train_set, test_set): (BasketDataset, Option<BasketDataset>) =
        if args.test_fraction == 0.0 {
            (dataset, None)
        } else {
            let (tr, te) = dataset.split(1.0 - args.test_fraction, args.seed)?;
            (tr, Some(te))
        };

    let config = TrainConfig {
        k: args.k,
        alpha: args.alpha,
        epsilon0: args.epsilon0,
        beta: args.beta,
        batch_size: args.batch,
        delta: args.delta,
        max_iters: args.max_iters,
        t_anneal: args.t_anneal,
        init_scale: args.init_scale,
        seed: args.seed,
        parallel: threads > 1,
    };
    let resolved_t = args
        .t_anneal
        .unwrap_or_else(|| default_t_anneal(train_set.n_baskets(), args.batch));
    print_config(
        "train",
        &[
            ("data", args.data.display().to_string()),
            ("out", args.out.display().to_string()),
            ("k", args.k.to_string()),
            ("alpha", args.alpha.to_string()),
            ("epsilon0", args.epsilon0.to_string()),
            ("beta", args.beta.to_string()),
            ("batch", args.batch.to_string()),
            ("t_anneal", resolved_t.to_string()),
            ("delta", args.delta.to_string()),
            ("max_iters", args.max_iters.to_string()),
            ("seed", args.seed.to_string()),
            ("test_fraction", args.test_fraction.to_string()),
            ("init_scale", args.init_scale.to_string()),
            ("threads", threads.to_string()),
            ("items", train_set.n_items().to_string()),
            ("train_baskets", train_set.n_baskets().to_string()),
            (
                "test_baskets",
                test_set.as_ref().map_or(0, |t| t.n_baskets()).to_string(),
            ),
        ],
    );

    let monitor = |v: &lrdpp::TraitMatrix| {
        test_set
            .as_ref()
            .and_then(|t| mean_log_likelihood(v, t).ok())
            .map(|(mean, _)| mean)
    };
    let (model, trace) = match train_with_monitor(&train_set, &config, monitor) {
        Ok(done) => done,
        Err(Error::BasketTooLarge { k, baskets }) => {
            let largest = baskets.iter().map(|&(_, size)| size).max().unwrap_or(k);
            return Err(format!(
                "{}\nhint: rerun with a larger --k (the largest basket holds {largest} items)",
                Error::BasketTooLarge { k, baskets }
            )
            .into());
        }
        Err(e) => return Err(e.into()),
    };

    save_model(&model, train_set.catalog(), &args.out)?;

    let mut trace_path = args.out.clone().into_os_string();
    trace_path.push(".trace");
    let trace_path = PathBuf::from(trace_path);
    let mut out = std::fs::File::create(&trace_path)?;
    for rec in &trace.records {
        match rec.heldout {
            Some(ll) => writeln!(
                out,
                "epoch {} lr {} objective {} test_ll {ll}",
                rec.epoch, rec.learning_rate, rec.objective
            )?,
            None => writeln!(
                out,
                "epoch {} lr {} objective {}",
                rec.epoch, rec.learning_rate, rec.objective
            )?,
        }
    }

    let last = trace.records.last();
    println!(
        "trained M={} K={} in {} iterations ({})",
        model.n_items(),
        model.rank(),
        trace.iterations_run,
        if trace.converged { "converged" } else { "iteration cap reached" }
    );
    if let Some(rec) = last {
        println!("final objective {}", rec.objective);
        if let Some(ll) = rec.heldout {
            println!("final test log-likelihood {ll}");
        }
    }
    println!("model written to {}", args.out.display());
    println!("trace written to {}", trace_path.display());
    Ok(ExitCode::SUCCESS)
}
