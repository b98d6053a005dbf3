use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Args;
use lrdpp::data::{parse_baskets_with_catalog, MIN_BASKET_SIZE};
use lrdpp::evaluation::mean_log_likelihood;
use lrdpp::{evaluate, load_model, make_instances};

use super::{open, print_config, CliResult};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,

    /// Test baskets; every item id must exist in the model catalog.
    #[arg(long)]
    data: PathBuf,

    /// Precision cutoffs.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20")]
    ks: Vec<usize>,

    /// Popularity exponent for the weighted precision rows.
    #[arg(long, default_value_t = 0.5)]
    beta_pop: f64,

    /// Seed choosing which item each test basket hides.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Training baskets for the popularity counts; without it the weights
    /// fall back to counts from --data.
    #[arg(long)]
    train_data: Option<PathBuf>,
}

pub fn run(args: EvaluateArgs, threads: usize) -> CliResult {
    let (model, catalog) = load_model(&args.model)?;
    let catalog = Arc::new(catalog);
    print_config(
        "evaluate",
        &[
            ("model", args.model.display().to_string()),
            ("data", args.data.display().to_string()),
            (
                "ks",
                args.ks
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("beta_pop", args.beta_pop.to_string()),
            ("seed", args.seed.to_string()),
            (
                "train_data",
                args.train_data
                    .as_ref()
                    .map_or("(none)".into(), |p| p.display().to_string()),
            ),
            ("threads", threads.to_string()),
        ],
    );

    let test = parse_baskets_with_catalog(open(&args.data)?, Arc::clone(&catalog), MIN_BASKET_SIZE)?;
    let counts: Vec<usize> = match &args.train_data {
        Some(path) => {
            parse_baskets_with_catalog(open(path)?, Arc::clone(&catalog), MIN_BASKET_SIZE)?
                .counts()
                .to_vec()
        }
        None => {
            eprintln!(
                "warning: no --train-data given; popularity weights use counts from --data"
            );
            test.counts().to_vec()
        }
    };

    let instances = make_instances(&test, args.seed);
    let report = evaluate(&model, &instances, &counts, &args.ks, args.beta_pop)?;
    let (test_ll, zero_prob) = mean_log_likelihood(&model, &test)?;

    println!("{:<28} {:>4} {:>14}", "metric", "k", "value");
    println!("{:<28} {:>4} {:>14.4}", "mpr", "-", report.mpr);
    for &(k, p) in &report.precision_at {
        println!("{:<28} {:>4} {:>14.6}", "precision@k", k, p);
    }
    for &(k, p) in &report.pop_weighted_precision_at {
        println!("{:<28} {:>4} {:>14.6}", "pop-weighted precision@k", k, p);
    }
    println!("{:<28} {:>4} {:>14.6}", "test log-likelihood", "-", test_ll);
    println!("{:<28} {:>4} {:>14}", "zero-probability baskets", "-", zero_prob);
    println!("{:<28} {:>4} {:>14}", "instances", "-", report.n_instances);
    println!("{:<28} {:>4} {:>14}", "skipped", "-", report.n_skipped);
    for (reason, n) in &report.skip_reasons {
        eprintln!("skipped {n}: {reason}");
    }

    // Machine-readable block: one metric per line as "name k value".
    println!("mpr - {}", report.mpr);
    for &(k, p) in &report.precision_at {
        println!("precision_at {k} {p}");
    }
    for &(k, p) in &report.pop_weighted_precision_at {
        println!("pop_weighted_precision_at {k} {p}");
    }
    println!("test_log_likelihood - {test_ll}");
    println!("n_zero_probability - {zero_prob}");
    println!("n_instances - {}", report.n_instances);
    println!("n_skipped - {}", report.n_skipped);
    Ok(ExitCode::SUCCESS)
}
