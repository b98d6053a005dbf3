use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use lrdpp::{complete_basket, load_model};

use super::{print_config, CliResult};

#[derive(Args)]
pub struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,

    /// Comma-separated item ids already in the basket. Empty ranks the whole
    /// catalog by unconditioned quality.
    #[arg(long, default_value = "")]
    basket: String,

    /// How many completions to print.
    #[arg(long, default_value_t = 10)]
    top: usize,
}

pub fn run(args: PredictArgs, threads: usize) -> CliResult {
    let (model, catalog) = load_model(&args.model)?;
    print_config(
        "predict",
        &[
            ("model", args.model.display().to_string()),
            ("basket", format!("{:?}", args.basket)),
            ("top", args.top.to_string()),
            ("threads", threads.to_string()),
        ],
    );

    let mut observed = Vec::new();
    for token in args.basket.split(',') {
        let token = token.trim();
        if token.is_empty() {
            if args.basket.trim().is_empty() {
                continue; // no --basket at all: condition on nothing
            }
            return Err("empty item id in --basket".into());
        }
        let index = catalog
            .index_of(token)
            .ok_or_else(|| format!("unknown item id {token:?}: not in the model catalog"))?;
        observed.push(index);
    }
    let mut distinct = observed.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() == catalog.len() {
        return Err(lrdpp::Error::NoCandidates.into());
    }

    let completions = complete_basket(&model, &observed, args.top)?;
    println!("rank item probability");
    for (rank, (item, p)) in completions.iter().enumerate() {
        println!("{} {} {p}", rank + 1, catalog.id(*item));
    }
    Ok(ExitCode::SUCCESS)
}
