use std::process::ExitCode;

use clap::Args;
use lrdpp::oracle::suite;

use super::{print_config, CliResult};

#[derive(Args)]
pub struct CheckArgs {
    /// Base seed; trial t of a property uses seed + t.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Randomized trials per property.
    #[arg(long, default_value_t = 50)]
    trials: usize,
}

pub fn run(args: CheckArgs, threads: usize) -> CliResult {
    print_config(
        "check",
        &[
            ("seed", args.seed.to_string()),
            ("trials", args.trials.to_string()),
            ("threads", threads.to_string()),
        ],
    );

    let mut all_passed = true;
    for report in suite::run_all(args.seed, args.trials) {
        let verdict = if report.passed {
            "PASS".to_string()
        } else {
            all_passed = false;
            format!(
                "FAIL (reproduce with --seed {} --trials 1)",
                report.failing_seed.expect("failed reports carry a seed")
            )
        };
        println!(
            "property {:<26} trials {:>4}  max error {:>12.5e}  tolerance {:>8.1e}  {verdict}",
            report.name, report.trials, report.max_error, report.tolerance
        );
    }
    if all_passed {
        println!("all properties passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("property check failed");
        Ok(ExitCode::FAILURE)
    }
}
