pub mod bench;
pub mod check;
pub mod evaluate;
pub mod predict;
pub mod train;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

pub type CliError = Box<dyn std::error::Error>;
pub type CliResult = Result<std::process::ExitCode, CliError>;

/// Every command announces its full resolved configuration on stderr, so a
/// captured log is enough to rerun the experiment.
pub(crate) fn print_config(command: &str, entries: &[(&str, String)]) {
    eprintln!("resolved configuration ({command}):");
    for (key, value) in entries {
        eprintln!("  {key} {value}");
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    let file = File::open(path)
        .map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    Ok(BufReader::new(file))
}
