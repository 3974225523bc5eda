//! The whole pipeline through the command-line layer, as `cdr-mobility all`.

use cdr_mobility::cli::{execute, parse_args, Command};
use cdr_mobility::Result;

pub fn run() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("cdr-mobility-example-{}", std::process::id()));
    let out = dir.to_str().expect("utf-8 temp dir");
    let (_, mut cfg) = parse_args(["cdr-mobility", "all", "--output", out, "--n-users", "150", "--direction", "each"])
        .map_err(|e| cdr_mobility::Error::ConfigInvalid(e.to_string()))?;
    cfg.threads = 2;
    print!("{}", execute(Command::All, &cfg)?);
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

fn main() -> Result<()> {
    run()
}
