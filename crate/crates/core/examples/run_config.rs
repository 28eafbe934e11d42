//! Run a JSON experiment the way the command-line tool does.
//!
//! ```text
//! cargo run --example run_config -- configs/sweep_xi.json sweep
//! ```

use std::path::PathBuf;

use adiacheck::runner::{run, ExperimentConfig, Mode};
use clap::ValueEnum;

fn main() -> adiacheck::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "configs/resonance_simulate.json".into()));
    let cfg = ExperimentConfig::from_path(&path)?;
    let mode = match args.next() {
        Some(m) => Mode::from_str(&m, true).map_err(adiacheck::Error::InvalidParameter)?,
        None => cfg.mode.unwrap_or(Mode::Simulate),
    };
    let out = std::env::temp_dir().join("adiacheck-example");
    let report = run(&cfg, mode, &out)?;
    println!("{}", report.to_json()?);
    Ok(())
}
