//! `adiacheck <mode> --config path.json [--out dir]`
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
//! 1 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use adiacheck::runner::{run, ExperimentConfig, Mode, RunReport};
use adiacheck::Result;
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "adiacheck", version, about = "Numerical adiabaticity checks for time-dependent quantum systems")]
struct Cli {
    /// Pipeline to execute.
    #[arg(value_enum)]
    mode: Mode,
    /// Experiment description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory for relative output paths.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn print_summary(r: &RunReport) {
    if let Some(s) = &r.survival {
        println!("survival: min {:.6e}, final {:.6e}", s.min, s.last);
        if let Some(p1) = s.first_order_final {
            println!("first-order survival: final {p1:.6e}");
        }
    }
    if let Some(o) = &r.oracle {
        println!("closed form: final P {:.6e}, regime {}", o.final_closed_form_survival, o.regime);
        if let (Some(dp), Some(inf)) = (o.max_survival_error, o.max_state_infidelity) {
            println!("numerics vs closed form: max |dP| {dp:.3e}, max infidelity {inf:.3e}");
        }
    }
    if let Some(c) = &r.conditions {
        print!("{}", c.table());
    }
    if let Some(d) = &r.dual {
        println!("dual coupling residual: {:.3e}", d.gamma_residual);
        for p in &d.comparison.pairs {
            println!(
                "pair ({},{}): ratio a {:.4e}, ratio b {:.4e}, |gamma^a|/|Delta^a| {:.4e} (defect {:.2e})",
                p.n, p.m, p.ratio_a, p.ratio_b, p.predicted_b, p.identity_defect
            );
        }
        println!("{}", d.comparison.summary);
    }
    if let Some(rows) = &r.sweep {
        println!("value, min P, final P, traditional, pointwise, integral, regime");
        for row in rows {
            println!(
                "{:.6e}, {:.6e}, {:.6e}, {}, {}, {}, {}",
                row.value,
                row.min_p,
                row.final_p,
                row.traditional.as_str(),
                row.pointwise.as_str(),
                row.integral.as_str(),
                row.regime
            );
        }
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    for p in &r.outputs {
        println!("wrote {}", p.display());
    }
}

fn execute(cli: &Cli) -> Result<RunReport> {
    let cfg = ExperimentConfig::from_path(&cli.config)?;
    run(&cfg, cli.mode, &cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            print_summary(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
