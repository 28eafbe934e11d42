//! The spin-half model at resonance: the traditional coupling-over-gap test
//! passes, yet the spin is flipped by `tau = pi / (2 xi)`.

use std::f64::consts::PI;

use adiacheck::dynamics::PropagationOptions;
use adiacheck::models::{Schedule, SpinHalfModel, SpinHalfParams};
use adiacheck::oracles::SpinHalfClosedForm;
use adiacheck::runner::{analyze, oracle_summary};
use adiacheck::TimeGrid;

fn main() -> adiacheck::Result<()> {
    let (eta, xi) = (1.0, 0.1);
    let t = PI / (2.0 * xi);
    let model = SpinHalfModel::new(SpinHalfParams::new(eta, Schedule::constant(xi), t)?)?;
    let grid = TimeGrid::uniform(t, 4096)?;
    let a = analyze(&model, &grid, 1, 10.0, &PropagationOptions::default())?;
    let cf = SpinHalfClosedForm::from_model(&model);
    let oracle = oracle_summary(&cf, &a, 10.0)?;

    println!("P(+) at tau = {t:.4}: {:.6}", a.survival.last().unwrap());
    println!("closed form:            {:.6}", cf.survival(t)?);
    println!("max |P - closed form|:  {:.2e}", oracle.max_survival_error.unwrap_or(f64::NAN));
    print!("{}", a.conditions.table());
    Ok(())
}
