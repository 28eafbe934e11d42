//! Linear Landau-Zener sweeps at several rates. The measured survival is
//! compared with `1 - exp(-pi g^2 / rate)` and with the three tests.
//!
//! Slow sweeps pass everything. At moderate rates the integral test still
//! passes although the system leaks; the pointwise test does not.

use std::f64::consts::PI;

use adiacheck::dynamics::PropagationOptions;
use adiacheck::models::LandauZenerModel;
use adiacheck::runner::analyze;
use adiacheck::TimeGrid;

fn main() -> adiacheck::Result<()> {
    let g = 0.5;
    println!("{:>6}  {:>9} {:>9}  {:>8} {:>9} {:>9}", "rate", "final P", "LZ", "trad", "pointwise", "integral");
    for rate in [0.01, 0.1, 1.0, 10.0] {
        let t = 16.0 * g / rate;
        let model = LandauZenerModel::linear_sweep(g, rate, 0.5 * t, t)?;
        let grid = TimeGrid::uniform(t, 8192)?;
        let a = analyze(&model, &grid, 1, 10.0, &PropagationOptions::default())?;
        let c = &a.conditions;
        println!(
            "{rate:>6}  {:>9.5} {:>9.5}  {:>8} {:>9} {:>9}",
            a.survival.last().unwrap(),
            1.0 - (-PI * g * g / rate).exp(),
            c.traditional().as_str(),
            c.pointwise().as_str(),
            c.integral().as_str()
        );
    }
    Ok(())
}
