//! The two sufficient regimes of the spin-half model, side by side with a
//! case that is in neither.

use adiacheck::dynamics::PropagationOptions;
use adiacheck::models::{Schedule, SpinHalfModel, SpinHalfParams};
use adiacheck::oracles::{regime_classify, SpinHalfClosedForm};
use adiacheck::runner::analyze;
use adiacheck::TimeGrid;

fn main() -> adiacheck::Result<()> {
    let cases = [(0.01, 1.0, 100.0), (1.0, 0.001, 100.0), (1.0, 0.1, 50.0)];
    println!("{:>6} {:>6} {:>6}  {:>10}  {:>8} {:>9} {:>9}  regime", "eta", "xi", "tau", "min P", "trad", "pointwise", "integral");
    for (eta, xi, t) in cases {
        let model = SpinHalfModel::new(SpinHalfParams::new(eta, Schedule::constant(xi), t)?)?;
        let grid = TimeGrid::uniform(t, 8192)?;
        let a = analyze(&model, &grid, 1, 10.0, &PropagationOptions::default())?;
        let min_p = a.survival.iter().cloned().fold(f64::INFINITY, f64::min);
        let regime = regime_classify(&SpinHalfClosedForm::from_model(&model), (0.0, t), 10.0)?;
        let c = &a.conditions;
        println!(
            "{eta:>6} {xi:>6} {t:>6}  {min_p:>10.6}  {:>8} {:>9} {:>9}  {}",
            c.traditional().as_str(),
            c.pointwise().as_str(),
            c.integral().as_str(),
            regime.as_str()
        );
    }
    Ok(())
}
