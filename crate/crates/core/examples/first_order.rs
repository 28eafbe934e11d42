//! First-order survival from the oscillatory integral against the exact
//! leakage, in the weak-coupling regime and out of it.

use adiacheck::dynamics::{leakage, PropagationOptions};
use adiacheck::models::{Schedule, SpinHalfModel, SpinHalfParams};
use adiacheck::runner::analyze;
use adiacheck::TimeGrid;

fn main() -> adiacheck::Result<()> {
    for xi in [0.001, 0.1] {
        let model = SpinHalfModel::new(SpinHalfParams::new(1.0, Schedule::constant(xi), 100.0)?)?;
        let grid = TimeGrid::uniform(100.0, 4096)?;
        let a = analyze(&model, &grid, 1, 10.0, &PropagationOptions::default())?;
        let Some(p1) = &a.first_order else {
            println!("xi = {xi}: {}", a.warnings.join("; "));
            continue;
        };
        let leak = leakage(&a.projected, 1);
        println!("xi = {xi}");
        for k in (512..grid.len()).step_by(1024) {
            println!(
                "  tau {:6.2}: exact leakage {:.4e}, first order {:.4e}",
                grid.points()[k],
                leak[k],
                1.0 - p1[k]
            );
        }
    }
    Ok(())
}
