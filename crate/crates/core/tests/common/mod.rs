//! Shared test corpus: spin-half cases with closed forms, their dual, and
//! Landau-Zener sweeps.
#![allow(dead_code)]

use std::f64::consts::PI;

use adiacheck::models::{DualModel, HamiltonianModel, LandauZenerModel, Schedule, SpinHalfModel, SpinHalfParams};
use adiacheck::TimeGrid;

pub struct Case {
    pub name: String,
    pub model: Box<dyn HamiltonianModel>,
    pub grid: TimeGrid,
    /// Initial level.
    pub level: usize,
}

pub fn spin(eta: f64, xi: Schedule, horizon: f64) -> SpinHalfModel {
    SpinHalfModel::new(SpinHalfParams::new(eta, xi, horizon).unwrap()).unwrap()
}

fn case(name: &str, model: Box<dyn HamiltonianModel>, t_max: f64, steps: usize) -> Case {
    Case {
        name: name.to_string(),
        model,
        grid: TimeGrid::uniform(t_max, steps).unwrap(),
        level: 1,
    }
}

/// Landau-Zener sweep from bias `-8 g` to `+8 g` at rate `alpha`.
pub fn landau_zener(g: f64, alpha: f64) -> (LandauZenerModel, f64) {
    let t = 16.0 * g / alpha;
    (LandauZenerModel::linear_sweep(g, alpha, 0.5 * t, t).unwrap(), t)
}

pub fn spin_cases() -> Vec<Case> {
    let c = Schedule::constant;
    vec![
        case("spin resonance", Box::new(spin(1.0, c(0.1), PI / 0.2)), PI / 0.2, 4096),
        case("spin resonance long", Box::new(spin(1.0, c(0.1), 50.0)), 50.0, 8192),
        case("spin xi dominant", Box::new(spin(0.01, c(1.0), 100.0)), 100.0, 8192),
        case("spin eta dominant", Box::new(spin(1.0, c(0.001), 100.0)), 100.0, 4096),
        case("spin linear drive", Box::new(spin(0.7, Schedule::linear(0.05, 0.02), 30.0)), 30.0, 4096),
        case(
            "spin sinusoidal drive",
            Box::new(spin(1.0, Schedule::sinusoidal(0.4, 0.2, 0.5, 0.0), 20.0)),
            20.0,
            4096,
        ),
    ]
}

pub fn landau_zener_cases() -> Vec<Case> {
    [(0.1, 0.01), (0.1, 0.1), (0.1, 1.0), (1.0, 0.1), (0.5, 0.5)]
        .into_iter()
        .map(|(g, a)| {
            let (m, t) = landau_zener(g, a);
            case(&format!("landau-zener g={g} rate={a}"), Box::new(m), t, 8192)
        })
        .collect()
}

pub fn corpus() -> Vec<Case> {
    let mut out = spin_cases();
    out.push(case(
        "dual of spin resonance",
        Box::new(DualModel::new(spin(1.0, Schedule::constant(0.1), 20.0)).unwrap()),
        20.0,
        4096,
    ));
    out.extend(landau_zener_cases());
    out
}
