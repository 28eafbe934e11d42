//! Re-dress the eigenframes with arbitrary smooth phases. The couplings
//! change, but the geometric potential and the adiabatic orbits do not.

use adiacheck::linalg::distance;
use adiacheck::models::{Schedule, SpinHalfModel, SpinHalfParams};
use adiacheck::spectral::{adiabatic_orbits, track_frames, SpectralConfig, SpectralFlow};
use adiacheck::TimeGrid;

fn main() -> adiacheck::Result<()> {
    let model = SpinHalfModel::new(SpinHalfParams::new(0.8, Schedule::linear(0.2, 0.01), 20.0)?)?;
    let grid = TimeGrid::uniform(20.0, 4096)?;
    let cfg = SpectralConfig::default();
    let frames = track_frames(&model, &grid, &cfg)?;
    let flow = SpectralFlow::compute(&frames, &model, &cfg)?;

    let dressed = frames.redress(|n, t| (n as f64 + 1.0) * (0.3 * t).sin() + 0.02 * t * t);
    let dflow = SpectralFlow::compute(&dressed, &model, &cfg)?;

    let k = grid.len() / 2;
    println!("gamma_11 at tau = 10: {:+.6} -> {:+.6}", flow.gamma_at(k)[(1, 1)].re, dflow.gamma_at(k)[(1, 1)].re);
    let d0 = flow.geometric_potential(1, 0)?;
    let d1 = dflow.geometric_potential(1, 0)?;
    let worst = d0.iter().zip(&d1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max change of Delta_10: {worst:.2e}");

    let (o0, o1) = (adiabatic_orbits(&frames, &flow), adiabatic_orbits(&dressed, &dflow));
    let worst = o0[1].iter().zip(&o1[1]).map(|(a, b)| distance(a, b)).fold(0.0, f64::max);
    println!("max change of the orbit |Phi_1>: {worst:.2e}");
    Ok(())
}
