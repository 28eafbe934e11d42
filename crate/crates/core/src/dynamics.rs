//! Time evolution: the exact Schrödinger trajectory, the coefficient
//! equations in the adiabatic-orbit basis, survival probabilities and their
//! first-order estimate.
//!
//! Two independent routes give the expansion coefficients `c_n(tau)`:
//! projecting the propagated state onto the orbits
//! ([`project_onto_adiabatic`]) and integrating `c' = i M c` directly
//! ([`integrate_coefficients`]). They must agree.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{cumulative_trapezoid, fornberg_weights, TimeGrid};
use crate::linalg::{distance, inner, norm, propagate_step, ComplexMatrix};
use crate::models::HamiltonianModel;
use crate::spectral::SpectralFlow;

/// Stepping rule for [`integrate_schrodinger`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Integrator {
    /// `psi <- exp(-i h(t + dt/2) dt) psi`; unitary by construction.
    #[default]
    ExponentialMidpoint,
    /// Classical Runge-Kutta, kept as a cross-check. Not norm preserving.
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationOptions {
    pub integrator: Integrator,
    /// Successive refinements must agree to this max state distance.
    pub tolerance: f64,
    /// Maximum number of step halvings.
    pub max_depth: u32,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::ExponentialMidpoint,
            tolerance: 1e-9,
            max_depth: 20,
        }
    }
}

/// Normalized states on a grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<Vec<Complex64>>,
    /// Substeps per grid interval used for the accepted solution.
    pub substeps: usize,
    /// Max state distance between the last two refinements.
    pub refinement_error: f64,
}

impl Trajectory {
    pub fn max_norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (norm(s) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn check_unit(psi: &[Complex64]) -> Result<()> {
    let n = norm(psi);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("initial state has norm {n}, expected 1")));
    }
    Ok(())
}

fn sweep<M: HamiltonianModel + ?Sized>(
    model: &M,
    psi0: &[Complex64],
    grid: &TimeGrid,
    substeps: usize,
    integrator: Integrator,
) -> Result<Vec<Vec<Complex64>>> {
    let t = grid.points();
    let mut states = Vec::with_capacity(t.len());
    let mut psi = psi0.to_vec();
    states.push(psi.clone());
    for w in t.windows(2) {
        let dt = (w[1] - w[0]) / substeps as f64;
        for j in 0..substeps {
            let start = w[0] + j as f64 * dt;
            psi = match integrator {
                Integrator::ExponentialMidpoint => propagate_step(&model.h(start + 0.5 * dt)?, dt, &psi)?,
                Integrator::Rk4 => rk4_step(model, start, dt, &psi)?,
            };
        }
        states.push(psi.clone());
    }
    Ok(states)
}

fn rk4_step<M: HamiltonianModel + ?Sized>(
    model: &M,
    t: f64,
    dt: f64,
    psi: &[Complex64],
) -> Result<Vec<Complex64>> {
    let minus_i = Complex64::new(0.0, -1.0);
    let f = |tau: f64, v: &[Complex64]| -> Result<Vec<Complex64>> {
        Ok(model.h(tau)?.apply(v).into_iter().map(|z| z * minus_i).collect())
    };
    let axpy = |v: &[Complex64], k: &[Complex64], a: f64| -> Vec<Complex64> {
        v.iter().zip(k).map(|(x, y)| x + y * a).collect()
    };
    let k1 = f(t, psi)?;
    let k2 = f(t + 0.5 * dt, &axpy(psi, &k1, 0.5 * dt))?;
    let k3 = f(t + 0.5 * dt, &axpy(psi, &k2, 0.5 * dt))?;
    let k4 = f(t + dt, &axpy(psi, &k3, dt))?;
    Ok((0..psi.len())
        .map(|i| psi[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
        .collect())
}

/// Solve `i psi' = h psi` on `grid`, halving the substep until two
/// successive refinements agree to `opts.tolerance` at every grid point.
pub fn integrate_schrodinger<M: HamiltonianModel + ?Sized>(
    model: &M,
    psi0: &[Complex64],
    grid: &TimeGrid,
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    check_unit(psi0)?;
    if psi0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: psi0.len(),
        });
    }
    let mut substeps = 1;
    let mut coarse = sweep(model, psi0, grid, substeps, opts.integrator)?;
    let mut last_diff = f64::INFINITY;
    for _ in 0..opts.max_depth {
        substeps *= 2;
        let fine = sweep(model, psi0, grid, substeps, opts.integrator)?;
        let diff = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| distance(a, b))
            .fold(0.0, f64::max);
        if diff <= opts.tolerance {
            return Ok(Trajectory {
                grid: grid.clone(),
                states: fine,
                substeps,
                refinement_error: diff,
            });
        }
        last_diff = diff;
        coarse = fine;
    }
    Err(Error::NoConvergence(format!(
        "Schrödinger propagation: refinements still differ by {last_diff:e} after {} halvings",
        opts.max_depth
    )))
}

/// `M_mn(tau_k) = |gamma_mn| exp(i theta_mn)` with zero diagonal.
#[derive(Clone, Debug)]
pub struct MMatrixSeries {
    pub grid: TimeGrid,
    pub matrices: Vec<ComplexMatrix>,
}

/// Assemble `M` from the flow. Where `|gamma_mn|` is below the zero floor
/// the phase is undefined and the entry is set to zero, the limit of
/// `|gamma| e^{i theta}`.
pub fn build_m_series(flow: &SpectralFlow) -> MMatrixSeries {
    let dim = flow.dim();
    let len = flow.grid().len();
    let mut matrices = vec![ComplexMatrix::zeros(dim); len];
    for pair in flow.pairs() {
        let (a, b) = (pair.n, pair.m);
        for (k, m) in matrices.iter_mut().enumerate() {
            if let Some(theta) = pair.theta[k] {
                m[(a, b)] = Complex64::from_polar(flow.gamma_at(k)[(a, b)].norm(), theta);
            }
        }
    }
    MMatrixSeries {
        grid: flow.grid().clone(),
        matrices,
    }
}

/// Expansion coefficients `c_n(tau_k)`, stored `coeffs[k][n]`.
#[derive(Clone, Debug)]
pub struct CoefficientSeries {
    pub grid: TimeGrid,
    pub coeffs: Vec<Vec<Complex64>>,
}

impl CoefficientSeries {
    /// `max_k |sum_n |c_n|^2 - 1|`
    pub fn normalization_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| (c.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_{k,n} |c_n - c'_n|`
    pub fn max_difference(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max))
    }
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_BSTAR: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const COEFF_RTOL: f64 = 1e-10;
const COEFF_ATOL: f64 = 1e-13;
const MAX_STEPS_PER_INTERVAL: usize = 100_000;

/// Integrate `c_a' = i sum_b M_ab c_b` from `c_n(0) = delta_nm`, with `M`
/// interpolated by local cubics in `tau` and adaptive Dormand-Prince steps.
pub fn integrate_coefficients(m_series: &MMatrixSeries, initial: usize) -> Result<CoefficientSeries> {
    let t = m_series.grid.points();
    let dim = m_series.matrices[0].dim();
    if initial >= dim {
        return Err(Error::InvalidParameter(format!("level {initial} out of range for dimension {dim}")));
    }
    let mats = &m_series.matrices;
    let width = 4.min(t.len());
    let i_unit = Complex64::new(0.0, 1.0);
    // Right-hand side on interval `k`, always using that interval's cubic.
    let rhs = |k: usize, tau: f64, c: &[Complex64]| -> Vec<Complex64> {
        let start = k.saturating_sub(1).min(t.len() - width);
        let w = fornberg_weights(tau, &t[start..start + width], 0);
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (j, wj) in w.iter().enumerate() {
            let mj = &mats[start + j];
            for (a, o) in out.iter_mut().enumerate() {
                let row: Complex64 = (0..dim).map(|b| mj[(a, b)] * c[b]).sum();
                *o += row * wj[0];
            }
        }
        out.iter_mut().for_each(|z| *z *= i_unit);
        out
    };

    let mut c = vec![Complex64::new(0.0, 0.0); dim];
    c[initial] = Complex64::new(1.0, 0.0);
    let mut coeffs = Vec::with_capacity(t.len());
    coeffs.push(c.clone());
    let mut h = (t[1] - t[0]).min(0.1);
    for (interval, w) in t.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let mut tau = a;
        let mut steps = 0;
        while tau < b {
            steps += 1;
            if steps > MAX_STEPS_PER_INTERVAL || h < 1e-14 * (b - a) {
                return Err(Error::NoConvergence(format!(
                    "coefficient equations stalled at tau = {tau}"
                )));
            }
            let step = h.min(b - tau);
            let mut k: Vec<Vec<Complex64>> = Vec::with_capacity(7);
            for s in 0..7 {
                let stage: Vec<Complex64> = (0..dim)
                    .map(|i| c[i] + (0..s).map(|j| k[j][i] * DP_A[s][j]).sum::<Complex64>() * step)
                    .collect();
                k.push(rhs(interval, tau + DP_C[s] * step, &stage));
            }
            let next: Vec<Complex64> = (0..dim)
                .map(|i| c[i] + (0..7).map(|j| k[j][i] * DP_B[j]).sum::<Complex64>() * step)
                .collect();
            let err = (0..dim)
                .map(|i| {
                    let e = (0..7).map(|j| k[j][i] * (DP_B[j] - DP_BSTAR[j])).sum::<Complex64>() * step;
                    e.norm() / (COEFF_ATOL + COEFF_RTOL * c[i].norm().max(next[i].norm()))
                })
                .fold(0.0, f64::max);
            if err <= 1.0 {
                tau += step;
                c = next;
                if b - tau < 1e-14 * (b - a) {
                    tau = b;
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
        }
        coeffs.push(c.clone());
    }
    Ok(CoefficientSeries {
        grid: m_series.grid.clone(),
        coeffs,
    })
}

/// `c_n(tau_k) = <Phi_n(tau_k)|psi(tau_k)>` for orbits given as
/// `orbits[n][k]`.
pub fn project_onto_adiabatic(traj: &Trajectory, orbits: &[Vec<Vec<Complex64>>]) -> Result<CoefficientSeries> {
    if orbits.iter().any(|o| o.len() != traj.states.len()) {
        return Err(Error::GridMismatch);
    }
    let coeffs = traj
        .states
        .iter()
        .enumerate()
        .map(|(k, psi)| orbits.iter().map(|o| inner(&o[k], psi)).collect())
        .collect();
    Ok(CoefficientSeries {
        grid: traj.grid.clone(),
        coeffs,
    })
}

/// `P_m = |c_m|^2` along the grid.
pub fn survival_probability(c: &CoefficientSeries, m: usize) -> Vec<f64> {
    c.coeffs.iter().map(|ck| ck[m].norm_sqr()).collect()
}

/// `sum_{n != m} |c_n|^2`, i.e. `1 - P_m` without the cancellation.
pub fn leakage(c: &CoefficientSeries, m: usize) -> Vec<f64> {
    c.coeffs
        .iter()
        .map(|ck| {
            ck.iter()
                .enumerate()
                .filter(|(n, _)| *n != m)
                .map(|(_, z)| z.norm_sqr())
                .sum()
        })
        .collect()
}

/// First-order estimate `P_m = 1 - sum_{n != m} |int_0^tau |gamma_nm| e^{i theta_nm}|^2`,
/// accumulated with the trapezoid rule. Each step must advance `theta_nm` by
/// less than pi/4 or the oscillatory integrand is considered aliased.
pub fn first_order_survival(flow: &SpectralFlow, m: usize) -> Result<Vec<f64>> {
    let t = flow.grid().points();
    let len = t.len();
    let mut p = vec![1.0; len];
    for n in (0..flow.dim()).filter(|&n| n != m) {
        let pair = flow.pair(n, m);
        for k in 1..len {
            if let (Some(a), Some(b)) = (pair.theta[k - 1], pair.theta[k]) {
                if (b - a).abs() >= PI / 4.0 {
                    return Err(Error::StepTooCoarse {
                        tau: t[k],
                        detail: format!(
                            "theta_{n}{m} advanced {:.3} rad in one step (limit pi/4)",
                            (b - a).abs()
                        ),
                    });
                }
            }
        }
        let integrand: Vec<Complex64> = (0..len)
            .map(|k| match pair.theta[k] {
                Some(theta) => Complex64::from_polar(flow.gamma_at(k)[(n, m)].norm(), theta),
                None => Complex64::new(0.0, 0.0),
            })
            .collect();
        let amp = cumulative_trapezoid(t, &integrand);
        for (pk, a) in p.iter_mut().zip(&amp) {
            *pk -= a.norm_sqr();
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_vector, eigh, sigma_x, sigma_z};
    use crate::models::StaticModel;
    use crate::spectral::{adiabatic_orbits, track_frames, SpectralConfig};

    #[test]
    fn zero_hamiltonian_leaves_state_alone() {
        let model = StaticModel::new(ComplexMatrix::zeros(2), 3.0).unwrap();
        let psi0 = vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let grid = TimeGrid::uniform(3.0, 30).unwrap();
        let traj = integrate_schrodinger(&model, &psi0, &grid, &PropagationOptions::default()).unwrap();
        for s in &traj.states {
            assert!(distance(s, &psi0) < 1e-15);
        }
    }

    #[test]
    fn stationary_state_picks_up_a_phase() {
        let h = &sigma_z().scale_re(0.4) + &sigma_x().scale_re(0.9);
        let eig = eigh(&h).unwrap();
        let model = StaticModel::new(h, 6.0).unwrap();
        let grid = TimeGrid::uniform(6.0, 60).unwrap();
        let traj = integrate_schrodinger(&model, &eig.vectors[1], &grid, &PropagationOptions::default()).unwrap();
        for (s, tau) in traj.states.iter().zip(grid.points()) {
            let want: Vec<Complex64> = eig.vectors[1]
                .iter()
                .map(|z| z * Complex64::from_polar(1.0, -eig.values[1] * tau))
                .collect();
            assert!(distance(s, &want) < 1e-12);
        }
        assert!(traj.max_norm_drift() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_start() {
        let model = StaticModel::new(sigma_z(), 1.0).unwrap();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let psi = vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(integrate_schrodinger(&model, &psi, &grid, &PropagationOptions::default()).is_err());
    }

    #[test]
    fn no_convergence_when_depth_exhausted() {
        let model = StaticModel::new(sigma_x(), 1.0).unwrap();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let opts = PropagationOptions {
            integrator: Integrator::Rk4,
            tolerance: 1e-30,
            max_depth: 3,
        };
        assert!(matches!(
            integrate_schrodinger(&model, &basis_vector(2, 0), &grid, &opts),
            Err(Error::NoConvergence(_))
        ));
    }

    #[test]
    fn time_independent_model_has_unit_survival() {
        let h = &sigma_z().scale_re(0.4) + &sigma_x().scale_re(0.9);
        let model = StaticModel::new(h, 6.0).unwrap();
        let grid = TimeGrid::uniform(6.0, 60).unwrap();
        let cfg = SpectralConfig::default();
        let frames = track_frames(&model, &grid, &cfg).unwrap();
        let flow = SpectralFlow::compute(&frames, &model, &cfg).unwrap();
        let m = build_m_series(&flow);
        assert!(m.matrices.iter().all(|x| x.max_abs() == 0.0));
        let c = integrate_coefficients(&m, 1).unwrap();
        assert!(survival_probability(&c, 1).iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert_eq!(c.coeffs[0], vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);

        let traj = integrate_schrodinger(&model, frames.vector(0, 1), &grid, &PropagationOptions::default()).unwrap();
        let proj = project_onto_adiabatic(&traj, &adiabatic_orbits(&frames, &flow)).unwrap();
        assert!(survival_probability(&proj, 1).iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert!(first_order_survival(&flow, 1).unwrap().iter().all(|p| *p == 1.0));
    }

    #[test]
    fn projection_requires_matching_grids() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let traj = Trajectory {
            grid,
            states: vec![basis_vector(2, 0); 5],
            substeps: 1,
            refinement_error: 0.0,
        };
        let orbits = vec![vec![basis_vector(2, 0); 4], vec![basis_vector(2, 1); 4]];
        assert!(matches!(project_onto_adiabatic(&traj, &orbits), Err(Error::GridMismatch)));
    }
}
