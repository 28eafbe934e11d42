//! Eigenframe tracking and the geometric quantities built on it.
//!
//! Frames are followed along the grid by maximum-overlap matching and a
//! parallel-transport phase convention: the first frame uses the canonical
//! gauge of [`eigh`], every later eigenvector is rotated so its overlap with
//! its predecessor is real and positive.
//!
//! From the frames we build
//!
//! * `gamma[n][m] = i <phi_n | d phi_m / dtau>`,
//! * `theta_nm(tau) = int_0^tau (e_n - e_m + gamma_mm - gamma_nn) + arg gamma_nm(tau)`,
//! * `Delta_mn(tau) = gamma_mm - gamma_nn + d/dtau arg gamma_nm`,
//!
//! so that `d theta_nm / dtau = e_n - e_m + Delta_mn`. `Delta` and the
//! orbits of [`adiabatic_orbit`] do not depend on the phase convention.
//! Wherever `|gamma_nm|` falls below `zero_floor` its argument is undefined
//! and the dependent series are masked.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{cumulative_integral, differentiate, runs, TimeGrid};
use crate::linalg::{eigh, inner, norm, ComplexMatrix};
use crate::models::HamiltonianModel;

/// Tuning knobs for frame tracking and masking.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralConfig {
    /// Minimum eigenvalue gap before tracking refuses with `DegenerateCrossing`.
    pub gap_floor: f64,
    /// `|gamma_nm|` below this is treated as zero.
    pub zero_floor: f64,
    /// Smallest acceptable overlap between matched consecutive frames.
    pub min_overlap: f64,
    pub gamma_method: GammaMethod,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            gap_floor: 1e-8,
            zero_floor: 1e-12,
            min_overlap: 0.5,
            gamma_method: GammaMethod::Auto,
        }
    }
}

/// How the off-diagonal couplings are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaMethod {
    /// Analytic when the model provides `dh/dtau`, differenced otherwise.
    Auto,
    /// `gamma_nm = i <phi_n| h' |phi_m> / (e_m - e_n)`; needs `hdot`.
    Analytic,
    /// Fourth-order differences of the gauge-fixed eigenvectors.
    Differenced,
}

/// Methods A and B must agree this well or the grid is too coarse.
pub const GAMMA_METHOD_DISAGREEMENT: f64 = 1e-3;

/// Gauge-fixed instantaneous eigenframes on a grid.
#[derive(Clone, Debug)]
pub struct EigenFrameSequence {
    grid: TimeGrid,
    /// `values[k][n] = e_n(tau_k)`
    values: Vec<Vec<f64>>,
    /// `vectors[k][n] = phi_n(tau_k)`
    vectors: Vec<Vec<Vec<Complex64>>>,
    /// Set on intervals where the matched levels swapped energy order.
    crossings: Vec<bool>,
}

impl EigenFrameSequence {
    /// Assemble frames from externally computed eigenpairs (used for the
    /// dual-system construction). Checks per-frame orthonormality.
    pub fn from_parts(
        grid: TimeGrid,
        values: Vec<Vec<f64>>,
        vectors: Vec<Vec<Vec<Complex64>>>,
    ) -> Result<Self> {
        if values.len() != grid.len() || vectors.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let dim = values[0].len();
        for (k, frame) in vectors.iter().enumerate() {
            if frame.len() != dim || values[k].len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: frame.len(),
                });
            }
            for a in 0..dim {
                for b in 0..dim {
                    let want = if a == b { 1.0 } else { 0.0 };
                    if (inner(&frame[a], &frame[b]) - want).norm() > 1e-10 {
                        return Err(Error::InvalidParameter(format!(
                            "frame {k} is not orthonormal"
                        )));
                    }
                }
            }
        }
        let crossings = order_swaps(&values);
        Ok(Self {
            grid,
            values,
            vectors,
            crossings,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, k: usize, n: usize) -> f64 {
        self.values[k][n]
    }

    pub fn vector(&self, k: usize, n: usize) -> &[Complex64] {
        &self.vectors[k][n]
    }

    /// `e_n` along the grid.
    pub fn level(&self, n: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[n]).collect()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn vectors(&self) -> &[Vec<Vec<Complex64>>] {
        &self.vectors
    }

    pub fn crossings(&self) -> &[bool] {
        &self.crossings
    }

    /// Same frames with `phi_n(tau) -> exp(i f(n, tau)) phi_n(tau)`.
    /// `f(n, 0)` should be zero for the result to describe the same
    /// initial states.
    pub fn redress(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let vectors = self
            .vectors
            .iter()
            .zip(self.grid.points())
            .map(|(frame, &tau)| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(n, v)| {
                        let ph = Complex64::from_polar(1.0, f(n, tau));
                        v.iter().map(|z| z * ph).collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            values: self.values.clone(),
            vectors,
            crossings: self.crossings.clone(),
        }
    }

    /// Largest `|<phi_a|phi_b> - delta_ab|` over all frames.
    pub fn orthonormality_defect(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0_f64;
        for frame in &self.vectors {
            for a in 0..dim {
                for b in 0..dim {
                    let want = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((inner(&frame[a], &frame[b]) - want).norm());
                }
            }
        }
        worst
    }
}

fn order_swaps(values: &[Vec<f64>]) -> Vec<bool> {
    values
        .windows(2)
        .map(|w| {
            let rank = |v: &Vec<f64>| {
                let mut idx: Vec<usize> = (0..v.len()).collect();
                idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
                idx
            };
            rank(&w[0]) != rank(&w[1])
        })
        .collect()
}

/// Diagonalize `h` at every grid point and carry the levels along by
/// maximum overlap, fixing phases by parallel transport.
pub fn track_frames<M: HamiltonianModel + ?Sized>(
    model: &M,
    grid: &TimeGrid,
    cfg: &SpectralConfig,
) -> Result<EigenFrameSequence> {
    let n_levels = model.dim();
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    let mut vectors: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(grid.len());

    for &tau in grid.points() {
        let eig = eigh(&model.h(tau)?)?;
        let gap = eig.min_gap();
        if n_levels > 1 && gap < cfg.gap_floor {
            return Err(Error::DegenerateCrossing { tau, gap });
        }
        let Some(prev) = vectors.last() else {
            values.push(eig.values);
            vectors.push(eig.vectors);
            continue;
        };
        let assignment = match_levels(prev, &eig.vectors);
        let mut frame_values = vec![0.0; n_levels];
        let mut frame_vectors = vec![Vec::new(); n_levels];
        for (level, (col, overlap)) in assignment.into_iter().enumerate() {
            if overlap.norm() < cfg.min_overlap {
                return Err(Error::GaugeAmbiguity {
                    tau,
                    overlap: overlap.norm(),
                });
            }
            let phase = overlap.conj() / overlap.norm();
            frame_values[level] = eig.values[col];
            frame_vectors[level] = eig.vectors[col].iter().map(|z| z * phase).collect();
        }
        values.push(frame_values);
        vectors.push(frame_vectors);
    }

    let crossings = order_swaps(&values);
    Ok(EigenFrameSequence {
        grid: grid.clone(),
        values,
        vectors,
        crossings,
    })
}

/// Greedy maximum-overlap assignment. Returns, for each previous level,
/// the matched column and the overlap `<prev|new>`.
fn match_levels(prev: &[Vec<Complex64>], new: &[Vec<Complex64>]) -> Vec<(usize, Complex64)> {
    let n = prev.len();
    let overlaps: Vec<Vec<Complex64>> = prev
        .iter()
        .map(|p| new.iter().map(|q| inner(p, q)).collect())
        .collect();
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; n];
    let mut out = vec![(0, Complex64::new(0.0, 0.0)); n];
    for _ in 0..n {
        let mut best = (0, 0, -1.0);
        for i in (0..n).filter(|&i| !row_done[i]) {
            for j in (0..n).filter(|&j| !col_done[j]) {
                let v = overlaps[i][j].norm();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (i, j, _) = best;
        row_done[i] = true;
        col_done[j] = true;
        out[i] = (j, overlaps[i][j]);
    }
    out
}

/// Phase data of one ordered level pair `(n, m)`.
#[derive(Clone, Debug)]
pub struct PairPhase {
    pub n: usize,
    pub m: usize,
    /// True where `|gamma_nm| < zero_floor`.
    pub mask: Vec<bool>,
    /// Unwrapped `arg gamma_nm`, restarted after every masked span.
    pub arg: Vec<Option<f64>>,
    /// `theta_nm`.
    pub theta: Vec<Option<f64>>,
    /// `Delta_mn` (note the index order).
    pub delta: Vec<Option<f64>>,
    /// Grid indices where `gamma_nm` flipped sign between samples
    /// (arg jumped by pi); `Delta` is left undefined next to them.
    pub sign_flips: Vec<usize>,
}

impl PairPhase {
    pub fn fully_masked(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn masked_spans(&self, grid: &TimeGrid) -> Vec<(f64, f64)> {
        let t = grid.points();
        runs(&self.mask).into_iter().map(|(a, b)| (t[a], t[b])).collect()
    }
}

/// `gamma`, `theta` and `Delta` for every ordered level pair.
#[derive(Clone, Debug)]
pub struct SpectralFlow {
    grid: TimeGrid,
    dim: usize,
    /// `gamma[k]` is the matrix `gamma_nm(tau_k)`.
    gamma: Vec<ComplexMatrix>,
    /// Energies copied from the frames, `energies[k][n]`.
    energies: Vec<Vec<f64>>,
    pairs: Vec<PairPhase>,
    /// Largest off-diagonal difference between the analytic and differenced
    /// couplings, when both were computed.
    pub method_discrepancy: Option<f64>,
    pub zero_floor: f64,
}

impl SpectralFlow {
    /// Couplings plus all derived phases.
    pub fn compute<M: HamiltonianModel + ?Sized>(
        frames: &EigenFrameSequence,
        model: &M,
        cfg: &SpectralConfig,
    ) -> Result<Self> {
        let (gamma, discrepancy) = gamma_matrix(frames, Some(model), cfg)?;
        Self::from_gamma(frames, gamma, discrepancy, cfg)
    }

    /// Flow from differenced frames alone (no model needed).
    pub fn from_frames(frames: &EigenFrameSequence, cfg: &SpectralConfig) -> Result<Self> {
        let cfg = SpectralConfig {
            gamma_method: GammaMethod::Differenced,
            ..*cfg
        };
        let (gamma, discrepancy) = gamma_matrix::<crate::models::StaticModel>(frames, None, &cfg)?;
        Self::from_gamma(frames, gamma, discrepancy, &cfg)
    }

    fn from_gamma(
        frames: &EigenFrameSequence,
        gamma: Vec<ComplexMatrix>,
        method_discrepancy: Option<f64>,
        cfg: &SpectralConfig,
    ) -> Result<Self> {
        let dim = frames.dim();
        let grid = frames.grid().clone();
        let mut pairs = Vec::with_capacity(dim * dim.saturating_sub(1));
        for n in 0..dim {
            for m in 0..dim {
                if n != m {
                    pairs.push(pair_phase(&grid, frames, &gamma, n, m, cfg.zero_floor)?);
                }
            }
        }
        Ok(Self {
            grid,
            dim,
            gamma,
            energies: frames.values().to_vec(),
            pairs,
            method_discrepancy,
            zero_floor: cfg.zero_floor,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma_at(&self, k: usize) -> &ComplexMatrix {
        &self.gamma[k]
    }

    /// `gamma_nm` along the grid.
    pub fn gamma(&self, n: usize, m: usize) -> Vec<Complex64> {
        self.gamma.iter().map(|g| g[(n, m)]).collect()
    }

    pub fn energy(&self, n: usize) -> Vec<f64> {
        self.energies.iter().map(|e| e[n]).collect()
    }

    pub fn energies(&self) -> &[Vec<f64>] {
        &self.energies
    }

    /// Phase data for the ordered pair `(n, m)`, `n != m`.
    pub fn pair(&self, n: usize, m: usize) -> &PairPhase {
        assert!(n != m && n < self.dim && m < self.dim, "invalid pair ({n},{m})");
        let idx = n * (self.dim - 1) + if m < n { m } else { m - 1 };
        &self.pairs[idx]
    }

    pub fn pairs(&self) -> &[PairPhase] {
        &self.pairs
    }

    /// Largest `|gamma_nm - conj(gamma_mn)|` over the grid.
    pub fn hermiticity_defect(&self) -> f64 {
        self.gamma
            .iter()
            .map(|g| g.max_asymmetry())
            .fold(0.0, f64::max)
    }

    /// Largest `|gamma_nm|` over off-diagonal entries and the grid.
    pub fn max_offdiagonal(&self) -> f64 {
        let mut worst = 0.0_f64;
        for g in &self.gamma {
            for n in 0..self.dim {
                for m in 0..self.dim {
                    if n != m {
                        worst = worst.max(g[(n, m)].norm());
                    }
                }
            }
        }
        worst
    }

    /// `theta_nm` on the full grid; fails where `gamma_nm` vanishes.
    pub fn theta_phase(&self, n: usize, m: usize) -> Result<Vec<f64>> {
        let p = self.pair(n, m);
        unmasked(&p.theta).ok_or_else(|| Error::MaskedInterval {
            n,
            m,
            spans: p.masked_spans(&self.grid),
        })
    }

    /// `Delta_mn` on the full grid; fails where `gamma_nm` vanishes.
    pub fn geometric_potential(&self, m: usize, n: usize) -> Result<Vec<f64>> {
        let p = self.pair(n, m);
        unmasked(&p.delta).ok_or_else(|| Error::MaskedInterval {
            n,
            m,
            spans: if p.mask.iter().any(|&x| x) {
                p.masked_spans(&self.grid)
            } else {
                sign_flip_spans(&self.grid, p)
            },
        })
    }
}

fn unmasked(series: &[Option<f64>]) -> Option<Vec<f64>> {
    series.iter().copied().collect()
}

fn sign_flip_spans(grid: &TimeGrid, p: &PairPhase) -> Vec<(f64, f64)> {
    let t = grid.points();
    p.sign_flips
        .iter()
        .map(|&k| (t[k.saturating_sub(1)], t[k]))
        .collect()
}

/// `gamma_nm(tau_k)` for all pairs. Returns the couplings and, when both
/// routes were evaluated, the largest off-diagonal disagreement between
/// them.
pub fn gamma_matrix<M: HamiltonianModel + ?Sized>(
    frames: &EigenFrameSequence,
    model: Option<&M>,
    cfg: &SpectralConfig,
) -> Result<(Vec<ComplexMatrix>, Option<f64>)> {
    let dim = frames.dim();
    let grid = frames.grid().points();
    let len = frames.len();

    // Differenced eigenvectors: dphi[k][m][i].
    let mut dphi = vec![vec![vec![Complex64::new(0.0, 0.0); dim]; dim]; len];
    for m in 0..dim {
        for i in 0..dim {
            let series: Vec<Complex64> = (0..len).map(|k| frames.vector(k, m)[i]).collect();
            for (k, d) in differentiate(grid, &series).into_iter().enumerate() {
                dphi[k][m][i] = d;
            }
        }
    }
    let i_unit = Complex64::new(0.0, 1.0);
    let differenced: Vec<ComplexMatrix> = (0..len)
        .map(|k| {
            let mut g = ComplexMatrix::zeros(dim);
            for n in 0..dim {
                for m in 0..dim {
                    g[(n, m)] = i_unit * inner(frames.vector(k, n), &dphi[k][m]);
                }
                // The diagonal of a connection is real.
                g[(n, n)] = Complex64::new(g[(n, n)].re, 0.0);
            }
            g
        })
        .collect();

    let use_analytic = match (cfg.gamma_method, model) {
        (GammaMethod::Differenced, _) | (_, None) => false,
        (GammaMethod::Analytic, Some(model)) => {
            if !model.has_hdot() {
                return Err(Error::InvalidParameter(
                    "analytic couplings requested but the model has no hdot".into(),
                ));
            }
            true
        }
        (GammaMethod::Auto, Some(model)) => model.has_hdot(),
    };
    if !use_analytic {
        return Ok((differenced, None));
    }
    let model = model.expect("checked above");

    let mut out = Vec::with_capacity(len);
    let mut discrepancy = 0.0_f64;
    for (k, &tau) in grid.iter().enumerate() {
        let hdot = model.hdot(tau)?.ok_or_else(|| {
            Error::InvalidParameter(format!("model lost hdot at tau = {tau}"))
        })?;
        let mut g = differenced[k].clone();
        let hphi: Vec<Vec<Complex64>> = (0..dim).map(|m| hdot.apply(frames.vector(k, m))).collect();
        for n in 0..dim {
            for m in 0..dim {
                if n == m {
                    continue;
                }
                let gap = frames.value(k, m) - frames.value(k, n);
                if gap.abs() < cfg.gap_floor {
                    return Err(Error::DegenerateCrossing { tau, gap: gap.abs() });
                }
                let a = i_unit * inner(frames.vector(k, n), &hphi[m]) / gap;
                discrepancy = discrepancy.max((a - differenced[k][(n, m)]).norm());
                g[(n, m)] = a;
            }
        }
        out.push(g);
    }
    if discrepancy > GAMMA_METHOD_DISAGREEMENT {
        return Err(Error::StepTooCoarse {
            tau: grid[0],
            detail: format!(
                "analytic and differenced couplings differ by {discrepancy:e}"
            ),
        });
    }
    Ok((out, Some(discrepancy)))
}

fn pair_phase(
    grid: &TimeGrid,
    frames: &EigenFrameSequence,
    gamma: &[ComplexMatrix],
    n: usize,
    m: usize,
    zero_floor: f64,
) -> Result<PairPhase> {
    let t = grid.points();
    let len = t.len();
    let g: Vec<Complex64> = gamma.iter().map(|g| g[(n, m)]).collect();
    let mask: Vec<bool> = g.iter().map(|z| z.norm() < zero_floor).collect();

    // Unwrap the argument run by run.
    let mut arg = vec![None; len];
    let mut sign_flips = Vec::new();
    for (a, b) in runs(&mask.iter().map(|&x| !x).collect::<Vec<_>>()) {
        let mut acc = g[a].arg();
        arg[a] = Some(acc);
        for k in a + 1..=b {
            let inc = (g[k] / g[k - 1]).arg();
            if inc.abs() > PI - 1e-6 {
                sign_flips.push(k);
            } else if inc.abs() > 0.5 * PI {
                return Err(Error::StepTooCoarse {
                    tau: t[k],
                    detail: format!("arg gamma_{n}{m} moved by {inc:.3} rad in one step"),
                });
            }
            acc += inc;
            arg[k] = Some(acc);
        }
    }

    // int_0^tau (e_n - e_m + gamma_mm - gamma_nn)
    let rate: Vec<f64> = (0..len)
        .map(|k| frames.value(k, n) - frames.value(k, m) + gamma[k][(m, m)].re - gamma[k][(n, n)].re)
        .collect();
    let dynamic = cumulative_integral(t, &rate);
    let theta = (0..len).map(|k| arg[k].map(|a| dynamic[k] + a)).collect();

    // d/dtau arg, differenced inside segments free of masks and sign flips.
    let mut darg = vec![None; len];
    let mut cut = vec![false; len];
    for &k in &sign_flips {
        cut[k] = true;
    }
    for (a, b) in runs(&mask.iter().map(|&x| !x).collect::<Vec<_>>()) {
        let mut start = a;
        for k in a..=b + 1 {
            if k == b + 1 || (k > start && cut[k]) {
                let end = k - 1;
                if end > start {
                    let seg_t = &t[start..=end];
                    let seg: Vec<f64> = arg[start..=end].iter().map(|x| x.unwrap()).collect();
                    for (j, d) in differentiate(seg_t, &seg).into_iter().enumerate() {
                        darg[start + j] = Some(d);
                    }
                }
                start = k;
            }
        }
    }
    // Points whose stencil straddles a sign flip are unreliable.
    for &k in &sign_flips {
        for j in k.saturating_sub(2)..(k + 2).min(len) {
            darg[j] = None;
        }
    }
    let delta = (0..len)
        .map(|k| darg[k].map(|d| gamma[k][(m, m)].re - gamma[k][(n, n)].re + d))
        .collect();

    Ok(PairPhase {
        n,
        m,
        mask,
        arg,
        theta,
        delta,
        sign_flips,
    })
}

/// `Phi_m(tau) = exp(-i int_0^tau (e_m - gamma_mm)) phi_m(tau)` on the grid.
pub fn adiabatic_orbit(
    frames: &EigenFrameSequence,
    flow: &SpectralFlow,
    m: usize,
) -> Vec<Vec<Complex64>> {
    let t = frames.grid().points();
    let rate: Vec<f64> = (0..frames.len())
        .map(|k| frames.value(k, m) - flow.gamma_at(k)[(m, m)].re)
        .collect();
    let phase = cumulative_integral(t, &rate);
    (0..frames.len())
        .map(|k| {
            let ph = Complex64::from_polar(1.0, -phase[k]);
            let mut v: Vec<Complex64> = frames.vector(k, m).iter().map(|z| z * ph).collect();
            let nv = norm(&v);
            v.iter_mut().for_each(|z| *z /= nv);
            v
        })
        .collect()
}

/// Orbits for every level, `orbits[n][k]`.
pub fn adiabatic_orbits(frames: &EigenFrameSequence, flow: &SpectralFlow) -> Vec<Vec<Vec<Complex64>>> {
    (0..frames.dim()).map(|m| adiabatic_orbit(frames, flow, m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{distance, sigma_x, sigma_z};
    use crate::models::{LandauZenerModel, Schedule, SpinHalfModel, SpinHalfParams, StaticModel};

    fn spin(eta: f64, xi: Schedule, horizon: f64) -> SpinHalfModel {
        SpinHalfModel::new(SpinHalfParams::new(eta, xi, horizon).unwrap()).unwrap()
    }

    #[test]
    fn static_frames_are_constant_and_uncoupled() {
        let h = &sigma_z().scale_re(0.7) + &sigma_x().scale_re(0.2);
        let model = StaticModel::new(h, 5.0).unwrap();
        let grid = TimeGrid::uniform(5.0, 50).unwrap();
        let cfg = SpectralConfig::default();
        let frames = track_frames(&model, &grid, &cfg).unwrap();
        for k in 1..frames.len() {
            for n in 0..2 {
                assert_eq!(frames.vector(k, n), frames.vector(0, n));
            }
        }
        let flow = SpectralFlow::compute(&frames, &model, &cfg).unwrap();
        assert_eq!(flow.max_offdiagonal(), 0.0);
        assert!(flow.pair(0, 1).fully_masked());
        assert!(matches!(flow.geometric_potential(1, 0), Err(Error::MaskedInterval { .. })));
        let orbit = adiabatic_orbit(&frames, &flow, 1);
        for (k, tau) in grid.points().iter().enumerate() {
            let e = frames.value(0, 1);
            let want: Vec<Complex64> =
                frames.vector(0, 1).iter().map(|z| z * Complex64::from_polar(1.0, -e * tau)).collect();
            assert!(distance(&orbit[k], &want) < 1e-13);
        }
    }

    #[test]
    fn constant_drive_levels_are_flat() {
        let model = spin(1.0, Schedule::constant(0.1), 10.0);
        let grid = TimeGrid::uniform(10.0, 500).unwrap();
        let frames = track_frames(&model, &grid, &SpectralConfig::default()).unwrap();
        let omega = 1.01f64.sqrt();
        for k in 0..frames.len() {
            assert!((frames.value(k, 0) + omega).abs() < 1e-13);
            assert!((frames.value(k, 1) - omega).abs() < 1e-13);
        }
        assert!(frames.orthonormality_defect() < 1e-12);
        assert!(frames.crossings().iter().all(|c| !c));
    }

    #[test]
    fn gauge_continuity_overlaps_are_real_positive() {
        let model = spin(1.0, Schedule::linear(0.0, 0.1), 10.0);
        let grid = TimeGrid::uniform(10.0, 400).unwrap();
        let frames = track_frames(&model, &grid, &SpectralConfig::default()).unwrap();
        for k in 1..frames.len() {
            for n in 0..2 {
                let ov = inner(frames.vector(k - 1, n), frames.vector(k, n));
                assert!(ov.im.abs() < 1e-14 && ov.re > 0.0);
            }
        }
    }

    #[test]
    fn levels_follow_overlap_through_a_sharp_avoided_crossing() {
        // Near-crossing with coupling 1e-3: sorted order and overlap order
        // disagree on a coarse grid, overlap order wins.
        let model = LandauZenerModel::linear_sweep(1e-3, 1.0, 0.55, 1.0).unwrap();
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let frames = track_frames(&model, &grid, &SpectralConfig::default()).unwrap();
        // The diabatic state |up> starts as the lower level and stays tracked
        // after it has become the upper one.
        assert!(frames.vector(0, 0)[0].norm() > 0.99);
        assert!(frames.vector(10, 0)[0].norm() > 0.99);
        assert!(frames.value(10, 0) > frames.value(10, 1));
        assert!(frames.crossings().iter().any(|&c| c));
    }

    #[test]
    fn degenerate_crossing_is_refused() {
        let model = LandauZenerModel::new(1e-10, Schedule::linear(-1.0, 1.0), 2.0).unwrap();
        let grid = TimeGrid::uniform(2.0, 4).unwrap();
        match track_frames(&model, &grid, &SpectralConfig::default()) {
            Err(Error::DegenerateCrossing { tau, .. }) => assert_eq!(tau, 1.0),
            other => panic!("expected DegenerateCrossing, got {other:?}"),
        }
    }

    /// Diagonal before `tau = 0.5`, rotated by the 5-point DFT after it:
    /// every overlap between the two eigenbases is `1/sqrt(5) < 0.5`.
    struct FourierJump;

    impl HamiltonianModel for FourierJump {
        fn dim(&self) -> usize {
            5
        }
        fn horizon(&self) -> f64 {
            1.0
        }
        fn h(&self, tau: f64) -> Result<ComplexMatrix> {
            let d = ComplexMatrix::from_real_diagonal(&[0.0, 1.0, 2.0, 3.0, 4.0]);
            if tau < 0.5 {
                return Ok(d);
            }
            let mut f = ComplexMatrix::zeros(5);
            for j in 0..5 {
                for k in 0..5 {
                    f[(j, k)] = Complex64::from_polar(1.0 / 5f64.sqrt(), 2.0 * PI * (j * k) as f64 / 5.0);
                }
            }
            let h = f.matmul(&d).matmul(&f.adjoint());
            Ok((&h + &h.adjoint()).scale_re(0.5))
        }
    }

    #[test]
    fn coarse_grid_is_ambiguous() {
        assert!(matches!(
            track_frames(&FourierJump, &TimeGrid::uniform(1.0, 2).unwrap(), &SpectralConfig::default()),
            Err(Error::GaugeAmbiguity { tau, .. }) if tau == 0.5
        ));
    }

    #[test]
    fn coarse_two_level_grid_shows_up_as_a_swap() {
        // With two levels the best overlap is at least 1/sqrt(2); an aliased
        // step is caught as an exchange of energy order instead.
        let model = spin(1.0, Schedule::constant(5.0), 10.0);
        let frames = track_frames(&model, &TimeGrid::uniform(10.0, 8).unwrap(), &SpectralConfig::default()).unwrap();
        assert!(frames.crossings().iter().any(|&c| c));
        let fine = track_frames(&model, &TimeGrid::uniform(10.0, 400).unwrap(), &SpectralConfig::default()).unwrap();
        assert!(fine.crossings().iter().all(|&c| !c));
    }

    #[test]
    fn analytic_and_differenced_couplings_agree() {
        let model = spin(1.0, Schedule::sinusoidal(0.4, 0.2, 0.5, 0.0), 10.0);
        let grid = TimeGrid::uniform(10.0, 2000).unwrap();
        let cfg = SpectralConfig::default();
        let frames = track_frames(&model, &grid, &cfg).unwrap();
        let flow = SpectralFlow::compute(&frames, &model, &cfg).unwrap();
        assert!(flow.method_discrepancy.unwrap() < 1e-5);
        assert!(flow.hermiticity_defect() < 1e-8);
        for g in 0..frames.len() {
            for n in 0..2 {
                assert!(flow.gamma_at(g)[(n, n)].im == 0.0);
            }
        }
    }

    #[test]
    fn constant_phase_rate_gives_linear_theta() {
        // gamma constant real positive and a constant gap: theta_nm = g tau.
        let grid = TimeGrid::uniform(2.0, 40).unwrap();
        let len = grid.len();
        let values = vec![vec![-0.5, 1.0]; len];
        let vectors = vec![vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]]; len];
        let frames = EigenFrameSequence::from_parts(grid.clone(), values, vectors).unwrap();
        let mut g = ComplexMatrix::zeros(2);
        g[(0, 1)] = Complex64::new(0.3, 0.0);
        g[(1, 0)] = Complex64::new(0.3, 0.0);
        let gamma = vec![g; len];
        let pair = pair_phase(&grid, &frames, &gamma, 0, 1, 1e-12).unwrap();
        for (k, tau) in grid.points().iter().enumerate() {
            assert!((pair.theta[k].unwrap() - (-1.5 * tau)).abs() < 1e-13);
            assert!(pair.delta[k].unwrap().abs() < 1e-13);
        }
    }

    #[test]
    fn theta_starts_at_arg_gamma() {
        let model = spin(1.0, Schedule::linear(0.05, 0.02), 8.0);
        let grid = TimeGrid::uniform(8.0, 800).unwrap();
        let cfg = SpectralConfig::default();
        let frames = track_frames(&model, &grid, &cfg).unwrap();
        let flow = SpectralFlow::compute(&frames, &model, &cfg).unwrap();
        for (n, m) in [(0, 1), (1, 0)] {
            let theta = flow.theta_phase(n, m).unwrap();
            assert!((theta[0] - flow.gamma(n, m)[0].arg()).abs() < 1e-15);
        }
    }

    #[test]
    fn theta_rate_identity() {
        let model = spin(0.8, Schedule::sinusoidal(0.5, 0.3, 0.9, 0.1), 12.0);
        let grid = TimeGrid::uniform(12.0, 3000).unwrap();
        let cfg = SpectralConfig::default();
        let frames = track_frames(&model, &grid, &cfg).unwrap();
        let flow = SpectralFlow::compute(&frames, &model, &cfg).unwrap();
        for (n, m) in [(0, 1), (1, 0)] {
            let theta = flow.theta_phase(n, m).unwrap();
            let rate = differentiate(grid.points(), &theta);
            let delta = flow.geometric_potential(m, n).unwrap();
            let (en, em) = (flow.energy(n), flow.energy(m));
            for k in 2..grid.len() - 2 {
                assert!((rate[k] - (en[k] - em[k] + delta[k])).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn real_symmetric_model_has_no_geometric_potential() {
        let model = LandauZenerModel::linear_sweep(0.5, 1.0, 3.0, 6.0).unwrap();
        let grid = TimeGrid::uniform(6.0, 600).unwrap();
        let cfg = SpectralConfig::default();
        let frames = track_frames(&model, &grid, &cfg).unwrap();
        let flow = SpectralFlow::compute(&frames, &model, &cfg).unwrap();
        let delta = flow.geometric_potential(1, 0).unwrap();
        assert!(delta.iter().all(|d| d.abs() < 1e-10));
    }
}
