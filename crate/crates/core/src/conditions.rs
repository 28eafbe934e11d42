//! Adiabatic conditions evaluated on a spectral flow.
//!
//! For the initial level `m` and every other level `n`:
//!
//! * traditional: `|gamma_nm| / |e_n - e_m|`, small everywhere;
//! * pointwise: `|gamma_nm| / |e_n - e_m + Delta_mn|`, small everywhere
//!   (equivalently `|gamma_nm| / |theta_nm'|`);
//! * integral: `|int (e_n - e_m + Delta_mn)| >= R int |gamma_nm|`.
//!
//! "Small" means at most `1/R`. The pointwise and integral tests are only
//! claimed when the phase `theta_nm` turns fast enough and far enough; a
//! test that passes without those preconditions is reported
//! [`Verdict::Inapplicable`]. A test that fails is reported as failing
//! regardless.
//!
//! The traditional ratio has no displayed formula in the literature it
//! comes from; the coupling-over-gap form used here is a reconstruction.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cumulative_integral, differentiate};
use crate::linalg::inner;
use crate::models::HamiltonianModel;
use crate::spectral::{EigenFrameSequence, SpectralConfig, SpectralFlow};

pub const DEFAULT_THRESHOLD: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }

    fn gated(raw: bool, preconditions: bool) -> Self {
        match (raw, preconditions) {
            (false, _) => Verdict::Fail,
            (true, true) => Verdict::Pass,
            (true, false) => Verdict::Inapplicable,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inapplicable => "inapplicable",
        }
    }
}

/// Phase preconditions on `theta_nm` over a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFlags {
    /// `min |theta'| >= 1`
    pub rate_ok: bool,
    /// `|theta(end) - theta(start)| >= 2 pi`
    pub sweep_ok: bool,
    pub min_rate: f64,
    pub sweep: f64,
}

impl PhaseFlags {
    pub fn all(&self) -> bool {
        self.rate_ok && self.sweep_ok
    }
}

/// Evaluate both phase flags on an unwrapped `theta` series.
pub fn phase_preconditions(grid: &[f64], theta: &[f64]) -> PhaseFlags {
    let rate = differentiate(grid, theta);
    let min_rate = rate.iter().map(|r| r.abs()).fold(f64::INFINITY, f64::min);
    let sweep = (theta[theta.len() - 1] - theta[0]).abs();
    PhaseFlags {
        rate_ok: min_rate >= 1.0,
        sweep_ok: sweep >= 2.0 * PI,
        min_rate,
        sweep,
    }
}

/// Index range `[start, end]` of the grid an evaluation covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn full(flow: &SpectralFlow) -> Self {
        Self {
            start: 0,
            end: flow.grid().len() - 1,
        }
    }

    /// Smallest window of grid points covering `[a, b]`.
    pub fn span(flow: &SpectralFlow, a: f64, b: f64) -> Result<Self> {
        let (start, end) = flow.grid().window_indices(a, b)?;
        Ok(Self { start, end })
    }

    fn check(&self, len: usize) -> Result<()> {
        if self.start >= self.end || self.end >= len {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}] does not fit a grid of {len} points",
                self.start, self.end
            )));
        }
        Ok(())
    }

    fn range(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Pointwise ratios for one pair.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PointwiseResult {
    /// `max |gamma_nm| / |e_n - e_m|`
    pub max_traditional_ratio: f64,
    /// `max |gamma_nm| / |e_n - e_m + Delta_mn|`
    pub max_pointwise_ratio: f64,
    /// `max |gamma_nm| / |theta_nm'|`
    pub max_pointwise_ratio_theta: f64,
    /// `max |theta_nm' - (e_n - e_m + Delta_mn)|` at interior points.
    pub identity_defect: f64,
    /// Per-point series over the window; `None` where `Delta` is undefined.
    #[serde(skip)]
    pub traditional_ratio: Vec<f64>,
    #[serde(skip)]
    pub pointwise_ratio: Vec<Option<f64>>,
    #[serde(skip)]
    pub pointwise_ratio_theta: Vec<Option<f64>>,
}

/// `|int (e_n - e_m + Delta_mn)|` against `int |gamma_nm|` over a window.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct IntegralResult {
    pub lhs: f64,
    pub rhs: f64,
}

/// Everything evaluated for one pair `(n, m)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairCondition {
    pub n: usize,
    pub m: usize,
    /// True when `gamma_nm` vanishes on the whole window.
    pub vacuous: bool,
    pub pointwise: PointwiseResult,
    pub integral: IntegralResult,
    /// Absent for vacuous pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseFlags>,
    pub traditional_verdict: Verdict,
    pub pointwise_verdict: Verdict,
    pub integral_verdict: Verdict,
}

/// Conditions for all pairs `(n, m)` with `m` the initial level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub initial_level: usize,
    pub threshold: f64,
    pub window: (f64, f64),
    pub pairs: Vec<PairCondition>,
}

impl ConditionReport {
    fn combined(&self, pick: impl Fn(&PairCondition) -> Verdict) -> Verdict {
        let verdicts: Vec<Verdict> = self.pairs.iter().map(pick).collect();
        if verdicts.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if verdicts.contains(&Verdict::Inapplicable) {
            Verdict::Inapplicable
        } else {
            Verdict::Pass
        }
    }

    pub fn traditional(&self) -> Verdict {
        self.combined(|p| p.traditional_verdict)
    }

    pub fn pointwise(&self) -> Verdict {
        self.combined(|p| p.pointwise_verdict)
    }

    pub fn integral(&self) -> Verdict {
        self.combined(|p| p.integral_verdict)
    }

    pub fn pair(&self, n: usize) -> Option<&PairCondition> {
        self.pairs.iter().find(|p| p.n == n)
    }

    /// Largest pointwise ratio over all pairs.
    pub fn max_pointwise_ratio(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.pointwise.max_pointwise_ratio)
            .fold(0.0, f64::max)
    }

    /// Plain-text table, one row per pair.
    pub fn table(&self) -> String {
        let mut out = format!(
            "pair   trad_ratio   pw_ratio     int_lhs      int_rhs      trad  pointwise     integral      (R = {})\n",
            self.threshold
        );
        for p in &self.pairs {
            out.push_str(&format!(
                "({},{})  {:<12.4e} {:<12.4e} {:<12.4e} {:<12.4e} {:<5} {:<13} {}\n",
                p.n,
                p.m,
                p.pointwise.max_traditional_ratio,
                p.pointwise.max_pointwise_ratio,
                p.integral.lhs,
                p.integral.rhs,
                p.traditional_verdict.as_str(),
                p.pointwise_verdict.as_str(),
                p.integral_verdict.as_str(),
            ));
            if p.vacuous {
                out.truncate(out.len() - 1);
                out.push_str("  (no coupling)\n");
            }
        }
        out
    }
}

fn check_threshold(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::InvalidParameter(format!("threshold must be > 1, got {r}")));
    }
    Ok(())
}

fn masked_error(flow: &SpectralFlow, n: usize, m: usize) -> Error {
    let p = flow.pair(n, m);
    Error::MaskedInterval {
        n,
        m,
        spans: p.masked_spans(flow.grid()),
    }
}

/// Pointwise and traditional ratios for the pair `(n, m)` on `window`.
/// Both forms of the pointwise ratio are evaluated; they agree through
/// `theta_nm' = e_n - e_m + Delta_mn`. Points next to a sign flip of
/// `gamma_nm`, where `Delta` is undefined, are skipped.
pub fn pointwise_condition(flow: &SpectralFlow, n: usize, m: usize, window: Window) -> Result<PointwiseResult> {
    window.check(flow.grid().len())?;
    let pair = flow.pair(n, m);
    let masked = window.range().filter(|&k| pair.mask[k]).count();
    if masked == window.end - window.start + 1 {
        return Ok(PointwiseResult {
            traditional_ratio: vec![0.0; masked],
            pointwise_ratio: vec![Some(0.0); masked],
            pointwise_ratio_theta: vec![Some(0.0); masked],
            ..Default::default()
        });
    }
    if masked > 0 {
        return Err(masked_error(flow, n, m));
    }
    let t = &flow.grid().points()[window.start..=window.end];
    let theta: Vec<f64> = window.range().map(|k| pair.theta[k].expect("unmasked")).collect();
    let theta_rate = differentiate(t, &theta);
    let mut out = PointwiseResult::default();
    for (j, k) in window.range().enumerate() {
        let g = flow.gamma_at(k)[(n, m)].norm();
        let e = &flow.energies()[k];
        let gap = e[n] - e[m];
        let trad = g / gap.abs();
        out.max_traditional_ratio = out.max_traditional_ratio.max(trad);
        out.traditional_ratio.push(trad);

        let expanded = pair.delta[k].map(|d| gap + d);
        let pw = expanded.map(|den| g / den.abs());
        let pw_theta = g / theta_rate[j].abs();
        if let Some(v) = pw {
            out.max_pointwise_ratio = out.max_pointwise_ratio.max(v);
        }
        out.max_pointwise_ratio_theta = out.max_pointwise_ratio_theta.max(pw_theta);
        out.pointwise_ratio.push(pw);
        out.pointwise_ratio_theta.push(Some(pw_theta));
        let interior = j > 0 && k < window.end;
        if let (true, Some(den)) = (interior, expanded) {
            out.identity_defect = out.identity_defect.max((theta_rate[j] - den).abs());
        }
    }
    Ok(out)
}

/// `lhs = |int_window (e_n - e_m + Delta_mn)|` and `rhs = int_window |gamma_nm|`.
/// The left side is evaluated as the change of `theta_nm` across the window,
/// which is the same integral without differencing the argument.
pub fn integral_condition(flow: &SpectralFlow, n: usize, m: usize, window: Window) -> Result<IntegralResult> {
    window.check(flow.grid().len())?;
    let pair = flow.pair(n, m);
    let masked = window.range().filter(|&k| pair.mask[k]).count();
    if masked == window.end - window.start + 1 {
        return Ok(IntegralResult::default());
    }
    if masked > 0 {
        return Err(masked_error(flow, n, m));
    }
    let t = &flow.grid().points()[window.start..=window.end];
    let lhs = (pair.theta[window.end].expect("unmasked") - pair.theta[window.start].expect("unmasked")).abs();
    let g: Vec<f64> = window.range().map(|k| flow.gamma_at(k)[(n, m)].norm()).collect();
    let rhs = *cumulative_integral(t, &g).last().expect("non-empty window");
    Ok(IntegralResult { lhs, rhs })
}

/// All three conditions for every pair `(n, m)` with `n != m`.
pub fn evaluate_conditions(flow: &SpectralFlow, m: usize, threshold: f64, window: Window) -> Result<ConditionReport> {
    check_threshold(threshold)?;
    if m >= flow.dim() {
        return Err(Error::InvalidParameter(format!("level {m} out of range")));
    }
    window.check(flow.grid().len())?;
    let t = flow.grid().points();
    let limit = 1.0 / threshold;
    let mut pairs = Vec::new();
    for n in (0..flow.dim()).filter(|&n| n != m) {
        let pointwise = pointwise_condition(flow, n, m, window)?;
        let integral = integral_condition(flow, n, m, window)?;
        let pair = flow.pair(n, m);
        let vacuous = window.range().all(|k| pair.mask[k]);
        let traditional_verdict = if pointwise.max_traditional_ratio <= limit {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let (phase, pointwise_verdict, integral_verdict) = if vacuous {
            (None, Verdict::Pass, Verdict::Pass)
        } else {
            let theta: Vec<f64> = window.range().map(|k| pair.theta[k].expect("unmasked")).collect();
            let flags = phase_preconditions(&t[window.start..=window.end], &theta);
            (
                Some(flags),
                Verdict::gated(pointwise.max_pointwise_ratio <= limit, flags.all()),
                Verdict::gated(integral.lhs >= threshold * integral.rhs, flags.all()),
            )
        };
        pairs.push(PairCondition {
            n,
            m,
            vacuous,
            pointwise,
            integral,
            phase,
            traditional_verdict,
            pointwise_verdict,
            integral_verdict,
        });
    }
    Ok(ConditionReport {
        initial_level: m,
        threshold,
        window: (t[window.start], t[window.end]),
        pairs,
    })
}

/// Outcome of comparing a system with its dual.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualResidual {
    /// `max |gamma^b_nm - (-e^a_m delta_nm + gamma^a_nm)|`
    pub residual: f64,
    /// `level_map[n]` is the tracked dual level carrying `U^dagger |n^a>`.
    pub level_map: Vec<usize>,
    /// `max |e^b_{map(n)} + e^a_n|`
    pub eigenvalue_defect: f64,
}

const LEVEL_MATCH_MIN: f64 = 0.9;

/// Check `gamma^b_nm = -e^a_m delta_nm + gamma^a_nm` for dual frames
/// `|n^b> = U^dagger |n^a>`. The couplings of `b` are differenced from those
/// frames; `b_frames` (tracked independently from `h^b`) only fix the level
/// correspondence.
pub fn dual_gamma_residual<M: HamiltonianModel + ?Sized>(
    base: &M,
    a_frames: &EigenFrameSequence,
    a_flow: &SpectralFlow,
    b_frames: &EigenFrameSequence,
    cfg: &SpectralConfig,
) -> Result<DualResidual> {
    let grid = a_frames.grid();
    if b_frames.grid() != grid || a_flow.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let dim = a_frames.dim();
    let mut vectors = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for (k, &tau) in grid.points().iter().enumerate() {
        let u = base.propagator(tau)?.ok_or(Error::MissingPropagator)?.u;
        let ud = u.adjoint();
        vectors.push((0..dim).map(|n| ud.apply(a_frames.vector(k, n))).collect::<Vec<_>>());
        values.push((0..dim).map(|n| -a_frames.value(k, n)).collect::<Vec<_>>());
    }

    let mut level_map: Vec<Option<usize>> = vec![None; dim];
    for (k, &tau) in grid.points().iter().enumerate() {
        for n in 0..dim {
            let (best, overlap) = (0..dim)
                .map(|j| (j, inner(b_frames.vector(k, j), &vectors[k][n]).norm()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if overlap < LEVEL_MATCH_MIN {
                return Err(Error::LevelMatchingFailure { tau, overlap });
            }
            match level_map[n] {
                None => level_map[n] = Some(best),
                Some(j) if j != best => return Err(Error::LevelMatchingFailure { tau, overlap }),
                _ => {}
            }
        }
    }
    let level_map: Vec<usize> = level_map.into_iter().map(|j| j.expect("grid non-empty")).collect();

    let eigenvalue_defect = (0..grid.len())
        .flat_map(|k| (0..dim).map(move |n| (k, n)))
        .map(|(k, n)| (b_frames.value(k, level_map[n]) + a_frames.value(k, n)).abs())
        .fold(0.0, f64::max);

    let transported = EigenFrameSequence::from_parts(grid.clone(), values, vectors)?;
    let b_flow = SpectralFlow::from_frames(&transported, cfg)?;
    let mut residual = 0.0_f64;
    for k in 0..grid.len() {
        let gb = b_flow.gamma_at(k);
        let ga = a_flow.gamma_at(k);
        for n in 0..dim {
            for m in 0..dim {
                let shift = if n == m { -a_frames.value(k, m) } else { 0.0 };
                let want = ga[(n, m)] + Complex64::new(shift, 0.0);
                residual = residual.max((gb[(n, m)] - want).norm());
            }
        }
    }
    Ok(DualResidual {
        residual,
        level_map,
        eigenvalue_defect,
    })
}

/// One pair in the dual comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualPairComparison {
    pub n: usize,
    pub m: usize,
    pub ratio_a: f64,
    pub ratio_b: f64,
    /// `max |gamma^a_nm| / |Delta^a_mn|`, which the dual ratio should equal.
    pub predicted_b: f64,
    /// Pointwise `max |ratio_b - |gamma^a|/|Delta^a||` relative to `max(1, value)`.
    pub identity_defect: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualComparison {
    pub pairs: Vec<DualPairComparison>,
    pub a_pointwise: Verdict,
    pub b_pointwise: Verdict,
    pub summary: String,
}

/// Put the pointwise ratios of a system and its dual side by side and check
/// that the dual's ratio is `|gamma^a_nm| / |Delta^a_mn|`. `b_report` must
/// have been built for the initial level `level_map[a_report.initial_level]`.
pub fn compare_dual_conditions(
    a_flow: &SpectralFlow,
    a_report: &ConditionReport,
    b_report: &ConditionReport,
    level_map: &[usize],
) -> Result<DualComparison> {
    let m = a_report.initial_level;
    if b_report.initial_level != level_map[m] {
        return Err(Error::InvalidParameter(
            "dual report was built for a different initial level".into(),
        ));
    }
    let start = a_flow
        .grid()
        .points()
        .iter()
        .position(|&t| t >= a_report.window.0)
        .unwrap_or(0);
    let mut pairs = Vec::new();
    for pa in &a_report.pairs {
        let n = pa.n;
        let pb = b_report
            .pair(level_map[n])
            .ok_or_else(|| Error::InvalidParameter(format!("dual report lacks pair for level {n}")))?;
        let pair = a_flow.pair(n, m);
        let mut predicted = 0.0_f64;
        let mut defect = 0.0_f64;
        for (j, rb) in pb.pointwise.pointwise_ratio.iter().enumerate() {
            let k = start + j;
            let g = a_flow.gamma_at(k)[(n, m)].norm();
            let want = if pa.vacuous {
                Some(0.0)
            } else {
                pair.delta[k].map(|d| g / d.abs())
            };
            if let (Some(rb), Some(want)) = (rb, want) {
                predicted = predicted.max(want);
                defect = defect.max((rb - want).abs() / want.abs().max(1.0));
            }
        }
        pairs.push(DualPairComparison {
            n,
            m,
            ratio_a: pa.pointwise.max_pointwise_ratio,
            ratio_b: pb.pointwise.max_pointwise_ratio,
            predicted_b: predicted,
            identity_defect: defect,
        });
    }
    let a_pointwise = a_report.pointwise();
    let b_pointwise = b_report.pointwise();
    let summary = match (a_pointwise.passed(), b_pointwise.passed()) {
        (true, true) => "both adiabatic",
        (true, false) => "a adiabatic, b not guaranteed",
        (false, true) => "b adiabatic, a not guaranteed",
        (false, false) => "neither guaranteed",
    }
    .to_string();
    Ok(DualComparison {
        pairs,
        a_pointwise,
        b_pointwise,
        summary,
    })
}
