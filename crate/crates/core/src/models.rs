//! Time-dependent Hamiltonians.
//!
//! A [`HamiltonianModel`] yields `h(tau)` and, when it can, the analytic
//! derivative and an exact propagator `U(tau)` with `h = i U' U^dagger`.
//! The spin-half rotating-field model has all three; [`DualModel`] builds
//! `h^b = i U'^dagger U` from any model that exposes its propagator.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pauli_exp, sigma_x, sigma_y, sigma_z, ComplexMatrix};
use crate::quadrature::{adaptive_simpson, DEFAULT_TOL};

/// Exact propagator and its time derivative at one instant.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub u: ComplexMatrix,
    pub udot: ComplexMatrix,
}

pub trait HamiltonianModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Largest `tau` the model is defined for.
    fn horizon(&self) -> f64;

    fn h(&self, tau: f64) -> Result<ComplexMatrix>;

    /// Analytic `dh/dtau`, when the model knows it.
    fn hdot(&self, _tau: f64) -> Result<Option<ComplexMatrix>> {
        Ok(None)
    }

    /// `(U, dU/dtau)` with `U(0) = I` and `i U' U^dagger = h`.
    fn propagator(&self, _tau: f64) -> Result<Option<Propagator>> {
        Ok(None)
    }

    fn has_hdot(&self) -> bool {
        matches!(self.hdot(0.0), Ok(Some(_)))
    }

    fn has_propagator(&self) -> bool {
        matches!(self.propagator(0.0), Ok(Some(_)))
    }
}

macro_rules! forward_model {
    ($($ty:ty),*) => {$(
        impl<M: HamiltonianModel + ?Sized> HamiltonianModel for $ty {
            fn dim(&self) -> usize { (**self).dim() }
            fn horizon(&self) -> f64 { (**self).horizon() }
            fn h(&self, tau: f64) -> Result<ComplexMatrix> { (**self).h(tau) }
            fn hdot(&self, tau: f64) -> Result<Option<ComplexMatrix>> { (**self).hdot(tau) }
            fn propagator(&self, tau: f64) -> Result<Option<Propagator>> { (**self).propagator(tau) }
            fn has_hdot(&self) -> bool { (**self).has_hdot() }
            fn has_propagator(&self) -> bool { (**self).has_propagator() }
        }
    )*};
}
forward_model!(&M, Box<M>, Arc<M>);

fn check_domain(tau: f64, horizon: f64) -> Result<()> {
    // Tolerate rounding at the ends of a grid built as k * dt.
    let slack = 1e-12 * horizon.max(1.0);
    if !(tau >= -slack && tau <= horizon + slack) {
        return Err(Error::DomainViolation {
            tau,
            lo: 0.0,
            hi: horizon,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Schedules

/// Serialized form of a [`Schedule`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant {
        value: f64,
    },
    Linear {
        start: f64,
        slope: f64,
    },
    /// `offset + amplitude * sin(frequency * tau + phase)`
    Sinusoidal {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Tabulated {
        tau: Vec<f64>,
        values: Vec<f64>,
    },
}

/// A scalar control `xi(tau)` with its derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleSpec", into = "ScheduleSpec")]
pub enum Schedule {
    Constant(f64),
    Linear { start: f64, slope: f64 },
    Sinusoidal { offset: f64, amplitude: f64, frequency: f64, phase: f64 },
    Tabulated(CubicSpline),
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Constant(value)
    }

    pub fn linear(start: f64, slope: f64) -> Self {
        Schedule::Linear { start, slope }
    }

    pub fn sinusoidal(offset: f64, amplitude: f64, frequency: f64, phase: f64) -> Self {
        Schedule::Sinusoidal {
            offset,
            amplitude,
            frequency,
            phase,
        }
    }

    pub fn tabulated(tau: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Schedule::Tabulated(CubicSpline::new(tau, values)?))
    }

    pub fn value(&self, tau: f64) -> Result<f64> {
        Ok(match self {
            Schedule::Constant(v) => *v,
            Schedule::Linear { start, slope } => start + slope * tau,
            Schedule::Sinusoidal {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (frequency * tau + phase).sin(),
            Schedule::Tabulated(s) => s.value(tau)?,
        })
    }

    pub fn derivative(&self, tau: f64) -> Result<f64> {
        Ok(match self {
            Schedule::Constant(_) => 0.0,
            Schedule::Linear { slope, .. } => *slope,
            Schedule::Sinusoidal {
                amplitude,
                frequency,
                phase,
                ..
            } => amplitude * frequency * (frequency * tau + phase).cos(),
            Schedule::Tabulated(s) => s.derivative(tau)?,
        })
    }

    /// Checks the schedule is defined and finite on `[0, horizon]`.
    pub fn validate_on(&self, horizon: f64) -> Result<()> {
        if let Schedule::Tabulated(s) = self {
            let (lo, hi) = s.span();
            if lo > 0.0 || hi < horizon {
                return Err(Error::InvalidSchedule(format!(
                    "table covers [{lo}, {hi}] but the horizon is [0, {horizon}]"
                )));
            }
        }
        for tau in sample_points(horizon, 2000) {
            let v = self.value(tau)?;
            let d = self.derivative(tau)?;
            if !v.is_finite() || !d.is_finite() {
                return Err(Error::InvalidSchedule(format!("non-finite value at tau = {tau}")));
            }
        }
        Ok(())
    }

    fn samples_on(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        let mut points: Vec<f64> = (0..=2000).map(|k| a + (b - a) * k as f64 / 2000.0).collect();
        if let Schedule::Tabulated(s) = self {
            points.extend(s.knots().iter().copied().filter(|t| *t >= a && *t <= b));
        }
        points.into_iter().map(|t| self.value(t)).collect()
    }

    /// Smallest sampled value on `[a, b]` (exact for monotone kinds, knots
    /// included for tables).
    pub fn min_on(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.samples_on(a, b)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Largest sampled value on `[a, b]`.
    pub fn max_on(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.samples_on(a, b)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// The value of a constant schedule.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Schedule::Constant(v) => Some(*v),
            _ => None,
        }
    }
}

fn sample_points(horizon: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |k| horizon * k as f64 / n as f64)
}

impl TryFrom<ScheduleSpec> for Schedule {
    type Error = Error;
    fn try_from(spec: ScheduleSpec) -> Result<Self> {
        let all_finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let s = match spec {
            ScheduleSpec::Constant { value } => Schedule::Constant(value),
            ScheduleSpec::Linear { start, slope } => Schedule::Linear { start, slope },
            ScheduleSpec::Sinusoidal {
                offset,
                amplitude,
                frequency,
                phase,
            } => Schedule::Sinusoidal {
                offset,
                amplitude,
                frequency,
                phase,
            },
            ScheduleSpec::Tabulated { tau, values } => return Schedule::tabulated(tau, values),
        };
        let params: Vec<f64> = match &s {
            Schedule::Constant(v) => vec![*v],
            Schedule::Linear { start, slope } => vec![*start, *slope],
            Schedule::Sinusoidal {
                offset,
                amplitude,
                frequency,
                phase,
            } => vec![*offset, *amplitude, *frequency, *phase],
            Schedule::Tabulated(_) => vec![],
        };
        if !all_finite(&params) {
            return Err(Error::InvalidSchedule("non-finite schedule parameter".into()));
        }
        Ok(s)
    }
}

impl From<Schedule> for ScheduleSpec {
    fn from(s: Schedule) -> Self {
        match s {
            Schedule::Constant(value) => ScheduleSpec::Constant { value },
            Schedule::Linear { start, slope } => ScheduleSpec::Linear { start, slope },
            Schedule::Sinusoidal {
                offset,
                amplitude,
                frequency,
                phase,
            } => ScheduleSpec::Sinusoidal {
                offset,
                amplitude,
                frequency,
                phase,
            },
            Schedule::Tabulated(s) => ScheduleSpec::Tabulated {
                tau: s.tau,
                values: s.values,
            },
        }
    }
}

/// Natural cubic spline through tabulated points. Evaluation outside the
/// table is an error.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    tau: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(tau: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if tau.len() != values.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} knots but {} values",
                tau.len(),
                values.len()
            )));
        }
        if tau.len() < 4 {
            return Err(Error::InvalidSchedule(format!(
                "tabulated schedule needs at least 4 points, got {}",
                tau.len()
            )));
        }
        if tau.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSchedule("non-finite table entry".into()));
        }
        if tau.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSchedule("table knots must be strictly increasing".into()));
        }
        let n = tau.len();
        // Tridiagonal solve for the second derivatives, natural end conditions.
        let mut second = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (tau[i] - tau[i - 1]) / (tau[i + 1] - tau[i - 1]);
            let p = sig * second[i - 1] + 2.0;
            second[i] = (sig - 1.0) / p;
            let slope_diff = (values[i + 1] - values[i]) / (tau[i + 1] - tau[i])
                - (values[i] - values[i - 1]) / (tau[i] - tau[i - 1]);
            u[i] = (6.0 * slope_diff / (tau[i + 1] - tau[i - 1]) - sig * u[i - 1]) / p;
        }
        second[n - 1] = 0.0;
        for k in (0..n - 1).rev() {
            second[k] = second[k] * second[k + 1] + u[k];
        }
        second[0] = 0.0;
        Ok(Self { tau, values, second })
    }

    pub fn span(&self) -> (f64, f64) {
        (self.tau[0], *self.tau.last().unwrap())
    }

    pub fn knots(&self) -> &[f64] {
        &self.tau
    }

    fn locate(&self, t: f64) -> Result<(usize, f64, f64, f64)> {
        let (lo, hi) = self.span();
        let slack = 1e-12 * (hi - lo).max(1.0);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::DomainViolation { tau: t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        let k = match self.tau.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(k) => k.min(self.tau.len() - 2),
            Err(k) => k - 1,
        };
        let h = self.tau[k + 1] - self.tau[k];
        let a = (self.tau[k + 1] - t) / h;
        let b = (t - self.tau[k]) / h;
        Ok((k, h, a, b))
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let (k, h, a, b) = self.locate(t)?;
        let (y, m) = (&self.values, &self.second);
        Ok(a * y[k] + b * y[k + 1] + ((a * a * a - a) * m[k] + (b * b * b - b) * m[k + 1]) * h * h / 6.0)
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        let (k, h, a, b) = self.locate(t)?;
        let (y, m) = (&self.values, &self.second);
        Ok((y[k + 1] - y[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m[k] + (3.0 * b * b - 1.0) / 6.0 * h * m[k + 1])
    }
}

/// `int_0^tau xi` with a lazily built table of anchor integrals, so repeated
/// queries only integrate from the nearest anchor.
#[derive(Debug)]
pub struct ScheduleIntegral {
    schedule: Schedule,
    horizon: f64,
    anchors: OnceLock<Result<Vec<f64>>>,
}

const ANCHORS: usize = 1024;

impl Clone for ScheduleIntegral {
    fn clone(&self) -> Self {
        Self::new(self.schedule.clone(), self.horizon)
    }
}

impl ScheduleIntegral {
    pub fn new(schedule: Schedule, horizon: f64) -> Self {
        Self {
            schedule,
            horizon,
            anchors: OnceLock::new(),
        }
    }

    fn spacing(&self) -> f64 {
        self.horizon / ANCHORS as f64
    }

    fn integrand(&self) -> impl Fn(f64) -> f64 + '_ {
        |t| self.schedule.value(t).unwrap_or(f64::NAN)
    }

    fn anchors(&self) -> Result<&Vec<f64>> {
        let built = self.anchors.get_or_init(|| {
            let h = self.spacing();
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(ANCHORS + 1);
            out.push(0.0);
            for k in 0..ANCHORS {
                let piece = adaptive_simpson(
                    self.integrand(),
                    k as f64 * h,
                    ((k + 1) as f64 * h).min(self.horizon),
                    DEFAULT_TOL / ANCHORS as f64,
                )?;
                acc += piece;
                out.push(acc);
            }
            Ok(out)
        });
        match built {
            Ok(v) => Ok(v),
            Err(e) => Err(match e {
                Error::QuadratureFailure { a, b } => Error::QuadratureFailure { a: *a, b: *b },
                other => Error::NoConvergence(other.to_string()),
            }),
        }
    }

    pub fn integral(&self, tau: f64) -> Result<f64> {
        check_domain(tau, self.horizon)?;
        let tau = tau.clamp(0.0, self.horizon);
        let anchors = self.anchors()?;
        let h = self.spacing();
        let k = ((tau / h).floor() as usize).min(ANCHORS);
        let base = k as f64 * h;
        let rest = adaptive_simpson(self.integrand(), base, tau, DEFAULT_TOL)?;
        Ok(anchors[k] + rest)
    }
}

// ---------------------------------------------------------------------------
// Spin-half rotating-field model

/// `h(tau) = eta sigma_z + xi(tau) (sigma_x cos 2 eta tau + sigma_y sin 2 eta tau)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinHalfParams {
    pub eta: f64,
    pub xi: Schedule,
    pub horizon: f64,
}

impl SpinHalfParams {
    pub fn new(eta: f64, xi: Schedule, horizon: f64) -> Result<Self> {
        let p = Self { eta, xi, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        self.xi.validate_on(self.horizon)?;
        let min = self.xi.min_on(0.0, self.horizon)?;
        if min < 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "xi must be non-negative on the horizon, min = {min}"
            )));
        }
        Ok(())
    }

    /// `Omega(tau) = sqrt(xi^2 + eta^2)`
    pub fn omega(&self, tau: f64) -> Result<f64> {
        Ok(self.xi.value(tau)?.hypot(self.eta))
    }
}

pub fn spin_half_h(p: &SpinHalfParams, tau: f64) -> Result<ComplexMatrix> {
    check_domain(tau, p.horizon)?;
    let xi = p.xi.value(tau)?;
    let (s, c) = (2.0 * p.eta * tau).sin_cos();
    let mut h = sigma_z().scale_re(p.eta);
    h[(0, 1)] = Complex64::new(xi * c, -xi * s);
    h[(1, 0)] = Complex64::new(xi * c, xi * s);
    Ok(h)
}

pub fn spin_half_hdot(p: &SpinHalfParams, tau: f64) -> Result<ComplexMatrix> {
    check_domain(tau, p.horizon)?;
    let xi = p.xi.value(tau)?;
    let xid = p.xi.derivative(tau)?;
    let w = 2.0 * p.eta;
    let (s, c) = (w * tau).sin_cos();
    let ax = xid * c - xi * w * s;
    let ay = xid * s + xi * w * c;
    Ok(&sigma_x().scale_re(ax) + &sigma_y().scale_re(ay))
}

fn spin_half_propagator_with(p: &SpinHalfParams, tau: f64, area: f64) -> Result<Propagator> {
    let xi = p.xi.value(tau)?;
    let z = pauli_exp(&sigma_z(), p.eta * tau);
    let x = pauli_exp(&sigma_x(), area);
    let u = z.matmul(&x);
    let minus_i = Complex64::new(0.0, -1.0);
    let udot = &sigma_z().matmul(&u).scale(minus_i * p.eta) + &u.matmul(&sigma_x()).scale(minus_i * xi);
    Ok(Propagator { u, udot })
}

/// `U(tau) = exp(-i sigma_z eta tau) exp(-i sigma_x int_0^tau xi)` and its
/// derivative, with the integral taken by adaptive Simpson from 0.
pub fn spin_half_propagator(p: &SpinHalfParams, tau: f64) -> Result<Propagator> {
    check_domain(tau, p.horizon)?;
    let xi = &p.xi;
    let area = adaptive_simpson(|t| xi.value(t).unwrap_or(f64::NAN), 0.0, tau, DEFAULT_TOL)?;
    spin_half_propagator_with(p, tau, area)
}

#[derive(Debug, Clone)]
pub struct SpinHalfModel {
    params: SpinHalfParams,
    area: ScheduleIntegral,
}

impl SpinHalfModel {
    pub fn new(params: SpinHalfParams) -> Result<Self> {
        params.validate()?;
        let area = ScheduleIntegral::new(params.xi.clone(), params.horizon);
        Ok(Self { params, area })
    }

    pub fn params(&self) -> &SpinHalfParams {
        &self.params
    }

    /// `int_0^tau xi`, cached.
    pub fn xi_area(&self, tau: f64) -> Result<f64> {
        self.area.integral(tau)
    }
}

impl HamiltonianModel for SpinHalfModel {
    fn dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> f64 {
        self.params.horizon
    }

    fn h(&self, tau: f64) -> Result<ComplexMatrix> {
        spin_half_h(&self.params, tau)
    }

    fn hdot(&self, tau: f64) -> Result<Option<ComplexMatrix>> {
        spin_half_hdot(&self.params, tau).map(Some)
    }

    fn propagator(&self, tau: f64) -> Result<Option<Propagator>> {
        check_domain(tau, self.params.horizon)?;
        let area = self.area.integral(tau)?;
        spin_half_propagator_with(&self.params, tau, area).map(Some)
    }
}

// ---------------------------------------------------------------------------
// Dual construction

/// `h^b(tau) = i U'^dagger(tau) U(tau)` from the base propagator.
pub fn dual_h<M: HamiltonianModel + ?Sized>(base: &M, tau: f64) -> Result<ComplexMatrix> {
    let p = base.propagator(tau)?.ok_or(Error::MissingPropagator)?;
    Ok(p.udot.adjoint().matmul(&p.u).scale(Complex64::new(0.0, 1.0)))
}

/// System `b` of the dual pair built from system `a`'s propagator. Its
/// own propagator is `U^dagger`, and its eigenvectors are `U^dagger |n^a>`
/// with eigenvalues `-e_n^a`.
#[derive(Debug, Clone)]
pub struct DualModel<M> {
    base: M,
}

impl<M: HamiltonianModel> DualModel<M> {
    pub fn new(base: M) -> Result<Self> {
        if !base.has_propagator() {
            return Err(Error::MissingPropagator);
        }
        Ok(Self { base })
    }

    pub fn base(&self) -> &M {
        &self.base
    }
}

impl<M: HamiltonianModel> HamiltonianModel for DualModel<M> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn horizon(&self) -> f64 {
        self.base.horizon()
    }

    fn h(&self, tau: f64) -> Result<ComplexMatrix> {
        let h = dual_h(&self.base, tau)?;
        // Symmetrize away rounding; the exact result is Hermitian.
        Ok((&h + &h.adjoint()).scale_re(0.5))
    }

    fn propagator(&self, tau: f64) -> Result<Option<Propagator>> {
        Ok(self.base.propagator(tau)?.map(|p| Propagator {
            u: p.u.adjoint(),
            udot: p.udot.adjoint(),
        }))
    }
}

// ---------------------------------------------------------------------------
// Landau-Zener sweep (demonstration model)

/// `h(tau) = bias(tau) sigma_z + coupling sigma_x`; a linear bias gives the
/// textbook Landau-Zener sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LandauZenerModel {
    pub coupling: f64,
    pub bias: Schedule,
    pub horizon: f64,
}

impl LandauZenerModel {
    pub fn new(coupling: f64, bias: Schedule, horizon: f64) -> Result<Self> {
        if !coupling.is_finite() || coupling == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Landau-Zener coupling must be finite and nonzero, got {coupling}"
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        bias.validate_on(horizon)?;
        Ok(Self {
            coupling,
            bias,
            horizon,
        })
    }

    /// Linear sweep `bias = rate (tau - center)`.
    pub fn linear_sweep(coupling: f64, rate: f64, center: f64, horizon: f64) -> Result<Self> {
        Self::new(coupling, Schedule::linear(-rate * center, rate), horizon)
    }
}

impl HamiltonianModel for LandauZenerModel {
    fn dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn h(&self, tau: f64) -> Result<ComplexMatrix> {
        check_domain(tau, self.horizon)?;
        Ok(&sigma_z().scale_re(self.bias.value(tau)?) + &sigma_x().scale_re(self.coupling))
    }

    fn hdot(&self, tau: f64) -> Result<Option<ComplexMatrix>> {
        check_domain(tau, self.horizon)?;
        Ok(Some(sigma_z().scale_re(self.bias.derivative(tau)?)))
    }
}

// ---------------------------------------------------------------------------
// Time-independent model

/// A constant Hamiltonian, with the trivial propagator `exp(-i H tau)`.
#[derive(Debug, Clone)]
pub struct StaticModel {
    h: ComplexMatrix,
    horizon: f64,
}

impl StaticModel {
    pub fn new(h: ComplexMatrix, horizon: f64) -> Result<Self> {
        let max_asymmetry = h.max_asymmetry();
        if max_asymmetry > crate::linalg::HERMITIAN_TOL {
            return Err(Error::NotHermitian { max_asymmetry });
        }
        Ok(Self { h, horizon })
    }
}

impl HamiltonianModel for StaticModel {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn h(&self, tau: f64) -> Result<ComplexMatrix> {
        check_domain(tau, self.horizon)?;
        Ok(self.h.clone())
    }

    fn hdot(&self, tau: f64) -> Result<Option<ComplexMatrix>> {
        check_domain(tau, self.horizon)?;
        Ok(Some(ComplexMatrix::zeros(self.h.dim())))
    }

    fn propagator(&self, tau: f64) -> Result<Option<Propagator>> {
        check_domain(tau, self.horizon)?;
        let u = crate::linalg::expm_hermitian(&self.h, tau)?;
        let udot = self.h.matmul(&u).scale(Complex64::new(0.0, -1.0));
        Ok(Some(Propagator { u, udot }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn resonance() -> SpinHalfParams {
        SpinHalfParams::new(1.0, Schedule::constant(0.1), 20.0).unwrap()
    }

    #[test]
    fn pure_sigma_z_without_drive() {
        let p = SpinHalfParams::new(1.0, Schedule::constant(0.0), 10.0).unwrap();
        for tau in [0.0, 1.3, 7.9] {
            assert!(spin_half_h(&p, tau).unwrap().max_diff(&sigma_z()) < 1e-15);
        }
    }

    #[test]
    fn drive_at_origin_and_half_period() {
        let p = resonance();
        let h0 = spin_half_h(&p, 0.0).unwrap();
        let want = ComplexMatrix::from_rows(&[&[c(1.0, 0.0), c(0.1, 0.0)], &[c(0.1, 0.0), c(-1.0, 0.0)]]).unwrap();
        assert!(h0.max_diff(&want) < 1e-15);
        // 2 eta tau = pi flips the transverse field.
        let h = spin_half_h(&p, PI / 2.0).unwrap();
        assert!((h[(0, 1)] - c(-0.1, 0.0)).norm() < 1e-15);
        assert!((h[(1, 0)] - c(-0.1, 0.0)).norm() < 1e-15);
        assert!(h.trace().norm() < 1e-15);
    }

    #[test]
    fn propagator_at_origin() {
        let p = resonance();
        let prop = spin_half_propagator(&p, 0.0).unwrap();
        assert!(prop.u.max_diff(&ComplexMatrix::identity(2)) < 1e-15);
        let want = (&sigma_z() + &sigma_x().scale_re(0.1)).scale(c(0.0, -1.0));
        assert!(prop.udot.max_diff(&want) < 1e-15);
    }

    #[test]
    fn propagator_closed_form_at_pi() {
        let p = resonance();
        let prop = spin_half_propagator(&p, PI).unwrap();
        let want = pauli_exp(&sigma_z(), PI).matmul(&pauli_exp(&sigma_x(), 0.1 * PI));
        assert!(prop.u.max_diff(&want) < 1e-12);
    }

    #[test]
    fn propagator_generates_h() {
        let p = SpinHalfParams::new(0.7, Schedule::sinusoidal(0.5, 0.3, 1.1, 0.2), 12.0).unwrap();
        let model = SpinHalfModel::new(p.clone()).unwrap();
        for tau in [0.0, 0.37, 3.3, 11.9] {
            let prop = model.propagator(tau).unwrap().unwrap();
            assert!(prop.u.unitarity_defect() < 1e-10);
            let gen = prop.udot.matmul(&prop.u.adjoint()).scale(c(0.0, 1.0));
            assert!(gen.max_diff(&model.h(tau).unwrap()) < 1e-8);
            let direct = spin_half_propagator(&p, tau).unwrap();
            assert!(direct.u.max_diff(&prop.u) < 1e-11);
        }
    }

    #[test]
    fn analytic_hdot_matches_central_difference() {
        let p = SpinHalfParams::new(0.8, Schedule::linear(0.2, 0.05), 10.0).unwrap();
        let lz = LandauZenerModel::linear_sweep(0.3, 1.5, 5.0, 10.0).unwrap();
        let step = 1e-5;
        for tau in [0.5, 2.0, 7.5] {
            let fd = (&spin_half_h(&p, tau + step).unwrap() - &spin_half_h(&p, tau - step).unwrap())
                .scale_re(0.5 / step);
            assert!(fd.max_diff(&spin_half_hdot(&p, tau).unwrap()) < 1e-6);
            let fd = (&lz.h(tau + step).unwrap() - &lz.h(tau - step).unwrap()).scale_re(0.5 / step);
            assert!(fd.max_diff(&lz.hdot(tau).unwrap().unwrap()) < 1e-6);
        }
    }

    #[test]
    fn dual_of_identity_propagator_is_zero() {
        let model = StaticModel::new(ComplexMatrix::zeros(3), 5.0).unwrap();
        assert!(dual_h(&model, 2.0).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn dual_flips_spectrum() {
        let dual = DualModel::new(SpinHalfModel::new(resonance()).unwrap()).unwrap();
        let omega = 1.01f64.sqrt();
        let e0 = eigh(&dual.h(0.0).unwrap()).unwrap();
        assert!((e0.values[0] + omega).abs() < 1e-12 && (e0.values[1] - omega).abs() < 1e-12);
        for tau in [0.0, 1.0, 4.4, 17.0] {
            let a = eigh(&dual.base().h(tau).unwrap()).unwrap();
            let b = eigh(&dual.h(tau).unwrap()).unwrap();
            assert!((b.values[0] + a.values[1]).abs() < 1e-6);
            assert!((b.values[1] + a.values[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn dual_requires_propagator() {
        let lz = LandauZenerModel::linear_sweep(0.3, 1.0, 5.0, 10.0).unwrap();
        assert!(matches!(dual_h(&lz, 1.0), Err(Error::MissingPropagator)));
        assert!(matches!(DualModel::new(lz), Err(Error::MissingPropagator)));
    }

    #[test]
    fn tabulated_schedule_rules() {
        assert!(Schedule::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).is_err());
        assert!(Schedule::tabulated(vec![0.0, 1.0, 1.0, 2.0], vec![0.0; 4]).is_err());
        let s = Schedule::tabulated(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((s.value(1.5).unwrap() - 1.5).abs() < 1e-14);
        assert!((s.derivative(2.2).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(s.value(3.5), Err(Error::DomainViolation { .. })));
        // A table that stops short of the horizon is rejected up front.
        assert!(SpinHalfParams::new(1.0, s, 4.0).is_err());
    }

    #[test]
    fn spline_is_continuously_differentiable() {
        let knots: Vec<f64> = (0..8).map(|k| k as f64 * 0.5).collect();
        let vals: Vec<f64> = knots.iter().map(|t| (t * 0.9).sin() + 1.0).collect();
        let s = CubicSpline::new(knots.clone(), vals).unwrap();
        for &k in &knots[1..7] {
            let l = s.derivative(k - 1e-9).unwrap();
            let r = s.derivative(k + 1e-9).unwrap();
            assert!((l - r).abs() < 1e-7);
        }
    }

    #[test]
    fn spin_half_rejects_negative_drive() {
        assert!(SpinHalfParams::new(1.0, Schedule::linear(0.5, -0.1), 10.0).is_err());
        assert!(SpinHalfParams::new(0.0, Schedule::constant(0.1), 10.0).is_err());
    }

    #[test]
    fn cached_area_matches_closed_form() {
        let p = SpinHalfParams::new(1.0, Schedule::sinusoidal(0.4, 0.2, 0.7, 0.0), 30.0).unwrap();
        let model = SpinHalfModel::new(p).unwrap();
        for tau in [0.0_f64, 0.01, 3.3, 29.99, 30.0] {
            let exact = 0.4 * tau + 0.2 / 0.7 * (1.0 - (0.7 * tau).cos());
            assert!((model.xi_area(tau).unwrap() - exact).abs() < 1e-11);
        }
        assert!(model.xi_area(30.5).is_err());
    }

    #[test]
    fn schedule_serde_tags() {
        let s: Schedule = serde_json::from_str(r#"{"kind":"constant","value":0.1}"#).unwrap();
        assert_eq!(s, Schedule::constant(0.1));
        let s: Schedule = serde_json::from_str(r#"{"kind":"linear","start":0.0,"slope":0.01}"#).unwrap();
        assert_eq!(s.value(100.0).unwrap(), 1.0);
        assert!(serde_json::from_str::<Schedule>(r#"{"kind":"tabulated","tau":[0,1],"values":[0,1]}"#).is_err());
        let round: Schedule = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(round, s);
    }
}
