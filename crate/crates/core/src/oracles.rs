//! Closed-form results for the spin-half rotating-field model.
//!
//! With `Omega = sqrt(xi^2 + eta^2)`, `cos theta = eta / Omega` and
//! `delta(tau) = -int_0^tau xi`:
//!
//! ```text
//! exact:      e^{-i sigma_z eta tau} e^{-i sigma_x int xi} |+-,0>
//! adiabatic:  e^{-i eta tau sigma_z} e^{-i theta sigma_y / 2} e^{-i sigma_z int (Omega - eta^2/Omega)} |+-e_z>
//! survival:   P = 1/2 + (xi(0) xi(tau) + eta^2 cos 2 delta) / (2 Omega(0) Omega(tau))
//! ```
//!
//! where `|+-,0> = e^{-i sigma_y theta(0)/2} |+-e_z>`. Level index 0 is the
//! lower branch `-`, index 1 the upper branch `+`, matching the ascending
//! order of [`crate::linalg::eigh`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{basis_vector, pauli_exp, sigma_x, sigma_y, sigma_z};
use crate::models::{HamiltonianModel, SpinHalfModel, SpinHalfParams};
use crate::quadrature::{adaptive_simpson, DEFAULT_TOL};

/// Which of the two spin-half branches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    /// Level index in ascending energy order.
    pub fn level(self) -> usize {
        match self {
            Branch::Plus => 1,
            Branch::Minus => 0,
        }
    }

    fn basis(self) -> Vec<Complex64> {
        // |+e_z> = (1, 0), |-e_z> = (0, 1)
        basis_vector(2, 1 - self.level())
    }

    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Closed-form evaluator for one parameter set.
#[derive(Clone, Debug)]
pub struct SpinHalfClosedForm {
    model: SpinHalfModel,
}

impl SpinHalfClosedForm {
    pub fn new(params: SpinHalfParams) -> Result<Self> {
        Ok(Self {
            model: SpinHalfModel::new(params)?,
        })
    }

    pub fn from_model(model: &SpinHalfModel) -> Self {
        Self { model: model.clone() }
    }

    pub fn params(&self) -> &SpinHalfParams {
        self.model.params()
    }

    pub fn model(&self) -> &SpinHalfModel {
        &self.model
    }

    pub fn omega(&self, tau: f64) -> Result<f64> {
        self.params().omega(tau)
    }

    /// Mixing angle with `cos theta = eta / Omega`, in `[0, pi/2)`.
    pub fn theta(&self, tau: f64) -> Result<f64> {
        let p = self.params();
        Ok(p.xi.value(tau)?.atan2(p.eta))
    }

    /// `delta(tau) = -int_0^tau xi`
    pub fn delta(&self, tau: f64) -> Result<f64> {
        Ok(-self.model.xi_area(tau)?)
    }

    /// `|+-,0>`, the eigenvector of `h(0)` on the given branch.
    pub fn initial_state(&self, branch: Branch) -> Result<Vec<Complex64>> {
        let theta0 = self.theta(0.0)?;
        Ok(pauli_exp(&sigma_y(), 0.5 * theta0).apply(&branch.basis()))
    }

    /// Exact solution of the Schrödinger equation started in `|+-,0>`.
    pub fn exact_state(&self, branch: Branch, tau: f64) -> Result<Vec<Complex64>> {
        let p = self.params();
        let u = pauli_exp(&sigma_z(), p.eta * tau).matmul(&pauli_exp(&sigma_x(), self.model.xi_area(tau)?));
        Ok(u.apply(&self.initial_state(branch)?))
    }

    /// `int_0^tau (Omega - eta^2 / Omega)`
    pub fn adiabatic_phase(&self, tau: f64) -> Result<f64> {
        let p = self.params();
        if let Some(xi) = p.xi.as_constant() {
            let omega = xi.hypot(p.eta);
            return Ok((omega - p.eta * p.eta / omega) * tau);
        }
        adaptive_simpson(
            |t| {
                let w = p.omega(t).unwrap_or(f64::NAN);
                w - p.eta * p.eta / w
            },
            0.0,
            tau,
            DEFAULT_TOL,
        )
    }

    /// The gauge-invariant adiabatic orbit through `|+-,0>`.
    pub fn adiabatic_state(&self, branch: Branch, tau: f64) -> Result<Vec<Complex64>> {
        let p = self.params();
        let rot = pauli_exp(&sigma_z(), p.eta * tau).matmul(&pauli_exp(&sigma_y(), 0.5 * self.theta(tau)?));
        let phase = Complex64::from_polar(1.0, -branch.sign() * self.adiabatic_phase(tau)?);
        Ok(rot.apply(&branch.basis()).into_iter().map(|z| z * phase).collect())
    }

    /// Probability of staying on the `+` orbit when started in `|+,0>`.
    pub fn survival(&self, tau: f64) -> Result<f64> {
        let p = self.params();
        let (x0, xt) = (p.xi.value(0.0)?, p.xi.value(tau)?);
        let (w0, wt) = (self.omega(0.0)?, self.omega(tau)?);
        let d = self.delta(tau)?;
        Ok(0.5 + 0.5 * (x0 * xt + p.eta * p.eta * (2.0 * d).cos()) / (w0 * wt))
    }

    /// `max |i psi' - h psi|` for the exact state at `tau`, with `psi'` from a
    /// second-order difference of step `step` (one-sided at the ends).
    pub fn schrodinger_residual(&self, branch: Branch, tau: f64, step: f64) -> Result<f64> {
        let horizon = self.params().horizon;
        let (nodes, weights): ([f64; 3], [f64; 3]) = if tau - step < 0.0 {
            ([tau, tau + step, tau + 2.0 * step], [-1.5, 2.0, -0.5])
        } else if tau + step > horizon {
            ([tau - 2.0 * step, tau - step, tau], [0.5, -2.0, 1.5])
        } else {
            ([tau - step, tau, tau + step], [-0.5, 0.0, 0.5])
        };
        let mut dpsi = [Complex64::new(0.0, 0.0); 2];
        for (t, w) in nodes.iter().zip(weights) {
            for (d, z) in dpsi.iter_mut().zip(self.exact_state(branch, *t)?) {
                *d += z * (w / step);
            }
        }
        let hpsi = self.model.h(tau)?.apply(&self.exact_state(branch, tau)?);
        let i = Complex64::new(0.0, 1.0);
        Ok((0..2).map(|j| (i * dpsi[j] - hpsi[j]).norm()).fold(0.0, f64::max))
    }
}

/// Sufficient-regime label for a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    XiDominant,
    EtaDominantSmallArea,
    Neither,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::XiDominant => "xi_dominant",
            Regime::EtaDominantSmallArea => "eta_dominant_small_area",
            Regime::Neither => "neither",
        }
    }
}

/// Relative slack on the inequalities, so values that sit exactly on a
/// boundary (such as `int xi = 0.1` at `R = 10`) are not lost to rounding.
const BOUNDARY_SLACK: f64 = 1e-12;

/// `xi_dominant` iff `min xi / eta >= R`; `eta_dominant_small_area` iff
/// `eta / max xi >= R` and `int_a^b xi <= 1/R`; otherwise `neither`. Both
/// comparisons are non-strict.
pub fn regime_classify(cf: &SpinHalfClosedForm, window: (f64, f64), threshold: f64) -> Result<Regime> {
    let p = cf.params();
    let (a, b) = window;
    let ge = |x: f64, y: f64| x >= y * (1.0 - BOUNDARY_SLACK);
    if ge(p.xi.min_on(a, b)? / p.eta, threshold) {
        return Ok(Regime::XiDominant);
    }
    let area = cf.model.xi_area(b)? - cf.model.xi_area(a)?;
    let max_xi = p.xi.max_on(a, b)?;
    if ge(p.eta, threshold * max_xi) && ge(1.0 / threshold, area) {
        return Ok(Regime::EtaDominantSmallArea);
    }
    Ok(Regime::Neither)
}
