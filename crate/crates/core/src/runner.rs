//! JSON-configured experiments: one analysis pipeline shared by the
//! `simulate`, `check`, `dual`, `oracle` and `sweep` modes, writing a CSV
//! series and a JSON report.
//!
//! A config looks like
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "model": {"type": "spin_half", "eta": 1.0, "xi": {"kind": "constant", "value": 0.1}},
//!   "grid": {"t_max": 15.707963267948966, "steps": 4096},
//!   "initial_level": 1,
//!   "threshold": 10.0,
//!   "outputs": {"csv_path": "series.csv", "json_path": "report.json"}
//! }
//! ```
//!
//! For `landau_zener` models `eta` is the constant coupling and `xi` the bias
//! schedule. Sweeps add `"sweep": {"parameter": "xi.constant", "values": [...]}`
//! or `{"parameter": "eta", "min": a, "max": b, "count": n}`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{
    compare_dual_conditions, dual_gamma_residual, evaluate_conditions, ConditionReport, DualComparison, Verdict,
    Window, DEFAULT_THRESHOLD,
};
use crate::dynamics::{
    build_m_series, first_order_survival, integrate_coefficients, integrate_schrodinger, project_onto_adiabatic,
    survival_probability, CoefficientSeries, Integrator, PropagationOptions, Trajectory,
};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::fidelity;
use crate::models::{DualModel, HamiltonianModel, LandauZenerModel, Schedule, SpinHalfModel, SpinHalfParams};
use crate::oracles::{regime_classify, Branch, SpinHalfClosedForm};
use crate::spectral::{adiabatic_orbits, track_frames, EigenFrameSequence, SpectralConfig, SpectralFlow};

pub const SCHEMA_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "ADIACHECK_WORKERS";

fn config(field: &str, message: &str) -> Error {
    Error::config(field, message)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Check,
    Dual,
    Sweep,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SpinHalf,
    DualOfSpinHalf,
    LandauZener,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    pub eta: f64,
    pub xi: Schedule,
    /// Defaults to `grid.t_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_max: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json_path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "xi.constant")]
    XiConstant,
    #[serde(rename = "t_max")]
    TMax,
}

impl SweepParameter {
    fn name(self) -> &'static str {
        match self {
            SweepParameter::Eta => "eta",
            SweepParameter::XiConstant => "xi.constant",
            SweepParameter::TMax => "t_max",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl SweepSpec {
    /// Explicit values, or `count` evenly spaced points from `min` to `max`.
    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match (&self.values, self.min, self.max, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n < 2 {
                    return Err(config("sweep.count", "must be at least 2"));
                }
                (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
            }
            _ => {
                return Err(config(
                    "sweep",
                    "give either `values` or all of `min`, `max`, `count`",
                ))
            }
        };
        if pts.len() < 2 {
            return Err(config("sweep.values", "a sweep needs at least 2 points"));
        }
        if pts.iter().any(|v| !v.is_finite()) {
            return Err(config("sweep.values", "values must be finite"));
        }
        Ok(pts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorSpec {
    #[default]
    ExponentialMidpoint,
    Rk4,
}

fn default_level() -> usize {
    1
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub model: ModelSpec,
    pub grid: GridSpec,
    #[serde(default = "default_level")]
    pub initial_level: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub integrator: IntegratorSpec,
}

impl ExperimentConfig {
    /// Parse and validate. Schema errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "<root>".to_string() } else { path };
            config(&field, &e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config("--config", &format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn horizon(&self) -> f64 {
        self.model.horizon.unwrap_or(self.grid.t_max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config(
                "schema_version",
                &format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if !(self.grid.t_max.is_finite() && self.grid.t_max > 0.0) {
            return Err(config("grid.t_max", "must be positive and finite"));
        }
        if self.grid.steps < 8 {
            return Err(config("grid.steps", "must be at least 8"));
        }
        if !(self.threshold.is_finite() && self.threshold > 1.0) {
            return Err(config("threshold", "must be greater than 1"));
        }
        if self.initial_level >= 2 {
            return Err(config("initial_level", "the configured models have 2 levels"));
        }
        let horizon = self.horizon();
        if !(horizon.is_finite() && horizon >= self.grid.t_max) {
            return Err(config("model.horizon", "must be finite and at least grid.t_max"));
        }
        if !self.model.eta.is_finite() {
            return Err(config("model.eta", "must be finite"));
        }
        match self.model.kind {
            ModelKind::SpinHalf | ModelKind::DualOfSpinHalf => {
                if !(self.model.eta.is_finite() && self.model.eta > 0.0) {
                    return Err(config("model.eta", "must be positive"));
                }
                SpinHalfParams::new(self.model.eta, self.model.xi.clone(), horizon)
                    .map_err(|e| config("model.xi", &e.to_string()))?;
            }
            ModelKind::LandauZener => {
                if self.model.eta == 0.0 {
                    return Err(config("model.eta", "the Landau-Zener coupling must be nonzero"));
                }
                self.model
                    .xi
                    .validate_on(horizon)
                    .map_err(|e| config("model.xi", &e.to_string()))?;
            }
        }
        if let Some(s) = &self.sweep {
            let pts = s.points()?;
            if s.parameter == SweepParameter::XiConstant && self.model.xi.as_constant().is_none() {
                return Err(config("sweep.parameter", "xi.constant needs a constant xi schedule"));
            }
            if s.parameter == SweepParameter::TMax && pts.iter().any(|v| *v <= 0.0) {
                return Err(config("sweep.values", "t_max values must be positive"));
            }
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.grid.t_max, self.grid.steps).map_err(|e| config("grid", &e.to_string()))
    }

    pub fn propagation_options(&self) -> PropagationOptions {
        PropagationOptions {
            integrator: match self.integrator {
                IntegratorSpec::ExponentialMidpoint => Integrator::ExponentialMidpoint,
                IntegratorSpec::Rk4 => Integrator::Rk4,
            },
            ..PropagationOptions::default()
        }
    }

    fn spin_params(&self) -> Result<SpinHalfParams> {
        SpinHalfParams::new(self.model.eta, self.model.xi.clone(), self.horizon())
    }

    /// The configured Hamiltonian.
    pub fn build_model(&self) -> Result<Box<dyn HamiltonianModel>> {
        Ok(match self.model.kind {
            ModelKind::SpinHalf => Box::new(SpinHalfModel::new(self.spin_params()?)?),
            ModelKind::DualOfSpinHalf => Box::new(DualModel::new(SpinHalfModel::new(self.spin_params()?)?)?),
            ModelKind::LandauZener => Box::new(LandauZenerModel::new(
                self.model.eta,
                self.model.xi.clone(),
                self.horizon(),
            )?),
        })
    }

    /// Closed forms, available for the plain spin-half model only.
    pub fn closed_form(&self) -> Result<Option<SpinHalfClosedForm>> {
        match self.model.kind {
            ModelKind::SpinHalf => Ok(Some(SpinHalfClosedForm::new(self.spin_params()?)?)),
            _ => Ok(None),
        }
    }

    /// Copy with one swept parameter replaced.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match parameter {
            SweepParameter::Eta => c.model.eta = value,
            SweepParameter::XiConstant => c.model.xi = Schedule::constant(value),
            SweepParameter::TMax => {
                c.grid.t_max = value;
                c.model.horizon = c.model.horizon.map(|h| h.max(value));
            }
        }
        c.sweep = None;
        c.validate()?;
        Ok(c)
    }
}

/// Every quantity the modes report, computed once.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub initial_level: usize,
    pub frames: EigenFrameSequence,
    pub flow: SpectralFlow,
    pub trajectory: Trajectory,
    /// Coefficients from projecting the trajectory onto the orbits.
    pub projected: CoefficientSeries,
    /// Coefficients from the coefficient equations.
    pub integrated: CoefficientSeries,
    pub survival: Vec<f64>,
    /// `None` when the grid is too coarse for the oscillatory integral.
    pub first_order: Option<Vec<f64>>,
    pub conditions: ConditionReport,
    pub warnings: Vec<String>,
}

impl Analysis {
    pub fn route_discrepancy(&self) -> f64 {
        self.projected
            .max_difference(&self.integrated)
            .expect("both routes share the grid")
    }
}

/// Track frames, propagate from `|m, 0>`, and evaluate everything on `grid`.
pub fn analyze<M: HamiltonianModel + ?Sized>(
    model: &M,
    grid: &TimeGrid,
    initial_level: usize,
    threshold: f64,
    opts: &PropagationOptions,
) -> Result<Analysis> {
    let cfg = SpectralConfig::default();
    let frames = track_frames(model, grid, &cfg)?;
    if let Some(k) = frames.crossings().iter().position(|&c| c) {
        return Err(Error::StepTooCoarse {
            tau: grid.points()[k + 1],
            detail: "tracked levels exchanged energy order; refine the grid".into(),
        });
    }
    let flow = SpectralFlow::compute(&frames, model, &cfg)?;
    let trajectory = integrate_schrodinger(model, frames.vector(0, initial_level), grid, opts)?;
    let orbits = adiabatic_orbits(&frames, &flow);
    let projected = project_onto_adiabatic(&trajectory, &orbits)?;
    let integrated = integrate_coefficients(&build_m_series(&flow), initial_level)?;
    let survival = survival_probability(&projected, initial_level);
    let mut warnings = Vec::new();
    let first_order = match first_order_survival(&flow, initial_level) {
        Ok(p) => Some(p),
        Err(e @ Error::StepTooCoarse { .. }) => {
            warnings.push(format!("first-order survival skipped: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let conditions = evaluate_conditions(&flow, initial_level, threshold, Window::full(&flow))?;
    Ok(Analysis {
        initial_level,
        frames,
        flow,
        trajectory,
        projected,
        integrated,
        survival,
        first_order,
        conditions,
        warnings,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalSummary {
    pub min: f64,
    #[serde(rename = "final")]
    pub last: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_order_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_order_min: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub substeps: usize,
    pub refinement_error: f64,
    pub norm_drift: f64,
    pub route_discrepancy: f64,
    pub projected_normalization_defect: f64,
    pub integrated_normalization_defect: f64,
    pub gamma_hermiticity_defect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_method_discrepancy: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSummary {
    /// `max |P_numeric - P_closed_form|`; absent when nothing was integrated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_survival_error: Option<f64>,
    /// `max (1 - |<psi_closed_form|psi_numeric>|^2)`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_state_infidelity: Option<f64>,
    pub final_closed_form_survival: f64,
    pub regime: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualSummary {
    pub gamma_residual: f64,
    pub eigenvalue_defect: f64,
    pub level_map: Vec<usize>,
    pub comparison: DualComparison,
    pub dual_conditions: ConditionReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub min_p: f64,
    pub final_p: f64,
    pub traditional: Verdict,
    pub pointwise: Verdict,
    pub integral: Verdict,
    pub regime: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub mode: Mode,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survival: Option<SurvivalSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    fn new(mode: Mode, config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            mode,
            config: config.clone(),
            wall_time_s: 0.0,
            survival: None,
            conditions: None,
            oracle: None,
            dual: None,
            sweep: None,
            diagnostics: None,
            warnings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Every number in the serialized report must be finite. Non-finite
    /// floats serialize as `null`, which no field otherwise produces.
    pub fn validate(&self) -> Result<()> {
        fn walk(v: &serde_json::Value, path: &str) -> Result<()> {
            match v {
                serde_json::Value::Null => Err(Error::NonFinite(format!("report{path}"))),
                serde_json::Value::Array(a) => a.iter().enumerate().try_for_each(|(i, x)| walk(x, &format!("{path}[{i}]"))),
                serde_json::Value::Object(o) => o.iter().try_for_each(|(k, x)| walk(x, &format!("{path}.{k}"))),
                _ => Ok(()),
            }
        }
        walk(&serde_json::to_value(self)?, "")
    }

    /// Parse a report back and re-check it.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header and rows of the per-grid-point series.
pub fn series_table(a: &Analysis) -> (Vec<String>, Vec<Vec<String>>) {
    let m = a.initial_level;
    let dim = a.flow.dim();
    let others: Vec<usize> = (0..dim).filter(|&n| n != m).collect();
    let mut header = vec!["tau".to_string(), "P_m".to_string(), "P_m_first_order".to_string()];
    for &n in &others {
        header.push(format!("gamma_abs_{n}{m}"));
        header.push(format!("theta_{n}{m}"));
        header.push(format!("delta_{m}{n}"));
    }
    header.extend((0..dim).map(|n| format!("e_{n}")));
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_else(|| "nan".into());
    let rows = a
        .flow
        .grid()
        .points()
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let mut row = vec![
                fmt_float(tau),
                fmt_float(a.survival[k]),
                opt(a.first_order.as_ref().map(|p| p[k])),
            ];
            for &n in &others {
                let pair = a.flow.pair(n, m);
                row.push(fmt_float(a.flow.gamma_at(k)[(n, m)].norm()));
                row.push(opt(pair.theta[k]));
                row.push(opt(pair.delta[k]));
            }
            row.extend((0..dim).map(|n| fmt_float(a.frames.value(k, n))));
            row
        })
        .collect();
    (header, rows)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    w.write_record(header).map_err(std::io::Error::from)?;
    for r in rows {
        w.write_record(r).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn survival_summary(a: &Analysis) -> SurvivalSummary {
    let min = |p: &[f64]| p.iter().copied().fold(f64::INFINITY, f64::min);
    SurvivalSummary {
        min: min(&a.survival),
        last: *a.survival.last().expect("non-empty grid"),
        first_order_final: a.first_order.as_ref().and_then(|p| p.last().copied()),
        first_order_min: a.first_order.as_deref().map(min),
    }
}

fn diagnostics(a: &Analysis) -> Diagnostics {
    Diagnostics {
        substeps: a.trajectory.substeps,
        refinement_error: a.trajectory.refinement_error,
        norm_drift: a.trajectory.max_norm_drift(),
        route_discrepancy: a.route_discrepancy(),
        projected_normalization_defect: a.projected.normalization_defect(),
        integrated_normalization_defect: a.integrated.normalization_defect(),
        gamma_hermiticity_defect: a.flow.hermiticity_defect(),
        gamma_method_discrepancy: a.flow.method_discrepancy,
    }
}

/// Compare an analysis of the spin-half model with its closed forms.
pub fn oracle_summary(cf: &SpinHalfClosedForm, a: &Analysis, threshold: f64) -> Result<OracleSummary> {
    let branch = if a.initial_level == Branch::Plus.level() {
        Branch::Plus
    } else {
        Branch::Minus
    };
    let t = a.flow.grid().points();
    let mut max_survival_error = 0.0_f64;
    let mut max_state_infidelity = 0.0_f64;
    for (k, &tau) in t.iter().enumerate() {
        let exact = cf.exact_state(branch, tau)?;
        max_state_infidelity = max_state_infidelity.max(1.0 - fidelity(&exact, &a.trajectory.states[k]));
        if branch == Branch::Plus {
            max_survival_error = max_survival_error.max((a.survival[k] - cf.survival(tau)?).abs());
        }
    }
    let t_end = *t.last().expect("non-empty grid");
    Ok(OracleSummary {
        max_survival_error: Some(max_survival_error),
        max_state_infidelity: Some(max_state_infidelity),
        final_closed_form_survival: cf.survival(t_end)?,
        regime: regime_classify(cf, (0.0, t_end), threshold)?.as_str().to_string(),
    })
}

fn resolve(out_dir: &Path, configured: &Option<PathBuf>, default: &str) -> PathBuf {
    let p = configured.clone().unwrap_or_else(|| PathBuf::from(default));
    if p.is_absolute() {
        p
    } else {
        out_dir.join(p)
    }
}

fn worker_cap() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(config(WORKERS_ENV, &format!("expected a positive integer, got {v:?}"))),
        },
    }
}

/// Run one sweep point and summarize it.
pub fn sweep_point(cfg: &ExperimentConfig, value: f64) -> Result<SweepRow> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| config("sweep", "missing sweep block"))?;
    let point = cfg.with_parameter(sweep.parameter, value)?;
    let model = point.build_model()?;
    let grid = point.time_grid()?;
    let a = analyze(model.as_ref(), &grid, point.initial_level, point.threshold, &point.propagation_options())?;
    let s = survival_summary(&a);
    let regime = match point.closed_form()? {
        Some(cf) => regime_classify(&cf, (0.0, point.grid.t_max), point.threshold)?.as_str().to_string(),
        None => "n/a".to_string(),
    };
    Ok(SweepRow {
        value,
        min_p: s.min,
        final_p: s.last,
        traditional: a.conditions.traditional(),
        pointwise: a.conditions.pointwise(),
        integral: a.conditions.integral(),
        regime,
    })
}

/// Evaluate every sweep point (in parallel, capped by `ADIACHECK_WORKERS`)
/// and write one CSV row per point in input order.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let sweep = cfg.sweep.as_ref().ok_or_else(|| config("sweep", "mode sweep needs a sweep block"))?;
    let points = sweep.points()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .map(|&v| sweep_point(cfg, v))
            .collect::<Result<Vec<_>>>()
    })?;

    let header: Vec<String> = [
        sweep.parameter.name(),
        "min_P",
        "final_P",
        "traditional",
        "pointwise",
        "integral",
        "regime",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_float(r.value),
                fmt_float(r.min_p),
                fmt_float(r.final_p),
                r.traditional.as_str().into(),
                r.pointwise.as_str().into(),
                r.integral.as_str().into(),
                r.regime.clone(),
            ]
        })
        .collect();
    let mut report = RunReport::new(Mode::Sweep, cfg);
    let csv_path = resolve(out_dir, &cfg.outputs.csv_path, "sweep.csv");
    write_csv(&csv_path, &header, &table)?;
    report.outputs.push(csv_path);
    report.sweep = Some(rows);
    finish(report, cfg, out_dir, start)
}

fn finish(mut report: RunReport, cfg: &ExperimentConfig, out_dir: &Path, start: Instant) -> Result<RunReport> {
    report.wall_time_s = start.elapsed().as_secs_f64();
    let json_path = resolve(out_dir, &cfg.outputs.json_path, "report.json");
    report.outputs.push(json_path.clone());
    report.validate()?;
    if let Some(dir) = json_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&json_path, report.to_json()?)?;
    Ok(report)
}

/// Execute `mode` for `cfg`, writing outputs under `out_dir`.
pub fn run(cfg: &ExperimentConfig, mode: Mode, out_dir: &Path) -> Result<RunReport> {
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(config(
                "mode",
                &format!("config says {m:?} but {mode:?} was requested"),
            ));
        }
    }
    cfg.validate()?;
    if mode == Mode::Sweep {
        return run_sweep(cfg, out_dir);
    }
    let start = Instant::now();
    let mut report = RunReport::new(mode, cfg);
    let grid = cfg.time_grid()?;
    let csv_path = resolve(out_dir, &cfg.outputs.csv_path, "series.csv");

    if mode == Mode::Oracle {
        let cf = cfg
            .closed_form()?
            .ok_or_else(|| config("model.type", "oracle mode needs a spin_half model"))?;
        let header: Vec<String> = ["tau", "P_closed_form", "omega", "mixing_angle", "delta"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = grid
            .points()
            .iter()
            .map(|&tau| {
                Ok(vec![
                    fmt_float(tau),
                    fmt_float(cf.survival(tau)?),
                    fmt_float(cf.omega(tau)?),
                    fmt_float(cf.theta(tau)?),
                    fmt_float(cf.delta(tau)?),
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        write_csv(&csv_path, &header, &rows)?;
        report.outputs.push(csv_path);
        let t_end = grid.t_max();
        let p: Vec<f64> = grid.points().iter().map(|&t| cf.survival(t)).collect::<Result<_>>()?;
        report.survival = Some(SurvivalSummary {
            min: p.iter().copied().fold(f64::INFINITY, f64::min),
            last: cf.survival(t_end)?,
            first_order_final: None,
            first_order_min: None,
        });
        report.oracle = Some(OracleSummary {
            max_survival_error: None,
            max_state_infidelity: None,
            final_closed_form_survival: cf.survival(t_end)?,
            regime: regime_classify(&cf, (0.0, t_end), cfg.threshold)?.as_str().to_string(),
        });
        return finish(report, cfg, out_dir, start);
    }

    if mode == Mode::Dual && cfg.model.kind != ModelKind::SpinHalf {
        return Err(config("model.type", "dual mode takes the spin_half base model"));
    }
    let model = cfg.build_model()?;
    let opts = cfg.propagation_options();
    let a = analyze(model.as_ref(), &grid, cfg.initial_level, cfg.threshold, &opts)?;
    let (header, rows) = series_table(&a);
    write_csv(&csv_path, &header, &rows)?;
    report.outputs.push(csv_path);
    report.survival = Some(survival_summary(&a));
    report.diagnostics = Some(diagnostics(&a));
    report.warnings = a.warnings.clone();
    if let Some(cf) = cfg.closed_form()? {
        report.oracle = Some(oracle_summary(&cf, &a, cfg.threshold)?);
    }
    if matches!(mode, Mode::Check | Mode::Dual) {
        report.conditions = Some(a.conditions.clone());
    }
    if mode == Mode::Dual {
        let base = SpinHalfModel::new(cfg.spin_params()?)?;
        report.dual = Some(dual_summary(&base, &a, cfg.threshold)?);
    }
    finish(report, cfg, out_dir, start)
}

/// Build the dual of `base`, check the coupling relation and compare the
/// pointwise conditions of the two systems.
pub fn dual_summary(base: &SpinHalfModel, a: &Analysis, threshold: f64) -> Result<DualSummary> {
    let cfg = SpectralConfig::default();
    let dual = DualModel::new(base.clone())?;
    let b_frames = track_frames(&dual, a.frames.grid(), &cfg)?;
    let res = dual_gamma_residual(base, &a.frames, &a.flow, &b_frames, &cfg)?;
    let b_flow = SpectralFlow::from_frames(&b_frames, &cfg)?;
    let b_report = evaluate_conditions(&b_flow, res.level_map[a.initial_level], threshold, Window::full(&b_flow))?;
    let comparison = compare_dual_conditions(&a.flow, &a.conditions, &b_report, &res.level_map)?;
    Ok(DualSummary {
        gamma_residual: res.residual,
        eigenvalue_defect: res.eigenvalue_defect,
        level_map: res.level_map,
        comparison,
        dual_conditions: b_report,
    })
}
