//! Scenario configuration: TOML with fixed tables and no unknown keys.
//!
//! ```toml
//! scenario = "limit_blowup_sweep"
//!
//! [physical]
//! chi = 2.0
//! n = 3
//! R = 1.0
//!
//! [grid]
//! N = 1024
//!
//! [control]          # all optional
//! t_end = 0.01
//!
//! [params]           # all optional, scenario-specific
//! M = [8.0, 16.0]
//! m = [1000.0]
//!
//! [output]           # all optional
//! history_every = 10
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::StepControl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    LimitBlowupSweep,
    ComparisonCheck,
    SingularLimitLadder,
    MassThresholdScan,
    ConvergenceStudy,
    SingleRun,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::LimitBlowupSweep => "limit_blowup_sweep",
            ScenarioKind::ComparisonCheck => "comparison_check",
            ScenarioKind::SingularLimitLadder => "singular_limit_ladder",
            ScenarioKind::MassThresholdScan => "mass_threshold_scan",
            ScenarioKind::ConvergenceStudy => "convergence_study",
            ScenarioKind::SingleRun => "single_run",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physical {
    pub chi: f64,
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub t_end: f64,
    /// Defaults to `1e-6 t_end`.
    pub dt_init: Option<f64>,
    /// Defaults to `1e-13 t_end`.
    pub dt_min: Option<f64>,
    pub rel_tol: f64,
    /// Defaults to `1e8` times the initial norm.
    pub max_norm: Option<f64>,
    pub max_steps: usize,
    pub safety: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        let c = StepControl::new(1.0);
        ControlConfig {
            t_end: 1.0,
            dt_init: None,
            dt_min: None,
            rel_tol: c.rel_tol,
            max_norm: None,
            max_steps: c.max_steps,
            safety: c.safety,
        }
    }
}

impl ControlConfig {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            dt_init: self.dt_init.unwrap_or(1e-6 * self.t_end),
            dt_min: self.dt_min.unwrap_or(1e-13 * self.t_end),
            rel_tol: self.rel_tol,
            max_norm: self.max_norm,
            t_end: self.t_end,
            max_steps: self.max_steps,
            safety: self.safety,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Nonlocal,
    LocalPower,
    VForm,
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// The constructed blow-up data with peak parameter `M`.
    W0,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    #[serde(rename = "M")]
    pub peaks: Vec<f64>,
    #[serde(rename = "m")]
    pub masses: Vec<f64>,
    pub eps: Vec<f64>,
    /// J-monitor exponent; defaults to the midpoint of `(2χ/n + 1, χ + 1)`.
    pub q: Option<f64>,
    /// Defaults to `n/2 + 1`.
    pub p_monitor: Option<f64>,
    /// Grid ladder for the convergence study.
    #[serde(rename = "N")]
    pub cells: Vec<usize>,
    /// Fixed step ladder for the convergence study.
    pub dt: Vec<f64>,
    /// Tolerance ladder for the convergence study.
    pub rel_tol: Vec<f64>,
    pub mode: ModeKind,
    pub initial: InitialKind,
    pub constant: f64,
    /// Local power coefficient; defaults to `2λ`.
    pub lambda_coeff: Option<f64>,
    /// Ladder sample time; defaults to `min(0.2, t_end)`.
    pub sample_time: Option<f64>,
    pub bisection_steps: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            peaks: vec![8.0],
            masses: vec![1000.0],
            eps: vec![0.1, 0.05, 0.025, 0.0125],
            q: None,
            p_monitor: None,
            cells: vec![64, 128, 256, 512],
            dt: vec![0.02, 0.01, 0.005, 0.0025],
            rel_tol: vec![1e-4, 1e-5, 1e-6],
            mode: ModeKind::Nonlocal,
            initial: InitialKind::W0,
            constant: 1.0,
            lambda_coeff: None,
            sample_time: None,
            bisection_steps: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    Text,
    Binary,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub history_every: usize,
    /// Snapshot every this many accepted steps in `single_run`; 0 keeps only
    /// the initial and final profiles.
    pub snapshot_every: usize,
    pub snapshot_format: SnapshotFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            history_every: 1,
            snapshot_every: 0,
            snapshot_format: SnapshotFormat::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub physical: Physical,
    pub grid: GridConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputConfig,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text.as_bytes()[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
    (line, column)
}

fn invalid(key: &str, constraint: impl Into<String>) -> Error {
    Error::Validation {
        key: key.to_string(),
        constraint: constraint.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

fn all_positive(key: &str, vs: &[f64]) -> Result<()> {
    if vs.is_empty() {
        return Err(invalid(key, "list must not be empty"));
    }
    vs.iter().try_for_each(|&v| positive(key, v))
}

impl ScenarioConfig {
    /// Parses and validates; defaults fill every omitted optional key.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.physical;
        positive("physical.chi", p.chi)?;
        if p.n < 3 {
            return Err(invalid("physical.n", format!("n >= 3 is required, got {}", p.n)));
        }
        positive("physical.R", p.radius)?;
        if self.grid.cells < crate::grid::MIN_CELLS {
            return Err(invalid(
                "grid.N",
                format!("N >= {} is required, got {}", crate::grid::MIN_CELLS, self.grid.cells),
            ));
        }
        let c = &self.control;
        positive("control.t_end", c.t_end)?;
        self.control
            .step_control()
            .validate()
            .map_err(|e| invalid("control", e.to_string()))?;

        let q = &self.params;
        all_positive("params.M", &q.peaks)?;
        if q.masses.is_empty() {
            return Err(invalid("params.m", "list must not be empty"));
        }
        if let Some(m) = q.masses.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
            return Err(invalid("params.m", format!("must be nonnegative and finite, got {m}")));
        }
        if let Some(pm) = q.p_monitor {
            let half = p.n as f64 / 2.0;
            if !(pm > half) {
                return Err(invalid("params.p_monitor", format!("must exceed n/2 = {half}, got {pm}")));
            }
        }
        if let Some(qv) = q.q {
            let (lo, hi) = (2.0 * p.chi / p.n as f64 + 1.0, p.chi + 1.0);
            if !(qv > 1.0 && qv < hi) {
                return Err(invalid(
                    "params.q",
                    format!("must lie in (1, chi + 1); the standard window is ({lo}, {hi}), got {qv}"),
                ));
            }
        }
        positive("params.constant", q.constant)?;
        if let Some(l) = q.lambda_coeff {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(invalid("params.lambda_coeff", format!("must be nonnegative, got {l}")));
            }
        }
        if let Some(s) = q.sample_time {
            if !(s > 0.0 && s <= c.t_end) {
                return Err(invalid("params.sample_time", format!("must lie in (0, t_end], got {s}")));
            }
        }
        if self.output.history_every == 0 {
            return Err(invalid("output.history_every", "must be positive"));
        }

        match self.scenario {
            ScenarioKind::SingularLimitLadder => {
                all_positive("params.eps", &q.eps)?;
                if let Some(e) = q.eps.iter().find(|e| **e > 1.0) {
                    return Err(invalid("params.eps", format!("must lie in (0, 1], got {e}")));
                }
            }
            ScenarioKind::MassThresholdScan => {
                if q.masses.len() != 2 || !(q.masses[0] < q.masses[1]) {
                    return Err(invalid(
                        "params.m",
                        "mass_threshold_scan needs exactly two increasing masses [low, high]",
                    ));
                }
                if q.bisection_steps == 0 || q.bisection_steps > 60 {
                    return Err(invalid("params.bisection_steps", "must lie in 1..=60"));
                }
            }
            ScenarioKind::ConvergenceStudy => {
                if q.cells.len() < 3 {
                    return Err(invalid("params.N", "need at least three grid sizes"));
                }
                if let Some(n) = q.cells.iter().find(|n| **n < crate::grid::MIN_CELLS) {
                    return Err(invalid("params.N", format!("every N must be at least 16, got {n}")));
                }
                if q.dt.len() < 3 {
                    return Err(invalid("params.dt", "need at least three step sizes"));
                }
                all_positive("params.dt", &q.dt)?;
                all_positive("params.rel_tol", &q.rel_tol)?;
            }
            ScenarioKind::SingleRun => {
                if q.peaks.len() != 1 || q.masses.len() != 1 {
                    return Err(invalid("params", "single_run takes exactly one M and one m"));
                }
                if q.mode == ModeKind::Coupled {
                    all_positive("params.eps", &q.eps)?;
                }
            }
            ScenarioKind::LimitBlowupSweep | ScenarioKind::ComparisonCheck => {}
        }
        Ok(())
    }

    pub fn p_monitor(&self) -> f64 {
        self.params
            .p_monitor
            .unwrap_or(self.physical.n as f64 / 2.0 + 1.0)
    }

    pub fn sample_time(&self) -> f64 {
        self.params.sample_time.unwrap_or(self.control.t_end.min(0.2))
    }
}
