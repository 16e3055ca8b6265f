//! The scalar nonlocal limit problem, the local power comparison problem and the
//! untransformed `v`-form, with blow-up detection and window diagnostics.
//!
//! Several scalar problems on the same grid can be advanced together as one
//! block-diagonal system; they then share every accepted time point, which is
//! what the cellwise comparison of `w` and `z` needs.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{pow_real, Profile, RadialGrid};
use crate::imex::{adaptive_step, AdaptiveSettings, ImexSystem};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarMode {
    /// `w_t = Δw + m w^{χ+1} / ∫w^χ`
    Nonlocal { mass: f64, chi: f64 },
    /// `z_t = Δz + c z^{χ+1}`
    LocalPower { coeff: f64, chi: f64 },
    /// `v_t = Δv - v + m v^{χ+1} / ∫v^χ`
    VForm { mass: f64, chi: f64 },
}

impl ScalarMode {
    pub fn chi(&self) -> f64 {
        match *self {
            ScalarMode::Nonlocal { chi, .. }
            | ScalarMode::LocalPower { chi, .. }
            | ScalarMode::VForm { chi, .. } => chi,
        }
    }

    /// `m` for the nonlocal modes.
    pub fn mass(&self) -> Option<f64> {
        match *self {
            ScalarMode::Nonlocal { mass, .. } | ScalarMode::VForm { mass, .. } => Some(mass),
            ScalarMode::LocalPower { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let chi = self.chi();
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::param("chi", format!("must be positive, got {chi}")));
        }
        match *self {
            ScalarMode::Nonlocal { mass, .. } | ScalarMode::VForm { mass, .. } => {
                if !(mass >= 0.0 && mass.is_finite()) {
                    return Err(Error::param("m", format!("must be nonnegative, got {mass}")));
                }
            }
            ScalarMode::LocalPower { coeff, .. } => {
                if !(coeff >= 0.0 && coeff.is_finite()) {
                    return Err(Error::param(
                        "lambda_coeff",
                        format!("must be nonnegative, got {coeff}"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn has_decay(&self) -> bool {
        matches!(self, ScalarMode::VForm { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarState {
    pub w: Profile,
    pub t: f64,
    pub mode: ScalarMode,
}

impl ScalarState {
    pub fn new(w: Profile, mode: ScalarMode) -> Result<Self> {
        mode.validate()?;
        Ok(ScalarState { w, t: 0.0, mode })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    pub rel_tol: f64,
    /// Blow-up threshold on the max norm; `None` means `1e8` times the initial max norm.
    pub max_norm: Option<f64>,
    pub t_end: f64,
    pub max_steps: usize,
    /// Multiplier on the reaction and taxis step caps.
    pub safety: f64,
}

impl StepControl {
    pub fn new(t_end: f64) -> Self {
        StepControl {
            dt_init: 1e-6 * t_end,
            dt_min: 1e-13 * t_end,
            rel_tol: 1e-6,
            max_norm: None,
            t_end,
            max_steps: 2_000_000,
            safety: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init) {
            return Err(Error::param(
                "dt_min",
                format!("need 0 < dt_min < dt_init, got {} and {}", self.dt_min, self.dt_init),
            ));
        }
        if !(self.rel_tol > 1e-12 && self.rel_tol < 1e-2) {
            return Err(Error::param(
                "rel_tol",
                format!("must lie in (1e-12, 1e-2), got {}", self.rel_tol),
            ));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::param("safety", format!("must lie in (0, 1], got {}", self.safety)));
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be positive"));
        }
        Ok(())
    }

    pub(crate) fn settings(&self) -> AdaptiveSettings {
        AdaptiveSettings {
            rel_tol: self.rel_tol,
            dt_min: self.dt_min,
            safety: self.safety,
        }
    }

    pub(crate) fn threshold(&self, initial_norm: f64) -> Result<f64> {
        let limit = match self.max_norm {
            Some(l) => l,
            None if initial_norm > 0.0 => 1e8 * initial_norm,
            None => f64::INFINITY,
        };
        if !(limit > initial_norm) {
            return Err(Error::param(
                "max_norm",
                format!("must exceed the initial max norm {initial_norm}, got {limit}"),
            ));
        }
        Ok(limit)
    }
}

fn check_positive(values: &[f64], chi: f64) -> Result<()> {
    if chi != chi.trunc() {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Domain(format!(
                "nonpositive value {v:e} in cell {i} with fractional exponent {chi}"
            )));
        }
    }
    Ok(())
}

/// Reaction without the linear decay of the `v`-form.
fn source(grid: &RadialGrid, mode: &ScalarMode, w: &[f64], out: &mut [f64]) -> Result<()> {
    let chi = mode.chi();
    check_positive(w, chi)?;
    let coeff = match *mode {
        ScalarMode::LocalPower { coeff, .. } => coeff,
        ScalarMode::Nonlocal { mass, .. } | ScalarMode::VForm { mass, .. } => {
            let integral = grid.integrate_slice(w, chi)?;
            if !(integral > 0.0) {
                return Err(Error::Domain(format!("nonpositive ∫w^χ = {integral:e}")));
            }
            mass / integral
        }
    };
    for (o, &v) in out.iter_mut().zip(w) {
        *o = coeff * v * pow_real(v, chi);
    }
    Ok(())
}

/// The full reaction: `m w^{χ+1}/∫w^χ`, `c z^{χ+1}`, or `m v^{χ+1}/∫v^χ - v`.
pub fn reaction_term(w: &Profile, mode: &ScalarMode) -> Result<Profile> {
    let mut out = vec![0.0; w.len()];
    source(w.grid(), mode, w.values(), &mut out)?;
    if mode.has_decay() {
        for (o, v) in out.iter_mut().zip(w.values()) {
            *o -= v;
        }
    }
    Profile::new(w.grid().clone(), out)
}

/// `k = m / ∫w^χ`.
pub fn k_of(state: &ScalarState) -> Result<f64> {
    let mass = state.mode.mass().ok_or_else(|| {
        Error::param("mode", "k(t) is only defined for the nonlocal modes")
    })?;
    Ok(mass / state.w.integrate(state.mode.chi())?)
}

/// `J = w_r + η r w^q`.
pub fn j_profile(w: &Profile, eta: f64, q: f64) -> Profile {
    let wr = w.radial_derivative();
    let values = w
        .grid()
        .centers()
        .iter()
        .zip(w.values())
        .zip(wr.values())
        .map(|((&r, &v), &d)| d + eta * r * pow_real(v, q))
        .collect();
    Profile::new(w.grid().clone(), values).expect("same grid")
}

/// Largest `J_i / (|w_r,i| + η r_i w_i^q)` over cells with `r_i < R/2`.
///
/// The ratio lies in `[-1, 1]` and is positive exactly where `J > 0`.
pub fn j_margin(w: &Profile, eta: f64, q: f64) -> f64 {
    let grid = w.grid();
    let wr = w.radial_derivative();
    let inner = grid.cells_below(0.5 * grid.radius());
    let mut worst = f64::NEG_INFINITY;
    for i in 0..inner {
        let r = grid.centers()[i];
        let pull = eta * r * pow_real(w.values()[i], q);
        let d = wr.values()[i];
        let scale = d.abs() + pull;
        if scale > 0.0 {
            worst = worst.max((d + pull) / scale);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JParams {
    pub eta: f64,
    pub q: f64,
}

impl JParams {
    /// `q` at the midpoint of `(2χ/n + 1, χ + 1)` and `η = min{μ, (χ+1-q)λ/q}`.
    pub fn standard(chi: f64, dim: usize, lambda: f64, mu: f64) -> Self {
        let q = 0.5 * (2.0 * chi / dim as f64 + 1.0 + chi + 1.0);
        let eta = mu.min((chi + 1.0 - q) * lambda / q);
        JParams { eta, q }
    }
}

/// `M_eff^{-χ} / (λχ)`, an upper bound for the blow-up time of
/// `z_t = Δz + 2λ z^{χ+1}` from data with peak `M_eff`.
pub fn ode_minorant_blowup_time(m_eff: f64, lambda: f64, chi: f64) -> f64 {
    m_eff.powf(-chi) / (lambda * chi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monitors {
    /// Record a history row every this many accepted steps (and at the end).
    pub history_every: usize,
    pub lp_exponents: Vec<f64>,
    pub j: Option<JParams>,
}

impl Default for Monitors {
    fn default() -> Self {
        Monitors {
            history_every: 1,
            lp_exponents: Vec::new(),
            j: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    BlewUp { t_detect: f64 },
    ReachedEnd,
    StepLimit,
    /// The comparison window `k ≥ 2λ` closed before either end was reached.
    WindowClosed { t: f64 },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::BlewUp { .. } => "blew_up",
            Outcome::ReachedEnd => "reached_t_end",
            Outcome::StepLimit => "step_limit",
            Outcome::WindowClosed { .. } => "window_closed",
        }
    }

    pub fn t_detect(&self) -> Option<f64> {
        match *self {
            Outcome::BlewUp { t_detect } => Some(t_detect),
            _ => None,
        }
    }
}

/// Per accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub dt: f64,
    pub linf: f64,
    pub min: f64,
    pub k: Option<f64>,
    /// Share of the discrete `∫w^χ` held by the innermost cell.
    pub core_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub t: f64,
    pub linf: f64,
    pub lp: Vec<f64>,
    pub min: f64,
    pub k: Option<f64>,
    pub j_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub outcome: Outcome,
    pub history: Vec<HistoryRecord>,
    pub trace: Vec<TracePoint>,
    pub extrapolated_t: Option<f64>,
    pub steps: usize,
    pub rejections: usize,
    pub final_state: ScalarState,
}

impl BlowupReport {
    /// Time of the last accepted step.
    pub fn end_time(&self) -> f64 {
        self.final_state.t
    }

    pub fn max_linf(&self) -> f64 {
        self.trace.iter().map(|p| p.linf).fold(0.0, f64::max)
    }
}

pub(crate) struct BlockSystem {
    grid: Arc<RadialGrid>,
    modes: Vec<ScalarMode>,
    op: Tridiagonal,
}

impl BlockSystem {
    pub(crate) fn new(grid: &Arc<RadialGrid>, modes: Vec<ScalarMode>) -> Result<Self> {
        for m in &modes {
            m.validate()?;
        }
        let (lo, di, up) = grid.laplacian_stencil();
        let lap = Tridiagonal::new(lo.to_vec(), di.to_vec(), up.to_vec());
        let decay = lap.affine(1.0, -1.0);
        let parts: Vec<&Tridiagonal> = modes
            .iter()
            .map(|m| if m.has_decay() { &decay } else { &lap })
            .collect();
        let op = Tridiagonal::block_diag(&parts);
        Ok(BlockSystem {
            grid: grid.clone(),
            modes,
            op,
        })
    }

    fn range(&self, b: usize) -> Range<usize> {
        let n = self.grid.cells();
        b * n..(b + 1) * n
    }
}

impl ImexSystem for BlockSystem {
    fn implicit_operator(&self) -> &Tridiagonal {
        &self.op
    }

    fn explicit_rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        for (b, mode) in self.modes.iter().enumerate() {
            let r = self.range(b);
            source(&self.grid, mode, &y[r.clone()], &mut out[r])?;
        }
        Ok(())
    }

    fn blocks(&self) -> Vec<Range<usize>> {
        (0..self.modes.len()).map(|b| self.range(b)).collect()
    }

    /// `1/((χ+1) g)` with `g` the reaction's Lipschitz scale `coeff (χ+1) ‖w‖^χ`.
    fn dt_cap(&self, y: &[f64]) -> f64 {
        let mut cap = f64::INFINITY;
        for (b, mode) in self.modes.iter().enumerate() {
            let w = &y[self.range(b)];
            let chi = mode.chi();
            let coeff = match *mode {
                ScalarMode::LocalPower { coeff, .. } => coeff,
                ScalarMode::Nonlocal { mass, .. } | ScalarMode::VForm { mass, .. } => {
                    match self.grid.integrate_slice(w, chi) {
                        Ok(i) if i > 0.0 => mass / i,
                        _ => continue,
                    }
                }
            };
            let norm = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let g = coeff * (chi + 1.0) * pow_real(norm, chi);
            if g > 0.0 {
                cap = cap.min(1.0 / ((chi + 1.0) * g));
            }
        }
        cap
    }
}

pub(crate) enum DriveEnd {
    BlewUp(f64),
    ReachedEnd,
    StepLimit,
    Stopped,
}

pub(crate) struct Drive {
    pub end: DriveEnd,
    pub t: f64,
    pub y: Vec<f64>,
    pub steps: usize,
    pub rejections: usize,
}

/// Integrates `sys` from `(t0, y0)` until `ctrl.t_end`, the step limit, or blow-up.
///
/// Blow-up is declared when `norm` reaches the threshold, or when the step
/// size underflows while `norm` is rising. Steps are clipped so that every time
/// in `stops` is hit exactly. `on_accept(t, y, dt)` runs after every accepted
/// step and may stop the run by returning `false`.
pub(crate) fn drive<S: ImexSystem>(
    sys: &S,
    t0: f64,
    y0: Vec<f64>,
    ctrl: &StepControl,
    stops: &[f64],
    norm: impl Fn(&[f64]) -> f64,
    mut on_accept: impl FnMut(f64, &[f64], f64) -> Result<bool>,
) -> Result<Drive> {
    ctrl.validate()?;
    let limit = ctrl.threshold(norm(&y0))?;
    let settings = ctrl.settings();
    let (mut t, mut y, mut dt) = (t0, y0, ctrl.dt_init);
    let mut prev_norm = norm(&y);
    let mut rising = false;
    let mut steps = 0;
    let mut rejections = 0;
    let end = loop {
        if t >= ctrl.t_end {
            break DriveEnd::ReachedEnd;
        }
        if steps >= ctrl.max_steps {
            break DriveEnd::StepLimit;
        }
        let t_stop = stops
            .iter()
            .copied()
            .find(|&s| s > t && s < ctrl.t_end)
            .unwrap_or(ctrl.t_end);
        let acc = match adaptive_step(sys, t, &y, dt, t_stop, &settings) {
            Ok(acc) => acc,
            Err(Error::DtUnderflow { .. }) if rising => break DriveEnd::BlewUp(t),
            Err(e) => return Err(e),
        };
        t = if acc.dt == t_stop - t { t_stop } else { t + acc.dt };
        y = acc.y;
        dt = acc.dt_next;
        steps += 1;
        rejections += acc.rejections;
        let current = norm(&y);
        rising = current > prev_norm;
        prev_norm = current;
        if !on_accept(t, &y, acc.dt)? {
            break DriveEnd::Stopped;
        }
        if current >= limit {
            break DriveEnd::BlewUp(t);
        }
    };
    Ok(Drive {
        end,
        t,
        y,
        steps,
        rejections,
    })
}

pub(crate) fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn trace_point(grid: &RadialGrid, mode: &ScalarMode, w: &[f64], t: f64, dt: f64) -> TracePoint {
    let linf = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let (k, core_share) = match mode.mass() {
        Some(mass) => match grid.integrate_slice(w, mode.chi()) {
            Ok(i) => (
                Some(mass / i),
                Some(grid.volumes()[0] * pow_real(w[0], mode.chi()) / i),
            ),
            Err(_) => (None, None),
        },
        None => (None, None),
    };
    TracePoint {
        t,
        dt,
        linf,
        min,
        k,
        core_share,
    }
}

fn history_record(w: &Profile, point: &TracePoint, monitors: &Monitors) -> HistoryRecord {
    HistoryRecord {
        t: point.t,
        linf: point.linf,
        lp: monitors
            .lp_exponents
            .iter()
            .map(|&q| w.lp_norm(q).unwrap_or(f64::NAN))
            .collect(),
        min: point.min,
        k: point.k,
        j_margin: monitors.j.map(|j| j_margin(w, j.eta, j.q)),
    }
}

/// Least-squares line through `(t, ‖w‖^{-χ})` over the final decade of growth,
/// extrapolated to zero.
pub fn extrapolate_blowup_time(trace: &[TracePoint], chi: f64) -> Option<f64> {
    let last = trace.last()?.linf;
    let mut pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|p| p.linf >= 0.1 * last)
        .map(|p| (p.t, pow_real(p.linf, -chi)))
        .collect();
    if pts.len() < 3 {
        let skip = trace.len().saturating_sub(3);
        pts = trace[skip..].iter().map(|p| (p.t, pow_real(p.linf, -chi))).collect();
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mt, my) = (st / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), p| {
        (a + (p.0 - mt) * (p.1 - my), b + (p.0 - mt) * (p.0 - mt))
    });
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    Some(mt - my / slope)
}

/// One accepted adaptive step from `state`, trying `ctrl.dt_init` first.
pub fn step(state: &ScalarState, ctrl: &StepControl) -> Result<(ScalarState, f64)> {
    ctrl.validate()?;
    let sys = BlockSystem::new(state.w.grid(), vec![state.mode])?;
    let acc = adaptive_step(
        &sys,
        state.t,
        state.w.values(),
        ctrl.dt_init,
        ctrl.t_end,
        &ctrl.settings(),
    )?;
    let w = Profile::new(state.w.grid().clone(), acc.y)?;
    Ok((
        ScalarState {
            w,
            t: state.t + acc.dt,
            mode: state.mode,
        },
        acc.dt,
    ))
}

pub fn run(state0: &ScalarState, ctrl: &StepControl, monitors: &Monitors) -> Result<BlowupReport> {
    run_with_observer(state0, ctrl, monitors, |_| Ok(()))
}

/// As [`run`], calling `observer` with the state after every accepted step.
pub fn run_with_observer(
    state0: &ScalarState,
    ctrl: &StepControl,
    monitors: &Monitors,
    mut observer: impl FnMut(&ScalarState) -> Result<()>,
) -> Result<BlowupReport> {
    if monitors.lp_exponents.iter().any(|&q| !(q >= 1.0)) {
        return Err(Error::param("lp_exponents", "every exponent must be at least 1"));
    }
    let grid = state0.w.grid().clone();
    let mode = state0.mode;
    let sys = BlockSystem::new(&grid, vec![mode])?;
    let every = monitors.history_every.max(1);

    let first = trace_point(&grid, &mode, state0.w.values(), state0.t, 0.0);
    let mut trace = vec![first];
    let mut history = vec![history_record(&state0.w, &first, monitors)];
    let mut steps_seen = 0usize;

    let drive = drive(&sys, state0.t, state0.w.values().to_vec(), ctrl, &[], linf, |t, y, dt| {
        let point = trace_point(&grid, &mode, y, t, dt);
        trace.push(point);
        steps_seen += 1;
        let state = ScalarState {
            w: Profile::new(grid.clone(), y.to_vec())?,
            t,
            mode,
        };
        if steps_seen.is_multiple_of(every) {
            history.push(history_record(&state.w, &point, monitors));
        }
        observer(&state)?;
        Ok(true)
    })?;

    let final_w = Profile::new(grid.clone(), drive.y)?;
    let last = *trace.last().expect("trace starts with t0");
    if history.last().map(|h| h.t) != Some(last.t) {
        history.push(history_record(&final_w, &last, monitors));
    }
    let outcome = match drive.end {
        DriveEnd::BlewUp(t) => Outcome::BlewUp { t_detect: t },
        DriveEnd::ReachedEnd => Outcome::ReachedEnd,
        DriveEnd::StepLimit | DriveEnd::Stopped => Outcome::StepLimit,
    };
    let extrapolated_t = match outcome {
        Outcome::BlewUp { .. } => extrapolate_blowup_time(&trace, mode.chi()),
        _ => None,
    };
    Ok(BlowupReport {
        outcome,
        history,
        trace,
        extrapolated_t,
        steps: drive.steps,
        rejections: drive.rejections,
        final_state: ScalarState {
            w: final_w,
            t: drive.t,
            mode,
        },
    })
}

/// Status of the window on which `k(t) ≥ 2λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStatus {
    /// `T₀ = min{m^{-2}, T_detect}` (or the end of the run).
    pub t0: f64,
    /// First recorded time in `[0, T₀]` with `k < 2λ`.
    pub t1: Option<f64>,
    /// Last time at which the discrete `k` was trusted.
    pub resolved_until: f64,
}

/// Share of `∫w^χ` in the innermost cell beyond which the discrete `k` no
/// longer approximates the continuum value.
pub const CORE_SHARE_LIMIT: f64 = 0.5;

/// Locates the first exit of `k(t)` from `[2λ, ∞)` on `[0, T₀]`.
///
/// Samples where the innermost cell carries more than half of `∫w^χ` are past
/// the grid's resolution horizon and are skipped.
pub fn detect_t1(report: &BlowupReport, lambda: f64) -> Result<WindowStatus> {
    let mass = report.final_state.mode.mass().ok_or_else(|| {
        Error::param("mode", "the k window is only defined for the nonlocal modes")
    })?;
    let end = report.outcome.t_detect().unwrap_or(report.end_time());
    let t0 = if mass > 0.0 { mass.powi(-2).min(end) } else { end };
    let mut resolved_until = 0.0;
    for p in report.trace.iter().take_while(|p| p.t <= t0) {
        let (Some(k), Some(share)) = (p.k, p.core_share) else {
            continue;
        };
        if share > CORE_SHARE_LIMIT {
            break;
        }
        resolved_until = p.t;
        if k < 2.0 * lambda {
            return Ok(WindowStatus {
                t0,
                t1: Some(p.t),
                resolved_until,
            });
        }
    }
    Ok(WindowStatus {
        t0,
        t1: None,
        resolved_until,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub outcome: Outcome,
    /// Worst `min_i (w_i - z_i) / ‖w‖_∞` over steps with `k ≥ 2λ`.
    pub worst_gap: f64,
    pub checked_steps: usize,
    /// First accepted time with `k < 2λ` (or past the resolution horizon).
    pub window_closed_at: Option<f64>,
    pub end_time: f64,
    pub steps: usize,
}

impl ComparisonReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.worst_gap >= -tol
    }
}

/// Advances the nonlocal problem and `z_t = Δz + 2λ z^{χ+1}` from the same data
/// on shared time points and records how far `w` falls below `z`.
pub fn run_comparison(
    w0: &Profile,
    mass: f64,
    lambda: f64,
    chi: f64,
    ctrl: &StepControl,
) -> Result<ComparisonReport> {
    let grid = w0.grid().clone();
    let n = grid.cells();
    let nonlocal = ScalarMode::Nonlocal { mass, chi };
    let local = ScalarMode::LocalPower {
        coeff: 2.0 * lambda,
        chi,
    };
    let sys = BlockSystem::new(&grid, vec![nonlocal, local])?;
    let mut y0 = w0.values().to_vec();
    y0.extend_from_slice(w0.values());

    let gap = |y: &[f64]| {
        let (w, z) = y.split_at(n);
        let norm = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        w.iter().zip(z).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min) / norm
    };
    let open = |y: &[f64]| {
        let p = trace_point(&grid, &nonlocal, &y[..n], 0.0, 0.0);
        matches!((p.k, p.core_share), (Some(k), Some(s)) if k >= 2.0 * lambda && s <= CORE_SHARE_LIMIT)
    };

    let mut worst_gap = 0.0_f64;
    let mut checked = 0usize;
    let mut closed_at = None;
    if open(&y0) {
        worst_gap = worst_gap.min(gap(&y0));
        checked += 1;
    } else {
        closed_at = Some(0.0);
    }
    let drive = drive(&sys, 0.0, y0, ctrl, &[], linf, |t, y, _| {
        if closed_at.is_some() {
            return Ok(false);
        }
        if open(y) {
            worst_gap = worst_gap.min(gap(y));
            checked += 1;
            Ok(true)
        } else {
            closed_at = Some(t);
            Ok(false)
        }
    })?;
    let outcome = match drive.end {
        DriveEnd::BlewUp(t) => Outcome::BlewUp { t_detect: t },
        DriveEnd::ReachedEnd => Outcome::ReachedEnd,
        DriveEnd::StepLimit => Outcome::StepLimit,
        DriveEnd::Stopped => Outcome::WindowClosed { t: drive.t },
    };
    Ok(ComparisonReport {
        outcome,
        worst_gap,
        checked_steps: checked,
        window_closed_at: closed_at,
        end_time: drive.t,
        steps: drive.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{construct_w0, InitialDataParams};

    fn unit_grid(cells: usize) -> Arc<RadialGrid> {
        RadialGrid::new(3, 1.0, cells).unwrap()
    }

    #[test]
    fn reaction_of_constant_nonlocal() {
        let g = unit_grid(64);
        let w = Profile::constant(&g, 2.5);
        let r = reaction_term(&w, &ScalarMode::Nonlocal { mass: 1.0, chi: 2.0 }).unwrap();
        let want = 2.5 * 3.0 / (4.0 * std::f64::consts::PI);
        assert!(r.values().iter().all(|v| (v - want).abs() < 1e-14));
    }

    #[test]
    fn reaction_local_power_and_v_form() {
        let g = unit_grid(32);
        let one = Profile::constant(&g, 1.0);
        let r = reaction_term(&one, &ScalarMode::LocalPower { coeff: 24.0, chi: 2.0 }).unwrap();
        assert!(r.values().iter().all(|&v| v == 24.0));
        let rv = reaction_term(&one, &ScalarMode::VForm { mass: 1.0, chi: 2.0 }).unwrap();
        let want = 3.0 / (4.0 * std::f64::consts::PI) - 1.0;
        assert!(rv.values().iter().all(|v| (v - want).abs() < 1e-14));
    }

    #[test]
    fn reaction_rejects_nonpositive_fractional() {
        let g = unit_grid(16);
        let mut w = Profile::constant(&g, 1.0);
        w.values_mut()[3] = -0.1;
        let mode = ScalarMode::Nonlocal { mass: 1.0, chi: 1.5 };
        assert!(matches!(reaction_term(&w, &mode), Err(Error::Domain(_))));
    }

    #[test]
    fn k_of_constant_and_linear_in_mass() {
        let g = unit_grid(128);
        let s = ScalarState::new(Profile::constant(&g, 1.0), ScalarMode::Nonlocal { mass: 1.0, chi: 2.0 })
            .unwrap();
        let k = k_of(&s).unwrap();
        assert!((k - 3.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-14);
        let s2 = ScalarState {
            mode: ScalarMode::Nonlocal { mass: 2.0, chi: 2.0 },
            ..s.clone()
        };
        assert_eq!(k_of(&s2).unwrap(), 2.0 * k);
    }

    #[test]
    fn j_of_constant_is_positive() {
        let g = unit_grid(64);
        let j = j_profile(&Profile::constant(&g, 1.0), 0.1, 2.0);
        for (&r, &v) in g.centers().iter().zip(j.values()) {
            assert!((v - 0.1 * r).abs() < 1e-15);
        }
    }

    #[test]
    fn j_of_initial_data_is_nonpositive() {
        let g = unit_grid(2048);
        let params = InitialDataParams::new(2.0, 3, 1.0, 8.0).unwrap();
        let (w0, c) = construct_w0(&g, &params).unwrap();
        assert!(j_margin(&w0, c.mu, 3.0) <= 1e-6);
    }

    #[test]
    fn ode_minorant_values() {
        assert!((ode_minorant_blowup_time(16.0, 12.0, 2.0) - 1.0 / 6144.0).abs() < 1e-18);
        assert_eq!(
            ode_minorant_blowup_time(16.0, 24.0, 2.0),
            0.5 * ode_minorant_blowup_time(16.0, 12.0, 2.0)
        );
        assert!(ode_minorant_blowup_time(1e200, 1.0, 2.0) < 1e-300);
    }

    #[test]
    fn uniform_exponential_growth() {
        let g = unit_grid(64);
        let s = ScalarState::new(Profile::constant(&g, 1.0), ScalarMode::Nonlocal { mass: 1.0, chi: 2.0 })
            .unwrap();
        let ctrl = StepControl::new(1.0);
        let rep = run(&s, &ctrl, &Monitors::default()).unwrap();
        assert_eq!(rep.outcome, Outcome::ReachedEnd);
        assert_eq!(rep.end_time(), 1.0);
        let want = (3.0 / (4.0 * std::f64::consts::PI)).exp();
        let got = rep.final_state.w.linf_norm();
        assert!((got - want).abs() / want < 10.0 * ctrl.rel_tol);
    }

    #[test]
    fn local_power_blows_up_at_ode_time() {
        let g = unit_grid(64);
        let s = ScalarState::new(
            Profile::constant(&g, 1.0),
            ScalarMode::LocalPower { coeff: 24.0, chi: 2.0 },
        )
        .unwrap();
        let rep = run(&s, &StepControl::new(1.0), &Monitors::default()).unwrap();
        let t = rep.outcome.t_detect().expect("blow-up");
        assert!((0.0204..=0.0209).contains(&t), "t = {t}");
        let ext = rep.extrapolated_t.unwrap();
        assert!((ext - 1.0 / 48.0).abs() < 0.02 / 48.0, "ext = {ext}");
    }

    #[test]
    fn heat_flow_conserves_mass() {
        let g = unit_grid(128);
        let w = Profile::from_fn(&g, |r| 1.0 + (3.0 * r).cos());
        let mass0 = w.integrate(1.0).unwrap();
        let s = ScalarState::new(w, ScalarMode::LocalPower { coeff: 0.0, chi: 2.0 }).unwrap();
        let rep = run(&s, &StepControl::new(1.0), &Monitors::default()).unwrap();
        let w1 = &rep.final_state.w;
        assert!((w1.integrate(1.0).unwrap() - mass0).abs() < 1e-10 * mass0);
        let mean = mass0 / g.ball_volume();
        assert!(w1.values().iter().all(|v| (v - mean).abs() < 1e-3));
    }

    #[test]
    fn single_step_advances_time() {
        let g = unit_grid(32);
        let s = ScalarState::new(Profile::constant(&g, 1.0), ScalarMode::Nonlocal { mass: 1.0, chi: 2.0 })
            .unwrap();
        let ctrl = StepControl::new(1.0);
        let (s1, dt) = step(&s, &ctrl).unwrap();
        assert!(dt > 0.0 && dt <= ctrl.dt_init);
        assert_eq!(s1.t, dt);
    }

    #[test]
    fn v_form_matches_rescaled_nonlocal() {
        let g = unit_grid(128);
        let v0 = Profile::from_fn(&g, |r| 2.0 + (2.0 * r).cos());
        let ctrl = StepControl::new(0.5);
        let w = run(
            &ScalarState::new(v0.clone(), ScalarMode::Nonlocal { mass: 2.0, chi: 2.0 }).unwrap(),
            &ctrl,
            &Monitors::default(),
        )
        .unwrap();
        let v = run(
            &ScalarState::new(v0, ScalarMode::VForm { mass: 2.0, chi: 2.0 }).unwrap(),
            &ctrl,
            &Monitors::default(),
        )
        .unwrap();
        let scale = 0.5f64.exp();
        let ww = w.final_state.w.values();
        let norm = w.final_state.w.linf_norm();
        for (a, b) in v.final_state.w.values().iter().zip(ww) {
            assert!((scale * a - b).abs() <= 20.0 * ctrl.rel_tol * norm);
        }
    }

    #[test]
    fn window_fails_immediately_for_tiny_mass() {
        let g = unit_grid(512);
        let params = InitialDataParams::new(2.0, 3, 1.0, 8.0).unwrap();
        let (w0, c) = construct_w0(&g, &params).unwrap();
        let s = ScalarState::new(w0, ScalarMode::Nonlocal { mass: 1.0, chi: 2.0 }).unwrap();
        let rep = run(&s, &StepControl::new(1e-3), &Monitors::default()).unwrap();
        let status = detect_t1(&rep, c.lambda).unwrap();
        assert_eq!(status.t1, Some(0.0));
    }

    #[test]
    fn step_control_validation() {
        let mut c = StepControl::new(1.0);
        c.rel_tol = 0.1;
        assert!(c.validate().is_err());
        let mut c = StepControl::new(1.0);
        c.dt_min = c.dt_init;
        assert!(c.validate().is_err());
        assert!(StepControl::new(1.0).threshold(2.0).unwrap() == 2e8);
        let mut c = StepControl::new(1.0);
        c.max_norm = Some(1.0);
        assert!(c.threshold(2.0).is_err());
    }

    #[test]
    fn extrapolation_is_exact_for_power_law() {
        // ‖w‖^{-2} = 48 (T - t) with T = 0.3
        let trace: Vec<TracePoint> = (0..50)
            .map(|i| {
                let t = 0.3 * (1.0 - 0.8f64.powi(i));
                TracePoint {
                    t,
                    dt: 0.0,
                    linf: (48.0 * (0.3 - t)).powf(-0.5),
                    min: 1.0,
                    k: None,
                    core_share: None,
                }
            })
            .collect();
        let ext = extrapolate_blowup_time(&trace, 2.0).unwrap();
        assert!((ext - 0.3).abs() < 1e-12);
    }
}
