//! The six scenarios and their property checks.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{InitialKind, ModeKind, ScenarioConfig, ScenarioKind};
use super::convergence::{self, Manufactured};
use super::output::{HistoryRow, ResultRow, ScenarioOutput, Snapshot};
use crate::coupled::{run_coupled, CoupledMonitors, CoupledRunReport, CoupledState};
use crate::error::{Error, Result};
use crate::grid::{Profile, RadialGrid};
use crate::initial_data::{ConstructionConstants, InitialData, InitialDataParams};
use crate::scalar::{
    detect_t1, ode_minorant_blowup_time, run_comparison, run_with_observer, BlowupReport, JParams,
    Monitors, Outcome, ScalarMode, ScalarState,
};

/// Slack on the ODE-minorant bound.
pub const BOUND_SLACK: f64 = 0.1;
pub const COMPARISON_TOL: f64 = 1e-6;
pub const FLOOR_TOL: f64 = 1e-8;
pub const MONOTONE_TOL: f64 = 1e-6;
pub const MASS_TOL: f64 = 1e-9;
pub const V_BOUND_TOL: f64 = 1e-6;
pub const U_NEG_TOL: f64 = 1e-10;

struct Run {
    rows: Vec<ResultRow>,
    histories: Vec<(String, Vec<HistoryRow>)>,
    snapshots: Vec<(String, Snapshot)>,
    timings: Vec<(String, f64)>,
}

impl Run {
    fn row(row: ResultRow, label: String, secs: f64) -> Self {
        Run {
            rows: vec![row],
            histories: Vec::new(),
            snapshots: Vec::new(),
            timings: vec![(label, secs)],
        }
    }
}

fn grid_of(cfg: &ScenarioConfig) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(cfg.physical.n, cfg.physical.radius, cfg.grid.cells)
}

fn initial_data(cfg: &ScenarioConfig, peak: f64) -> Result<InitialData> {
    InitialData::new(InitialDataParams::new(
        cfg.physical.chi,
        cfg.physical.n,
        cfg.physical.radius,
        peak,
    )?)
}

fn j_params(cfg: &ScenarioConfig, c: &ConstructionConstants) -> JParams {
    let chi = cfg.physical.chi;
    match cfg.params.q {
        Some(q) => JParams {
            eta: c.mu.min((chi + 1.0 - q) * c.lambda / q),
            q,
        },
        None => JParams::standard(chi, cfg.physical.n, c.lambda, c.mu),
    }
}

fn scalar_history(report: &BlowupReport) -> Vec<HistoryRow> {
    report
        .history
        .iter()
        .map(|h| HistoryRow {
            t: h.t,
            linf: Some(h.linf),
            lp: h.lp.first().copied(),
            min: Some(h.min),
            k: h.k,
            j_margin: h.j_margin,
            ..HistoryRow::default()
        })
        .collect()
}

fn coupled_history(report: &CoupledRunReport) -> Vec<HistoryRow> {
    report
        .history
        .iter()
        .map(|h| HistoryRow {
            t: h.t,
            linf: Some(h.u_linf),
            lp: Some(h.u_lp),
            min: None,
            k: None,
            j_margin: None,
            v_min: Some(h.v_min),
            v_linf: Some(h.v_linf),
            mass_drift: Some(h.mass_drift),
            residual: Some(h.residual),
        })
        .collect()
}

/// Worst violations seen by the per-step observer of a nonlocal run.
#[derive(Default)]
struct StepChecks {
    min_value: f64,
    max_rise: f64,
}

/// Nonlocal run from the constructed data, with floor and monotonicity checks
/// on every accepted step.
fn nonlocal_blowup(
    cfg: &ScenarioConfig,
    grid: &Arc<RadialGrid>,
    data: &InitialData,
    mass: f64,
) -> Result<(BlowupReport, StepChecks)> {
    let w0 = data.sample(grid)?;
    let consts = data.constants();
    let state = ScalarState::new(
        w0,
        ScalarMode::Nonlocal {
            mass,
            chi: cfg.physical.chi,
        },
    )?;
    let monitors = Monitors {
        history_every: cfg.output.history_every,
        lp_exponents: vec![cfg.p_monitor()],
        j: Some(j_params(cfg, &consts)),
    };
    let mut checks = StepChecks {
        min_value: state.w.min_value(),
        max_rise: f64::NEG_INFINITY,
    };
    let report = run_with_observer(&state, &cfg.control.step_control(), &monitors, |s| {
        checks.min_value = checks.min_value.min(s.w.min_value());
        // cell differences, not the one-sided boundary derivative
        let scale = s.w.linf_norm();
        let rise = s.w.values().windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max);
        checks.max_rise = checks.max_rise.max(rise / scale);
        Ok(())
    })?;
    Ok((report, checks))
}

fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Vec<Result<U>> {
    items.par_iter().map(f).collect()
}

fn pairs(cfg: &ScenarioConfig) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &m in &cfg.params.masses {
        for &peak in &cfg.params.peaks {
            out.push((peak, m));
        }
    }
    out
}

fn blowup_sweep(cfg: &ScenarioConfig) -> Vec<Result<Run>> {
    let items: Vec<(usize, (f64, f64))> = pairs(cfg).into_iter().enumerate().collect();
    let mut runs = par_map(&items, |&(run, (peak, mass))| {
        let started = Instant::now();
        let grid = grid_of(cfg)?;
        let data = initial_data(cfg, peak)?;
        let c = data.constants();
        let (report, checks) = nonlocal_blowup(cfg, &grid, &data, mass)?;
        let window = detect_t1(&report, c.lambda)?;

        let mut row = ResultRow::new(cfg, run);
        row.peak = Some(peak);
        row.mass = Some(mass);
        row.outcome = report.outcome.label().to_string();
        row.t_detect = report.outcome.t_detect();
        row.extrapolated_t = report.extrapolated_t;
        let bound = ode_minorant_blowup_time(data.peak_value(), c.lambda, cfg.physical.chi);
        row.ode_bound = Some(bound);
        row.max_linf = Some(report.max_linf());
        row.max_lp = report
            .history
            .iter()
            .filter_map(|h| h.lp.first().copied())
            .reduce(f64::max);
        row.t0 = Some(window.t0);
        row.t1 = window.t1;
        row.j_margin = report
            .history
            .iter()
            .filter(|h| h.t <= window.resolved_until)
            .filter_map(|h| h.j_margin)
            .reduce(f64::max);
        row.metric = "k0".into();
        let k0 = report.trace[0].k.unwrap_or(f64::NAN);
        row.value = Some(k0);

        if k0 < 4.0 * c.lambda {
            row.t1_status = "window_failed_at_t0".into();
        } else if let Some(t1) = window.t1 {
            row.t1_status = format!("exit_at_{t1:e}");
        } else {
            row.t1_status = "t1_eq_t0".into();
            match report.outcome.t_detect() {
                Some(t) if t <= bound * (1.0 + BOUND_SLACK) => {}
                Some(_) => row.flag("ode_minorant_bound"),
                None => row.flag("no_blowup"),
            }
        }
        if checks.min_value < 1.0 - FLOOR_TOL {
            row.flag("floor_preservation");
        }
        if checks.max_rise > MONOTONE_TOL {
            row.flag("radial_monotonicity");
        }
        let label = format!("{}_{run:03}", cfg.scenario.name());
        Ok(Run {
            rows: vec![row],
            histories: vec![(label.clone(), scalar_history(&report))],
            snapshots: Vec::new(),
            timings: vec![(label, started.elapsed().as_secs_f64())],
        })
    });

    // T_detect must strictly decrease along increasing M at fixed m
    let mut last: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| items[a].1 .0.total_cmp(&items[b].1 .0));
    for i in order {
        let (peak, mass) = items[i].1;
        let Ok(run) = &mut runs[i] else { continue };
        let row = &mut run.rows[0];
        let Some(t) = row.t_detect else { continue };
        if let Some(&(prev_peak, prev_t)) = last.get(&mass.to_bits()) {
            if prev_peak < peak && t >= prev_t {
                row.flag("monotone_in_M");
            }
        }
        last.insert(mass.to_bits(), (peak, t));
    }
    runs
}

fn comparison(cfg: &ScenarioConfig) -> Vec<Result<Run>> {
    let items: Vec<(usize, (f64, f64))> = pairs(cfg).into_iter().enumerate().collect();
    par_map(&items, |&(run, (peak, mass))| {
        let started = Instant::now();
        let grid = grid_of(cfg)?;
        let data = initial_data(cfg, peak)?;
        let c = data.constants();
        let w0 = data.sample(&grid)?;
        let rep = run_comparison(&w0, mass, c.lambda, cfg.physical.chi, &cfg.control.step_control())?;
        let mut row = ResultRow::new(cfg, run);
        row.peak = Some(peak);
        row.mass = Some(mass);
        row.outcome = rep.outcome.label().to_string();
        row.t_detect = rep.outcome.t_detect();
        row.t1 = rep.window_closed_at;
        row.t1_status = match rep.window_closed_at {
            Some(0.0) => "window_failed_at_t0".into(),
            Some(_) => "window_closed".into(),
            None => "window_open".into(),
        };
        row.metric = "worst_gap".into();
        row.value = Some(rep.worst_gap);
        if !rep.passed(COMPARISON_TOL) {
            row.flag("comparison_principle");
        }
        Ok(Run::row(row, format!("{}_{run:03}", cfg.scenario.name()), started.elapsed().as_secs_f64()))
    })
}

fn ladder_state(cfg: &ScenarioConfig, grid: &Arc<RadialGrid>, peak: f64, mass: f64, eps: f64) -> Result<CoupledState> {
    let v0 = match cfg.params.initial {
        InitialKind::W0 => initial_data(cfg, peak)?.sample(grid)?,
        InitialKind::Constant => Profile::constant(grid, cfg.params.constant),
    };
    let u0 = Profile::constant(grid, mass / grid.ball_volume());
    CoupledState::new(u0, v0, eps, cfg.physical.chi)
}

fn coupled_flags(row: &mut ResultRow, rep: &CoupledRunReport) {
    if rep.max_mass_drift > MASS_TOL {
        row.flag("mass_conservation");
    }
    if rep.min_v_bound_ratio < 1.0 - V_BOUND_TOL {
        row.flag("v_lower_bound");
    }
    if rep.min_u_relative < -U_NEG_TOL {
        row.flag("u_nonnegativity");
    }
}

fn ladder(cfg: &ScenarioConfig) -> Vec<Result<Run>> {
    let sample = cfg.sample_time();
    let mut items = Vec::new();
    for (peak, mass) in pairs(cfg) {
        for &eps in &cfg.params.eps {
            items.push((items.len(), peak, mass, eps));
        }
    }
    let mut runs = par_map(&items, |&(run, peak, mass, eps)| {
        let started = Instant::now();
        let grid = grid_of(cfg)?;
        let state = ladder_state(cfg, &grid, peak, mass, eps)?;
        let monitors = CoupledMonitors {
            history_every: cfg.output.history_every,
            sample_times: vec![sample],
        };
        let rep = run_coupled(&state, &cfg.control.step_control(), cfg.p_monitor(), &monitors)?;
        let mut row = ResultRow::new(cfg, run);
        row.peak = Some(peak);
        row.mass = Some(mass);
        row.eps = Some(eps);
        row.outcome = rep.outcome.label().to_string();
        row.t_detect = rep.outcome.t_detect();
        row.max_lp = Some(rep.sup_u_lp);
        row.max_linf = rep.history.iter().map(|h| h.u_linf).reduce(f64::max);
        row.residual = rep.samples.first().map(|s| s.residual);
        row.metric = "mass_drift".into();
        row.value = Some(rep.max_mass_drift);
        coupled_flags(&mut row, &rep);
        let label = format!("{}_{run:03}", cfg.scenario.name());
        Ok(Run {
            rows: vec![row],
            histories: vec![(label.clone(), coupled_history(&rep))],
            snapshots: Vec::new(),
            timings: vec![(label, started.elapsed().as_secs_f64())],
        })
    });

    // along decreasing ε: sup‖u‖_{L^p} nondecreasing, residual at the sample time decreasing
    for (peak, mass) in pairs(cfg) {
        let mut idx: Vec<usize> = items
            .iter()
            .filter(|it| it.1 == peak && it.2 == mass)
            .map(|it| it.0)
            .collect();
        idx.sort_by(|&a, &b| items[b].3.total_cmp(&items[a].3));
        for w in idx.windows(2) {
            let (prev, cur) = (w[0], w[1]);
            let prev_vals = match &runs[prev] {
                Ok(r) => (r.rows[0].max_lp, r.rows[0].residual),
                Err(_) => continue,
            };
            let Ok(run) = &mut runs[cur] else { continue };
            let row = &mut run.rows[0];
            if let (Some(a), Some(b)) = (prev_vals.0, row.max_lp) {
                if b < a {
                    row.flag("ladder_sup_nondecreasing");
                }
            }
            match (prev_vals.1, row.residual) {
                (Some(a), Some(b)) if b < a => {}
                _ => row.flag("ladder_residual_decreasing"),
            }
        }
    }
    runs
}

/// Whether the window `k ≥ 2λ` survives up to `T₀` and the run blows up.
fn window_holds(cfg: &ScenarioConfig, grid: &Arc<RadialGrid>, data: &InitialData, mass: f64) -> Result<(bool, BlowupReport)> {
    let (report, _) = nonlocal_blowup(cfg, grid, data, mass)?;
    let window = detect_t1(&report, data.constants().lambda)?;
    let ok = window.t1.is_none() && matches!(report.outcome, Outcome::BlewUp { .. });
    Ok((ok, report))
}

fn threshold_scan(cfg: &ScenarioConfig) -> Vec<Result<Run>> {
    let items: Vec<(usize, f64)> = cfg.params.peaks.iter().copied().enumerate().collect();
    par_map(&items, |&(run, peak)| {
        let started = Instant::now();
        let grid = grid_of(cfg)?;
        let data = initial_data(cfg, peak)?;
        let (mut lo, mut hi) = (cfg.params.masses[0], cfg.params.masses[1]);
        let mut rows = Vec::new();
        let probe = |mass: f64, rows: &mut Vec<ResultRow>| -> Result<bool> {
            let (ok, report) = window_holds(cfg, &grid, &data, mass)?;
            let mut row = ResultRow::new(cfg, run);
            row.peak = Some(peak);
            row.mass = Some(mass);
            row.outcome = report.outcome.label().to_string();
            row.t_detect = report.outcome.t_detect();
            row.t1_status = if ok { "t1_eq_t0".into() } else { "window_failed".into() };
            row.metric = "probe".into();
            row.value = report.trace[0].k;
            rows.push(row);
            Ok(ok)
        };
        let lo_ok = probe(lo, &mut rows)?;
        let hi_ok = probe(hi, &mut rows)?;
        let valid = !lo_ok && hi_ok;
        if valid {
            for _ in 0..cfg.params.bisection_steps {
                let mid = (lo * hi).sqrt();
                if probe(mid, &mut rows)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        for (metric, value) in [("m0_lower", lo), ("m0_upper", hi)] {
            let mut row = ResultRow::new(cfg, run);
            row.peak = Some(peak);
            row.metric = metric.into();
            row.value = Some(value);
            if !valid {
                row.flag("bracket");
            }
            rows.push(row);
        }
        Ok(Run {
            rows,
            histories: Vec::new(),
            snapshots: Vec::new(),
            timings: vec![(format!("{}_{run:03}", cfg.scenario.name()), started.elapsed().as_secs_f64())],
        })
    })
}

pub const SPATIAL_ORDER_RANGE: (f64, f64) = (1.7, 2.3);
pub const MIN_TEMPORAL_ORDER: f64 = 1.7;

fn convergence_study(cfg: &ScenarioConfig) -> Vec<Result<Run>> {
    let mut masses = vec![0.0];
    masses.extend(cfg.params.masses.iter().copied().filter(|&m| m != 0.0));
    let items: Vec<(usize, f64)> = masses.into_iter().enumerate().collect();
    par_map(&items, |&(run, mass)| {
        let started = Instant::now();
        let p = Manufactured {
            dim: cfg.physical.n,
            radius: cfg.physical.radius,
            mass,
            chi: cfg.physical.chi,
        };
        let q = &cfg.params;
        let s = convergence::study(&p, &q.cells, &q.dt, &q.rel_tol, cfg.control.t_end)?;
        let mut rows = Vec::new();
        let base = |metric: &str, value: f64| {
            let mut row = ResultRow::new(cfg, run);
            row.mass = Some(mass);
            row.metric = metric.into();
            row.value = Some(value);
            row
        };
        for (&n, &e) in s.cells.iter().zip(&s.spatial_errors) {
            let mut row = base("spatial_error", e);
            row.cells = n;
            rows.push(row);
        }
        let mut row = base("spatial_order", s.spatial_order);
        if !(s.spatial_order >= SPATIAL_ORDER_RANGE.0 && s.spatial_order <= SPATIAL_ORDER_RANGE.1) {
            row.flag("spatial_order");
        }
        rows.push(row);
        for (&dt, &e) in s.dts.iter().zip(&s.temporal_errors) {
            let mut row = base("temporal_error", e);
            row.cells = s.cells[0];
            row.t1_status = format!("dt={dt:e}");
            rows.push(row);
        }
        let mut row = base("temporal_order", s.temporal_order);
        row.cells = s.cells[0];
        if !(s.temporal_order >= MIN_TEMPORAL_ORDER) {
            row.flag("temporal_order");
        }
        rows.push(row);
        for (&tol, &e) in s.rel_tols.iter().zip(&s.tolerance_errors) {
            let mut row = base("tolerance_error", e);
            row.cells = s.cells[0];
            row.t1_status = format!("rel_tol={tol:e}");
            rows.push(row);
        }
        let mut row = base("tolerance_slope", s.tolerance_slope);
        row.cells = s.cells[0];
        rows.push(row);
        Ok(Run {
            rows,
            histories: Vec::new(),
            snapshots: Vec::new(),
            timings: vec![(format!("{}_{run:03}", cfg.scenario.name()), started.elapsed().as_secs_f64())],
        })
    })
}

fn snapshot_params(cfg: &ScenarioConfig, extra: &[(&str, f64)]) -> BTreeMap<String, f64> {
    let mut p = BTreeMap::new();
    p.insert("chi".to_string(), cfg.physical.chi);
    for (k, v) in extra {
        p.insert(k.to_string(), *v);
    }
    p
}

fn single_run(cfg: &ScenarioConfig) -> Result<Run> {
    let started = Instant::now();
    let grid = grid_of(cfg)?;
    let (peak, mass) = (cfg.params.peaks[0], cfg.params.masses[0]);
    let chi = cfg.physical.chi;
    let label = format!("{}_000", cfg.scenario.name());
    let every = cfg.output.snapshot_every;
    let mut row = ResultRow::new(cfg, 0);
    row.peak = Some(peak);
    row.mass = Some(mass);
    let mut snapshots = Vec::new();

    let history = if cfg.params.mode == ModeKind::Coupled {
        let eps = cfg.params.eps[0];
        let state = ladder_state(cfg, &grid, peak, mass, eps)?;
        let extra = [("m", mass), ("eps", eps)];
        snapshots.push(("u_initial".to_string(), Snapshot::from_profile("u", &state.u, 0.0, snapshot_params(cfg, &extra))));
        snapshots.push(("v_initial".to_string(), Snapshot::from_profile("v", &state.v, 0.0, snapshot_params(cfg, &extra))));
        let monitors = CoupledMonitors {
            history_every: cfg.output.history_every,
            sample_times: vec![cfg.sample_time()],
        };
        let rep = run_coupled(&state, &cfg.control.step_control(), cfg.p_monitor(), &monitors)?;
        let f = &rep.final_state;
        snapshots.push(("u_final".to_string(), Snapshot::from_profile("u", &f.u, f.t, snapshot_params(cfg, &extra))));
        snapshots.push(("v_final".to_string(), Snapshot::from_profile("v", &f.v, f.t, snapshot_params(cfg, &extra))));
        row.eps = Some(eps);
        row.outcome = rep.outcome.label().to_string();
        row.t_detect = rep.outcome.t_detect();
        row.max_lp = Some(rep.sup_u_lp);
        row.residual = rep.samples.first().map(|s| s.residual);
        row.metric = "mass_drift".into();
        row.value = Some(rep.max_mass_drift);
        coupled_flags(&mut row, &rep);
        coupled_history(&rep)
    } else {
        let data = initial_data(cfg, peak)?;
        let c = data.constants();
        let w0 = match cfg.params.initial {
            InitialKind::W0 => data.sample(&grid)?,
            InitialKind::Constant => Profile::constant(&grid, cfg.params.constant),
        };
        let mode = match cfg.params.mode {
            ModeKind::Nonlocal => ScalarMode::Nonlocal { mass, chi },
            ModeKind::VForm => ScalarMode::VForm { mass, chi },
            _ => ScalarMode::LocalPower {
                coeff: cfg.params.lambda_coeff.unwrap_or(2.0 * c.lambda),
                chi,
            },
        };
        let extra = [("m", mass), ("M", peak)];
        snapshots.push(("w_initial".to_string(), Snapshot::from_profile("w", &w0, 0.0, snapshot_params(cfg, &extra))));
        let state = ScalarState::new(w0, mode)?;
        let monitors = Monitors {
            history_every: cfg.output.history_every,
            lp_exponents: vec![cfg.p_monitor()],
            j: Some(j_params(cfg, &c)),
        };
        let mut steps = 0usize;
        let rep = run_with_observer(&state, &cfg.control.step_control(), &monitors, |s| {
            steps += 1;
            if every > 0 && steps.is_multiple_of(every) {
                snapshots.push((
                    format!("w_step{steps:07}"),
                    Snapshot::from_profile("w", &s.w, s.t, snapshot_params(cfg, &extra)),
                ));
            }
            Ok(())
        })?;
        let f = &rep.final_state;
        snapshots.push(("w_final".to_string(), Snapshot::from_profile("w", &f.w, f.t, snapshot_params(cfg, &extra))));
        row.outcome = rep.outcome.label().to_string();
        row.t_detect = rep.outcome.t_detect();
        row.extrapolated_t = rep.extrapolated_t;
        row.max_linf = Some(rep.max_linf());
        row.max_lp = rep
            .history
            .iter()
            .filter_map(|h| h.lp.first().copied())
            .reduce(f64::max);
        if mode.mass().is_some() {
            let w = detect_t1(&rep, c.lambda)?;
            row.t0 = Some(w.t0);
            row.t1 = w.t1;
            row.t1_status = if w.t1.is_some() { "window_failed".into() } else { "t1_eq_t0".into() };
            row.ode_bound = Some(ode_minorant_blowup_time(data.peak_value(), c.lambda, chi));
        }
        scalar_history(&rep)
    };
    Ok(Run {
        rows: vec![row],
        histories: vec![(label.clone(), history)],
        snapshots,
        timings: vec![(label, started.elapsed().as_secs_f64())],
    })
}

fn collect(runs: Vec<Result<Run>>) -> ScenarioOutput {
    let mut out = ScenarioOutput::default();
    for r in runs {
        match r {
            Ok(run) => {
                out.rows.extend(run.rows);
                out.histories.extend(run.histories);
                out.snapshots.extend(run.snapshots);
                out.timings.extend(run.timings);
            }
            Err(e) => {
                if out.error.is_none() {
                    out.error = Some(e.to_string());
                }
            }
        }
    }
    out
}

/// Runs `cfg` on a pool of `workers` threads (`0` picks the machine default).
///
/// Sub-run failures do not panic; the output then carries the first error and
/// the results of every run that did finish.
pub fn run_scenario(cfg: &ScenarioConfig, workers: usize) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invariant(format!("cannot start worker pool: {e}")))?;
    let runs = pool.install(|| match cfg.scenario {
        ScenarioKind::LimitBlowupSweep => blowup_sweep(cfg),
        ScenarioKind::ComparisonCheck => comparison(cfg),
        ScenarioKind::SingularLimitLadder => ladder(cfg),
        ScenarioKind::MassThresholdScan => threshold_scan(cfg),
        ScenarioKind::ConvergenceStudy => convergence_study(cfg),
        ScenarioKind::SingleRun => vec![single_run(cfg)],
    });
    Ok(collect(runs))
}
