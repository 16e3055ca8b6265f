//! The reduced crime model
//!
//! ```text
//! ε u_t = Δu - χ ∇·((u/v) ∇v)
//!   v_t = Δv - v + u v
//! ```
//!
//! with homogeneous Neumann conditions. Diffusion (and the decay of `v`) is
//! implicit; taxis and production are explicit. The taxis term is a difference
//! of face fluxes, so the discrete mass of `u` is conserved by every stage.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{pow_real, Profile, RadialGrid};
use crate::imex::{adaptive_step, ImexSystem};
use crate::scalar::{drive, DriveEnd, Outcome, StepControl};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub u: Profile,
    pub v: Profile,
    pub t: f64,
    pub eps: f64,
    pub chi: f64,
}

impl CoupledState {
    pub fn new(u: Profile, v: Profile, eps: f64, chi: f64) -> Result<Self> {
        u.check_same_grid(&v)?;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::param("eps", format!("must lie in (0, 1], got {eps}")));
        }
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::param("chi", format!("must be positive, got {chi}")));
        }
        if !(v.min_value() > 0.0) {
            return Err(Error::param("v0", "must be positive everywhere"));
        }
        if u.min_value() < 0.0 {
            return Err(Error::param("u0", "must be nonnegative"));
        }
        Ok(CoupledState {
            u,
            v,
            t: 0.0,
            eps,
            chi,
        })
    }

    pub fn mass(&self) -> f64 {
        self.u.integrate(1.0).expect("integer power")
    }
}

struct CoupledSystem {
    grid: Arc<RadialGrid>,
    eps: f64,
    chi: f64,
    op: Tridiagonal,
}

impl CoupledSystem {
    fn new(grid: &Arc<RadialGrid>, eps: f64, chi: f64) -> Self {
        let (lo, di, up) = grid.laplacian_stencil();
        let lap = Tridiagonal::new(lo.to_vec(), di.to_vec(), up.to_vec());
        let op = Tridiagonal::block_diag(&[&lap.affine(1.0 / eps, 0.0), &lap.affine(1.0, -1.0)]);
        CoupledSystem {
            grid: grid.clone(),
            eps,
            chi,
            op,
        }
    }

    fn split<'a>(&self, y: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        y.split_at(self.grid.cells())
    }

    /// Largest `|v_r / v|` over interior faces, with face values from the
    /// arithmetic mean.
    fn max_log_gradient(&self, v: &[f64]) -> f64 {
        let h = self.grid.h();
        v.windows(2)
            .map(|p| ((p[1] - p[0]) / h).abs() / (0.5 * (p[0] + p[1])))
            .fold(0.0, f64::max)
    }
}

impl ImexSystem for CoupledSystem {
    fn implicit_operator(&self) -> &Tridiagonal {
        &self.op
    }

    fn explicit_rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.grid.cells();
        let (u, v) = self.split(y);
        if let Some((i, &x)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
            return Err(Error::Domain(format!("nonpositive v = {x:e} in cell {i}")));
        }
        let ratio: Vec<f64> = u.iter().zip(v).map(|(a, b)| a / b).collect();
        let (out_u, out_v) = out.split_at_mut(n);
        self.grid.apply_flux_divergence(&ratio, v, out_u);
        let scale = -self.chi / self.eps;
        for o in out_u.iter_mut() {
            *o *= scale;
        }
        for ((o, a), b) in out_v.iter_mut().zip(u).zip(v) {
            *o = a * b;
        }
        Ok(())
    }

    fn blocks(&self) -> Vec<Range<usize>> {
        let n = self.grid.cells();
        vec![0..n, n..2 * n]
    }

    fn dt_cap(&self, y: &[f64]) -> f64 {
        let (u, v) = self.split(y);
        let g = self.max_log_gradient(v);
        let taxis = if g > 0.0 {
            self.eps * self.grid.h() / (self.chi * g)
        } else {
            f64::INFINITY
        };
        let umax = u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let growth = if umax > 0.0 { 1.0 / umax } else { f64::INFINITY };
        taxis.min(growth)
    }
}

/// `1e-3 e^{-T_end} min v₀`.
pub fn positivity_floor(v0: &Profile, t_end: f64) -> f64 {
    1e-3 * (-t_end).exp() * v0.min_value()
}

/// One accepted step, trying `ctrl.dt_init` first.
pub fn step_coupled(state: &CoupledState, ctrl: &StepControl) -> Result<(CoupledState, f64)> {
    ctrl.validate()?;
    let grid = state.u.grid().clone();
    let sys = CoupledSystem::new(&grid, state.eps, state.chi);
    let mut y = state.u.values().to_vec();
    y.extend_from_slice(state.v.values());
    let acc = adaptive_step(&sys, state.t, &y, ctrl.dt_init, ctrl.t_end, &ctrl.settings())?;
    let t = state.t + acc.dt;
    let next = unpack(&grid, &acc.y, t, state)?;
    let floor = positivity_floor(&state.v, ctrl.t_end);
    check_floor(&next.v, floor, t)?;
    Ok((next, acc.dt))
}

fn unpack(grid: &Arc<RadialGrid>, y: &[f64], t: f64, like: &CoupledState) -> Result<CoupledState> {
    let (u, v) = y.split_at(grid.cells());
    Ok(CoupledState {
        u: Profile::new(grid.clone(), u.to_vec())?,
        v: Profile::new(grid.clone(), v.to_vec())?,
        t,
        eps: like.eps,
        chi: like.chi,
    })
}

fn check_floor(v: &Profile, floor: f64, t: f64) -> Result<()> {
    let value = v.min_value();
    if !(value >= floor) {
        return Err(Error::PositivityFloor {
            field: "v",
            t,
            value,
            floor,
        });
    }
    Ok(())
}

/// `‖u - m v^χ/∫v^χ‖_{L²} / ‖u‖_{L²}` with `m = ∫u`.
pub fn quasi_steady_residual(state: &CoupledState, mass: f64) -> Result<f64> {
    let chi = state.chi;
    let integral = state.v.integrate(chi)?;
    let target = state.v.map(|x| mass * pow_real(x, chi) / integral);
    let diff = state.u.zip_with(&target, |a, b| a - b)?;
    let denom = state.u.lp_norm(2.0)?.max(f64::MIN_POSITIVE);
    Ok(diff.lp_norm(2.0)? / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRecord {
    pub t: f64,
    pub u_lp: f64,
    pub u_linf: f64,
    pub v_min: f64,
    pub v_linf: f64,
    /// `|∫u(t) - ∫u₀| / ∫u₀`.
    pub mass_drift: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRunReport {
    pub outcome: Outcome,
    pub p_monitor: f64,
    pub history: Vec<CoupledRecord>,
    /// Records at the requested sample times that were reached.
    pub samples: Vec<CoupledRecord>,
    pub max_mass_drift: f64,
    /// Smallest `min v(t) / (e^{-t} min v₀)` over accepted steps.
    pub min_v_bound_ratio: f64,
    /// Smallest `min u / ‖u‖_∞` over accepted steps.
    pub min_u_relative: f64,
    pub sup_u_lp: f64,
    pub steps: usize,
    pub final_state: CoupledState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledMonitors {
    pub history_every: usize,
    /// Times at which a record is taken exactly.
    pub sample_times: Vec<f64>,
}

impl Default for CoupledMonitors {
    fn default() -> Self {
        CoupledMonitors {
            history_every: 1,
            sample_times: Vec::new(),
        }
    }
}

fn record(state: &CoupledState, p: f64, mass0: f64) -> Result<CoupledRecord> {
    let mass = state.mass();
    let drift = if mass0 > 0.0 {
        (mass - mass0).abs() / mass0
    } else {
        mass.abs()
    };
    Ok(CoupledRecord {
        t: state.t,
        u_lp: state.u.lp_norm(p)?,
        u_linf: state.u.linf_norm(),
        v_min: state.v.min_value(),
        v_linf: state.v.linf_norm(),
        mass_drift: drift,
        residual: quasi_steady_residual(state, mass0)?,
    })
}

/// Integrates the coupled system from `state0` until `ctrl.t_end` or blow-up of
/// `‖u‖_{L^p}`, `p = p_monitor > n/2`.
pub fn run_coupled(
    state0: &CoupledState,
    ctrl: &StepControl,
    p_monitor: f64,
    monitors: &CoupledMonitors,
) -> Result<CoupledRunReport> {
    let grid = state0.u.grid().clone();
    let half_dim = grid.dim() as f64 / 2.0;
    if !(p_monitor > half_dim) {
        return Err(Error::param(
            "p_monitor",
            format!("must exceed n/2 = {half_dim}, got {p_monitor}"),
        ));
    }
    let n = grid.cells();
    let sys = CoupledSystem::new(&grid, state0.eps, state0.chi);
    let mass0 = state0.mass();
    let v0_min = state0.v.min_value();
    let floor = positivity_floor(&state0.v, ctrl.t_end);
    let every = monitors.history_every.max(1);
    let mut sample_times = monitors.sample_times.clone();
    sample_times.sort_by(f64::total_cmp);

    let first = record(state0, p_monitor, mass0)?;
    let mut history = vec![first.clone()];
    let mut samples = Vec::new();
    let mut max_drift = first.mass_drift;
    let mut min_ratio = 1.0_f64;
    let min_u_rel = |u: &Profile| {
        let scale = u.linf_norm();
        if scale > 0.0 {
            u.min_value() / scale
        } else {
            0.0
        }
    };
    let mut min_u = min_u_rel(&state0.u);
    let mut sup_lp = first.u_lp;
    let mut steps_seen = 0usize;

    let mut y0 = state0.u.values().to_vec();
    y0.extend_from_slice(state0.v.values());
    let lp_norm = |y: &[f64]| {
        grid.integrate_slice(&y[..n].iter().map(|x| x.abs()).collect::<Vec<_>>(), p_monitor)
            .map(|s| s.powf(1.0 / p_monitor))
            .unwrap_or(f64::INFINITY)
    };
    let drive = drive(&sys, state0.t, y0, ctrl, &sample_times, lp_norm, |t, y, _| {
        let state = unpack(&grid, y, t, state0)?;
        check_floor(&state.v, floor, t)?;
        steps_seen += 1;
        let rec = record(&state, p_monitor, mass0)?;
        max_drift = max_drift.max(rec.mass_drift);
        min_ratio = min_ratio.min(rec.v_min / ((-t).exp() * v0_min));
        min_u = min_u.min(min_u_rel(&state.u));
        sup_lp = sup_lp.max(rec.u_lp);
        if sample_times.contains(&t) {
            samples.push(rec.clone());
        }
        if steps_seen.is_multiple_of(every) || t >= ctrl.t_end {
            history.push(rec);
        }
        Ok(true)
    })?;

    let final_state = unpack(&grid, &drive.y, drive.t, state0)?;
    if history.last().map(|r| r.t) != Some(drive.t) {
        history.push(record(&final_state, p_monitor, mass0)?);
    }
    let outcome = match drive.end {
        DriveEnd::BlewUp(t) => Outcome::BlewUp { t_detect: t },
        DriveEnd::ReachedEnd => Outcome::ReachedEnd,
        DriveEnd::StepLimit | DriveEnd::Stopped => Outcome::StepLimit,
    };
    Ok(CoupledRunReport {
        outcome,
        p_monitor,
        history,
        samples,
        max_mass_drift: max_drift,
        min_v_bound_ratio: min_ratio,
        min_u_relative: min_u,
        sup_u_lp: sup_lp,
        steps: drive.steps,
        final_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(cells: usize) -> Arc<RadialGrid> {
        RadialGrid::new(3, 1.0, cells).unwrap()
    }

    #[test]
    fn uniform_data_follow_the_ode() {
        let g = grid(64);
        let s = CoupledState::new(Profile::constant(&g, 2.0), Profile::constant(&g, 1.0), 0.1, 2.0)
            .unwrap();
        let ctrl = StepControl::new(0.5);
        let rep = run_coupled(&s, &ctrl, 2.5, &CoupledMonitors::default()).unwrap();
        assert_eq!(rep.outcome, Outcome::ReachedEnd);
        let want = 0.5f64.exp();
        for v in rep.final_state.v.values() {
            assert!((v - want).abs() / want < 10.0 * ctrl.rel_tol);
        }
        for u in rep.final_state.u.values() {
            assert!((u - 2.0).abs() < 1e-10, "{u}");
        }
    }

    #[test]
    fn zero_u_gives_pure_decay() {
        let g = grid(64);
        let s = CoupledState::new(Profile::constant(&g, 0.0), Profile::constant(&g, 1.0), 0.5, 2.0)
            .unwrap();
        let ctrl = StepControl::new(1.0);
        let rep = run_coupled(&s, &ctrl, 2.5, &CoupledMonitors::default()).unwrap();
        assert!(rep.final_state.u.values().iter().all(|&u| u == 0.0));
        let want = (-1.0f64).exp();
        for v in rep.final_state.v.values() {
            assert!((v - want).abs() / want < 10.0 * ctrl.rel_tol);
        }
        assert!(rep.min_v_bound_ratio >= 1.0 - 1e-6);
    }

    #[test]
    fn mass_is_conserved_with_taxis() {
        let g = grid(128);
        let u = Profile::from_fn(&g, |r| 1.0 + r * r);
        let v = Profile::from_fn(&g, |r| 2.0 + (3.0 * r).cos());
        let s = CoupledState::new(u, v, 0.1, 1.0).unwrap();
        let rep = run_coupled(&s, &StepControl::new(0.05), 2.5, &CoupledMonitors::default()).unwrap();
        assert!(rep.max_mass_drift <= 1e-12, "drift {}", rep.max_mass_drift);
        assert!(rep.min_u_relative >= -1e-10);
        assert!(rep.min_v_bound_ratio >= 1.0 - 1e-6);
    }

    #[test]
    fn residual_vanishes_on_the_quasi_steady_manifold() {
        let g = grid(64);
        let vol = g.ball_volume();
        let m = 3.0;
        let s = CoupledState::new(Profile::constant(&g, m / vol), Profile::constant(&g, 5.0), 0.1, 2.0)
            .unwrap();
        assert!(quasi_steady_residual(&s, m).unwrap() < 1e-14);

        let v = Profile::from_fn(&g, |r| 1.0 + (2.0 * r).sin());
        let i = v.integrate(2.0).unwrap();
        let u = v.map(|x| m * x * x / i);
        let s = CoupledState::new(u, v, 0.1, 2.0).unwrap();
        assert!(quasi_steady_residual(&s, m).unwrap() < 1e-14);
    }

    #[test]
    fn sample_times_are_hit_exactly() {
        let g = grid(32);
        let s = CoupledState::new(Profile::constant(&g, 1.0), Profile::constant(&g, 1.0), 0.5, 2.0)
            .unwrap();
        let monitors = CoupledMonitors {
            history_every: 10,
            sample_times: vec![0.1, 0.2],
        };
        let rep = run_coupled(&s, &StepControl::new(0.3), 2.5, &monitors).unwrap();
        let times: Vec<f64> = rep.samples.iter().map(|r| r.t).collect();
        assert_eq!(times, vec![0.1, 0.2]);
    }

    #[test]
    fn rejects_bad_input() {
        let g = grid(16);
        let one = Profile::constant(&g, 1.0);
        assert!(CoupledState::new(one.clone(), Profile::constant(&g, 0.0), 0.1, 2.0).is_err());
        assert!(CoupledState::new(one.clone(), one.clone(), 0.0, 2.0).is_err());
        let s = CoupledState::new(one.clone(), one, 0.1, 2.0).unwrap();
        assert!(run_coupled(&s, &StepControl::new(0.1), 1.5, &CoupledMonitors::default()).is_err());
    }

    #[test]
    fn single_step_conserves_mass() {
        let g = grid(64);
        let u = Profile::from_fn(&g, |r| 2.0 - r);
        let v = Profile::from_fn(&g, |r| 1.0 + r * r);
        let s = CoupledState::new(u, v, 0.05, 2.0).unwrap();
        let (s1, dt) = step_coupled(&s, &StepControl::new(1.0)).unwrap();
        assert!(dt > 0.0);
        assert!((s1.mass() - s.mass()).abs() <= 1e-12 * s.mass());
    }
}
