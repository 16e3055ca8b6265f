//! Manufactured-solution convergence study for the nonlocal problem.
//!
//! `w*(r, t) = e^{-t}(1 + cos(πr/R)) + 2` solves
//! `w_t = Δw + m w^{χ+1}/∫w^χ + s` for the source `s` computed from `w*`
//! in closed form, with `∫w*^χ` by Gauss–Legendre quadrature.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::grid::{pow_real, unit_sphere_area, RadialGrid};
use crate::imex::{adaptive_step, ars222_step, ImexSystem};
use crate::quadrature;
use crate::scalar::StepControl;
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub dim: usize,
    pub radius: f64,
    pub mass: f64,
    pub chi: f64,
}

impl Manufactured {
    fn k(&self) -> f64 {
        PI / self.radius
    }

    pub fn exact(&self, r: f64, t: f64) -> f64 {
        (-t).exp() * (1.0 + (self.k() * r).cos()) + 2.0
    }

    fn chi_integral(&self, t: f64) -> f64 {
        let n = self.dim as i32;
        unit_sphere_area(self.dim)
            * quadrature::integrate(
                |r| pow_real(self.exact(r, t), self.chi) * r.powi(n - 1),
                0.0,
                self.radius,
                32,
                10,
            )
    }

    fn source(&self, r: f64, t: f64, chi_integral: f64) -> f64 {
        let k = self.k();
        let e = (-t).exp();
        let w = self.exact(r, t);
        let w_t = -e * (1.0 + (k * r).cos());
        let w_r = -e * k * (k * r).sin();
        let w_rr = -e * k * k * (k * r).cos();
        let lap = w_rr + (self.dim as f64 - 1.0) / r * w_r;
        w_t - lap - self.mass * pow_real(w, self.chi + 1.0) / chi_integral
    }
}

struct System {
    grid: Arc<RadialGrid>,
    problem: Manufactured,
    op: Tridiagonal,
}

impl System {
    fn new(grid: &Arc<RadialGrid>, problem: Manufactured) -> Self {
        let (lo, di, up) = grid.laplacian_stencil();
        System {
            grid: grid.clone(),
            problem,
            op: Tridiagonal::new(lo.to_vec(), di.to_vec(), up.to_vec()),
        }
    }
}

impl ImexSystem for System {
    fn implicit_operator(&self) -> &Tridiagonal {
        &self.op
    }

    fn explicit_rhs(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let chi = self.problem.chi;
        let coeff = if self.problem.mass == 0.0 {
            0.0
        } else {
            self.problem.mass / self.grid.integrate_slice(y, chi)?
        };
        let exact_integral = self.problem.chi_integral(t);
        for ((o, &w), &r) in out.iter_mut().zip(y).zip(self.grid.centers()) {
            *o = coeff * pow_real(w, chi + 1.0) + self.problem.source(r, t, exact_integral);
        }
        Ok(())
    }
}

fn initial(grid: &RadialGrid, p: &Manufactured) -> Vec<f64> {
    grid.centers().iter().map(|&r| p.exact(r, 0.0)).collect()
}

/// Max-norm error against `w*` at `t_end` with the adaptive controller.
pub fn adaptive_error(p: &Manufactured, cells: usize, rel_tol: f64, t_end: f64) -> Result<f64> {
    let grid = RadialGrid::new(p.dim, p.radius, cells)?;
    let y = adaptive_solution(p, cells, rel_tol, t_end)?;
    Ok(max_error(&grid, p, &y, t_end))
}

/// Solution at `t_end` with the adaptive controller.
pub fn adaptive_solution(p: &Manufactured, cells: usize, rel_tol: f64, t_end: f64) -> Result<Vec<f64>> {
    let grid = RadialGrid::new(p.dim, p.radius, cells)?;
    let sys = System::new(&grid, *p);
    let mut ctrl = StepControl::new(t_end);
    ctrl.rel_tol = rel_tol;
    let settings = ctrl.settings();
    let (mut t, mut y, mut dt) = (0.0, initial(&grid, p), 1e-3 * t_end);
    while t < t_end {
        let acc = adaptive_step(&sys, t, &y, dt, t_end, &settings)?;
        t = if acc.dt == t_end - t { t_end } else { t + acc.dt };
        y = acc.y;
        dt = acc.dt_next;
    }
    Ok(y)
}

fn max_error(grid: &RadialGrid, p: &Manufactured, y: &[f64], t: f64) -> f64 {
    grid.centers()
        .iter()
        .zip(y)
        .map(|(&r, &w)| (w - p.exact(r, t)).abs())
        .fold(0.0, f64::max)
}

/// Solution at `t_end` after `steps` fixed ARS(2,2,2) steps.
pub fn fixed_step_solution(p: &Manufactured, cells: usize, steps: usize, t_end: f64) -> Result<Vec<f64>> {
    let grid = RadialGrid::new(p.dim, p.radius, cells)?;
    let sys = System::new(&grid, *p);
    let dt = t_end / steps as f64;
    let mut y = initial(&grid, p);
    for k in 0..steps {
        y = ars222_step(&sys, k as f64 * dt, &y, dt)?;
    }
    Ok(y)
}

/// Least-squares slope of `log err` against `log x`.
pub fn observed_order(x: &[f64], err: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(err).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub cells: Vec<usize>,
    pub spatial_errors: Vec<f64>,
    pub spatial_order: f64,
    pub dts: Vec<f64>,
    pub temporal_errors: Vec<f64>,
    pub temporal_order: f64,
    pub rel_tols: Vec<f64>,
    pub tolerance_errors: Vec<f64>,
    pub tolerance_slope: f64,
}

/// Spatial errors use a tight tolerance so time error is negligible. Temporal
/// and tolerance errors are measured on the coarsest grid against a reference
/// in time only: fixed steps 16 times smaller, or `rel_tol = 1e-10`.
pub fn study(p: &Manufactured, cells: &[usize], dts: &[f64], rel_tols: &[f64], t_end: f64) -> Result<Study> {
    let spatial_errors = cells
        .iter()
        .map(|&n| adaptive_error(p, n, 1e-10, t_end))
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = cells.iter().map(|&n| p.radius / n as f64).collect();

    let base = cells[0];
    let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let ref_steps = (t_end / finest * 16.0).round() as usize;
    let reference = fixed_step_solution(p, base, ref_steps, t_end)?;
    let temporal_errors = dts
        .iter()
        .map(|&dt| {
            let steps = (t_end / dt).round().max(1.0) as usize;
            let y = fixed_step_solution(p, base, steps, t_end)?;
            Ok(y.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    let actual_dts: Vec<f64> = dts
        .iter()
        .map(|&dt| t_end / (t_end / dt).round().max(1.0))
        .collect();

    let tight = adaptive_solution(p, base, 1e-10, t_end)?;
    let tolerance_errors = rel_tols
        .iter()
        .map(|&tol| {
            let y = adaptive_solution(p, base, tol, t_end)?;
            Ok(y.iter().zip(&tight).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    let tolerance_slope = if rel_tols.len() >= 2 {
        observed_order(rel_tols, &tolerance_errors)
    } else {
        f64::NAN
    };

    Ok(Study {
        cells: cells.to_vec(),
        spatial_order: observed_order(&hs, &spatial_errors),
        spatial_errors,
        temporal_order: observed_order(&actual_dts, &temporal_errors),
        dts: actual_dts,
        temporal_errors,
        rel_tols: rel_tols.to_vec(),
        tolerance_errors,
        tolerance_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solution_satisfies_neumann_and_source_balances() {
        let p = Manufactured {
            dim: 3,
            radius: 1.0,
            mass: 1.0,
            chi: 2.0,
        };
        let h = 1e-5;
        let r = 1.0 - h;
        assert!(((p.exact(1.0, 0.3) - p.exact(r, 0.3)) / h).abs() < 1e-4);
        // at t = 0 the source equals w_t - Δw - reaction evaluated independently
        let i0 = p.chi_integral(0.0);
        let r = 0.37;
        let fd = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + 1e-4) - f(x - 1e-4)) / 2e-4;
        let w_t = fd(&|t| p.exact(r, t), 0.0);
        let w_r = |x: f64| fd(&|y| p.exact(y, 0.0), x);
        let lap = fd(&|x| x * x * w_r(x), r) / (r * r);
        let want = w_t - lap - pow_real(p.exact(r, 0.0), 3.0) / i0;
        assert!((p.source(r, 0.0, i0) - want).abs() < 1e-5);
    }

    #[test]
    fn order_fit_recovers_power_law() {
        let x = [0.1, 0.05, 0.025];
        let e: Vec<f64> = x.iter().map(|h| 3.0 * h * h).collect();
        assert!((observed_order(&x, &e) - 2.0).abs() < 1e-12);
    }
}
