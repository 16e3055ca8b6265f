//! Blow-up seeding initial data for the nonlocal limit problem.
//!
//! The profile is built from the singular model `S(r) = r^{-α}`, `α = 2/χ`:
//!
//! * on `(0, R/2]` the bridge `W(r) = R^α r^{-α}`;
//! * on `[R/2, R]` a quintic Hermite completion of `W` matching value, slope and
//!   curvature at `R/2` and `(1, 0, 0)` at `R`;
//! * on `[0, δ]`, `δ = min{M^{-1/α}, R/4}`, the cubic cap
//!   `R^α δ^{-α}(1 + α(α+5)/6 - α(α+3)/2 ρ² + α(α+2)/3 ρ³)`, `ρ = r/δ`,
//!   which meets `W` in a C² fashion at `r = δ`.
//!
//! The constants `A = (∫_Ω W^χ)^{-1}`, `λ` and `μ` depend on `(χ, n, R)` only.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{pow_real, unit_sphere_area, Profile, RadialGrid};
use crate::quadrature;

/// Cells required strictly inside the cap radius.
pub const MIN_CAP_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialDataParams {
    pub chi: f64,
    pub dim: usize,
    pub radius: f64,
    /// Peak-height parameter `M`.
    pub peak: f64,
}

impl InitialDataParams {
    pub fn new(chi: f64, dim: usize, radius: f64, peak: f64) -> Result<Self> {
        let p = InitialDataParams {
            chi,
            dim,
            radius,
            peak,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::param("chi", format!("must be positive, got {}", self.chi)));
        }
        if self.dim < 3 {
            return Err(Error::param("n", format!("dimension must be at least 3, got {}", self.dim)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::param("R", format!("must be positive, got {}", self.radius)));
        }
        if !(self.peak > 0.0 && self.peak.is_finite()) {
            return Err(Error::param("M", format!("must be positive, got {}", self.peak)));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        2.0 / self.chi
    }

    /// Cap radius `δ = min{M^{-1/α}, R/4}`.
    pub fn delta(&self) -> f64 {
        self.peak.powf(-1.0 / self.alpha()).min(0.25 * self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructionConstants {
    /// Lower bound for `(∫_Ω w_0^χ)^{-1}`.
    pub a: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl ConstructionConstants {
    /// `m_1 = 4λ/A`.
    pub fn m1(&self) -> f64 {
        4.0 * self.lambda / self.a
    }
}

/// Closed-form bridge `W` on `(0, R]`.
///
/// The quintic piece is stored in `σ = 2(R - r)/R ∈ [0, 1]` as
/// `1 + d₃σ³ + d₄σ⁴ + d₅σ⁵`, which makes `W(R) = 1`, `W_r(R) = W_rr(R) = 0` exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bridge {
    alpha: f64,
    radius: f64,
    d: [f64; 3],
}

impl Bridge {
    pub fn new(chi: f64, radius: f64) -> Result<Self> {
        if !(chi > 0.0) {
            return Err(Error::param("chi", format!("must be positive, got {chi}")));
        }
        if !(radius > 0.0) {
            return Err(Error::param("R", format!("must be positive, got {radius}")));
        }
        let alpha = 2.0 / chi;
        // derivatives of R^α r^{-α} at r = R/2, rescaled to σ (dσ/dr = -2/R)
        let p0 = 2f64.powf(alpha);
        let a = p0 - 1.0;
        let b = alpha * p0;
        let c = alpha * (alpha + 1.0) * p0;
        let d5 = 0.5 * (c + 12.0 * a - 6.0 * b);
        let d4 = b - 3.0 * a - 2.0 * d5;
        let d3 = a - d4 - d5;
        Ok(Bridge {
            alpha,
            radius,
            d: [d3, d4, d5],
        })
    }

    fn sigma(&self, r: f64) -> f64 {
        2.0 * (self.radius - r) / self.radius
    }

    fn in_power_region(&self, r: f64) -> bool {
        r <= 0.5 * self.radius
    }

    pub fn value(&self, r: f64) -> f64 {
        if self.in_power_region(r) {
            (self.radius / r).powf(self.alpha)
        } else {
            let s = self.sigma(r);
            let [d3, d4, d5] = self.d;
            1.0 + s * s * s * (d3 + s * (d4 + s * d5))
        }
    }

    /// `q(σ)` with `dW/dσ = σ² q(σ)`; the quintic is strictly decreasing in `r`
    /// iff `q > 0` on `(0, 1]`.
    fn slope_factor(&self, s: f64) -> f64 {
        let [d3, d4, d5] = self.d;
        3.0 * d3 + s * (4.0 * d4 + s * 5.0 * d5)
    }

    pub fn slope(&self, r: f64) -> f64 {
        if self.in_power_region(r) {
            -self.alpha * (self.radius / r).powf(self.alpha) / r
        } else {
            let s = self.sigma(r);
            -2.0 / self.radius * s * s * self.slope_factor(s)
        }
    }

    pub fn curvature(&self, r: f64) -> f64 {
        if self.in_power_region(r) {
            self.alpha * (self.alpha + 1.0) * (self.radius / r).powf(self.alpha) / (r * r)
        } else {
            let s = self.sigma(r);
            let [d3, d4, d5] = self.d;
            let d2 = 6.0 * d3 * s + 12.0 * d4 * s * s + 20.0 * d5 * s * s * s;
            4.0 / (self.radius * self.radius) * d2
        }
    }

    /// `W_rr + (n-1)/r W_r`.
    pub fn laplacian(&self, r: f64, dim: usize) -> f64 {
        self.curvature(r) + (dim as f64 - 1.0) / r * self.slope(r)
    }

    /// Checks `W_r < 0` and `W ≥ 1` at `samples` points of `(R/2, R)`.
    pub fn audit(&self, samples: usize) -> Result<()> {
        for k in 1..samples {
            let s = k as f64 / samples as f64;
            if !(self.slope_factor(s) > 0.0) {
                let r = self.radius * (1.0 - 0.5 * s);
                return Err(Error::Monotonicity {
                    radius: r,
                    slope: self.slope(r),
                });
            }
            let r = self.radius * (1.0 - 0.5 * s);
            if self.value(r) < 1.0 {
                return Err(Error::Monotonicity {
                    radius: r,
                    slope: self.slope(r),
                });
            }
        }
        if !(self.slope_factor(0.0) > 0.0) {
            return Err(Error::Monotonicity {
                radius: self.radius,
                slope: 0.0,
            });
        }
        Ok(())
    }

    /// `∫_Ω W^χ`: closed form on `B_{R/2}`, composite Gauss–Legendre on the shell.
    pub fn chi_integral(&self, dim: usize) -> f64 {
        let chi = 2.0 / self.alpha;
        let r = self.radius;
        let n = dim as f64;
        // W^χ = R² r^{-2} there
        let inner = r * r * (0.5 * r).powf(n - 2.0) / (n - 2.0);
        let outer = quadrature::integrate(
            |x| pow_real(self.value(x), chi) * x.powi(dim as i32 - 1),
            0.5 * r,
            r,
            64,
            12,
        );
        unit_sphere_area(dim) * (inner + outer)
    }
}

/// Samples `S(r) = r^{-2/χ}` at the cell centers.
pub fn singular_profile(grid: &Arc<RadialGrid>, chi: f64) -> Result<Profile> {
    if !(chi > 0.0) {
        return Err(Error::param("chi", format!("must be positive, got {chi}")));
    }
    let alpha = 2.0 / chi;
    Ok(Profile::from_fn(grid, |r| r.powf(-alpha)))
}

/// Samples the bridge on the grid after auditing its monotonicity on `4N` points.
pub fn bridge_profile(grid: &Arc<RadialGrid>, chi: f64, radius: f64) -> Result<(Profile, Bridge)> {
    let bridge = Bridge::new(chi, radius)?;
    bridge.audit(4 * grid.cells())?;
    Ok((Profile::from_fn(grid, |r| bridge.value(r)), bridge))
}

/// The assembled initial datum `w₀` in closed form.
#[derive(Debug, Clone, Copy)]
pub struct InitialData {
    params: InitialDataParams,
    bridge: Bridge,
    consts: ConstructionConstants,
}

impl InitialData {
    pub fn new(params: InitialDataParams) -> Result<Self> {
        params.validate()?;
        let bridge = Bridge::new(params.chi, params.radius)?;
        bridge.audit(1 << 14)?;
        let consts = construction_constants(&bridge, params.dim);
        Ok(InitialData {
            params,
            bridge,
            consts,
        })
    }

    pub fn params(&self) -> &InitialDataParams {
        &self.params
    }

    pub fn bridge(&self) -> &Bridge {
        &self.bridge
    }

    pub fn constants(&self) -> ConstructionConstants {
        self.consts
    }

    fn cap_scale(&self) -> f64 {
        (self.params.radius / self.params.delta()).powf(self.params.alpha())
    }

    fn cap_coefficients(&self) -> (f64, f64, f64) {
        let a = self.params.alpha();
        (
            1.0 + a * (a + 5.0) / 6.0,
            a * (a + 3.0) / 2.0,
            a * (a + 2.0) / 3.0,
        )
    }

    pub fn cap_value(&self, r: f64) -> f64 {
        let (c0, c2, c3) = self.cap_coefficients();
        let rho = r / self.params.delta();
        self.cap_scale() * (c0 - c2 * rho * rho + c3 * rho * rho * rho)
    }

    pub fn cap_slope(&self, r: f64) -> f64 {
        let (_, c2, c3) = self.cap_coefficients();
        let delta = self.params.delta();
        let rho = r / delta;
        self.cap_scale() * (-2.0 * c2 * rho + 3.0 * c3 * rho * rho) / delta
    }

    pub fn cap_curvature(&self, r: f64) -> f64 {
        let (_, c2, c3) = self.cap_coefficients();
        let delta = self.params.delta();
        let rho = r / delta;
        self.cap_scale() * (-2.0 * c2 + 6.0 * c3 * rho) / (delta * delta)
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= self.params.delta() {
            self.cap_value(r)
        } else {
            self.bridge.value(r)
        }
    }

    /// `w₀(0) = R^α δ^{-α}(1 + α(α+5)/6)`.
    pub fn peak_value(&self) -> f64 {
        self.cap_value(0.0)
    }

    pub fn sample(&self, grid: &Arc<RadialGrid>) -> Result<Profile> {
        if grid.dim() != self.params.dim || grid.radius() != self.params.radius {
            return Err(Error::GridMismatch);
        }
        let delta = self.params.delta();
        let inside = grid.cells_below(delta);
        if inside < MIN_CAP_CELLS {
            return Err(Error::UnderResolved {
                delta,
                cells: inside,
                required: MIN_CAP_CELLS,
            });
        }
        Ok(Profile::from_fn(grid, |r| self.value(r)))
    }
}

fn construction_constants(bridge: &Bridge, dim: usize) -> ConstructionConstants {
    let alpha = bridge.alpha;
    let chi = 2.0 / alpha;
    let r = bridge.radius;
    let n = dim as f64;
    let a = 1.0 / bridge.chi_integral(dim);

    let lambda_cap = alpha * (alpha + 3.0) * n / (r * r);
    // pure power region: ΔW + λW^{χ+1} = R^α r^{-α-2}(λR² - α(n - α - 2))
    let lambda_power = alpha * (n - alpha - 2.0) / (r * r);
    // quintic region, sampled densely from the closed form
    let samples = 1 << 14;
    let mut lambda_bridge: f64 = 0.0;
    for k in 0..=samples {
        let x = r * (0.5 + 0.5 * k as f64 / samples as f64);
        let need = -bridge.laplacian(x, dim) / pow_real(bridge.value(x), chi + 1.0);
        lambda_bridge = lambda_bridge.max(need);
    }
    let mut lambda = lambda_cap.max(lambda_power);
    if lambda_bridge >= lambda {
        lambda = 1.05 * lambda_bridge;
    }

    let cap_peak = 1.0 + alpha * (alpha + 5.0) / 6.0;
    let mu = alpha * cap_peak.powf(-chi - 1.0) / (r * r);
    ConstructionConstants { a, lambda, mu }
}

/// Samples `w₀` on `grid` and returns it with the construction constants.
pub fn construct_w0(
    grid: &Arc<RadialGrid>,
    params: &InitialDataParams,
) -> Result<(Profile, ConstructionConstants)> {
    let data = InitialData::new(*params)?;
    Ok((data.sample(grid)?, data.constants()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Signed slack of the worst cell, in the check's own normalization
    /// (nonnegative when the property holds).
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<PropertyCheck>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

pub const DEFAULT_VERIFY_TOL: f64 = 1e-6;

/// Value at `r = 0` of the fit `c₀ + c₂r² + c₃r³` through the first three cells.
fn origin_value(grid: &RadialGrid, w: &[f64]) -> f64 {
    let r = &grid.centers()[..3];
    // basis values [1, r², r³]; solve the 3x3 system by Cramer's rule
    let m = |i: usize| [1.0, r[i] * r[i], r[i] * r[i] * r[i]];
    let rows = [m(0), m(1), m(2)];
    let det3 = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det3(rows);
    let mut num = rows;
    for i in 0..3 {
        num[i][0] = w[i];
    }
    det3(num) / d
}

/// Checks the six defining properties of `w₀` on its grid.
///
/// * `floor`: `w₀ ≥ 1`;
/// * `monotone_neumann`: `w₀_r ≤ 0` everywhere and `w₀_r ≈ 0` at the last cell,
///   allowing the stencil's own truncation error `|Δ³w|/h` there;
/// * `peak`: the origin value (even-plus-cubic fit through the first three
///   cells) is at least `R^α M (1 + α(α+5)/6)`;
/// * `chi_integral`: `∫ w₀^χ ≤ A^{-1}`;
/// * `near_blowup`: `Δw₀ + λ w₀^{χ+1} ≥ 0`, relative to `λ w₀^{χ+1}`;
/// * `gradient_comparison`: `w₀_r + μ r w₀^{χ+1} ≤ 0` on `r < R/2`, relative to
///   `μ r w₀^{χ+1}`.
pub fn verify_w0(
    w0: &Profile,
    params: &InitialDataParams,
    consts: &ConstructionConstants,
    tol: f64,
) -> VerificationReport {
    let grid = w0.grid();
    let w = w0.values();
    let n = w.len();
    let chi = params.chi;
    let alpha = params.alpha();
    let h = grid.h();
    let mut checks = Vec::with_capacity(6);

    let min = w0.min_value();
    checks.push(PropertyCheck {
        name: "floor",
        passed: min >= 1.0 - tol,
        worst_margin: min - 1.0,
    });

    let wr = w0.radial_derivative();
    let wr = wr.values();
    let slope_scale = wr.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let max_slope = wr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let third_diff = (w[n - 1] - 3.0 * w[n - 2] + 3.0 * w[n - 3] - w[n - 4]).abs();
    let boundary_allowance = tol * w0.linf_norm() / grid.radius() + third_diff / h;
    let boundary_slope = wr[n - 1].abs();
    let monotone_margin = -max_slope / slope_scale;
    let boundary_margin = (boundary_allowance - boundary_slope) / boundary_allowance;
    checks.push(PropertyCheck {
        name: "monotone_neumann",
        passed: max_slope <= tol * slope_scale && boundary_slope <= boundary_allowance,
        worst_margin: monotone_margin.min(boundary_margin),
    });

    let target = params.radius.powf(alpha) * params.peak * (1.0 + alpha * (alpha + 5.0) / 6.0);
    let origin = origin_value(grid, w);
    checks.push(PropertyCheck {
        name: "peak",
        passed: origin >= target * (1.0 - tol),
        worst_margin: origin / target - 1.0,
    });

    let integral = w0.integrate(chi).unwrap_or(f64::INFINITY);
    let bound = 1.0 / consts.a;
    checks.push(PropertyCheck {
        name: "chi_integral",
        passed: integral <= bound * (1.0 + tol),
        worst_margin: 1.0 - integral / bound,
    });

    let lap = w0.laplacian();
    let mut near_bu_margin = f64::INFINITY;
    for (l, &v) in lap.values().iter().zip(w) {
        let react = consts.lambda * pow_real(v, chi + 1.0);
        near_bu_margin = near_bu_margin.min((l + react) / react);
    }
    checks.push(PropertyCheck {
        name: "near_blowup",
        passed: near_bu_margin >= -tol,
        worst_margin: near_bu_margin,
    });

    let inner = grid.cells_below(0.5 * params.radius);
    let mut comp_margin = f64::INFINITY;
    for i in 0..inner {
        let r = grid.centers()[i];
        let pull = consts.mu * r * pow_real(w[i], chi + 1.0);
        comp_margin = comp_margin.min(-(wr[i] + pull) / pull);
    }
    checks.push(PropertyCheck {
        name: "gradient_comparison",
        passed: comp_margin >= -tol,
        worst_margin: comp_margin,
    });

    VerificationReport { checks }
}
