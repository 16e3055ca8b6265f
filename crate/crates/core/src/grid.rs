//! Cell-centered radial geometry on the ball `B_R(0) ⊂ ℝⁿ`.
//!
//! Cells are the spherical shells `[r_{i-1/2}, r_{i+1/2}]` with `r_{i+1/2} = (i+1)h`.
//! There is no node at the origin: the inner face of the first cell has zero
//! area, so the coordinate singularity of `(n-1)/r` never enters a stencil.
//!
//! All quadratures and flux divergences use the exact shell volumes
//! `ω_{n-1}(r_{i+1/2}^n - r_{i-1/2}^n)/n` as cell weights. With these weights
//! the discrete Laplacian is symmetric, the divergence of any face flux sums to
//! zero, and constants integrate exactly.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Smallest admissible cell count.
pub const MIN_CELLS: usize = 16;

#[derive(Debug, Clone)]
pub struct RadialGrid {
    dim: usize,
    radius: f64,
    cells: usize,
    h: f64,
    centers: Vec<f64>,
    /// All `N + 1` faces, `faces[0] = 0` and `faces[N] = R`.
    faces: Vec<f64>,
    /// `ω r^{n-1}` on every face.
    face_areas: Vec<f64>,
    volumes: Vec<f64>,
    surface_factor: f64,
    // Laplacian stencil: (Δp)_i = lap_lower[i] p_{i-1} + lap_diag[i] p_i + lap_upper[i] p_{i+1}
    lap_lower: Vec<f64>,
    lap_diag: Vec<f64>,
    lap_upper: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.cells == other.cells
            && self.radius.to_bits() == other.radius.to_bits()
    }
}

/// `Γ(k/2)` for a positive integer `k`, by the half-integer recurrence.
fn gamma_half(k: usize) -> f64 {
    let (mut g, mut x) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    let target = k as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

/// Surface area of the unit sphere in ℝⁿ, `2π^{n/2}/Γ(n/2)`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma_half(dim)
}

/// `x^p`, using integer powers where the exponent is integral.
#[inline]
pub(crate) fn pow_real(x: f64, p: f64) -> f64 {
    if p == p.trunc() && p.abs() <= 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

impl RadialGrid {
    pub fn new(dim: usize, radius: f64, cells: usize) -> Result<Arc<Self>> {
        if dim < 3 {
            return Err(Error::param("n", format!("dimension must be at least 3, got {dim}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("R", format!("radius must be positive and finite, got {radius}")));
        }
        if cells < MIN_CELLS {
            return Err(Error::param(
                "N",
                format!("need at least {MIN_CELLS} cells, got {cells}"),
            ));
        }
        let h = radius / cells as f64;
        let omega = unit_sphere_area(dim);
        let centers: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
        let mut faces: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        faces[cells] = radius;
        let face_areas: Vec<f64> = faces.iter().map(|&r| omega * r.powi(dim as i32 - 1)).collect();
        let volumes: Vec<f64> = (0..cells)
            .map(|i| {
                // a^n - b^n = (a - b) Σ a^k b^{n-1-k}, avoids cancellation far from the origin
                let (a, b) = (faces[i + 1], faces[i]);
                let sum: f64 = (0..dim)
                    .map(|k| a.powi(k as i32) * b.powi((dim - 1 - k) as i32))
                    .sum();
                omega * (a - b) * sum / dim as f64
            })
            .collect();

        let mut lap_lower = vec![0.0; cells];
        let mut lap_upper = vec![0.0; cells];
        let mut lap_diag = vec![0.0; cells];
        for i in 0..cells {
            // zero flux through r = 0 and r = R
            let inner = if i == 0 { 0.0 } else { face_areas[i] / (h * volumes[i]) };
            let outer = if i + 1 == cells {
                0.0
            } else {
                face_areas[i + 1] / (h * volumes[i])
            };
            lap_lower[i] = inner;
            lap_upper[i] = outer;
            lap_diag[i] = -(inner + outer);
        }

        Ok(Arc::new(RadialGrid {
            dim,
            radius,
            cells,
            h,
            centers,
            faces,
            face_areas,
            volumes,
            surface_factor: omega,
            lap_lower,
            lap_diag,
            lap_upper,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Outer face radii `r_{i+1/2}`, `i = 0..N-1`; the last one is `R`.
    pub fn face_radii(&self) -> &[f64] {
        &self.faces[1..]
    }

    /// Shell volumes used as quadrature weights.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn surface_factor(&self) -> f64 {
        self.surface_factor
    }

    /// `|B_R| = ω R^n / n`.
    pub fn ball_volume(&self) -> f64 {
        self.surface_factor * self.radius.powi(self.dim as i32) / self.dim as f64
    }

    /// Laplacian stencil coefficients `(lower, diag, upper)` for cell `i`.
    pub(crate) fn laplacian_stencil(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.lap_lower, &self.lap_diag, &self.lap_upper)
    }

    pub(crate) fn apply_laplacian(&self, p: &[f64], out: &mut [f64]) {
        let n = self.cells;
        for i in 0..n {
            let mut acc = self.lap_diag[i] * p[i];
            if i > 0 {
                acc += self.lap_lower[i] * p[i - 1];
            }
            if i + 1 < n {
                acc += self.lap_upper[i] * p[i + 1];
            }
            out[i] = acc;
        }
    }

    /// Divergence of the face flux `c_face ∂_r potential`, with `c_face` the
    /// arithmetic mean of the adjacent cells and zero flux on both boundaries.
    pub(crate) fn apply_flux_divergence(&self, coef: &[f64], potential: &[f64], out: &mut [f64]) {
        let n = self.cells;
        let mut inner_flux = 0.0;
        for i in 0..n {
            let outer_flux = if i + 1 < n {
                let c = 0.5 * (coef[i] + coef[i + 1]);
                self.face_areas[i + 1] * c * (potential[i + 1] - potential[i]) / self.h
            } else {
                0.0
            };
            out[i] = (outer_flux - inner_flux) / self.volumes[i];
            inner_flux = outer_flux;
        }
    }

    pub(crate) fn integrate_slice(&self, values: &[f64], power: f64) -> Result<f64> {
        let fractional = power != power.trunc();
        let mut acc = 0.0;
        for (i, (&v, &vol)) in values.iter().zip(&self.volumes).enumerate() {
            if fractional && v < 0.0 {
                return Err(Error::Domain(format!(
                    "negative value {v:e} in cell {i} raised to fractional power {power}"
                )));
            }
            acc += vol * pow_real(v, power);
        }
        Ok(acc)
    }

    /// Number of cells whose centers lie in `[0, r_max)`.
    pub(crate) fn cells_below(&self, r_max: f64) -> usize {
        self.centers.partition_point(|&r| r < r_max)
    }
}

/// A scalar radial field sampled at the cell centers of a grid.
#[derive(Debug, Clone)]
pub struct Profile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl PartialEq for Profile {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl Profile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::LengthMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        Ok(Profile { grid, values })
    }

    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.centers().iter().map(|&r| f(r)).collect();
        Profile {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn constant(grid: &Arc<RadialGrid>, c: f64) -> Self {
        Profile {
            grid: Arc::clone(grid),
            values: vec![c; grid.cells()],
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Profile {
        Profile {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Profile {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &Profile, f: impl Fn(f64, f64) -> f64) -> Result<Profile> {
        self.check_same_grid(other)?;
        Ok(Profile {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_grid(&self, other: &Profile) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Conservative finite-volume Laplacian with homogeneous Neumann conditions.
    pub fn laplacian(&self) -> Profile {
        let mut out = vec![0.0; self.len()];
        self.grid.apply_laplacian(&self.values, &mut out);
        Profile {
            grid: Arc::clone(&self.grid),
            values: out,
        }
    }

    /// Discrete `r^{1-n}(r^{n-1} c ∂_r potential)_r` in conservative face-flux form.
    pub fn flux_divergence(coef: &Profile, potential: &Profile) -> Result<Profile> {
        coef.check_same_grid(potential)?;
        let mut out = vec![0.0; coef.len()];
        coef.grid
            .apply_flux_divergence(&coef.values, &potential.values, &mut out);
        Ok(Profile {
            grid: Arc::clone(&coef.grid),
            values: out,
        })
    }

    /// Quadrature of `∫_Ω p^power`.
    pub fn integrate(&self, power: f64) -> Result<f64> {
        self.grid.integrate_slice(&self.values, power)
    }

    pub fn lp_norm(&self, q: f64) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(Error::param("q", format!("L^q norm needs q >= 1, got {q}")));
        }
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        Ok(self.grid.integrate_slice(&abs, q)?.powf(1.0 / q))
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Diagnostic radial derivative: centered differences inside, one-sided
    /// second order at the first and last cell. Not used by the time steppers.
    pub fn radial_derivative(&self) -> Profile {
        let p = &self.values;
        let n = p.len();
        let h = self.grid.h();
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * h);
        for i in 1..n - 1 {
            d[i] = (p[i + 1] - p[i - 1]) / (2.0 * h);
        }
        d[n - 1] = (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) / (2.0 * h);
        Profile {
            grid: Arc::clone(&self.grid),
            values: d,
        }
    }

    /// Weighted inner product `Σ V_i p_i q_i`.
    pub fn inner(&self, other: &Profile) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.volumes())
            .map(|((a, b), v)| a * b * v)
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn small_grid_geometry() {
        let g = RadialGrid::new(3, 1.0, 16).unwrap();
        assert_eq!(g.h(), 1.0 / 16.0);
        assert_eq!(g.centers()[0], 1.0 / 32.0);
        assert_eq!(*g.face_radii().last().unwrap(), 1.0);
        assert!(close(g.surface_factor(), 4.0 * PI, 1e-15));
    }

    #[test]
    fn four_cells_is_below_minimum() {
        assert!(RadialGrid::new(3, 1.0, 4).is_err());
        // same construction rule at the smallest legal size, R = 4 so that h = 0.25
        let g = RadialGrid::new(3, 4.0, 16).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(&g.centers()[..4], &[0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn five_dimensional_grid() {
        let g = RadialGrid::new(5, 2.0, 32).unwrap();
        assert_eq!(g.h(), 0.0625);
        assert_eq!(*g.face_radii().last().unwrap(), 2.0);
        // ω_4 = 8π²/3
        assert!(close(g.surface_factor(), 8.0 * PI * PI / 3.0, 1e-14));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            RadialGrid::new(2, 1.0, 64),
            Err(Error::InvalidParameter { name: "n", .. })
        ));
        assert!(RadialGrid::new(3, 0.0, 64).is_err());
        assert!(RadialGrid::new(3, -1.0, 64).is_err());
        assert!(RadialGrid::new(3, 1.0, 15).is_err());
    }

    #[test]
    fn grid_invariants() {
        for &(n, r, cells) in &[(3, 1.0, 16), (4, 0.7, 100), (7, 3.0, 1000)] {
            let g = RadialGrid::new(n, r, cells).unwrap();
            assert!(g.centers().windows(2).all(|w| w[0] < w[1]));
            assert!(g.face_radii().windows(2).all(|w| w[0] < w[1]));
            assert!(g.centers().iter().all(|&c| c > 0.0 && c < r));
            assert_eq!(*g.face_radii().last().unwrap(), r);
            assert!((g.h() * cells as f64 - r).abs() <= 4.0 * f64::EPSILON * r);
        }
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = RadialGrid::new(3, 1.0, 64).unwrap();
        let lap = Profile::constant(&g, 3.7).laplacian();
        assert!(lap.linf_norm() < 1e-10);
    }

    #[test]
    fn laplacian_of_r_squared_is_2n_away_from_boundary() {
        for dim in [3usize, 4, 6] {
            let g = RadialGrid::new(dim, 1.0, 64).unwrap();
            let lap = Profile::from_fn(&g, |r| r * r).laplacian();
            // the last cell sees the imposed zero boundary flux instead of 2R
            for &v in &lap.values()[..63] {
                assert!(close(v, 2.0 * dim as f64, 1e-9), "{v}");
            }
        }
    }

    #[test]
    fn flux_divergence_reduces_to_laplacian() {
        let g = RadialGrid::new(4, 1.5, 40).unwrap();
        let p = Profile::from_fn(&g, |r| (2.0 * r).cos() + r * r * r);
        let one = Profile::constant(&g, 1.0);
        let a = Profile::flux_divergence(&one, &p).unwrap();
        let b = p.laplacian();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        let flat = Profile::constant(&g, 2.0);
        let c = Profile::flux_divergence(&p, &flat).unwrap();
        assert!(c.linf_norm() == 0.0);
    }

    #[test]
    fn flux_divergence_rejects_mismatched_grids() {
        let g1 = RadialGrid::new(3, 1.0, 32).unwrap();
        let g2 = RadialGrid::new(3, 1.0, 33).unwrap();
        let a = Profile::constant(&g1, 1.0);
        let b = Profile::constant(&g2, 1.0);
        assert!(matches!(
            Profile::flux_divergence(&a, &b),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn quadrature_examples() {
        let g = RadialGrid::new(3, 1.0, 64).unwrap();
        let one = Profile::constant(&g, 1.0);
        assert!(close(one.integrate(2.0).unwrap(), 4.0 * PI / 3.0, 1e-14));
        let two = Profile::constant(&g, 2.0);
        assert!(close(two.integrate(3.0).unwrap(), 8.0 * 4.0 * PI / 3.0, 1e-14));
        assert!(close(one.lp_norm(2.0).unwrap(), (4.0 * PI / 3.0).sqrt(), 1e-14));
        assert!(close(g.ball_volume(), 4.0 * PI / 3.0, 1e-15));
    }

    #[test]
    fn lp_norm_of_r_tends_to_pi() {
        let mut prev_err = f64::INFINITY;
        for cells in [64usize, 128, 256] {
            let g = RadialGrid::new(3, 1.0, cells).unwrap();
            let p = Profile::from_fn(&g, |r| r);
            let err = (p.lp_norm(1.0).unwrap() - PI).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 1e-4);
    }

    #[test]
    fn norm_helpers() {
        let g = RadialGrid::new(3, 1.0, 32).unwrap();
        let mut p = Profile::constant(&g, 1.0);
        p.values_mut()[5] = 7.0;
        p.values_mut()[9] = -2.0;
        assert_eq!(p.linf_norm(), 7.0);
        assert_eq!(p.min_value(), -2.0);
        assert!(p.lp_norm(0.5).is_err());
    }

    #[test]
    fn fractional_power_of_negative_is_domain_error() {
        let g = RadialGrid::new(3, 1.0, 32).unwrap();
        let mut p = Profile::constant(&g, 1.0);
        p.values_mut()[3] = -0.5;
        assert!(matches!(p.integrate(1.5), Err(Error::Domain(_))));
        assert!(p.integrate(2.0).is_ok());
    }

    #[test]
    fn radial_derivative_examples() {
        let g = RadialGrid::new(3, 1.0, 64).unwrap();
        let c = Profile::constant(&g, 4.0).radial_derivative();
        assert!(c.linf_norm() < 1e-12);
        // second order stencils are exact on quadratics
        let d = Profile::from_fn(&g, |r| r * r).radial_derivative();
        for (&di, &r) in d.values().iter().zip(g.centers()) {
            assert!((di - 2.0 * r).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_half_values() {
        assert!(close(gamma_half(1), PI.sqrt(), 1e-15));
        assert!(close(gamma_half(2), 1.0, 1e-15));
        assert!(close(gamma_half(3), 0.5 * PI.sqrt(), 1e-15));
        assert!(close(gamma_half(8), 6.0, 1e-15));
    }
}
