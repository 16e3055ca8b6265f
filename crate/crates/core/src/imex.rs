//! Second-order IMEX Runge–Kutta stepping with step-doubling error control.
//!
//! The stiff linear part (diffusion, linear decay) is a tridiagonal operator
//! treated with the L-stable two-stage SDIRK half of the ARS(2,2,2) pair; the
//! nonlinear part (reaction, taxis, sources) uses its explicit two-stage half.
//! Both implicit stages share the matrix `I - γ dt L`.
//!
//! Error control compares one step of size `dt` with two of size `dt/2`; the
//! accepted value is the locally extrapolated `y_half + (y_half - y_full)/3`.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::tridiag::Tridiagonal;

/// A semi-discrete system `y' = L y + E(t, y)`.
pub trait ImexSystem {
    fn implicit_operator(&self) -> &Tridiagonal;

    fn explicit_rhs(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;

    /// Index ranges normalized separately by the error estimate.
    fn blocks(&self) -> Vec<Range<usize>> {
        let whole = 0..self.implicit_operator().len();
        vec![whole]
    }

    /// Stability cap on `dt` imposed by the explicit part at state `y`.
    fn dt_cap(&self, _y: &[f64]) -> f64 {
        f64::INFINITY
    }
}

const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

/// One ARS(2,2,2) step. Fails with [`Error::Domain`] if the explicit part
/// cannot be evaluated at an intermediate stage.
pub fn ars222_step<S: ImexSystem + ?Sized>(sys: &S, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>> {
    let delta = 1.0 - 1.0 / (2.0 * GAMMA);
    let op = sys.implicit_operator();
    let n = y.len();
    let mut scratch = vec![0.0; n];

    let mut f1 = vec![0.0; n];
    sys.explicit_rhs(t, y, &mut f1)?;

    let mut y2: Vec<f64> = y.iter().zip(&f1).map(|(yi, fi)| yi + dt * GAMMA * fi).collect();
    op.solve_shifted(GAMMA * dt, &mut y2, &mut scratch);

    let mut f2 = vec![0.0; n];
    sys.explicit_rhs(t + GAMMA * dt, &y2, &mut f2)?;
    let mut ly2 = vec![0.0; n];
    op.apply(&y2, &mut ly2);

    let mut y3: Vec<f64> = (0..n)
        .map(|i| y[i] + dt * (delta * f1[i] + (1.0 - delta) * f2[i] + (1.0 - GAMMA) * ly2[i]))
        .collect();
    op.solve_shifted(GAMMA * dt, &mut y3, &mut scratch);
    Ok(y3)
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveSettings {
    pub rel_tol: f64,
    pub dt_min: f64,
    /// Multiplier on the system's explicit stability cap.
    pub safety: f64,
}

#[derive(Debug, Clone)]
pub struct Accepted {
    pub y: Vec<f64>,
    pub dt: f64,
    /// Suggested size for the next attempt.
    pub dt_next: f64,
    pub rejections: usize,
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn scaled_error(blocks: &[Range<usize>], half: &[f64], full: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for b in blocks {
        let scale = half[b.clone()].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let diff = half[b.clone()]
            .iter()
            .zip(&full[b.clone()])
            .fold(0.0_f64, |m, (a, c)| m.max((a - c).abs()));
        if diff > 0.0 {
            worst = worst.max(diff / (3.0 * scale.max(f64::MIN_POSITIVE)));
        }
    }
    worst
}

/// Take one error-controlled step from `t`, never stepping past `t_stop`.
///
/// Returns [`Error::DtUnderflow`] when the controller would need a step below
/// `dt_min` (other than a final partial step that lands on `t_stop`).
pub fn adaptive_step<S: ImexSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    dt_try: f64,
    t_stop: f64,
    settings: &AdaptiveSettings,
) -> Result<Accepted> {
    let blocks = sys.blocks();
    let cap = settings.safety * sys.dt_cap(y);
    let mut dt = dt_try.min(cap);
    let mut rejections = 0;
    loop {
        let remaining = t_stop - t;
        let mut clipped = false;
        if dt >= remaining * (1.0 - 1e-12) {
            dt = remaining;
            clipped = true;
        }
        if !(dt >= settings.dt_min) && !(clipped && dt > 0.0) {
            return Err(Error::DtUnderflow {
                t,
                dt,
                dt_min: settings.dt_min,
            });
        }

        let attempt = (|| -> Result<Option<(Vec<f64>, f64)>> {
            let full = ars222_step(sys, t, y, dt)?;
            let mid = ars222_step(sys, t, y, 0.5 * dt)?;
            let half = ars222_step(sys, t + 0.5 * dt, &mid, 0.5 * dt)?;
            if !all_finite(&full) || !all_finite(&half) {
                return Ok(None);
            }
            let err = scaled_error(&blocks, &half, &full) / settings.rel_tol;
            let y_new: Vec<f64> = half
                .iter()
                .zip(&full)
                .map(|(h, f)| h + (h - f) / 3.0)
                .collect();
            Ok(Some((y_new, err)))
        })();

        let outcome = match attempt {
            Ok(v) => v,
            Err(Error::Domain(_)) => None,
            Err(e) => return Err(e),
        };

        match outcome {
            Some((y_new, err)) if err <= 1.0 => {
                let grow = if err > 0.0 {
                    (0.9 * err.powf(-1.0 / 3.0)).min(2.0)
                } else {
                    2.0
                };
                // a clipped final step says nothing about the natural step size
                let base = if clipped { dt_try.max(dt) } else { dt };
                return Ok(Accepted {
                    y: y_new,
                    dt,
                    dt_next: base * grow,
                    rejections,
                });
            }
            Some((_, err)) => {
                rejections += 1;
                dt *= (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 0.9);
            }
            None => {
                rejections += 1;
                dt *= 0.25;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y' = -a y (implicit) + b y (explicit), scalar
    struct Linear {
        op: Tridiagonal,
        b: f64,
    }

    impl ImexSystem for Linear {
        fn implicit_operator(&self) -> &Tridiagonal {
            &self.op
        }
        fn explicit_rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
            for (o, v) in out.iter_mut().zip(y) {
                *o = self.b * v;
            }
            Ok(())
        }
    }

    fn linear(a: f64, b: f64) -> Linear {
        Linear {
            op: Tridiagonal::new(vec![0.0], vec![-a], vec![0.0]),
            b,
        }
    }

    #[test]
    fn fixed_step_is_second_order() {
        let sys = linear(3.0, 1.0);
        let exact = (-2.0f64).exp();
        let mut errs = Vec::new();
        for steps in [20usize, 40, 80] {
            let dt = 1.0 / steps as f64;
            let mut y = vec![1.0];
            for k in 0..steps {
                y = ars222_step(&sys, k as f64 * dt, &y, dt).unwrap();
            }
            errs.push((y[0] - exact).abs());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9 && order < 2.2, "order {order}");
        }
    }

    #[test]
    fn stiff_decay_is_damped() {
        // L-stability: a huge implicit rate with a large step must not oscillate
        let sys = linear(1e8, 0.0);
        let y = ars222_step(&sys, 0.0, &[1.0], 1.0).unwrap();
        assert!(y[0].abs() < 1e-6);
    }

    #[test]
    fn adaptive_hits_stop_time_and_tolerance() {
        let sys = linear(0.0, 0.5);
        let settings = AdaptiveSettings {
            rel_tol: 1e-8,
            dt_min: 1e-12,
            safety: 1.0,
        };
        let (mut t, mut y, mut dt) = (0.0, vec![1.0], 0.1);
        while t < 2.0 {
            let acc = adaptive_step(&sys, t, &y, dt, 2.0, &settings).unwrap();
            t += acc.dt;
            y = acc.y;
            dt = acc.dt_next;
        }
        assert_eq!(t, 2.0);
        assert!((y[0] - 1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn underflow_is_reported() {
        let sys = linear(0.0, 1.0);
        let settings = AdaptiveSettings {
            rel_tol: 1e-6,
            dt_min: 1.0,
            safety: 1.0,
        };
        let r = adaptive_step(&sys, 0.0, &[1.0], 0.5, 10.0, &settings);
        assert!(matches!(r, Err(Error::DtUnderflow { .. })));
    }
}
