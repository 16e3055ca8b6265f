//! Tridiagonal operators and the Thomas algorithm.

/// `(T x)_i = lower[i] x_{i-1} + diag[i] x_i + upper[i] x_{i+1}`.
///
/// `lower[0]` and `upper[len-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        assert!(lower.len() == diag.len() && upper.len() == diag.len());
        Tridiagonal { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `scale * self + shift * I`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        Tridiagonal {
            lower: self.lower.iter().map(|v| scale * v).collect(),
            diag: self.diag.iter().map(|v| scale * v + shift).collect(),
            upper: self.upper.iter().map(|v| scale * v).collect(),
        }
    }

    /// Block-diagonal concatenation; blocks do not couple.
    pub fn block_diag(blocks: &[&Tridiagonal]) -> Self {
        let mut out = Tridiagonal {
            lower: Vec::new(),
            diag: Vec::new(),
            upper: Vec::new(),
        };
        for b in blocks {
            let start = out.diag.len();
            out.lower.extend_from_slice(&b.lower);
            out.diag.extend_from_slice(&b.diag);
            out.upper.extend_from_slice(&b.upper);
            out.lower[start] = 0.0;
            let end = out.diag.len();
            out.upper[end - 1] = 0.0;
        }
        out
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    /// Solve `(I - a T) x = rhs` in place. `scratch` must have length `len()`.
    ///
    /// No pivoting: intended for the diagonally dominant M-matrices that arise
    /// from diffusion operators with `a >= 0`.
    pub fn solve_shifted(&self, a: f64, rhs: &mut [f64], scratch: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        // forward sweep; scratch holds the modified upper diagonal
        let b0 = 1.0 - a * self.diag[0];
        let c0 = if n > 1 { -a * self.upper[0] } else { 0.0 };
        scratch[0] = c0 / b0;
        rhs[0] /= b0;
        for i in 1..n {
            let ai = -a * self.lower[i];
            let bi = 1.0 - a * self.diag[i];
            let ci = if i + 1 < n { -a * self.upper[i] } else { 0.0 };
            let denom = bi - ai * scratch[i - 1];
            scratch[i] = ci / denom;
            rhs[i] = (rhs[i] - ai * rhs[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i] * rhs[i + 1];
        }
    }
}
