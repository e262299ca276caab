//! Symmetric tridiagonal eigenproblems and banded solves.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::Dimension(format!(
                "tridiagonal needs off.len() + 1 == diag.len(), got {} and {}",
                off.len(),
                diag.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < m {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.dim() {
            if i > 0 {
                let prev = if q == 0.0 { tiny } else { q };
                q = self.diag[i] - x - self.off[i - 1].powi(2) / prev;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let m = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let rad = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < m { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - rad);
            hi = hi.max(self.diag[i] + rad);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (zero based) by Sturm bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * scale {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues strictly below `threshold`, ascending.
    pub fn eigenvalues_below(&self, threshold: f64) -> Vec<f64> {
        (0..self.count_below(threshold)).map(|k| self.eigenvalue(k)).collect()
    }

    /// Unit eigenvector for a computed eigenvalue, by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let m = self.dim();
        let (lo, hi) = self.gershgorin();
        let shift = lambda - 64.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut x: Vec<f64> = (0..m).map(|i| 1.0 + 0.1 * ((i % 7) as f64)).collect();
        for _ in 0..4 {
            x = thomas(&self.off, &diag, &self.off, &x)?;
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Numerical("inverse iteration broke down".into()));
            }
            x.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(x)
    }

    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        let y = self.apply(x);
        let num: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().map(|a| a * a).sum();
        num / den
    }
}

/// Solve a general tridiagonal system with sub-diagonal `lower`, diagonal
/// `diag` and super-diagonal `upper` by the Thomas algorithm.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    if lower.len() + 1 != m || upper.len() + 1 != m || rhs.len() != m {
        return Err(Error::Dimension("inconsistent tridiagonal system".into()));
    }
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut piv = diag[0];
    if piv == 0.0 {
        piv = tiny;
    }
    if m > 1 {
        c[0] = upper[0] / piv;
    }
    d[0] = rhs[0] / piv;
    for i in 1..m {
        piv = diag[i] - lower[i - 1] * c[i - 1];
        if piv == 0.0 {
            piv = tiny;
        }
        if i + 1 < m {
            c[i] = upper[i] / piv;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..m - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("tridiagonal solve produced non-finite values".into()));
    }
    Ok(d)
}
