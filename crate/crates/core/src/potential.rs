//! Radial potentials and the families used to generate them.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::grid::{Field, RadialGrid};

/// Parametric potential families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialFamily {
    /// `V(r) = 0`.
    Zero,
    /// `V(r) = v0 (1 + r^2)^(-s)`, decay exponent `2s`.
    Algebraic { v0: f64, s: f64 },
    /// `V(r) = v0 (1 - (r/a)^2)^4` for `r < a`, zero outside.
    Bump { v0: f64, a: f64 },
    /// `V(r) = v0` for `r < radius`, zero outside; sampled by cell averages.
    SphericalWell { v0: f64, radius: f64 },
}

impl PotentialFamily {
    /// Claimed decay exponent; compactly supported families decay faster than any power.
    pub fn beta(&self) -> f64 {
        match *self {
            PotentialFamily::Algebraic { s, .. } => 2.0 * s,
            _ => f64::INFINITY,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            PotentialFamily::Zero => 0.0,
            PotentialFamily::Algebraic { v0, .. }
            | PotentialFamily::Bump { v0, .. }
            | PotentialFamily::SphericalWell { v0, .. } => v0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                arg(format!("{name} must be finite"))
            }
        };
        match *self {
            PotentialFamily::Zero => Ok(()),
            PotentialFamily::Algebraic { v0, s } => {
                finite(v0, "v0")?;
                if !(s > 1.0 && s.is_finite()) {
                    return arg(format!("algebraic family needs s > 1 so that beta > 2, got s = {s}"));
                }
                Ok(())
            }
            PotentialFamily::Bump { v0, a } => {
                finite(v0, "v0")?;
                if !(a > 0.0 && a.is_finite()) {
                    return arg(format!("bump radius must be positive, got {a}"));
                }
                Ok(())
            }
            PotentialFamily::SphericalWell { v0, radius } => {
                finite(v0, "v0")?;
                if !(radius > 0.0 && radius.is_finite()) {
                    return arg(format!("well radius must be positive, got {radius}"));
                }
                Ok(())
            }
        }
    }

    /// Pointwise value.
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            PotentialFamily::Zero => 0.0,
            PotentialFamily::Algebraic { v0, s } => v0 * (1.0 + r * r).powf(-s),
            PotentialFamily::Bump { v0, a } => {
                if r < a {
                    v0 * (1.0 - (r / a).powi(2)).powi(4)
                } else {
                    0.0
                }
            }
            PotentialFamily::SphericalWell { v0, radius } => {
                if r < radius {
                    v0
                } else {
                    0.0
                }
            }
        }
    }

    /// Value assigned to node `j` of `grid`.
    pub fn sample(&self, grid: &RadialGrid, j: usize) -> f64 {
        match *self {
            PotentialFamily::SphericalWell { v0, radius } => {
                let lo = (grid.r(j) - 0.5 * grid.dr()).max(0.0);
                let hi = grid.r(j) + 0.5 * grid.dr();
                let inside = (radius.min(hi) - lo).clamp(0.0, hi - lo);
                v0 * inside / (hi - lo)
            }
            _ => self.eval(grid.r(j)),
        }
    }
}

/// A potential sampled on a grid, with its claimed decay exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    values: Field,
    beta: f64,
    family: Option<PotentialFamily>,
}

impl Potential {
    pub fn from_family(family: PotentialFamily, grid: RadialGrid) -> Result<Self> {
        family.validate()?;
        let values = Field::new(grid, (0..=grid.n()).map(|j| family.sample(&grid, j)).collect())?;
        Ok(Self { values, beta: family.beta(), family: Some(family) })
    }

    pub fn zero(grid: RadialGrid) -> Self {
        Self { values: Field::zeros(grid), beta: f64::INFINITY, family: Some(PotentialFamily::Zero) }
    }

    /// Arbitrary samples. The decay claim is checked on the grid.
    pub fn from_samples(values: Field, beta: f64) -> Result<Self> {
        if !(beta > 2.0) {
            return arg(format!("decay exponent must exceed 2, got {beta}"));
        }
        let p = Self { values, beta, family: None };
        if !p.decay_bound().is_finite() {
            return Err(Error::Argument("sup (1+r)^beta |V| is not finite on the grid".into()));
        }
        Ok(p)
    }

    pub fn values(&self) -> &Field {
        &self.values
    }

    pub fn grid(&self) -> &RadialGrid {
        self.values.grid()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn family(&self) -> Option<&PotentialFamily> {
        self.family.as_ref()
    }

    pub fn amplitude(&self) -> f64 {
        self.family.map_or_else(|| self.values.max_abs(), |f| f.amplitude())
    }

    /// `sup_j (1 + r_j)^beta |V(r_j)|`; for compact families the exponent 4 is used.
    pub fn decay_bound(&self) -> f64 {
        let beta = if self.beta.is_finite() { self.beta } else { 4.0 };
        let g = self.grid();
        self.values
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| (1.0 + g.r(j)).powf(beta) * v.abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise value: the family formula, or linear interpolation of the samples.
    pub fn eval(&self, r: f64) -> f64 {
        match self.family {
            Some(f) => f.eval(r),
            None => self.values.interpolate(r),
        }
    }

    /// Resample on another grid. Sampled-only potentials cannot be extended.
    pub fn resampled(&self, grid: RadialGrid) -> Result<Self> {
        match self.family {
            Some(f) => Self::from_family(f, grid),
            None => arg("potential given by samples only; cannot resample"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebraic_family_beta_and_values() {
        let g = RadialGrid::new(10.0, 100).unwrap();
        let p = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, g).unwrap();
        assert_eq!(p.beta(), 4.0);
        assert_eq!(p.values().values()[0], 20.0);
        assert!((p.values().values()[10] - 20.0 / 4.0).abs() < 1e-12);
        assert!(p.decay_bound().is_finite());
    }

    #[test]
    fn slow_decay_rejected() {
        assert!(PotentialFamily::Algebraic { v0: 1.0, s: 1.0 }.validate().is_err());
        let g = RadialGrid::new(1.0, 8).unwrap();
        assert!(Potential::from_samples(Field::zeros(g), 2.0).is_err());
    }

    #[test]
    fn well_is_cell_averaged_at_the_edge() {
        let g = RadialGrid::new(2.0, 8).unwrap();
        let p = Potential::from_family(PotentialFamily::SphericalWell { v0: 4.0, radius: 1.0 }, g).unwrap();
        let v = p.values().values();
        assert_eq!(v[3], 4.0);
        assert_eq!(v[4], 2.0);
        assert_eq!(v[5], 0.0);
    }
}
