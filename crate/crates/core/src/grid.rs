//! Radial grids and the field types that live on them.
//!
//! Every field is sampled at the nodes `r_j = j * dr`, `j = 0..=n`. The
//! evolution and spectral code work with the reduced variable `v = r * u`,
//! which vanishes at the origin; conversions between the two live here.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Uniform radial grid on `[0, r_max]` with `n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
    dr: f64,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return arg(format!("r_max must be positive and finite, got {r_max}"));
        }
        if n < 4 {
            return arg(format!("grid needs at least 4 cells, got {n}"));
        }
        Ok(Self { r_max, n, dr: r_max / n as f64 })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of cells; there are `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.dr
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.r(j)).collect()
    }

    /// Index of the last node with `r_j <= r`.
    pub fn index_below(&self, r: f64) -> usize {
        ((r / self.dr).floor().max(0.0) as usize).min(self.n)
    }

    /// Same grid with the outer radius doubled at fixed spacing.
    pub fn doubled(&self) -> Self {
        Self { r_max: 2.0 * self.r_max, n: 2 * self.n, dr: self.dr }
    }

    /// Same outer radius at half the spacing.
    pub fn refined(&self) -> Self {
        Self { r_max: self.r_max, n: 2 * self.n, dr: 0.5 * self.dr }
    }

    pub fn check_same(&self, other: &RadialGrid) -> Result<()> {
        if self.n == other.n && self.r_max == other.r_max {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "grids differ: (n={}, r_max={}) vs (n={}, r_max={})",
                self.n, self.r_max, other.n, other.r_max
            )))
        }
    }

    /// Trapezoid weights for `4 pi * int f r^2 dr`.
    pub fn volume_weights(&self) -> Vec<f64> {
        let four_pi = 4.0 * std::f64::consts::PI;
        let mut w: Vec<f64> = (0..=self.n).map(|j| four_pi * self.r(j).powi(2) * self.dr).collect();
        w[self.n] *= 0.5;
        w
    }
}

/// Real samples of a radial profile `u(r_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "field has {} samples, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite field value at node {j}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, (0..=grid.n()).map(|j| f(grid.r(j))).collect())
    }

    /// Rebuild `u` from `v = r u`; the origin value is extrapolated quadratically.
    pub fn from_reduced(grid: RadialGrid, v: &[f64]) -> Self {
        debug_assert_eq!(v.len(), grid.len());
        let mut values = vec![0.0; grid.len()];
        for j in 1..=grid.n() {
            values[j] = v[j] / grid.r(j);
        }
        values[0] = 3.0 * values[1] - 3.0 * values[2] + values[3];
        Self { grid, values }
    }

    /// `v = r u`.
    pub fn reduced(&self) -> Vec<f64> {
        self.values.iter().enumerate().map(|(j, u)| self.grid.r(j) * u).collect()
    }

    pub fn grid(&self) -> &RadialGrid {
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

    pub fn scaled(&self, s: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| s * v).collect() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(),
        })
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sample via linear interpolation; zero beyond `r_max`.
    pub fn interpolate(&self, r: f64) -> f64 {
        if r >= self.grid.r_max() {
            return if r == self.grid.r_max() { self.values[self.grid.n()] } else { 0.0 };
        }
        let j = self.grid.index_below(r);
        let t = (r - self.grid.r(j)) / self.grid.dr();
        self.values[j] * (1.0 - t) + self.values[j + 1] * t
    }
}

/// Phase-space point `(u, u_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub position: Field,
    pub velocity: Field,
}

impl State {
    pub fn new(position: Field, velocity: Field) -> Result<Self> {
        position.grid().check_same(velocity.grid())?;
        Ok(Self { position, velocity })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self { position: Field::zeros(grid), velocity: Field::zeros(grid) }
    }

    /// `(u, 0)`.
    pub fn at_rest(position: Field) -> Self {
        let velocity = Field::zeros(*position.grid());
        Self { position, velocity }
    }

    pub fn grid(&self) -> &RadialGrid {
        self.position.grid()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { position: self.position.scaled(s), velocity: self.velocity.scaled(s) }
    }

    pub fn axpy(&self, s: f64, other: &State) -> Result<Self> {
        Ok(Self {
            position: self.position.axpy(s, &other.position)?,
            velocity: self.velocity.axpy(s, &other.velocity)?,
        })
    }

    pub fn add(&self, other: &State) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &State) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Data whose forward evolution is the backward evolution of `self`.
    pub fn time_reversed(&self) -> Self {
        Self { position: self.position.clone(), velocity: self.velocity.scaled(-1.0) }
    }
}

/// Time-sampled sequence of fields sharing one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    times: Vec<f64>,
    frames: Vec<Field>,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, frames: Vec<Field>) -> Result<Self> {
        if times.len() != frames.len() {
            return Err(Error::Dimension(format!(
                "{} times for {} frames",
                times.len(),
                frames.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return arg("sample times must be strictly increasing");
        }
        if let Some(first) = frames.first() {
            for f in &frames[1..] {
                first.grid().check_same(f.grid())?;
            }
        }
        Ok(Self { times, frames })
    }

    pub fn empty() -> Self {
        Self { times: Vec::new(), frames: Vec::new() }
    }

    pub(crate) fn push(&mut self, t: f64, frame: Field) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.frames.push(frame);
    }

    /// Separable field `a(t) g(r)`.
    pub fn separable(times: &[f64], amplitude: impl Fn(f64) -> f64, profile: &Field) -> Result<Self> {
        let frames = times.iter().map(|&t| profile.scaled(amplitude(t))).collect();
        Self::new(times.to_vec(), frames)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[Field] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn grid(&self) -> Option<&RadialGrid> {
        self.frames.first().map(|f| f.grid())
    }

    /// Frames restricted to `t_lo <= t <= t_hi`.
    pub fn window(&self, t_lo: f64, t_hi: f64) -> Self {
        let (times, frames) = self
            .times
            .iter()
            .zip(&self.frames)
            .filter(|(&t, _)| t >= t_lo && t <= t_hi)
            .map(|(&t, f)| (t, f.clone()))
            .unzip();
        Self { times, frames }
    }

    pub fn map_frames(&self, f: impl Fn(f64, &Field) -> Field) -> Self {
        Self {
            times: self.times.clone(),
            frames: self.times.iter().zip(&self.frames).map(|(&t, fr)| f(t, fr)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_start_at_origin_and_increase() {
        let g = RadialGrid::new(10.0, 100).unwrap();
        let r = g.nodes();
        assert_eq!(r[0], 0.0);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!((r[100] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(RadialGrid::new(0.0, 10).is_err());
        assert!(RadialGrid::new(1.0, 2).is_err());
        assert!(RadialGrid::new(f64::NAN, 10).is_err());
    }

    #[test]
    fn field_length_and_finiteness_checked() {
        let g = RadialGrid::new(1.0, 8).unwrap();
        assert!(matches!(Field::new(g, vec![0.0; 8]), Err(Error::Dimension(_))));
        let mut v = vec![0.0; 9];
        v[3] = f64::INFINITY;
        assert!(matches!(Field::new(g, v), Err(Error::Numerical(_))));
    }

    #[test]
    fn reduced_round_trip_recovers_smooth_origin_value() {
        let g = RadialGrid::new(5.0, 500).unwrap();
        let f = Field::from_fn(g, |r| 1.0 + r * r).unwrap();
        let back = Field::from_reduced(g, &f.reduced());
        // quadratic extrapolation is exact on quadratics
        assert!((back.values()[0] - 1.0).abs() < 1e-10);
        assert!((back.values()[250] - f.values()[250]).abs() < 1e-14);
    }

    #[test]
    fn space_time_field_requires_increasing_times() {
        let g = RadialGrid::new(1.0, 8).unwrap();
        let z = Field::zeros(g);
        assert!(SpaceTimeField::new(vec![0.0, 0.0], vec![z.clone(), z.clone()]).is_err());
        assert!(SpaceTimeField::new(vec![0.0, 1.0], vec![z.clone(), z]).is_ok());
    }
}
