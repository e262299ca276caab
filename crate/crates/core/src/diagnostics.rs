//! Norm-engine checks: Lorentz closed forms under refinement, `L^{p,p} = L^p`,
//! and the empirical reversed-Strichartz ratio over random linearized solutions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::evolution::{evolve, EvolveConfig, FlowKind};
use crate::grid::{Field, RadialGrid, SpaceTimeField, State};
use crate::manifold::smooth_bump;
use crate::norms;
use crate::potential::Potential;
use crate::spectral::{project, Spectrum};
use crate::steady::SteadyState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementCheck {
    pub label: String,
    pub exact: f64,
    pub cells: Vec<usize>,
    pub values: Vec<f64>,
    pub relative_errors: Vec<f64>,
    /// Finest error within tolerance and below the coarsest one.
    pub pass: bool,
}

fn refinement(label: &str, exact: f64, r_max: f64, cells: &[usize], tol: f64, f: impl Fn(f64) -> f64, p: f64, q: f64) -> Result<RefinementCheck> {
    let mut values = Vec::new();
    for &n in cells {
        let field = Field::from_fn(RadialGrid::new(r_max, n)?, &f)?;
        values.push(norms::lorentz_norm(&field, p, q)?);
    }
    let relative_errors: Vec<f64> = values.iter().map(|v| (v - exact).abs() / exact).collect();
    let last = *relative_errors.last().unwrap_or(&f64::INFINITY);
    let pass = last <= tol && last <= relative_errors[0];
    Ok(RefinementCheck { label: label.into(), exact, cells: cells.to_vec(), values, relative_errors, pass })
}

/// Unit-ball indicator in `L^{3/2,1}` and the cored `1/r` in `L^{3,∞}` against their closed forms.
pub fn lorentz_refinement(cells: &[usize], tol: f64) -> Result<Vec<RefinementCheck>> {
    if cells.is_empty() {
        return arg("refinement needs at least one grid");
    }
    let ball = 1.5 * (4.0 * PI / 3.0f64).powf(2.0 / 3.0);
    let weak = (4.0 * PI / 3.0f64).powf(1.0 / 3.0);
    Ok(vec![
        refinement("unit-ball L^{3/2,1}", ball, 2.0, cells, tol, |r| if r < 1.0 { 1.0 } else { 0.0 }, 1.5, 1.0)?,
        refinement("cored 1/r L^{3,inf}", weak, 20.0, cells, tol, |r| 1.0 / r.max(1.0), 3.0, f64::INFINITY)?,
    ])
}

/// Largest relative gap between `L^{p,p}` and `L^p` over seeded random fields.
pub fn lpp_consistency(draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = RadialGrid::new(5.0, 64)?;
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let p = rng.gen_range(0.5..6.0);
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let f = Field::new(grid, values)?;
        let direct = piecewise_lp(&f, p);
        let lorentz = norms::lorentz_norm(&f, p, p)?;
        worst = worst.max((lorentz - direct).abs() / direct);
    }
    Ok(worst)
}

/// `L^p` of the cell-wise constant interpretation used by the Lorentz engine.
fn piecewise_lp(f: &Field, p: f64) -> f64 {
    let g = f.grid();
    let half = 0.5 * g.dr();
    let sum: f64 = (0..=g.n())
        .map(|j| {
            let lo = (g.r(j) - half).max(0.0);
            let hi = (g.r(j) + half).min(g.r_max());
            4.0 * PI / 3.0 * (hi.powi(3) - lo.powi(3)) * f.values()[j].abs().powf(p)
        })
        .sum();
    sum.powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub draws: usize,
    pub seed: u64,
    pub t_window: f64,
    /// Snapshot spacing in time, kept fixed across grids.
    pub sample_dt: f64,
    pub cfl: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { draws: 50, seed: 7, t_window: 10.0, sample_dt: 0.05, cfl: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub cells: usize,
    /// `||γ||_{L^{6,2}_x L^∞_t} / ||(γ₀, γ₁)||_{H¹×L²}` per draw.
    pub ratios: Vec<f64>,
    pub max: f64,
    pub mean: f64,
}

/// Random data drawn in physical units so that every grid sees the same functions.
fn draw_data(grid: RadialGrid, rng: &mut ChaCha8Rng) -> Result<State> {
    let mut pos = Field::zeros(grid);
    let mut vel = Field::zeros(grid);
    for _ in 0..3 {
        let (c, w, a) = (rng.gen_range(1.0..6.0), rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
        pos = pos.axpy(a, &smooth_bump(grid, c, w)?)?;
        let (c, w, a) = (rng.gen_range(1.0..6.0), rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
        vel = vel.axpy(a, &smooth_bump(grid, c, w)?)?;
    }
    Ok(State { position: pos, velocity: vel })
}

/// Reversed-Strichartz ratio of the continuous-spectrum part of linearized solutions.
pub fn strichartz_ensemble(potential: &Potential, steady: &SteadyState, spectrum: &Spectrum, cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    if cfg.draws == 0 || !(cfg.t_window > 0.0) || !(cfg.sample_dt > 0.0) {
        return arg("ensemble needs draws, a positive window and a positive sample spacing");
    }
    let grid = *potential.grid();
    let dt = cfg.cfl * grid.dr();
    let stride = ((cfg.sample_dt / dt).round() as usize).max(1);
    let ratios: Vec<f64> = (0..cfg.draws)
        .into_par_iter()
        .map(|d| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(d as u64));
            let raw = draw_data(grid, &mut rng)?;
            let data = project(spectrum, &raw)?.remainder;
            let size = norms::energy_norm_full(&data);
            let ecfg = EvolveConfig { cfl: cfg.cfl, t_end: cfg.t_window, flow: FlowKind::Linearized, record_every: stride, ..EvolveConfig::default() };
            let traj = evolve(&data, potential, Some(steady), Some(spectrum), &ecfg)?;
            let frames = (0..traj.positions.len())
                .map(|k| Ok(project(spectrum, &traj.snapshot(k))?.remainder.position))
                .collect::<Result<Vec<_>>>()?;
            let gamma = SpaceTimeField::new(traj.positions.times().to_vec(), frames)?;
            Ok(norms::reversed_norm(&gamma, 6.0, 2.0, f64::INFINITY)? / size)
        })
        .collect::<Result<_>>()?;
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(EnsembleReport { cells: grid.n(), ratios, max, mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lpp_matches_lp() {
        assert!(lpp_consistency(40, 3).unwrap() < 1e-10);
    }

    #[test]
    fn closed_forms_converge() {
        let checks = lorentz_refinement(&[2000, 8000, 32000], 1e-3).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }
}
