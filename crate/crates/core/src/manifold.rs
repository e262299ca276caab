//! Center-stable manifold by shooting on the stability condition.
//!
//! For data `(λ(T), γ, γ̇)` the unstable velocities `λ̇(T)` are the fixed
//! point of the map that evolves the full nonlinear flow and evaluates
//!
//! ```text
//! λ̇_i(T) = -k_i λ_i(T) - ∫_T^∞ e^{k_i (T - s)} N_ρi(s) ds
//! ```
//!
//! The integral is taken in the exact form of the leapfrog recurrence, so
//! the fixed point is the manifold of the discrete flow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::evolution::{evolve, EvolveConfig, FlowKind, RunStatus, Trajectory};
use crate::grid::{Field, SpaceTimeField, State};
use crate::norms;
use crate::potential::Potential;
use crate::spectral::{project, Spectrum};
use crate::steady::SteadyState;

/// Center-stable coordinates of a perturbation of `(φ, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsData {
    pub lambdas: Vec<f64>,
    /// `(γ, γ̇)`, orthogonal to every mode.
    pub remainder: State,
    pub anchor: f64,
}

impl CsData {
    pub fn new(spectrum: &Spectrum, lambdas: Vec<f64>, remainder: State) -> Result<Self> {
        if lambdas.len() != spectrum.count() {
            return Err(Error::Dimension(format!(
                "{} lambdas for {} unstable modes",
                lambdas.len(),
                spectrum.count()
            )));
        }
        let p = project(spectrum, &remainder)?;
        let scale = norms::energy_norm_full(&remainder).max(1e-300);
        let leak = p.lambdas.iter().chain(&p.lambda_dots).fold(0.0f64, |m, x| m.max(x.abs()));
        if leak > 1e-10 * scale.max(1.0) {
            return arg(format!("remainder is not orthogonal to the modes (overlap {leak:.2e})"));
        }
        Ok(Self { lambdas, remainder, anchor: 0.0 })
    }

    /// Data with the remainder projected off the modes first.
    pub fn orthogonalized(spectrum: &Spectrum, lambdas: Vec<f64>, raw: &State) -> Result<Self> {
        let rem = project(spectrum, raw)?.remainder;
        Self::new(spectrum, lambdas, rem)
    }

    pub fn zero(spectrum: &Spectrum, grid: crate::grid::RadialGrid) -> Self {
        Self { lambdas: vec![0.0; spectrum.count()], remainder: State::zeros(grid), anchor: 0.0 }
    }

    pub fn size(&self) -> f64 {
        self.lambdas.iter().map(|l| l.abs()).sum::<f64>() + norms::energy_norm_full(&self.remainder)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            lambdas: self.lambdas.iter().map(|l| s * l).collect(),
            remainder: self.remainder.scaled(s),
            anchor: self.anchor,
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Perturbation `h` with the given unstable velocities.
    pub fn perturbation(&self, spectrum: &Spectrum, lambda_dots: &[f64]) -> Result<State> {
        let mut s = self.remainder.clone();
        for (i, rho) in spectrum.modes.iter().enumerate() {
            s.position = s.position.axpy(self.lambdas[i], rho)?;
            s.velocity = s.velocity.axpy(lambda_dots[i], rho)?;
        }
        Ok(s)
    }

    /// Full data `(φ, 0) + h`.
    pub fn initial_state(&self, spectrum: &Spectrum, steady: &SteadyState, lambda_dots: &[f64]) -> Result<State> {
        let h = self.perturbation(spectrum, lambda_dots)?;
        Ok(State { position: h.position.add(&steady.profile)?, velocity: h.velocity })
    }
}

/// Discrete decay rate `κ` with `cosh(κ dt) = 1 + k² dt² / 2`.
pub fn discrete_rate(k: f64, dt: f64) -> f64 {
    (1.0 + 0.5 * k * k * dt * dt).acosh() / dt
}

/// Linear part of the stability condition on the leapfrog grid, `-sinh(κ dt)/dt`.
pub fn linear_velocity_factor(k: f64, dt: f64) -> f64 {
    -(discrete_rate(k, dt) * dt).sinh() / dt
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVelocity {
    pub values: Vec<f64>,
    /// `e^{-k (t_cut - T)} sup_late |N_ρ| / k`.
    pub tail_bounds: Vec<f64>,
}

/// Evaluate the stability condition on a trajectory over `[T, t_cut]`.
pub fn stability_velocity(cs: &CsData, traj: &Trajectory, spectrum: &Spectrum, t_cut: f64) -> Result<StabilityVelocity> {
    let t0 = traj.records.first().map_or(0.0, |r| r.t);
    if t_cut < t0 {
        return arg(format!("t_cut {t_cut} precedes the anchor time {t0}"));
    }
    if t_cut > traj.final_time() + 0.5 * traj.dt {
        return arg(format!("trajectory ends at {} before t_cut {t_cut}", traj.final_time()));
    }
    let dt = traj.dt;
    let upto: Vec<_> = traj.records.iter().take_while(|r| r.t <= t_cut + 0.5 * dt).collect();
    let late_start = t0 + 0.75 * (t_cut - t0);
    let mut values = Vec::with_capacity(spectrum.count());
    let mut tails = Vec::with_capacity(spectrum.count());
    for i in 0..spectrum.count() {
        let k = spectrum.rate(i);
        let kd = discrete_rate(k, dt);
        let mut sum = 0.0;
        for (m, rec) in upto.iter().enumerate() {
            let w = if m == 0 { 0.5 } else { (-kd * m as f64 * dt).exp() };
            sum += w * rec.forcing[i];
        }
        values.push(linear_velocity_factor(k, dt) * cs.lambdas[i] - dt * sum);
        let sup_late = upto.iter().filter(|r| r.t >= late_start).map(|r| r.forcing[i].abs()).fold(0.0, f64::max);
        tails.push((-k * (t_cut - t0)).exp() * sup_late / k);
    }
    Ok(StabilityVelocity { values, tail_bounds: tails })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub damped_iters: usize,
    /// Defaults to `max(10 / k_n, 20)` past the anchor.
    pub t_cut: Option<f64>,
    /// Stage length in units of `1 / k_1`.
    pub stage_factor: f64,
    pub cfl: f64,
    /// Snapshot stride of the final on-manifold run.
    pub record_every: usize,
    /// Largest allowed ratio of the perturbation's `H¹×L²` norm to its initial value.
    pub locality: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 40, damping: 0.5, damped_iters: 3, t_cut: None, stage_factor: 3.0, cfl: 0.5, record_every: 20, locality: 10.0 }
    }
}

impl ShootConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.damping > 0.0 && self.damping <= 1.0) || !(self.stage_factor > 0.0) || !(self.locality >= 1.0) {
            return arg("shoot tolerance, damping in (0, 1], stage factor and locality >= 1 required");
        }
        Ok(())
    }

    pub fn horizon(&self, spectrum: &Spectrum) -> f64 {
        self.t_cut.unwrap_or_else(|| {
            let k_n = spectrum.rates().into_iter().fold(f64::INFINITY, f64::min);
            (10.0 / k_n).max(20.0)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub horizon: f64,
    pub lambda_dots: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootResult {
    pub lambda_dots: Vec<f64>,
    pub history: Vec<Iterate>,
    pub x_norm: f64,
    pub converged: bool,
    pub tail_bounds: Vec<f64>,
    /// Last time at which every `|λ_i|` stayed below twice the data size.
    pub bounded_until: f64,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

fn shoot_run(
    cs: &CsData,
    potential: &Potential,
    steady: &SteadyState,
    spectrum: &Spectrum,
    lambda_dots: &[f64],
    horizon: f64,
    cfl: f64,
    record_every: usize,
) -> Result<Trajectory> {
    let init = cs.initial_state(spectrum, steady, lambda_dots)?;
    let guard = (100.0 * cs.size()).max(1e-2);
    let cfg = EvolveConfig {
        cfl,
        t_end: horizon,
        flow: FlowKind::Nonlinear,
        record_every,
        departure_guard: Some(guard),
        ..EvolveConfig::default()
    };
    evolve(&init, potential, Some(steady), Some(spectrum), &cfg)
}

fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, bi)| row.iter().copied().chain([*bi]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c] == 0.0 {
            return None;
        }
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `Σ_i ||λ_i||_{L^∞ ∩ L²} + ||γ||_{L^{6,2}_x L^∞_t}` over a trajectory.
pub fn x_norm(traj: &Trajectory, spectrum: &Spectrum) -> Result<f64> {
    let dt = traj.dt;
    let mut total = 0.0;
    for i in 0..spectrum.count() {
        let series = traj.lambda_series(i);
        let sup = max_abs(&series);
        let l2 = (series.iter().map(|x| x * x).sum::<f64>() * dt).sqrt();
        total += sup.max(l2);
    }
    let mut frames = Vec::with_capacity(traj.positions.len());
    for k in 0..traj.positions.len() {
        let h = traj.perturbation_snapshot(k)?;
        frames.push(project(spectrum, &h)?.remainder.position);
    }
    if !frames.is_empty() {
        let gamma = SpaceTimeField::new(traj.positions.times().to_vec(), frames)?;
        total += norms::reversed_norm(&gamma, 6.0, 2.0, f64::INFINITY)?;
    }
    Ok(total)
}

/// Solve the stability condition for `λ̇(T)` by staged damped/secant iteration.
pub fn lp_shoot(
    cs: &CsData,
    potential: &Potential,
    steady: &SteadyState,
    spectrum: &Spectrum,
    cfg: &ShootConfig,
) -> Result<ShootResult> {
    cfg.validate()?;
    let n = spectrum.count();
    if n == 0 {
        return arg("no unstable modes: the center-stable manifold is the whole neighbourhood");
    }
    let dt = cfg.cfl * potential.grid().dr();
    let t_cut = cfg.horizon(spectrum);
    let k1 = spectrum.rate(0);
    let stage = cfg.stage_factor / k1;
    let mut horizons = Vec::new();
    let mut h = stage;
    while h < t_cut {
        horizons.push(h);
        h += stage;
    }
    horizons.push(t_cut);

    let mut x: Vec<f64> = (0..n).map(|i| linear_velocity_factor(spectrum.rate(i), dt) * cs.lambdas[i]).collect();
    let mut history = Vec::new();
    let mut last_update = f64::INFINITY;
    let eval = |x: &[f64], horizon: f64| -> Result<(Vec<f64>, Trajectory)> {
        let traj = shoot_run(cs, potential, steady, spectrum, x, horizon, cfg.cfl, 0)?;
        let end = traj.final_time().min(horizon);
        let sv = stability_velocity(cs, &traj, spectrum, end)?;
        let g: Vec<f64> = sv.values.iter().zip(x).map(|(p, xi)| p - xi).collect();
        Ok((g, traj))
    };

    let mut diverged = false;
    'stages: for &horizon in &horizons {
        let mut best = f64::INFINITY;
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut jac: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { -1.0 } else { 0.0 }).collect()).collect();
        for it in 0..cfg.max_iter {
            let (g, traj) = eval(&x, horizon)?;
            let residual = max_abs(&g);
            history.push(Iterate { horizon, lambda_dots: x.clone(), residual });
            let settled = it > cfg.damped_iters + 2;
            if !residual.is_finite()
                || (settled && !matches!(traj.status, RunStatus::Completed))
                || (settled && residual > 10.0 * best)
            {
                diverged = true;
                break 'stages;
            }
            best = best.min(residual);
            if g.iter().all(|v| *v == 0.0) {
                last_update = 0.0;
                break;
            }
            let secant = prev.as_ref().filter(|_| it >= cfg.damped_iters);
            let step: Vec<f64> = if let Some((px, pg)) = secant {
                let dx: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
                let dg: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
                let dx2: f64 = dx.iter().map(|d| d * d).sum();
                if dx2 > 0.0 {
                    let jdx: Vec<f64> = jac.iter().map(|row| row.iter().zip(&dx).map(|(a, b)| a * b).sum()).collect();
                    for i in 0..n {
                        for j in 0..n {
                            jac[i][j] += (dg[i] - jdx[i]) * dx[j] / dx2;
                        }
                    }
                }
                match solve_small(&jac, &g) {
                    Some(s) => s.iter().map(|v| -v).collect(),
                    None => g.iter().map(|gi| cfg.damping * gi).collect(),
                }
            } else {
                g.iter().map(|gi| cfg.damping * gi).collect()
            };
            prev = Some((x.clone(), g.clone()));
            for (xi, si) in x.iter_mut().zip(&step) {
                *xi += si;
            }
            let upd = max_abs(&step);
            let floor = 4.0 * f64::EPSILON * max_abs(&x);
            let stalled = upd >= last_update && upd <= cfg.tol;
            last_update = upd;
            if upd <= floor || stalled {
                break;
            }
        }
    }
    let traj = shoot_run(cs, potential, steady, spectrum, &x, t_cut, cfg.cfl, cfg.record_every)?;
    let end = traj.final_time().min(t_cut);
    let sv = stability_velocity(cs, &traj, spectrum, end)?;
    let residual = max_abs(&sv.values.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
    history.push(Iterate { horizon: t_cut, lambda_dots: x.clone(), residual });
    let size = cs.size().max(f64::MIN_POSITIVE);
    let bounded_until = traj
        .records
        .iter()
        .take_while(|r| r.lambdas.iter().all(|l| l.abs() <= 2.0 * size))
        .last()
        .map_or(0.0, |r| r.t);
    let d0 = traj.records.first().map_or(0.0, |r| r.distance);
    let local = traj.records.iter().all(|r| r.distance <= cfg.locality * d0 + 1e-12);
    let converged = !diverged && local && residual <= cfg.tol && last_update <= cfg.tol && matches!(traj.status, RunStatus::Completed);
    Ok(ShootResult {
        lambda_dots: x,
        history,
        x_norm: x_norm(&traj, spectrum)?,
        converged,
        tail_bounds: sv.tail_bounds,
        bounded_until,
        trajectory: Some(traj),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Window in units of `1 / k_1`.
    pub window_factor: f64,
    pub resolution: f64,
    pub cfl: f64,
    /// Departure level for `|λ_1|`; at least `100 ×` the data size.
    pub departure: f64,
    pub max_expansions: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { window_factor: 30.0, resolution: 1e-12, cfl: 0.5, departure: 1e-2, max_expansions: 40 }
    }
}

/// Direction in which `λ_1` leaves: `+1`, `-1`.
fn departure_sign(
    cs: &CsData,
    potential: &Potential,
    steady: &SteadyState,
    spectrum: &Spectrum,
    lambda_dot: f64,
    ocfg: &OracleConfig,
) -> Result<f64> {
    let k = spectrum.rate(0);
    let init = cs.initial_state(spectrum, steady, &[lambda_dot])?;
    let cfg = EvolveConfig {
        cfl: ocfg.cfl,
        t_end: ocfg.window_factor / k,
        flow: FlowKind::Nonlinear,
        departure_guard: Some(ocfg.departure.max(100.0 * cs.size())),
        ..EvolveConfig::default()
    };
    let traj = evolve(&init, potential, Some(steady), Some(spectrum), &cfg)?;
    let last = traj.records.last().ok_or_else(|| Error::Numerical("empty trajectory".into()))?;
    let sign = match traj.status {
        RunStatus::Departed { .. } => last.lambdas[0],
        _ => last.lambdas[0] + last.lambda_dots[0] / k,
    };
    Ok(if sign >= 0.0 { 1.0 } else { -1.0 })
}

/// Threshold velocity separating departures to `λ_1 → +∞` and `λ_1 → -∞` (one unstable mode).
pub fn bisection_oracle(
    cs: &CsData,
    potential: &Potential,
    steady: &SteadyState,
    spectrum: &Spectrum,
    ocfg: &OracleConfig,
) -> Result<f64> {
    if spectrum.count() != 1 {
        return arg(format!("bisection oracle needs exactly one unstable mode, got {}", spectrum.count()));
    }
    let dt = ocfg.cfl * potential.grid().dr();
    let center = linear_velocity_factor(spectrum.rate(0), dt) * cs.lambdas[0];
    let mut width = (1e-3 * center.abs()).max(1e-9);
    let sign = |x: f64| departure_sign(cs, potential, steady, spectrum, x, ocfg);
    let (mut lo, mut hi);
    let mut tries = 0;
    loop {
        lo = center - width;
        hi = center + width;
        let (sl, sh) = (sign(lo)?, sign(hi)?);
        if sl < 0.0 && sh > 0.0 {
            break;
        }
        tries += 1;
        if tries > ocfg.max_expansions || width > 1e3 {
            return Err(Error::Numerical(format!(
                "bracket failure: both ends depart the same way (width {width:.2e}); data outside the local regime"
            )));
        }
        width *= 4.0;
    }
    while hi - lo > ocfg.resolution {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sign(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub initial_mu_plus: Vec<f64>,
    pub times: Vec<f64>,
    /// `μ⁺_i(t)` per mode.
    pub mu_plus: Vec<Vec<f64>>,
    pub mu_minus: Vec<Vec<f64>>,
    pub fitted_rates: Vec<Option<f64>>,
    pub dominant_mode: Option<usize>,
    pub dominance_time: Option<f64>,
    /// `(t, ||R(t)||, bound)` at `T_dom` and `T_dom + 1/k`.
    pub remainder_checks: Vec<(f64, f64, f64)>,
    pub remainder_bound_holds: Option<bool>,
}

fn log_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| v.abs() > 0.0).map(|(a, b)| (*a, b.abs().ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x, b + x * y));
    let den = m * sxx - sx * sx;
    (den > 0.0).then(|| (m * sxy - sx * sy) / den)
}

/// Evolve `(φ,0) + h0`, track `μ±`, fit growth rates and locate dominance.
pub fn growth_experiment(
    h0: &State,
    potential: &Potential,
    steady: &SteadyState,
    spectrum: &Spectrum,
    horizon: f64,
    dominance: f64,
    cfl: f64,
) -> Result<GrowthReport> {
    if spectrum.is_empty() {
        return arg("growth experiment needs at least one unstable mode");
    }
    let k1 = spectrum.rate(0);
    let size = norms::energy_norm_full(h0);
    if (3.0 * k1 * horizon).exp() * size > 0.1 {
        return arg(format!("e^(3 k1 T) ||h0|| = {:.3e} exceeds 0.1", (3.0 * k1 * horizon).exp() * size));
    }
    let init = State { position: h0.position.add(&steady.profile)?, velocity: h0.velocity.clone() };
    let stride = 4;
    let cfg = EvolveConfig { cfl, t_end: horizon, flow: FlowKind::Nonlinear, record_every: stride, ..EvolveConfig::default() };
    let traj = evolve(&init, potential, Some(steady), Some(spectrum), &cfg)?;
    let n = spectrum.count();
    let times = traj.times();
    let mut mu_plus = vec![Vec::with_capacity(times.len()); n];
    let mut mu_minus = vec![Vec::with_capacity(times.len()); n];
    for r in &traj.records {
        for i in 0..n {
            let k = spectrum.rate(i);
            mu_plus[i].push(0.5 * (r.lambdas[i] + r.lambda_dots[i] / k));
            mu_minus[i].push(0.5 * (r.lambdas[i] - r.lambda_dots[i] / k));
        }
    }
    let fitted_rates: Vec<Option<f64>> = mu_plus.iter().map(|mp| log_slope(&times, mp)).collect();
    let mode_norms: Vec<f64> = (0..n).map(|i| norms::energy_norm_full(&spectrum.mode_state(i, 1.0))).collect();

    let mut dominant_mode = None;
    let mut dominance_time = None;
    let mut rem_at = Vec::new();
    for k in 0..traj.positions.len() {
        let t = traj.positions.times()[k];
        let rec = traj.records.iter().position(|r| (r.t - t).abs() < 0.25 * traj.dt).unwrap();
        let i0 = (0..n)
            .max_by(|&a, &b| (mu_plus[a][rec].abs() * mode_norms[a]).total_cmp(&(mu_plus[b][rec].abs() * mode_norms[b])))
            .unwrap();
        let h = traj.perturbation_snapshot(k)?;
        let rest = h.axpy(-mu_plus[i0][rec], &spectrum.mode_state(i0, 1.0))?;
        let r_norm = norms::energy_norm_full(&rest);
        rem_at.push((t, rec, i0, r_norm));
        if dominance_time.is_none() && mu_plus[i0][rec].abs() * mode_norms[i0] >= dominance * r_norm {
            dominance_time = Some(t);
            dominant_mode = Some(i0);
        }
    }
    let mut remainder_checks = Vec::new();
    if let (Some(td), Some(i0)) = (dominance_time, dominant_mode) {
        let k = spectrum.rate(i0);
        for target in [td, td + 1.0 / k] {
            if let Some(&(t, _, _, r_norm)) = rem_at.iter().find(|(t, ..)| *t >= target - 1e-12) {
                let bound = (k * t).exp() * mu_plus[i0][0].abs() * mode_norms[i0] / dominance;
                remainder_checks.push((t, r_norm, bound));
            }
        }
    }
    let remainder_bound_holds =
        (!remainder_checks.is_empty()).then(|| remainder_checks.iter().all(|(_, r, b)| r <= b));
    Ok(GrowthReport {
        initial_mu_plus: mu_plus.iter().map(|m| m[0]).collect(),
        times,
        mu_plus,
        mu_minus,
        fitted_rates,
        dominant_mode,
        dominance_time,
        remainder_checks,
        remainder_bound_holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartTable {
    pub lambdas: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// `values[a][l]` is `λ̇_1(T)` at `(lambdas[l], amplitudes[a])`; `None` when unconverged.
    pub values: Vec<Vec<Option<f64>>>,
    /// `max |D⁺ - D⁻| / (|D⁰| + scale)` over interior points in the `λ` direction.
    pub smoothness: Option<f64>,
    /// Slope through the two samples closest to zero on the `λ` axis at zero amplitude.
    pub gradient_at_zero: Option<f64>,
}

/// Sample `λ̇_1` over a slice `(λ_1, a γ_profile)` of center-stable data.
pub fn chart_sample(
    lambdas: &[f64],
    amplitudes: &[f64],
    profile: &State,
    potential: &Potential,
    steady: &SteadyState,
    spectrum: &Spectrum,
    cfg: &ShootConfig,
) -> Result<ChartTable> {
    if spectrum.count() != 1 {
        return arg("chart sampling is implemented for one unstable mode");
    }
    let points: Vec<(usize, usize)> = (0..amplitudes.len()).flat_map(|a| (0..lambdas.len()).map(move |l| (a, l))).collect();
    let base = project(spectrum, profile)?.remainder;
    let results: Vec<Option<f64>> = points
        .par_iter()
        .map(|&(a, l)| -> Result<Option<f64>> {
            let cs = CsData::new(spectrum, vec![lambdas[l]], base.scaled(amplitudes[a]))?;
            if cs.size() == 0.0 {
                return Ok(Some(0.0));
            }
            let r = lp_shoot(&cs, potential, steady, spectrum, cfg)?;
            Ok(r.converged.then_some(r.lambda_dots[0]))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![vec![None; lambdas.len()]; amplitudes.len()];
    for (&(a, l), v) in points.iter().zip(results) {
        values[a][l] = v;
    }
    let smoothness = {
        let mut worst: Option<f64> = None;
        for row in &values {
            for l in 1..lambdas.len().saturating_sub(1) {
                if let (Some(a), Some(b), Some(c)) = (row[l - 1], row[l], row[l + 1]) {
                    let dm = (b - a) / (lambdas[l] - lambdas[l - 1]);
                    let dp = (c - b) / (lambdas[l + 1] - lambdas[l]);
                    let d0 = (c - a) / (lambdas[l + 1] - lambdas[l - 1]);
                    let m = (dp - dm).abs() / (d0.abs() + 1e-300);
                    worst = Some(worst.map_or(m, |w: f64| w.max(m)));
                }
            }
        }
        worst
    };
    let gradient_at_zero = amplitudes.iter().position(|a| *a == 0.0).and_then(|a0| {
        let mut idx: Vec<usize> = (0..lambdas.len()).filter(|&l| lambdas[l] != 0.0).collect();
        idx.sort_by(|&x, &y| lambdas[x].abs().total_cmp(&lambdas[y].abs()));
        let pos = idx.iter().copied().find(|&l| lambdas[l] > 0.0)?;
        let neg = idx.iter().copied().find(|&l| lambdas[l] < 0.0)?;
        Some((values[a0][pos]? - values[a0][neg]?) / (lambdas[pos] - lambdas[neg]))
    });
    Ok(ChartTable { lambdas: lambdas.to_vec(), amplitudes: amplitudes.to_vec(), values, smoothness, gradient_at_zero })
}

/// Largest data scale along a direction for which `lp_shoot` converges, by bisection in log scale.
pub fn contraction_radius(
    direction: &CsData,
    potential: &Potential,
    steady: &SteadyState,
    spectrum: &Spectrum,
    cfg: &ShootConfig,
    start: f64,
    refinements: usize,
) -> Result<(f64, f64)> {
    let ok = |s: f64| -> Result<bool> {
        let r = lp_shoot(&direction.scaled(s), potential, steady, spectrum, cfg)?;
        Ok(r.converged)
    };
    if !ok(start)? {
        return Err(Error::Numerical(format!("shoot fails already at scale {start:.2e}")));
    }
    let (mut lo, mut hi) = (start, start * 2.0);
    while ok(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Ok((lo, f64::INFINITY));
        }
    }
    for _ in 0..refinements {
        let mid = (lo * hi).sqrt();
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Reduced profile helper for tests and examples: a compact smooth bump.
pub fn smooth_bump(grid: crate::grid::RadialGrid, center: f64, width: f64) -> Result<Field> {
    Field::from_fn(grid, |r| {
        let x = (r - center) / width;
        if x.abs() < 1.0 {
            (-1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_rate_limits() {
        let k = 1.3;
        assert!((discrete_rate(k, 1e-4) - k).abs() < 1e-7);
        assert!((linear_velocity_factor(k, 1e-4) + k).abs() < 1e-7);
    }

    #[test]
    fn small_linear_solve() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_small(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn log_slope_recovers_rate() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (0.7 * t).exp()).collect();
        assert!((log_slope(&t, &y).unwrap() - 0.7).abs() < 1e-12);
    }
}
