//! Leapfrog time stepping of the radial wave flows on `v = r u`.
//!
//! Every flow evolves a perturbation `h = r (u - φ)` about a reference steady
//! state `φ` (zero when none is given). For the nonlinear flow this keeps
//! `(φ, 0)` exactly stationary and makes the arithmetic outside the cone of a
//! truncated run identical to the untruncated one. The node `v_n` at `r_max`
//! is held fixed, which is causally inert when the domain is sized so that
//! `t_end + support <= r_max`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::grid::{Field, RadialGrid, SpaceTimeField, State};
use crate::norms;
use crate::potential::Potential;
use crate::spectral::Spectrum;
use crate::steady::SteadyState;

const FOUR_PI: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    /// `(∂tt - Δ - V) u = -u^5`.
    Nonlinear,
    /// `h_tt + L_φ h = 0`.
    Linearized,
    /// `(∂tt - Δ) u = 0`.
    Free,
    /// Nonlinear perturbation flow with `V`, `φ` cut off inside the cone `|x| < |t - apex|`.
    TruncatedNonlinear,
    /// Linearized flow with the same cutoff.
    TruncatedLinear,
}

impl FlowKind {
    pub fn is_truncated(self) -> bool {
        matches!(self, FlowKind::TruncatedNonlinear | FlowKind::TruncatedLinear)
    }

    pub fn is_nonlinear(self) -> bool {
        matches!(self, FlowKind::Nonlinear | FlowKind::TruncatedNonlinear)
    }

    /// Whether initial data and snapshots are the full field rather than the perturbation.
    pub fn carries_full_field(self) -> bool {
        matches!(self, FlowKind::Nonlinear | FlowKind::Free)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    /// `dt / dr`.
    pub cfl: f64,
    pub t_end: f64,
    /// Snapshot stride in steps; 0 keeps only the first and last frames.
    pub record_every: usize,
    pub flow: FlowKind,
    /// Time origin of the truncation cone.
    pub apex: f64,
    /// Width of a linear ramp replacing the sharp cutoff; 0 means sharp.
    pub smoothing: f64,
    pub overflow_guard: f64,
    /// Stop once `max_i |λ_i|` exceeds this level.
    pub departure_guard: Option<f64>,
    /// Stop once the perturbation's `H¹×L²` norm exceeds this level.
    pub distance_guard: Option<f64>,
    /// Radii at which `4π∫_{r≥ρ}(u_r² + u_t²) r² dr` is recorded every step.
    pub exterior_radii: Vec<f64>,
    /// Amplitude below which data counts as zero when measuring support.
    pub support_tol: f64,
    pub check_causality: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            t_end: 20.0,
            record_every: 0,
            flow: FlowKind::Nonlinear,
            apex: 0.0,
            smoothing: 0.0,
            overflow_guard: 1e8,
            departure_guard: None,
            distance_guard: None,
            exterior_radii: Vec::new(),
            support_tol: 1e-12,
            check_causality: true,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return arg(format!("cfl must lie in (0, 0.9], got {}", self.cfl));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return arg(format!("t_end must be finite and non-negative, got {}", self.t_end));
        }
        if !(self.smoothing >= 0.0) || !(self.overflow_guard > 0.0) || !(self.support_tol > 0.0) {
            return arg("smoothing, overflow guard and support tolerance must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Departed { t: f64 },
    BlowupFlagged { t: f64 },
}

/// Diagnostics at one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    /// Half-step energy between this level and the next.
    pub energy: f64,
    pub lambdas: Vec<f64>,
    pub lambda_dots: Vec<f64>,
    /// `<ρ_i, N>` with `N = -((φ+η)^5 - φ^5 - 5φ^4 η)`.
    pub forcing: Vec<f64>,
    pub exterior: Vec<f64>,
    /// `H¹×L²` norm of the perturbation.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: EvolveConfig,
    pub dt: f64,
    /// Reference steady profile `φ` (zero for the free flow or when none was given).
    pub reference: Field,
    pub records: Vec<StepRecord>,
    /// Full field for nonlinear/free flows, perturbation otherwise.
    pub positions: SpaceTimeField,
    pub velocities: SpaceTimeField,
    pub status: RunStatus,
}

impl Trajectory {
    pub fn grid(&self) -> &RadialGrid {
        self.reference.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    pub fn snapshot(&self, k: usize) -> State {
        State { position: self.positions.frames()[k].clone(), velocity: self.velocities.frames()[k].clone() }
    }

    /// Snapshot `k` as the full field `φ + h`.
    pub fn full_snapshot(&self, k: usize) -> Result<State> {
        let s = self.snapshot(k);
        if self.config.flow.carries_full_field() {
            Ok(s)
        } else {
            Ok(State { position: s.position.add(&self.reference)?, velocity: s.velocity })
        }
    }

    /// Snapshot `k` as the perturbation `u - φ`.
    pub fn perturbation_snapshot(&self, k: usize) -> Result<State> {
        let s = self.snapshot(k);
        if self.config.flow.carries_full_field() {
            Ok(State { position: s.position.sub(&self.reference)?, velocity: s.velocity })
        } else {
            Ok(s)
        }
    }

    /// Relative energy variation `max |E(t) - E(0)| / max(|E(0)|, 1)`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.records.first().map_or(0.0, |r| r.energy);
        self.records.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max) / e0.abs().max(1.0)
    }

    /// Mode series `λ_i(t)`.
    pub fn lambda_series(&self, i: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.lambdas[i]).collect()
    }
}

/// Right-hand side of one flow.
#[derive(Debug, Clone)]
pub struct Engine {
    grid: RadialGrid,
    flow: FlowKind,
    vpot: Vec<f64>,
    phi: Vec<f64>,
    apex: f64,
    smoothing: f64,
}

impl Engine {
    pub fn new(potential: &Potential, reference: &Field, flow: FlowKind, apex: f64, smoothing: f64) -> Result<Self> {
        potential.grid().check_same(reference.grid())?;
        let grid = *potential.grid();
        let (vpot, phi) = if flow == FlowKind::Free {
            (vec![0.0; grid.len()], vec![0.0; grid.len()])
        } else {
            (potential.values().values().to_vec(), reference.values().to_vec())
        };
        Ok(Self { grid, flow, vpot, phi, apex, smoothing })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    #[inline]
    fn chi(&self, j: usize, t: f64) -> f64 {
        if !self.flow.is_truncated() {
            return 1.0;
        }
        let edge = (t - self.apex).abs();
        let r = self.grid.r(j);
        if self.smoothing > 0.0 {
            (0.5 + (r - edge) / self.smoothing).clamp(0.0, 1.0)
        } else if r >= edge {
            1.0
        } else {
            0.0
        }
    }

    /// `(V_j χ_j, φ_j χ_j)`.
    #[inline]
    fn coefficients(&self, j: usize, t: f64) -> (f64, f64) {
        let c = self.chi(j, t);
        (self.vpot[j] * c, self.phi[j] * c)
    }

    /// Nonlinear part `(P+η)^5 - P^5 - 5 P^4 η`.
    #[inline]
    fn superlinear(p: f64, eta: f64) -> f64 {
        let p2 = p * p;
        eta * eta * (10.0 * p2 * p + eta * (10.0 * p2 + eta * (5.0 * p + eta)))
    }

    /// `h_tt` at every node (zero at both ends).
    pub fn accel(&self, h: &[f64], t: f64, out: &mut [f64]) {
        let n = self.grid.n();
        let idr2 = 1.0 / self.grid.dr().powi(2);
        out[0] = 0.0;
        out[n] = 0.0;
        let nonlinear = self.flow.is_nonlinear();
        for j in 1..n {
            let lap = (h[j + 1] - 2.0 * h[j] + h[j - 1]) * idr2;
            let (v, p) = self.coefficients(j, t);
            let p4 = p * p * p * p;
            let mut a = lap + (v - 5.0 * p4) * h[j];
            if nonlinear {
                let r = self.grid.r(j);
                a -= r * Self::superlinear(p, h[j] / r);
            }
            out[j] = a;
        }
    }

    /// `N_j = -((P+η)^5 - P^5 - 5P^4 η)` in `u`-form (zero for linear flows).
    fn forcing_field(&self, h: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        if self.flow.is_nonlinear() {
            for j in 1..self.grid.n() {
                let (_, p) = self.coefficients(j, t);
                out[j] = -Self::superlinear(p, h[j] / self.grid.r(j));
            }
        }
        out
    }

    /// Forcing actually applied in the step `h^{m-1}, h^m -> h^{m+1}`: `-S(η^{m+1}, η^{m-1})`.
    fn step_forcing(&self, before: &[f64], after: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        if self.flow.is_nonlinear() {
            for j in 1..self.grid.n() {
                let (_, p) = self.coefficients(j, t);
                let r = self.grid.r(j);
                out[j] = -Self::superlinear_gradient(p, after[j] / r, before[j] / r).0;
            }
        }
        out
    }

    /// Superlinear potential `R(η) = ((P+η)^6 - P^6)/6 - P^5 η - 5/2 P^4 η^2`.
    #[inline]
    fn superlinear_potential(p: f64, eta: f64) -> f64 {
        let p2 = p * p;
        eta * eta * eta * (20.0 * p2 * p + eta * (15.0 * p2 + eta * (6.0 * p + eta))) / 6.0
    }

    /// Discrete gradient `(R(x) - R(z)) / (x - z)` and its `x`-derivative.
    #[inline]
    fn superlinear_gradient(p: f64, x: f64, z: f64) -> (f64, f64) {
        // power sums S_n = Σ_{l=0}^{n} x^l z^{n-l} and their x-derivatives
        let (x2, z2) = (x * x, z * z);
        let s2 = x2 + x * z + z2;
        let s3 = x2 * x + x2 * z + x * z2 + z2 * z;
        let s4 = x * s3 + z2 * z2;
        let s5 = x * s4 + z2 * z2 * z;
        let d2 = 2.0 * x + z;
        let d3 = 3.0 * x2 + 2.0 * x * z + z2;
        let d4 = s3 + x * d3;
        let d5 = s4 + x * d4;
        let p2 = p * p;
        let value = (20.0 * p2 * p * s2 + 15.0 * p2 * s3 + 6.0 * p * s4 + s5) / 6.0;
        let slope = (20.0 * p2 * p * d2 + 15.0 * p2 * d3 + 6.0 * p * d4 + d5) / 6.0;
        (value, slope)
    }

    /// Linear part of `h_tt`: `Δh + (V - 5P^4) h` in reduced form.
    fn linear_accel(&self, h: &[f64], t: f64, out: &mut [f64]) {
        let n = self.grid.n();
        let idr2 = 1.0 / self.grid.dr().powi(2);
        out[0] = 0.0;
        out[n] = 0.0;
        for j in 1..n {
            let (v, p) = self.coefficients(j, t);
            out[j] = (h[j + 1] - 2.0 * h[j] + h[j - 1]) * idr2 + (v - 5.0 * p * p * p * p) * h[j];
        }
    }

    /// Replace the explicit predictor `next` by the solution of the implicit superlinear step.
    ///
    /// Solves `η⁺ = next/r - dt² S(η⁺, η⁻)` node by node with Newton's method.
    fn implicit_superlinear(&self, before: &[f64], next: &mut [f64], t: f64, dt2: f64) {
        if !self.flow.is_nonlinear() {
            return;
        }
        for j in 1..self.grid.n() {
            let (_, p) = self.coefficients(j, t);
            let r = self.grid.r(j);
            let (target, z) = (next[j] / r, before[j] / r);
            let mut x = target;
            for _ in 0..12 {
                let (g, dg) = Self::superlinear_gradient(p, x, z);
                let delta = (x - target + dt2 * g) / (1.0 + dt2 * dg);
                x -= delta;
                if delta.abs() <= 2.0 * f64::EPSILON * x.abs() {
                    break;
                }
            }
            next[j] = r * x;
        }
    }

    /// Half-step energy from consecutive levels `a`, `b` of the perturbation at midpoint time `t`.
    pub fn half_step_energy(&self, a: &[f64], b: &[f64], dt: f64, t: f64) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let dr = g.dr();
        let full = self.flow.carries_full_field();
        let nonlinear = self.flow.is_nonlinear();
        // full reduced fields for nonlinear/free flows, the perturbation otherwise
        let x = |lvl: &[f64], j: usize| if full { lvl[j] + g.r(j) * self.phi[j] } else { lvl[j] };
        let mut kinetic = 0.0;
        let mut grad = 0.0;
        let mut pot = 0.0;
        for j in 0..n {
            grad += (x(b, j + 1) - x(b, j)) * (x(a, j + 1) - x(a, j));
        }
        grad = grad / dr - x(b, n) * x(a, n) / g.r_max();
        for j in 1..=n {
            let w = if j == n { 0.5 * dr } else { dr };
            let (xa, xb) = (x(a, j), x(b, j));
            kinetic += w * ((xb - xa) / dt).powi(2);
            let (v, p) = self.coefficients(j, t);
            let r4 = g.r(j).powi(4);
            if full && nonlinear {
                let r = g.r(j);
                let (ea, eb) = (a[j] / r, b[j] / r);
                let p4 = p.powi(4);
                let sextic = p4 * p * p / 6.0
                    + 0.5 * p4 * p * (ea + eb)
                    + 2.5 * p4 * ea * eb
                    + 0.5 * (Self::superlinear_potential(p, ea) + Self::superlinear_potential(p, eb));
                pot += w * (-0.5 * v * xa * xb + r * r * sextic);
            } else if nonlinear {
                pot += w * (-0.5 * v * xa * xb + (xa.powi(6) + xb.powi(6)) / (12.0 * r4));
            } else {
                pot += w * (-0.5 * (v - 5.0 * p.powi(4)) * xa * xb);
            }
        }
        FOUR_PI * (0.5 * kinetic + 0.5 * grad + pot)
    }
}

/// Leapfrog stepper holding two consecutive levels.
#[derive(Debug, Clone)]
pub struct Stepper {
    engine: Engine,
    prev: Vec<f64>,
    curr: Vec<f64>,
    scratch: Vec<f64>,
    t: f64,
    dt: f64,
}

impl Stepper {
    /// Start from `(h, h_t)` in reduced form at time `t0`, taking the Taylor first step.
    pub fn new(engine: Engine, h0: Vec<f64>, w0: &[f64], t0: f64, dt: f64) -> Self {
        let mut a = vec![0.0; h0.len()];
        engine.accel(&h0, t0, &mut a);
        let n = h0.len() - 1;
        let mut h1 = h0.clone();
        for j in 1..n {
            h1[j] = h0[j] + dt * w0[j] + 0.5 * dt * dt * a[j];
        }
        Self { engine, prev: h0, curr: h1, scratch: a, t: t0 + dt, dt }
    }

    /// Advance one level: explicit linear part, implicit discrete-gradient superlinear part.
    pub fn step(&mut self) {
        self.engine.linear_accel(&self.curr, self.t, &mut self.scratch);
        let dt2 = self.dt * self.dt;
        let n = self.curr.len() - 1;
        for j in 1..n {
            self.scratch[j] = 2.0 * self.curr[j] - self.prev[j] + dt2 * self.scratch[j];
        }
        self.engine.implicit_superlinear(&self.prev, &mut self.scratch, self.t, dt2);
        for j in 1..n {
            self.prev[j] = self.curr[j];
            self.curr[j] = self.scratch[j];
        }
        self.t += self.dt;
    }

    /// Swap the two levels so that further steps run backward in time.
    pub fn reverse(&mut self) {
        std::mem::swap(&mut self.prev, &mut self.curr);
        self.t -= self.dt;
        self.dt = -self.dt;
    }

    pub fn current(&self) -> &[f64] {
        &self.curr
    }

    pub fn previous(&self) -> &[f64] {
        &self.prev
    }

    pub fn time(&self) -> f64 {
        self.t
    }
}

fn support_radius(state: &State, tol: f64) -> f64 {
    let g = state.grid();
    let last = (0..=g.n())
        .rev()
        .find(|&j| state.position.values()[j].abs() > tol || state.velocity.values()[j].abs() > tol);
    last.map_or(0.0, |j| g.r(j))
}

/// `||(η, η_t)||²_{H¹×L²}` from reduced arrays (cell-midpoint gradient, trapezoid kinetic).
pub(crate) fn reduced_energy_norm_sq(grid: &RadialGrid, h: &[f64], ht: &[f64]) -> f64 {
    let dr = grid.dr();
    let mut s = 0.0;
    for j in 0..grid.n() {
        let rm = grid.r(j) + 0.5 * dr;
        let d = (h[j + 1] - h[j]) / dr - 0.5 * (h[j] + h[j + 1]) / rm;
        s += d * d * dr;
    }
    let mut k = 0.0;
    for j in 1..=grid.n() {
        let w = if j == grid.n() { 0.5 } else { 1.0 };
        k += w * ht[j] * ht[j];
    }
    FOUR_PI * (s + k * dr)
}

/// Evolve `initial` under the configured flow.
///
/// Nonlinear and free flows take the full field; linearized and truncated
/// flows take the perturbation about `steady`.
pub fn evolve(
    initial: &State,
    potential: &Potential,
    steady: Option<&SteadyState>,
    spectrum: Option<&Spectrum>,
    cfg: &EvolveConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = *potential.grid();
    grid.check_same(initial.grid())?;
    let reference = match (cfg.flow, steady) {
        (FlowKind::Free, _) | (_, None) => Field::zeros(grid),
        (_, Some(s)) => {
            grid.check_same(s.profile.grid())?;
            s.profile.clone()
        }
    };
    let perturbation = if cfg.flow.carries_full_field() {
        State { position: initial.position.sub(&reference)?, velocity: initial.velocity.clone() }
    } else {
        initial.clone()
    };
    if cfg.check_causality {
        let a = support_radius(&perturbation, cfg.support_tol);
        if cfg.t_end + a > grid.r_max() * (1.0 + 1e-12) {
            return arg(format!(
                "causal domain violated: t_end {} + support {:.3} exceeds r_max {}",
                cfg.t_end,
                a,
                grid.r_max()
            ));
        }
    }
    let dt = cfg.cfl * grid.dr();
    let steps = (cfg.t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let engine = Engine::new(potential, &reference, cfg.flow, cfg.apex, cfg.smoothing)?;

    let n = grid.n();
    let modes: Vec<Vec<f64>> = spectrum
        .map(|s| {
            s.modes
                .iter()
                .map(|rho| {
                    let mut w: Vec<f64> = (0..=n).map(|j| FOUR_PI * grid.dr() * grid.r(j) * rho.values()[j]).collect();
                    w[n] *= 0.5;
                    w
                })
                .collect()
        })
        .unwrap_or_default();
    let project = |v: &[f64]| -> Vec<f64> { modes.iter().map(|w| w.iter().zip(v).map(|(a, b)| a * b).sum()).collect() };
    let mode_u: Vec<&Field> = spectrum.map(|s| s.modes.iter().collect()).unwrap_or_default();

    let h0 = perturbation.position.reduced();
    let w0 = perturbation.velocity.reduced();
    let mut stepper = Stepper::new(engine.clone(), h0, &w0, 0.0, dt);

    let full = cfg.flow.carries_full_field();
    let phi_v = reference.reduced();
    let to_field = |h: &[f64]| -> Field {
        if full {
            let v: Vec<f64> = h.iter().zip(&phi_v).map(|(a, b)| a + b).collect();
            Field::from_reduced(grid, &v)
        } else {
            Field::from_reduced(grid, h)
        }
    };

    let mut records = Vec::with_capacity(steps + 1);
    let mut positions = SpaceTimeField::empty();
    let mut velocities = SpaceTimeField::empty();
    let mut status = RunStatus::Completed;

    let mut older: Vec<f64> = w0.clone(); // holds h^{m-1}; unused at m = 0
    for m in 0..=steps {
        let t = m as f64 * dt;
        let (h_m, h_next) = (stepper.previous().to_vec(), stepper.current().to_vec());
        if h_next.iter().any(|x| !x.is_finite() || x.abs() > cfg.overflow_guard) {
            status = RunStatus::BlowupFlagged { t };
            break;
        }
        let vel: Vec<f64> = if m == 0 {
            w0.clone()
        } else {
            h_next.iter().zip(&older).map(|(a, b)| (a - b) / (2.0 * dt)).collect()
        };
        let energy = engine.half_step_energy(&h_m, &h_next, dt, t + 0.5 * dt);
        let lambdas = project(&h_m);
        let lambda_dots = project(&vel);
        let forcing = if mode_u.is_empty() || !cfg.flow.is_nonlinear() {
            vec![0.0; mode_u.len()]
        } else {
            let nf = if m == 0 { engine.forcing_field(&h_m, t) } else { engine.step_forcing(&older, &h_next, t) };
            let nf = Field::new(grid, nf).map_err(|e| Error::Numerical(format!("forcing: {e}")))?;
            mode_u.iter().map(|rho| norms::inner(rho, &nf)).collect::<Result<_>>()?
        };
        let distance = reduced_energy_norm_sq(&grid, &h_m, &vel).sqrt();
        let need_state = !cfg.exterior_radii.is_empty() || m == steps || (cfg.record_every > 0 && m % cfg.record_every == 0) || m == 0;
        let mut exterior = Vec::with_capacity(cfg.exterior_radii.len());
        if need_state {
            let state = State { position: to_field(&h_m), velocity: Field::from_reduced(grid, &vel) };
            for &rho in &cfg.exterior_radii {
                exterior.push(if rho >= grid.r_max() {
                    0.0
                } else {
                    norms::energy_norm(&state, rho, grid.r_max())?.powi(2)
                });
            }
            if m == 0 || m == steps || (cfg.record_every > 0 && m % cfg.record_every == 0) {
                positions.push(t, state.position);
                velocities.push(t, state.velocity);
            }
        }
        let departed = cfg.departure_guard.is_some_and(|g| lambdas.iter().any(|l| l.abs() > g))
            || cfg.distance_guard.is_some_and(|g| distance > g);
        records.push(StepRecord { t, energy, lambdas, lambda_dots, forcing, exterior, distance });
        if departed {
            if positions.times().last() != Some(&t) {
                let state = State { position: to_field(&h_m), velocity: Field::from_reduced(grid, &vel) };
                positions.push(t, state.position);
                velocities.push(t, state.velocity);
            }
            status = RunStatus::Departed { t };
            break;
        }
        if m < steps {
            older = h_m;
            stepper.step();
        }
    }
    Ok(Trajectory { config: cfg.clone(), dt, reference, records, positions, velocities, status })
}

/// Outcome of the scattering heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ScatterVerdict {
    ScatterTo { index: usize, label: String },
    Departed,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterCriteria {
    /// Core distance below which the run is considered settled.
    pub threshold: f64,
    /// Core distance above which the run has left a steady state.
    pub departure: f64,
    /// Relative mismatch allowed between the exterior residual and its free evolution.
    pub comparison_tol: f64,
}

impl Default for ScatterCriteria {
    fn default() -> Self {
        Self { threshold: 1e-3, departure: 1e-2, comparison_tol: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    pub verdict: ScatterVerdict,
    /// Final core distance to each candidate steady state.
    pub final_distances: Vec<f64>,
    pub exterior_mismatch: Option<f64>,
}

/// Classify the late-time behaviour of a trajectory with snapshots.
pub fn scatter_diagnose(
    traj: &Trajectory,
    steadies: &[SteadyState],
    potential: &Potential,
    r_core: f64,
    criteria: &ScatterCriteria,
) -> Result<ScatterReport> {
    let frames = traj.positions.len();
    if frames < 4 {
        return arg("scatter diagnosis needs at least four snapshots");
    }
    let grid = *traj.grid();
    if !(r_core > 0.0 && r_core < grid.r_max()) {
        return arg(format!("core radius {r_core} must lie inside the grid"));
    }
    let t_end = traj.positions.times()[frames - 1];
    let last_quarter: Vec<usize> = (0..frames).filter(|&k| traj.positions.times()[k] >= 0.75 * t_end).collect();
    let mut final_distances = Vec::with_capacity(steadies.len());
    let mut settled = None;
    for (idx, s) in steadies.iter().enumerate() {
        let dist = |k: usize| -> Result<f64> {
            let u = traj.full_snapshot(k)?;
            norms::energy_norm(&u.sub(&s.as_state())?, 0.0, r_core)
        };
        let series: Vec<f64> = last_quarter.iter().map(|&k| dist(k)).collect::<Result<_>>()?;
        let last = *series.last().unwrap();
        final_distances.push(last);
        let below = series.iter().all(|d| *d <= criteria.threshold);
        let monotone = series.windows(2).all(|w| w[1] <= 1.1 * w[0] + 1e-14);
        if below && monotone && settled.is_none() && t_end >= 2.0 * r_core {
            settled = Some(idx);
        }
    }
    let mut exterior_mismatch = None;
    if let Some(idx) = settled {
        let s = &steadies[idx];
        let k_mid = (0..frames).find(|&k| traj.positions.times()[k] >= 0.5 * t_end).unwrap();
        let launch = traj.full_snapshot(k_mid)?.sub(&s.as_state())?;
        let target = traj.full_snapshot(frames - 1)?.sub(&s.as_state())?;
        let free_cfg = EvolveConfig {
            cfl: traj.config.cfl,
            t_end: t_end - traj.positions.times()[k_mid],
            flow: FlowKind::Free,
            check_causality: false,
            ..EvolveConfig::default()
        };
        let free = evolve(&launch, potential, None, None, &free_cfg)?;
        let freed = free.snapshot(free.positions.len() - 1);
        let r_lo = r_core.min(grid.r_max() * 0.5);
        let scale = norms::energy_norm(&target, r_lo, grid.r_max())?.max(norms::energy_norm(&freed, r_lo, grid.r_max())?);
        let diff = norms::energy_norm(&target.sub(&freed)?, r_lo, grid.r_max())?;
        let mismatch = if scale <= criteria.threshold { 0.0 } else { diff / scale };
        exterior_mismatch = Some(mismatch);
        if mismatch <= criteria.comparison_tol {
            return Ok(ScatterReport {
                verdict: ScatterVerdict::ScatterTo { index: idx, label: s.label() },
                final_distances,
                exterior_mismatch,
            });
        }
    }
    let verdict = if final_distances.iter().all(|d| *d > criteria.departure) {
        ScatterVerdict::Departed
    } else {
        ScatterVerdict::Undecided
    };
    Ok(ScatterReport { verdict, final_distances, exterior_mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialFamily;

    fn bump(r: f64, center: f64, width: f64) -> f64 {
        let x = (r - center) / width;
        if x.abs() < 1.0 {
            (-1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    }

    #[test]
    fn config_rejects_bad_cfl() {
        let cfg = EvolveConfig { cfl: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn causal_violation_rejected() {
        let g = RadialGrid::new(10.0, 200).unwrap();
        let p = Potential::zero(g);
        let s = State::at_rest(Field::from_fn(g, |r| bump(r, 3.0, 1.0)).unwrap());
        let cfg = EvolveConfig { t_end: 8.0, flow: FlowKind::Free, ..Default::default() };
        assert!(evolve(&s, &p, None, None, &cfg).is_err());
    }

    fn dalembert_error(n: usize) -> f64 {
        // v(t, r) = [F(r + t) + F(r - t)] / 2 with F the odd extension of r f(r)
        let g = RadialGrid::new(30.0, n).unwrap();
        // unit L² data: the absolute error scales with the amplitude
        let shape = |r: f64| (-((r - 5.0) / 2.0).powi(2)).exp();
        let norm = norms::l2_norm(&Field::from_fn(g, shape).unwrap());
        let f = |r: f64| shape(r) / norm;
        let big_f = |x: f64| if x >= 0.0 { x * f(x) } else { x * f(-x) };
        let s = State::at_rest(Field::from_fn(g, f).unwrap());
        let cfg = EvolveConfig { t_end: 10.0, flow: FlowKind::Free, ..Default::default() };
        let traj = evolve(&s, &Potential::zero(g), None, None, &cfg).unwrap();
        let k = traj.positions.len() - 1;
        let t = traj.positions.times()[k];
        let exact = Field::from_fn(g, |r| if r == 0.0 { 0.0 } else { (big_f(r + t) + big_f(r - t)) / (2.0 * r) }).unwrap();
        let mut err = traj.positions.frames()[k].sub(&exact).unwrap();
        err.values_mut()[0] = 0.0;
        norms::l2_norm(&err)
    }

    #[test]
    fn free_flow_matches_dalembert() {
        let (coarse, fine) = (dalembert_error(2048), dalembert_error(4096));
        assert!(fine <= 1e-4, "{fine}");
        let order = (coarse / fine).log2();
        assert!((order - 2.0).abs() < 0.25, "observed order {order}");
    }

    #[test]
    fn leapfrog_is_reversible() {
        let g = RadialGrid::new(20.0, 1000).unwrap();
        let p = Potential::from_family(PotentialFamily::Algebraic { v0: 2.0, s: 2.0 }, g).unwrap();
        let u0 = Field::from_fn(g, |r| 0.3 * bump(r, 3.0, 2.0)).unwrap();
        let engine = Engine::new(&p, &Field::zeros(g), FlowKind::Nonlinear, 0.0, 0.0).unwrap();
        let h0 = u0.reduced();
        let mut st = Stepper::new(engine, h0.clone(), &vec![0.0; g.len()], 0.0, 0.5 * g.dr());
        for _ in 0..999 {
            st.step();
        }
        st.reverse();
        for _ in 0..999 {
            st.step();
        }
        let err = st.current().iter().zip(&h0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn exact_zero_beyond_numerical_cone() {
        let g = RadialGrid::new(20.0, 2000).unwrap();
        let p = Potential::from_family(PotentialFamily::Algebraic { v0: 2.0, s: 2.0 }, g).unwrap();
        let a = 4.0;
        let s = State::at_rest(Field::from_fn(g, |r| 0.3 * bump(r, 2.0, 2.0)).unwrap());
        let cfg = EvolveConfig { t_end: 5.0, record_every: 100, ..Default::default() };
        let traj = evolve(&s, &p, None, None, &cfg).unwrap();
        for (t, frame) in traj.positions.times().iter().zip(traj.positions.frames()) {
            // leapfrog with dt = dr/2 moves information one node per step: cone a + 2t
            for (j, v) in frame.values().iter().enumerate() {
                if g.r(j) > a + 2.0 * t + 2.0 * g.dr() {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_state_stays_zero_and_energy_is_zero() {
        let g = RadialGrid::new(10.0, 200).unwrap();
        let p = Potential::from_family(PotentialFamily::Algebraic { v0: 2.0, s: 2.0 }, g).unwrap();
        let cfg = EvolveConfig { t_end: 2.0, record_every: 10, ..Default::default() };
        let traj = evolve(&State::zeros(g), &p, None, None, &cfg).unwrap();
        assert!(traj.records.iter().all(|r| r.energy == 0.0 && r.distance == 0.0));
        assert_eq!(traj.status, RunStatus::Completed);
    }
}
