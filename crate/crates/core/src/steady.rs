//! Radial steady states `-Δφ - Vφ + φ^5 = 0` by shooting and Newton polishing.
//!
//! Shooting integrates `v = r φ`, `v'' = -V v + v^5 / r^4`, outward from the
//! series start at the origin. The discrete boundary-value problem uses a
//! Neumann ghost node at `r_max`, matching the flat `c/r` tail of `v`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::grid::{Field, RadialGrid, State};
use crate::norms;
use crate::ode::{integrate_nodes, Tolerance};
use crate::potential::Potential;
use crate::tridiag::thomas;

/// Terminal behaviour of a shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndBehavior {
    Decays,
    DivergesPlus,
    DivergesMinus,
}

/// One shot from centre value `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootProfile {
    pub a: f64,
    /// `φ(r_j)` at the nodes reached before the divergence guard fired.
    pub values: Vec<f64>,
    pub class: EndBehavior,
    pub nodes: usize,
}

impl ShootProfile {
    pub fn reached_radius(&self, grid: &RadialGrid) -> f64 {
        grid.r(self.values.len() - 1)
    }

    /// The full profile when the shot reached `r_max`.
    pub fn profile(&self, grid: RadialGrid) -> Option<Field> {
        (self.values.len() == grid.len()).then(|| Field::new(grid, self.values.clone()).ok()).flatten()
    }
}

/// A polished steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub profile: Field,
    pub nodes: usize,
    pub energy: f64,
    pub tail_coeff: f64,
    pub residual: f64,
    /// False when Newton polishing did not converge; such states are excluded downstream.
    pub converged: bool,
}

impl SteadyState {
    /// The trivial state on `grid`.
    pub fn zero(grid: RadialGrid) -> Self {
        Self { profile: Field::zeros(grid), nodes: 0, energy: 0.0, tail_coeff: 0.0, residual: 0.0, converged: true }
    }

    pub fn center(&self) -> f64 {
        self.profile.values()[0]
    }

    pub fn is_zero(&self) -> bool {
        self.profile.max_abs() == 0.0
    }

    pub fn negated(&self) -> Self {
        Self { profile: self.profile.scaled(-1.0), tail_coeff: -self.tail_coeff, ..self.clone() }
    }

    pub fn as_state(&self) -> State {
        State::at_rest(self.profile.clone())
    }

    /// Short label such as `Q`, `-Q`, `phi1`, `0`.
    pub fn label(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let sign = if self.center() < 0.0 { "-" } else { "" };
        if self.nodes == 0 {
            format!("{sign}Q")
        } else {
            format!("{sign}phi{}", self.nodes)
        }
    }
}

/// Scan and polish settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadySearch {
    pub a_min: f64,
    pub a_max: f64,
    pub a_step: f64,
    pub max_nodes: usize,
    pub bisect_tol: f64,
    pub newton_max_iter: usize,
    pub residual_tol: f64,
    /// `|v|` level at which a shot is declared divergent.
    pub divergence_guard: f64,
}

impl Default for SteadySearch {
    fn default() -> Self {
        Self {
            a_min: 0.0,
            a_max: 5.0,
            a_step: 0.01,
            max_nodes: 3,
            bisect_tol: 1e-12,
            newton_max_iter: 60,
            residual_tol: 1e-8,
            divergence_guard: 50.0,
        }
    }
}

impl SteadySearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_min.is_finite() && self.a_max.is_finite() && self.a_min < self.a_max) {
            return arg("steady a-range must be a finite interval");
        }
        if !(self.a_step > 0.0) || !(self.bisect_tol > 0.0) || !(self.residual_tol > 0.0) {
            return arg("steady step and tolerances must be positive");
        }
        Ok(())
    }
}

fn count_sign_changes(v: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut n = 0;
    for &x in v {
        if x != 0.0 {
            if last != 0.0 && x.signum() != last.signum() {
                n += 1;
            }
            last = x;
        }
    }
    n
}

/// Shoot `φ(0) = a`, `φ'(0) = 0` outward across the grid.
pub fn shoot(potential: &Potential, a: f64) -> Result<ShootProfile> {
    shoot_guarded(potential, a, SteadySearch::default().divergence_guard)
}

fn shoot_guarded(potential: &Potential, a: f64, guard: f64) -> Result<ShootProfile> {
    if !a.is_finite() {
        return arg(format!("centre value must be finite, got {a}"));
    }
    let grid = *potential.grid();
    if a == 0.0 {
        return Ok(ShootProfile { a, values: vec![0.0; grid.len()], class: EndBehavior::Decays, nodes: 0 });
    }
    let r1 = grid.r(1);
    let c = (a.powi(5) - potential.eval(0.0) * a) / 6.0;
    let y1 = [a * r1 + c * r1.powi(3), a + 3.0 * c * r1 * r1];
    let nodes: Vec<f64> = (1..=grid.n()).map(|j| grid.r(j)).collect();
    let rhs = |r: f64, y: [f64; 2]| [y[1], -potential.eval(r) * y[0] + y[0].powi(5) / r.powi(4)];
    let out = integrate_nodes(rhs, &nodes, y1, Tolerance::default(), |_, y| y[0].abs() > guard);
    let out = match out {
        Ok(o) => o,
        // a blowup that outruns the guard between nodes is still a divergence
        Err(Error::Numerical(_)) => {
            return Ok(ShootProfile {
                a,
                values: vec![a],
                class: if a > 0.0 { EndBehavior::DivergesPlus } else { EndBehavior::DivergesMinus },
                nodes: 0,
            })
        }
        Err(e) => return Err(e),
    };
    let last = *out.values.last().unwrap();
    let sign = if out.stopped { last[0] } else { last[1] };
    if sign.is_nan() {
        return Err(Error::Numerical(format!("NaN while shooting from a = {a}")));
    }
    let class = if sign >= 0.0 { EndBehavior::DivergesPlus } else { EndBehavior::DivergesMinus };
    let mut values = Vec::with_capacity(out.values.len() + 1);
    values.push(a);
    for (k, y) in out.values.iter().enumerate() {
        values.push(y[0] / grid.r(k + 1));
    }
    let v: Vec<f64> = out.values.iter().map(|y| y[0]).collect();
    Ok(ShootProfile { a, values, class, nodes: count_sign_changes(&v) })
}

/// `F_j = (v_{j+1} - 2 v_j + v_{j-1}) / dr^2 + V_j v_j - v_j^5 / r_j^4` for `j = 1..=n`, ghost `v_{n+1} = v_{n-1}`.
fn bvp_residual(grid: &RadialGrid, vpot: &[f64], v: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let idr2 = 1.0 / grid.dr().powi(2);
    (1..=n)
        .map(|j| {
            let right = if j == n { v[n - 1] } else { v[j + 1] };
            (right - 2.0 * v[j] + v[j - 1]) * idr2 + vpot[j] * v[j] - v[j].powi(5) / grid.r(j).powi(4)
        })
        .collect()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Damped Newton on the discrete boundary-value problem. Returns `(v, converged)`.
fn newton_polish(grid: &RadialGrid, vpot: &[f64], mut v: Vec<f64>, max_iter: usize) -> (Vec<f64>, bool) {
    let n = grid.n();
    let idr2 = 1.0 / grid.dr().powi(2);
    let mut f = bvp_residual(grid, vpot, &v);
    for _ in 0..max_iter {
        let diag: Vec<f64> = (1..=n).map(|j| -2.0 * idr2 + vpot[j] - 5.0 * v[j].powi(4) / grid.r(j).powi(4)).collect();
        let upper = vec![idr2; n - 1];
        let mut lower = vec![idr2; n - 1];
        lower[n - 2] = 2.0 * idr2;
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let Ok(dv) = thomas(&lower, &diag, &upper, &rhs) else {
            return (v, false);
        };
        let f_norm = max_abs(&f);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> =
                std::iter::once(0.0).chain((1..=n).map(|j| v[j] + step * dv[j - 1])).collect();
            let ft = bvp_residual(grid, vpot, &trial);
            if max_abs(&ft) < f_norm || f_norm == 0.0 {
                v = trial;
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        let scale = max_abs(&v).max(1.0);
        if max_abs(&dv) * step <= 1e-13 * scale {
            return (v, true);
        }
        if !accepted {
            // no descent: converged to roundoff if the update is already tiny
            return (v, max_abs(&dv) <= 1e-10 * scale);
        }
    }
    (v, false)
}

/// L² norm of `-Δφ - Vφ + φ^5` on interior nodes.
pub fn residual(state: &SteadyState, potential: &Potential) -> Result<f64> {
    state.profile.grid().check_same(potential.grid())?;
    Ok(residual_of(&state.profile, potential))
}

fn residual_of(profile: &Field, potential: &Potential) -> f64 {
    let grid = profile.grid();
    let v = profile.reduced();
    let f = bvp_residual(grid, potential.values().values(), &v);
    let interior: f64 = f[..grid.n() - 1].iter().map(|x| x * x).sum();
    (4.0 * std::f64::consts::PI * interior * grid.dr()).sqrt()
}

/// Least-squares constant fit of `r φ` over `[r_max/2, r_max]`.
pub fn tail_coefficient(profile: &Field) -> f64 {
    let g = profile.grid();
    let start = g.n().div_ceil(2);
    let v = profile.reduced();
    v[start..].iter().sum::<f64>() / (g.n() - start + 1) as f64
}

fn build_state(profile: Field, potential: &Potential, converged: bool, tol: f64) -> Result<SteadyState> {
    let energy = norms::energy(&State::at_rest(profile.clone()), potential)?;
    let residual = residual_of(&profile, potential);
    let nodes = count_sign_changes(&profile.values()[1..]);
    Ok(SteadyState {
        tail_coeff: tail_coefficient(&profile),
        nodes,
        energy,
        residual,
        converged: converged && residual <= tol,
        profile,
    })
}

/// Polish a shot into a steady state.
pub fn polish(potential: &Potential, shot: &ShootProfile, search: &SteadySearch) -> Result<SteadyState> {
    let grid = *potential.grid();
    let reached = shot.values.len() - 1;
    // trust the shot up to 80% of its reach, then hold v constant
    let trusted = if reached == grid.n() { reached } else { (reached * 4 / 5).max(1) };
    let mut v = vec![0.0; grid.len()];
    for j in 1..=trusted {
        v[j] = grid.r(j) * shot.values[j];
    }
    for j in trusted + 1..=grid.n() {
        v[j] = v[trusted];
    }
    let (v, converged) = newton_polish(&grid, potential.values().values(), v, search.newton_max_iter);
    build_state(Field::from_reduced(grid, &v), potential, converged, search.residual_tol)
}

fn bisect(potential: &Potential, lo: f64, hi: f64, class_lo: EndBehavior, search: &SteadySearch) -> Result<ShootProfile> {
    let (mut lo, mut hi) = (lo, hi);
    let mut best = shoot_guarded(potential, lo, search.divergence_guard)?;
    while hi - lo > search.bisect_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = shoot_guarded(potential, mid, search.divergence_guard)?;
        if s.class == class_lo {
            lo = mid;
            best = s;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// All radial steady states found by scanning `a`, sorted by energy.
///
/// Contains `0` and, with each state, its negative. States whose Newton
/// polish failed are kept with `converged = false`.
pub fn find_steady_states(potential: &Potential, search: &SteadySearch) -> Result<Vec<SteadyState>> {
    search.validate()?;
    let grid = *potential.grid();
    let lo = search.a_min.max(0.0);
    let steps = ((search.a_max - lo) / search.a_step).round() as usize;
    let a_values: Vec<f64> = (0..=steps).map(|k| lo + k as f64 * search.a_step).filter(|&a| a > 0.0).collect();
    let shots: Vec<ShootProfile> = a_values
        .par_iter()
        .map(|&a| shoot_guarded(potential, a, search.divergence_guard))
        .collect::<Result<_>>()?;
    let brackets: Vec<usize> = (1..shots.len()).filter(|&i| shots[i].class != shots[i - 1].class).collect();
    let polished: Vec<SteadyState> = brackets
        .par_iter()
        .map(|&i| {
            let shot = bisect(potential, a_values[i - 1], a_values[i], shots[i - 1].class, search)?;
            polish(potential, &shot, search)
        })
        .collect::<Result<_>>()?;

    let mut found: Vec<SteadyState> = vec![SteadyState::zero(grid)];
    for s in polished {
        if s.nodes > search.max_nodes || s.is_zero() || s.profile.max_abs() < 1e-8 {
            continue;
        }
        let dup = found.iter().any(|f| {
            let d = f.profile.sub(&s.profile).map(|d| d.max_abs()).unwrap_or(f64::INFINITY);
            d <= 1e-6 * s.profile.max_abs()
        });
        if !dup {
            let neg = s.negated();
            found.push(s);
            found.push(neg);
        }
    }
    found.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.nodes.cmp(&b.nodes))
            .then(b.center().total_cmp(&a.center()))
    });
    Ok(found)
}
