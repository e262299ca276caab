//! The linearized operator `L = -Δ - V + 5φ^4` in the radial sector.
//!
//! Acting on `v = r u` with Dirichlet conditions at both ends, `L` is the
//! symmetric tridiagonal matrix with diagonal `2/dr^2 + q_j` and off-diagonal
//! `-1/dr^2`, where `q = -V + 5φ^4`.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::grid::{Field, RadialGrid, State};
use crate::norms;
use crate::potential::Potential;
use crate::steady::SteadyState;
use crate::tridiag::SymTridiag;

#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    grid: RadialGrid,
    /// `q_j = -V_j + 5 φ_j^4` at every node.
    q: Vec<f64>,
    matrix: SymTridiag,
    potential: Potential,
    steady: Field,
    tail: f64,
}

impl LinearizedOperator {
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn matrix(&self) -> &SymTridiag {
        &self.matrix
    }

    /// `L u` for a field with `u(r_max) = 0`; boundary values of the result are zero.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.grid.check_same(u.grid())?;
        let v = u.reduced();
        let lv = self.matrix.apply(&v[1..self.grid.n()]);
        let mut out = vec![0.0; self.grid.len()];
        for (j, x) in lv.iter().enumerate() {
            out[j + 1] = x / self.grid.r(j + 1);
        }
        out[0] = 3.0 * out[1] - 3.0 * out[2] + out[3];
        Field::new(self.grid, out)
    }

    /// `<L u, u>` via the quadratic form.
    pub fn quadratic_form(&self, u: &Field) -> Result<f64> {
        norms::inner(&self.apply(u)?, u)
    }

    /// Same operator on the grid with doubled `r_max`; `V` from its family, `φ` continued by `c/r`.
    pub fn doubled(&self) -> Result<Self> {
        let grid = self.grid.doubled();
        let potential = self.potential.resampled(grid)?;
        let n0 = self.grid.n();
        let phi: Vec<f64> = (0..=grid.n())
            .map(|j| if j <= n0 { self.steady.values()[j] } else { self.tail / grid.r(j) })
            .collect();
        let steady = Field::new(grid, phi)?;
        Ok(assemble(&potential, &steady, self.tail))
    }
}

fn assemble(potential: &Potential, phi: &Field, tail: f64) -> LinearizedOperator {
    let grid = *potential.grid();
    let q: Vec<f64> = potential
        .values()
        .values()
        .iter()
        .zip(phi.values())
        .map(|(v, p)| -v + 5.0 * p.powi(4))
        .collect();
    let idr2 = 1.0 / grid.dr().powi(2);
    let diag: Vec<f64> = (1..grid.n()).map(|j| 2.0 * idr2 + q[j]).collect();
    let off = vec![-idr2; grid.n() - 2];
    let matrix = SymTridiag::new(diag, off).expect("grid has at least 4 cells");
    LinearizedOperator { grid, q, matrix, potential: potential.clone(), steady: phi.clone(), tail }
}

/// Assemble `L` around a steady state.
pub fn linearize(potential: &Potential, steady: &SteadyState) -> Result<LinearizedOperator> {
    potential.grid().check_same(steady.profile.grid())?;
    Ok(assemble(potential, &steady.profile, steady.tail_coeff))
}

/// Default zero-mode exclusion width, `10 (π / r_max)^2`.
pub fn gap_threshold(grid: &RadialGrid) -> f64 {
    10.0 * (std::f64::consts::PI / grid.r_max()).powi(2)
}

/// Smallest `r_max` with `e^{-k r_max} < 1e-10`, never below `floor`.
pub fn sized_r_max(k_min: f64, floor: f64) -> f64 {
    if k_min > 0.0 {
        floor.max(10.0 * std::f64::consts::LN_10 / k_min)
    } else {
        floor
    }
}

/// Negative eigenvalues and their modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// `-k_i^2`, ascending.
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<Field>,
}

impl Spectrum {
    pub fn empty() -> Self {
        Self { eigenvalues: Vec::new(), modes: Vec::new() }
    }

    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Decay rates `k_i = sqrt(-e_i)`, descending.
    pub fn rates(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| (-e).sqrt()).collect()
    }

    pub fn rate(&self, i: usize) -> f64 {
        (-self.eigenvalues[i]).sqrt()
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.modes
            .iter()
            .map(|a| self.modes.iter().map(|b| norms::inner(a, b).unwrap_or(f64::NAN)).collect())
            .collect()
    }

    /// `(ρ_i, k_i ρ_i)` for `sign = 1`, `(ρ_i, -k_i ρ_i)` for `sign = -1`.
    pub fn mode_state(&self, i: usize, sign: f64) -> State {
        let rho = self.modes[i].clone();
        let vel = rho.scaled(sign * self.rate(i));
        State { position: rho, velocity: vel }
    }

    /// `Σ μ⁺_i (ρ_i, k_i ρ_i) + μ⁻_i (ρ_i, -k_i ρ_i) + rest`.
    pub fn assemble(&self, mu_plus: &[f64], mu_minus: &[f64], rest: &State) -> Result<State> {
        if mu_plus.len() != self.count() || mu_minus.len() != self.count() {
            return Err(Error::Dimension("one coefficient per mode required".into()));
        }
        let mut s = rest.clone();
        for i in 0..self.count() {
            s = s.axpy(mu_plus[i], &self.mode_state(i, 1.0))?;
            s = s.axpy(mu_minus[i], &self.mode_state(i, -1.0))?;
        }
        Ok(s)
    }
}

/// Eigenvalues below zero with modes normalized in `L²(R³)` and positive at `r_1`.
pub fn negative_spectrum(op: &LinearizedOperator) -> Result<Spectrum> {
    let gap = gap_threshold(&op.grid);
    let eigenvalues = op.matrix.eigenvalues_below(0.0);
    if let Some(&top) = eigenvalues.last() {
        if top > -gap {
            return Err(Error::Hyperbolicity(format!(
                "eigenvalue {top:.3e} lies within the gap threshold {gap:.3e} of zero"
            )));
        }
    }
    let g = op.grid;
    let scale = (4.0 * std::f64::consts::PI * g.dr()).sqrt();
    let mut modes = Vec::with_capacity(eigenvalues.len());
    for &e in &eigenvalues {
        let x = op.matrix.eigenvector(e)?;
        let sign = if x[0] < 0.0 { -1.0 } else { 1.0 };
        let mut v = vec![0.0; g.len()];
        for (j, xi) in x.iter().enumerate() {
            v[j + 1] = sign * xi / scale;
        }
        modes.push(Field::from_reduced(g, &v));
    }
    Ok(Spectrum { eigenvalues, modes })
}

/// `||L ρ_i + k_i^2 ρ_i||_{L²}`.
pub fn eigen_residual(op: &LinearizedOperator, spectrum: &Spectrum, i: usize) -> Result<f64> {
    let lr = op.apply(&spectrum.modes[i])?;
    let res = lr.axpy(-spectrum.eigenvalues[i], &spectrum.modes[i])?;
    // the origin value is extrapolated; the residual lives on interior nodes
    let mut vals = res.into_values();
    vals[0] = 0.0;
    Ok(norms::l2_norm(&Field::new(op.grid, vals)?))
}

/// Rayleigh quotient `<L ρ, ρ> / <ρ, ρ>`.
pub fn rayleigh_quotient(op: &LinearizedOperator, mode: &Field) -> Result<f64> {
    Ok(op.quadratic_form(mode)? / norms::inner(mode, mode)?)
}

/// Outcome of the three-part hyperbolicity heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    pub gap_threshold: f64,
    /// Distance of the closest eigenvalue to zero, relative to the gap threshold.
    pub eigen_margin: f64,
    pub eigen_pass: bool,
    /// `|ψ'(r_max)| r_max / max|ψ|` for the reduced zero-energy solution; ≈ 0 at a resonance.
    pub resonance_margin: f64,
    pub resonance_pass: bool,
    /// `None` when the potential is only known by samples.
    pub doubling_pass: Option<bool>,
    pub doubling_detail: String,
    pub pass: bool,
    pub note: String,
}

/// Threshold on the resonance margin below which a zero-energy resonance is suspected.
pub const RESONANCE_MARGIN: f64 = 0.05;

/// Reduced zero-energy solution `ψ r` with `ψ r ~ r` at the origin.
pub fn zero_energy_solution(op: &LinearizedOperator) -> Vec<f64> {
    let g = op.grid;
    let dr2 = g.dr().powi(2);
    let mut v = vec![0.0; g.len()];
    v[1] = g.dr();
    for j in 1..g.n() {
        v[j + 1] = 2.0 * v[j] - v[j - 1] + dr2 * op.q[j] * v[j];
        if !v[j + 1].is_finite() || v[j + 1].abs() > 1e200 {
            // rescale to keep the profile representable
            let m = v[j + 1].abs().max(v[j].abs());
            if !m.is_finite() {
                break;
            }
            v.iter_mut().take(j + 2).for_each(|x| *x /= m);
        }
    }
    v
}

fn resonance_margin(op: &LinearizedOperator) -> f64 {
    let v = zero_energy_solution(op);
    let n = op.grid.n();
    let slope = (v[n] - v[n - 1]) / op.grid.dr();
    let peak = v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return 0.0;
    }
    slope.abs() * op.grid.r_max() / peak
}

pub fn hyperbolicity_check(op: &LinearizedOperator, spectrum: &Spectrum) -> HyperbolicityReport {
    let gap = gap_threshold(&op.grid);
    let nearest = {
        let below = op.matrix.eigenvalues_below(0.0);
        let top_negative = below.last().map_or(f64::INFINITY, |e| e.abs());
        let first_positive = op.matrix.eigenvalue(below.len());
        top_negative.min(first_positive.abs())
    };
    let negatives_near_zero = spectrum.eigenvalues.iter().any(|e| *e > -gap)
        || op.matrix.eigenvalues_below(0.0).last().is_some_and(|e| *e > -gap);
    let eigen_pass = !negatives_near_zero;
    let eigen_margin = nearest / gap;
    let res_margin = resonance_margin(op);
    let resonance_pass = res_margin > RESONANCE_MARGIN;

    let (doubling_pass, doubling_detail) = match op.doubled() {
        Err(_) => (None, "skipped: potential known only by samples".to_string()),
        Ok(big) => {
            let small = op.matrix.eigenvalues_below(0.0);
            let large = big.matrix.eigenvalues_below(0.0);
            let big_margin = resonance_margin(&big);
            let same_count = small.len() == large.len();
            let max_shift = small
                .iter()
                .zip(&large)
                .map(|(a, b)| (a - b).abs() / a.abs())
                .fold(0.0, f64::max);
            let ok = same_count && max_shift < 1e-3 && (big_margin > RESONANCE_MARGIN) == resonance_pass;
            (
                Some(ok),
                format!(
                    "negative count {} -> {}, max relative shift {:.2e}, resonance margin {:.3} -> {:.3}",
                    small.len(),
                    large.len(),
                    max_shift,
                    res_margin,
                    big_margin
                ),
            )
        }
    };
    let pass = eigen_pass && resonance_pass && doubling_pass.unwrap_or(true);
    HyperbolicityReport {
        gap_threshold: gap,
        eigen_margin,
        eigen_pass,
        resonance_margin: res_margin,
        resonance_pass,
        doubling_pass,
        doubling_detail,
        pass,
        note: "radial sector only: necessary but not sufficient for hyperbolicity of the full operator".into(),
    }
}

/// Mode coordinates of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub lambdas: Vec<f64>,
    pub lambda_dots: Vec<f64>,
    pub remainder: State,
}

pub fn project(spectrum: &Spectrum, state: &State) -> Result<Projection> {
    let mut remainder = state.clone();
    let mut lambdas = Vec::with_capacity(spectrum.count());
    let mut lambda_dots = Vec::with_capacity(spectrum.count());
    for rho in &spectrum.modes {
        let l = norms::inner(rho, &state.position)?;
        let ld = norms::inner(rho, &state.velocity)?;
        remainder.position = remainder.position.axpy(-l, rho)?;
        remainder.velocity = remainder.velocity.axpy(-ld, rho)?;
        lambdas.push(l);
        lambda_dots.push(ld);
    }
    Ok(Projection { lambdas, lambda_dots, remainder })
}

/// `(λ, λ̇) -> (μ⁺, μ⁻)` with `μ± = (λ ± λ̇/k)/2`.
pub fn hyperbolic_coords(lambda: f64, lambda_dot: f64, k: f64) -> Result<(f64, f64)> {
    if !(k > 0.0) {
        return arg(format!("mode rate must be positive, got {k}"));
    }
    Ok((0.5 * (lambda + lambda_dot / k), 0.5 * (lambda - lambda_dot / k)))
}

/// `(μ⁺, μ⁻) -> (λ, λ̇)`.
pub fn from_hyperbolic(mu_plus: f64, mu_minus: f64, k: f64) -> (f64, f64) {
    (mu_plus + mu_minus, k * (mu_plus - mu_minus))
}

/// Log-linear fit of `r ρ(r) ≈ c e^{-k r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshkovFit {
    pub mode: usize,
    pub k_hat: f64,
    pub c_hat: f64,
    pub window: (f64, f64),
    /// `max |r ρ e^{k̂ r} - ĉ| / |ĉ|` over the window.
    pub remainder_max: f64,
    /// `|k̂ - k| / k` against the eigenvalue rate, when known.
    pub rate_error: Option<f64>,
}

const UNDERFLOW: f64 = f64::MIN_POSITIVE * 1e20;

/// Fit a profile over `window`; the window is cut six decades above the tail's
/// noise floor and shrunk past the last sign change.
pub fn fit_exponential_tail(profile: &Field, window: (f64, f64)) -> Result<MeshkovFit> {
    let g = profile.grid();
    let (lo, hi) = window;
    if !(lo >= 0.0 && lo < hi && hi <= g.r_max()) {
        return arg(format!("fit window [{lo}, {hi}] must lie inside [0, {}]", g.r_max()));
    }
    let v = profile.reduced();
    let mut j_hi = g.index_below(hi);
    let mut j_lo = (lo / g.dr()).ceil() as usize;
    // computed tails flatten onto a noise floor; stop six decades above it
    let floor = v[j_lo.min(j_hi)..].iter().map(|x| x.abs()).filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
    let cutoff = (1e6 * floor).max(UNDERFLOW);
    if let Some(j_noise) = (0..=j_hi).rev().find(|&j| v[j].abs() >= cutoff) {
        if j_noise < j_hi {
            j_hi = j_noise;
            j_lo = j_lo.min(j_hi / 2);
        }
    }
    if let Some(last_change) = (1..=j_hi).rev().find(|&j| v[j] * v[j - 1] < 0.0 || v[j] == 0.0) {
        j_lo = j_lo.max(last_change + 1);
    }
    if j_lo + 4 > j_hi {
        return Err(Error::Numerical("fit window empty after excluding sign changes".into()));
    }
    if v[j_lo..=j_hi].iter().any(|x| x.abs() < UNDERFLOW || !x.is_finite()) {
        return Err(Error::Numerical("fit window reaches floating-point underflow".into()));
    }
    let sign = v[j_hi].signum();
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let m = (j_hi - j_lo + 1) as f64;
    for j in j_lo..=j_hi {
        let x = g.r(j);
        let y = (sign * v[j]).ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;
    let k_hat = -slope;
    let c_hat = sign * intercept.exp();
    let remainder_max = (j_lo..=j_hi)
        .map(|j| ((v[j] * (k_hat * g.r(j)).exp() - c_hat) / c_hat).abs())
        .fold(0.0, f64::max);
    Ok(MeshkovFit {
        mode: 0,
        k_hat,
        c_hat,
        window: (g.r(j_lo), g.r(j_hi)),
        remainder_max,
        rate_error: None,
    })
}

/// Default fit window `(r_max/4, 3 r_max/4)`.
pub fn default_window(grid: &RadialGrid) -> (f64, f64) {
    (0.25 * grid.r_max(), 0.75 * grid.r_max())
}

pub fn meshkov_fit(spectrum: &Spectrum, i: usize, window: (f64, f64)) -> Result<MeshkovFit> {
    let mode = spectrum
        .modes
        .get(i)
        .ok_or_else(|| Error::Argument(format!("no mode with index {i}")))?;
    let mut fit = fit_exponential_tail(mode, window)?;
    let k = spectrum.rate(i);
    fit.mode = i;
    fit.rate_error = Some((fit.k_hat - k).abs() / k);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialFamily;

    fn well(v0: f64, r_max: f64, n: usize) -> Potential {
        let g = RadialGrid::new(r_max, n).unwrap();
        Potential::from_family(PotentialFamily::SphericalWell { v0, radius: 1.0 }, g).unwrap()
    }

    fn op_for(p: &Potential) -> LinearizedOperator {
        linearize(p, &SteadyState::zero(*p.grid())).unwrap()
    }

    /// Bound state of the unit spherical well: `κ cot κ = -sqrt(V0 - κ²)` with `k² = V0 - κ²`.
    fn well_oracle(v0: f64) -> f64 {
        let f = |kt: f64| kt / kt.tan() + (v0 - kt * kt).sqrt();
        let (mut lo, mut hi) = (std::f64::consts::FRAC_PI_2 + 1e-12, v0.sqrt().min(std::f64::consts::PI) - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let kt = 0.5 * (lo + hi);
        -(v0 - kt * kt)
    }

    #[test]
    fn free_operator_has_no_negative_spectrum() {
        let p = Potential::zero(RadialGrid::new(20.0, 400).unwrap());
        let op = op_for(&p);
        let s = negative_spectrum(&op).unwrap();
        assert_eq!(s.count(), 0);
        let lowest = op.matrix().eigenvalue(0);
        let box_value = (std::f64::consts::PI / 20.0).powi(2);
        assert!(lowest > 0.0 && (lowest - box_value).abs() / box_value < 1e-3);
        let rep = hyperbolicity_check(&op, &s);
        assert!(rep.pass, "{rep:?}");
        assert!((rep.resonance_margin - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spherical_well_matches_transcendental_oracle() {
        let exact = well_oracle(4.0);
        let p = well(4.0, 16.0, 8192);
        let op = op_for(&p);
        let s = negative_spectrum(&op).unwrap();
        assert_eq!(s.count(), 1);
        assert!((s.eigenvalues[0] - exact).abs() < 1e-3, "{} vs {exact}", s.eigenvalues[0]);
        assert!((s.rate(0) - 0.638).abs() < 2e-3);
        let rq = rayleigh_quotient(&op, &s.modes[0]).unwrap();
        assert!((rq - s.eigenvalues[0]).abs() < 1e-10);
        assert!(eigen_residual(&op, &s, 0).unwrap() <= 1e-6 * s.eigenvalues[0].abs());
        assert!((norms::inner(&s.modes[0], &s.modes[0]).unwrap() - 1.0).abs() < 1e-8);
        assert!(s.modes[0].values()[1] > 0.0);
        assert!(hyperbolicity_check(&op, &s).pass);
    }

    #[test]
    fn threshold_well_reports_resonance() {
        let v0 = std::f64::consts::PI.powi(2) / 4.0;
        let p = well(v0, 16.0, 8192);
        let op = op_for(&p);
        let s = negative_spectrum(&op).unwrap_or_else(|_| Spectrum::empty());
        let rep = hyperbolicity_check(&op, &s);
        assert!(!rep.pass);
        assert!(!rep.resonance_pass, "{rep:?}");
    }

    #[test]
    fn nonlinear_term_shifts_spectrum_up() {
        let g = RadialGrid::new(20.0, 800).unwrap();
        let p = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, g).unwrap();
        let bare = op_for(&p);
        let bump = SteadyState { profile: Field::from_fn(g, |r| (-r * r).exp()).unwrap(), ..SteadyState::zero(g) };
        let shifted = linearize(&p, &bump).unwrap();
        for k in 0..5 {
            assert!(shifted.matrix().eigenvalue(k) >= bare.matrix().eigenvalue(k) - 1e-12);
        }
    }

    #[test]
    fn projection_identities() {
        let p = well(4.0, 16.0, 2048);
        let s = negative_spectrum(&op_for(&p)).unwrap();
        let k = s.rate(0);
        let pr = project(&s, &s.mode_state(0, 1.0)).unwrap();
        assert!((pr.lambdas[0] - 1.0).abs() < 1e-12 && (pr.lambda_dots[0] - k).abs() < 1e-12);
        assert!(norms::energy_norm_full(&pr.remainder) < 1e-10);

        let g = *p.grid();
        let st = State::new(
            Field::from_fn(g, |r| (-(r - 3.0).powi(2)).exp()).unwrap(),
            Field::from_fn(g, |r| r * (-r).exp()).unwrap(),
        )
        .unwrap();
        let pr = project(&s, &st).unwrap();
        let again = project(&s, &pr.remainder).unwrap();
        assert!(again.lambdas[0].abs() < 1e-12 && again.lambda_dots[0].abs() < 1e-12);
        let (mp, mm) = hyperbolic_coords(pr.lambdas[0], pr.lambda_dots[0], k).unwrap();
        let back = s.assemble(&[mp], &[mm], &pr.remainder).unwrap();
        let diff = back.sub(&st).unwrap();
        assert!(diff.position.max_abs() < 1e-12 && diff.velocity.max_abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_coordinate_examples() {
        let k = 0.7;
        assert_eq!(hyperbolic_coords(1.0, k, k).unwrap(), (1.0, 0.0));
        assert_eq!(hyperbolic_coords(1.0, 0.0, k).unwrap(), (0.5, 0.5));
        assert_eq!(hyperbolic_coords(0.0, -k, k).unwrap(), (-0.5, 0.5));
        assert!(hyperbolic_coords(1.0, 1.0, 0.0).is_err());
        let (l, ld) = from_hyperbolic(0.3, -0.2, k);
        let (a, b) = hyperbolic_coords(l, ld, k).unwrap();
        assert!((a - 0.3).abs() < 1e-15 && (b + 0.2).abs() < 1e-15);
    }

    #[test]
    fn synthetic_tail_recovered_exactly() {
        let g = RadialGrid::new(40.0, 4000).unwrap();
        let f = Field::from_fn(g, |r| 1.7 * (-0.9 * r).exp() / r.max(1e-3)).unwrap();
        let fit = fit_exponential_tail(&f, default_window(&g)).unwrap();
        assert!((fit.k_hat - 0.9).abs() < 1e-10 && (fit.c_hat - 1.7).abs() < 1e-8);
        let far = RadialGrid::new(1600.0, 1600).unwrap();
        let f = Field::from_fn(far, |r| (-r).exp() / r.max(1.0)).unwrap();
        let fit = fit_exponential_tail(&f, default_window(&far)).unwrap();
        assert!(fit.window.1 < 700.0 && (fit.k_hat - 1.0).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn well_mode_tail_rate() {
        let p = well(4.0, 16.0, 8192);
        let s = negative_spectrum(&op_for(&p)).unwrap();
        let fit = meshkov_fit(&s, 0, default_window(p.grid())).unwrap();
        assert!(fit.rate_error.unwrap() <= 0.02, "{fit:?}");
    }
}
