//! Energy functional, shell norms, Lorentz norms and space-time norms.
//!
//! The gradient energy is evaluated on `v = r u` with forward differences,
//! using `int u_r^2 r^2 dr = int v_r^2 dr - v(R)^2 / R`. Its Hessian on
//! fields with `v(R) = 0` is then exactly the tridiagonal operator of the
//! spectral module, which keeps discrete energy expansions exact.

use std::f64::consts::PI;

use crate::error::{arg, Error, Result};
use crate::grid::{Field, RadialGrid, SpaceTimeField, State};
use crate::potential::Potential;

const FOUR_PI: f64 = 4.0 * PI;

/// `<f, g> = 4 pi int f g r^2 dr` (trapezoid).
pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    Ok(inner_unchecked(f.grid(), f.values(), g.values()))
}

pub(crate) fn inner_unchecked(grid: &RadialGrid, f: &[f64], g: &[f64]) -> f64 {
    let n = grid.n();
    let mut s = 0.0;
    for j in 1..n {
        let r = grid.r(j);
        s += f[j] * g[j] * r * r;
    }
    s += 0.5 * f[n] * g[n] * grid.r_max().powi(2);
    FOUR_PI * s * grid.dr()
}

pub fn l2_norm(f: &Field) -> f64 {
    inner_unchecked(f.grid(), f.values(), f.values()).sqrt()
}

/// `(4 pi int |f|^p r^2 dr)^(1/p)` by the trapezoid rule.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return arg(format!("exponent must be positive, got {p}"));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let powered = f.map(|x| x.abs().powf(p));
    let ones = Field::from_fn(*f.grid(), |_| 1.0)?;
    Ok(inner(&powered, &ones)?.powf(1.0 / p))
}

pub fn l6_norm(f: &Field) -> f64 {
    lp_norm(f, 6.0).unwrap_or(f64::NAN)
}

/// `4 pi int u_r^2 r^2 dr` in the forward-difference `v`-form.
pub fn gradient_energy(u: &Field) -> f64 {
    let g = u.grid();
    let v = u.reduced();
    let dr = g.dr();
    let mut s = 0.0;
    for j in 0..g.n() {
        let d = v[j + 1] - v[j];
        s += d * d;
    }
    FOUR_PI * (s / dr - v[g.n()].powi(2) / g.r_max())
}

/// Total conserved energy.
pub fn energy(state: &State, potential: &Potential) -> Result<f64> {
    state.grid().check_same(potential.grid())?;
    let g = state.grid();
    let u = state.position.values();
    let ut = state.velocity.values();
    let vv = potential.values().values();
    let density: Vec<f64> = (0..=g.n())
        .map(|j| 0.5 * ut[j] * ut[j] - 0.5 * vv[j] * u[j] * u[j] + u[j].powi(6) / 6.0)
        .collect();
    let ones = vec![1.0; g.len()];
    Ok(0.5 * gradient_energy(&state.position) + inner_unchecked(g, &density, &ones))
}

fn check_bounds(grid: &RadialGrid, r_lo: f64, r_hi: f64) -> Result<()> {
    if !(r_lo >= 0.0 && r_lo < r_hi && r_hi <= grid.r_max() * (1.0 + 1e-14)) {
        return arg(format!(
            "need 0 <= r_lo < r_hi <= r_max, got [{r_lo}, {r_hi}] with r_max = {}",
            grid.r_max()
        ));
    }
    Ok(())
}

/// Overlap of cell `j` with `[lo, hi]`, integrating the linear interpolant of `f`.
fn linear_cell_integral(grid: &RadialGrid, f: &[f64], j: usize, lo: f64, hi: f64) -> f64 {
    let (a, b) = (grid.r(j), grid.r(j + 1));
    let x0 = lo.max(a);
    let x1 = hi.min(b);
    if x1 <= x0 {
        return 0.0;
    }
    let at = |x: f64| f[j] + (f[j + 1] - f[j]) * (x - a) / (b - a);
    0.5 * (at(x0) + at(x1)) * (x1 - x0)
}

/// Shell integrals `(4 pi int u_r^2 r^2, 4 pi int u_t^2 r^2)` over `[r_lo, r_hi]`.
///
/// The gradient density `(v_r - v/r)^2` is constant per cell; partial cells
/// are weighted by their overlap fraction.
pub fn shell_integrals(state: &State, r_lo: f64, r_hi: f64) -> Result<(f64, f64)> {
    let g = *state.grid();
    check_bounds(&g, r_lo, r_hi)?;
    let hi = r_hi.min(g.r_max());
    let v = state.position.reduced();
    let ut = state.velocity.values();
    let kin: Vec<f64> = (0..=g.n()).map(|j| (ut[j] * g.r(j)).powi(2)).collect();
    let dr = g.dr();
    let first = g.index_below(r_lo).min(g.n() - 1);
    let mut grad = 0.0;
    let mut kinetic = 0.0;
    for j in first..g.n() {
        let a = g.r(j);
        if a >= hi {
            break;
        }
        let overlap = (hi.min(a + dr) - r_lo.max(a)).max(0.0);
        let rm = a + 0.5 * dr;
        let dens = (v[j + 1] - v[j]) / dr - 0.5 * (v[j] + v[j + 1]) / rm;
        grad += dens * dens * overlap;
        kinetic += linear_cell_integral(&g, &kin, j, r_lo, hi);
    }
    Ok((FOUR_PI * grad, FOUR_PI * kinetic))
}

/// `H^1 x L^2` norm restricted to the shell `[r_lo, r_hi]`.
pub fn energy_norm(state: &State, r_lo: f64, r_hi: f64) -> Result<f64> {
    let (g, k) = shell_integrals(state, r_lo, r_hi)?;
    Ok((g + k).sqrt())
}

/// Full-range `H^1 x L^2` norm.
pub fn energy_norm_full(state: &State) -> f64 {
    let r_max = state.grid().r_max();
    energy_norm(state, 0.0, r_max).unwrap_or(f64::NAN)
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 0.0) || p.is_nan() {
        return arg(format!("Lorentz exponent p must be positive, got {p}"));
    }
    if !(q > 0.0) || q.is_nan() {
        return arg(format!("Lorentz exponent q must be positive, got {q}"));
    }
    Ok(())
}

/// Lorentz `L^{p,q}` norm of radial samples, taken as piecewise constant on
/// cells `[r_j - dr/2, r_j + dr/2)` clipped to `[0, r_max]`.
///
/// Uses the normalization `p^{1/q} || lambda mu{|f| >= lambda}^{1/p} ||_{L^q(dlambda/lambda)}`,
/// evaluated exactly on the step distribution function. `p = inf` gives the sup norm.
pub fn lorentz_norm(f: &Field, p: f64, q: f64) -> Result<f64> {
    check_exponents(p, q)?;
    Ok(lorentz_of_samples(f.grid(), f.values(), p, q))
}

fn cell_volumes(grid: &RadialGrid) -> Vec<f64> {
    let half = 0.5 * grid.dr();
    (0..=grid.n())
        .map(|j| {
            let lo = (grid.r(j) - half).max(0.0);
            let hi = (grid.r(j) + half).min(grid.r_max());
            FOUR_PI / 3.0 * (hi.powi(3) - lo.powi(3))
        })
        .collect()
}

fn lorentz_of_samples(grid: &RadialGrid, values: &[f64], p: f64, q: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let vol = cell_volumes(grid);
    let mut cells: Vec<(f64, f64)> = values
        .iter()
        .zip(&vol)
        .map(|(v, w)| (v.abs(), *w))
        .filter(|(a, w)| *a > 0.0 && *w > 0.0)
        .collect();
    if cells.is_empty() {
        return 0.0;
    }
    cells.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut measure = 0.0;
    if q.is_infinite() {
        let mut best: f64 = 0.0;
        for (k, &(a, w)) in cells.iter().enumerate() {
            measure += w;
            let next = cells.get(k + 1).map_or(0.0, |c| c.0);
            if next < a {
                best = best.max(a * measure.powf(1.0 / p));
            }
        }
        return best;
    }
    let mut sum = 0.0;
    for (k, &(a, w)) in cells.iter().enumerate() {
        measure += w;
        let next = cells.get(k + 1).map_or(0.0, |c| c.0);
        sum += measure.powf(q / p) * (a.powf(q) - next.powf(q));
    }
    (p / q * sum).powf(1.0 / q)
}

/// Weights for integrating over the sample times: trapezoid, or unit weight
/// for a single sample.
fn time_weights(times: &[f64]) -> Vec<f64> {
    let m = times.len();
    if m == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.0; m];
    for k in 0..m - 1 {
        let h = times[k + 1] - times[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

/// Per-radius temporal `L^{r_t}` norm of a space-time field.
pub fn temporal_profile(field: &SpaceTimeField, r_t: f64) -> Result<Field> {
    let grid = *field
        .grid()
        .ok_or_else(|| Error::Argument("empty space-time field".into()))?;
    if !(r_t > 0.0) {
        return arg(format!("temporal exponent must be positive, got {r_t}"));
    }
    let mut out = vec![0.0; grid.len()];
    if r_t.is_infinite() {
        for frame in field.frames() {
            for (o, v) in out.iter_mut().zip(frame.values()) {
                *o = f64::max(*o, v.abs());
            }
        }
    } else {
        let w = time_weights(field.times());
        for (frame, wk) in field.frames().iter().zip(&w) {
            for (o, v) in out.iter_mut().zip(frame.values()) {
                *o += wk * v.abs().powf(r_t);
            }
        }
        out.iter_mut().for_each(|o| *o = o.powf(1.0 / r_t));
    }
    Field::new(grid, out)
}

/// Reversed space-time norm `L^{p,q}_x L^{r_t}_t`: time first, then the Lorentz norm in space.
pub fn reversed_norm(field: &SpaceTimeField, p: f64, q: f64, r_t: f64) -> Result<f64> {
    check_exponents(p, q)?;
    let profile = temporal_profile(field, r_t)?;
    Ok(lorentz_of_samples(profile.grid(), profile.values(), p, q))
}

/// `L^5_t L^10_x` norm with the radial measure.
pub fn strichartz_norm(field: &SpaceTimeField) -> Result<f64> {
    if field.is_empty() {
        return arg("empty space-time field");
    }
    let w = time_weights(field.times());
    let mut total = 0.0;
    for (frame, wk) in field.frames().iter().zip(&w) {
        let l10 = lp_norm(frame, 10.0)?;
        total += wk * l10.powi(5);
    }
    Ok(total.powf(0.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialFamily;
    use proptest::prelude::*;

    fn grid(r_max: f64, n: usize) -> RadialGrid {
        RadialGrid::new(r_max, n).unwrap()
    }

    #[test]
    fn zero_state_has_zero_energy_and_norms() {
        let g = grid(10.0, 200);
        let p = Potential::from_family(PotentialFamily::Algebraic { v0: 5.0, s: 2.0 }, g).unwrap();
        let s = State::zeros(g);
        assert_eq!(energy(&s, &p).unwrap(), 0.0);
        assert_eq!(energy_norm(&s, 0.0, 10.0).unwrap(), 0.0);
        assert_eq!(lorentz_norm(&s.position, 2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn kinetic_only_energy_is_half_l2_squared() {
        let g = grid(10.0, 400);
        let p = Potential::from_family(PotentialFamily::Algebraic { v0: 5.0, s: 2.0 }, g).unwrap();
        let gv = Field::from_fn(g, |r| (-r * r).exp()).unwrap();
        let s = State::new(Field::zeros(g), gv.clone()).unwrap();
        let l2 = l2_norm(&gv);
        assert!((energy(&s, &p).unwrap() - 0.5 * l2 * l2).abs() < 1e-14);
        assert!((energy_norm(&s, 0.0, 10.0).unwrap() - l2).abs() < 1e-13);
    }

    #[test]
    fn shell_norm_matches_polynomial_closed_form() {
        // u = 1 - r^2/4 on [0, 2]; u_r = -r/2 so 4 pi int_a^b r^4/4 dr = pi (b^5 - a^5)/5
        let g = grid(2.0, 4000);
        let u = Field::from_fn(g, |r| 1.0 - r * r / 4.0).unwrap();
        let s = State::at_rest(u);
        let (a, b) = (0.3f64, 1.7f64);
        let exact = PI * (b.powi(5) - a.powi(5)) / 5.0;
        let got = energy_norm(&s, a, b).unwrap().powi(2);
        assert!((got - exact).abs() / exact < 1e-5, "{got} vs {exact}");
    }

    #[test]
    fn inverted_bounds_rejected() {
        let s = State::zeros(grid(1.0, 8));
        assert!(energy_norm(&s, 0.5, 0.2).is_err());
        assert!(lorentz_norm(&s.position, 0.0, 1.0).is_err());
    }

    #[test]
    fn unit_ball_indicator_lorentz_value() {
        let exact = 1.5 * (4.0 * PI / 3.0f64).powf(2.0 / 3.0);
        let mut errs = Vec::new();
        for n in [1000usize, 4000, 16000] {
            let g = grid(2.0, n);
            let f = Field::from_fn(g, |r| if r < 1.0 { 1.0 } else { 0.0 }).unwrap();
            errs.push((lorentz_norm(&f, 1.5, 1.0).unwrap() - exact).abs() / exact);
        }
        assert!(errs[2] < 1e-3 && errs[2] < errs[0], "{errs:?}");
    }

    #[test]
    fn weak_l3_of_cored_inverse_radius() {
        let exact = (4.0 * PI / 3.0f64).powf(1.0 / 3.0);
        let errs: Vec<f64> = [2000usize, 8000, 32000]
            .iter()
            .map(|&n| {
                let g = grid(20.0, n);
                let f = Field::from_fn(g, |r| 1.0 / r.max(1.0)).unwrap();
                (lorentz_norm(&f, 3.0, f64::INFINITY).unwrap() - exact).abs() / exact
            })
            .collect();
        assert!(errs[2] < 1e-3 && errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn separable_field_factorizes() {
        let g = grid(5.0, 200);
        let prof = Field::from_fn(g, |r| (-r).exp()).unwrap();
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let amp = |t: f64| 1.0 + t * t;
        let st = SpaceTimeField::separable(&times, amp, &prof).unwrap();
        let w = time_weights(&times);
        let a2: f64 = times.iter().zip(&w).map(|(t, wk)| wk * amp(*t).powi(2)).sum::<f64>().sqrt();
        let direct = reversed_norm(&st, 1.5, 1.0, 2.0).unwrap();
        let factored = a2 * lorentz_norm(&prof, 1.5, 1.0).unwrap();
        assert!((direct - factored).abs() / factored < 1e-12);
        let a5: f64 = times.iter().zip(&w).map(|(t, wk)| wk * amp(*t).powi(5)).sum::<f64>().powf(0.2);
        let s = strichartz_norm(&st).unwrap();
        assert!((s - a5 * lp_norm(&prof, 10.0).unwrap()).abs() / s < 1e-12);
    }

    #[test]
    fn time_independent_field_reduces_to_lorentz() {
        let g = grid(5.0, 200);
        let prof = Field::from_fn(g, |r| 1.0 / (1.0 + r * r)).unwrap();
        let st = SpaceTimeField::separable(&[0.0, 0.5, 1.0], |_| 1.0, &prof).unwrap();
        let a = reversed_norm(&st, 6.0, 2.0, f64::INFINITY).unwrap();
        let b = lorentz_norm(&prof, 6.0, 2.0).unwrap();
        assert_eq!(a, b);
        let single = SpaceTimeField::separable(&[0.0], |_| 1.0, &prof).unwrap();
        assert_eq!(reversed_norm(&single, 1.5, 1.0, 2.0).unwrap(), lorentz_norm(&prof, 1.5, 1.0).unwrap());
    }

    #[test]
    fn strichartz_gaussian_matches_richardson_reference() {
        // u(t, r) = exp(-r^2) for t in [0, 1]: norm = (4 pi int e^{-10 r^2} r^2 dr)^{1/10}
        let exact = (4.0 * PI * PI.sqrt() / (4.0 * 10f64.powf(1.5))).powf(0.1);
        let run = |n: usize| {
            let g = grid(6.0, n);
            let prof = Field::from_fn(g, |r| (-r * r).exp()).unwrap();
            let st = SpaceTimeField::separable(&[0.0, 0.5, 1.0], |_| 1.0, &prof).unwrap();
            strichartz_norm(&st).unwrap()
        };
        let (coarse, fine) = (run(100), run(200));
        let rich = (4.0 * fine - coarse) / 3.0;
        assert!((rich - exact).abs() / exact < 1e-8, "{rich} vs {exact}");
    }

    proptest! {
        #[test]
        fn lorentz_pp_is_lp(vals in proptest::collection::vec(-3.0f64..3.0, 17), p in 0.5f64..6.0) {
            let g = grid(4.0, 16);
            let f = Field::new(g, vals).unwrap();
            let vol = cell_volumes(&g);
            let direct: f64 = f.values().iter().zip(&vol).map(|(v, w)| v.abs().powf(p) * w).sum::<f64>().powf(1.0 / p);
            let l = lorentz_norm(&f, p, p).unwrap();
            prop_assert!((l - direct).abs() <= 1e-10 * direct.max(1e-300));
        }

        #[test]
        fn lorentz_monotone_and_sign_invariant(
            vals in proptest::collection::vec(-3.0f64..3.0, 17),
            bump in proptest::collection::vec(0.0f64..1.0, 17),
            p in 0.5f64..6.0, q in 0.5f64..8.0,
        ) {
            let g = grid(4.0, 16);
            let f = Field::new(g, vals.clone()).unwrap();
            let big = Field::new(g, vals.iter().zip(&bump).map(|(v, b)| v.abs() + b).collect()).unwrap();
            let nf = lorentz_norm(&f, p, q).unwrap();
            prop_assert!(nf <= lorentz_norm(&big, p, q).unwrap() * (1.0 + 1e-12));
            prop_assert_eq!(nf, lorentz_norm(&f.scaled(-1.0), p, q).unwrap());
            let inf = lorentz_norm(&f, p, f64::INFINITY).unwrap();
            prop_assert!(inf <= lorentz_norm(&big, p, f64::INFINITY).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn quadratic_scaling(s in -5.0f64..5.0) {
            let g = grid(6.0, 120);
            let st = State::new(
                Field::from_fn(g, |r| (-r * r).exp()).unwrap(),
                Field::from_fn(g, |r| r * (-r).exp()).unwrap(),
            ).unwrap();
            let p = Potential::zero(g);
            let base = energy_norm_full(&st);
            prop_assert!((energy_norm_full(&st.scaled(s)) - s.abs() * base).abs() <= 1e-12 * base.max(1.0));
            let kin = energy(&State::new(Field::zeros(g), st.velocity.clone()).unwrap(), &p).unwrap();
            let kin_s = energy(&State::new(Field::zeros(g), st.velocity.scaled(s)).unwrap(), &p).unwrap();
            prop_assert!((kin_s - s * s * kin).abs() <= 1e-12 * kin.max(1.0) * (1.0 + s * s));
        }
    }
}
