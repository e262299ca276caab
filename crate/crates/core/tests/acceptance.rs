//! Desk-scale acceptance run: one PASS/FAIL line per criterion.
//!
//! Reference problem: `V = 20 (1 + r²)^-2` on `r ≤ 80` with 4096 cells, studied around
//! its one-node excited state.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use critwave::channel::{self, ChannelConfig, NonlinearChannelConfig, OnePassConfig, Verdict};
use critwave::diagnostics::{self, EnsembleConfig};
use critwave::error::Result;
use critwave::evolution::{evolve, EvolveConfig, FlowKind, ScatterVerdict};
use critwave::grid::{Field, RadialGrid, State};
use critwave::manifold::{self, CsData, OracleConfig, ShootConfig};
use critwave::norms;
use critwave::potential::{Potential, PotentialFamily};
use critwave::spectral::{self, Spectrum};
use critwave::steady::{self, SteadySearch, SteadyState};

struct Setup {
    grid: RadialGrid,
    potential: Potential,
    states: Vec<SteadyState>,
    ground: SteadyState,
    excited: SteadyState,
    spectrum: Spectrum,
    k: f64,
}

fn setup() -> Result<Setup> {
    let grid = RadialGrid::new(80.0, 4096)?;
    let potential = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, grid)?;
    let states = steady::find_steady_states(&potential, &SteadySearch::default())?;
    let pick = |nodes: usize| states.iter().find(|s| s.converged && s.nodes == nodes && s.center() > 0.0).cloned().expect("state present");
    let ground = pick(0);
    let excited = pick(1);
    let spectrum = spectral::negative_spectrum(&spectral::linearize(&potential, &excited)?)?;
    let k = spectrum.rate(0);
    Ok(Setup { grid, potential, states, ground, excited, spectrum, k })
}

fn unit_remainder(s: &Setup, center: f64, width: f64) -> Result<State> {
    let bump = manifold::smooth_bump(s.grid, center, width)?;
    let rem = spectral::project(&s.spectrum, &State::at_rest(bump))?.remainder;
    Ok(rem.scaled(1.0 / norms::energy_norm_full(&rem)))
}

fn unit_mode(s: &Setup) -> State {
    let m = s.spectrum.mode_state(0, 1.0);
    m.scaled(1.0 / norms::energy_norm_full(&m))
}

/// Tail coefficient `c` of `r ρ(r) ≈ c e^{-k r}`, averaged over `[lo, hi]`.
fn tail_constant(mode: &Field, k: f64, lo: f64, hi: f64) -> f64 {
    let g = mode.grid();
    let samples: Vec<f64> = (0..g.len()).map(|j| g.r(j)).filter(|r| *r >= lo && *r <= hi).map(|r| r * mode.interpolate(r) * (k * r).exp()).collect();
    samples.iter().sum::<f64>() / samples.len() as f64
}

type Outcome = (bool, String);

fn energy_conservation(s: &Setup) -> Result<Outcome> {
    let data = State::at_rest(manifold::smooth_bump(s.grid, 3.0, 2.0)?.scaled(0.5));
    let cfg = EvolveConfig { t_end: 20.0, ..EvolveConfig::default() };
    let traj = evolve(&data, &s.potential, None, None, &cfg)?;
    let e0 = traj.records[0].energy;
    let drift = traj.records.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max) / e0.abs();
    Ok((drift <= 1e-6 && traj.final_time() >= 20.0 - 1e-9, format!("relative drift {drift:.2e} over [0, {:.1}]", traj.final_time())))
}

fn steady_fidelity(s: &Setup) -> Result<Outcome> {
    let residual = steady::residual(&s.ground, &s.potential)?;
    let cfg = EvolveConfig { t_end: 20.0, record_every: 500, ..EvolveConfig::default() };
    let mut worst: f64 = 0.0;
    for state in [&s.ground, &s.excited] {
        let traj = evolve(&state.as_state(), &s.potential, Some(state), None, &cfg)?;
        for k in 0..traj.positions.len() {
            let snap = traj.full_snapshot(k)?;
            worst = worst.max(snap.position.sub(&state.profile)?.max_abs()).max(snap.velocity.max_abs());
        }
    }
    Ok((residual <= 1e-8 && worst <= 1e-4, format!("Q residual {residual:.2e}, max deviation of (phi,0) over [0,20] {worst:.2e}")))
}

/// Roots of `k cot(k a) = -kappa`, `k² + kappa² = v0`, for the spherical well of depth `v0` and radius `a`.
fn well_eigenvalues(v0: f64, a: f64) -> Vec<f64> {
    let f = |q: f64| {
        let kappa = (v0 - q * q).max(0.0).sqrt();
        q * (q * a).cos() + kappa * (q * a).sin()
    };
    let top = v0.sqrt();
    let mut out = Vec::new();
    let mut m = 0.0;
    loop {
        let lo = (m + 0.5) * PI / a;
        let hi = ((m + 1.0) * PI / a).min(top);
        if lo >= top {
            break;
        }
        let (mut x0, mut x1) = (lo, hi);
        if f(x0) * f(x1) <= 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (x0 + x1);
                if f(x0) * f(mid) <= 0.0 {
                    x1 = mid;
                } else {
                    x0 = mid;
                }
            }
            let q = 0.5 * (x0 + x1);
            out.push(-(v0 - q * q));
        }
        m += 1.0;
    }
    out.sort_by(f64::total_cmp);
    out
}

fn spectral_oracle(_: &Setup) -> Result<Outcome> {
    let (v0, radius) = (30.0, 1.0);
    let grid = RadialGrid::new(30.0, 4096)?;
    let potential = Potential::from_family(PotentialFamily::SphericalWell { v0, radius }, grid)?;
    let zero = SteadyState::zero(grid);
    let op = spectral::linearize(&potential, &zero)?;
    let sp = spectral::negative_spectrum(&op)?;
    let exact = well_eigenvalues(v0, radius);
    if exact.len() != sp.count() {
        return Ok((false, format!("found {} eigenvalues, expected {}", sp.count(), exact.len())));
    }
    let eig_err = exact.iter().zip(&sp.eigenvalues).map(|(e, n)| (e - n).abs() / e.abs()).fold(0.0, f64::max);
    let res = (0..sp.count())
        .map(|i| spectral::eigen_residual(&op, &sp, i).map(|r| r / sp.eigenvalues[i].abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let gram = sp.gram();
    let gram_err = (0..sp.count())
        .flat_map(|i| (0..sp.count()).map(move |j| (i, j)))
        .map(|(i, j)| (gram[i][j] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    Ok((
        eig_err <= 1e-3 && res <= 1e-6 && gram_err <= 1e-8,
        format!("{} well eigenvalues, rel error {eig_err:.2e}, residual/k^2 {res:.2e}, Gram defect {gram_err:.2e}", sp.count()),
    ))
}

fn meshkov(s: &Setup) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let well_grid = RadialGrid::new(30.0, 4096)?;
    let well = Potential::from_family(PotentialFamily::SphericalWell { v0: 30.0, radius: 1.0 }, well_grid)?;
    let well_sp = spectral::negative_spectrum(&spectral::linearize(&well, &SteadyState::zero(well_grid))?)?;
    for (sp, grid) in [(&s.spectrum, s.grid), (&well_sp, well_grid)] {
        for i in 0..sp.count() {
            let fit = spectral::meshkov_fit(sp, i, spectral::default_window(&grid))?;
            worst = worst.max((fit.k_hat - sp.rate(i)).abs() / sp.rate(i));
            n += 1;
        }
    }
    Ok((worst <= 0.02, format!("{n} modes, worst fitted-rate error {:.3}%", 100.0 * worst)))
}

fn linear_mode(s: &Setup) -> Result<Outcome> {
    let k = s.k;
    let cfg = EvolveConfig { t_end: 3.0 / k, record_every: 10, flow: FlowKind::Linearized, ..EvolveConfig::default() };
    let traj = evolve(&s.spectrum.mode_state(0, 1.0), &s.potential, Some(&s.excited), Some(&s.spectrum), &cfg)?;
    let rho = &s.spectrum.modes[0];
    let mut worst: f64 = 0.0;
    for (j, t) in traj.positions.times().iter().enumerate() {
        let expected = rho.scaled((k * t).exp());
        let err = norms::l2_norm(&traj.snapshot(j).position.sub(&expected)?) / norms::l2_norm(&expected);
        worst = worst.max(err);
    }
    Ok((worst <= 1e-3, format!("max relative L2 error {worst:.2e} over {} snapshots, t <= 3/k", traj.positions.len())))
}

fn linear_channel(s: &Setup) -> Result<Outcome> {
    let cfg = ChannelConfig { t_window: 10.0, ..ChannelConfig::default() };
    let zero = State::zeros(s.grid);
    let pure = channel::channel_verify_linear(&s.potential, &s.excited, &s.spectrum, &[1.0], &[0.0], &zero, &cfg)?;
    let c = tail_constant(&s.spectrum.modes[0], s.k, 10.0, 20.0);
    let mut ok = pure.iter().all(|r| r.verdict == Verdict::Pass);
    let mut detail = Vec::new();
    for r in pure.iter().filter(|r| [1.0, 2.0, 5.0].contains(&r.offset)) {
        let closed = 2.0 * PI * s.k * c * c * (-2.0 * s.k * r.offset).exp();
        let tail = r.series.infimum(cfg.tail_start - r.offset).map(|(_, v)| v).unwrap_or(f64::NAN);
        let err = (tail - closed).abs() / closed;
        ok &= err <= 0.1;
        detail.push(format!("R={} {:.2}%", r.offset, 100.0 * err));
    }
    let small = 0.5 / 20.0;
    let rem = unit_remainder(s, 3.0, 2.0)?.scaled(small);
    let dominant = channel::channel_verify_linear(&s.potential, &s.excited, &s.spectrum, &[1.0], &[small], &rem, &cfg)?;
    let frac = dominant.iter().zip(&pure).map(|(d, p)| d.ratio / p.ratio).fold(f64::INFINITY, f64::min);
    ok &= dominant.iter().all(|r| r.verdict == Verdict::Pass) && frac >= 0.5;
    Ok((ok, format!("closed form [{}], window-stable {}, dominant/pure >= {frac:.3}", detail.join(", "), pure.iter().all(|r| r.verdict == Verdict::Pass))))
}

fn nonlinear_channel(s: &Setup) -> Result<Outcome> {
    let h0 = unit_mode(s).scaled(1e-4);
    let r = channel::channel_verify_nonlinear(&h0, &s.potential, &s.excited, &s.spectrum, &NonlinearChannelConfig::default())?;
    Ok((r.proximity <= 0.01 && r.verdict == Verdict::Pass, format!("|h0| = {:.1e}, proximity {:.2e} on t <= 2/k, verdict {:?}", r.data_norm, r.proximity, r.verdict)))
}

fn stability_fixed_point(s: &Setup) -> Result<Outcome> {
    let scfg = ShootConfig::default();
    let ocfg = OracleConfig::default();
    let sweep: Vec<f64> = (0..10).map(|i| -4.5e-4 + 1e-4 * i as f64).collect();
    let mut gap: f64 = 0.0;
    let mut all_converged = true;
    let results: Vec<Result<(bool, f64)>> = {
        use rayon::prelude::*;
        sweep
            .par_iter()
            .map(|&lambda| {
                let cs = CsData::new(&s.spectrum, vec![lambda], State::zeros(s.grid))?;
                let shot = manifold::lp_shoot(&cs, &s.potential, &s.excited, &s.spectrum, &scfg)?;
                let oracle = manifold::bisection_oracle(&cs, &s.potential, &s.excited, &s.spectrum, &ocfg)?;
                Ok((shot.converged, (shot.lambda_dots[0] - oracle).abs()))
            })
            .collect()
    };
    for r in results {
        let (c, g) = r?;
        all_converged &= c;
        gap = gap.max(g);
    }
    let chart = manifold::chart_sample(&[-1e-5, 1e-5], &[0.0], &unit_remainder(s, 3.0, 2.0)?, &s.potential, &s.excited, &s.spectrum, &scfg)?;
    let grad = chart.gradient_at_zero.unwrap_or(f64::NAN);
    let mut lambdas = vec![0.5];
    lambdas.truncate(s.spectrum.count());
    let direction = CsData::new(&s.spectrum, lambdas, unit_remainder(s, 3.0, 2.0)?.scaled(0.5))?;
    let (lo, hi) = manifold::contraction_radius(&direction, &s.potential, &s.excited, &s.spectrum, &scfg, 1e-4, 3)?;
    let inside = sweep.iter().all(|l| 2.0 * l.abs() <= lo);
    let ok = all_converged && gap <= 1e-8 && (grad + s.k).abs() <= 1e-4 && inside;
    Ok((
        ok,
        format!(
            "10-point sweep converged {all_converged}, max oracle gap {gap:.2e}, gradient {grad:.7} vs -k {:.7}, contraction radius in [{lo:.3}, {hi:.3}]",
            -s.k
        ),
    ))
}

fn growth(s: &Setup) -> Result<Outcome> {
    let h0 = unit_mode(s).scaled(1e-5).add(&unit_remainder(s, 3.0, 2.0)?.scaled(0.25e-5))?;
    let horizon = 0.999 * (0.1 / norms::energy_norm_full(&h0)).ln() / (3.0 * s.k);
    let report = manifold::growth_experiment(&h0, &s.potential, &s.excited, &s.spectrum, horizon, 20.0, 0.5)?;
    let rate = report.fitted_rates[0].unwrap_or(f64::NAN);
    let err = (rate - s.k).abs() / s.k;
    let ok = err <= 0.01 && report.dominance_time.is_some() && report.remainder_bound_holds == Some(true);
    Ok((ok, format!("fitted rate error {:.3}%, dominance at t = {:?}, remainder bound {:?}", 100.0 * err, report.dominance_time, report.remainder_bound_holds)))
}

fn energy_expansion(s: &Setup) -> Result<Outcome> {
    let pert = State::at_rest(manifold::smooth_bump(s.grid, 2.0, 2.0)?);
    let report = channel::energy_expansion_check(&s.excited, &s.potential, &s.spectrum, &pert, 0.1)?;
    let ratios_ok = report.ratios.iter().all(|r| (6.4..=9.6).contains(r));
    let cross = report.cross_terms.iter().map(|(got, _)| (got + 2.0 * s.k * s.k).abs() / (2.0 * s.k * s.k)).fold(0.0, f64::max);
    Ok((ratios_ok && cross <= 1e-3, format!("D(b)/D(b/2) = {:?}, cross-term error {cross:.2e}", report.ratios.iter().map(|r| (r * 1e3).round() / 1e3).collect::<Vec<_>>())))
}

fn one_pass(s: &Setup) -> Result<(Outcome, Outcome)> {
    let cs = CsData::zero(&s.spectrum, s.grid);
    let base = manifold::lp_shoot(&cs, &s.potential, &s.excited, &s.spectrum, &ShootConfig::default())?;
    let deltas = [1e-5, 1e-6, 1e-7];
    let report = channel::one_pass_experiment(&s.excited, &s.potential, &s.spectrum, &s.states, &cs, &base, &deltas, &OnePassConfig::default())?;
    let expected = 10f64.ln() / s.k;
    let rates: Vec<f64> = report.runs.iter().map(|r| r.departure_rate.unwrap_or(f64::NAN)).collect();
    let rate_ok = rates.iter().all(|r| (r - s.k).abs() <= 0.1 * s.k);
    let spacing_ok = report.exit_spacings.len() == 2 && report.exit_spacings.iter().all(|d| (d - expected).abs() <= 0.1 * expected);
    let dichotomy = (
        rate_ok && spacing_ok,
        format!("rates/k {:?}, exit spacings {:?} vs log(10)/k = {expected:.4}", rates.iter().map(|r| (r / s.k * 1e4).round() / 1e4).collect::<Vec<_>>(), report.exit_spacings),
    );
    let surpluses: Vec<f64> = report.runs.iter().map(|r| r.surplus.unwrap_or(f64::NAN)).collect();
    let max = surpluses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = surpluses.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = max / min - 1.0;
    let label = s.excited.label();
    let never_back = report.runs.iter().all(|r| !matches!(&r.scatter, Some(ScatterVerdict::ScatterTo { label: l, .. }) if *l == label));
    let emission = (
        min > 0.0 && spread <= 0.25 && never_back,
        format!("surplus {surpluses:.5?}, spread {:.2e}, never scatters to {label}: {never_back}", spread),
    );
    Ok((dichotomy, emission))
}

fn norm_engine(s: &Setup) -> Result<Outcome> {
    let checks = diagnostics::lorentz_refinement(&[2000, 8000, 32000], 1e-3)?;
    let lorentz_ok = checks.iter().all(|c| c.pass);
    let lpp = diagnostics::lpp_consistency(50, 7)?;
    let cfg = EnsembleConfig::default();
    let coarse = diagnostics::strichartz_ensemble(&s.potential, &s.excited, &s.spectrum, &cfg)?;
    let fine_potential = s.potential.resampled(s.grid.refined())?;
    let fine_states = steady::find_steady_states(&fine_potential, &SteadySearch::default())?;
    let fine_excited = fine_states.iter().find(|x| x.converged && x.nodes == 1 && x.center() > 0.0).expect("refined excited state");
    let fine_spectrum = spectral::negative_spectrum(&spectral::linearize(&fine_potential, fine_excited)?)?;
    let fine = diagnostics::strichartz_ensemble(&fine_potential, fine_excited, &fine_spectrum, &cfg)?;
    let bounded = coarse.max.is_finite() && fine.max.is_finite();
    let no_growth = fine.max <= 1.1 * coarse.max;
    let errs: Vec<String> = checks.iter().map(|c| format!("{:.1e}", c.relative_errors.last().copied().unwrap_or(f64::NAN))).collect();
    Ok((
        lorentz_ok && lpp <= 1e-10 && bounded && no_growth,
        format!("Lorentz errors [{}], L^(p,p) gap {lpp:.1e}, ensemble max ratio {:.4} -> {:.4} under refinement", errs.join(", "), coarse.max, fine.max),
    ))
}

type Criterion = (usize, &'static str, fn(&Setup) -> Result<Outcome>);

fn main() -> ExitCode {
    let start = Instant::now();
    let s = match setup() {
        Ok(s) => s,
        Err(e) => {
            println!("FAIL setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("reference problem ready: k = {:.7} ({:.1}s)", s.k, start.elapsed().as_secs_f64());
    let mut failures = 0;
    let mut report = |n: usize, name: &str, t: Instant, r: Result<Outcome>| {
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok((true, d)) => println!("PASS {n:>2} {name}: {d} ({secs:.1}s)"),
            Ok((false, d)) => {
                failures += 1;
                println!("FAIL {n:>2} {name}: {d} ({secs:.1}s)");
            }
            Err(e) => {
                failures += 1;
                println!("FAIL {n:>2} {name}: error {e} ({secs:.1}s)");
            }
        }
    };
    let criteria: [Criterion; 8] = [
        (1, "energy conservation", energy_conservation),
        (2, "steady-state fidelity", steady_fidelity),
        (3, "spectral oracle", spectral_oracle),
        (4, "exponential tail fit", meshkov),
        (5, "linear mode dynamics", linear_mode),
        (6, "linear channel", linear_channel),
        (7, "nonlinear channel", nonlinear_channel),
        (8, "stability-condition fixed point", stability_fixed_point),
    ];
    for (n, name, f) in criteria {
        let t = Instant::now();
        report(n, name, t, f(&s));
    }
    let t = Instant::now();
    let (dichotomy, emission) = match one_pass(&s) {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => (Err(critwave::error::Error::Numerical(e.to_string())), Err(e)),
    };
    report(9, "off-manifold dichotomy", t, dichotomy);
    let t = Instant::now();
    report(10, "growth lemma", t, growth(&s));
    let t = Instant::now();
    report(11, "energy expansion", t, energy_expansion(&s));
    report(12, "one-pass emission", t, emission);
    let t = Instant::now();
    report(13, "norm engine", t, norm_engine(&s));
    println!("{} of 13 criteria failed ({:.1}s total)", failures, start.elapsed().as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
