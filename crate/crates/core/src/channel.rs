//! Exterior-energy diagnostics: channels of energy, the energy expansion
//! around a steady state and the one-pass experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::evolution::{evolve, reduced_energy_norm_sq, scatter_diagnose, Engine, EvolveConfig, FlowKind, RunStatus, ScatterCriteria, ScatterVerdict, Stepper, Trajectory};
use crate::grid::{Field, State};
use crate::manifold::{CsData, ShootResult};
use crate::norms;
use crate::potential::Potential;
use crate::spectral::{linearize, meshkov_fit, default_window, project, Spectrum};
use crate::steady::SteadyState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExteriorKind {
    /// `∫ u_t² dx`.
    DtOnly,
    /// `∫ (u_r² + u_t²) / 2 dx`.
    Full,
    /// `2π ∫ (v_r² + v_t²) dr` with `v = r u`: the full energy without the
    /// boundary term `2π v(ρ)²/ρ`, which vanishes as the cone moves out.
    Radiation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorSeries {
    pub kind: ExteriorKind,
    pub offset: f64,
    pub apex: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// First snapshot time at which the region `r ≥ t - apex + R` left the grid.
    pub truncated_at: Option<f64>,
}

impl ExteriorSeries {
    /// `(t, value)` of the smallest sample, optionally restricted to `t ≥ from`.
    pub fn infimum(&self, from: f64) -> Option<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= from)
            .map(|(t, v)| (*t, *v))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// `max / min - 1` over samples with `t ≥ from`.
    pub fn variation(&self, from: f64) -> Option<f64> {
        let vals: Vec<f64> = self.times.iter().zip(&self.values).filter(|(t, _)| **t >= from).map(|(_, v)| *v).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(0.0, f64::max);
        (!vals.is_empty() && lo > 0.0).then(|| hi / lo - 1.0)
    }
}

/// Exterior energy over `r ≥ (t - apex) + offset` at every snapshot of `traj`.
///
/// Linear flows measure the perturbation, nonlinear and free flows the full field.
pub fn exterior_energy(traj: &Trajectory, offset: f64, apex: f64, kind: ExteriorKind) -> Result<ExteriorSeries> {
    let r_max = traj.grid().r_max();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut truncated_at = None;
    for (k, &t) in traj.positions.times().iter().enumerate() {
        let lo = (t - apex + offset).max(0.0);
        if lo >= r_max {
            truncated_at = Some(t);
            break;
        }
        let snap = traj.snapshot(k);
        let (grad, kin) = norms::shell_integrals(&snap, lo, r_max)?;
        times.push(t);
        values.push(match kind {
            ExteriorKind::DtOnly => kin,
            ExteriorKind::Full => 0.5 * (grad + kin),
            ExteriorKind::Radiation => 0.5 * (reduced_gradient(&snap.position, lo) + kin),
        });
    }
    Ok(ExteriorSeries { kind, offset, apex, times, values, truncated_at })
}

/// `4π ∫_{r≥lo} v_r² dr` with cell-constant slopes and partial cells by overlap.
fn reduced_gradient(u: &Field, lo: f64) -> f64 {
    let g = *u.grid();
    let v = u.reduced();
    let dr = g.dr();
    let first = g.index_below(lo).min(g.n() - 1);
    let sum: f64 = (first..g.n())
        .map(|j| {
            let overlap = (g.r(j) + dr - lo.max(g.r(j))).clamp(0.0, dr);
            ((v[j + 1] - v[j]) / dr).powi(2) * overlap
        })
        .sum();
    4.0 * std::f64::consts::PI * sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub offsets: Vec<f64>,
    pub t_window: f64,
    /// Relative drop of the ratio allowed when the window doubles.
    pub stability_tol: f64,
    /// Tail regime for the closed-form comparison: `t + R ≥ tail_start`.
    pub tail_start: f64,
    pub backward: bool,
    pub cfl: f64,
    /// Snapshot stride.
    pub record_every: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { offsets: vec![0.0, 1.0, 2.0, 5.0], t_window: 10.0, stability_tol: 0.05, tail_start: 8.0, backward: false, cfl: 0.5, record_every: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub offset: f64,
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
    pub backward: bool,
    pub series: ExteriorSeries,
    pub infimum: f64,
    pub infimum_time: f64,
    /// `inf_t E_ext / Σ|μ⁺|²` (`Σ|μ⁻|²` for backward runs); the fitted `c(R)`.
    pub ratio: f64,
    pub ratio_doubled: f64,
    /// `max / min - 1` of the series in the tail regime.
    pub tail_variation: Option<f64>,
    /// `2π k ĉ² e^{-2kR}` for single-mode data.
    pub closed_form: Option<f64>,
    pub closed_form_error: Option<f64>,
    pub verdict: Verdict,
}

fn linear_run(data: &State, potential: &Potential, steady: &SteadyState, spectrum: &Spectrum, t_end: f64, cfg: &ChannelConfig) -> Result<Trajectory> {
    let ecfg = EvolveConfig {
        cfl: cfg.cfl,
        t_end,
        flow: FlowKind::Linearized,
        record_every: cfg.record_every,
        overflow_guard: 1e300,
        ..EvolveConfig::default()
    };
    evolve(data, potential, Some(steady), Some(spectrum), &ecfg)
}

/// Linear channel of energy for data `Σμ⁺(ρ,kρ) + Σμ⁻(ρ,-kρ) + remainder`, one report per offset.
pub fn channel_verify_linear(
    potential: &Potential,
    steady: &SteadyState,
    spectrum: &Spectrum,
    mu_plus: &[f64],
    mu_minus: &[f64],
    remainder: &State,
    cfg: &ChannelConfig,
) -> Result<Vec<ChannelReport>> {
    if mu_plus.len() != spectrum.count() || mu_minus.len() != spectrum.count() {
        return Err(Error::Dimension(format!("expected {} mode coefficients", spectrum.count())));
    }
    if !(cfg.t_window > 0.0) {
        return arg("channel window must be positive");
    }
    let mut data = spectrum.assemble(mu_plus, mu_minus, remainder)?;
    let denom: f64 = if cfg.backward {
        data = data.time_reversed();
        mu_minus.iter().map(|m| m * m).sum()
    } else {
        mu_plus.iter().map(|m| m * m).sum()
    };
    let short = linear_run(&data, potential, steady, spectrum, cfg.t_window, cfg)?;
    let long = linear_run(&data, potential, steady, spectrum, 2.0 * cfg.t_window, cfg)?;
    let single = {
        let (growing, decaying) = if cfg.backward { (mu_minus, mu_plus) } else { (mu_plus, mu_minus) };
        let active: Vec<usize> = (0..growing.len()).filter(|&i| growing[i] != 0.0).collect();
        (active.len() == 1 && decaying.iter().all(|m| *m == 0.0) && norms::energy_norm_full(remainder) == 0.0).then(|| active[0])
    };
    let fit = single.map(|i| meshkov_fit(spectrum, i, default_window(spectrum.modes[i].grid()))).transpose()?;
    cfg.offsets
        .iter()
        .map(|&offset| {
            let series = exterior_energy(&short, offset, 0.0, ExteriorKind::DtOnly)?;
            let doubled = exterior_energy(&long, offset, 0.0, ExteriorKind::DtOnly)?;
            let (infimum_time, infimum) = series.infimum(0.0).ok_or_else(|| Error::Numerical("empty exterior series".into()))?;
            let inf_long = doubled.infimum(0.0).map_or(0.0, |p| p.1);
            let ratio = if denom > 0.0 { infimum / denom } else { 0.0 };
            let ratio_doubled = if denom > 0.0 { inf_long / denom } else { 0.0 };
            let tail_from = (cfg.tail_start - offset).max(0.0);
            let tail_variation = series.variation(tail_from);
            let closed_form = fit.as_ref().map(|f| {
                let k = spectrum.rate(single.unwrap());
                2.0 * std::f64::consts::PI * k * f.c_hat * f.c_hat * (-2.0 * k * offset).exp()
            });
            let closed_form_error = closed_form.and_then(|c| {
                let (_, tail_inf) = series.infimum(tail_from)?;
                Some((tail_inf / denom - c).abs() / c)
            });
            let stable = ratio_doubled >= (1.0 - cfg.stability_tol) * ratio;
            let verdict = if ratio > 0.0 && stable { Verdict::Pass } else { Verdict::Fail };
            Ok(ChannelReport {
                offset,
                mu_plus: mu_plus.to_vec(),
                mu_minus: mu_minus.to_vec(),
                backward: cfg.backward,
                series,
                infimum,
                infimum_time,
                ratio,
                ratio_doubled,
                tail_variation,
                closed_form,
                closed_form_error,
                verdict,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearChannelConfig {
    pub offset: f64,
    pub dominance: f64,
    /// Perturbation budget `ε_*` in `H¹×L²`; also caps the run once `e^{k t}||h0||` reaches it.
    pub budget: f64,
    pub t_window: f64,
    /// Window for the linear/nonlinear series comparison, in units of `1/k_1`.
    pub comparison_factor: f64,
    pub backward: bool,
    pub cfl: f64,
    pub record_every: usize,
}

impl Default for NonlinearChannelConfig {
    fn default() -> Self {
        Self { offset: 1.0, dominance: 20.0, budget: 0.05, t_window: 8.0, comparison_factor: 2.0, backward: false, cfl: 0.5, record_every: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearChannelReport {
    pub dominant_mode: usize,
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
    pub data_norm: f64,
    pub window: f64,
    pub nonlinear: ExteriorSeries,
    pub linear: ExteriorSeries,
    /// `max |E_nl - E_lin| / E_lin` for `t ≤ comparison_factor / k_1`.
    pub proximity: f64,
    pub infimum: f64,
    /// `c(R)`: half the pure-mode linear ratio.
    pub reference_constant: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

/// Nonlinear channel of energy for `(φ,0) + h0` with one dominant growing mode.
pub fn channel_verify_nonlinear(
    h0: &State,
    potential: &Potential,
    steady: &SteadyState,
    spectrum: &Spectrum,
    cfg: &NonlinearChannelConfig,
) -> Result<NonlinearChannelReport> {
    if spectrum.is_empty() {
        return arg("nonlinear channel needs an unstable mode");
    }
    let data_norm = norms::energy_norm_full(h0);
    if data_norm > cfg.budget {
        return arg(format!("data norm {data_norm:.3e} exceeds the budget {:.3e}", cfg.budget));
    }
    let h = if cfg.backward { h0.time_reversed() } else { h0.clone() };
    let p = project(spectrum, &h)?;
    let rates = spectrum.rates();
    let mut mu_plus = Vec::new();
    let mut mu_minus = Vec::new();
    for i in 0..rates.len() {
        let k = rates[i];
        mu_plus.push(0.5 * (p.lambdas[i] + p.lambda_dots[i] / k));
        mu_minus.push(0.5 * (p.lambdas[i] - p.lambda_dots[i] / k));
    }
    let i0 = (0..rates.len()).max_by(|&a, &b| mu_plus[a].abs().total_cmp(&mu_plus[b].abs())).unwrap();
    let others: f64 = (0..rates.len()).filter(|&i| i != i0).map(|i| mu_plus[i].abs()).sum::<f64>()
        + mu_minus.iter().map(|m| m.abs()).sum::<f64>()
        + norms::energy_norm_full(&p.remainder);
    if mu_plus[i0].abs() < cfg.dominance * others {
        return arg(format!("dominance fails: |μ⁺| = {:.3e} < {} × {:.3e}", mu_plus[i0].abs(), cfg.dominance, others));
    }
    let k0 = rates[i0];
    let window = cfg.t_window.min((cfg.budget / data_norm).ln() / k0).max(0.0);
    let ccfg = ChannelConfig {
        offsets: vec![cfg.offset],
        t_window: window.max(1e-6),
        cfl: cfg.cfl,
        record_every: cfg.record_every,
        ..ChannelConfig::default()
    };
    let pure: Vec<f64> = (0..rates.len()).map(|i| if i == i0 { 1.0 } else { 0.0 }).collect();
    let zeros = vec![0.0; rates.len()];
    let grid = *potential.grid();
    let pure_report = channel_verify_linear(potential, steady, spectrum, &pure, &zeros, &State::zeros(grid), &ccfg)?.remove(0);
    let reference_constant = 0.5 * pure_report.ratio;

    let full = State { position: h.position.add(&steady.profile)?, velocity: h.velocity.clone() };
    let ecfg = EvolveConfig { cfl: cfg.cfl, t_end: window, flow: FlowKind::Nonlinear, record_every: cfg.record_every, ..EvolveConfig::default() };
    let nl_traj = evolve(&full, potential, Some(steady), Some(spectrum), &ecfg)?;
    let lin_traj = linear_run(&h, potential, steady, spectrum, window, &ccfg)?;
    let nonlinear = exterior_energy(&nl_traj, cfg.offset, 0.0, ExteriorKind::DtOnly)?;
    let linear = exterior_energy(&lin_traj, cfg.offset, 0.0, ExteriorKind::DtOnly)?;
    let horizon = cfg.comparison_factor / rates[0];
    let proximity = nonlinear
        .times
        .iter()
        .zip(nonlinear.values.iter().zip(&linear.values))
        .filter(|(t, _)| **t <= horizon + 1e-12)
        .map(|(_, (a, b))| if *b > 0.0 { (a - b).abs() / b } else { 0.0 })
        .fold(0.0, f64::max);
    let infimum = nonlinear.infimum(0.0).map_or(0.0, |p| p.1);
    let target = reference_constant * mu_plus[i0] * mu_plus[i0];
    let margin = if target > 0.0 { infimum / target } else { 0.0 };
    let verdict = if target > 0.0 && infimum >= target && matches!(nl_traj.status, RunStatus::Completed) { Verdict::Pass } else { Verdict::Fail };
    Ok(NonlinearChannelReport {
        dominant_mode: i0,
        mu_plus,
        mu_minus,
        data_norm,
        window,
        nonlinear,
        linear,
        proximity,
        infimum,
        reference_constant,
        margin,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub betas: Vec<f64>,
    /// `D(β)`.
    pub remainders: Vec<f64>,
    /// `D(β) / β³`.
    pub scaled: Vec<f64>,
    /// `D(β) / D(β/2)` for consecutive betas.
    pub ratios: Vec<f64>,
    /// `Σ_{j≥3} C(6,j) φ^{6-j} (βΛ₀)^j / 6` integrated directly.
    pub direct: Vec<f64>,
    pub quadratic_mode: Vec<f64>,
    /// Extracted `μ⁺μ⁻` coefficient per mode and its expected value `-2k²`.
    pub cross_terms: Vec<(f64, f64)>,
}

/// Cubic remainder of the energy around `(φ, 0)` and the `μ⁺μ⁻` cross term.
pub fn energy_expansion_check(
    steady: &SteadyState,
    potential: &Potential,
    spectrum: &Spectrum,
    perturbation: &State,
    beta_scale: f64,
) -> Result<ExpansionReport> {
    if !(beta_scale > 0.0) {
        return arg("beta scale must be positive");
    }
    let op = linearize(potential, steady)?;
    let l6 = norms::l6_norm(&perturbation.position);
    let base = steady.as_state();
    let e0 = norms::energy(&base, potential)?;
    let betas = vec![beta_scale, beta_scale / 2.0, beta_scale / 4.0];
    let mut remainders = Vec::new();
    let mut direct = Vec::new();
    for &beta in &betas {
        let lam = if l6 > 0.0 { perturbation.scaled(beta / l6) } else { perturbation.clone() };
        let e = norms::energy(&base.add(&lam)?, potential)?;
        let quad = 0.5 * op.quadratic_form(&lam.position)? + 0.5 * norms::inner(&lam.velocity, &lam.velocity)?;
        remainders.push(e - e0 - quad);
        let grid = *potential.grid();
        let dens: Vec<f64> = steady
            .profile
            .values()
            .iter()
            .zip(lam.position.values())
            .map(|(&p, &x)| ((p + x).powi(6) - p.powi(6)) / 6.0 - p.powi(5) * x - 2.5 * p.powi(4) * x * x)
            .collect();
        direct.push(norms::inner(&Field::new(grid, dens)?, &Field::from_fn(grid, |_| 1.0)?)?);
    }
    let scaled = remainders.iter().zip(&betas).map(|(d, b)| d / b.powi(3)).collect();
    let ratios = remainders.windows(2).map(|w| w[0] / w[1]).collect();
    let quadratic_mode = (0..spectrum.count()).map(|i| op.quadratic_form(&spectrum.modes[i]).map(|q| 0.5 * q)).collect::<Result<_>>()?;

    let s = 1e-3;
    let cross_terms = (0..spectrum.count())
        .map(|i| -> Result<(f64, f64)> {
            let k = spectrum.rate(i);
            let energy_at = |mp: f64, mm: f64| -> Result<f64> {
                let w = spectrum.mode_state(i, 1.0).scaled(mp * s).add(&spectrum.mode_state(i, -1.0).scaled(mm * s))?;
                norms::energy(&base.add(&w)?, potential)
            };
            let c = (energy_at(1.0, 1.0)? - energy_at(1.0, -1.0)? - energy_at(-1.0, 1.0)? + energy_at(-1.0, -1.0)?) / (4.0 * s * s);
            Ok((c, -2.0 * k * k))
        })
        .collect::<Result<_>>()?;
    Ok(ExpansionReport { betas, remainders, scaled, ratios, direct, quadratic_mode, cross_terms })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnePassConfig {
    /// Exit threshold `ε₁` on `||u - U||_{H¹×L²}`.
    pub exit_threshold: f64,
    pub dominance: f64,
    /// Run length past the apex.
    pub after_apex: f64,
    /// Longest run allowed while waiting for the exit.
    pub exit_horizon: f64,
    /// Relative drift of the exterior series over its last quarter below which it counts as stable.
    pub stability_tol: f64,
    pub r_core: f64,
    pub scatter: ScatterCriteria,
    pub cfl: f64,
    pub record_every: usize,
}

impl Default for OnePassConfig {
    fn default() -> Self {
        Self {
            exit_threshold: 1e-2,
            dominance: 20.0,
            after_apex: 40.0,
            exit_horizon: 20.0,
            stability_tol: 0.05,
            r_core: 5.0,
            scatter: ScatterCriteria { threshold: 1e-2, ..ScatterCriteria::default() },
            cfl: 0.5,
            record_every: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum OnePassOutcome {
    NoExit,
    NoReturn,
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnePassRun {
    pub delta: f64,
    pub exit_time: Option<f64>,
    /// Slope of `log ||u - U||` over the last `4/k_1` before the exit.
    pub departure_rate: Option<f64>,
    pub apex: Option<f64>,
    pub exterior: Option<ExteriorSeries>,
    pub surplus: Option<f64>,
    pub late_drift: Option<f64>,
    pub scatter: Option<ScatterVerdict>,
    pub outcome: OnePassOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnePassReport {
    /// `ℰ(U) - ℰ(φ, 0)`, the energy of the base radiation.
    pub base_radiation: f64,
    pub runs: Vec<OnePassRun>,
    /// `max / min - 1` of the surpluses.
    pub surplus_spread: Option<f64>,
    /// Exit-time differences between consecutive offsets.
    pub exit_spacings: Vec<f64>,
}

/// Exit time, if any, and the `(t, ||u - U||)` history.
type ExitTrace = (Option<f64>, Vec<(f64, f64)>);

/// Evolve base and perturbed data in lockstep until `||u - U||` reaches `threshold`.
fn exit_time(
    base: &State,
    perturbed: &State,
    potential: &Potential,
    steady: &SteadyState,
    threshold: f64,
    horizon: f64,
    cfl: f64,
) -> Result<ExitTrace> {
    let grid = *potential.grid();
    let dt = cfl * grid.dr();
    let engine = Engine::new(potential, &steady.profile, FlowKind::Nonlinear, 0.0, 0.0)?;
    let reduced = |s: &State| -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((s.position.sub(&steady.profile)?.reduced(), s.velocity.reduced()))
    };
    let (bh, bw) = reduced(base)?;
    let (ph, pw) = reduced(perturbed)?;
    let mut sb = Stepper::new(engine.clone(), bh, &bw, 0.0, dt);
    let mut sp = Stepper::new(engine, ph, &pw, 0.0, dt);
    let diff0: Vec<f64> = pw.iter().zip(&bw).map(|(a, b)| a - b).collect();
    let mut older: Option<Vec<f64>> = None;
    let mut history = Vec::new();
    let steps = (horizon / dt).ceil() as usize;
    for m in 0..=steps {
        let t = m as f64 * dt;
        let d: Vec<f64> = sp.previous().iter().zip(sb.previous()).map(|(a, b)| a - b).collect();
        let dn: Vec<f64> = sp.current().iter().zip(sb.current()).map(|(a, b)| a - b).collect();
        let vel: Vec<f64> = match &older {
            None => diff0.clone(),
            Some(o) => dn.iter().zip(o).map(|(a, b)| (a - b) / (2.0 * dt)).collect(),
        };
        let dist = reduced_energy_norm_sq(&grid, &d, &vel).sqrt();
        if !dist.is_finite() {
            return Err(Error::Numerical(format!("lockstep run overflowed at t = {t}")));
        }
        history.push((t, dist));
        if dist >= threshold {
            let exit = match history.len() {
                1 => t,
                n => {
                    let (t0, d0) = history[n - 2];
                    if d0 > 0.0 {
                        t0 + (t - t0) * (threshold / d0).ln() / (dist / d0).ln()
                    } else {
                        t
                    }
                }
            };
            return Ok((Some(exit), history));
        }
        older = Some(d);
        sb.step();
        sp.step();
    }
    Ok((None, history))
}

/// Perturb the on-manifold velocity `λ̇_1(T)` by each offset and measure the second emission.
#[allow(clippy::too_many_arguments)]
pub fn one_pass_experiment(
    steady: &SteadyState,
    potential: &Potential,
    spectrum: &Spectrum,
    steadies: &[SteadyState],
    cs: &CsData,
    base: &ShootResult,
    deltas: &[f64],
    cfg: &OnePassConfig,
) -> Result<OnePassReport> {
    if !base.converged {
        return arg("one-pass needs a converged on-manifold base");
    }
    if spectrum.is_empty() {
        return arg("one-pass needs an unstable mode");
    }
    let k1 = spectrum.rate(0);
    let base_state = cs.initial_state(spectrum, steady, &base.lambda_dots)?;
    let base_radiation = norms::energy(&base_state, potential)? - norms::energy(&steady.as_state(), potential)?;
    let runs: Vec<OnePassRun> = deltas
        .par_iter()
        .map(|&delta| -> Result<OnePassRun> {
            let mut dots = base.lambda_dots.clone();
            dots[0] += delta;
            let init = cs.initial_state(spectrum, steady, &dots)?;
            let (exit, history) = exit_time(&base_state, &init, potential, steady, cfg.exit_threshold, cfg.exit_horizon, cfg.cfl)?;
            let mut run = OnePassRun {
                delta,
                exit_time: exit,
                departure_rate: None,
                apex: None,
                exterior: None,
                surplus: None,
                late_drift: None,
                scatter: None,
                outcome: OnePassOutcome::NoExit,
            };
            let Some(t2) = exit else { return Ok(run) };
            let (ts, ds): (Vec<f64>, Vec<f64>) = history.iter().filter(|(t, _)| *t >= t2 - 4.0 / k1).copied().unzip();
            run.departure_rate = fit_log_slope(&ts, &ds);
            let apex = t2 + cfg.dominance.ln() / k1;
            run.apex = Some(apex);
            let t_end = apex + cfg.after_apex;
            let ecfg = EvolveConfig { cfl: cfg.cfl, t_end, flow: FlowKind::Nonlinear, record_every: cfg.record_every, ..EvolveConfig::default() };
            let traj = evolve(&init, potential, Some(steady), Some(spectrum), &ecfg)?;
            if let RunStatus::BlowupFlagged { t } = traj.status {
                run.outcome = OnePassOutcome::Inconclusive { reason: format!("blowup flagged at t = {t:.3}") };
                return Ok(run);
            }
            let series = exterior_energy(&traj, 0.0, apex, ExteriorKind::Radiation)?;
            let late_from = apex + 0.5 * cfg.after_apex;
            let quarter_from = apex + 0.75 * cfg.after_apex;
            let drift = {
                let tail: Vec<f64> = series.times.iter().zip(&series.values).filter(|(t, _)| **t >= quarter_from).map(|(_, v)| *v).collect();
                let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
                (hi - lo) / hi.abs().max(f64::MIN_POSITIVE)
            };
            run.late_drift = Some(drift);
            if let Some((_, inf)) = series.infimum(late_from) {
                if drift < cfg.stability_tol {
                    run.surplus = Some(inf - base_radiation);
                }
            }
            run.exterior = Some(series);
            let scatter = scatter_diagnose(&traj, steadies, potential, cfg.r_core, &cfg.scatter)?;
            let elsewhere = match &scatter.verdict {
                ScatterVerdict::ScatterTo { index, .. } => !same_state(&steadies[*index], steady),
                ScatterVerdict::Departed => true,
                ScatterVerdict::Undecided => false,
            };
            run.outcome = match (run.surplus, elsewhere) {
                (Some(s), true) if s > 0.0 => OnePassOutcome::NoReturn,
                (Some(s), _) if s <= 0.0 => OnePassOutcome::Inconclusive { reason: format!("non-positive surplus {s:.3e}") },
                (Some(_), _) => OnePassOutcome::Inconclusive { reason: format!("scatter verdict {:?}", scatter.verdict) },
                (None, _) => OnePassOutcome::Inconclusive { reason: format!("exterior series not stable (drift {drift:.3})") },
            };
            run.scatter = Some(scatter.verdict);
            Ok(run)
        })
        .collect::<Result<_>>()?;
    let surpluses: Vec<f64> = runs.iter().filter_map(|r| r.surplus).collect();
    let surplus_spread = (surpluses.len() >= 2 && surpluses.iter().all(|s| *s > 0.0)).then(|| {
        let hi = surpluses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = surpluses.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo - 1.0
    });
    let exit_spacings = runs.windows(2).filter_map(|w| Some(w[1].exit_time? - w[0].exit_time?)).collect();
    Ok(OnePassReport { base_radiation, runs, surplus_spread, exit_spacings })
}

fn same_state(a: &SteadyState, b: &SteadyState) -> bool {
    a.nodes == b.nodes && (a.center() - b.center()).abs() <= 1e-6 * b.center().abs().max(1.0)
}

fn fit_log_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, b)| (*a, b.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x, b + x * y));
    let den = m * sxx - sx * sx;
    (den > 0.0).then(|| (m * sxy - sx * sy) / den)
}
