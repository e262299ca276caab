//! Experiment orchestration: stage execution, artifacts and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelConfig, NonlinearChannelConfig, OnePassConfig, OnePassOutcome, Verdict};
use crate::config::{with_prerequisites, ExperimentConfig, Stage};
use crate::diagnostics::{self, EnsembleConfig};
use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolveConfig, FlowKind, ScatterCriteria};
use crate::grid::{RadialGrid, SpaceTimeField, State};
use crate::io;
use crate::manifold::{self, CsData, OracleConfig, ShootConfig, ShootResult};
use crate::norms;
use crate::potential::Potential;
use crate::spectral::{self, Spectrum};
use crate::steady::{self, SteadyState};

/// Environment variable naming the directory under which run outputs are placed.
pub const OUTPUT_ROOT_VAR: &str = "CRITWAVE_OUT";

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    Skipped { reason: String },
    Failed { cause: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    #[serde(flatten)]
    pub status: StageStatus,
    pub seconds: f64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub verdict: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub r_max: f64,
    pub stages: Vec<StageRecord>,
    /// One-line verdict per stage that produced one.
    pub verdicts: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub success: bool,
}

impl RunManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn failed_stage(&self) -> Option<&StageRecord> {
        self.stages.iter().find(|s| matches!(s.status, StageStatus::Failed { .. }))
    }
}

/// Output directory of a configuration under `root`.
pub fn output_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    root.join(&cfg.output)
}

/// Output root from the environment, defaulting to the working directory.
pub fn output_root_from_env() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Run the stages listed in the configuration.
pub fn run(cfg: &ExperimentConfig, root: &Path) -> Result<RunManifest> {
    run_stages(cfg, &cfg.stages, root)
}

/// Run `stages` and their prerequisites, writing artifacts and finally the manifest.
pub fn run_stages(cfg: &ExperimentConfig, stages: &[Stage], root: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    pool.install(|| execute(cfg, stages, root))
}

fn execute(cfg: &ExperimentConfig, stages: &[Stage], root: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let dir = output_dir(cfg, root);
    std::fs::create_dir_all(&dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path)?;
    }
    let r_max = cfg.effective_r_max();
    let grid = RadialGrid::new(r_max, cfg.grid.n)?;
    let potential = Potential::from_family(cfg.potential, grid)?;
    let mut ctx = Context { cfg, dir: dir.clone(), grid, potential, steadies: None, selected: None, spectrum: None, base: None, notes: Vec::new() };

    let mut records = Vec::new();
    let mut halt: Option<String> = None;
    for stage in with_prerequisites(stages) {
        let name = stage.name().to_string();
        if let Some(reason) = &halt {
            records.push(StageRecord { name, status: StageStatus::Skipped { reason: reason.clone() }, seconds: 0.0, artifacts: Vec::new(), verdict: None });
            continue;
        }
        if stage.needs_unstable() && stage != Stage::Spectrum && ctx.spectrum.as_ref().is_some_and(|s| s.is_empty()) {
            records.push(StageRecord {
                name,
                status: StageStatus::Skipped { reason: "no unstable states".into() },
                seconds: 0.0,
                artifacts: Vec::new(),
                verdict: None,
            });
            continue;
        }
        let t0 = Instant::now();
        let outcome = ctx.run_stage(stage);
        let seconds = t0.elapsed().as_secs_f64();
        let record = match outcome {
            Ok(out) => StageRecord { name, status: StageStatus::Completed, seconds, artifacts: out.artifacts, verdict: Some(out.verdict) },
            Err(e) => {
                halt = Some(match e {
                    Error::Hyperbolicity(_) => "hyperbolicity check failed".to_string(),
                    _ => format!("stage `{name}` failed"),
                });
                StageRecord { name, status: StageStatus::Failed { cause: e.to_string() }, seconds, artifacts: Vec::new(), verdict: None }
            }
        };
        records.push(record);
    }
    let verdicts = records.iter().filter_map(|r| r.verdict.clone().map(|v| (r.name.clone(), v))).collect();
    let success = !records.iter().any(|r| matches!(r.status, StageStatus::Failed { .. }));
    let manifest = RunManifest {
        config: cfg.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        r_max,
        stages: records,
        verdicts,
        notes: ctx.notes,
        success,
    };
    io::write_atomic(&manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

struct StageOutput {
    artifacts: Vec<String>,
    verdict: String,
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct StateSummary {
    label: String,
    center: f64,
    nodes: usize,
    energy: f64,
    tail_coeff: f64,
    residual: f64,
    converged: bool,
    profile: String,
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    state: String,
    unstable_counts: Vec<(String, usize)>,
    eigenvalues: &'a [f64],
    rates: Vec<f64>,
    tail_fits: Vec<spectral::MeshkovFit>,
    gram_defect: f64,
    hyperbolicity: Option<spectral::HyperbolicityReport>,
    modes: Vec<String>,
}

#[derive(Serialize)]
struct SweepPoint {
    lambda: f64,
    shoot: ShootResult,
    oracle: Option<f64>,
    oracle_error: Option<String>,
    difference: Option<f64>,
}

#[derive(Serialize)]
struct ShootSummary {
    remainder_amplitude: f64,
    points: Vec<SweepPoint>,
    /// `(last converged, first failed)` scale along the unit data direction.
    contraction_radius: Option<(f64, f64)>,
    base: ShootResult,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    grid: RadialGrid,
    potential: Potential,
    steadies: Option<Vec<SteadyState>>,
    selected: Option<SteadyState>,
    spectrum: Option<Spectrum>,
    base: Option<ShootResult>,
    notes: Vec<String>,
}

impl Context<'_> {
    fn write_json<T: Serialize>(&self, name: &str, value: &T, artifacts: &mut Vec<String>) -> Result<()> {
        io::write_atomic(&self.dir.join(name), &serde_json::to_vec_pretty(value)?)?;
        artifacts.push(name.to_string());
        Ok(())
    }

    fn write_bytes(&self, name: &str, bytes: &[u8], artifacts: &mut Vec<String>) -> Result<()> {
        if let Some(parent) = self.dir.join(name).parent() {
            std::fs::create_dir_all(parent)?;
        }
        io::write_atomic(&self.dir.join(name), bytes)?;
        artifacts.push(name.to_string());
        Ok(())
    }

    fn run_stage(&mut self, stage: Stage) -> Result<StageOutput> {
        match stage {
            Stage::SteadyFind => self.steady_find(),
            Stage::Spectrum => self.spectrum_stage(),
            Stage::Evolve => self.evolve_stage(),
            Stage::ManifoldShoot => self.manifold_stage(),
            Stage::Chart => self.chart_stage(),
            Stage::Growth => self.growth_stage(),
            Stage::ChannelScan => self.channel_stage(),
            Stage::ExpansionCheck => self.expansion_stage(),
            Stage::Onepass => self.onepass_stage(),
            Stage::Norms => self.norms_stage(),
        }
    }

    fn steadies(&self) -> Result<&[SteadyState]> {
        self.steadies.as_deref().ok_or_else(|| Error::Argument("steady states not computed".into()))
    }

    /// Selected unstable state and its spectrum.
    fn unstable(&self) -> Result<(&SteadyState, &Spectrum)> {
        match (&self.selected, &self.spectrum) {
            (Some(s), Some(sp)) if !sp.is_empty() => Ok((s, sp)),
            _ => Err(Error::Argument("no unstable steady state selected".into())),
        }
    }

    /// Selected state, or the lowest-energy converged state when none is unstable.
    fn reference_state(&self) -> Result<SteadyState> {
        if let Some(s) = &self.selected {
            return Ok(s.clone());
        }
        Ok(self
            .steadies()?
            .iter()
            .find(|s| s.converged && s.center() >= 0.0)
            .cloned()
            .unwrap_or_else(|| SteadyState::zero(self.grid)))
    }

    fn shoot_config(&self) -> ShootConfig {
        let m = &self.cfg.manifold;
        ShootConfig { tol: m.tol, max_iter: m.max_iter, t_cut: m.t_cut, cfl: self.cfg.evolve.cfl, ..ShootConfig::default() }
    }

    /// Projected bump, normalized to unit energy norm.
    fn unit_remainder(&self, spectrum: &Spectrum) -> Result<State> {
        let bump = manifold::smooth_bump(self.grid, self.cfg.evolve.center, self.cfg.evolve.width)?;
        let rem = spectral::project(spectrum, &State::at_rest(bump))?.remainder;
        let size = norms::energy_norm_full(&rem);
        if size == 0.0 {
            return Err(Error::Numerical("bump lies in the unstable subspace".into()));
        }
        Ok(rem.scaled(1.0 / size))
    }

    fn steady_find(&mut self) -> Result<StageOutput> {
        let states = steady::find_steady_states(&self.potential, &self.cfg.steady.search)?;
        let mut artifacts = Vec::new();
        let mut summary = Vec::new();
        for s in &states {
            let label = s.label();
            let file = format!("steady/{}.csv", label.replace('-', "neg_"));
            self.write_bytes(&file, &io::field_to_csv(&s.profile)?, &mut artifacts)?;
            summary.push(StateSummary {
                label,
                center: s.center(),
                nodes: s.nodes,
                energy: s.energy,
                tail_coeff: s.tail_coeff,
                residual: s.residual,
                converged: s.converged,
                profile: file,
            });
        }
        self.write_json("steady_states.json", &summary, &mut artifacts)?;
        let worst = states.iter().filter(|s| s.converged).map(|s| s.residual).fold(0.0, f64::max);
        let verdict = format!("{} states ({}), max residual {:.2e}", states.len(), states.iter().map(|s| s.label()).collect::<Vec<_>>().join(", "), worst);
        self.steadies = Some(states);
        Ok(StageOutput { artifacts, verdict })
    }

    fn spectrum_stage(&mut self) -> Result<StageOutput> {
        let states = self.steadies()?.to_vec();
        let candidates: Vec<&SteadyState> = states.iter().filter(|s| s.converged && s.center() > 0.0).collect();
        let mut counts = Vec::new();
        let mut chosen: Option<(SteadyState, Spectrum)> = None;
        for s in &candidates {
            let op = spectral::linearize(&self.potential, s)?;
            let sp = spectral::negative_spectrum(&op)?;
            counts.push((s.label(), sp.count()));
            let wanted = match self.cfg.steady.select_nodes {
                Some(n) => s.nodes == n,
                None => !sp.is_empty(),
            };
            if wanted && chosen.is_none() {
                chosen = Some(((*s).clone(), sp));
            }
        }
        let mut artifacts = Vec::new();
        let Some((state, sp)) = chosen else {
            if let Some(n) = self.cfg.steady.select_nodes {
                return Err(Error::Argument(format!("no converged state with {n} nodes")));
            }
            self.notes.push("no unstable states: manifold and channel stages skipped".into());
            self.spectrum = Some(Spectrum::empty());
            let summary = SpectrumSummary {
                state: String::new(),
                unstable_counts: counts,
                eigenvalues: &[],
                rates: Vec::new(),
                tail_fits: Vec::new(),
                gram_defect: 0.0,
                hyperbolicity: None,
                modes: Vec::new(),
            };
            self.write_json("spectrum.json", &summary, &mut artifacts)?;
            return Ok(StageOutput { artifacts, verdict: "no unstable states".into() });
        };
        let op = spectral::linearize(&self.potential, &state)?;
        let hyper = spectral::hyperbolicity_check(&op, &sp);
        let window = spectral::default_window(&self.grid);
        let tail_fits = (0..sp.count()).map(|i| spectral::meshkov_fit(&sp, i, window)).collect::<Result<Vec<_>>>()?;
        let gram = sp.gram();
        let gram_defect = gram
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, g)| (g - if i == j { 1.0 } else { 0.0 }).abs()))
            .fold(0.0, f64::max);
        let mut modes = Vec::new();
        for (i, m) in sp.modes.iter().enumerate() {
            let file = format!("modes/mode_{i}.csv");
            self.write_bytes(&file, &io::field_to_csv(m)?, &mut artifacts)?;
            modes.push(file);
        }
        let summary = SpectrumSummary {
            state: state.label(),
            unstable_counts: counts,
            eigenvalues: &sp.eigenvalues,
            rates: sp.rates(),
            tail_fits: tail_fits.clone(),
            gram_defect,
            hyperbolicity: Some(hyper.clone()),
            modes,
        };
        self.write_json("spectrum.json", &summary, &mut artifacts)?;
        if !hyper.pass {
            return Err(Error::Hyperbolicity(format!("{}: {}", state.label(), hyper.note)));
        }
        let worst_fit = tail_fits.iter().filter_map(|f| f.rate_error).fold(0.0, f64::max);
        let verdict = format!(
            "{} selected, {} unstable mode(s), k = [{}], tail-fit error {:.2e}, hyperbolic",
            state.label(),
            sp.count(),
            sp.rates().iter().map(|k| format!("{k:.6}")).collect::<Vec<_>>().join(", "),
            worst_fit
        );
        self.selected = Some(state);
        self.spectrum = Some(sp);
        Ok(StageOutput { artifacts, verdict })
    }

    fn evolve_stage(&mut self) -> Result<StageOutput> {
        let e = &self.cfg.evolve;
        let state = self.reference_state()?;
        let bump = manifold::smooth_bump(self.grid, e.center, e.width)?;
        let initial = State::at_rest(state.profile.axpy(e.amplitude, &bump)?);
        let spectrum = self.spectrum.clone().filter(|s| !s.is_empty());
        let ecfg = EvolveConfig {
            cfl: e.cfl,
            t_end: e.t_end,
            record_every: e.record_every,
            flow: FlowKind::Nonlinear,
            exterior_radii: e.exterior_radii.clone(),
            ..EvolveConfig::default()
        };
        let traj = evolve(&initial, &self.potential, Some(&state), spectrum.as_ref(), &ecfg)?;
        let modes = spectrum.as_ref().map_or(0, |s| s.count());
        let mut header = vec!["t".to_string(), "energy".into(), "distance".into()];
        header.extend((0..modes).map(|i| format!("lambda_{i}")));
        header.extend((0..modes).map(|i| format!("lambda_dot_{i}")));
        header.extend(e.exterior_radii.iter().map(|r| format!("exterior_{}", io::fmt(*r))));
        let rows: Vec<Vec<f64>> = traj
            .records
            .iter()
            .map(|r| {
                let mut row = vec![r.t, r.energy, r.distance];
                row.extend(&r.lambdas);
                row.extend(&r.lambda_dots);
                row.extend(&r.exterior);
                row
            })
            .collect();
        let mut artifacts = Vec::new();
        self.write_bytes("evolve/diagnostics.csv", &io::table_to_csv(&header, &rows)?, &mut artifacts)?;
        let (mut pos, mut vel) = (Vec::new(), Vec::new());
        for k in 0..traj.positions.len() {
            let s = traj.full_snapshot(k)?;
            pos.push(s.position);
            vel.push(s.velocity);
        }
        let times = traj.positions.times().to_vec();
        self.write_bytes("evolve/positions.bin", &io::snapshot_bytes(&SpaceTimeField::new(times.clone(), pos)?, traj.dt)?, &mut artifacts)?;
        self.write_bytes("evolve/velocities.bin", &io::snapshot_bytes(&SpaceTimeField::new(times, vel)?, traj.dt)?, &mut artifacts)?;
        let verdict = format!("{} + bump to t = {:.3}, status {:?}, energy drift {:.2e}", state.label(), traj.final_time(), traj.status, traj.energy_drift());
        Ok(StageOutput { artifacts, verdict })
    }

    fn base(&mut self) -> Result<ShootResult> {
        if let Some(b) = &self.base {
            return Ok(b.clone());
        }
        let (state, sp) = self.unstable()?;
        let mut lambdas = vec![0.0; sp.count()];
        lambdas[0] = self.cfg.manifold.base_lambda;
        let cs = CsData::new(sp, lambdas, State::zeros(self.grid))?;
        let b = manifold::lp_shoot(&cs, &self.potential, state, sp, &self.shoot_config())?;
        self.base = Some(b.clone());
        Ok(b)
    }

    fn manifold_stage(&mut self) -> Result<StageOutput> {
        let (state, sp) = self.unstable()?;
        let m = &self.cfg.manifold;
        let scfg = self.shoot_config();
        let remainder = self.unit_remainder(sp)?.scaled(m.remainder_amplitude);
        let ocfg = OracleConfig { cfl: self.cfg.evolve.cfl, ..OracleConfig::default() };
        let points: Vec<SweepPoint> = m
            .sweep
            .par_iter()
            .map(|&lambda| -> Result<SweepPoint> {
                let mut lambdas = vec![0.0; sp.count()];
                lambdas[0] = lambda;
                let cs = CsData::new(sp, lambdas, remainder.clone())?;
                let shoot = manifold::lp_shoot(&cs, &self.potential, state, sp, &scfg)?;
                let (oracle, oracle_error) = if m.oracle && sp.count() == 1 {
                    match manifold::bisection_oracle(&cs, &self.potential, state, sp, &ocfg) {
                        Ok(v) => (Some(v), None),
                        Err(e) => (None, Some(e.to_string())),
                    }
                } else {
                    (None, None)
                };
                let difference = oracle.map(|o| (o - shoot.lambda_dots[0]).abs());
                Ok(SweepPoint { lambda, shoot, oracle, oracle_error, difference })
            })
            .collect::<Result<_>>()?;
        let contraction_radius = if m.contraction_radius {
            let mut lambdas = vec![0.0; sp.count()];
            lambdas[0] = 0.5;
            let direction = CsData::new(sp, lambdas, self.unit_remainder(sp)?.scaled(0.5))?;
            Some(manifold::contraction_radius(&direction, &self.potential, state, sp, &scfg, 1e-4, 4)?)
        } else {
            None
        };
        let base = self.base()?;
        let converged = points.iter().filter(|p| p.shoot.converged).count();
        let worst = points.iter().filter_map(|p| p.difference).fold(None, |a: Option<f64>, d| Some(a.map_or(d, |w| w.max(d))));
        let header: Vec<String> = ["lambda", "lambda_dot", "residual", "converged", "oracle", "difference"].map(String::from).to_vec();
        let rows: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                vec![
                    p.lambda,
                    p.shoot.lambda_dots[0],
                    p.shoot.history.last().map_or(f64::NAN, |i| i.residual),
                    if p.shoot.converged { 1.0 } else { 0.0 },
                    p.oracle.unwrap_or(f64::NAN),
                    p.difference.unwrap_or(f64::NAN),
                ]
            })
            .collect();
        let mut artifacts = Vec::new();
        self.write_bytes("manifold/sweep.csv", &io::table_to_csv(&header, &rows)?, &mut artifacts)?;
        let summary = ShootSummary { remainder_amplitude: m.remainder_amplitude, points, contraction_radius, base };
        self.write_json("manifold/shoot.json", &summary, &mut artifacts)?;
        let ok = converged == summary.points.len() && worst.is_none_or(|w| w <= 1e-8);
        let mut verdict = format!("{} {converged}/{} converged", pass_fail(ok), summary.points.len());
        if let Some(w) = worst {
            verdict += &format!(", max oracle gap {w:.2e}");
        }
        if let Some((lo, hi)) = contraction_radius {
            verdict += &format!(", contraction radius in [{lo:.3e}, {hi:.3e}]");
        }
        Ok(StageOutput { artifacts, verdict })
    }

    fn chart_stage(&mut self) -> Result<StageOutput> {
        let (state, sp) = self.unstable()?;
        let m = &self.cfg.manifold;
        let scfg = self.shoot_config();
        let profile = self.unit_remainder(sp)?;
        let table = manifold::chart_sample(&m.chart_lambdas, &m.chart_amplitudes, &profile, &self.potential, state, sp, &scfg)?;
        let neg_l: Vec<f64> = m.chart_lambdas.iter().map(|x| -x).collect();
        let neg_a: Vec<f64> = m.chart_amplitudes.iter().map(|x| -x).collect();
        let mirror = manifold::chart_sample(&neg_l, &neg_a, &profile, &self.potential, &state.negated(), sp, &scfg)?;
        let mut oddness: f64 = 0.0;
        for (row, mrow) in table.values.iter().zip(&mirror.values) {
            for (v, w) in row.iter().zip(mrow) {
                if let (Some(v), Some(w)) = (v, w) {
                    oddness = oddness.max((v + w).abs() / v.abs().max(f64::MIN_POSITIVE));
                }
            }
        }
        let k = sp.rate(0);
        let gradient_gap = table.gradient_at_zero.map(|g| (g + k).abs());
        let mut header = vec!["amplitude".to_string()];
        header.extend(table.lambdas.iter().map(|l| format!("lambda_{}", io::fmt(*l))));
        let rows: Vec<Vec<f64>> =
            table.amplitudes.iter().zip(&table.values).map(|(a, row)| std::iter::once(*a).chain(row.iter().map(|v| v.unwrap_or(f64::NAN))).collect()).collect();
        let mut artifacts = Vec::new();
        self.write_bytes("chart/values.csv", &io::table_to_csv(&header, &rows)?, &mut artifacts)?;
        #[derive(Serialize)]
        struct ChartSummary<'a> {
            table: &'a manifold::ChartTable,
            mirror_oddness: f64,
            gradient_gap: Option<f64>,
        }
        self.write_json("chart/chart.json", &ChartSummary { table: &table, mirror_oddness: oddness, gradient_gap }, &mut artifacts)?;
        let ok = gradient_gap.is_some_and(|g| g <= 1e-4);
        let verdict = format!(
            "{} gradient at 0 {} vs -k {:.7}, mirror oddness {:.1e}",
            pass_fail(ok),
            table.gradient_at_zero.map_or("n/a".into(), |g| format!("{g:.7}")),
            -k,
            oddness
        );
        Ok(StageOutput { artifacts, verdict })
    }

    fn growth_stage(&mut self) -> Result<StageOutput> {
        let (state, sp) = self.unstable()?;
        let m = &self.cfg.manifold;
        let mode = sp.mode_state(0, 1.0);
        let unit_mode = mode.scaled(1.0 / norms::energy_norm_full(&mode));
        let h0 = unit_mode.scaled(m.growth_epsilon).add(&self.unit_remainder(sp)?.scaled(m.growth_epsilon * m.growth_remainder))?;
        let k1 = sp.rate(0);
        let size = norms::energy_norm_full(&h0);
        let horizon = m.growth_horizon.unwrap_or(0.999 * (0.1 / size).ln() / (3.0 * k1));
        let report = manifold::growth_experiment(&h0, &self.potential, state, sp, horizon, m.dominance, self.cfg.evolve.cfl)?;
        let mut header = vec!["t".to_string()];
        header.extend((0..sp.count()).flat_map(|i| [format!("mu_plus_{i}"), format!("mu_minus_{i}")]));
        let rows: Vec<Vec<f64>> = report
            .times
            .iter()
            .enumerate()
            .map(|(j, t)| std::iter::once(*t).chain((0..sp.count()).flat_map(|i| [report.mu_plus[i][j], report.mu_minus[i][j]])).collect())
            .collect();
        let mut artifacts = Vec::new();
        self.write_bytes("growth/modes.csv", &io::table_to_csv(&header, &rows)?, &mut artifacts)?;
        self.write_json("growth/growth.json", &report, &mut artifacts)?;
        let errors: Vec<Option<f64>> = report.fitted_rates.iter().enumerate().map(|(i, f)| f.map(|f| (f - sp.rate(i)).abs() / sp.rate(i))).collect();
        let worst = errors.iter().flatten().fold(0.0, |a: f64, b| a.max(*b));
        let ok = errors.iter().all(|e| e.is_some_and(|e| e <= 0.01)) && report.dominance_time.is_some() && report.remainder_bound_holds == Some(true);
        let verdict = format!(
            "{} rate error {:.2e}, dominance at {}, remainder bound {:?}",
            pass_fail(ok),
            worst,
            report.dominance_time.map_or("n/a".into(), |t| format!("{t:.4}")),
            report.remainder_bound_holds
        );
        Ok(StageOutput { artifacts, verdict })
    }

    fn channel_stage(&mut self) -> Result<StageOutput> {
        let (state, sp) = self.unstable()?;
        let c = &self.cfg.channel;
        let dominance = self.cfg.manifold.dominance;
        let n = sp.count();
        let lcfg = ChannelConfig {
            offsets: c.offsets.clone(),
            t_window: c.t_window,
            stability_tol: c.stability_tol,
            tail_start: c.tail_start,
            cfl: self.cfg.evolve.cfl,
            ..ChannelConfig::default()
        };
        let mut unit = vec![0.0; n];
        unit[0] = 1.0;
        let zero = vec![0.0; n];
        let none = State::zeros(self.grid);
        let pure = channel::channel_verify_linear(&self.potential, state, sp, &unit, &zero, &none, &lcfg)?;
        let small = 0.5 / dominance;
        let mut minus = vec![0.0; n];
        minus[0] = small;
        let rem = self.unit_remainder(sp)?.scaled(small);
        let dominant = channel::channel_verify_linear(&self.potential, state, sp, &unit, &minus, &rem, &lcfg)?;
        let backward = channel::channel_verify_linear(&self.potential, state, sp, &zero, &unit, &none, &ChannelConfig { backward: true, ..lcfg.clone() })?;
        let mode = sp.mode_state(0, 1.0);
        let unit_mode = mode.scaled(1.0 / norms::energy_norm_full(&mode));
        let ncfg = NonlinearChannelConfig {
            dominance,
            budget: c.nonlinear_budget,
            t_window: c.t_window,
            cfl: self.cfg.evolve.cfl,
            ..NonlinearChannelConfig::default()
        };
        let nonlinear = c
            .nonlinear_amplitudes
            .par_iter()
            .map(|a| channel::channel_verify_nonlinear(&unit_mode.scaled(*a), &self.potential, state, sp, &ncfg))
            .collect::<Result<Vec<_>>>()?;

        let mut artifacts = Vec::new();
        for (tag, reports) in [("pure", &pure), ("dominant", &dominant), ("backward", &backward)] {
            for r in reports.iter() {
                let rows: Vec<Vec<f64>> = r.series.times.iter().zip(&r.series.values).map(|(t, v)| vec![*t, *v]).collect();
                let file = format!("channel/{tag}_R{}.csv", io::fmt(r.offset));
                self.write_bytes(&file, &io::table_to_csv(&["t".into(), "exterior".into()], &rows)?, &mut artifacts)?;
            }
        }
        for r in &nonlinear {
            let rows: Vec<Vec<f64>> =
                r.nonlinear.times.iter().zip(&r.nonlinear.values).zip(&r.linear.values).map(|((t, a), b)| vec![*t, *a, *b]).collect();
            let file = format!("channel/nonlinear_{}.csv", io::fmt(r.data_norm));
            self.write_bytes(&file, &io::table_to_csv(&["t".into(), "nonlinear".into(), "linear".into()], &rows)?, &mut artifacts)?;
        }
        #[derive(Serialize)]
        struct ChannelSummary<'a> {
            pure: &'a [channel::ChannelReport],
            dominant: &'a [channel::ChannelReport],
            dominant_fractions: Vec<f64>,
            backward: &'a [channel::ChannelReport],
            nonlinear: &'a [channel::NonlinearChannelReport],
        }
        let fractions: Vec<f64> = dominant.iter().zip(&pure).map(|(d, p)| d.ratio / p.ratio).collect();
        self.write_json(
            "channel/channel.json",
            &ChannelSummary { pure: &pure, dominant: &dominant, dominant_fractions: fractions.clone(), backward: &backward, nonlinear: &nonlinear },
            &mut artifacts,
        )?;
        let closed_ok = pure.iter().filter(|r| r.offset > 0.0).all(|r| r.closed_form_error.is_some_and(|e| e <= 0.1));
        let stable_ok = pure.iter().all(|r| r.verdict == Verdict::Pass);
        let dominant_ok = dominant.iter().all(|r| r.verdict == Verdict::Pass) && fractions.iter().all(|f| *f >= 0.5);
        let nonlinear_ok = nonlinear.iter().all(|r| r.verdict == Verdict::Pass);
        let ok = closed_ok && stable_ok && dominant_ok && nonlinear_ok;
        let worst_cf = pure.iter().filter_map(|r| r.closed_form_error).fold(0.0, f64::max);
        let verdict = format!(
            "{} linear {}, closed form err {:.2e}, dominant {}, backward {}, nonlinear {}",
            pass_fail(ok),
            pass_fail(stable_ok),
            worst_cf,
            pass_fail(dominant_ok),
            pass_fail(backward.iter().all(|r| r.verdict == Verdict::Pass)),
            pass_fail(nonlinear_ok)
        );
        Ok(StageOutput { artifacts, verdict })
    }

    fn expansion_stage(&mut self) -> Result<StageOutput> {
        let (state, sp) = self.unstable()?;
        let bump = manifold::smooth_bump(self.grid, self.cfg.evolve.center, self.cfg.evolve.width)?;
        let report = channel::energy_expansion_check(state, &self.potential, sp, &State::at_rest(bump), self.cfg.channel.expansion_beta)?;
        let mut artifacts = Vec::new();
        self.write_json("expansion.json", &report, &mut artifacts)?;
        let ratios_ok = report.ratios.iter().all(|r| (6.4..=9.6).contains(r));
        let cross = report.cross_terms.iter().map(|(got, want)| (got - want).abs() / want.abs()).fold(0.0, f64::max);
        let ok = ratios_ok && cross <= 1e-3;
        let verdict = format!(
            "{} ratios [{}], cross-term error {:.2e}",
            pass_fail(ok),
            report.ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", "),
            cross
        );
        Ok(StageOutput { artifacts, verdict })
    }

    fn onepass_stage(&mut self) -> Result<StageOutput> {
        let base = self.base()?;
        let (state, sp) = self.unstable()?;
        let steadies = self.steadies()?;
        let mut lambdas = vec![0.0; sp.count()];
        lambdas[0] = self.cfg.manifold.base_lambda;
        let cs = CsData::new(sp, lambdas, State::zeros(self.grid))?;
        let c = &self.cfg.channel;
        let m = &self.cfg.manifold;
        let ocfg = OnePassConfig {
            exit_threshold: m.exit_threshold,
            dominance: m.dominance,
            after_apex: c.after_apex,
            exit_horizon: c.exit_horizon,
            stability_tol: c.stability_tol,
            scatter: ScatterCriteria { threshold: m.exit_threshold, ..ScatterCriteria::default() },
            cfl: self.cfg.evolve.cfl,
            ..OnePassConfig::default()
        };
        let report = channel::one_pass_experiment(state, &self.potential, sp, steadies, &cs, &base, &m.deltas, &ocfg)?;
        let mut artifacts = Vec::new();
        for r in &report.runs {
            if let Some(e) = &r.exterior {
                let rows: Vec<Vec<f64>> = e.times.iter().zip(&e.values).map(|(t, v)| vec![*t, *v]).collect();
                let file = format!("onepass/exterior_{}.csv", io::fmt(r.delta));
                self.write_bytes(&file, &io::table_to_csv(&["t".into(), "exterior".into()], &rows)?, &mut artifacts)?;
            }
        }
        self.write_json("onepass/onepass.json", &report, &mut artifacts)?;
        let k = sp.rate(0);
        let all_no_return = report.runs.iter().all(|r| r.outcome == OnePassOutcome::NoReturn);
        let spread_ok = report.surplus_spread.is_some_and(|s| s <= 0.25);
        let ok = all_no_return && spread_ok;
        let rates = report.runs.iter().filter_map(|r| r.departure_rate).map(|r| format!("{:.4}", r / k)).collect::<Vec<_>>().join(", ");
        let verdict = format!(
            "{} outcomes [{}], surplus spread {}, rate/k [{}]",
            pass_fail(ok),
            report.runs.iter().map(|r| format!("{:?}", r.outcome)).collect::<Vec<_>>().join(", "),
            report.surplus_spread.map_or("n/a".into(), |s| format!("{s:.2e}")),
            rates
        );
        Ok(StageOutput { artifacts, verdict })
    }

    fn norms_stage(&mut self) -> Result<StageOutput> {
        let nc = &self.cfg.norms;
        let lorentz = diagnostics::lorentz_refinement(&nc.cells, nc.tol)?;
        let lpp = diagnostics::lpp_consistency(nc.draws, self.cfg.seed)?;
        let ecfg = EnsembleConfig { draws: nc.draws, seed: self.cfg.seed, t_window: nc.t_window, cfl: self.cfg.evolve.cfl, ..EnsembleConfig::default() };
        let state = self.reference_state()?;
        let spectrum = self.spectrum.clone().unwrap_or_else(Spectrum::empty);
        let mut ensembles = vec![diagnostics::strichartz_ensemble(&self.potential, &state, &spectrum, &ecfg)?];
        if nc.refine {
            let (fine_state, fine_spectrum, fine_potential) = self.refined_reference(&state, spectrum.count())?;
            ensembles.push(diagnostics::strichartz_ensemble(&fine_potential, &fine_state, &fine_spectrum, &ecfg)?);
        }
        let mut artifacts = Vec::new();
        #[derive(Serialize)]
        struct NormsSummary<'a> {
            lorentz: &'a [diagnostics::RefinementCheck],
            lpp_max_gap: f64,
            ensembles: &'a [diagnostics::EnsembleReport],
        }
        self.write_json("norms.json", &NormsSummary { lorentz: &lorentz, lpp_max_gap: lpp, ensembles: &ensembles }, &mut artifacts)?;
        let lorentz_ok = lorentz.iter().all(|c| c.pass);
        let bounded = ensembles.iter().all(|e| e.max.is_finite());
        let no_growth = ensembles.windows(2).all(|w| w[1].max <= 1.1 * w[0].max);
        let ok = lorentz_ok && lpp <= 1e-10 && bounded && no_growth;
        let verdict = format!(
            "{} Lorentz {}, L^(p,p) gap {:.1e}, ensemble max ratio [{}]",
            pass_fail(ok),
            pass_fail(lorentz_ok),
            lpp,
            ensembles.iter().map(|e| format!("{}:{:.4}", e.cells, e.max)).collect::<Vec<_>>().join(", ")
        );
        Ok(StageOutput { artifacts, verdict })
    }

    /// The reference state and its spectrum recomputed on a grid with twice the cells.
    fn refined_reference(&self, state: &SteadyState, modes: usize) -> Result<(SteadyState, Spectrum, Potential)> {
        let fine = self.potential.resampled(self.grid.refined())?;
        if state.is_zero() {
            return Ok((SteadyState::zero(*fine.grid()), Spectrum::empty(), fine));
        }
        let found = steady::find_steady_states(&fine, &self.cfg.steady.search)?;
        let twin = found
            .into_iter()
            .find(|s| s.converged && s.nodes == state.nodes && s.center().signum() == state.center().signum())
            .ok_or_else(|| Error::Numerical(format!("{} not found on the refined grid", state.label())))?;
        let spectrum = if modes == 0 {
            Spectrum::empty()
        } else {
            spectral::negative_spectrum(&spectral::linearize(&fine, &twin)?)?
        };
        Ok((twin, spectrum, fine))
    }
}

struct StageInfo {
    summary: &'static str,
    fields: &'static [&'static str],
    anchors: &'static [&'static str],
}

fn stage_info(stage: Stage) -> StageInfo {
    match stage {
        Stage::SteadyFind => StageInfo {
            summary: "Scan the central value, bisect between shot classes and Newton-polish every radial steady state.",
            fields: &["potential", "grid.n", "grid.r_max", "steady.*"],
            anchors: &["existence of finitely many excited states", "steady-state elliptic equation"],
        },
        Stage::Spectrum => StageInfo {
            summary: "Negative spectrum of the linearized operator, tail fits of each mode and the hyperbolicity check.",
            fields: &["steady.select_nodes", "grid.*"],
            anchors: &["hyperbolicity assumption (no zero eigenvalue or resonance)", "exponential decay of eigenfunctions (Meshkov asymptotics)"],
        },
        Stage::Evolve => StageInfo {
            summary: "Nonlinear evolution of the selected state plus a bump; energy, mode and exterior diagnostics with snapshots.",
            fields: &["evolve.*"],
            anchors: &["energy conservation", "finite speed of propagation"],
        },
        Stage::ManifoldShoot => StageInfo {
            summary: "Solve the stability condition for the unstable velocities over a sweep, compare with the bisection oracle and bisect the contraction radius.",
            fields: &["manifold.tol", "manifold.max_iter", "manifold.t_cut", "manifold.sweep", "manifold.remainder_amplitude", "manifold.oracle", "manifold.contraction_radius"],
            anchors: &["stability condition selecting bounded forward solutions", "center-stable manifold as a graph over the stable data"],
        },
        Stage::Chart => StageInfo {
            summary: "Sample the manifold graph over a two-parameter slice; smoothness, gradient at zero and the sign symmetry.",
            fields: &["manifold.chart_lambdas", "manifold.chart_amplitudes"],
            anchors: &["Lipschitz graph of the center-stable manifold", "tangency to the center-stable subspace"],
        },
        Stage::Growth => StageInfo {
            summary: "Track the mode coefficients of small data, fit growth rates and locate the dominance time.",
            fields: &["manifold.growth_epsilon", "manifold.growth_remainder", "manifold.growth_horizon", "manifold.dominance"],
            anchors: &["growth lemma: an unstable mode becomes dominant"],
        },
        Stage::ChannelScan => StageInfo {
            summary: "Exterior energy of linear and nonlinear solutions dominated by a growing mode over several offsets.",
            fields: &["channel.offsets", "channel.t_window", "channel.tail_start", "channel.stability_tol", "channel.nonlinear_amplitudes", "channel.nonlinear_budget"],
            anchors: &["channel of energy for the linearized flow", "channel of energy for the nonlinear flow"],
        },
        Stage::ExpansionCheck => StageInfo {
            summary: "Cubic remainder of the energy around the steady state and the cross term between growing and decaying modes.",
            fields: &["channel.expansion_beta", "evolve.center", "evolve.width"],
            anchors: &["energy expansion around an excited state"],
        },
        Stage::Onepass => StageInfo {
            summary: "Perturb an on-manifold solution off the manifold and measure the extra exterior energy after it exits.",
            fields: &["manifold.deltas", "manifold.exit_threshold", "manifold.dominance", "manifold.base_lambda", "channel.exit_horizon", "channel.after_apex"],
            anchors: &["one-pass theorem: no return to the excited state after exit", "extra radiated energy on exit"],
        },
        Stage::Norms => StageInfo {
            summary: "Lorentz norms under refinement, L^(p,p) against L^p, and the reversed Strichartz ratio over a seeded ensemble.",
            fields: &["norms.*", "seed"],
            anchors: &["reversed Strichartz estimate for the linearized flow", "Lorentz space Hoelder and Young inequalities"],
        },
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        for j in 0..b.len() {
            let cur = row[j + 1];
            row[j + 1] = (prev + usize::from(ca != b[j])).min(row[j] + 1).min(cur + 1);
            prev = cur;
        }
    }
    row[b.len()]
}

/// Human-readable description of a stage or of the full pipeline (`run`).
pub fn describe(name: &str) -> Result<String> {
    let stages: Vec<Stage> = match name {
        "run" => Stage::ALL.to_vec(),
        _ => match Stage::parse(name) {
            Some(s) => vec![s],
            None => {
                let mut names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).chain(["run"]).collect();
                names.sort_by_key(|n| edit_distance(name, n));
                return Err(Error::Argument(format!(
                    "unknown experiment `{name}`; did you mean `{}`? available: {}",
                    names[0],
                    Stage::ALL.iter().map(|s| s.name()).chain(["run"]).collect::<Vec<_>>().join(", ")
                )));
            }
        },
    };
    let mut out = String::new();
    let order = with_prerequisites(&stages);
    out += &format!("{name}\n  stage graph: {}\n", order.iter().map(|s| s.name()).collect::<Vec<_>>().join(" -> "));
    for stage in stages {
        let info = stage_info(stage);
        out += &format!("\n[{}]\n  {}\n", stage.name(), info.summary);
        let req = stage.requires();
        if !req.is_empty() {
            out += &format!("  requires: {}\n", req.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "));
        }
        out += &format!("  config fields: {}\n", info.fields.join(", "));
        out += &format!("  verifies: {}\n", info.anchors.join("; "));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describe_lists_graph_and_anchors() {
        let text = describe("onepass").unwrap();
        assert!(text.contains("steady-find -> spectrum -> onepass"));
        assert!(text.contains("one-pass theorem"));
        assert!(describe("channel-scan").unwrap().contains("channel of energy"));
    }

    #[test]
    fn describe_unknown_suggests() {
        let err = describe("one-pass").unwrap_err().to_string();
        assert!(err.contains("did you mean `onepass`"));
    }

    #[test]
    fn edit_distance_basics() {
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
    }
}
