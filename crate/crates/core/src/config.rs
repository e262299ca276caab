//! Experiment configuration files (TOML, one table per section).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialFamily;
use crate::steady::SteadySearch;

/// Pipeline stages, named as the CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    SteadyFind,
    Spectrum,
    Evolve,
    ManifoldShoot,
    Chart,
    Growth,
    ChannelScan,
    ExpansionCheck,
    Onepass,
    Norms,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::SteadyFind,
        Stage::Spectrum,
        Stage::Evolve,
        Stage::ManifoldShoot,
        Stage::Chart,
        Stage::Growth,
        Stage::ChannelScan,
        Stage::ExpansionCheck,
        Stage::Onepass,
        Stage::Norms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::SteadyFind => "steady-find",
            Stage::Spectrum => "spectrum",
            Stage::Evolve => "evolve",
            Stage::ManifoldShoot => "manifold-shoot",
            Stage::Chart => "chart",
            Stage::Growth => "growth",
            Stage::ChannelScan => "channel-scan",
            Stage::ExpansionCheck => "expansion-check",
            Stage::Onepass => "onepass",
            Stage::Norms => "norms",
        }
    }

    pub fn parse(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Direct prerequisites.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::SteadyFind => &[],
            Stage::Spectrum | Stage::Evolve => &[Stage::SteadyFind],
            _ => &[Stage::Spectrum],
        }
    }

    /// Whether the stage needs an unstable, hyperbolic steady state.
    pub fn needs_unstable(self) -> bool {
        !matches!(self, Stage::SteadyFind | Stage::Spectrum | Stage::Evolve | Stage::Norms)
    }
}

/// `stages` plus everything they depend on, in pipeline order.
pub fn with_prerequisites(stages: &[Stage]) -> Vec<Stage> {
    let mut set = std::collections::BTreeSet::new();
    let mut stack: Vec<Stage> = stages.to_vec();
    while let Some(s) = stack.pop() {
        if set.insert(s) {
            stack.extend_from_slice(s.requires());
        }
    }
    set.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n: usize,
    pub r_max: f64,
    /// Size `r_max` from the longest configured run.
    pub auto_size: bool,
    /// Distance kept between the furthest cone and the outer node.
    pub support_margin: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n: 4096, r_max: 80.0, auto_size: false, support_margin: 20.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadySpec {
    #[serde(flatten)]
    pub search: SteadySearch,
    /// Node count of the state to study; `None` takes the lowest-energy unstable state with positive center.
    pub select_nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSpec {
    /// `dt / dr`.
    pub cfl: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// Perturbation `amplitude · bump(center, width)` added to the selected state at rest.
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub exterior_radii: Vec<f64>,
}

impl Default for EvolveSpec {
    fn default() -> Self {
        Self { cfl: 0.5, t_end: 20.0, record_every: 64, amplitude: 0.3, center: 3.0, width: 3.0, exterior_radii: vec![10.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldSpec {
    /// Stand-in for the data budget `ε₀`.
    pub budget: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub t_cut: Option<f64>,
    /// Dominance factor `K`.
    pub dominance: f64,
    /// Stand-in for the exit threshold `ε₁`.
    pub exit_threshold: f64,
    /// Offsets of `λ̇_1(T)` for the one-pass runs.
    pub deltas: Vec<f64>,
    /// `λ_1(T)` values of the shooting sweep.
    pub sweep: Vec<f64>,
    /// Remainder amplitude (unit-norm projected bump) used with the sweep.
    pub remainder_amplitude: f64,
    pub oracle: bool,
    pub contraction_radius: bool,
    pub chart_lambdas: Vec<f64>,
    pub chart_amplitudes: Vec<f64>,
    pub growth_epsilon: f64,
    /// Remainder size relative to the mode in the growth data.
    pub growth_remainder: f64,
    /// Defaults to the largest `T` with `e^{3kT}||h0|| ≤ 0.1`.
    pub growth_horizon: Option<f64>,
    /// `λ_1(T)` of the on-manifold base used by the one-pass runs.
    pub base_lambda: f64,
}

impl Default for ManifoldSpec {
    fn default() -> Self {
        Self {
            budget: 1e-2,
            tol: 1e-10,
            max_iter: 40,
            t_cut: None,
            dominance: 20.0,
            exit_threshold: 1e-2,
            deltas: vec![1e-5, 1e-6, 1e-7],
            sweep: (0..10).map(|i| -5e-4 + 1e-4 * i as f64 + 5e-5).collect(),
            remainder_amplitude: 0.0,
            oracle: true,
            contraction_radius: true,
            chart_lambdas: vec![-3e-4, -2e-4, -1e-4, -1e-5, 1e-5, 1e-4, 2e-4, 3e-4],
            chart_amplitudes: vec![0.0, 2e-4],
            growth_epsilon: 1e-5,
            growth_remainder: 0.25,
            growth_horizon: None,
            base_lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSpec {
    pub offsets: Vec<f64>,
    pub t_window: f64,
    pub tail_start: f64,
    pub stability_tol: f64,
    /// Amplitudes of the nonlinear-channel data `a (ρ_1, k_1 ρ_1)`.
    pub nonlinear_amplitudes: Vec<f64>,
    /// Nonlinear perturbation budget `ε_*`.
    pub nonlinear_budget: f64,
    pub expansion_beta: f64,
    /// One-pass: longest wait for the exit, and run length past the apex.
    pub exit_horizon: f64,
    pub after_apex: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            offsets: vec![0.0, 1.0, 2.0, 5.0],
            t_window: 10.0,
            tail_start: 8.0,
            stability_tol: 0.05,
            nonlinear_amplitudes: vec![1e-4, 1e-2],
            nonlinear_budget: 0.2,
            expansion_beta: 0.1,
            exit_horizon: 20.0,
            after_apex: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsSpec {
    pub cells: Vec<usize>,
    pub tol: f64,
    pub draws: usize,
    pub t_window: f64,
    /// Also run the ensemble on a grid with twice as many cells.
    pub refine: bool,
}

impl Default for NormsSpec {
    fn default() -> Self {
        Self { cells: vec![2000, 8000, 32000], tol: 1e-3, draws: 50, t_window: 10.0, refine: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// Output directory, relative to the output root.
    pub output: PathBuf,
    pub stages: Vec<Stage>,
    pub potential: PotentialFamily,
    pub grid: GridSpec,
    pub steady: SteadySpec,
    pub evolve: EvolveSpec,
    pub manifold: ManifoldSpec,
    pub channel: ChannelSpec,
    pub norms: NormsSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 7,
            threads: 0,
            output: PathBuf::from("critwave-out"),
            stages: Stage::ALL.to_vec(),
            potential: PotentialFamily::Algebraic { v0: 20.0, s: 2.0 },
            grid: GridSpec::default(),
            steady: SteadySpec::default(),
            evolve: EvolveSpec::default(),
            manifold: ManifoldSpec::default(),
            channel: ChannelSpec::default(),
            norms: NormsSpec::default(),
        }
    }
}

struct Issues(Vec<String>);

impl Issues {
    fn positive(&mut self, field: &str, x: f64) {
        if !(x > 0.0 && x.is_finite()) {
            self.0.push(format!("{field}: must be positive and finite, got {x}"));
        }
    }

    fn non_negative(&mut self, field: &str, x: f64) {
        if !(x >= 0.0 && x.is_finite()) {
            self.0.push(format!("{field}: must be non-negative and finite, got {x}"));
        }
    }

    fn check(&mut self, field: &str, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.0.push(format!("{field}: {}", msg.into()));
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Check every field and report all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut is = Issues(Vec::new());
        is.check("seed", i64::try_from(self.seed).is_ok(), "must fit in a signed 64-bit integer");
        if let Err(e) = self.potential.validate() {
            is.0.push(format!("potential: {e}"));
        }
        is.check("grid.n", self.grid.n >= 4, format!("needs at least 4 cells, got {}", self.grid.n));
        is.positive("grid.r_max", self.grid.r_max);
        is.non_negative("grid.support_margin", self.grid.support_margin);
        if let Err(e) = self.steady.search.validate() {
            is.0.push(format!("steady: {e}"));
        }
        is.check("evolve.cfl", self.evolve.cfl > 0.0 && self.evolve.cfl <= 0.9, format!("must lie in (0, 0.9], got {}", self.evolve.cfl));
        is.non_negative("evolve.t_end", self.evolve.t_end);
        is.positive("evolve.width", self.evolve.width);
        is.non_negative("evolve.center", self.evolve.center);
        let m = &self.manifold;
        is.positive("manifold.budget", m.budget);
        is.positive("manifold.tol", m.tol);
        is.check("manifold.max_iter", m.max_iter > 0, "must be positive");
        if let Some(t) = m.t_cut {
            is.positive("manifold.t_cut", t);
        }
        is.check("manifold.dominance", m.dominance > 1.0, format!("must exceed 1, got {}", m.dominance));
        is.positive("manifold.exit_threshold", m.exit_threshold);
        is.check("manifold.deltas", m.deltas.iter().all(|d| d.is_finite() && *d != 0.0), "offsets must be finite and nonzero");
        is.check("manifold.sweep", m.sweep.iter().all(|x| x.abs() <= m.budget), "sweep values must lie within the budget");
        is.non_negative("manifold.remainder_amplitude", m.remainder_amplitude);
        is.check("manifold.chart_lambdas", m.chart_lambdas.iter().any(|x| *x > 0.0) && m.chart_lambdas.iter().any(|x| *x < 0.0), "needs samples on both sides of zero");
        is.check("manifold.chart_amplitudes", m.chart_amplitudes.contains(&0.0), "must include 0");
        is.positive("manifold.growth_epsilon", m.growth_epsilon);
        is.non_negative("manifold.growth_remainder", m.growth_remainder);
        if let Some(t) = m.growth_horizon {
            is.positive("manifold.growth_horizon", t);
        }
        let c = &self.channel;
        is.check("channel.offsets", !c.offsets.is_empty() && c.offsets.iter().all(|r| *r >= 0.0 && r.is_finite()), "needs non-negative offsets");
        is.positive("channel.t_window", c.t_window);
        is.non_negative("channel.tail_start", c.tail_start);
        is.positive("channel.stability_tol", c.stability_tol);
        is.check("channel.nonlinear_amplitudes", c.nonlinear_amplitudes.iter().all(|a| *a > 0.0), "amplitudes must be positive");
        is.positive("channel.nonlinear_budget", c.nonlinear_budget);
        is.positive("channel.expansion_beta", c.expansion_beta);
        is.positive("channel.exit_horizon", c.exit_horizon);
        is.positive("channel.after_apex", c.after_apex);
        is.check("norms.cells", !self.norms.cells.is_empty() && self.norms.cells.iter().all(|n| *n >= 4), "needs grids with at least 4 cells");
        is.positive("norms.tol", self.norms.tol);
        is.check("norms.draws", self.norms.draws > 0, "must be positive");
        is.positive("norms.t_window", self.norms.t_window);
        if is.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(is.0))
        }
    }

    /// Longest evolution any configured stage performs.
    pub fn longest_run(&self) -> f64 {
        let stages = with_prerequisites(&self.stages);
        let has = |s: Stage| stages.contains(&s);
        let mut t: f64 = 0.0;
        if has(Stage::Evolve) {
            t = t.max(self.evolve.t_end);
        }
        if has(Stage::ManifoldShoot) || has(Stage::Chart) || has(Stage::Onepass) {
            t = t.max(self.manifold.t_cut.unwrap_or(20.0));
        }
        if has(Stage::ChannelScan) {
            t = t.max(2.0 * self.channel.t_window);
        }
        if has(Stage::Onepass) {
            t = t.max(self.channel.exit_horizon + self.manifold.dominance.ln() + self.channel.after_apex);
        }
        if has(Stage::Norms) {
            t = t.max(self.norms.t_window);
        }
        t
    }

    /// Outer radius actually used: fixed, or sized so every cone stays on the grid.
    pub fn effective_r_max(&self) -> f64 {
        if self.grid.auto_size {
            self.grid.r_max.max(self.longest_run() + self.grid.support_margin)
        } else {
            self.grid.r_max
        }
    }
}
