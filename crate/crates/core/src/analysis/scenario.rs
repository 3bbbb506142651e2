//! Single integrations of the tree dynamics from a chosen initial condition.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::equilibria::{full_node_equilibria, nearest_full_equilibrium};
use crate::dynamics::{assign_values, deadlock_state, project_m, stacked_rhs_into, TreeState};
use crate::error::{Error, Result};
use crate::numerics::{integrate, IntegratorConfig, Method, Stability, Trajectory, TrajectoryMeta};
use crate::tree::ParsedTree;

pub const DEFAULT_SIGMA: f64 = 4.0;
pub const DEFAULT_T_FINAL: f64 = 100.0;
pub const DEFAULT_OUTPUT_INTERVAL: f64 = 0.1;
pub const DEFAULT_PERTURBATION: f64 = 1e-2;
pub const DEFAULT_SEED: u64 = 1;
/// Slack of the simplex check applied to every accepted step.
pub const SIMPLEX_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Stacked `(m1, m2)` pairs in depth-first order of the internal nodes.
    Pairs { m: Vec<f64> },
    /// Deadlock state plus a seeded uniform perturbation.
    DeadlockPerturbed {
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default = "default_perturbation")]
        magnitude: f64,
    },
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_perturbation() -> f64 {
    DEFAULT_PERTURBATION
}

impl InitialCondition {
    pub fn deadlock_perturbed(seed: u64) -> Self {
        InitialCondition::DeadlockPerturbed { seed, magnitude: DEFAULT_PERTURBATION }
    }

    /// Resolves to a stacked state. Each deadlocked pair is moved by a
    /// common shift and a split, both drawn from `[-magnitude, magnitude]`
    /// and clipped so the pair stays in the simplex.
    pub fn resolve(&self, tree: &ParsedTree, option_values: &[f64], sigma: f64) -> Result<Vec<f64>> {
        match self {
            InitialCondition::Pairs { m } => Ok(TreeState::new(tree, m.clone())?.into_vec()),
            &InitialCondition::DeadlockPerturbed { seed, magnitude } => {
                if !(magnitude.is_finite() && magnitude >= 0.0) {
                    return Err(Error::InvalidInput(format!("perturbation magnitude must be >= 0, got {magnitude}")));
                }
                let values = assign_values(tree, option_values)?;
                let mut m = deadlock_state(&values, sigma)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for pair in m.chunks_exact_mut(2) {
                    let mbar = pair[0];
                    let shift = (magnitude * rng.gen_range(-1.0..=1.0f64)).min(0.5 - mbar);
                    let split = (magnitude * rng.gen_range(-1.0..=1.0f64)).clamp(-(mbar + shift), mbar + shift);
                    pair[0] = mbar + shift + 0.5 * split;
                    pair[1] = mbar + shift - 0.5 * split;
                }
                Ok(m)
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InitialCondition::DeadlockPerturbed { seed, .. } => Some(*seed),
            InitialCondition::Pairs { .. } => None,
        }
    }
}

/// Integrator choice as written in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub method: MethodName,
    pub t_final: f64,
    pub output_interval: f64,
    pub h: f64,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Rk4,
    Dopri5,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            method: MethodName::Dopri5,
            t_final: DEFAULT_T_FINAL,
            output_interval: DEFAULT_OUTPUT_INTERVAL,
            h: 1e-3,
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

impl IntegratorSettings {
    pub fn to_config(&self) -> Result<IntegratorConfig> {
        let method = match self.method {
            MethodName::Rk4 => Method::Rk4 { h: self.h },
            MethodName::Dopri5 => Method::Dopri5 { rtol: self.rtol, atol: self.atol },
        };
        let cfg = IntegratorConfig {
            method,
            ..IntegratorConfig::adaptive(self.t_final)
                .with_output_interval(self.output_interval)
                .with_simplex_guard(SIMPLEX_SLACK)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Scenario as read from a configuration file. Relative paths are resolved
/// against the directory of that file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub tree: PathBuf,
    pub values: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_initial")]
    pub initial: InitialCondition,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub output: OutputPaths,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub trajectory: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_initial() -> InitialCondition {
    InitialCondition::deadlock_perturbed(DEFAULT_SEED)
}

impl ScenarioSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rewrites relative paths so they are relative to `base`.
    pub fn rebase(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.tree);
        if let Some(p) = self.output.trajectory.as_mut() {
            fix(p);
        }
        if let Some(p) = self.output.summary.as_mut() {
            fix(p);
        }
        self
    }

    pub fn load(&self) -> Result<Scenario> {
        let tree = ParsedTree::from_path(&self.tree)?;
        Ok(Scenario {
            tree,
            values: self.values.clone(),
            sigma: self.sigma,
            initial: self.initial.clone(),
            integrator: self.integrator.to_config()?,
        })
    }
}

/// Fully resolved scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub tree: ParsedTree,
    pub values: Vec<f64>,
    pub sigma: f64,
    pub initial: InitialCondition,
    pub integrator: IntegratorConfig,
}

impl Scenario {
    pub fn new(tree: ParsedTree, values: Vec<f64>, sigma: f64, initial: InitialCondition) -> Result<Self> {
        Ok(Scenario { tree, values, sigma, initial, integrator: IntegratorSettings::default().to_config()? })
    }

    pub fn with_integrator(mut self, cfg: IntegratorConfig) -> Self {
        self.integrator = cfg;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NearestEquilibrium {
    pub m: Vec<f64>,
    pub projected: Vec<f64>,
    pub stability: Stability,
    /// Infinity-norm distance from the final stacked state.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub tree: serde_json::Value,
    pub values: Vec<f64>,
    pub sigma: f64,
    pub initial: InitialCondition,
    pub seed: Option<u64>,
    pub initial_m: Vec<f64>,
    pub integrator: IntegratorConfig,
    pub t_final: f64,
    pub final_m: Vec<f64>,
    pub final_projected: Vec<f64>,
    /// Zero-based option index with the largest final commitment.
    pub argmax: usize,
    pub nearest_equilibrium: Option<NearestEquilibrium>,
    pub steps: usize,
    pub rejected: usize,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    /// Stacked states.
    pub trajectory: Trajectory,
    /// Option commitments and uncommitted mass at every stored time.
    pub projected: Vec<Vec<f64>>,
    pub summary: ScenarioSummary,
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutcome> {
    let values = assign_values(&s.tree, &s.values)?;
    if !(s.sigma.is_finite() && s.sigma > 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {}", s.sigma)));
    }
    let m0 = s.initial.resolve(&s.tree, &s.values, s.sigma)?;
    let v = values.stacked().to_vec();
    let sigma = s.sigma;
    let traj = integrate(|_, m, out| stacked_rhs_into(m, &v, sigma, out), &m0, &s.integrator)?;
    let tree_json = s.tree.to_spec().to_value();
    let traj = traj.with_meta(TrajectoryMeta { tree: Some(tree_json.to_string()), values: s.values.clone(), sigma: Some(sigma) });
    let projected = traj
        .states
        .iter()
        .map(|m| project_m(&s.tree, m).map(|o| o.components))
        .collect::<Result<Vec<_>>>()?;
    let final_m = traj.final_state().to_vec();
    let final_state = project_m(&s.tree, &final_m)?;
    let per_node = full_node_equilibria(&values, sigma);
    let nearest = match nearest_full_equilibrium(&per_node, &final_m) {
        Some((m, stability, distance)) => Some(NearestEquilibrium {
            projected: project_m(&s.tree, &m)?.components,
            m,
            stability,
            distance,
        }),
        None => None,
    };
    let summary = ScenarioSummary {
        tree: tree_json,
        values: s.values.clone(),
        sigma,
        initial: s.initial.clone(),
        seed: s.initial.seed(),
        initial_m: m0,
        integrator: s.integrator,
        t_final: traj.final_time(),
        argmax: final_state.argmax(),
        final_projected: final_state.components,
        final_m,
        nearest_equilibrium: nearest,
        steps: traj.steps,
        rejected: traj.rejected,
    };
    Ok(ScenarioOutcome { trajectory: traj, projected, summary })
}
