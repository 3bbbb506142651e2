//! Numerical check that the tree vector field commutes with its
//! isomorphism group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{assign_values, m_to_z, stacked_rhs, tree_rhs_z_stacked};
use crate::error::Result;
use crate::tree::{enumerate_group, ParsedTree};

/// Residual above which the audit fails.
pub const AUDIT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditMode {
    /// Values are carried along with the state.
    Permuting,
    /// Values stay put; only equal values are expected to commute.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuditConfig {
    pub trials: usize,
    pub seed: u64,
    pub mode: AuditMode,
    pub sigma: f64,
    pub group_cap: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { trials: 50, seed: 1, mode: AuditMode::Permuting, sigma: 4.0, group_cap: crate::tree::DEFAULT_GROUP_CAP }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElementResidual {
    pub flips: Vec<usize>,
    pub m_residual: f64,
    pub z_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub config: AuditConfig,
    pub group_size: usize,
    pub elements: Vec<ElementResidual>,
    pub max_m_residual: f64,
    pub max_z_residual: f64,
    /// Fixed values that differ, so residuals are not expected to vanish.
    pub broken_symmetry: bool,
    pub passed: bool,
}

/// Uniform point in the open 2-simplex, kept away from its faces.
pub fn random_pair(rng: &mut impl Rng) -> [f64; 2] {
    let (mut a, mut b): (f64, f64) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
    if a + b > 1.0 {
        (a, b) = (1.0 - a, 1.0 - b);
    }
    [1e-3 + 0.997 * a, 1e-3 + 0.997 * b]
}

pub fn random_state(rng: &mut impl Rng, n_internal: usize) -> Vec<f64> {
    (0..n_internal).flat_map(|_| random_pair(rng)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// For every group element `g` and random state `x`, measures
/// `|F(g x, g v) - g F(x, v)|` (or with `v` held fixed) in both the pair
/// and the branch-mass coordinates.
pub fn audit_equivariance(tree: &ParsedTree, option_values: &[f64], cfg: &AuditConfig) -> Result<AuditReport> {
    let group = enumerate_group(tree, cfg.group_cap)?;
    let values = assign_values(tree, option_values)?;
    let v = values.stacked();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let states: Vec<Vec<f64>> = (0..cfg.trials).map(|_| random_state(&mut rng, tree.n_internal())).collect();
    let mut elements = Vec::with_capacity(group.len());
    for g in &group {
        let gv = match cfg.mode {
            AuditMode::Permuting => assign_values(g.image(), option_values)?.stacked().to_vec(),
            AuditMode::Fixed => v.to_vec(),
        };
        let (mut rm, mut rz) = (0.0f64, 0.0f64);
        for m in &states {
            let f = stacked_rhs(m, v, cfg.sigma)?;
            let gm = g.permute_state(m)?;
            rm = rm.max(max_diff(&stacked_rhs(&gm, &gv, cfg.sigma)?, &g.permute_state(&f)?));
            let z = m_to_z(tree, m)?.stacked(tree);
            let fz = tree_rhs_z_stacked(tree, &z, v, cfg.sigma)?;
            let gz = g.permute_state(&z)?;
            rz = rz.max(max_diff(&tree_rhs_z_stacked(g.image(), &gz, &gv, cfg.sigma)?, &g.permute_state(&fz)?));
        }
        elements.push(ElementResidual { flips: g.flip_set().iter().copied().collect(), m_residual: rm, z_residual: rz });
    }
    let max_m = elements.iter().map(|e| e.m_residual).fold(0.0, f64::max);
    let max_z = elements.iter().map(|e| e.z_residual).fold(0.0, f64::max);
    let broken = cfg.mode == AuditMode::Fixed && option_values.windows(2).any(|w| w[0] != w[1]);
    Ok(AuditReport {
        config: *cfg,
        group_size: group.len(),
        elements,
        max_m_residual: max_m,
        max_z_residual: max_z,
        broken_symmetry: broken,
        passed: broken || max_m.max(max_z) <= AUDIT_TOL,
    })
}
