//! Large-gain reduction of the tree dynamics.
//!
//! Scaling every value by a gain `K = 1/eps` makes the mean commitment of
//! each node fast and its difference `x = m1 - m2` slow. In the limit the
//! mean sits at `1/2` and `x` follows a scalar rational flow on `[-1, 1]`
//! whose zeros are `+1`, `-1` and `-3 alpha / 2`.

use serde::Serialize;

use crate::dynamics::ValueAssignment;
use crate::error::{check_dim, Error, Result};
use crate::node::seeley_rate;
use crate::numerics::Stability;
use crate::tree::ParsedTree;

/// Tolerance used to decide that `alpha` sits on a stability threshold.
pub const THRESHOLD_TOL: f64 = 1e-12;

const ALPHA_CRIT: f64 = 2.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedConfig {
    pub sigma: f64,
    pub gain: f64,
}

impl ReducedConfig {
    pub fn new(sigma: f64, gain: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0 && gain.is_finite() && gain > 0.0) {
            return Err(Error::InvalidInput(format!("need sigma > 0 and K > 0, got {sigma}, {gain}")));
        }
        Ok(ReducedConfig { sigma, gain })
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.gain
    }
}

/// Slow variables `x_i`, one per internal node in depth-first order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState(pub Vec<f64>);

fn check_domain(x: f64, alpha: f64, vbar: f64, sigma: f64) -> Result<()> {
    let ok = x.is_finite()
        && x.abs() <= 1.0 + 1e-12
        && alpha.is_finite()
        && alpha.abs() <= 2.0
        && vbar.is_finite()
        && vbar > 0.0
        && sigma.is_finite()
        && sigma > 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "reduced flow needs |x| <= 1, |alpha| <= 2, vbar > 0, sigma > 0; got x = {x}, alpha = {alpha}, vbar = {vbar}, sigma = {sigma}"
        )))
    }
}

#[inline]
fn slow_rate(x: f64, alpha: f64, sigma: f64) -> f64 {
    0.5 * sigma * (1.0 - x * x) * (2.0 * x + 3.0 * alpha) / (6.0 + alpha * x)
}

#[inline]
fn slow_slope(x: f64, alpha: f64, sigma: f64) -> f64 {
    let d = 6.0 + alpha * x;
    let p = (1.0 - x * x) * (2.0 * x + 3.0 * alpha);
    let dp = -2.0 * x * (2.0 * x + 3.0 * alpha) + 2.0 * (1.0 - x * x);
    0.5 * sigma * (dp * d - p * alpha) / (d * d)
}

/// Slow rate of `x` on the slow manifold. The mean value `vbar` shapes the
/// manifold but cancels from the rate; it is validated for consistency with
/// [`slow_manifold_y`].
pub fn reduced_node_rhs(x: f64, alpha: f64, vbar: f64, sigma: f64) -> Result<f64> {
    check_domain(x, alpha, vbar, sigma)?;
    Ok(slow_rate(x, alpha, sigma))
}

/// `d/dx` of [`reduced_node_rhs`].
pub fn reduced_node_slope(x: f64, alpha: f64, vbar: f64, sigma: f64) -> Result<f64> {
    check_domain(x, alpha, vbar, sigma)?;
    Ok(slow_slope(x, alpha, sigma))
}

/// Fast variable `y = (1 - 2 mbar) / eps` on the slow manifold.
pub fn slow_manifold_y(x: f64, alpha: f64, vbar: f64, sigma: f64) -> Result<f64> {
    check_domain(x, alpha, vbar, sigma)?;
    Ok(sigma * (1.0 - x * x) / (6.0 * vbar + alpha * vbar * x))
}

/// Node state and values of the full model at gain `1/eps` for the
/// coordinates `(x, y)`.
fn full_node(x: f64, y: f64, alpha: f64, vbar: f64, eps: f64) -> ([f64; 2], [f64; 2]) {
    let mbar = 0.5 * (1.0 - eps * y);
    let dv = alpha * vbar;
    ([mbar + 0.5 * x, mbar - 0.5 * x], [(vbar + 0.5 * dv) / eps, (vbar - 0.5 * dv) / eps])
}

/// Slow rate `dx/dt` of the full node model in `(x, y)` coordinates. At
/// `eps = 0` the singular limit `vbar x y + 3 dv y / 2` is returned.
pub fn slow_rate_full(x: f64, y: f64, alpha: f64, vbar: f64, sigma: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        return vbar * x * y + 1.5 * alpha * vbar * y;
    }
    let (m, v) = full_node(x, y, alpha, vbar, eps);
    let r = seeley_rate(m[0], m[1], v[0], v[1], sigma);
    r[0] - r[1]
}

/// Fast residual `eps dy/dt` of the full node model in `(x, y)` coordinates.
pub fn fast_residual(x: f64, y: f64, alpha: f64, vbar: f64, sigma: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        return -0.5 * y * (6.0 * vbar + alpha * vbar * x) + 0.5 * sigma * (1.0 - x * x);
    }
    let (m, v) = full_node(x, y, alpha, vbar, eps);
    let r = seeley_rate(m[0], m[1], v[0], v[1], sigma);
    -(r[0] + r[1])
}

/// Componentwise slow flow with each node's own relative value difference.
pub fn reduced_tree_rhs(tree: &ParsedTree, x: &[f64], values: &ValueAssignment, sigma: f64) -> Result<Vec<f64>> {
    check_dim(tree.n_internal(), x.len())?;
    check_dim(tree.state_dim(), values.stacked().len())?;
    x.iter()
        .zip(values.alphas())
        .zip(values.vbars())
        .map(|((&xi, a), vb)| reduced_node_rhs(xi, a, vb, sigma))
        .collect()
}

/// `x_i = m_i1 - m_i2` for every internal node.
pub fn reduced_coordinates(m: &[f64]) -> Vec<f64> {
    m.chunks_exact(2).map(|p| p[0] - p[1]).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchTag {
    Plus,
    Minus,
    Interior,
}

impl BranchTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BranchTag::Plus => "+1",
            BranchTag::Minus => "-1",
            BranchTag::Interior => "interior",
        }
    }
}

/// Equilibria of the scalar slow flow for one relative value difference,
/// with their classification. An interior zero that coincides with `+1` or
/// `-1` at a threshold is reported once, as the boundary point.
pub fn node_equilibria(alpha: f64) -> Vec<(f64, BranchTag, Stability)> {
    let classify = |margin: f64| {
        if margin > THRESHOLD_TOL {
            Stability::Stable
        } else if margin < -THRESHOLD_TOL {
            Stability::Unstable
        } else {
            Stability::NonHyperbolic
        }
    };
    let mut out = vec![
        (1.0, BranchTag::Plus, classify(alpha + ALPHA_CRIT)),
        (-1.0, BranchTag::Minus, classify(ALPHA_CRIT - alpha)),
    ];
    if alpha.abs() < ALPHA_CRIT - THRESHOLD_TOL {
        out.push((-1.5 * alpha, BranchTag::Interior, Stability::Unstable));
    }
    out
}

/// An equilibrium in reduced or full coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumRecord {
    pub coordinates: Vec<f64>,
    pub branches: Vec<BranchTag>,
    pub node_stability: Vec<Stability>,
    pub stability: Stability,
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
}

/// Cartesian product of the per-node equilibria.
pub fn enumerate_reduced_equilibria(tree: &ParsedTree, values: &ValueAssignment, sigma: f64) -> Result<Vec<EquilibriumRecord>> {
    check_dim(tree.state_dim(), values.stacked().len())?;
    let alphas = values.alphas();
    let per_node: Vec<Vec<(f64, BranchTag, Stability)>> = alphas.iter().map(|&a| node_equilibria(a)).collect();
    let total: usize = per_node.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; per_node.len()];
    for _ in 0..total {
        let picks: Vec<&(f64, BranchTag, Stability)> = idx.iter().zip(&per_node).map(|(&k, opts)| &opts[k]).collect();
        let coordinates: Vec<f64> = picks.iter().map(|p| p.0).collect();
        let node_stability: Vec<Stability> = picks.iter().map(|p| p.2).collect();
        let eigenvalues = coordinates
            .iter()
            .zip(&alphas)
            .map(|(&x, &a)| [slow_slope(x, a, sigma), 0.0])
            .collect();
        out.push(EquilibriumRecord {
            branches: picks.iter().map(|p| p.1).collect(),
            stability: Stability::combine(node_stability.iter().copied()),
            coordinates,
            node_stability,
            eigenvalues,
        });
        // Odometer over the per-node choices, last node fastest.
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < per_node[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

/// Option-simplex image of a reduced state, with every mean at `1/2`.
pub fn project_reduced(tree: &ParsedTree, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(tree.n_internal(), x.len())?;
    let mut comps = Vec::with_capacity(tree.n_options() + 1);
    for o in 0..tree.n_options() {
        let path = tree.path_from_root(tree.leaf_of(o).expect("option"))?;
        let z: f64 = path
            .steps()
            .map(|(j, b)| (1.0 + b.sign() * x[tree.internal_rank(j).expect("internal")]) / 2.0)
            .product();
        comps.push(z);
    }
    let total: f64 = comps.iter().sum();
    comps.push(1.0 - total);
    Ok(comps)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectedEquilibrium {
    /// Option commitments followed by the uncommitted mass.
    pub state: Vec<f64>,
    pub stability: Stability,
    /// Indices of the reduced records that project here.
    pub records: Vec<usize>,
}

/// Projected equilibria of the reduced tree flow. Only nodes reached with
/// positive branch mass influence stability, and records with the same
/// projection are merged.
pub fn projected_equilibria(tree: &ParsedTree, values: &ValueAssignment, sigma: f64) -> Result<Vec<ProjectedEquilibrium>> {
    let records = enumerate_reduced_equilibria(tree, values, sigma)?;
    let mut out: Vec<ProjectedEquilibrium> = Vec::new();
    for (k, rec) in records.iter().enumerate() {
        let state = project_reduced(tree, &rec.coordinates)?;
        let stability = Stability::combine(
            tree.internal_df_order()
                .iter()
                .enumerate()
                .filter(|(_, &j)| branch_mass(tree, &rec.coordinates, j) > 0.0)
                .map(|(r, _)| rec.node_stability[r]),
        );
        match out.iter_mut().find(|p| p.state.iter().zip(&state).all(|(a, b)| (a - b).abs() < 1e-12)) {
            Some(p) => {
                p.stability = Stability::combine([p.stability, stability]);
                p.records.push(k);
            }
            None => out.push(ProjectedEquilibrium { state, stability, records: vec![k] }),
        }
    }
    Ok(out)
}

fn branch_mass(tree: &ParsedTree, x: &[f64], node: usize) -> f64 {
    let path = tree.path_from_root(node).expect("known node");
    path.steps()
        .map(|(j, b)| (1.0 + b.sign() * x[tree.internal_rank(j).expect("internal")]) / 2.0)
        .product()
}
