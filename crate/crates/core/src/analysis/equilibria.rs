//! Equilibria of the full stacked system and their comparison with the
//! large-gain reduction.
//!
//! The stacked field has no coupling between blocks, so its equilibria are
//! products of node equilibria and its Jacobian spectrum is the union of the
//! node spectra.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{assign_values, ValueAssignment};
use crate::error::{Error, Result};
use crate::node::{deadlock_mbar, seeley_jacobian, seeley_rate};
use crate::numerics::{find_equilibrium, NewtonConfig, Stability, TOL_EIG};
use crate::reduced::{
    enumerate_reduced_equilibria, project_reduced, slow_manifold_y, BranchTag, EquilibriumRecord,
};
use crate::tree::ParsedTree;

/// Largest product of node equilibria that is enumerated explicitly.
pub const MAX_FULL_RECORDS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeEquilibrium {
    pub m: [f64; 2],
    /// `(re, im)` pairs sorted by decreasing real part.
    pub eigenvalues: [[f64; 2]; 2],
    pub stability: Stability,
}

fn node_spectrum(m: [f64; 2], v: [f64; 2], sigma: f64) -> [[f64; 2]; 2] {
    let j = seeley_jacobian(m[0], m[1], v[0], v[1], sigma);
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [[0.5 * tr + s, 0.0], [0.5 * tr - s, 0.0]]
    } else {
        let s = (-disc).sqrt();
        [[0.5 * tr, s], [0.5 * tr, -s]]
    }
}

fn classify_pairs(eig: &[[f64; 2]]) -> Stability {
    let lead = eig.iter().map(|e| e[0]).fold(f64::NEG_INFINITY, f64::max);
    if lead > TOL_EIG {
        Stability::Unstable
    } else if lead < -TOL_EIG {
        Stability::Stable
    } else {
        Stability::NonHyperbolic
    }
}

/// Refines one node equilibrium from `guess`. Only points in the closed
/// 2-simplex are returned.
pub fn refine_node(guess: [f64; 2], v: [f64; 2], sigma: f64, cfg: &NewtonConfig) -> Result<NodeEquilibrium> {
    let f = |m: &[f64]| seeley_rate(m[0], m[1], v[0], v[1], sigma).to_vec();
    let jac = |m: &[f64]| {
        let j = seeley_jacobian(m[0], m[1], v[0], v[1], sigma);
        DMatrix::from_row_slice(2, 2, &[j[0][0], j[0][1], j[1][0], j[1][1]])
    };
    let eq = find_equilibrium(f, Some(jac), &guess, cfg)?;
    let m = [eq.x[0], eq.x[1]];
    if m[0] < -1e-9 || m[1] < -1e-9 || m[0] + m[1] > 1.0 + 1e-9 {
        return Err(Error::InvalidInput(format!("equilibrium {m:?} lies outside the 2-simplex")));
    }
    let eigenvalues = node_spectrum(m, v, sigma);
    Ok(NodeEquilibrium { m, eigenvalues, stability: classify_pairs(&eigenvalues) })
}

/// All equilibria of one node found from a grid of seeds over the simplex
/// plus `extra` seeds, deduplicated.
pub fn node_equilibria_full(v: [f64; 2], sigma: f64, extra: &[[f64; 2]]) -> Vec<NodeEquilibrium> {
    let cfg = NewtonConfig::default();
    let n = 12;
    let mut seeds: Vec<[f64; 2]> = extra.to_vec();
    if (v[0] - v[1]).abs() <= 1e-14 * v[0] {
        if let Ok(d) = deadlock_mbar(v[0], sigma) {
            seeds.push([d, d]);
        }
    }
    for a in 0..=n {
        for b in 0..=(n - a) {
            let (x, y) = (a as f64 / n as f64, b as f64 / n as f64);
            seeds.push([0.02 + 0.96 * x, 0.02 + 0.96 * y]);
        }
    }
    let mut out: Vec<NodeEquilibrium> = Vec::new();
    for s in seeds {
        if let Ok(e) = refine_node(s, v, sigma, &cfg) {
            if !out.iter().any(|o| (o.m[0] - e.m[0]).abs() < 1e-8 && (o.m[1] - e.m[1]).abs() < 1e-8) {
                out.push(e);
            }
        }
    }
    out.sort_by(|a, b| (b.m[0] - b.m[1]).total_cmp(&(a.m[0] - a.m[1])));
    out
}

/// Node equilibria of every internal node, in depth-first order.
pub fn full_node_equilibria(values: &ValueAssignment, sigma: f64) -> Vec<Vec<NodeEquilibrium>> {
    (0..values.n_internal())
        .map(|r| {
            let p = values.pair(r);
            let vbar = 0.5 * (p[0] + p[1]);
            let alpha = (p[0] - p[1]) / vbar;
            let seeds: Vec<[f64; 2]> = [1.0, -1.0, -1.5 * alpha]
                .iter()
                .filter(|x| x.abs() <= 1.0)
                .filter_map(|&x| reduced_seed(x, alpha, vbar, sigma).ok())
                .collect();
            node_equilibria_full(p, sigma, &seeds)
        })
        .collect()
}

/// Node state that the reduction predicts for slow coordinate `x`.
fn reduced_seed(x: f64, alpha: f64, vbar: f64, sigma: f64) -> Result<[f64; 2]> {
    // With unscaled values the gain is 1, so `eps y = y`.
    let y = slow_manifold_y(x, alpha.clamp(-2.0, 2.0), vbar, sigma)?;
    let x = 0.98 * x;
    let mbar = (0.5 * (1.0 - y)).clamp(0.5 * x.abs(), 0.5);
    Ok([mbar + 0.5 * x, mbar - 0.5 * x])
}

/// Products of node equilibria as stacked states.
pub fn full_equilibria(tree: &ParsedTree, values: &ValueAssignment, sigma: f64) -> Result<Vec<EquilibriumRecord>> {
    if values.n_internal() != tree.n_internal() {
        return Err(Error::Dimension { expected: tree.n_internal(), got: values.n_internal() });
    }
    let per_node = full_node_equilibria(values, sigma);
    let total = per_node.iter().try_fold(1usize, |acc, v| acc.checked_mul(v.len()).filter(|&t| t <= MAX_FULL_RECORDS));
    let total = total.ok_or_else(|| Error::InvalidInput("too many equilibrium combinations to enumerate".into()))?;
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; per_node.len()];
    for _ in 0..total {
        let picks: Vec<&NodeEquilibrium> = idx.iter().zip(&per_node).map(|(&k, v)| &v[k]).collect();
        let node_stability: Vec<Stability> = picks.iter().map(|p| p.stability).collect();
        let mut eigenvalues: Vec<[f64; 2]> = picks.iter().flat_map(|p| p.eigenvalues).collect();
        eigenvalues.sort_by(|a, b| b[0].total_cmp(&a[0]));
        out.push(EquilibriumRecord {
            coordinates: picks.iter().flat_map(|p| p.m).collect(),
            branches: picks.iter().map(|p| tag_of(p.m)).collect(),
            stability: Stability::combine(node_stability.iter().copied()),
            node_stability,
            eigenvalues,
        });
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

fn tag_of(m: [f64; 2]) -> BranchTag {
    let x = m[0] - m[1];
    let mbar = 0.5 * (m[0] + m[1]);
    if x > 0.5 * mbar {
        BranchTag::Plus
    } else if x < -0.5 * mbar {
        BranchTag::Minus
    } else {
        BranchTag::Interior
    }
}

/// Equilibrium of the full system closest to `m` in the infinity norm.
/// Distances are blockwise because equilibria are products of node
/// equilibria.
pub fn nearest_full_equilibrium(per_node: &[Vec<NodeEquilibrium>], m: &[f64]) -> Option<(Vec<f64>, Stability, f64)> {
    let mut coords = Vec::with_capacity(m.len());
    let mut stab = Vec::with_capacity(per_node.len());
    let mut dist = 0.0f64;
    for (r, eqs) in per_node.iter().enumerate() {
        let d = |e: &NodeEquilibrium| (e.m[0] - m[2 * r]).abs().max((e.m[1] - m[2 * r + 1]).abs());
        let best = eqs.iter().min_by(|a, b| d(a).total_cmp(&d(b)))?;
        dist = dist.max(d(best));
        coords.extend(best.m);
        stab.push(best.stability);
    }
    Some((coords, Stability::combine(stab), dist))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumMode {
    Reduced,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumRow {
    pub id: usize,
    pub branches: Vec<BranchTag>,
    pub reduced_x: Vec<f64>,
    pub reduced_stability: Stability,
    pub projected: Vec<f64>,
    /// Refined full state at gain `K`, when requested and found.
    pub full_m: Option<Vec<f64>>,
    pub full_x: Option<Vec<f64>>,
    pub full_stability: Option<Stability>,
    /// `max_i |x_i(full) - x_i(reduced)|`.
    pub gap: Option<f64>,
    pub error: Option<String>,
}

/// Reduced equilibria of the tree and, in full mode, the equilibria of the
/// full system with values scaled by `gain` refined from them.
pub fn list_equilibria(
    tree: &ParsedTree,
    option_values: &[f64],
    sigma: f64,
    mode: EquilibriumMode,
    gain: f64,
) -> Result<Vec<EquilibriumRow>> {
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::InvalidInput(format!("gain must be positive, got {gain}")));
    }
    let values = assign_values(tree, option_values)?;
    let records = enumerate_reduced_equilibria(tree, &values, sigma)?;
    let scaled = values.scaled(gain);
    let (alphas, vbars) = (values.alphas(), values.vbars());
    let cfg = NewtonConfig::default();
    let mut rows = Vec::with_capacity(records.len());
    for (id, rec) in records.into_iter().enumerate() {
        let mut row = EquilibriumRow {
            id,
            projected: project_reduced(tree, &rec.coordinates)?,
            branches: rec.branches,
            reduced_x: rec.coordinates,
            reduced_stability: rec.stability,
            full_m: None,
            full_x: None,
            full_stability: None,
            gap: None,
            error: None,
        };
        if mode == EquilibriumMode::Full {
            let mut m = Vec::with_capacity(tree.state_dim());
            let mut stab = Vec::new();
            for (r, &x) in row.reduced_x.iter().enumerate() {
                let y = slow_manifold_y(x, alphas[r], vbars[r], sigma)?;
                let mbar = 0.5 * (1.0 - y / gain);
                match refine_node([mbar + 0.5 * x, mbar - 0.5 * x], scaled.pair(r), sigma, &cfg) {
                    Ok(e) => {
                        m.extend(e.m);
                        stab.push(e.stability);
                    }
                    Err(e) => {
                        row.error = Some(format!("node {}: {e}", tree.internal_df_order()[r]));
                        break;
                    }
                }
            }
            if row.error.is_none() {
                let fx: Vec<f64> = m.chunks_exact(2).map(|p| p[0] - p[1]).collect();
                row.gap = Some(fx.iter().zip(&row.reduced_x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                row.full_stability = Some(Stability::combine(stab));
                row.full_x = Some(fx);
                row.full_m = Some(m);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
