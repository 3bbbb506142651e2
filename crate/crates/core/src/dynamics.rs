//! The recursive tree vector field.
//!
//! Every internal node runs the two-option primitive on the mean values of its
//! children. The stacked state `m` holds one pair per internal node in
//! depth-first order. The `z` view multiplies pairs down the tree so that
//! `z` at a leaf is the commitment to that leaf's option.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::node::{deadlock_mbar, seeley_jacobian, seeley_rate};
use crate::tree::{ParsedTree, TreeIsomorphism};

/// Threshold below which a branch scalar `z_i` is treated as zero.
pub const ZETA_MIN: f64 = 1e-12;

/// Option values together with the derived per-node means and pair values.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueAssignment {
    option_values: Vec<f64>,
    node_means: Vec<f64>,
    stacked: Vec<f64>,
    internal: Vec<usize>,
}

impl ValueAssignment {
    pub fn option_values(&self) -> &[f64] {
        &self.option_values
    }

    /// Mean value `u_i` of every node, indexed by node id.
    pub fn node_means(&self) -> &[f64] {
        &self.node_means
    }

    /// Stacked pair values `(u_lc, u_rc)` in internal depth-first order.
    pub fn stacked(&self) -> &[f64] {
        &self.stacked
    }

    pub fn n_internal(&self) -> usize {
        self.internal.len()
    }

    /// Pair values of the internal node with depth-first rank `r`.
    pub fn pair(&self, r: usize) -> [f64; 2] {
        [self.stacked[2 * r], self.stacked[2 * r + 1]]
    }

    /// Mean pair value per internal node, in depth-first order.
    pub fn vbars(&self) -> Vec<f64> {
        (0..self.n_internal()).map(|r| self.node_means[self.internal[r]]).collect()
    }

    /// Relative value difference per internal node, in depth-first order.
    pub fn alphas(&self) -> Vec<f64> {
        (0..self.n_internal())
            .map(|r| {
                let [a, b] = self.pair(r);
                (a - b) / (0.5 * (a + b))
            })
            .collect()
    }

    /// Relative value difference at internal node `node`.
    pub fn alpha_of(&self, tree: &ParsedTree, node: usize) -> Option<f64> {
        tree.internal_rank(node).map(|r| self.alphas()[r])
    }

    pub fn scaled(&self, gain: f64) -> ValueAssignment {
        ValueAssignment {
            option_values: self.option_values.iter().map(|v| v * gain).collect(),
            node_means: self.node_means.iter().map(|v| v * gain).collect(),
            stacked: self.stacked.iter().map(|v| v * gain).collect(),
            internal: self.internal.clone(),
        }
    }
}

/// Computes node means bottom-up from one positive value per option.
pub fn assign_values(tree: &ParsedTree, option_values: &[f64]) -> Result<ValueAssignment> {
    check_dim(tree.n_options(), option_values.len())?;
    if let Some((i, v)) = option_values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidInput(format!("value of option {} must be positive, got {v}", i + 1)));
    }
    let mut means = vec![0.0; tree.n_nodes()];
    for &i in tree.df_order().iter().rev() {
        means[i] = match tree.children(i) {
            Some((l, r)) => 0.5 * (means[l] + means[r]),
            None => option_values[tree.option_of(i).expect("leaf")],
        };
    }
    let internal = tree.internal_df_order().to_vec();
    let mut stacked = Vec::with_capacity(2 * internal.len());
    for &j in &internal {
        let (l, r) = tree.children(j).expect("internal");
        stacked.push(means[l]);
        stacked.push(means[r]);
    }
    Ok(ValueAssignment { option_values: option_values.to_vec(), node_means: means, stacked, internal })
}

/// Blockwise rates of the stacked state for stacked pair values `v`.
pub fn stacked_rhs_into(m: &[f64], v: &[f64], sigma: f64, out: &mut [f64]) {
    for ((mb, vb), ob) in m.chunks_exact(2).zip(v.chunks_exact(2)).zip(out.chunks_exact_mut(2)) {
        let r = seeley_rate(mb[0], mb[1], vb[0], vb[1], sigma);
        ob[0] = r[0];
        ob[1] = r[1];
    }
}

pub fn stacked_rhs(m: &[f64], v: &[f64], sigma: f64) -> Result<Vec<f64>> {
    check_dim(m.len(), v.len())?;
    if m.len() % 2 != 0 {
        return Err(Error::InvalidInput("stacked vectors have even length".into()));
    }
    let mut out = vec![0.0; m.len()];
    stacked_rhs_into(m, v, sigma, &mut out);
    Ok(out)
}

pub fn tree_rhs_m(tree: &ParsedTree, m: &[f64], values: &ValueAssignment, sigma: f64) -> Result<Vec<f64>> {
    check_dim(tree.state_dim(), m.len())?;
    check_dim(tree.state_dim(), values.stacked().len())?;
    stacked_rhs(m, values.stacked(), sigma)
}

/// Analytic block-diagonal Jacobian of [`tree_rhs_m`].
pub fn tree_jacobian_m(tree: &ParsedTree, m: &[f64], values: &ValueAssignment, sigma: f64) -> Result<DMatrix<f64>> {
    check_dim(tree.state_dim(), m.len())?;
    let n = m.len();
    let v = values.stacked();
    let mut jac = DMatrix::zeros(n, n);
    for b in 0..n / 2 {
        let j = seeley_jacobian(m[2 * b], m[2 * b + 1], v[2 * b], v[2 * b + 1], sigma);
        for (r, row) in j.iter().enumerate() {
            for (c, x) in row.iter().enumerate() {
                jac[(2 * b + r, 2 * b + c)] = *x;
            }
        }
    }
    Ok(jac)
}

/// Every internal node at the deadlock commitment for its own mean value.
pub fn deadlock_state(values: &ValueAssignment, sigma: f64) -> Result<Vec<f64>> {
    let mut m = Vec::with_capacity(2 * values.n_internal());
    for vbar in values.vbars() {
        let d = deadlock_mbar(vbar, sigma)?;
        m.extend([d, d]);
    }
    Ok(m)
}

/// Index of the first block that leaves the 2-simplex by more than `slack`,
/// with the size of the violation.
pub fn simplex_violation(m: &[f64], slack: f64) -> Option<(usize, f64)> {
    m.chunks_exact(2).enumerate().find_map(|(b, p)| {
        let viol = (-p[0]).max(-p[1]).max(p[0] + p[1] - 1.0);
        (viol > slack || !viol.is_finite()).then_some((b, viol))
    })
}

/// Stacked state whose pairs lie in the 2-simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeState(Vec<f64>);

impl TreeState {
    pub fn new(tree: &ParsedTree, m: Vec<f64>) -> Result<Self> {
        check_dim(tree.state_dim(), m.len())?;
        if let Some((b, viol)) = simplex_violation(&m, 0.0) {
            return Err(Error::InvalidInput(format!(
                "pair {b} of the state leaves the 2-simplex by {viol:e}"
            )));
        }
        Ok(TreeState(m))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Branch scalars `z_i` for every node, indexed by node id, with `z_root = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZState {
    pub per_node: Vec<f64>,
}

impl ZState {
    /// Children's scalars `(z_lc, z_rc)` for each internal node in depth-first
    /// order.
    pub fn stacked(&self, tree: &ParsedTree) -> Vec<f64> {
        tree.internal_df_order()
            .iter()
            .flat_map(|&j| {
                let (l, r) = tree.children(j).expect("internal");
                [self.per_node[l], self.per_node[r]]
            })
            .collect()
    }

    pub fn from_stacked(tree: &ParsedTree, s: &[f64]) -> Result<Self> {
        check_dim(tree.state_dim(), s.len())?;
        let mut per_node = vec![0.0; tree.n_nodes()];
        per_node[tree.root()] = 1.0;
        for (k, &j) in tree.internal_df_order().iter().enumerate() {
            let (l, r) = tree.children(j).expect("internal");
            per_node[l] = s[2 * k];
            per_node[r] = s[2 * k + 1];
        }
        Ok(ZState { per_node })
    }
}

pub fn m_to_z(tree: &ParsedTree, m: &[f64]) -> Result<ZState> {
    check_dim(tree.state_dim(), m.len())?;
    let mut z = vec![0.0; tree.n_nodes()];
    z[tree.root()] = 1.0;
    for (k, &j) in tree.internal_df_order().iter().enumerate() {
        let (l, r) = tree.children(j).expect("internal");
        z[l] = z[j] * m[2 * k];
        z[r] = z[j] * m[2 * k + 1];
    }
    Ok(ZState { per_node: z })
}

/// Inverse of [`m_to_z`]: each pair is the children's scalars divided by the
/// node's own scalar.
pub fn z_to_m(tree: &ParsedTree, z: &ZState) -> Result<Vec<f64>> {
    check_dim(tree.n_nodes(), z.per_node.len())?;
    let mut m = Vec::with_capacity(tree.state_dim());
    for &j in tree.internal_df_order() {
        let zj = z.per_node[j];
        if !(zj > ZETA_MIN) {
            return Err(Error::DegenerateBranch { node: j, z: zj });
        }
        let (l, r) = tree.children(j).expect("internal");
        m.push(z.per_node[l] / zj);
        m.push(z.per_node[r] / zj);
    }
    Ok(m)
}

/// Rates of every branch scalar, by the chain rule through the stacked rates.
pub fn tree_rhs_z(tree: &ParsedTree, z: &ZState, values: &ValueAssignment, sigma: f64) -> Result<ZState> {
    check_dim(tree.state_dim(), values.stacked().len())?;
    let m = z_to_m(tree, z)?;
    let dm = stacked_rhs(&m, values.stacked(), sigma)?;
    let mut dz = vec![0.0; tree.n_nodes()];
    for (k, &j) in tree.internal_df_order().iter().enumerate() {
        let (l, r) = tree.children(j).expect("internal");
        let (zj, dzj) = (z.per_node[j], dz[j]);
        dz[l] = dzj * m[2 * k] + zj * dm[2 * k];
        dz[r] = dzj * m[2 * k + 1] + zj * dm[2 * k + 1];
    }
    Ok(ZState { per_node: dz })
}

/// [`tree_rhs_z`] on stacked coordinates with explicit stacked pair values.
pub fn tree_rhs_z_stacked(tree: &ParsedTree, z: &[f64], v: &[f64], sigma: f64) -> Result<Vec<f64>> {
    check_dim(tree.state_dim(), v.len())?;
    let zs = ZState::from_stacked(tree, z)?;
    let m = z_to_m(tree, &zs)?;
    let dm = stacked_rhs(&m, v, sigma)?;
    let mut dz_node = vec![0.0; tree.n_nodes()];
    let mut out = vec![0.0; z.len()];
    for (k, &j) in tree.internal_df_order().iter().enumerate() {
        let (l, r) = tree.children(j).expect("internal");
        let (zj, dzj) = (zs.per_node[j], dz_node[j]);
        dz_node[l] = dzj * m[2 * k] + zj * dm[2 * k];
        dz_node[r] = dzj * m[2 * k + 1] + zj * dm[2 * k + 1];
        out[2 * k] = dz_node[l];
        out[2 * k + 1] = dz_node[r];
    }
    Ok(out)
}

/// Commitment per option followed by the uncommitted mass.
#[derive(Clone, Debug, PartialEq)]
pub struct OptionState {
    pub components: Vec<f64>,
}

impl OptionState {
    pub fn options(&self) -> &[f64] {
        &self.components[..self.components.len() - 1]
    }

    pub fn uncommitted(&self) -> f64 {
        *self.components.last().expect("non-empty")
    }

    /// Option with the largest commitment.
    pub fn argmax(&self) -> usize {
        self.options()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("at least two options")
    }
}

pub fn project(tree: &ParsedTree, z: &ZState) -> OptionState {
    let mut components: Vec<f64> = (0..tree.n_options())
        .map(|o| z.per_node[tree.leaf_of(o).expect("option")])
        .collect();
    let total: f64 = components.iter().sum();
    components.push(1.0 - total);
    OptionState { components }
}

pub fn project_m(tree: &ParsedTree, m: &[f64]) -> Result<OptionState> {
    Ok(project(tree, &m_to_z(tree, m)?))
}

/// Rate of the projected option state; the last entry is minus the sum of
/// the option rates.
pub fn projected_rhs(tree: &ParsedTree, z: &ZState, values: &ValueAssignment, sigma: f64) -> Result<Vec<f64>> {
    let dz = tree_rhs_z(tree, z, values, sigma)?;
    let mut out: Vec<f64> = (0..tree.n_options())
        .map(|o| dz.per_node[tree.leaf_of(o).expect("option")])
        .collect();
    let total: f64 = out.iter().sum();
    out.push(-total);
    Ok(out)
}

/// `z` at `node` as the product over its root path of
/// `(2 mbar_j + a_j dm_j) / 2`.
pub fn path_product(tree: &ParsedTree, m: &[f64], node: usize) -> Result<f64> {
    check_dim(tree.state_dim(), m.len())?;
    let path = tree.path_from_root(node)?;
    Ok(path
        .steps()
        .map(|(j, b)| {
            let r = tree.internal_rank(j).expect("internal");
            let (m1, m2) = (m[2 * r], m[2 * r + 1]);
            let (mbar, dm) = (0.5 * (m1 + m2), m1 - m2);
            (2.0 * mbar + b.sign() * dm) / 2.0
        })
        .product())
}

/// Stacked state or stacked values re-expressed on the image tree of `g`.
pub fn apply_isomorphism(g: &TreeIsomorphism, tree: &ParsedTree, x: &[f64]) -> Result<Vec<f64>> {
    g.validate_for(tree)?;
    g.permute_state(x)
}

/// Option-indexed vector permuted by `g`.
pub fn apply_isomorphism_options(g: &TreeIsomorphism, tree: &ParsedTree, w: &[f64]) -> Result<Vec<f64>> {
    g.validate_for(tree)?;
    g.permute_options(w)
}
