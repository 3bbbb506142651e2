//! Binary-tree parsings of option sets.
//!
//! Nodes are indexed in depth-first preorder when a tree is built from a
//! [`TreeSpec`]. Trees obtained by flipping keep their node indices, so their
//! depth-first order is a permutation of the indices. The stacked state of a
//! tree places the pair of internal node `j` at slots `(2r, 2r+1)`, where `r`
//! is the rank of `j` in [`ParsedTree::internal_df_order`].

mod canonical;
mod group;
mod spec;

use std::collections::{BTreeSet, HashSet};

pub use canonical::canonical_form;
pub use group::{enumerate_group, flip, TreeIsomorphism, DEFAULT_GROUP_CAP};
pub use spec::{OptionLabel, TreeSpec};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Internal { left: usize, right: usize },
    Leaf { option: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub kind: NodeKind,
}

/// Which child a path step descends into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Left,
    Right,
}

impl Branch {
    /// `+1` for a left step, `-1` for a right step.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Left => 1.0,
            Branch::Right => -1.0,
        }
    }
}

/// Shortest path from the root to a node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreePath {
    pub nodes: Vec<usize>,
    pub branches: Vec<Branch>,
}

impl TreePath {
    pub fn signs(&self) -> Vec<i8> {
        self.branches.iter().map(|b| b.sign() as i8).collect()
    }

    /// Number of edges, `|p| - 1`.
    pub fn edge_len(&self) -> usize {
        self.branches.len()
    }

    /// `(parent, branch)` pairs for each step of the path.
    pub fn steps(&self) -> impl Iterator<Item = (usize, Branch)> + '_ {
        self.nodes.iter().copied().zip(self.branches.iter().copied())
    }
}

/// A validated proper rooted binary tree whose leaves are options.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedTree {
    nodes: Vec<TreeNode>,
    root: usize,
    labels: Vec<OptionLabel>,
    leaf_of_option: Vec<usize>,
    df_order: Vec<usize>,
    internal_df_order: Vec<usize>,
    leaf_df_order: Vec<usize>,
    internal_rank: Vec<Option<usize>>,
}

impl ParsedTree {
    pub fn from_spec(spec: &TreeSpec) -> Result<Self> {
        let n_leaves = spec.n_leaves();
        if n_leaves < 2 {
            return Err(Error::TooFewOptions(n_leaves));
        }
        let mut nodes = Vec::with_capacity(2 * n_leaves - 1);
        let mut leaf_labels = Vec::with_capacity(n_leaves);
        build_preorder(spec, None, &mut nodes, &mut leaf_labels);

        let mut seen = HashSet::new();
        for (_, label) in &leaf_labels {
            if !seen.insert(label.clone()) {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
        }

        // Integer labels covering 1..=n name the option indices explicitly;
        // anything else falls back to depth-first leaf order.
        let explicit = leaf_labels.iter().all(|(_, l)| {
            matches!(l, OptionLabel::Index(i) if *i >= 1 && *i <= n_leaves as u64)
        });
        let mut labels = vec![OptionLabel::Index(0); n_leaves];
        let mut leaf_of_option = vec![0; n_leaves];
        for (k, (node, label)) in leaf_labels.into_iter().enumerate() {
            let option = match (&label, explicit) {
                (OptionLabel::Index(i), true) => *i as usize - 1,
                _ => k,
            };
            nodes[node].kind = NodeKind::Leaf { option };
            leaf_of_option[option] = node;
            labels[option] = label;
        }
        Ok(Self::assemble(nodes, 0, labels, leaf_of_option))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_spec(&TreeSpec::from_json_str(text)?)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Balanced parsing of `n` options; see [`TreeSpec::balanced`].
    pub fn balanced(n: usize) -> Result<Self> {
        Self::from_spec(&TreeSpec::balanced(n))
    }

    pub fn caterpillar(n: usize) -> Result<Self> {
        Self::from_spec(&TreeSpec::caterpillar(n))
    }

    fn assemble(
        nodes: Vec<TreeNode>,
        root: usize,
        labels: Vec<OptionLabel>,
        leaf_of_option: Vec<usize>,
    ) -> Self {
        let mut tree = ParsedTree {
            nodes,
            root,
            labels,
            leaf_of_option,
            df_order: Vec::new(),
            internal_df_order: Vec::new(),
            leaf_df_order: Vec::new(),
            internal_rank: Vec::new(),
        };
        tree.recompute_orders();
        tree
    }

    fn recompute_orders(&mut self) {
        let n = self.nodes.len();
        self.df_order.clear();
        self.internal_df_order.clear();
        self.leaf_df_order.clear();
        self.internal_rank = vec![None; n];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            self.df_order.push(i);
            match self.nodes[i].kind {
                NodeKind::Internal { left, right } => {
                    self.internal_rank[i] = Some(self.internal_df_order.len());
                    self.internal_df_order.push(i);
                    stack.push(right);
                    stack.push(left);
                }
                NodeKind::Leaf { .. } => self.leaf_df_order.push(i),
            }
        }
    }

    /// The tree with left and right children exchanged at every node of
    /// `flips`. Node indices and option assignments are kept.
    pub(crate) fn flipped(&self, flips: &BTreeSet<usize>) -> ParsedTree {
        let mut out = self.clone();
        for &i in flips {
            if let NodeKind::Internal { left, right } = out.nodes[i].kind {
                out.nodes[i].kind = NodeKind::Internal { left: right, right: left };
            }
        }
        out.recompute_orders();
        out
    }

    pub fn n_options(&self) -> usize {
        self.leaf_of_option.len()
    }

    pub fn n_internal(&self) -> usize {
        self.internal_df_order.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Length of the stacked state vector, `2 n_i`.
    pub fn state_dim(&self) -> usize {
        2 * self.n_internal()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> Result<&TreeNode> {
        self.nodes.get(i).ok_or(Error::UnknownNode(i))
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        matches!(self.nodes.get(i), Some(TreeNode { kind: NodeKind::Leaf { .. }, .. }))
    }

    pub fn is_internal(&self, i: usize) -> bool {
        matches!(self.nodes.get(i), Some(TreeNode { kind: NodeKind::Internal { .. }, .. }))
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.nodes.get(i).and_then(|n| n.parent)
    }

    pub fn children(&self, i: usize) -> Option<(usize, usize)> {
        match self.nodes.get(i)?.kind {
            NodeKind::Internal { left, right } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn left_child(&self, i: usize) -> Option<usize> {
        self.children(i).map(|c| c.0)
    }

    pub fn right_child(&self, i: usize) -> Option<usize> {
        self.children(i).map(|c| c.1)
    }

    pub fn sibling(&self, i: usize) -> Option<usize> {
        let (l, r) = self.children(self.parent(i)?)?;
        Some(if l == i { r } else { l })
    }

    /// Option carried by a leaf node.
    pub fn option_of(&self, node: usize) -> Option<usize> {
        match self.nodes.get(node)?.kind {
            NodeKind::Leaf { option } => Some(option),
            NodeKind::Internal { .. } => None,
        }
    }

    pub fn leaf_of(&self, option: usize) -> Option<usize> {
        self.leaf_of_option.get(option).copied()
    }

    pub fn label(&self, option: usize) -> Option<&OptionLabel> {
        self.labels.get(option)
    }

    pub fn labels(&self) -> &[OptionLabel] {
        &self.labels
    }

    pub fn df_order(&self) -> &[usize] {
        &self.df_order
    }

    pub fn internal_df_order(&self) -> &[usize] {
        &self.internal_df_order
    }

    pub fn leaf_df_order(&self) -> &[usize] {
        &self.leaf_df_order
    }

    /// Options in the order their leaves are visited depth-first.
    pub fn option_df_order(&self) -> Vec<usize> {
        self.leaf_df_order.iter().map(|&l| self.option_of(l).expect("leaf")).collect()
    }

    /// Rank of an internal node in `internal_df_order`.
    pub fn internal_rank(&self, i: usize) -> Option<usize> {
        self.internal_rank.get(i).copied().flatten()
    }

    /// All descendants of `i` in depth-first order (excluding `i`).
    pub fn descendants(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some((l, r)) = self.children(i) {
            self.collect_subtree(l, &mut out);
            self.collect_subtree(r, &mut out);
        }
        out
    }

    pub fn left_descendants(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(l) = self.left_child(i) {
            self.collect_subtree(l, &mut out);
        }
        out
    }

    pub fn right_descendants(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(r) = self.right_child(i) {
            self.collect_subtree(r, &mut out);
        }
        out
    }

    /// Options below the left child of `i`.
    pub fn left_options(&self, i: usize) -> BTreeSet<usize> {
        self.left_descendants(i).into_iter().filter_map(|n| self.option_of(n)).collect()
    }

    pub fn right_options(&self, i: usize) -> BTreeSet<usize> {
        self.right_descendants(i).into_iter().filter_map(|n| self.option_of(n)).collect()
    }

    fn collect_subtree(&self, i: usize, out: &mut Vec<usize>) {
        let mut stack = vec![i];
        while let Some(n) = stack.pop() {
            out.push(n);
            if let Some((l, r)) = self.children(n) {
                stack.push(r);
                stack.push(l);
            }
        }
    }

    pub fn path_from_root(&self, node: usize) -> Result<TreePath> {
        self.node(node)?;
        let mut nodes = vec![node];
        let mut branches = Vec::new();
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            let (l, _) = self.children(p).expect("parents are internal");
            branches.push(if l == cur { Branch::Left } else { Branch::Right });
            nodes.push(p);
            cur = p;
        }
        nodes.reverse();
        branches.reverse();
        Ok(TreePath { nodes, branches })
    }

    /// Number of edges between the root and `node`.
    pub fn depth(&self, node: usize) -> usize {
        let mut d = 0;
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            d += 1;
            cur = p;
        }
        d
    }

    /// Reconstructs the nested document, including labels.
    pub fn to_spec(&self) -> TreeSpec {
        fn go(t: &ParsedTree, i: usize) -> TreeSpec {
            match t.nodes[i].kind {
                NodeKind::Leaf { option } => TreeSpec::Leaf(t.labels[option].clone()),
                NodeKind::Internal { left, right } => TreeSpec::node(go(t, left), go(t, right)),
            }
        }
        go(self, self.root)
    }

    pub(crate) fn layout(&self) -> Vec<NodeKind> {
        self.nodes.iter().map(|n| n.kind).collect()
    }
}

fn build_preorder(
    spec: &TreeSpec,
    parent: Option<usize>,
    nodes: &mut Vec<TreeNode>,
    leaf_labels: &mut Vec<(usize, OptionLabel)>,
) -> usize {
    let id = nodes.len();
    nodes.push(TreeNode { parent, kind: NodeKind::Leaf { option: usize::MAX } });
    match spec {
        TreeSpec::Leaf(label) => leaf_labels.push((id, label.clone())),
        TreeSpec::Node(l, r) => {
            let left = build_preorder(l, Some(id), nodes, leaf_labels);
            let right = build_preorder(r, Some(id), nodes, leaf_labels);
            nodes[id].kind = NodeKind::Internal { left, right };
        }
    }
    id
}
