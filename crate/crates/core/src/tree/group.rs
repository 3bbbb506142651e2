//! Tree isomorphisms generated by child flips.
//!
//! An element is a set `F` of internal nodes whose children are exchanged.
//! It maps the base tree `T` to the image `T_F`, which keeps node indices and
//! lets options travel with their leaves. Every permutation stored here is a
//! gather: applying it to a vector `x` yields `y[k] = x[perm[k]]`, which
//! re-expresses a quantity laid out on `T` in the layout of `T_F`.

use std::collections::BTreeSet;

use super::ParsedTree;
use crate::error::{check_dim, Error, Result};

/// Default limit on the number of internal nodes for which the full flip
/// group is enumerated.
pub const DEFAULT_GROUP_CAP: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeIsomorphism {
    flip_set: BTreeSet<usize>,
    domain: ParsedTree,
    image: ParsedTree,
    node_perm: Vec<usize>,
    option_perm: Vec<usize>,
    state_perm: Vec<usize>,
}

impl TreeIsomorphism {
    pub fn identity(tree: &ParsedTree) -> Self {
        Self::from_flips(tree, std::iter::empty()).expect("empty flip set is always valid")
    }

    pub fn from_flips(tree: &ParsedTree, flips: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut flip_set = BTreeSet::new();
        for i in flips {
            if i >= tree.n_nodes() {
                return Err(Error::UnknownNode(i));
            }
            if tree.is_leaf(i) {
                return Err(Error::LeafFlip(i));
            }
            flip_set.insert(i);
        }
        let image = tree.flipped(&flip_set);

        let mut node_perm = vec![0; tree.n_nodes()];
        for (&a, &b) in tree.df_order().iter().zip(image.df_order()) {
            node_perm[a] = b;
        }

        let mut option_perm = vec![0; tree.n_options()];
        for (&a, &b) in tree.leaf_df_order().iter().zip(image.leaf_df_order()) {
            option_perm[tree.option_of(a).expect("leaf")] = tree.option_of(b).expect("leaf");
        }

        let mut state_perm = vec![0; tree.state_dim()];
        for (k, &j) in image.internal_df_order().iter().enumerate() {
            let r = tree.internal_rank(j).expect("internal");
            let swap = usize::from(flip_set.contains(&j));
            state_perm[2 * k] = 2 * r + swap;
            state_perm[2 * k + 1] = 2 * r + 1 - swap;
        }

        Ok(TreeIsomorphism {
            flip_set,
            domain: tree.clone(),
            image,
            node_perm,
            option_perm,
            state_perm,
        })
    }

    pub fn flip_set(&self) -> &BTreeSet<usize> {
        &self.flip_set
    }

    pub fn is_identity(&self) -> bool {
        self.flip_set.is_empty()
    }

    /// The flipped tree `T_F`.
    pub fn image(&self) -> &ParsedTree {
        &self.image
    }

    pub fn node_perm(&self) -> &[usize] {
        &self.node_perm
    }

    pub fn option_perm(&self) -> &[usize] {
        &self.option_perm
    }

    pub fn state_perm(&self) -> &[usize] {
        &self.state_perm
    }

    /// Whether this element was built for `tree`.
    pub fn acts_on(&self, tree: &ParsedTree) -> bool {
        self.domain.layout() == tree.layout()
    }

    fn check_domain(&self, tree: &ParsedTree) -> Result<()> {
        if self.acts_on(tree) {
            Ok(())
        } else {
            Err(Error::IsomorphismMismatch("tree layout differs from the domain".into()))
        }
    }

    /// Stacked pair state of `T` re-expressed on `T_F`.
    pub fn permute_state(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.state_perm.len(), x.len())?;
        Ok(gather(x, &self.state_perm))
    }

    /// Option vector of length `n_o`, or `n_o + 1` with a trailing
    /// uncommitted entry that is left in place.
    pub fn permute_options(&self, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.option_perm.len();
        if w.len() != n && w.len() != n + 1 {
            return Err(Error::Dimension { expected: n, got: w.len() });
        }
        let mut out = gather(&w[..n], &self.option_perm);
        out.extend_from_slice(&w[n..]);
        Ok(out)
    }

    /// Node-indexed vector re-expressed on `T_F`.
    pub fn permute_nodes(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.node_perm.len(), w.len())?;
        Ok(gather(w, &self.node_perm))
    }

    /// `self` followed by `next`, where `next` acts on `self.image()`.
    /// The result acts on the domain of `self` with flip set `F xor G`.
    /// Stacked states compose as successive gathers; node and option
    /// permutations are always relative to the domain labelling.
    pub fn then(&self, next: &TreeIsomorphism) -> Result<TreeIsomorphism> {
        next.check_domain(&self.image)?;
        let flips = self.flip_set.symmetric_difference(&next.flip_set).copied();
        let out = Self::from_flips(&self.domain, flips)?;
        debug_assert!(next.state_perm.iter().map(|&k| self.state_perm[k]).eq(out.state_perm.iter().copied()));
        Ok(out)
    }

    /// The element acting on `T_F` that returns to `T`.
    pub fn inverse(&self) -> TreeIsomorphism {
        Self::from_flips(&self.image, self.flip_set.iter().copied())
            .expect("flip set is valid on the image")
    }

    /// Checks this element against a tree before it is used.
    pub fn validate_for(&self, tree: &ParsedTree) -> Result<()> {
        self.check_domain(tree)
    }
}

/// The element that exchanges the children of internal node `i`.
pub fn flip(tree: &ParsedTree, i: usize) -> Result<TreeIsomorphism> {
    TreeIsomorphism::from_flips(tree, [i])
}

/// All `2^{n_i}` flip sets, identity first, enumerated by binary counting
/// over the internal nodes in depth-first order.
pub fn enumerate_group(tree: &ParsedTree, cap: usize) -> Result<Vec<TreeIsomorphism>> {
    let n_i = tree.n_internal();
    if n_i > cap || n_i >= usize::BITS as usize {
        return Err(Error::GroupTooLarge { n_internal: n_i, cap });
    }
    let internal = tree.internal_df_order();
    (0..1usize << n_i)
        .map(|mask| {
            let flips = (0..n_i).filter(|b| mask >> b & 1 == 1).map(|b| internal[b]);
            TreeIsomorphism::from_flips(tree, flips)
        })
        .collect()
}

fn gather(x: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&k| x[k]).collect()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn flip_root_of_left_heavy_tree() {
        let t = five_leaf_left_heavy();
        let g = flip(&t, 0).unwrap();
        assert_eq!(g.image().leaf_df_order(), &[7, 8, 3, 4, 5]);
        assert_eq!(g.image().df_order(), &[0, 6, 7, 8, 1, 2, 3, 4, 5]);
        let g = flip(&t, 1).unwrap();
        assert_eq!(g.image().leaf_df_order(), &[5, 3, 4, 7, 8]);
        assert_eq!(g.image().df_order(), &[0, 1, 5, 2, 3, 4, 6, 7, 8]);
    }

    #[test]
    fn flip_rejects_leaves_and_unknown_nodes() {
        let t = four_option();
        assert!(matches!(flip(&t, 2), Err(Error::LeafFlip(2))));
        assert!(matches!(flip(&t, 17), Err(Error::UnknownNode(17))));
    }

    #[test]
    fn four_option_permutations() {
        let t = four_option();
        // Flip at node 1 exchanges options 0 and 1.
        assert_eq!(flip(&t, 1).unwrap().option_perm(), &[1, 0, 2, 3]);
        // Flip at the root exchanges the two pairs.
        assert_eq!(flip(&t, 0).unwrap().option_perm(), &[2, 3, 0, 1]);
        let g = TreeIsomorphism::from_flips(&t, [0, 1]).unwrap();
        assert_eq!(g.option_perm(), &[2, 3, 1, 0]);
        // Root flip: image order of internals is 0, 4, 1.
        assert_eq!(flip(&t, 0).unwrap().state_perm(), &[1, 0, 4, 5, 2, 3]);
    }

    #[test]
    fn group_has_distinct_elements_and_is_closed() {
        for t in [four_option(), five_task(), five_leaf_left_heavy()] {
            let g = enumerate_group(&t, DEFAULT_GROUP_CAP).unwrap();
            assert_eq!(g.len(), 1 << t.n_internal());
            assert!(g[0].is_identity());
            let distinct: HashSet<Vec<usize>> =
                g.iter().map(|e| e.flip_set().iter().copied().collect()).collect();
            assert_eq!(distinct.len(), g.len());
            for a in &g {
                for b in &g {
                    let b_on_image =
                        TreeIsomorphism::from_flips(a.image(), b.flip_set().iter().copied())
                            .unwrap();
                    let ab = a.then(&b_on_image).unwrap();
                    let gathered: Vec<usize> =
                        b_on_image.state_perm().iter().map(|&k| a.state_perm()[k]).collect();
                    assert_eq!(ab.state_perm(), gathered.as_slice());
                    let expected: BTreeSet<usize> =
                        a.flip_set().symmetric_difference(b.flip_set()).copied().collect();
                    assert_eq!(ab.flip_set(), &expected);
                    assert_eq!(ab.image(), b_on_image.image());
                }
                let back = a.then(&a.inverse()).unwrap();
                assert!(back.is_identity());
                assert_eq!(back.state_perm(), TreeIsomorphism::identity(&t).state_perm());
            }
        }
    }

    #[test]
    fn group_cap() {
        let t = ParsedTree::caterpillar(6).unwrap();
        assert!(matches!(enumerate_group(&t, 4), Err(Error::GroupTooLarge { n_internal: 5, cap: 4 })));
    }

    #[test]
    fn composition_requires_matching_domain() {
        let t = five_leaf_left_heavy();
        let a = flip(&t, 0).unwrap();
        let b = flip(&t, 1).unwrap();
        assert!(matches!(a.then(&b), Err(Error::IsomorphismMismatch(_))));
    }

    #[test]
    fn permute_helpers_check_lengths() {
        let t = four_option();
        let g = flip(&t, 0).unwrap();
        assert!(g.permute_state(&[0.0; 5]).is_err());
        assert_eq!(
            g.permute_options(&[0.1, 0.2, 0.3, 0.4, 0.0]).unwrap(),
            vec![0.3, 0.4, 0.1, 0.2, 0.0]
        );
        assert_eq!(g.permute_nodes(&[0., 1., 2., 3., 4., 5., 6.]).unwrap(), vec![0., 4., 5., 6., 1., 2., 3.]);
    }
}
