//! Canonical bracket strings for unordered rooted binary trees.
//!
//! Codes are assigned level by level from the deepest level up. A node's key is
//! the sorted pair of its children's codes (leaves share the smallest key), and
//! each level is ranked with a two-pass counting sort, so the whole procedure
//! is linear in the number of nodes.

use super::ParsedTree;

/// Bracket string that is equal for two trees exactly when they are
/// isomorphic as unordered rooted trees. Leaves render as `()`.
pub fn canonical_form(tree: &ParsedTree) -> String {
    let n = tree.n_nodes();
    let mut levels: Vec<Vec<usize>> = vec![vec![tree.root()]];
    loop {
        let next: Vec<usize> = levels
            .last()
            .expect("non-empty")
            .iter()
            .filter_map(|&i| tree.children(i))
            .flat_map(|(l, r)| [l, r])
            .collect();
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }

    let mut code = vec![0usize; n];
    let mut width_below = 0;
    for level in levels.iter().rev() {
        // Key 0 is the leaf; internal keys are 1 + child code.
        let keys: Vec<(usize, usize)> = level
            .iter()
            .map(|&i| match tree.children(i) {
                None => (0, 0),
                Some((l, r)) => {
                    let (a, b) = (code[l], code[r]);
                    (1 + a.min(b), 1 + a.max(b))
                }
            })
            .collect();
        let radix = width_below + 1;
        let by_second = counting_sort((0..level.len()).collect(), |k| keys[k].1, radix);
        let order = counting_sort(by_second, |k| keys[k].0, radix);
        let mut rank = 0;
        for (pos, &k) in order.iter().enumerate() {
            if pos > 0 && keys[k] != keys[order[pos - 1]] {
                rank += 1;
            }
            code[level[k]] = rank;
        }
        width_below = rank + 1;
    }

    let mut out = String::with_capacity(2 * n);
    enum Visit {
        Open(usize),
        Close,
    }
    let mut stack = vec![Visit::Open(tree.root())];
    while let Some(v) = stack.pop() {
        match v {
            Visit::Close => out.push(')'),
            Visit::Open(i) => {
                out.push('(');
                stack.push(Visit::Close);
                if let Some((l, r)) = tree.children(i) {
                    let (first, second) = if code[l] <= code[r] { (l, r) } else { (r, l) };
                    stack.push(Visit::Open(second));
                    stack.push(Visit::Open(first));
                }
            }
        }
    }
    out
}

fn counting_sort(items: Vec<usize>, key: impl Fn(usize) -> usize, radix: usize) -> Vec<usize> {
    let mut counts = vec![0usize; radix + 1];
    for &it in &items {
        counts[key(it) + 1] += 1;
    }
    for k in 1..counts.len() {
        counts[k] += counts[k - 1];
    }
    let mut out = vec![0; items.len()];
    for &it in &items {
        let slot = &mut counts[key(it)];
        out[*slot] = it;
        *slot += 1;
    }
    out
}
