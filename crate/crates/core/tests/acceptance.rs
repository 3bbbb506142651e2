//! Acceptance suite. Every test prints one `PASS`/`FAIL` line for its
//! criterion before asserting.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use treefork::analysis::audit::random_state;
use treefork::analysis::{
    audit_equivariance, list_equilibria, run_scenario, run_sweep, AuditConfig, AuditMode, EquilibriumMode, InitialCondition,
    Scenario, SweepParameter, SweepSpec,
};
use treefork::dynamics::{assign_values, deadlock_state, m_to_z, project_m, tree_rhs_m};
use treefork::node::{deadlock_eigenvalues, deadlock_mbar, sigma_crit, v_crit};
use treefork::numerics::{eigenvalues, numerical_jacobian, Stability, FD_STEP};
use treefork::reduced::{node_equilibria, reduced_node_rhs, reduced_node_slope};
use treefork::tree::{canonical_form, enumerate_group, ParsedTree, TreeIsomorphism, DEFAULT_GROUP_CAP};

const SIGMA: f64 = 4.0;
const WEAK_PREFERENCE_IC: [f64; 6] = [0.2, 0.1, 0.3, 0.2, 0.4, 0.2];

fn four_option_tree() -> ParsedTree {
    ParsedTree::balanced(4).unwrap()
}

/// Prints the verdict line and returns `ok`.
fn verdict(id: u32, name: &str, ok: bool, detail: &str, elapsed: Duration, limit_s: f64) -> bool {
    let in_time = elapsed.as_secs_f64() < limit_s;
    let pass = ok && in_time;
    println!(
        "criterion {id:>2} {name}: {} ({detail}; {:.3} s of {limit_s} s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

/// The three elements that move option 1 away from its leaf.
fn option_exchanging(tree: &ParsedTree) -> Vec<TreeIsomorphism> {
    [vec![1], vec![0], vec![0, 1]].into_iter().map(|f| TreeIsomorphism::from_flips(tree, f).unwrap()).collect()
}

fn final_projection(tree: &ParsedTree, values: &[f64], m0: Vec<f64>) -> Vec<f64> {
    let s = Scenario::new(tree.clone(), values.to_vec(), SIGMA, InitialCondition::Pairs { m: m0 }).unwrap();
    run_scenario(&s).unwrap().summary.final_projected
}

fn argmax(w: &[f64]) -> usize {
    (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap()
}

#[test]
fn criterion_01_critical_value() {
    let start = Instant::now();
    let t = ParsedTree::balanced(2).unwrap();
    let rep = run_sweep(&t, &SweepSpec::new(SweepParameter::Value, 1.2, 3.0, 200, SIGMA)).unwrap();
    let vstar = rep.crossings.first().and_then(|c| c.value);
    let bracket_ok = rep.crossings.len() == 1 && vstar.is_some_and(|v| (v - 1.9058).abs() <= 1e-3);
    let roundtrip = [0.5, 1.0, 4.0, 10.0]
        .iter()
        .map(|&s| (sigma_crit(v_crit(s).unwrap()).unwrap() - s).abs())
        .fold(0.0, f64::max);
    let ok = bracket_ok && roundtrip <= 1e-10;
    let detail = format!("v* = {vstar:?}, max round-trip error {roundtrip:.1e}");
    assert!(verdict(1, "critical value", ok, &detail, start.elapsed(), 1.0));
}

#[test]
fn criterion_02_deadlock_scenario() {
    let start = Instant::now();
    let mbar = deadlock_mbar(1.25, SIGMA).unwrap();
    let s = Scenario::new(four_option_tree(), vec![1.25; 4], SIGMA, InitialCondition::deadlock_perturbed(1)).unwrap();
    let out = run_scenario(&s).unwrap();
    let err = out.summary.final_projected[..4].iter().map(|c| (c - mbar * mbar).abs()).fold(0.0, f64::max);
    let ok = out.summary.t_final == 100.0 && err < 1e-6;
    let detail = format!("max |m_o_i - mbar^2| = {err:.2e}, mbar^2 = {:.8}", mbar * mbar);
    assert!(verdict(2, "deadlock scenario", ok, &detail, start.elapsed(), 2.0));
}

#[test]
fn criterion_03_post_bifurcation_scenario() {
    let start = Instant::now();
    let t = four_option_tree();
    let base = final_projection(&t, &[5.0; 4], WEAK_PREFERENCE_IC.to_vec());
    let mut ok = argmax(&base[..4]) == 0 && base[0] > 0.9;
    let mut detail = format!("option 1 final commitment {:.4}", base[0]);
    for g in option_exchanging(&t) {
        let w = final_projection(&t, &[5.0; 4], g.permute_state(&WEAK_PREFERENCE_IC).unwrap());
        let expected = g.permute_options(&base).unwrap();
        let dev = w.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let moved = argmax(&w[..4]) == argmax(&expected[..4]) && argmax(&w[..4]) != 0;
        ok &= moved && dev < 1e-8;
        detail.push_str(&format!(", flips {:?} -> option {}", g.flip_set(), argmax(&w[..4]) + 1));
    }
    assert!(verdict(3, "post-bifurcation scenario", ok, &detail, start.elapsed(), 5.0));
}

#[test]
fn criterion_04_singular_scenario() {
    let start = Instant::now();
    let t = four_option_tree();
    let values = [100.0, 100.0, 300.0, 100.0];
    let target = [0.0, 0.0, 1.0, 0.0];
    let mut ics = vec![WEAK_PREFERENCE_IC.to_vec()];
    ics.extend(option_exchanging(&t).iter().map(|g| g.permute_state(&WEAK_PREFERENCE_IC).unwrap()));
    let (mut worst, mut worst_u) = (0.0f64, 0.0f64);
    for ic in ics {
        let w = final_projection(&t, &values, ic);
        worst = worst.max(w[..4].iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        worst_u = worst_u.max(w[4]);
    }
    let ok = worst < 0.05 && worst_u < 0.05;
    let detail = format!("max distance to e3 {worst:.2e}, max uncommitted {worst_u:.2e}");
    assert!(verdict(4, "singular scenario", ok, &detail, start.elapsed(), 5.0));
}

#[test]
fn criterion_05_equivariance_audit() {
    let start = Instant::now();
    let t = four_option_tree();
    let cfg = AuditConfig { trials: 50, ..Default::default() };
    let permuting = audit_equivariance(&t, &[1.0, 2.5, 3.0, 4.0], &cfg).unwrap();
    let fixed = audit_equivariance(&t, &[5.0; 4], &AuditConfig { mode: AuditMode::Fixed, ..cfg }).unwrap();
    let worst = permuting.max_m_residual.max(permuting.max_z_residual).max(fixed.max_m_residual).max(fixed.max_z_residual);
    let ok = permuting.group_size == 8 && fixed.group_size == 8 && worst < 1e-12 && !fixed.broken_symmetry;
    let detail = format!("8 elements x 50 states, max residual {worst:.1e}");
    assert!(verdict(5, "equivariance audit", ok, &detail, start.elapsed(), 1.0));
}

#[test]
fn criterion_06_jacobian_structure() {
    let start = Instant::now();
    let t = four_option_tree();
    let mut ok = true;
    let mut worst_block = 0.0f64;
    let mut worst_eig = 0.0f64;
    for v in [1.25, 5.0] {
        let va = assign_values(&t, &[v; 4]).unwrap();
        let m = deadlock_state(&va, SIGMA).unwrap();
        let j = numerical_jacobian(|x| tree_rhs_m(&t, x, &va, SIGMA).unwrap(), &m, FD_STEP);
        for r in 0..6 {
            for c in 0..6 {
                if r / 2 != c / 2 {
                    worst_block = worst_block.max(j[(r, c)].abs());
                }
            }
        }
        let (l1, l2) = deadlock_eigenvalues(v, SIGMA).unwrap();
        let eig = eigenvalues(&j).unwrap();
        let mut expected = vec![l1, l1, l1, l2, l2, l2];
        expected.sort_by(|a, b| b.total_cmp(a));
        for (z, e) in eig.iter().zip(&expected) {
            worst_eig = worst_eig.max((z.re - e).abs()).max(z.im.abs());
        }
        ok &= eig.len() == 6;
    }
    ok &= worst_block < 1e-8 && worst_eig < 1e-8;
    let detail = format!("off-block max {worst_block:.1e}, spectrum error {worst_eig:.1e}");
    assert!(verdict(6, "Jacobian structure", ok, &detail, start.elapsed(), 1.0));
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    while b - a > 1e-15 {
        let c = 0.5 * (a + b);
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    0.5 * (a + b)
}

#[test]
fn criterion_07_reduced_oracle() {
    let start = Instant::now();
    let t = four_option_tree();
    let mut ok = true;
    let mut worst = 0.0f64;
    for k in 0..41 {
        let alpha = -2.0 + 0.1 * k as f64;
        for vbar in assign_values(&t, &[1.0, 2.0, 3.0, 5.0]).unwrap().vbars() {
            let f = |x: f64| reduced_node_rhs(x, alpha, vbar, SIGMA).unwrap();
            let mut roots: Vec<f64> = [-1.0, 1.0].into_iter().filter(|&x| f(x) == 0.0).collect();
            let n = 4000;
            for i in 0..n {
                let (a, b) = (-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * (i + 1) as f64 / n as f64);
                let (a, b) = (a.max(-1.0 + 1e-12), b.min(1.0 - 1e-12));
                if f(a) == 0.0 {
                    roots.push(a);
                } else if f(a).signum() != f(b).signum() && f(b) != 0.0 {
                    roots.push(bisect(f, a, b));
                }
            }
            roots.sort_by(f64::total_cmp);
            roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            let mut expected = vec![-1.0, 1.0];
            if alpha.abs() <= 2.0 / 3.0 {
                expected.push(-1.5 * alpha);
            }
            expected.sort_by(f64::total_cmp);
            ok &= roots.len() == expected.len();
            for (r, e) in roots.iter().zip(&expected) {
                worst = worst.max((r - e).abs());
            }
            for (x, _, stability) in node_equilibria(alpha) {
                let slope = reduced_node_slope(x, alpha, vbar, SIGMA).unwrap();
                let by_sign = if slope < 0.0 { Stability::Stable } else { Stability::Unstable };
                ok &= stability == by_sign;
            }
        }
    }
    ok &= worst <= 1e-10;
    let detail = format!("41 values of alpha, max root error {worst:.1e}");
    assert!(verdict(7, "reduced-model oracle", ok, &detail, start.elapsed(), 1.0));
}

#[test]
fn criterion_08_full_reduced_convergence() {
    let start = Instant::now();
    let t = ParsedTree::balanced(2).unwrap();
    let mut gaps = Vec::new();
    for k in [50.0, 100.0, 200.0] {
        let rows = list_equilibria(&t, &[1.2, 0.8], SIGMA, EquilibriumMode::Full, k).unwrap();
        let row = rows.iter().find(|r| r.reduced_x[0] == 1.0).unwrap();
        assert_eq!(row.full_stability, Some(Stability::Stable));
        gaps.push((k, row.gap.unwrap()));
    }
    let bounded = gaps.iter().all(|&(k, g)| g <= 1.0 / k);
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let ok = bounded && ratios.iter().all(|r| (r - 2.0).abs() <= 0.3);
    let detail = format!("gaps {:?}, ratios {ratios:.3?}", gaps.iter().map(|g| g.1).collect::<Vec<_>>());
    assert!(verdict(8, "full/reduced convergence", ok, &detail, start.elapsed(), 2.0));
}

/// Uncommitted mass summed node by node, independent of the option sum.
fn uncommitted_mass(tree: &ParsedTree, m: &[f64]) -> f64 {
    let z = m_to_z(tree, m).unwrap();
    tree.internal_df_order()
        .iter()
        .enumerate()
        .map(|(r, &j)| z.per_node[j] * (1.0 - m[2 * r] - m[2 * r + 1]))
        .sum()
}

#[test]
fn criterion_09_simplex_invariance() {
    let start = Instant::now();
    let t = four_option_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut min_comp, mut max_sum_err) = (f64::INFINITY, 0.0f64);
    let mut runs = 0;
    for v in [1.25, 5.0] {
        for _ in 0..100 {
            let m0 = random_state(&mut rng, t.n_internal());
            let s = Scenario::new(t.clone(), vec![v; 4], SIGMA, InitialCondition::Pairs { m: m0 }).unwrap();
            let out = run_scenario(&s).unwrap();
            for m in &out.trajectory.states {
                let w = project_m(&t, m).unwrap();
                min_comp = w.options().iter().fold(min_comp, |a, &c| a.min(c));
                let total: f64 = w.options().iter().sum::<f64>() + uncommitted_mass(&t, m);
                max_sum_err = max_sum_err.max((total - 1.0).abs());
                min_comp = min_comp.min(uncommitted_mass(&t, m));
            }
            runs += 1;
        }
    }
    let ok = min_comp >= -1e-9 && max_sum_err <= 1e-9;
    let detail = format!("{runs} runs, min component {min_comp:.2e}, max |sum - 1| {max_sum_err:.1e}");
    assert!(verdict(9, "simplex invariance", ok, &detail, start.elapsed(), 30.0));
}

#[test]
fn criterion_10_group_suite() {
    let start = Instant::now();
    let mut ok = true;
    let mut checked = 0;
    for n_i in 1..=6 {
        for tree in [ParsedTree::balanced(n_i + 1).unwrap(), ParsedTree::caterpillar(n_i + 1).unwrap()] {
            let group = enumerate_group(&tree, DEFAULT_GROUP_CAP).unwrap();
            ok &= group.len() == 1 << n_i;
            let canon = canonical_form(&tree);
            ok &= group.iter().all(|g| canonical_form(g.image()) == canon);
            for g in &group {
                for h in &group {
                    let h_on_image = TreeIsomorphism::from_flips(g.image(), h.flip_set().iter().copied()).unwrap();
                    let gh = g.then(&h_on_image).unwrap();
                    let member = group.iter().find(|k| k.flip_set() == gh.flip_set());
                    ok &= member.is_some_and(|k| k.state_perm() == gh.state_perm() && k.image() == gh.image());
                    let composed: Vec<usize> = h_on_image.state_perm().iter().map(|&k| g.state_perm()[k]).collect();
                    ok &= composed == gh.state_perm();
                }
            }
            checked += 1;
        }
    }
    let detail = format!("{checked} trees with 1 to 6 internal nodes");
    assert!(verdict(10, "group and isomorphism suite", ok, &detail, start.elapsed(), 1.0));
}
