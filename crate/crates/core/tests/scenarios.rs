use treefork::analysis::{run_scenario, InitialCondition, Scenario};
use treefork::dynamics::{assign_values, project_m, stacked_rhs_into};
use treefork::numerics::{integrate, IntegratorConfig};
use treefork::reduced::{reduced_coordinates, slow_manifold_y};
use treefork::tree::{enumerate_group, ParsedTree, DEFAULT_GROUP_CAP};

const IC: [f64; 6] = [0.2, 0.1, 0.3, 0.2, 0.4, 0.2];

fn final_m(tree: &ParsedTree, values: &[f64], m0: Vec<f64>) -> Vec<f64> {
    let s = Scenario::new(tree.clone(), values.to_vec(), 4.0, InitialCondition::Pairs { m: m0 }).unwrap();
    run_scenario(&s).unwrap().summary.final_m
}

#[test]
fn permuted_initial_conditions_permute_the_outcome() {
    let t = ParsedTree::balanced(4).unwrap();
    let base = final_m(&t, &[5.0; 4], IC.to_vec());
    let base_o = project_m(&t, &base).unwrap().components;
    for g in enumerate_group(&t, DEFAULT_GROUP_CAP).unwrap() {
        let m = final_m(&t, &[5.0; 4], g.permute_state(&IC).unwrap());
        let expected = g.permute_state(&base).unwrap();
        let dev = m.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-8, "{:?}: {dev}", g.flip_set());
        let w = project_m(&t, &m).unwrap();
        assert_eq!(w.components, project_m(&t, &expected).unwrap().components);
        let permuted = g.permute_options(&base_o).unwrap();
        assert!(w.components.iter().zip(&permuted).all(|(a, b)| (a - b).abs() < 1e-8));
    }
}

#[test]
fn scenario_summaries_sit_near_an_equilibrium() {
    let t = ParsedTree::balanced(4).unwrap();
    for (values, ic) in [
        (vec![1.25; 4], InitialCondition::deadlock_perturbed(1)),
        (vec![5.0; 4], InitialCondition::Pairs { m: IC.to_vec() }),
        (vec![100.0, 100.0, 300.0, 100.0], InitialCondition::Pairs { m: IC.to_vec() }),
    ] {
        let s = Scenario::new(t.clone(), values.clone(), 4.0, ic).unwrap();
        let out = run_scenario(&s).unwrap();
        let near = out.summary.nearest_equilibrium.unwrap();
        assert!(near.distance < 1e-3, "{values:?}: {}", near.distance);
    }
}

#[test]
fn large_gain_trajectories_approach_the_slow_manifold() {
    let t = ParsedTree::balanced(2).unwrap();
    let (vbar, alpha, sigma) = (1.0, 0.4, 4.0);
    for k in [50.0, 200.0] {
        let va = assign_values(&t, &[1.2, 0.8]).unwrap().scaled(k);
        let v = va.stacked().to_vec();
        let cfg = IntegratorConfig::adaptive(0.2).with_output_interval(0.01);
        let traj = integrate(|_, m, out| stacked_rhs_into(m, &v, sigma, out), &[0.1, 0.05], &cfg).unwrap();
        // After the fast transient the uncommitted mass follows eps * y(x).
        for m in traj.states.iter().skip(10) {
            let x = reduced_coordinates(m)[0];
            let predicted = slow_manifold_y(x, alpha, vbar, sigma).unwrap() / k;
            let actual = 1.0 - m[0] - m[1];
            assert!((actual - predicted).abs() < 2.0 / (k * k) + 1e-3 / k, "K = {k}: {actual} vs {predicted}");
        }
    }
}
