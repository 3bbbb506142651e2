//! Grid sweeps of equilibria over a common option value or over `sigma`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{assign_values, deadlock_state, tree_jacobian_m, tree_rhs_m};
use crate::error::{Error, Result};
use crate::numerics::{find_equilibrium, leading_real_part, Equilibrium, NewtonConfig, Stability};
use crate::tree::ParsedTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    /// Every option takes the same value `v`.
    Value,
    Sigma,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::Value => "v",
            SweepParameter::Sigma => "sigma",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub start: f64,
    pub end: f64,
    pub points: usize,
    /// The parameter that is held fixed: `sigma` for value sweeps, the
    /// common value for sigma sweeps.
    pub fixed: f64,
    /// Extra Newton seeds used at every grid point, each a stacked state.
    /// The deadlock state is always the first seed.
    #[serde(default)]
    pub seeds: Vec<Vec<f64>>,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, start: f64, end: f64, points: usize, fixed: f64) -> Self {
        SweepSpec { parameter, start, end, points, fixed, seeds: Vec::new() }
    }

    pub fn validate(&self, tree: &ParsedTree) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.start) && pos(self.end) && pos(self.fixed)) || self.start == self.end {
            return Err(Error::InvalidInput("sweep range and fixed parameter must be positive and distinct".into()));
        }
        if self.points < 2 {
            return Err(Error::InvalidInput(format!("a sweep needs at least 2 points, got {}", self.points)));
        }
        for s in &self.seeds {
            if s.len() != tree.state_dim() {
                return Err(Error::Dimension { expected: tree.state_dim(), got: s.len() });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..=n).map(|k| self.start + (self.end - self.start) * k as f64 / n as f64).collect()
    }

    fn values_and_sigma(&self, tree: &ParsedTree, p: f64) -> (Vec<f64>, f64) {
        match self.parameter {
            SweepParameter::Value => (vec![p; tree.n_options()], self.fixed),
            SweepParameter::Sigma => (vec![self.fixed; tree.n_options()], p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: f64,
    /// Index of the seed that started this branch; 0 is the deadlock.
    pub branch: usize,
    pub m: Vec<f64>,
    pub stability: Stability,
    pub leading_real: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Crossing {
    pub branch: usize,
    pub lower: f64,
    pub upper: f64,
    /// Parameter at which the leading real part vanishes, when the
    /// refinement converged.
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LostBranch {
    pub branch: usize,
    /// Last parameter at which the branch was tracked.
    pub last_parameter: Option<f64>,
    pub at_parameter: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    pub crossings: Vec<Crossing>,
    pub lost: Vec<LostBranch>,
}

struct Solver<'a> {
    tree: &'a ParsedTree,
    spec: &'a SweepSpec,
    cfg: NewtonConfig,
}

impl Solver<'_> {
    fn solve(&self, p: f64, seed: &[f64]) -> Result<Equilibrium> {
        let (vals, sigma) = self.spec.values_and_sigma(self.tree, p);
        let va = assign_values(self.tree, &vals)?;
        let tree = self.tree;
        let f = |m: &[f64]| tree_rhs_m(tree, m, &va, sigma).unwrap_or_else(|_| vec![f64::NAN; m.len()]);
        let j = |m: &[f64]| tree_jacobian_m(tree, m, &va, sigma).expect("dimension checked");
        find_equilibrium(f, Some(j), seed, &self.cfg)
    }

    fn deadlock(&self, p: f64) -> Result<Vec<f64>> {
        let (vals, sigma) = self.spec.values_and_sigma(self.tree, p);
        deadlock_state(&assign_values(self.tree, &vals)?, sigma)
    }

    fn leading(&self, p: f64, seed: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.solve(p, seed).ok().map(|e| (leading_real_part(&e.eigenvalues), e.x))
    }
}

/// Solves every grid point from every seed in parallel, repairs failed
/// points from the neighbouring solution of the same branch, and brackets
/// sign changes of the leading eigenvalue real part along each branch.
pub fn run_sweep(tree: &ParsedTree, spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate(tree)?;
    let solver = Solver { tree, spec, cfg: NewtonConfig::default() };
    let grid = spec.grid();
    let n_branches = 1 + spec.seeds.len();
    let seeds_at = |p: f64| -> Result<Vec<Vec<f64>>> {
        let mut s = vec![solver.deadlock(p)?];
        s.extend(spec.seeds.iter().cloned());
        Ok(s)
    };
    let mut table: Vec<Vec<Option<Equilibrium>>> = grid
        .par_iter()
        .map(|&p| -> Result<Vec<Option<Equilibrium>>> {
            Ok(seeds_at(p)?.iter().map(|s| solver.solve(p, s).ok()).collect())
        })
        .collect::<Result<_>>()?;

    let mut lost = Vec::new();
    for b in 0..n_branches {
        let mut last: Option<usize> = None;
        for k in 0..grid.len() {
            if table[k][b].is_none() {
                if let Some(prev) = last {
                    let seed = table[prev][b].as_ref().expect("tracked").x.clone();
                    table[k][b] = solver.solve(grid[k], &seed).ok();
                }
            }
            match &table[k][b] {
                Some(_) => last = Some(k),
                None => lost.push(LostBranch {
                    branch: b,
                    last_parameter: last.map(|i| grid[i]),
                    at_parameter: grid[k],
                    reason: "Newton iteration did not converge".into(),
                }),
            }
        }
    }

    let mut rows = Vec::new();
    for (k, &p) in grid.iter().enumerate() {
        for (b, eq) in table[k].iter().enumerate() {
            if let Some(e) = eq {
                rows.push(SweepRow {
                    parameter: p,
                    branch: b,
                    m: e.x.clone(),
                    stability: e.stability,
                    leading_real: leading_real_part(&e.eigenvalues),
                });
            }
        }
    }

    let mut crossings = Vec::new();
    for b in 0..n_branches {
        for k in 0..grid.len() - 1 {
            let (Some(e0), Some(e1)) = (&table[k][b], &table[k + 1][b]) else { continue };
            let (g0, g1) = (leading_real_part(&e0.eigenvalues), leading_real_part(&e1.eigenvalues));
            if g0 == 0.0 || g0.signum() != g1.signum() {
                let value = refine_crossing(&solver, (grid[k], g0, e0.x.clone()), (grid[k + 1], g1));
                crossings.push(Crossing { branch: b, lower: grid[k], upper: grid[k + 1], value });
            }
        }
    }
    Ok(SweepReport { parameter: spec.parameter, rows, crossings, lost })
}

/// Illinois iteration on the leading real part between two bracketing
/// grid points.
fn refine_crossing(solver: &Solver, lo: (f64, f64, Vec<f64>), hi: (f64, f64)) -> Option<f64> {
    let (mut a, mut fa, mut seed) = lo;
    let (mut b, mut fb) = hi;
    if fa == 0.0 {
        return Some(a);
    }
    let mut side = 0i8;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        if (b - a).abs() <= 1e-13 * a.abs().max(b.abs()) {
            return Some(c);
        }
        let (fc, x) = solver.leading(c, &seed)?;
        seed = x;
        if fc == 0.0 {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if fc.abs() < 1e-14 {
            return Some(c);
        }
    }
    None
}
