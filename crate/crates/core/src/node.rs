//! Two-option value-sensitive decision primitive.
//!
//! A node holds commitments `(m1, m2)` to its two alternatives with the
//! uncommitted fraction `m_U = 1 - m1 - m2`. Commitment to alternative `i`
//! grows with its value `v_i`, decays at rate `1/v_i`, is recruited from the
//! committed population at rate `v_i m_i m_U`, and is inhibited by the other
//! alternative at rate `sigma m_i m_j`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodePair {
    pub m1: f64,
    pub m2: f64,
}

impl NodePair {
    pub fn new(m1: f64, m2: f64) -> Self {
        NodePair { m1, m2 }
    }

    pub fn uncommitted(&self) -> f64 {
        1.0 - (self.m1 + self.m2)
    }

    pub fn swapped(&self) -> Self {
        NodePair { m1: self.m2, m2: self.m1 }
    }

    /// Largest amount by which the pair leaves the closed 2-simplex.
    pub fn simplex_violation(&self) -> f64 {
        (-self.m1).max(-self.m2).max(self.m1 + self.m2 - 1.0).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeValues {
    pub v1: f64,
    pub v2: f64,
    pub sigma: f64,
}

impl NodeValues {
    pub fn new(v1: f64, v2: f64, sigma: f64) -> Result<Self> {
        let out = NodeValues { v1, v2, sigma };
        out.validate()?;
        Ok(out)
    }

    pub fn symmetric(v: f64, sigma: f64) -> Result<Self> {
        Self::new(v, v, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("v1", self.v1), ("v2", self.v2), ("sigma", self.sigma)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {x}")));
            }
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        NodeValues { v1: self.v2, v2: self.v1, sigma: self.sigma }
    }
}

/// Rates `(dm1/dt, dm2/dt)` without input validation.
#[inline]
pub fn seeley_rate(m1: f64, m2: f64, v1: f64, v2: f64, sigma: f64) -> [f64; 2] {
    let mu = 1.0 - (m1 + m2);
    [
        v1 * mu - m1 * (1.0 / v1 - v1 * mu + sigma * m2),
        v2 * mu - m2 * (1.0 / v2 - v2 * mu + sigma * m1),
    ]
}

pub fn seeley_rhs(state: NodePair, values: &NodeValues) -> Result<[f64; 2]> {
    values.validate()?;
    if !(state.m1.is_finite() && state.m2.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite node state {state:?}")));
    }
    Ok(seeley_rate(state.m1, state.m2, values.v1, values.v2, values.sigma))
}

/// Analytic Jacobian of [`seeley_rate`] with respect to `(m1, m2)`.
#[inline]
pub fn seeley_jacobian(m1: f64, m2: f64, v1: f64, v2: f64, sigma: f64) -> [[f64; 2]; 2] {
    let mu = 1.0 - (m1 + m2);
    [
        [-1.0 / v1 - v1 * (1.0 + m1) + v1 * mu - sigma * m2, -v1 * (1.0 + m1) - sigma * m1],
        [-v2 * (1.0 + m2) - sigma * m2, -1.0 / v2 - v2 * (1.0 + m2) + v2 * mu - sigma * m1],
    ]
}

pub fn node_jacobian(state: NodePair, values: &NodeValues) -> Result<[[f64; 2]; 2]> {
    values.validate()?;
    Ok(seeley_jacobian(state.m1, state.m2, values.v1, values.v2, values.sigma))
}

/// Critical cross-inhibition `4 v^3 / (v^2 - 1)^2` at which the deadlock of a
/// symmetric node loses stability.
pub fn sigma_crit(v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 1.0) {
        return Err(Error::InvalidInput(format!("sigma_crit needs v > 1, got {v}")));
    }
    let d = v * v - 1.0;
    Ok(4.0 * v.powi(3) / (d * d))
}

fn sigma_crit_dv(v: f64) -> f64 {
    let d = v * v - 1.0;
    -4.0 * v * v * (v * v + 3.0) / d.powi(3)
}

const V_CRIT_LO: f64 = 1.0 + 1e-9;
const V_CRIT_HI: f64 = 1e3;

/// The unique `v > 1` with `sigma_crit(v) = sigma`, by bisection followed by a
/// Newton polish.
pub fn v_crit(sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
    }
    let g = |v: f64| sigma_crit(v).expect("v > 1") - sigma;
    let (mut lo, mut hi) = (V_CRIT_LO, V_CRIT_HI);
    if g(lo) < 0.0 || g(hi) > 0.0 {
        return Err(Error::NoBracket(format!(
            "sigma = {sigma} outside sigma_crit([{lo}, {hi}])"
        )));
    }
    // sigma_crit is decreasing, so g(lo) >= 0 >= g(hi).
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..4 {
        let step = g(v) / sigma_crit_dv(v);
        let next = v - step;
        if !(next > V_CRIT_LO && next.is_finite()) {
            break;
        }
        v = next;
        if step.abs() <= 1e-16 * v {
            break;
        }
    }
    Ok(v)
}

/// Symmetric deadlock commitment `m` with `(m, m)` an equilibrium for equal
/// values `v`.
pub fn deadlock_mbar(v: f64, sigma: f64) -> Result<f64> {
    NodeValues::symmetric(v, sigma)?;
    let v2 = v * v;
    let disc = 1.0 + 2.0 * v2 + 4.0 * sigma * v * v2 + 9.0 * v2 * v2;
    Ok((-(1.0 + v2) + disc.sqrt()) / (2.0 * v * (2.0 * v + sigma)))
}

/// Eigenvalues `(lambda_1, lambda_2)` of the node Jacobian at the symmetric
/// deadlock. `lambda_1` belongs to the antisymmetric direction `(1, -1)`.
pub fn deadlock_eigenvalues(v: f64, sigma: f64) -> Result<(f64, f64)> {
    let m = deadlock_mbar(v, sigma)?;
    let v2 = v * v;
    let l1 = (-2.0 * m * v2 + v2 - 1.0) / v;
    let l2 = (-4.0 * m * v2 - 2.0 * m * sigma * v - v2 - 1.0) / v;
    Ok((l1, l2))
}

/// Mean-difference coordinates of a node state and its values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanDiff {
    pub dm: f64,
    pub mbar: f64,
    pub dv: f64,
    pub vbar: f64,
}

impl MeanDiff {
    /// Relative value difference `dv / vbar`.
    pub fn alpha(&self) -> f64 {
        self.dv / self.vbar
    }
}

pub fn to_mean_diff(state: NodePair, values: &NodeValues) -> MeanDiff {
    MeanDiff {
        dm: state.m1 - state.m2,
        mbar: 0.5 * (state.m1 + state.m2),
        dv: values.v1 - values.v2,
        vbar: 0.5 * (values.v1 + values.v2),
    }
}

pub fn from_mean_diff(md: MeanDiff, sigma: f64) -> Result<(NodePair, NodeValues)> {
    let state = NodePair { m1: md.mbar + 0.5 * md.dm, m2: md.mbar - 0.5 * md.dm };
    let values = NodeValues::new(md.vbar + 0.5 * md.dv, md.vbar - 0.5 * md.dv, sigma)?;
    let slack = 4.0 * f64::EPSILON;
    if !(state.m1.is_finite() && state.m2.is_finite()) || state.simplex_violation() > slack {
        return Err(Error::InvalidInput(format!("state {state:?} lies outside the 2-simplex")));
    }
    Ok((state, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rhs_examples() {
        let m = deadlock_mbar(1.25, 4.0).unwrap();
        let vals = NodeValues::symmetric(1.25, 4.0).unwrap();
        let r = seeley_rhs(NodePair::new(m, m), &vals).unwrap();
        assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12);

        let r = seeley_rhs(NodePair::new(0.0, 0.0), &NodeValues::symmetric(3.0, 4.0).unwrap())
            .unwrap();
        assert_eq!(r, [3.0, 3.0]);

        let r = seeley_rhs(NodePair::new(0.3, 0.3), &vals).unwrap();
        assert_eq!(r[0], r[1]);
        assert!(close(r[0], 0.05, 1e-12), "{r:?}");
    }

    #[test]
    fn rhs_rejects_bad_values() {
        assert!(NodeValues::new(0.0, 1.0, 4.0).is_err());
        assert!(NodeValues::new(1.0, f64::NAN, 4.0).is_err());
        let bad = NodeValues { v1: -1.0, v2: 1.0, sigma: 1.0 };
        assert!(seeley_rhs(NodePair::new(0.1, 0.1), &bad).is_err());
        let ok = NodeValues::symmetric(1.0, 1.0).unwrap();
        assert!(seeley_rhs(NodePair::new(f64::INFINITY, 0.1), &ok).is_err());
    }

    #[test]
    fn critical_surface() {
        assert!(close(sigma_crit(2.0).unwrap(), 32.0 / 9.0, 1e-14));
        assert!(sigma_crit(1.0).is_err());
        assert!(sigma_crit(1.0 + 1e-6).unwrap() > 1e10);
        assert!(close(v_crit(32.0 / 9.0).unwrap(), 2.0, 1e-12));
        assert!(close(v_crit(4.0).unwrap(), 1.9051661677540188, 1e-12));
        for s in [0.5, 1.0, 4.0, 10.0] {
            let v = v_crit(s).unwrap();
            assert!(close(sigma_crit(v).unwrap(), s, 1e-10 * s));
        }
        assert!(matches!(v_crit(1e-4), Err(Error::NoBracket(_))));
        assert!(v_crit(-1.0).is_err());
    }

    #[test]
    fn deadlock_values() {
        assert!(close(deadlock_mbar(1.25, 4.0).unwrap(), 0.30832760198218007, 1e-14));
        assert!(close(deadlock_mbar(5.0, 4.0).unwrap(), 0.4400913175374146, 1e-14));
        assert!(deadlock_mbar(0.0, 4.0).is_err());
        let mut prev = 0.0;
        for k in 0..=900 {
            let v = 1.0 + k as f64 * 0.01;
            let m = deadlock_mbar(v, 4.0).unwrap();
            assert!(m > prev && m < 0.5);
            prev = m;
        }
    }

    #[test]
    fn deadlock_spectrum_matches_jacobian() {
        for (v, s) in [(1.25, 4.0), (5.0, 4.0), (2.0, 0.5)] {
            let m = deadlock_mbar(v, s).unwrap();
            let j = seeley_jacobian(m, m, v, v, s);
            assert_eq!(j[0][0], j[1][1]);
            assert_eq!(j[0][1], j[1][0]);
            let (l1, l2) = deadlock_eigenvalues(v, s).unwrap();
            assert!(close(j[0][0] - j[0][1], l1, 1e-12));
            assert!(close(j[0][0] + j[0][1], l2, 1e-12));
        }
        let (l1, _) = deadlock_eigenvalues(v_crit(4.0).unwrap(), 4.0).unwrap();
        assert!(l1.abs() < 1e-8);
    }

    #[test]
    fn lambda1_changes_sign_once() {
        let vstar = v_crit(4.0).unwrap();
        let grid: Vec<f64> = (1..=9000).map(|k| 1.0 + k as f64 * 1e-3).collect();
        let signs: Vec<bool> =
            grid.iter().map(|&v| deadlock_eigenvalues(v, 4.0).unwrap().0 > 0.0).collect();
        let changes: Vec<usize> = (1..signs.len()).filter(|&k| signs[k] != signs[k - 1]).collect();
        assert_eq!(changes.len(), 1);
        let k = changes[0];
        assert!(grid[k - 1] <= vstar && vstar <= grid[k]);
    }

    #[test]
    fn mean_diff_examples() {
        let vals = NodeValues::new(3.0, 1.0, 4.0).unwrap();
        let md = to_mean_diff(NodePair::new(0.4, 0.2), &vals);
        assert!(close(md.dm, 0.2, 1e-15) && close(md.mbar, 0.3, 1e-15));
        assert_eq!((md.dv, md.vbar, md.alpha()), (2.0, 2.0, 1.0));
        assert_eq!(to_mean_diff(NodePair::new(0.25, 0.25), &vals).dm, 0.0);
        let bad = MeanDiff { dm: 0.9, mbar: 0.1, dv: 0.0, vbar: 1.0 };
        assert!(from_mean_diff(bad, 4.0).is_err());
        let bad = MeanDiff { dm: 0.0, mbar: 0.1, dv: 4.0, vbar: 1.0 };
        assert!(from_mean_diff(bad, 4.0).is_err());
    }

    fn simplex_point() -> impl Strategy<Value = NodePair> {
        (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| {
            if a + b <= 1.0 {
                NodePair::new(a, b)
            } else {
                NodePair::new(1.0 - a, 1.0 - b)
            }
        })
    }

    proptest! {
        #[test]
        fn swap_equivariance_is_exact(
            m in simplex_point(), v1 in 0.05..20.0f64, v2 in 0.05..20.0f64, s in 0.01..20.0f64
        ) {
            let vals = NodeValues::new(v1, v2, s).unwrap();
            let r = seeley_rhs(m, &vals).unwrap();
            let rs = seeley_rhs(m.swapped(), &vals.swapped()).unwrap();
            prop_assert_eq!(rs, [r[1], r[0]]);
        }

        #[test]
        fn jacobian_matches_central_differences(
            m in simplex_point(), v1 in 0.2..8.0f64, v2 in 0.2..8.0f64, s in 0.1..8.0f64
        ) {
            let j = seeley_jacobian(m.m1, m.m2, v1, v2, s);
            let h = 1e-6;
            for c in 0..2 {
                let (mut p, mut q) = ([m.m1, m.m2], [m.m1, m.m2]);
                p[c] += h;
                q[c] -= h;
                let fp = seeley_rate(p[0], p[1], v1, v2, s);
                let fq = seeley_rate(q[0], q[1], v1, v2, s);
                for r in 0..2 {
                    let fd = (fp[r] - fq[r]) / (2.0 * h);
                    prop_assert!((fd - j[r][c]).abs() < 1e-6, "J[{}][{}] = {} vs {}", r, c, j[r][c], fd);
                }
            }
        }

        #[test]
        fn mean_diff_round_trip(
            m in simplex_point(), v1 in 0.05..20.0f64, v2 in 0.05..20.0f64
        ) {
            let vals = NodeValues::new(v1, v2, 4.0).unwrap();
            let (back, bv) = from_mean_diff(to_mean_diff(m, &vals), 4.0).unwrap();
            prop_assert!((back.m1 - m.m1).abs() < 1e-14 && (back.m2 - m.m2).abs() < 1e-14);
            prop_assert!((bv.v1 - v1).abs() < 1e-14 * v1.max(v2) && (bv.v2 - v2).abs() < 1e-14 * v1.max(v2));
        }

        #[test]
        fn boundary_face_points_inward(t in 0.0..1.0f64, v1 in 0.05..20.0f64, v2 in 0.05..20.0f64, s in 0.01..20.0f64) {
            // On m_U = 0 the uncommitted rate -(f1 + f2) is non-negative, and on
            // m_i = 0 the rate of m_i is non-negative.
            let f = seeley_rate(t, 1.0 - t, v1, v2, s);
            prop_assert!(-(f[0] + f[1]) >= -1e-12);
            let f = seeley_rate(0.0, t, v1, v2, s);
            prop_assert!(f[0] >= 0.0);
        }
    }
}
