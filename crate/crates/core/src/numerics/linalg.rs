use nalgebra::{Complex, DMatrix, Schur};
use serde::Serialize;

use crate::error::{Error, Result};

/// Default tolerance on eigenvalue real parts for stability decisions.
pub const TOL_EIG: f64 = 1e-8;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
    NonHyperbolic,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::NonHyperbolic => "non-hyperbolic",
        }
    }

    /// Combines component classifications: any unstable component makes the
    /// whole unstable, otherwise any non-hyperbolic one makes it non-hyperbolic.
    pub fn combine(items: impl IntoIterator<Item = Stability>) -> Stability {
        items.into_iter().fold(Stability::Stable, |acc, s| match (acc, s) {
            (Stability::Unstable, _) | (_, Stability::Unstable) => Stability::Unstable,
            (Stability::NonHyperbolic, _) | (_, Stability::NonHyperbolic) => Stability::NonHyperbolic,
            _ => Stability::Stable,
        })
    }
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Central-difference Jacobian of `f` at `x`.
pub fn numerical_jacobian<F>(mut f: F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for c in 0..n {
        xp[c] = x[c] + h;
        let fp = f(&xp);
        xp[c] = x[c] - h;
        let fm = f(&xp);
        xp[c] = x[c];
        for r in 0..m {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}

/// Full complex spectrum of a square matrix, sorted by decreasing real part.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen(n));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * n).ok_or(Error::Eigen(n))?;
    let mut eig: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(eig)
}

pub fn classify(eig: &[Complex<f64>], tol: f64) -> Stability {
    let lead = leading_real_part(eig);
    if lead > tol {
        Stability::Unstable
    } else if lead < -tol {
        Stability::Stable
    } else {
        Stability::NonHyperbolic
    }
}

pub fn leading_real_part(eig: &[Complex<f64>]) -> f64 {
    eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}
