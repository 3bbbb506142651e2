use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use super::linalg::{classify, eigenvalues, numerical_jacobian, Stability, FD_STEP, TOL_EIG};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub tol_eig: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tol: 1e-12, max_iter: 100, fd_step: FD_STEP, tol_eig: TOL_EIG }
    }
}

/// Refined equilibrium with its linearisation.
#[derive(Clone, Debug, Serialize)]
pub struct Equilibrium {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    #[serde(serialize_with = "ser_complex")]
    pub eigenvalues: Vec<Complex<f64>>,
    pub stability: Stability,
    /// Set when a Newton step met a singular Jacobian and fell back to a
    /// least-squares step.
    pub singular_jacobian: bool,
    /// Residual norm at the guess and after every accepted step.
    pub history: Vec<f64>,
}

fn ser_complex<S: serde::Serializer>(v: &[Complex<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| if x.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

/// Damped Newton iteration for `f(x) = 0`. Each accepted step strictly
/// decreases the infinity norm of `f`; steps are halved until that holds.
/// Without an analytic `jac`, central differences are used.
pub fn find_equilibrium<F, J>(f: F, jac: Option<J>, x_guess: &[f64], cfg: &NewtonConfig) -> Result<Equilibrium>
where
    F: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> DMatrix<f64>,
{
    let jacobian = |x: &[f64]| match &jac {
        Some(j) => j(x),
        None => numerical_jacobian(&f, x, cfg.fd_step),
    };
    let mut x = x_guess.to_vec();
    let mut fx = f(&x);
    let mut res = inf_norm(&fx);
    if !res.is_finite() {
        return Err(Error::NonFinite { t: 0.0, state: x });
    }
    let mut iterations = 0;
    let mut singular = false;
    let mut history = vec![res];
    while res >= cfg.tol {
        if iterations == cfg.max_iter {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        iterations += 1;
        let j = jacobian(&x);
        let rhs = DVector::from_column_slice(&fx);
        let step = match j.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                singular = true;
                j.svd(true, true)
                    .solve(&rhs, 1e-14)
                    .map_err(|_| Error::NoConvergence { iterations, residual: res })?
            }
        };
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - lambda * s).collect();
            let ft = f(&trial);
            let rt = inf_norm(&ft);
            if rt < res {
                x = trial;
                fx = ft;
                res = rt;
                history.push(res);
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err(Error::NoConvergence { iterations, residual: res });
            }
        }
    }
    let eig = eigenvalues(&jacobian(&x))?;
    let stability = classify(&eig, cfg.tol_eig);
    Ok(Equilibrium { x, residual: res, iterations, eigenvalues: eig, stability, singular_jacobian: singular, history })
}
