//! Explicit Runge-Kutta integration of autonomous or time-dependent fields.

use serde::Serialize;

use crate::dynamics::simplex_violation;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4 { h: f64 },
    /// Dormand-Prince 5(4) with local error control.
    Dopri5 { rtol: f64, atol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_final: f64,
    /// Time between stored samples; `None` stores every step.
    pub output_interval: Option<f64>,
    /// When set, every accepted state is checked pairwise against the
    /// 2-simplex with this slack.
    pub simplex_slack: Option<f64>,
    pub max_steps: usize,
}

impl IntegratorConfig {
    /// Adaptive defaults used for scenario runs.
    pub fn adaptive(t_final: f64) -> Self {
        IntegratorConfig {
            method: Method::Dopri5 { rtol: 1e-8, atol: 1e-10 },
            t_final,
            output_interval: None,
            simplex_slack: None,
            max_steps: 10_000_000,
        }
    }

    /// Fixed-step defaults used where bitwise reproducibility matters.
    pub fn fixed(t_final: f64) -> Self {
        IntegratorConfig { method: Method::Rk4 { h: 1e-3 }, ..Self::adaptive(t_final) }
    }

    pub fn with_output_interval(mut self, dt: f64) -> Self {
        self.output_interval = Some(dt);
        self
    }

    pub fn with_simplex_guard(mut self, slack: f64) -> Self {
        self.simplex_slack = Some(slack);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let ok = pos(self.t_final)
            && self.output_interval.map_or(true, pos)
            && self.simplex_slack.map_or(true, |s| s.is_finite() && s >= 0.0)
            && match self.method {
                Method::Rk4 { h } => pos(h),
                Method::Dopri5 { rtol, atol } => pos(rtol) && pos(atol),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid integrator configuration {self:?}")))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub tree: Option<String>,
    pub values: Vec<f64>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial sample")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial sample")
    }

    pub fn with_meta(mut self, meta: TrajectoryMeta) -> Self {
        self.meta = meta;
        self
    }
}

struct Recorder {
    interval: Option<f64>,
    next: f64,
    traj: Trajectory,
}

impl Recorder {
    fn new(interval: Option<f64>, x0: &[f64]) -> Self {
        Recorder {
            interval,
            next: interval.unwrap_or(0.0),
            traj: Trajectory { times: vec![0.0], states: vec![x0.to_vec()], meta: TrajectoryMeta::default(), steps: 0, rejected: 0 },
        }
    }

    fn push(&mut self, t: f64, x: &[f64], last: bool) {
        let due = match self.interval {
            None => true,
            Some(dt) => {
                let hit = t >= self.next - 1e-9 * dt;
                if hit {
                    while self.next <= t + 1e-9 * dt {
                        self.next += dt;
                    }
                }
                hit
            }
        };
        if due || last {
            self.traj.times.push(t);
            self.traj.states.push(x.to_vec());
        }
    }
}

fn check_state(t: f64, x: &[f64], slack: Option<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t, state: x.to_vec() });
    }
    if let Some(slack) = slack {
        if let Some((block, violation)) = simplex_violation(x, slack) {
            return Err(Error::SimplexViolation { t, block, violation });
        }
    }
    Ok(())
}

/// Integrates `dx/dt = rhs(t, x)` from `t = 0` to `cfg.t_final`.
pub fn integrate<F>(mut rhs: F, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    check_state(0.0, x0, cfg.simplex_slack)?;
    match cfg.method {
        Method::Rk4 { h } => rk4(&mut rhs, x0, h, cfg),
        Method::Dopri5 { rtol, atol } => dopri5(&mut rhs, x0, rtol, atol, cfg),
    }
}

fn rk4<F>(rhs: &mut F, x0: &[f64], h: f64, cfg: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let mut rec = Recorder::new(cfg.output_interval, x0);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let n_steps = (cfg.t_final / h).round().max(1.0) as usize;
    let h = cfg.t_final / n_steps as f64;
    if n_steps > cfg.max_steps {
        return Err(Error::InvalidInput(format!("{n_steps} steps exceed the limit {}", cfg.max_steps)));
    }
    for s in 0..n_steps {
        let t = s as f64 * h;
        rhs(t, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_new = if s + 1 == n_steps { cfg.t_final } else { (s + 1) as f64 * h };
        check_state(t_new, &x, cfg.simplex_slack)?;
        rec.push(t_new, &x, s + 1 == n_steps);
    }
    rec.traj.steps = n_steps;
    Ok(rec.traj)
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C: [f64; 5] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];

fn dopri5<F>(rhs: &mut F, x0: &[f64], rtol: f64, atol: f64, cfg: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let mut rec = Recorder::new(cfg.output_interval, x0);
    let mut x = x0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut t = 0.0;
    rhs(t, &x, &mut k[0]);

    let scale = |x: &[f64]| -> f64 {
        (x.iter().map(|v| (v / (atol + rtol * v.abs())).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt()
    };
    let (d0, d1) = (scale(&x), scale(&k[0]));
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(cfg.t_final);
    if let Some(dt) = cfg.output_interval {
        h = h.min(dt);
    }

    let mut steps = 0usize;
    let mut rejected = 0usize;
    while t < cfg.t_final {
        if steps + rejected >= cfg.max_steps {
            return Err(Error::InvalidInput(format!("step limit {} reached at t = {t}", cfg.max_steps)));
        }
        let mut last = false;
        if t + h >= cfg.t_final {
            h = cfg.t_final - t;
            last = true;
        }
        if cfg.output_interval.is_some() {
            if !last && t + h > rec.next {
                h = rec.next - t;
            }
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }

        stage(&x, h, &[A21], &k, &mut tmp);
        rhs(t + C[0] * h, &tmp, &mut k[1]);
        stage(&x, h, &[A31, A32], &k, &mut tmp);
        rhs(t + C[1] * h, &tmp, &mut k[2]);
        stage(&x, h, &[A41, A42, A43], &k, &mut tmp);
        rhs(t + C[2] * h, &tmp, &mut k[3]);
        stage(&x, h, &[A51, A52, A53, A54], &k, &mut tmp);
        rhs(t + C[3] * h, &tmp, &mut k[4]);
        stage(&x, h, &[A61, A62, A63, A64, A65], &k, &mut tmp);
        rhs(t + C[4] * h, &tmp, &mut k[5]);
        for j in 0..n {
            x_new[j] = x[j] + h * (B1 * k[0][j] + B3 * k[2][j] + B4 * k[3][j] + B5 * k[4][j] + B6 * k[5][j]);
        }
        rhs(t + h, &x_new, &mut k[6]);

        let mut err = 0.0;
        for j in 0..n {
            let e = h * (E1 * k[0][j] + E3 * k[2][j] + E4 * k[3][j] + E5 * k[4][j] + E6 * k[5][j] + E7 * k[6][j]);
            let sc = atol + rtol * x[j].abs().max(x_new[j].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            if x_new.iter().any(|v| !v.is_finite()) && h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::NonFinite { t: t + h, state: x_new.clone() });
            }
            rejected += 1;
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            t = if last { cfg.t_final } else { t + h };
            std::mem::swap(&mut x, &mut x_new);
            k.swap(0, 6);
            check_state(t, &x, cfg.simplex_slack)?;
            steps += 1;
            rec.push(t, &x, last);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    rec.traj.steps = steps;
    rec.traj.rejected = rejected;
    Ok(rec.traj)
}

fn stage(x: &[f64], h: f64, coeffs: &[f64], k: &[Vec<f64>], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let acc: f64 = coeffs.iter().zip(k).map(|(c, kk)| c * kk[j]).sum();
        *o = x[j] + h * acc;
    }
}
