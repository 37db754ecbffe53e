//! External driving of the system and/or the bath. Driving enters the
//! Langevin equation as a c-number effective force, so it displaces the
//! means through a convolution with G2 while leaving every covariance —
//! and therefore the fidelity and the non-Markovianity measure — untouched.

use serde::{Deserialize, Serialize};

use crate::greens::GreensSolution;
use crate::model::{GaussianState, TimeGrid};
use crate::propagation::propagate_mean;
use crate::{Error, Result};

/// Scalar function sampled on an increasing grid, evaluated by linear
/// interpolation; querying outside the sampled range is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    ts: Vec<f64>,
    vs: Vec<f64>,
}

impl SampledFunction {
    pub fn new(ts: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        if ts.len() != vs.len() || ts.len() < 2 {
            return Err(Error::InvalidParams(
                "sampled function needs at least two (t, value) rows of equal length".into(),
            ));
        }
        if !ts.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidParams("sample times must be strictly increasing".into()));
        }
        Ok(Self { ts, vs })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(f: F, t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n < 2 || !(t1 > t0) {
            return Err(Error::InvalidParams("sampling needs n >= 2 and t1 > t0".into()));
        }
        let ts: Vec<f64> = (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect();
        let vs = ts.iter().map(|&t| f(t)).collect();
        Self::new(ts, vs)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = (self.ts[0], *self.ts.last().unwrap());
        let slack = 1e-12 * (1.0 + hi.abs());
        if t < lo - slack || t > hi + slack {
            return Err(Error::UndefinedSample(format!(
                "t = {t} outside the sampled range [{lo}, {hi}]"
            )));
        }
        let t = t.clamp(lo, hi);
        let idx = match self.ts.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return Ok(self.vs[i]),
            Err(i) => i.clamp(1, self.ts.len() - 1),
        };
        let (t0, t1) = (self.ts[idx - 1], self.ts[idx]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.vs[idx - 1] * (1.0 - w) + self.vs[idx] * w)
    }

    pub fn start(&self) -> f64 {
        self.ts[0]
    }
}

/// Closed-form force vocabulary plus a sampled fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Force {
    Constant { value: f64 },
    Sinusoid { amplitude: f64, omega: f64, phase: f64 },
    GaussianPulse { amplitude: f64, center: f64, width: f64 },
    Sampled { samples: SampledFunction },
}

impl Force {
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Force::Constant { value } => Ok(*value),
            Force::Sinusoid {
                amplitude,
                omega,
                phase,
            } => Ok(amplitude * (omega * t + phase).sin()),
            Force::GaussianPulse {
                amplitude,
                center,
                width,
            } => {
                let u = (t - center) / width;
                Ok(amplitude * (-0.5 * u * u).exp())
            }
            Force::Sampled { samples } => samples.eval(t),
        }
    }
}

/// Driving of the system (direct strength d0) and optionally of the bath,
/// represented by the memory kernel Lambda(t) that mediates the indirect
/// force. Lambda is a sine series microscopically, so Lambda(0) = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingSpec {
    pub d0: f64,
    pub force: Force,
    pub bath_kernel: Option<SampledFunction>,
}

impl DrivingSpec {
    pub fn new(d0: f64, force: Force, bath_kernel: Option<SampledFunction>) -> Result<Self> {
        if let Some(k) = &bath_kernel {
            if k.start() <= 0.0 {
                let at0 = k.eval(k.start().max(0.0))?;
                if at0.abs() > 1e-12 {
                    return Err(Error::InvalidParams(format!(
                        "bath kernel must vanish at t = 0, got {at0}"
                    )));
                }
            }
        }
        Ok(Self {
            d0,
            force,
            bath_kernel,
        })
    }
}

/// Trapezoid step count covering [0, t] at nominal step h; exact multiples
/// of h are kept at their own node count despite division round-off.
fn steps_for(t: f64, h: f64) -> usize {
    let ratio = t / h;
    let n = if (ratio - ratio.round()).abs() < 1e-9 * (1.0 + ratio) {
        ratio.round()
    } else {
        ratio.ceil()
    };
    n.max(1.0) as usize
}

/// Effective driving force F_eff(t) = d0 F(t) + int_0^t Lambda(t-t') F(t') dt',
/// with the convolution done by the trapezoidal rule at step h.
pub fn effective_force(spec: &DrivingSpec, t: f64, h: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("effective force needs t >= 0, got {t}")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParams(format!("quadrature step must be > 0, got {h}")));
    }
    let direct = spec.d0 * spec.force.eval(t)?;
    let Some(kernel) = &spec.bath_kernel else {
        return Ok(direct);
    };
    if t == 0.0 {
        return Ok(direct);
    }
    let n = steps_for(t, h);
    let dt = t / n as f64;
    let mut conv = 0.0;
    for k in 0..=n {
        let tk = k as f64 * dt;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        conv += w * kernel.eval(t - tk)? * spec.force.eval(tk)?;
    }
    Ok(direct + conv * dt)
}

/// Driven means at a single time: the homogeneous propagation plus the
/// c-number displacements
/// x_D = (1/m) int_0^t G2(t-t') F_eff(t') dt', p_D = int_0^t dG2(t-t') F_eff dt'.
/// The displacements do not depend on the initial state.
pub fn driven_means(
    state0: &GaussianState,
    sol: &GreensSolution,
    spec: &DrivingSpec,
    t: f64,
    h: f64,
) -> Result<(f64, f64)> {
    let (xh, ph) = propagate_mean(state0, sol, t)?;
    let (xd, pd) = displacement_at(sol, spec, t, h)?;
    Ok((xh + xd, ph + pd))
}

fn displacement_at(sol: &GreensSolution, spec: &DrivingSpec, t: f64, h: f64) -> Result<(f64, f64)> {
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParams(format!("quadrature step must be > 0, got {h}")));
    }
    let n = steps_for(t, h);
    let dt = t / n as f64;
    let m = sol.params().m;
    let mut xd = 0.0;
    let mut pd = 0.0;
    for k in 0..=n {
        let tk = k as f64 * dt;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let feff = effective_force(spec, tk, h)?;
        let g = sol.eval_raw(t - tk);
        xd += w * g.g2 * feff;
        pd += w * g.dg2 * feff;
    }
    Ok((xd * dt / m, pd * dt))
}

/// Displacements (x_D, p_D) on a whole grid. The effective force and the
/// Green's functions are tabulated once on the grid, so the full series
/// costs O(N^2) instead of O(N^3).
pub fn displacement_series(
    sol: &GreensSolution,
    spec: &DrivingSpec,
    grid: &TimeGrid,
) -> Result<Vec<(f64, f64)>> {
    let dt = grid.dt();
    let m = sol.params().m;
    let n = grid.n_steps();
    let force: Vec<f64> = grid.times().map(|t| spec.force.eval(t)).collect::<Result<_>>()?;
    let kernel: Option<Vec<f64>> = match &spec.bath_kernel {
        Some(k) => Some(grid.times().map(|t| k.eval(t)).collect::<Result<_>>()?),
        None => None,
    };
    let mut feff = vec![0.0; n + 1];
    for l in 0..=n {
        let mut v = spec.d0 * force[l];
        if let Some(lam) = &kernel {
            let mut conv = 0.0;
            for k in 0..=l {
                let w = if k == 0 || k == l { 0.5 } else { 1.0 };
                conv += w * lam[l - k] * force[k];
            }
            if l > 0 {
                v += conv * dt;
            }
        }
        feff[l] = v;
    }
    let gs: Vec<(f64, f64)> = grid.times().map(|t| {
        let g = sol.eval_raw(t);
        (g.g2, g.dg2)
    }).collect();
    let mut out = Vec::with_capacity(n + 1);
    for l in 0..=n {
        let mut xd = 0.0;
        let mut pd = 0.0;
        for k in 0..=l {
            let w = if k == 0 || k == l { 0.5 } else { 1.0 };
            let (g2, dg2) = gs[l - k];
            xd += w * g2 * feff[k];
            pd += w * dg2 * feff[k];
        }
        if l == 0 {
            out.push((0.0, 0.0));
        } else {
            out.push((xd * dt / m, pd * dt));
        }
    }
    Ok(out)
}
