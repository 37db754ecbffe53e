//! Caldeira–Leggett master-equation limit: closed-form Green's functions
//! and high-temperature noise contributions, valid for
//! gamma, omega0 << Omega << 2 pi kT. Used for cross-checks against the
//! exact solution and for the Markovianity statement of the Bures dynamics
//! in this limit.

use serde::{Deserialize, Serialize};

use crate::greens::GreensFunctions;
use crate::model::{GaussianState, PhysParams, TimeGrid};
use crate::propagation::{evolve_covariance, NoiseMatrix};
use crate::{Error, Result};

/// Parameters of the master-equation limit; no cutoff enters. Restricted to
/// the underdamped regime gamma < omega0 where nu = sqrt(omega0^2 - gamma^2)
/// is real — the limit's derivation assumes it, so there is no analytic
/// continuation here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClParams {
    pub m: f64,
    pub omega0: f64,
    pub gamma: f64,
    pub kt: f64,
    /// Underdamped frequency sqrt(omega0^2 - gamma^2).
    pub nu: f64,
}

impl ClParams {
    pub fn new(m: f64, omega0: f64, gamma: f64, kt: f64) -> Result<Self> {
        if !(m > 0.0) || !(omega0 > 0.0) || gamma < 0.0 || kt < 0.0 {
            return Err(Error::InvalidParams(format!(
                "master-equation limit needs m, omega0 > 0 and gamma, kT >= 0; got m={m}, omega0={omega0}, gamma={gamma}, kT={kt}"
            )));
        }
        if gamma >= omega0 {
            return Err(Error::Overdamped { gamma, omega0 });
        }
        Ok(Self {
            m,
            omega0,
            gamma,
            kt,
            nu: (omega0 * omega0 - gamma * gamma).sqrt(),
        })
    }

    /// Drop the cutoff of a full parameter set.
    pub fn from_phys(p: &PhysParams) -> Result<Self> {
        Self::new(p.m, p.omega0, p.gamma, p.kt)
    }
}

/// G1 = [gamma/nu sin(nu t) + cos(nu t)] e^{-gamma t},
/// G2 = sin(nu t) e^{-gamma t}/nu, with the analytic derivatives
/// dG1 = -omega0^2 G2 and dG2 = [cos(nu t) - gamma/nu sin(nu t)] e^{-gamma t}.
pub fn greens_functions(p: &ClParams, t: f64) -> Result<GreensFunctions> {
    if t < 0.0 {
        return Err(Error::Domain(format!("Green's functions need t >= 0, got {t}")));
    }
    let (s, c) = (p.nu * t).sin_cos();
    let e = (-p.gamma * t).exp();
    let g2 = s * e / p.nu;
    Ok(GreensFunctions {
        g1: (p.gamma / p.nu * s + c) * e,
        g2,
        dg1: -p.omega0 * p.omega0 * g2,
        dg2: (c - p.gamma / p.nu * s) * e,
    })
}

/// High-temperature noise contributions of the master equation; stationary
/// values kT/(m omega0^2), m kT and 0.
pub fn noise_matrix(p: &ClParams, t: f64) -> Result<NoiseMatrix> {
    if t < 0.0 {
        return Err(Error::Domain(format!("noise matrix needs t >= 0, got {t}")));
    }
    let (s2t, c2t) = (2.0 * p.nu * t).sin_cos();
    let s = (p.nu * t).sin();
    let e2 = (-2.0 * p.gamma * t).exp();
    let gn = p.gamma / p.nu;
    let w0sq = p.omega0 * p.omega0;
    let nusq = p.nu * p.nu;
    let ixx = p.kt / (p.m * w0sq) * (1.0 - e2 * (1.0 + gn * s2t + 2.0 * gn * gn * s * s));
    let ipp = p.m * p.kt * (1.0 - e2 * (w0sq / nusq - gn * gn * c2t - gn * s2t));
    let g2 = s * (-p.gamma * t).exp() / p.nu;
    let ipx = 2.0 * p.gamma * p.kt * g2 * g2;
    Ok(NoiseMatrix { ixx, ipp, ipx })
}

/// Moment trajectory under the master-equation limit, with the same
/// congruence structure as the exact propagation. The limit is not of
/// Lindblad form, so the Heisenberg bound can be transiently violated at
/// low temperature; violations are collected, not fatal.
#[derive(Debug, Clone)]
pub struct ClTrajectory {
    pub states: Vec<GaussianState>,
    /// Grid indices where det sigma dropped below 1/4 - 1e-6.
    pub heisenberg_violations: Vec<usize>,
}

pub fn propagate(state0: &GaussianState, p: &ClParams, grid: &TimeGrid) -> Result<ClTrajectory> {
    let mut states = Vec::with_capacity(grid.len());
    let mut violations = Vec::new();
    for (l, t) in grid.times().enumerate() {
        let g = greens_functions(p, t)?;
        let noise = noise_matrix(p, t)?;
        let mean_x = g.g1 * state0.mean_x + g.g2 * state0.mean_p / p.m;
        let mean_p = p.m * g.dg1 * state0.mean_x + g.dg2 * state0.mean_p;
        let cov = evolve_covariance(&state0.cov, &g, p.m, &noise);
        if cov.det() < 0.25 - crate::propagation::PROPAGATION_HEISENBERG_TOL {
            violations.push(l);
        }
        states.push(GaussianState { mean_x, mean_p, cov });
    }
    Ok(ClTrajectory {
        states,
        heisenberg_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coherent_state;
    use approx::assert_relative_eq;

    fn cl(gamma: f64, kt: f64) -> ClParams {
        ClParams::new(1.0, 1.0, gamma, kt).unwrap()
    }

    #[test]
    fn overdamped_is_rejected() {
        assert!(matches!(ClParams::new(1.0, 1.0, 1.0, 1.0), Err(Error::Overdamped { .. })));
        assert!(matches!(ClParams::new(1.0, 1.0, 1.5, 1.0), Err(Error::Overdamped { .. })));
    }

    #[test]
    fn initial_conditions() {
        let g = greens_functions(&cl(0.3, 1.0), 0.0).unwrap();
        assert_eq!((g.g1, g.g2, g.dg1, g.dg2), (1.0, 0.0, -0.0, 1.0));
        let n = noise_matrix(&cl(0.3, 1.0), 0.0).unwrap();
        assert!(n.ixx.abs() < 1e-15 && n.ipp.abs() < 1e-15 && n.ipx.abs() < 1e-15);
    }

    #[test]
    fn undamped_limit_is_trigonometric() {
        let p = cl(1e-12, 1.0);
        for &t in &[0.4, 2.0, 7.5] {
            let g = greens_functions(&p, t).unwrap();
            assert_relative_eq!(g.g1, t.cos(), epsilon = 1e-9);
            assert_relative_eq!(g.g2, t.sin(), epsilon = 1e-9);
            assert_relative_eq!(g.dg1, -t.sin(), epsilon = 1e-9);
            assert_relative_eq!(g.dg2, t.cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn quarter_period_value() {
        // gamma/omega0 = 0.1: nu = 0.994987..., G2(pi/2nu) = e^{-gamma pi/2nu}/nu
        let p = cl(0.1, 1.0);
        assert_relative_eq!(p.nu, 0.99498743710662, max_relative = 1e-12);
        let t = std::f64::consts::FRAC_PI_2 / p.nu;
        let g = greens_functions(&p, t).unwrap();
        assert_relative_eq!(g.g2, (-p.gamma * t).exp() / p.nu, max_relative = 1e-12);
    }

    #[test]
    fn greens_solve_the_local_oscillator_equation() {
        // x'' + 2 gamma x' + omega0^2 x = 0 for both G1 and G2
        let p = cl(0.4, 1.0);
        let h = 1e-5;
        for &t in &[0.5, 2.0, 6.0] {
            let gm = greens_functions(&p, t - h).unwrap();
            let g0 = greens_functions(&p, t).unwrap();
            let gp = greens_functions(&p, t + h).unwrap();
            for pick in [|g: &GreensFunctions| g.g1, |g: &GreensFunctions| g.g2] {
                let second = (pick(&gp) - 2.0 * pick(&g0) + pick(&gm)) / (h * h);
                let first = (pick(&gp) - pick(&gm)) / (2.0 * h);
                let res = second + 2.0 * p.gamma * first + p.omega0 * p.omega0 * pick(&g0);
                assert!(res.abs() < 1e-5, "residual {res} at t={t}");
            }
        }
    }

    #[test]
    fn stationary_noise_is_thermal() {
        let p = cl(0.1, 100.0);
        let n = noise_matrix(&p, 1e4).unwrap();
        assert_relative_eq!(n.ixx, p.kt / (p.m * p.omega0 * p.omega0), max_relative = 1e-12);
        assert_relative_eq!(n.ipp, p.m * p.kt, max_relative = 1e-12);
        assert!(n.ipx.abs() < 1e-12);
    }

    #[test]
    fn vacuum_relaxes_to_thermal_covariance() {
        let p = cl(0.1, 100.0);
        let phys = PhysParams::new(1.0, 1.0, 0.1, 100.0, 100.0).unwrap();
        let s0 = coherent_state(0.0, 0.0, &phys).unwrap();
        let grid = TimeGrid::from_t_max(0.01, 100.0).unwrap();
        let traj = propagate(&s0, &p, &grid).unwrap();
        let last = traj.states.last().unwrap();
        assert_relative_eq!(last.cov.xx, p.kt / (p.m * p.omega0 * p.omega0), max_relative = 1e-6);
        assert_relative_eq!(last.cov.pp, p.m * p.kt, max_relative = 1e-6);
        assert!(traj.heisenberg_violations.is_empty());
        // t = 0 entry is the initial state exactly
        assert_eq!(traj.states[0], s0);
    }

    #[test]
    fn exact_noise_approaches_limit_in_its_regime() {
        // gamma, omega0 << Omega << 2 pi kT
        let phys = PhysParams::from_ratios(0.1, 100.0, 100.0).unwrap();
        let sol = crate::greens::build_greens(&phys).unwrap();
        let p = ClParams::from_phys(&phys).unwrap();
        let cfg = crate::spectral::NoiseConfig::default();
        for &t in &[0.5, 2.0, 5.0, 20.0, 40.0] {
            let exact = crate::propagation::noise_matrix(&sol, t, &cfg).unwrap();
            let approx_n = noise_matrix(&p, t).unwrap();
            let scale = (p.kt / (p.m * p.omega0 * p.omega0)).max(1.0);
            assert!(
                (exact.ixx - approx_n.ixx).abs() / scale < 5e-2,
                "ixx gap at t={t}: {} vs {}",
                exact.ixx,
                approx_n.ixx
            );
            assert!((exact.ipp - approx_n.ipp).abs() / (p.m * p.kt) < 5e-2);
        }
    }

    #[test]
    fn low_temperature_violations_are_reported_not_fatal() {
        // the CL generator is not Lindblad: at kT << omega0 the bound fails
        let p = cl(0.3, 0.05);
        let phys = PhysParams::new(1.0, 1.0, 0.3, 100.0, 0.05).unwrap();
        let s0 = coherent_state(1.0, 0.0, &phys).unwrap();
        let grid = TimeGrid::from_t_max(0.01, 20.0).unwrap();
        let traj = propagate(&s0, &p, &grid).unwrap();
        assert!(!traj.heisenberg_violations.is_empty());
        assert_eq!(traj.states.len(), grid.len());
    }
}
