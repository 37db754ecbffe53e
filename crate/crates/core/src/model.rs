//! Physical parameters, unit conventions, and Gaussian-state representations.
//!
//! Natural units with hbar = 1 throughout. The defaults m = 1, omega0 = 1
//! turn every input into the dimensionless ratios used by the figures
//! (gamma/omega0, Omega/omega0, kT/omega0, t*omega0).

use serde::{Deserialize, Serialize};

use crate::metrics::QuadratureState;
use crate::{Error, Result};

/// Tolerance on the Heisenberg bound det(sigma) >= 1/4 when validating
/// states. Guards against quadrature round-off without masking real
/// violations.
pub const HEISENBERG_TOL: f64 = 1e-9;

/// Physical parameters of the damped oscillator and its bath (hbar = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    /// Oscillator mass.
    pub m: f64,
    /// Bare oscillator frequency omega0.
    pub omega0: f64,
    /// Coupling strength gamma of the Ohmic spectral density.
    pub gamma: f64,
    /// Lorentz–Drude cutoff frequency Omega.
    pub cutoff: f64,
    /// Bath temperature times the Boltzmann constant (an energy).
    pub kt: f64,
}

impl PhysParams {
    pub fn new(m: f64, omega0: f64, gamma: f64, cutoff: f64, kt: f64) -> Result<Self> {
        let p = Self {
            m,
            omega0,
            gamma,
            cutoff,
            kt,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters from the dimensionless ratios of the figure captions,
    /// with m = 1 and omega0 = 1.
    pub fn from_ratios(gamma_over_omega0: f64, cutoff_over_omega0: f64, kt_over_omega0: f64) -> Result<Self> {
        Self::new(1.0, 1.0, gamma_over_omega0, cutoff_over_omega0, kt_over_omega0)
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, what: &str, v: f64) -> Result<()> {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{what} = {v}")))
            }
        }
        check(self.m > 0.0, "m must be > 0", self.m)?;
        check(self.omega0 > 0.0, "omega0 must be > 0", self.omega0)?;
        check(self.cutoff > 0.0, "cutoff must be > 0", self.cutoff)?;
        check(self.gamma >= 0.0, "gamma must be >= 0", self.gamma)?;
        check(self.kt >= 0.0, "kT must be >= 0", self.kt)?;
        Ok(())
    }
}

/// Symmetric 2x2 covariance matrix with the cross element defined through
/// the anticommutator, sigma_xp = <{x,p}>/2 - <x><p>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub xx: f64,
    pub xp: f64,
    pub pp: f64,
}

impl Covariance {
    pub fn new(xx: f64, xp: f64, pp: f64) -> Self {
        Self { xx, xp, pp }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.pp - self.xp * self.xp
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    pub fn add(&self, other: &Covariance) -> Covariance {
        Covariance::new(self.xx + other.xx, self.xp + other.xp, self.pp + other.pp)
    }
}

/// Gaussian state of the open oscillator: first moments plus covariance,
/// in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean_x: f64,
    pub mean_p: f64,
    pub cov: Covariance,
}

impl GaussianState {
    /// Build a state, enforcing positive definiteness and the Heisenberg
    /// bound det(sigma) >= 1/4 - tol. The determinant of the covariance is
    /// invariant under the quadrature rescaling, so the bound can be checked
    /// directly on physical units.
    pub fn new(mean_x: f64, mean_p: f64, cov: Covariance) -> Result<Self> {
        if !cov.is_positive_definite() {
            return Err(Error::InvalidState(format!(
                "covariance not positive definite: xx={} xp={} pp={}",
                cov.xx, cov.xp, cov.pp
            )));
        }
        if cov.det() < 0.25 - HEISENBERG_TOL {
            return Err(Error::InvalidState(format!(
                "Heisenberg bound violated: det sigma = {} < 1/4",
                cov.det()
            )));
        }
        Ok(Self {
            mean_x,
            mean_p,
            cov,
        })
    }
}

/// Pure coherent state centred at (x0, p0): vacuum variances
/// sigma_xx = 1/(2 m omega0), sigma_pp = m omega0 / 2, sigma_xp = 0.
pub fn coherent_state(x0: f64, p0: f64, params: &PhysParams) -> Result<GaussianState> {
    params.validate()?;
    let mw = params.m * params.omega0;
    GaussianState::new(x0, p0, Covariance::new(0.5 / mw, 0.0, 0.5 * mw))
}

/// Convert to the dimensionless quadrature representation
/// X = sqrt(m omega0) x, P = p / sqrt(m omega0), in which the vacuum has
/// variance 1/2 and the fidelity formula applies.
pub fn to_quadratures(state: &GaussianState, params: &PhysParams) -> QuadratureState {
    let mw = params.m * params.omega0;
    let s = mw.sqrt();
    QuadratureState {
        mean: [s * state.mean_x, state.mean_p / s],
        cov: Covariance::new(mw * state.cov.xx, state.cov.xp, state.cov.pp / mw),
    }
}

/// Inverse of [`to_quadratures`].
pub fn from_quadratures(q: &QuadratureState, params: &PhysParams) -> GaussianState {
    let mw = params.m * params.omega0;
    let s = mw.sqrt();
    GaussianState {
        mean_x: q.mean[0] / s,
        mean_p: q.mean[1] * s,
        cov: Covariance::new(q.cov.xx / mw, q.cov.xp, q.cov.pp * mw),
    }
}

/// Uniform time grid t_l = l * dt for l = 0..=n_steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParams(format!("dt must be > 0, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParams("n_steps must be positive".into()));
        }
        Ok(Self { dt, n_steps })
    }

    /// Grid covering [0, t_max] with step dt; n_steps is rounded so that
    /// n_steps * dt matches t_max as closely as possible.
    pub fn from_t_max(dt: f64, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0) {
            return Err(Error::InvalidParams(format!("t_max must be > 0, got {t_max}")));
        }
        Self::new(dt, (t_max / dt).round().max(1.0) as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, n_steps + 1 (the grid includes t = 0).
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_max(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.dt;
        (0..=self.n_steps).map(move |l| l as f64 * dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn params_validation() {
        assert!(PhysParams::new(1.0, 1.0, 0.1, 100.0, 1.0).is_ok());
        assert!(PhysParams::new(0.0, 1.0, 0.1, 100.0, 1.0).is_err());
        assert!(PhysParams::new(1.0, -1.0, 0.1, 100.0, 1.0).is_err());
        assert!(PhysParams::new(1.0, 1.0, -0.1, 100.0, 1.0).is_err());
        assert!(PhysParams::new(1.0, 1.0, 0.1, 0.0, 1.0).is_err());
        assert!(PhysParams::new(1.0, 1.0, 0.1, 100.0, -1.0).is_err());
        // kT = 0 and gamma = 0 are allowed
        assert!(PhysParams::new(1.0, 1.0, 0.0, 100.0, 0.0).is_ok());
    }

    #[test]
    fn coherent_state_caption_displacement() {
        // displacement <x> sqrt(2 m omega0) = -3 at m = omega0 = 1
        let p = PhysParams::from_ratios(0.1, 100.0, 1.0).unwrap();
        let x0 = -3.0 / (2.0f64).sqrt();
        let s = coherent_state(x0, 0.0, &p).unwrap();
        assert_relative_eq!(s.mean_x, -3.0 / (2.0f64).sqrt(), max_relative = 1e-15);
        assert_eq!(s.mean_p, 0.0);
        // quadrature variances are 0.5
        let q = to_quadratures(&s, &p);
        assert_relative_eq!(q.cov.xx, 0.5, max_relative = 1e-15);
        assert_relative_eq!(q.cov.pp, 0.5, max_relative = 1e-15);
        assert_eq!(q.cov.xp, 0.0);
    }

    #[test]
    fn vacuum_state_is_minimal_uncertainty() {
        let p = PhysParams::new(1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let s = coherent_state(0.0, 0.0, &p).unwrap();
        assert_eq!(s.mean_x, 0.0);
        assert_eq!(s.mean_p, 0.0);
        assert_relative_eq!(s.cov.det(), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn quadrature_mean_scaling() {
        // <x> sqrt(2 m omega0) = 3  =>  <X> = 3/sqrt(2)
        let p = PhysParams::new(2.0, 3.0, 0.0, 1.0, 0.0).unwrap();
        let x0 = 3.0 / (2.0 * p.m * p.omega0).sqrt();
        let s = coherent_state(x0, 0.0, &p).unwrap();
        let q = to_quadratures(&s, &p);
        assert_relative_eq!(q.mean[0], 3.0 / (2.0f64).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn vacuum_quadratures_identity_scaling() {
        let p = PhysParams::new(1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let s = coherent_state(0.0, 0.0, &p).unwrap();
        let q = to_quadratures(&s, &p);
        assert_eq!(q.mean, [0.0, 0.0]);
        assert_relative_eq!(q.cov.xx, 0.5);
        assert_relative_eq!(q.cov.pp, 0.5);
    }

    #[test]
    fn time_grid_times() {
        let g = TimeGrid::new(0.5, 4).unwrap();
        let ts: Vec<f64> = g.times().collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.t_max(), 2.0);
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(0.1, 0).is_err());
        let g = TimeGrid::from_t_max(0.01, 25.0).unwrap();
        assert_eq!(g.n_steps(), 2500);
    }

    proptest! {
        // det(sigma_quad) = 1/4 for every coherent state, regardless of
        // displacement, and to_quadratures preserves it.
        #[test]
        fn coherent_det_quarter(
            x0 in -20.0f64..20.0,
            p0 in -20.0f64..20.0,
            m in 0.1f64..10.0,
            w0 in 0.1f64..10.0,
        ) {
            let p = PhysParams::new(m, w0, 0.0, 1.0, 0.0).unwrap();
            let s = coherent_state(x0, p0, &p).unwrap();
            prop_assert!((s.cov.det() - 0.25).abs() < 1e-12);
            let q = to_quadratures(&s, &p);
            prop_assert!((q.cov.det() - 0.25).abs() < 1e-12);
        }

        // round trip to_quadratures -> from_quadratures recovers the input
        #[test]
        fn quadrature_round_trip(
            x0 in -5.0f64..5.0,
            p0 in -5.0f64..5.0,
            m in 0.1f64..10.0,
            w0 in 0.1f64..10.0,
            extra in 0.0f64..3.0,
        ) {
            let p = PhysParams::new(m, w0, 0.0, 1.0, 0.0).unwrap();
            let mw = m * w0;
            let cov = Covariance::new((0.5 + extra) / mw, 0.1 * extra, (0.5 + extra) * mw);
            let s = GaussianState::new(x0, p0, cov).unwrap();
            let q = to_quadratures(&s, &p);
            // positive definiteness and the sign of det - 1/4 are preserved
            prop_assert!(q.cov.is_positive_definite());
            prop_assert!((q.cov.det() - 0.25) >= -1e-12);
            let back = from_quadratures(&q, &p);
            prop_assert!((back.mean_x - s.mean_x).abs() <= 1e-14 * (1.0 + s.mean_x.abs()));
            prop_assert!((back.mean_p - s.mean_p).abs() <= 1e-14 * (1.0 + s.mean_p.abs()));
            prop_assert!((back.cov.xx - s.cov.xx).abs() <= 1e-14 * s.cov.xx);
            prop_assert!((back.cov.pp - s.cov.pp).abs() <= 1e-14 * s.cov.pp);
        }
    }
}
