//! Laplace-domain solution of the quantum Langevin equation: the Green's
//! function G2 has transform (z + Omega) / [z^3 + Omega z^2 +
//! (omega0^2 + 2 gamma Omega) z + omega0^2 Omega], so its time-domain form
//! is a three-term exponential sum over the cubic's roots with simple-pole
//! residues. G1 = dG2/dt carries the position initial condition.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::model::PhysParams;
use crate::{Error, Result};

/// Relative root separation below which the solver treats roots as
/// confluent and re-solves with a perturbed coupling.
const REPEATED_ROOT_TOL: f64 = 1e-7;

/// Tolerance factor of the imaginary-residual check in [`GreensSolution::eval`].
const IMAG_RESIDUAL_TOL: f64 = 1e-9;

/// Roots, residues and discriminant of the Langevin cubic for a fixed
/// parameter set. Immutable; shareable across threads.
#[derive(Debug, Clone)]
pub struct GreensSolution {
    roots: [Complex64; 3],
    residues: [Complex64; 3],
    discriminant: f64,
    params: PhysParams,
}

/// Green's functions and their time derivatives at one instant.
/// G1(0) = 1, dG1(0) = 0, G2(0) = 0, dG2(0) = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensFunctions {
    pub g1: f64,
    pub g2: f64,
    pub dg1: f64,
    pub dg2: f64,
}

/// Coefficients (b, c, d) of the monic cubic z^3 + b z^2 + c z + d.
fn cubic_coefficients(params: &PhysParams) -> (f64, f64, f64) {
    let w0sq = params.omega0 * params.omega0;
    (
        params.cutoff,
        w0sq + 2.0 * params.gamma * params.cutoff,
        w0sq * params.cutoff,
    )
}

/// Discriminant of the Langevin cubic; negative means one real root plus a
/// complex-conjugate pair (oscillatory dynamics), positive means three real
/// roots.
pub fn discriminant(params: &PhysParams) -> f64 {
    let (b, c, d) = cubic_coefficients(params);
    18.0 * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * c * c * c - 27.0 * d * d
}

/// Eigenvalues of the companion matrix of z^3 + b z^2 + c z + d.
pub(crate) fn companion_eigenvalues(b: f64, c: f64, d: f64) -> [Complex64; 3] {
    let m = Matrix3::new(0.0, 0.0, -d, 1.0, 0.0, -c, 0.0, 1.0, -b);
    let ev = m.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

fn solve_roots(b: f64, c: f64, d: f64) -> [Complex64; 3] {
    let mut roots = companion_eigenvalues(b, c, d);
    // Newton polish onto the exact cubic; restores the Vieta identities to
    // machine precision at extreme parameter ratios
    for z in roots.iter_mut() {
        for _ in 0..3 {
            let p = ((*z + b) * *z + c) * *z + d;
            let dp = (3.0 * *z + 2.0 * b) * *z + c;
            if dp.norm() > 0.0 {
                *z -= p / dp;
            }
        }
    }
    // deterministic ordering
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    roots
}

fn min_relative_separation(roots: &[Complex64; 3]) -> f64 {
    let scale = roots.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut min = f64::INFINITY;
    for i in 0..3 {
        for j in i + 1..3 {
            min = min.min((roots[i] - roots[j]).norm() / scale);
        }
    }
    min
}

/// Solve the cubic and build the residues of the Laplace-domain Green's
/// function. Nearly repeated roots are lifted by a relative 1e-9 nudge of
/// the coupling; the confluent set has measure zero but is reachable by
/// sweep grids.
pub fn build_greens(params: &PhysParams) -> Result<GreensSolution> {
    params.validate()?;
    let mut gamma_eff = params.gamma;
    for attempt in 0..16 {
        let p = PhysParams {
            gamma: gamma_eff,
            ..*params
        };
        let (b, c, d) = cubic_coefficients(&p);
        let roots = solve_roots(b, c, d);
        if min_relative_separation(&roots) < REPEATED_ROOT_TOL {
            let bump = 1e-9 * (attempt + 1) as f64;
            gamma_eff = if params.gamma > 0.0 {
                params.gamma * (1.0 + bump)
            } else {
                bump * params.omega0
            };
            continue;
        }
        let mut residues = [Complex64::new(0.0, 0.0); 3];
        for i in 0..3 {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..3 {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            residues[i] = (roots[i] + b) / denom;
        }
        // cheap consistency gate on the large-z expansion of the transform
        let s0: Complex64 = residues.iter().sum();
        let s1: Complex64 = residues.iter().zip(&roots).map(|(d, z)| d * z).sum();
        if s0.norm() > 1e-8 || (s1 - 1.0).norm() > 1e-8 {
            return Err(Error::ImaginaryResidual { imag: s0.norm().max((s1 - 1.0).norm()) });
        }
        return Ok(GreensSolution {
            roots,
            residues,
            discriminant: discriminant(params),
            params: *params,
        });
    }
    Err(Error::RepeatedRoots)
}

impl GreensSolution {
    pub fn roots(&self) -> &[Complex64; 3] {
        &self.roots
    }

    pub fn residues(&self) -> &[Complex64; 3] {
        &self.residues
    }

    pub fn discriminant(&self) -> f64 {
        self.discriminant
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    /// Evaluate (G1, G2, dG1, dG2) at time t from the exponential sums
    /// G2 = Re sum d_i e^{z_i t}, dG2 = Re sum d_i z_i e^{z_i t} = G1,
    /// dG1 = Re sum d_i z_i^2 e^{z_i t}. A nonvanishing imaginary part
    /// signals corrupt roots or residues and is reported as an error.
    pub fn eval(&self, t: f64) -> Result<GreensFunctions> {
        if t < 0.0 {
            return Err(Error::Domain(format!("Green's functions need t >= 0, got {t}")));
        }
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        for (d, z) in self.residues.iter().zip(&self.roots) {
            let e = d * (z * t).exp();
            s0 += e;
            s1 += z * e;
            s2 += z * z * e;
        }
        for s in [s0, s1, s2] {
            if s.im.abs() > IMAG_RESIDUAL_TOL * (1.0 + s.re.abs()) {
                return Err(Error::ImaginaryResidual { imag: s.im.abs() });
            }
        }
        Ok(GreensFunctions {
            g1: s1.re,
            g2: s0.re,
            dg1: s2.re,
            dg2: s1.re,
        })
    }
}

impl GreensSolution {
    /// Evaluation without the domain and imaginary-residual checks, for hot
    /// loops and quadrature closures over already-validated solutions.
    pub(crate) fn eval_raw(&self, t: f64) -> GreensFunctions {
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        for (d, z) in self.residues.iter().zip(&self.roots) {
            let e = d * (z * t).exp();
            s0 += e;
            s1 += z * e;
            s2 += z * z * e;
        }
        GreensFunctions {
            g1: s1.re,
            g2: s0.re,
            dg1: s2.re,
            dg2: s1.re,
        }
    }
}

/// Spec op alias for [`GreensSolution::eval`].
pub fn greens_eval(sol: &GreensSolution, t: f64) -> Result<GreensFunctions> {
    sol.eval(t)
}

/// Sign of the cubic discriminant on a (gamma, Omega) grid; rows follow
/// `gammas`, columns follow `cutoffs`. Negative entries mark the region
/// with a complex-conjugate root pair.
pub fn discriminant_map(gammas: &[f64], cutoffs: &[f64], omega0: f64) -> Result<Vec<Vec<i8>>> {
    let mut map = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let mut row = Vec::with_capacity(cutoffs.len());
        for &c in cutoffs {
            let p = PhysParams::new(1.0, omega0, g, c, 1.0)?;
            row.push(discriminant(&p).signum() as i8);
        }
        map.push(row);
    }
    Ok(map)
}
