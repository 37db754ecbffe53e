//! Exact time evolution of the first and second moments. The homogeneous
//! part is the 2x2 congruence sigma(t) = S sigma(0) S^T with
//! S = [[G1, G2/m], [m dG1, dG2]]; the inhomogeneous part is the
//! state-independent noise matrix, a Matsubara series whose terms are the
//! closed-form double integrals of G2 G2 (and derivatives) against one
//! exponential of the noise kernel.
//!
//! Each series term reduces to first divided differences of
//! phi(u) = (e^{u t} - 1)/u over the root combinations, so sweeps can cross
//! every degeneracy (z_i + z_j -> 0, Omega + z_i -> 0, |nu_n| = Omega)
//! without special-casing by the caller.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::expdiff::{dd2_em1, dd_em1, em1, h, h_prime};
use crate::greens::GreensSolution;
use crate::model::{Covariance, GaussianState};
use crate::spectral::{cube_tail, matsubara_frequency, noise_kernel_ref, trigamma_tail, NoiseConfig};
use crate::{quad, Error, Result};

/// Tolerance on the Heisenberg bound for propagated covariances; looser
/// than the state-validation tolerance because the noise series is itself
/// truncated.
pub const PROPAGATION_HEISENBERG_TOL: f64 = 1e-6;

/// Relative distance |Omega - nu_n|/Omega below which the Matsubara term is
/// evaluated through the derivative of the pair sum instead of the
/// difference quotient.
const MATSUBARA_DEGENERACY_TOL: f64 = 1e-6;

/// Noise additions to (sigma_xx, sigma_pp, sigma_px) at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMatrix {
    pub ixx: f64,
    pub ipp: f64,
    pub ipx: f64,
}

impl NoiseMatrix {
    pub fn zero() -> Self {
        Self {
            ixx: 0.0,
            ipp: 0.0,
            ipx: 0.0,
        }
    }
}

/// Mean-value propagation:
/// <x(t)> = G1 <x(0)> + G2 <p(0)>/m, <p(t)> = m dG1 <x(0)> + dG2 <p(0)>.
pub fn propagate_mean(state0: &GaussianState, sol: &GreensSolution, t: f64) -> Result<(f64, f64)> {
    let g = sol.eval(t)?;
    let m = sol.params().m;
    Ok((
        g.g1 * state0.mean_x + g.g2 * state0.mean_p / m,
        m * g.dg1 * state0.mean_x + g.dg2 * state0.mean_p,
    ))
}

/// S sigma S^T + N with S the Green's-function transition matrix; the
/// congruence form carries the cross-term factor 2 automatically.
pub(crate) fn evolve_covariance(
    cov0: &Covariance,
    g: &crate::greens::GreensFunctions,
    m: f64,
    noise: &NoiseMatrix,
) -> Covariance {
    let (s11, s12, s21, s22) = (g.g1, g.g2 / m, m * g.dg1, g.dg2);
    Covariance::new(
        s11 * s11 * cov0.xx + s12 * s12 * cov0.pp + 2.0 * s11 * s12 * cov0.xp + noise.ixx,
        s11 * s21 * cov0.xx + s12 * s22 * cov0.pp + (s11 * s22 + s12 * s21) * cov0.xp + noise.ipx,
        s21 * s21 * cov0.xx + s22 * s22 * cov0.pp + 2.0 * s21 * s22 * cov0.xp + noise.ipp,
    )
}

/// Covariance propagation. The noise matrix must have been computed for the
/// same parameters and time. Fails if the result lands below the Heisenberg
/// bound beyond tolerance, which signals a noise-series failure.
pub fn propagate_covariance(
    state0: &GaussianState,
    sol: &GreensSolution,
    noise: &NoiseMatrix,
    t: f64,
) -> Result<Covariance> {
    let g = sol.eval(t)?;
    let cov = evolve_covariance(&state0.cov, &g, sol.params().m, noise);
    if cov.det() < 0.25 - PROPAGATION_HEISENBERG_TOL {
        return Err(Error::HeisenbergViolation {
            det: cov.det(),
            t,
            tol: PROPAGATION_HEISENBERG_TOL,
        });
    }
    Ok(cov)
}

/// Per-time workspace for the Matsubara sum: one entry per ordered root
/// pair (i, j), plus the exponentials e^{z_k t}.
struct PairSums {
    t: f64,
    roots: [Complex64; 3],
    exp_zt: [Complex64; 3],
    // z_i + z_j and phi(z_i + z_j) per ordered pair
    u: [Complex64; 9],
    e_u: [Complex64; 9],
    // channel weights: 2 d_i d_j, 2 (d z)_i (d z)_j, (d z)_i d_j + (d z)_j d_i
    wxx: [Complex64; 9],
    wpp: [Complex64; 9],
    wpx: [Complex64; 9],
}

/// phi(v) = (e^{v t} - 1)/v with the exponential supplied by the caller.
fn em1_pre(v: Complex64, exp_vt: Complex64, t: f64) -> Complex64 {
    if (v * t).norm_sqr() < 0.25 {
        t * h(v * t)
    } else {
        (exp_vt - 1.0) / v
    }
}

/// First divided difference (phi(u) - phi(v))/(u - v) with both values
/// supplied; switches to the derivative form at confluence.
fn dd_pre(u: Complex64, e_u: Complex64, v: Complex64, e_v: Complex64, t: f64) -> Complex64 {
    let x = u * t;
    let y = v * t;
    if (x - y).norm() < 1e-7 * (1.0 + x.norm().max(y.norm())) {
        t * t * h_prime(0.5 * (x + y))
    } else {
        (e_u - e_v) / (u - v)
    }
}

impl PairSums {
    fn new(sol: &GreensSolution, t: f64) -> Self {
        let roots = *sol.roots();
        let res = *sol.residues();
        let exp_zt = [
            (roots[0] * t).exp(),
            (roots[1] * t).exp(),
            (roots[2] * t).exp(),
        ];
        let mut u = [Complex64::default(); 9];
        let mut e_u = [Complex64::default(); 9];
        let mut wxx = [Complex64::default(); 9];
        let mut wpp = [Complex64::default(); 9];
        let mut wpx = [Complex64::default(); 9];
        for i in 0..3 {
            for j in 0..3 {
                let k = 3 * i + j;
                u[k] = roots[i] + roots[j];
                e_u[k] = em1(u[k], t);
                let (di, dj) = (res[i], res[j]);
                let (dzi, dzj) = (di * roots[i], dj * roots[j]);
                wxx[k] = 2.0 * di * dj;
                wpp[k] = 2.0 * dzi * dzj;
                wpx[k] = dzi * dj + dzj * di;
            }
        }
        Self {
            t,
            roots,
            exp_zt,
            u,
            e_u,
            wxx,
            wpp,
            wpx,
        }
    }

    /// Channel sums S_alpha(a) = sum_{ij} w_ij a [u_ij, z_j - a]phi, with
    /// e^{-a t} supplied (q^n recurrence for the Matsubara ladder).
    fn s_of_a(&self, a: f64, exp_at: f64) -> [Complex64; 3] {
        let t = self.t;
        let mut av = [Complex64::default(); 3];
        for k in 0..3 {
            let v = self.roots[k] - a;
            av[k] = em1_pre(v, self.exp_zt[k] * exp_at, t);
        }
        let mut s = [Complex64::default(); 3];
        for i in 0..3 {
            for j in 0..3 {
                let k = 3 * i + j;
                let x = a * dd_pre(self.u[k], self.e_u[k], self.roots[j] - a, av[j], t);
                s[0] += self.wxx[k] * x;
                s[1] += self.wpp[k] * x;
                s[2] += self.wpx[k] * x;
            }
        }
        s
    }

    /// Large-a expansion coefficients of the channel sums,
    /// S(a) = S_inf - B/a + O(1/a^2) with X_ij -> E_ij - (E_ij z_i + 1)/a,
    /// so the omitted Matsubara terms sum to an analytic tail.
    fn tail_coefficients(&self) -> ([Complex64; 3], [Complex64; 3]) {
        let mut s = [Complex64::default(); 3];
        let mut b = [Complex64::default(); 3];
        for i in 0..3 {
            for j in 0..3 {
                let k = 3 * i + j;
                let first = self.e_u[k];
                let second = self.e_u[k] * self.roots[i] + 1.0;
                s[0] += self.wxx[k] * first;
                s[1] += self.wpp[k] * first;
                s[2] += self.wpx[k] * first;
                b[0] += self.wxx[k] * second;
                b[1] += self.wpp[k] * second;
                b[2] += self.wpx[k] * second;
            }
        }
        (s, b)
    }

    /// Channel sums of dX/da at a, for the removable |nu_n| = Omega
    /// singularity: X'(a) = [u, z_j - a]phi - a [u, z_j - a, z_j - a]phi.
    fn s_prime(&self, a: f64) -> [Complex64; 3] {
        let t = self.t;
        let mut s = [Complex64::default(); 3];
        for i in 0..3 {
            for j in 0..3 {
                let k = 3 * i + j;
                let v = self.roots[j] - a;
                let xp = dd_em1(self.u[k], v, t) - a * dd2_em1(self.u[k], v, t);
                s[0] += self.wxx[k] * xp;
                s[1] += self.wpp[k] * xp;
                s[2] += self.wpx[k] * xp;
            }
        }
        s
    }
}

/// Noise contributions (I_xx, I_pp, I_px) at time t from the closed-form
/// Matsubara series, n = 0 plus twice n >= 1, truncated when all three
/// increments drop below `cfg.series_tol` (never before the last
/// denominator sign change at nu_n = Omega).
pub fn noise_matrix(sol: &GreensSolution, t: f64, cfg: &NoiseConfig) -> Result<NoiseMatrix> {
    let p = sol.params();
    if p.kt <= 0.0 {
        return Err(Error::ZeroTemperature);
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("noise matrix needs t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(NoiseMatrix::zero());
    }
    let c = p.cutoff;
    let csq = c * c;
    let pref = [
        2.0 * p.gamma * p.kt * csq / p.m,
        2.0 * p.m * p.gamma * p.kt * csq,
        2.0 * p.gamma * p.kt * csq,
    ];
    let sums = PairSums::new(sol, t);
    let s_cut = sums.s_of_a(c, (-c * t).exp());

    let mut acc = [0.0f64; 3];
    for ch in 0..3 {
        acc[ch] = pref[ch] * s_cut[ch].re / csq;
    }

    let q1 = (-2.0 * std::f64::consts::PI * p.kt * t).exp();
    let mut qn = 1.0f64;
    // never truncate before nu_n clears the denominator sign change at
    // Omega, the root scale AND 1/t: below those the increments are not yet
    // monotone and the 1/nu expansion behind the tail correction is invalid
    let root_scale = sol.roots().iter().map(|z| z.norm()).fold(c, f64::max);
    let n_min = (5.0 * root_scale.max(1.0 / t) / matsubara_frequency(1, p.kt)).ceil() as usize + 1;
    let mut worst = f64::INFINITY;
    for n in 1..=cfg.n_cap {
        qn *= q1;
        let nu = matsubara_frequency(n, p.kt);
        let mut inc = [0.0f64; 3];
        if (c - nu).abs() < MATSUBARA_DEGENERACY_TOL * c {
            let sp = sums.s_prime(0.5 * (c + nu));
            for ch in 0..3 {
                inc[ch] = 2.0 * pref[ch] * sp[ch].re / (c + nu);
            }
        } else {
            let s_nu = sums.s_of_a(nu, qn);
            let denom = csq - nu * nu;
            for ch in 0..3 {
                inc[ch] = 2.0 * pref[ch] * (s_cut[ch] - s_nu[ch]).re / denom;
            }
        }
        for ch in 0..3 {
            acc[ch] += inc[ch];
        }
        worst = inc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if n >= n_min && worst < cfg.series_tol {
            // the omitted terms behave like
            // -2 (S(Omega) - S_inf)/nu^2 - 2 B/nu^3; correct the truncation
            // with their analytic sums so the result is limited by the
            // 1/nu^4 remainder, not by series_tol
            let (s_inf, b) = sums.tail_coefficients();
            let step = 2.0 * std::f64::consts::PI * p.kt;
            let tail2 = trigamma_tail(n) / (step * step);
            let tail3 = cube_tail(n) / (step * step * step);
            for ch in 0..3 {
                acc[ch] -= 2.0 * pref[ch] * ((s_cut[ch] - s_inf[ch]).re * tail2 + b[ch].re * tail3);
            }
            return Ok(NoiseMatrix {
                ixx: acc[0],
                ipp: acc[1],
                ipx: acc[2],
            });
        }
    }
    Err(Error::SeriesDiverged {
        n_cap: cfg.n_cap,
        last_increment: worst,
        t,
    })
}

/// Reference evaluation of the noise contributions by direct adaptive
/// quadrature of the defining double integrals,
/// I_xx = 1/(2 m^2) int int G2(t-s) G2(t-s') D1(s-s') ds ds' and the dG2
/// analogues. Much slower than [`noise_matrix`]; intended as an independent
/// cross-check.
pub fn noise_oracle(sol: &GreensSolution, t: f64) -> Result<NoiseMatrix> {
    let p = *sol.params();
    if p.kt <= 0.0 {
        return Err(Error::ZeroTemperature);
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("noise oracle needs t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(NoiseMatrix::zero());
    }

    // after tau = s - s', the double integral is
    // int_{-t}^{t} dtau D1(tau) K(tau),
    // K(tau) = int f(u) g(u + tau) du over u in [max(0,-tau), min(t, t-tau)];
    // D1 is even, so fold to tau >= 0 with K(tau) + K(-tau). The px channel
    // suffers heavy cancellation, so the outer tolerance is absolute.
    let channel = |fl: &dyn Fn(f64) -> f64, fr: &dyn Fn(f64) -> f64| -> Result<f64> {
        let inner = |tau: f64| -> Result<f64> {
            let lo = 0.0f64.max(-tau);
            let hi = t.min(t - tau);
            if hi <= lo {
                return Ok(0.0);
            }
            quad::adaptive(|u| fl(u) * fr(u + tau), lo, hi, 1e-9, 1e-15)
        };
        let outer = |tau: f64| -> f64 {
            let d1 = noise_kernel_ref(tau, &p).expect("noise kernel reference evaluation");
            d1 * (inner(tau).expect("inner quadrature") + inner(-tau).expect("inner quadrature"))
        };
        // split at the bath memory scale; tau = 0 is an integrable log point
        let split = t.min(0.5 / p.cutoff);
        let head = quad::adaptive(outer, 0.0, split, 1e-8, 5e-10)?;
        let rest = if t > split {
            quad::adaptive(outer, split, t, 1e-8, 5e-10)?
        } else {
            0.0
        };
        Ok(head + rest)
    };

    let g2 = |u: f64| sol.eval_raw(u).g2;
    let dg2 = |u: f64| sol.eval_raw(u).dg2;
    Ok(NoiseMatrix {
        ixx: channel(&g2, &g2)? / (2.0 * p.m * p.m),
        ipp: channel(&dg2, &dg2)? / 2.0,
        ipx: channel(&dg2, &g2)? / (2.0 * p.m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::build_greens;
    use crate::model::{coherent_state, PhysParams};
    use approx::assert_relative_eq;

    fn params(gamma: f64, cutoff: f64, kt: f64) -> PhysParams {
        PhysParams::from_ratios(gamma, cutoff, kt).unwrap()
    }

    fn tight() -> NoiseConfig {
        NoiseConfig::new(1e-10, 20_000_000).unwrap()
    }

    #[test]
    fn mean_identity_at_zero() {
        let p = params(0.4, 10.0, 1.0);
        let sol = build_greens(&p).unwrap();
        let s = coherent_state(1.2, -0.7, &p).unwrap();
        let (x, pp) = propagate_mean(&s, &sol, 0.0).unwrap();
        assert!((x - 1.2).abs() < 1e-12 && (pp + 0.7).abs() < 1e-12);
    }

    #[test]
    fn undamped_mean_rotates() {
        let p = params(0.0, 10.0, 1.0);
        let sol = build_greens(&p).unwrap();
        let s = coherent_state(1.0, 0.5, &p).unwrap();
        for &t in &[0.3, 1.7, 6.0] {
            let (x, pp) = propagate_mean(&s, &sol, t).unwrap();
            assert_relative_eq!(x, t.cos() + 0.5 * t.sin(), epsilon = 1e-10);
            assert_relative_eq!(pp, -t.sin() + 0.5 * t.cos(), epsilon = 1e-10);
        }
    }

    #[test]
    fn damped_means_decay() {
        let p = params(0.5, 50.0, 1.0);
        let sol = build_greens(&p).unwrap();
        let s = coherent_state(2.0, 1.0, &p).unwrap();
        let (x, pp) = propagate_mean(&s, &sol, 150.0).unwrap();
        assert!(x.abs() < 1e-10 && pp.abs() < 1e-10);
    }

    #[test]
    fn noise_vanishes_at_zero_time() {
        let p = params(0.3, 20.0, 2.0);
        let sol = build_greens(&p).unwrap();
        assert_eq!(noise_matrix(&sol, 0.0, &NoiseConfig::default()).unwrap(), NoiseMatrix::zero());
        assert_eq!(noise_oracle(&sol, 0.0).unwrap(), NoiseMatrix::zero());
    }

    #[test]
    fn covariance_unchanged_at_zero_time() {
        let p = params(0.3, 20.0, 2.0);
        let sol = build_greens(&p).unwrap();
        let s = coherent_state(0.5, 0.0, &p).unwrap();
        let cov = propagate_covariance(&s, &sol, &NoiseMatrix::zero(), 0.0).unwrap();
        assert_relative_eq!(cov.xx, s.cov.xx, max_relative = 1e-12);
        assert_relative_eq!(cov.pp, s.cov.pp, max_relative = 1e-12);
        assert!(cov.xp.abs() < 1e-12);
    }

    #[test]
    fn undamped_covariance_is_symplectic() {
        // gamma = 0: det sigma is conserved
        let p = params(0.0, 10.0, 1.0);
        let sol = build_greens(&p).unwrap();
        let s = coherent_state(1.0, 0.0, &p).unwrap();
        for &t in &[0.5, 2.0, 9.0] {
            let cov = propagate_covariance(&s, &sol, &NoiseMatrix::zero(), t).unwrap();
            assert_relative_eq!(cov.det(), 0.25, max_relative = 1e-10);
        }
    }

    #[test]
    fn closed_form_matches_quadrature_oracle() {
        let p = params(0.1, 100.0, 1.0);
        let sol = build_greens(&p).unwrap();
        let cf = noise_matrix(&sol, 2.0, &tight()).unwrap();
        let or = noise_oracle(&sol, 2.0).unwrap();
        assert_relative_eq!(cf.ixx, or.ixx, max_relative = 1e-5, epsilon = 1e-10);
        assert_relative_eq!(cf.ipp, or.ipp, max_relative = 1e-5, epsilon = 1e-10);
        assert_relative_eq!(cf.ipx, or.ipx, max_relative = 1e-5, epsilon = 1e-10);
    }

    #[test]
    fn mass_scaling_of_prefactors() {
        // I_xx ~ 1/m, I_pp ~ m, I_px independent of m: the channel sums are
        // built from the cubic's roots, which never see the mass
        let base = PhysParams::new(1.0, 1.0, 0.3, 5.0, 2.0).unwrap();
        let doubled = PhysParams::new(2.0, 1.0, 0.3, 5.0, 2.0).unwrap();
        let cfg = tight();
        let a = noise_matrix(&build_greens(&base).unwrap(), 1.5, &cfg).unwrap();
        let b = noise_matrix(&build_greens(&doubled).unwrap(), 1.5, &cfg).unwrap();
        // the stopping index can differ because the criterion is absolute,
        // so the match is tight but not bitwise
        assert_relative_eq!(b.ixx, 0.5 * a.ixx, max_relative = 1e-8);
        assert_relative_eq!(b.ipp, 2.0 * a.ipp, max_relative = 1e-8);
        assert_relative_eq!(b.ipx, a.ipx, max_relative = 1e-8);
    }

    #[test]
    fn cross_noise_is_half_mass_times_xx_rate() {
        // I_px = (m/2) d/dt I_xx, from differentiating the defining double
        // integral under the symmetric kernel
        let p = PhysParams::new(1.7, 1.0, 0.2, 8.0, 1.0).unwrap();
        let sol = build_greens(&p).unwrap();
        let cfg = tight();
        let t = 1.3;
        let hstep = 1e-4;
        let plus = noise_matrix(&sol, t + hstep, &cfg).unwrap().ixx;
        let minus = noise_matrix(&sol, t - hstep, &cfg).unwrap().ixx;
        let rate = p.m / 2.0 * (plus - minus) / (2.0 * hstep);
        let ipx = noise_matrix(&sol, t, &cfg).unwrap().ipx;
        assert_relative_eq!(ipx, rate, max_relative = 1e-3);
    }

    #[test]
    fn matsubara_crossing_is_smooth() {
        // place nu_5 exactly on the cutoff and approach it from both sides
        let nu5 = matsubara_frequency(5, 1.0);
        let exact = noise_matrix(
            &build_greens(&params(0.2, nu5, 1.0)).unwrap(),
            1.0,
            &tight(),
        )
        .unwrap();
        let near = noise_matrix(
            &build_greens(&params(0.2, nu5 * (1.0 + 3e-7), 1.0)).unwrap(),
            1.0,
            &tight(),
        )
        .unwrap();
        let off = noise_matrix(
            &build_greens(&params(0.2, nu5 * (1.0 + 1e-4), 1.0)).unwrap(),
            1.0,
            &tight(),
        )
        .unwrap();
        assert!(exact.ixx.is_finite() && near.ixx.is_finite());
        assert_relative_eq!(exact.ixx, near.ixx, max_relative = 1e-6);
        assert_relative_eq!(exact.ixx, off.ixx, max_relative = 1e-3);
        assert_relative_eq!(exact.ipp, off.ipp, max_relative = 1e-3);
        assert_relative_eq!(exact.ipx, off.ipx, max_relative = 1e-2, epsilon = 1e-8);
    }

    #[test]
    fn noise_diagonals_nonnegative() {
        for (g, c, kt) in [(0.1, 100.0, 1.0), (1.0, 5.0, 0.5), (2.0, 100.0, 10.0)] {
            let sol = build_greens(&params(g, c, kt)).unwrap();
            for &t in &[0.05, 0.5, 2.0, 10.0] {
                let n = noise_matrix(&sol, t, &tight()).unwrap();
                assert!(n.ixx >= -1e-9, "ixx = {} at {g},{c},{kt},t={t}", n.ixx);
                assert!(n.ipp >= -1e-9, "ipp = {} at {g},{c},{kt},t={t}", n.ipp);
            }
        }
    }

    #[test]
    fn high_temperature_equipartition() {
        // k_B T/omega0 = 100, gamma = 0.1, Omega = 100: stationary
        // covariance approaches the classical values kT/(m w0^2) and m kT
        let p = params(0.1, 100.0, 100.0);
        let sol = build_greens(&p).unwrap();
        let s = coherent_state(0.0, 0.0, &p).unwrap();
        let noise = noise_matrix(&sol, 40.0, &NoiseConfig::default()).unwrap();
        let cov = propagate_covariance(&s, &sol, &noise, 40.0).unwrap();
        assert_relative_eq!(cov.xx, p.kt / (p.m * p.omega0 * p.omega0), max_relative = 5e-2);
        assert_relative_eq!(cov.pp, p.m * p.kt, max_relative = 5e-2);
    }

    #[test]
    fn covariance_is_state_independent_noise() {
        // equal initial covariances propagate identically, bit for bit
        let p = params(0.4, 30.0, 3.0);
        let sol = build_greens(&p).unwrap();
        let s1 = coherent_state(-2.0, 0.3, &p).unwrap();
        let s2 = coherent_state(5.0, -1.0, &p).unwrap();
        let noise = noise_matrix(&sol, 1.2, &NoiseConfig::default()).unwrap();
        let c1 = propagate_covariance(&s1, &sol, &noise, 1.2).unwrap();
        let c2 = propagate_covariance(&s2, &sol, &noise, 1.2).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn truncation_monotonicity() {
        let p = params(0.3, 10.0, 0.8);
        let sol = build_greens(&p).unwrap();
        let coarse = NoiseConfig::new(1e-3, 1_000_000).unwrap();
        let raised = NoiseConfig::new(1e-3, 20_000_000).unwrap();
        let fine = NoiseConfig::new(1e-11, 20_000_000).unwrap();
        for &t in &[0.3, 1.0, 4.0] {
            let a = noise_matrix(&sol, t, &coarse).unwrap();
            // raising the cap leaves a converged sum untouched
            assert_eq!(a, noise_matrix(&sol, t, &raised).unwrap());
            let b = noise_matrix(&sol, t, &fine).unwrap();
            for (x, y) in [(a.ixx, b.ixx), (a.ipp, b.ipp), (a.ipx, b.ipx)] {
                assert!((x - y).abs() <= coarse.series_tol, "drift {} at t={t}", (x - y).abs());
            }
        }
    }

    #[test]
    fn zero_temperature_rejected() {
        let p = PhysParams::new(1.0, 1.0, 0.1, 10.0, 0.0).unwrap();
        let sol = build_greens(&p).unwrap();
        assert!(matches!(
            noise_matrix(&sol, 1.0, &NoiseConfig::default()),
            Err(Error::ZeroTemperature)
        ));
    }
}
