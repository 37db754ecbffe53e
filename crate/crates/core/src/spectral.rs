//! Ohmic spectral density with Lorentz–Drude cutoff, the damping and noise
//! kernels it generates, the temperature-dressed effective spectral density,
//! and the analytic resonance curve in the cutoff–temperature plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::PhysParams;
use crate::{Error, Result};

/// Truncation control for the Matsubara series in the noise kernel and the
/// noise contributions to the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Absolute threshold on the difference of successive partial sums
    /// (natural units).
    pub series_tol: f64,
    /// Hard cap on the number of Matsubara index pairs; prevents hangs at
    /// very low temperature.
    pub n_cap: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            series_tol: 1e-3,
            n_cap: 1_000_000,
        }
    }
}

impl NoiseConfig {
    pub fn new(series_tol: f64, n_cap: usize) -> Result<Self> {
        if !(series_tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "series_tol must be > 0, got {series_tol}"
            )));
        }
        if n_cap == 0 {
            return Err(Error::InvalidParams("n_cap must be >= 1".into()));
        }
        Ok(Self { series_tol, n_cap })
    }
}

/// Matsubara frequency nu_n = 2 pi n kT (hbar = 1).
pub fn matsubara_frequency(n: usize, kt: f64) -> f64 {
    2.0 * std::f64::consts::PI * n as f64 * kt
}

/// Ohmic spectral density with Lorentz–Drude cutoff,
/// J(w) = (2 m gamma / pi) w Omega^2 / (Omega^2 + w^2).
pub fn density(omega: f64, params: &PhysParams) -> Result<f64> {
    if omega < 0.0 {
        return Err(Error::Domain(format!("spectral density needs omega >= 0, got {omega}")));
    }
    let c = params.cutoff;
    Ok(2.0 * params.m * params.gamma / std::f64::consts::PI * omega * c * c / (c * c + omega * omega))
}

/// Memory friction kernel gamma(t) = 2 gamma Omega e^{-Omega t}, the closed
/// form of (2/m) integral dw J(w)/w cos(w t) for the Lorentz–Drude cutoff.
pub fn damping_kernel(t: f64, params: &PhysParams) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("damping kernel needs t >= 0, got {t}")));
    }
    Ok(2.0 * params.gamma * params.cutoff * (-params.cutoff * t).exp())
}

/// Laplace transform of the damping kernel, 2 gamma Omega / (z + Omega).
pub fn damping_kernel_laplace(z: Complex64, params: &PhysParams) -> Result<Complex64> {
    let denom = z + params.cutoff;
    if denom.norm() < 1e-14 * params.cutoff {
        return Err(Error::Domain(format!("damping kernel Laplace transform has a pole at z = -Omega = {}", -params.cutoff)));
    }
    Ok(Complex64::new(2.0 * params.gamma * params.cutoff, 0.0) / denom)
}

/// Matsubara term (Omega e^{-Omega tau} - nu e^{-nu tau})/(Omega^2 - nu^2)
/// with the removable singularity at nu = Omega replaced by its limit
/// e^{-Omega tau}(1 - Omega tau)/(2 Omega).
fn matsubara_term(cutoff: f64, nu: f64, tau: f64) -> f64 {
    if (cutoff - nu).abs() < 1e-8 * cutoff {
        (-cutoff * tau).exp() * (1.0 - cutoff * tau) / (2.0 * cutoff)
    } else {
        (cutoff * (-cutoff * tau).exp() - nu * (-nu * tau).exp()) / (cutoff * cutoff - nu * nu)
    }
}

/// Symmetrized bath-force autocorrelation ("noise kernel") D1(tau) as a
/// Matsubara series,
/// D1 = 4 m gamma kT Omega^2 sum_n (Omega e^{-Omega|tau|} - |nu_n| e^{-|nu_n||tau|})/(Omega^2 - nu_n^2),
/// collapsed to the n = 0 term plus twice the n >= 1 terms and truncated when
/// successive partial sums differ by less than `cfg.series_tol`.
pub fn noise_kernel(tau: f64, params: &PhysParams, cfg: &NoiseConfig) -> Result<f64> {
    if params.kt <= 0.0 {
        return Err(Error::ZeroTemperature);
    }
    let at = tau.abs();
    let c = params.cutoff;
    let pref = 4.0 * params.m * params.gamma * params.kt * c * c;
    let mut sum = (-c * at).exp() / c;
    // never truncate before nu_n clears the denominator sign change at
    // Omega with enough margin for the analytic tail below to be valid
    let n_min = (5.0 * c / matsubara_frequency(1, params.kt)).ceil() as usize + 1;
    let mut last = f64::INFINITY;
    for n in 1..=cfg.n_cap {
        let nu = matsubara_frequency(n, params.kt);
        let inc = 2.0 * matsubara_term(c, nu, at);
        sum += inc;
        last = pref * inc.abs();
        if last < cfg.series_tol && n >= n_min {
            // omitted terms approach -Omega e^{-Omega tau}/nu^2; sum their
            // analytic tail so the truncation error is subleading
            sum -= 2.0 * c * (-c * at).exp() * trigamma_tail(n)
                / (2.0 * std::f64::consts::PI * params.kt).powi(2);
            return Ok(pref * sum);
        }
    }
    Err(Error::SeriesDiverged {
        n_cap: cfg.n_cap,
        last_increment: last,
        t: tau,
    })
}

/// Tail of the trigamma function, sum_{n > m} 1/n^2, via Euler–Maclaurin.
pub(crate) fn trigamma_tail(m: usize) -> f64 {
    let mut s = 0.0;
    for n in (m + 1)..=(m + 40) {
        s += 1.0 / (n as f64 * n as f64);
    }
    let big = (m + 41) as f64;
    s + 1.0 / big + 1.0 / (2.0 * big * big) + 1.0 / (6.0 * big * big * big)
}

/// sum_{n > m} 1/n^3 via Euler–Maclaurin.
pub(crate) fn cube_tail(m: usize) -> f64 {
    let mut s = 0.0;
    for n in (m + 1)..=(m + 40) {
        let x = n as f64;
        s += 1.0 / (x * x * x);
    }
    let big = (m + 41) as f64;
    s + 1.0 / (2.0 * big * big) + 1.0 / (2.0 * big * big * big) + 1.0 / (4.0 * big * big * big * big)
}

/// High-accuracy evaluation of D1 used by the quadrature oracles. The
/// logarithmic tau -> 0 part of the series, sum 2 e^{-nu_n tau}/nu_n, is
/// resummed as -ln(1 - e^{-2 pi kT tau})/(pi kT); the remainder converges
/// like 1/n^2 uniformly in tau and its tail is corrected analytically.
pub(crate) fn noise_kernel_ref(tau: f64, params: &PhysParams) -> Result<f64> {
    if params.kt <= 0.0 {
        return Err(Error::ZeroTemperature);
    }
    let at = tau.abs();
    if at == 0.0 {
        return Err(Error::Domain("noise kernel diverges logarithmically at tau = 0".into()));
    }
    let c = params.cutoff;
    let kt = params.kt;
    let pref = 4.0 * params.m * params.gamma * kt * c * c;
    let ec = (-c * at).exp();
    let q = (-2.0 * std::f64::consts::PI * kt * at).exp();
    let mut sum = ec / c - (-q).ln_1p() / (std::f64::consts::PI * kt);
    let scale = sum.abs();
    let mut n = 1usize;
    loop {
        let nu = matsubara_frequency(n, kt);
        let bracket = if (c - nu).abs() < 1e-8 * c {
            -ec * (1.0 + c * at) / (2.0 * c)
        } else {
            c * ec / (c * c - nu * nu) + c * c * (-nu * at).exp() / (nu * (nu * nu - c * c))
        };
        sum += 2.0 * bracket;
        if nu > 2.0 * c && bracket.abs() < 1e-9 * scale {
            // analytic tail of the dominant -Omega e^{-Omega tau}/nu^2 part
            let tail = -2.0 * c * ec / (2.0 * std::f64::consts::PI * kt).powi(2) * trigamma_tail(n);
            return Ok(pref * (sum + tail));
        }
        n += 1;
        if n > 10_000_000 {
            return Err(Error::SeriesDiverged {
                n_cap: 10_000_000,
                last_increment: pref * bracket.abs(),
                t: tau,
            });
        }
    }
}

/// Effective spectral density J_eff = J(w) coth(w / 2 kT), the frequency
/// spectrum of the noise kernel. Finite limit (4 m gamma / pi) kT at w = 0;
/// reduces to J at kT = 0.
pub fn effective_density(omega: f64, params: &PhysParams) -> Result<f64> {
    if omega < 0.0 {
        return Err(Error::Domain(format!("effective spectral density needs omega >= 0, got {omega}")));
    }
    if params.kt == 0.0 {
        return density(omega, params);
    }
    let c = params.cutoff;
    let lorentz = 2.0 * params.m * params.gamma / std::f64::consts::PI * c * c / (c * c + omega * omega);
    let x = omega / (2.0 * params.kt);
    // w coth(w/2kT) -> 2kT (1 + x^2/3 + ...) near w = 0
    let w_coth = if x < 1e-4 {
        2.0 * params.kt * (1.0 + x * x / 3.0)
    } else {
        omega / x.tanh()
    };
    Ok(lorentz * w_coth)
}

/// Cutoff value on the resonance curve where the effective spectral density
/// peaks exactly at omega0:
/// Omega* = omega0 sqrt[(kT sinh(omega0/kT) + omega0)/(kT sinh(omega0/kT) - omega0)].
/// Always larger than omega0 and asymptotically 2 sqrt(3) kT at high
/// temperature.
pub fn resonance_cutoff(kt: f64, omega0: f64) -> Result<f64> {
    if !(kt > 0.0) {
        return Err(Error::Domain(format!("resonance curve needs kT > 0, got {kt}")));
    }
    if !(omega0 > 0.0) {
        return Err(Error::InvalidParams(format!("omega0 must be > 0, got {omega0}")));
    }
    let x = omega0 / kt;
    // r = omega0 / (kT sinh x), evaluated without overflowing sinh
    let r = if x > 700.0 {
        2.0 * omega0 * (-x).exp() / kt
    } else {
        omega0 / (kt * x.sinh())
    };
    Ok(omega0 * ((1.0 + r) / (1.0 - r)).sqrt())
}
