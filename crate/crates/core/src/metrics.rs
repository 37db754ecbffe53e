//! Distinguishability of single-mode Gaussian states: fidelity from the
//! first two moments, the Bures distance built on it, and the two-sided
//! trace-distance bounds.
//!
//! All inputs are dimensionless quadrature representations (vacuum variance
//! 1/2); conversion from physical units is the job of
//! [`crate::model::to_quadratures`].

use serde::{Deserialize, Serialize};

use crate::model::Covariance;
use crate::{Error, Result};

/// Round-off clamp for delta = 16 (det s1 - 1/4)(det s2 - 1/4), which dips
/// slightly negative when a state is exactly pure.
const DELTA_CLAMP: f64 = 1e-12;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Gaussian state in dimensionless quadratures X = sqrt(m w0) x,
/// P = p / sqrt(m w0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureState {
    pub mean: [f64; 2],
    pub cov: Covariance,
}

impl QuadratureState {
    pub fn new(mean: [f64; 2], cov: Covariance) -> Result<Self> {
        if !cov.is_positive_definite() {
            return Err(Error::InvalidState("quadrature covariance not positive definite".into()));
        }
        if cov.det() < 0.25 - 1e-9 {
            return Err(Error::InvalidState(format!(
                "quadrature covariance below the Heisenberg bound: det = {}",
                cov.det()
            )));
        }
        Ok(Self { mean, cov })
    }
}

/// Uhlmann fidelity of two single-mode Gaussian states in terms of their
/// moments:
/// F = 2 / (sqrt(Delta + delta) - sqrt(delta)) * exp(-(d2-d1)^T (s1+s2)^{-1} (d2-d1) / 2)
/// with Delta = 4 det(s1+s2) and delta = 16 (det s1 - 1/4)(det s2 - 1/4).
pub fn fidelity_gaussian(a: &QuadratureState, b: &QuadratureState) -> Result<f64> {
    let sum = a.cov.add(&b.cov);
    let det_sum = sum.det();
    if det_sum <= 0.0 {
        return Err(Error::InvalidState("singular covariance sum in fidelity".into()));
    }
    let big_delta = 4.0 * det_sum;
    let mut delta = 16.0 * (a.cov.det() - 0.25) * (b.cov.det() - 0.25);
    if delta < 0.0 {
        if delta < -DELTA_CLAMP {
            return Err(Error::InvalidState(format!(
                "delta = {delta} is negative beyond round-off; a state is unphysical"
            )));
        }
        delta = 0.0;
    }
    let dx = b.mean[0] - a.mean[0];
    let dp = b.mean[1] - a.mean[1];
    // (s1+s2)^{-1} applied to the mean difference
    let quad = (sum.pp * dx * dx - 2.0 * sum.xp * dx * dp + sum.xx * dp * dp) / det_sum;
    let f = 2.0 / ((big_delta + delta).sqrt() - delta.sqrt()) * (-0.5 * quad).exp();
    Ok(f.clamp(0.0, 1.0))
}

/// Bures distance D_B = sqrt(2 - 2 sqrt(F)); ranges over [0, sqrt(2)].
pub fn bures_distance(a: &QuadratureState, b: &QuadratureState) -> Result<f64> {
    Ok(bures_from_fidelity(fidelity_gaussian(a, b)?))
}

pub fn bures_from_fidelity(fidelity: f64) -> f64 {
    (2.0 - 2.0 * fidelity.clamp(0.0, 1.0).sqrt()).max(0.0).sqrt()
}

/// Two-sided bounds on the trace distance implied by a Bures distance:
/// D_B^2 / 2 <= D <= sqrt(1 - (1 - D_B^2/2)^2).
pub fn trace_distance_bounds(d_bures: f64) -> Result<(f64, f64)> {
    if !(-1e-12..=SQRT_2 + 1e-12).contains(&d_bures) {
        return Err(Error::Domain(format!(
            "Bures distance {d_bures} outside [0, sqrt(2)]"
        )));
    }
    let half_sq = (d_bures * d_bures / 2.0).clamp(0.0, 1.0);
    let lower = half_sq;
    let upper = (1.0 - (1.0 - half_sq) * (1.0 - half_sq)).max(0.0).sqrt();
    Ok((lower, upper))
}
