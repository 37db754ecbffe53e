//! Stable evaluation of phi(u) = (e^{u t} - 1)/u and its divided differences
//! in the complex plane.
//!
//! The closed-form noise integrals reduce to sums of first and second divided
//! differences of phi over nodes u = z_i + z_j, z_i - a with a a decay rate.
//! Nodes collide whenever a parameter sweep crosses a degeneracy
//! (z_i + z_j -> 0, a + z_i -> 0, a - |nu_n| -> 0), so every quotient here
//! switches to a series or derivative form near confluence instead of
//! cancelling catastrophically.
//!
//! Everything is expressed through the entire function h(x) = (e^x - 1)/x:
//! phi(u) = t h(u t), [u,v]phi = t^2 [x,y]h and [u,v,v]phi = t^3 [x,y,y]h
//! with x = u t, y = v t.

use num_complex::Complex64;

/// Below this magnitude, h and its derivatives use their Taylor series.
const SERIES_RADIUS: f64 = 0.5;

/// Relative node separation below which divided differences switch to the
/// confluent (derivative) form.
const CONFLUENT_TOL: f64 = 1e-7;

/// h(x) = (e^x - 1)/x, entire, h(0) = 1.
pub fn h(x: Complex64) -> Complex64 {
    if x.norm_sqr() < SERIES_RADIUS * SERIES_RADIUS {
        // sum_{k>=0} x^k/(k+1)!
        let mut sum = Complex64::new(1.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..25 {
            term = term * x / (k as f64 + 1.0);
            sum += term;
            if term.norm_sqr() < 1e-34 * sum.norm_sqr() {
                break;
            }
        }
        sum
    } else {
        (x.exp() - 1.0) / x
    }
}

/// h'(x) = (e^x (x - 1) + 1)/x^2, h'(0) = 1/2.
pub fn h_prime(x: Complex64) -> Complex64 {
    if x.norm_sqr() < SERIES_RADIUS * SERIES_RADIUS {
        // sum_{k>=1} k x^{k-1}/(k+1)!
        let mut sum = Complex64::new(0.5, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 2.0; // (k+1)! running value, k = 1
        for k in 2..26 {
            pow *= x;
            fact *= (k + 1) as f64;
            let term = pow * (k as f64) / fact;
            sum += term;
            if term.norm_sqr() < 1e-34 * sum.norm_sqr() {
                break;
            }
        }
        sum
    } else {
        ((x - 1.0) * x.exp() + 1.0) / (x * x)
    }
}

/// h''(x) = (e^x (x^2 - 2x + 2) - 2)/x^3, h''(0) = 1/3.
pub fn h_second(x: Complex64) -> Complex64 {
    if x.norm_sqr() < SERIES_RADIUS * SERIES_RADIUS {
        // sum_{k>=2} k(k-1) x^{k-2}/(k+1)!
        let mut sum = Complex64::new(1.0 / 3.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 6.0; // (k+1)! running value, k = 2
        for k in 3..27 {
            pow *= x;
            fact *= (k + 1) as f64;
            let term = pow * (k * (k - 1)) as f64 / fact;
            sum += term;
            if term.norm_sqr() < 1e-34 * sum.norm_sqr() {
                break;
            }
        }
        sum
    } else {
        ((x * x - 2.0 * x + 2.0) * x.exp() - 2.0) / (x * x * x)
    }
}

fn close(x: Complex64, y: Complex64) -> bool {
    let scale = 1.0 + x.norm().max(y.norm());
    (x - y).norm() < CONFLUENT_TOL * scale
}

/// First divided difference [x,y]h = (h(x) - h(y))/(x - y); h'(x) at x = y.
pub fn dd_h(x: Complex64, y: Complex64) -> Complex64 {
    if close(x, y) {
        h_prime(0.5 * (x + y))
    } else {
        (h(x) - h(y)) / (x - y)
    }
}

/// Second divided difference with one repeated node,
/// [x,y,y]h = ([x,y]h - h'(y))/(x - y); h''(y)/2 at x = y.
pub fn dd2_h(x: Complex64, y: Complex64) -> Complex64 {
    if close(x, y) {
        // evaluate at the node mean (x + 2y)/3 for second-order accuracy
        0.5 * h_second((x + 2.0 * y) / 3.0)
    } else {
        (dd_h(x, y) - h_prime(y)) / (x - y)
    }
}

/// phi(u) = (e^{u t} - 1)/u = t h(u t); the limit t as u -> 0.
pub fn em1(u: Complex64, t: f64) -> Complex64 {
    t * h(u * t)
}

/// [u,v]phi = t^2 [x,y]h.
pub fn dd_em1(u: Complex64, v: Complex64, t: f64) -> Complex64 {
    t * t * dd_h(u * t, v * t)
}

/// [u,v,v]phi = t^3 [x,y,y]h.
pub fn dd2_em1(u: Complex64, v: Complex64, t: f64) -> Complex64 {
    t * t * t * dd2_h(u * t, v * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn h_matches_series_and_closed_form_at_boundary() {
        // continuity across the series/closed-form switch
        for &im in &[0.0, 0.3, -0.45] {
            for &re in &[0.49, 0.51, -0.49, -0.51] {
                let x = c(re, im);
                let direct = (x.exp() - 1.0) / x;
                assert!((h(x) - direct).norm() < 1e-14 * direct.norm());
            }
        }
        assert!((h(c(0.0, 0.0)) - 1.0).norm() < 1e-16);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pts = [c(0.2, 0.1), c(-3.0, 2.0), c(-40.0, 5.0), c(0.0, 0.0)];
        let eps = 1e-6;
        for &x in &pts {
            let fd = (h(x + eps) - h(x - eps)) / (2.0 * eps);
            assert!(
                (h_prime(x) - fd).norm() < 1e-8 * (1.0 + fd.norm()),
                "h' mismatch at {x}"
            );
            let fd2 = (h_prime(x + eps) - h_prime(x - eps)) / (2.0 * eps);
            assert!(
                (h_second(x) - fd2).norm() < 1e-8 * (1.0 + fd2.norm()),
                "h'' mismatch at {x}"
            );
        }
    }

    #[test]
    fn divided_differences_continuous_at_confluence() {
        // approach the confluent branch from outside and compare
        let y = c(-2.0, 1.5);
        for &delta in &[1e-5, 1e-6] {
            let x = y + delta;
            let far = (h(x) - h(y)) / (x - y);
            assert!((dd_h(x, y) - far).norm() < 1e-12 * far.norm());
        }
        let x = y + 1e-9;
        // inside the confluent branch: must agree with the derivative
        assert!((dd_h(x, y) - h_prime(y)).norm() < 1e-8);
        assert!((dd2_h(x, y) - 0.5 * h_second(y)).norm() < 1e-8);
    }

    #[test]
    fn em1_limits() {
        assert!((em1(c(0.0, 0.0), 2.5) - 2.5).norm() < 1e-15);
        let u = c(-3.0, 0.0);
        let t = 1.25;
        let direct = ((u * t).exp() - 1.0) / u;
        assert!((em1(u, t) - direct).norm() < 1e-15);
        // t = 0 collapses everything to zero
        assert_eq!(em1(u, 0.0), c(0.0, 0.0));
        assert_eq!(dd_em1(u, c(1.0, 1.0), 0.0), c(0.0, 0.0));
    }

    #[test]
    fn dd2_matches_derivative_of_dd() {
        // d/dv [u,v]phi = [u,v,v]phi, checked by central differences
        let u = c(-1.0, 2.0);
        let v = c(-4.0, -0.5);
        let t = 0.7;
        let eps = 1e-6;
        let fd = (dd_em1(u, v + eps, t) - dd_em1(u, v - eps, t)) / (2.0 * eps);
        assert!((dd2_em1(u, v, t) - fd).norm() < 1e-7 * (1.0 + fd.norm()));
    }
}
