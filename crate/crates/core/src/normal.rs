//! Standard normal distribution helpers.
//!
//! The cdf goes through the complementary error function so that both tails
//! keep full relative accuracy. Inverse values start from statrs' erfc_inv and
//! get one Halley step against the libm erfc.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_SQRT_PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

/// Solve erfc(x) = y for y in (0, 2).
fn erfc_inverse(y: f64) -> f64 {
    let x = erfc_inv(y);
    if !x.is_finite() {
        return x;
    }
    let f = erfc(x) - y;
    let d = -FRAC_2_SQRT_PI * (-x * x).exp();
    // Halley: f'' / f' = −2x
    let step = f / d;
    x - step / (1.0 + x * step)
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal cdf, Φ(x).
#[inline]
pub fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

/// Upper tail, 1 − Φ(x), without cancellation.
#[inline]
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// Inverse standard normal cdf, Φ⁻¹(p). Returns ±∞ at the endpoints.
#[inline]
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -SQRT_2 * erfc_inverse(2.0 * p)
    }
}

/// Two-sided critical value z_{1−a/2}.
#[inline]
pub fn two_sided_critical(a: f64) -> f64 {
    if a <= 0.0 {
        f64::INFINITY
    } else if a >= 1.0 {
        0.0
    } else {
        SQRT_2 * erfc_inverse(a)
    }
}

/// Half-width multiplier Φ⁻¹((c + 1)/2) of a central interval with coverage c.
#[inline]
pub fn central_multiplier(c: f64) -> f64 {
    two_sided_critical(1.0 - c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn known_values() {
        assert_abs_diff_eq!(cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-15);
        assert_abs_diff_eq!(quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-13);
        assert_abs_diff_eq!(
            two_sided_critical(0.05),
            1.959_963_984_540_054,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            central_multiplier(0.95),
            1.959_963_984_540_054,
            epsilon = 1e-13
        );
        // far tail keeps relative accuracy
        let t = sf(10.0);
        assert!((t / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn endpoints() {
        assert_eq!(two_sided_critical(1.0), 0.0);
        assert_eq!(two_sided_critical(0.0), f64::INFINITY);
        assert_eq!(central_multiplier(0.0), 0.0);
        assert_eq!(cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(quantile(1.0), f64::INFINITY);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            assert_abs_diff_eq!(cdf(quantile(p)), p, epsilon = 1e-14);
        }
    }
}
