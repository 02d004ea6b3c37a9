//! Conditional law of the standardized statistics given the covariates, and
//! the exact conditional coverage of K when the variances are known.

use crate::bvn::bvn_rect;
use crate::error::{Error, Result};
use crate::estimators::q_factor;
use crate::normal;

/// Means, variances and covariances of (g_I, h) and (g_J, h) given x.
/// g_J is standard normal, so its mean and variance are not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalLaw {
    pub mean_g_i: f64,
    pub var_g_i: f64,
    pub mean_h: f64,
    pub var_h: f64,
    pub cov_g_i_h: f64,
    pub cov_g_j_h: f64,
}

/// p(x) = (SSB / Var(x̄_i))^{1/2}, taking the positive root.
pub fn p_of_x(ssb: f64, var_xbar: f64) -> f64 {
    (ssb / var_xbar).sqrt()
}

pub fn conditional_moments(tau: f64, psi: f64, t: usize, r: f64, p: f64) -> Result<ConditionalLaw> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain("r", r, "r > 0"));
    }
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::domain("p", p, "p >= 0"));
    }
    if !(tau.abs() < 1.0) {
        return Err(Error::domain("tau", tau, "|tau| < 1"));
    }
    if !(psi >= 0.0) || !psi.is_finite() {
        return Err(Error::domain("psi", psi, "psi >= 0"));
    }
    let q = q_factor(psi, t);
    let tp = tau * psi * p;
    let tt = tau * tau * psi * psi;
    let gi_den = q + q * q / r;
    let h_den = r + q;
    let law = ConditionalLaw {
        mean_g_i: tp / gi_den.sqrt(),
        var_g_i: 1.0 - tt / gi_den,
        mean_h: -tp / h_den.sqrt(),
        var_h: 1.0 - tt / h_den,
        cov_g_i_h: tt / ((q * r + q * q).sqrt() * (1.0 + q / r).sqrt()),
        cov_g_j_h: 1.0 / (1.0 + q / r).sqrt(),
    };
    if !(law.var_g_i > 0.0 && law.var_h > 0.0) {
        return Err(Error::Numerical {
            routine: "conditional_moments",
            detail: format!(
                "nonpositive variance: var_g_i = {}, var_h = {}",
                law.var_g_i, law.var_h
            ),
        });
    }
    Ok(law)
}

impl ConditionalLaw {
    // Both probabilities below use symmetric rectangles, so flipping the sign
    // of every mean leaves them unchanged. Fixing the sign makes τ ↦ −τ give
    // bit-identical results.
    fn canonical(&self) -> Self {
        let flip = self.mean_h > 0.0 || (self.mean_h == 0.0 && self.mean_g_i > 0.0);
        if flip {
            Self {
                mean_g_i: -self.mean_g_i,
                mean_h: -self.mean_h,
                ..*self
            }
        } else {
            *self
        }
    }
}

/// P(|g_I| ≤ z, |h| ≤ z̃ | x) and P(|g_J| ≤ z, |h| ≤ z̃ | x).
pub fn joint_acceptance_terms(law: &ConditionalLaw, alpha: f64, alpha_tilde: f64) -> (f64, f64) {
    let law = law.canonical();
    let z = normal::two_sided_critical(alpha);
    let zt = normal::two_sided_critical(alpha_tilde);
    let p_i = bvn_rect(
        -z,
        z,
        -zt,
        zt,
        law.mean_g_i,
        law.mean_h,
        law.var_g_i,
        law.var_h,
        law.cov_g_i_h,
    );
    let p_j = bvn_rect(
        -z,
        z,
        -zt,
        zt,
        0.0,
        law.mean_h,
        1.0,
        law.var_h,
        law.cov_g_j_h,
    );
    (p_i, p_j)
}

/// P(β ∈ K(σε, σμ) | x) = (1 − α) + P(|g_I| ≤ z, |h| ≤ z̃ | x) − P(|g_J| ≤ z, |h| ≤ z̃ | x).
pub fn conditional_coverage_known(law: &ConditionalLaw, alpha: f64, alpha_tilde: f64) -> f64 {
    let (p_i, p_j) = joint_acceptance_terms(law, alpha, alpha_tilde);
    ((1.0 - alpha) + p_i - p_j).clamp(0.0, 1.0)
}

/// P(|h| ≤ z̃ | x).
pub fn accept_prob_given_x(law: &ConditionalLaw, alpha_tilde: f64) -> f64 {
    let zt = normal::two_sided_critical(alpha_tilde);
    let m = law.mean_h.abs();
    let s = law.var_h.sqrt();
    (normal::cdf((zt - m) / s) - normal::cdf((-zt - m) / s)).clamp(0.0, 1.0)
}
