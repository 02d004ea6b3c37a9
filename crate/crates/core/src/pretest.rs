//! The Hausman pretest and the confidence intervals of the two-stage
//! procedure: I(ψ) after acceptance, J(σε) after rejection, and the
//! fixed-effects interval J_c with arbitrary nominal coverage c.

use crate::error::{Error, Result};
use crate::estimators::{conditional_variances, gls_slope, PanelStats, WeightQuantities};
use crate::normal;

/// Which model an interval is based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    RandomIntercept,
    FixedEffects,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub branch: Branch,
    pub nominal_level: f64,
}

impl Interval {
    fn centered(center: f64, half_length: f64, branch: Branch, nominal_level: f64) -> Self {
        Self {
            lower: center - half_length,
            upper: center + half_length,
            branch,
            nominal_level,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// h = (β̃_W − β̃_B) / (Var(β̃_W|x) + Var₀(β̃_B|x))^{1/2} and H = h².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausmanStatistic {
    pub h: f64,
    pub value: f64,
}

pub fn hausman(beta_w: f64, beta_b: f64, var_w: f64, var0_b: f64) -> Result<HausmanStatistic> {
    let denom = var_w + var0_b;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateSample(
            "Hausman denominator is not positive",
        ));
    }
    let h = (beta_w - beta_b) / denom.sqrt();
    Ok(HausmanStatistic { h, value: h * h })
}

/// Acceptance threshold z²_{1−α̃/2}.
pub fn acceptance_threshold(alpha_tilde: f64) -> f64 {
    let z = normal::two_sided_critical(alpha_tilde);
    z * z
}

/// Accept H₀: τ = 0 iff H ≤ z²_{1−α̃/2}.
pub fn decide(statistic: f64, alpha_tilde: f64) -> bool {
    statistic <= acceptance_threshold(alpha_tilde)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretestOutcome {
    pub h: f64,
    pub statistic: f64,
    pub accept: bool,
}

impl PretestOutcome {
    pub fn new(stat: HausmanStatistic, alpha_tilde: f64) -> Self {
        Self {
            h: stat.h,
            statistic: stat.value,
            accept: decide(stat.value, alpha_tilde),
        }
    }
}

/// I(ψ): centered at β̂(ψ) with half-length z_{1−α/2} Var₀(β̂(ψ)|x)^{1/2}.
pub fn interval_i(beta_gls: f64, var0_gls: f64, alpha: f64) -> Interval {
    let half = normal::two_sided_critical(alpha) * var0_gls.sqrt();
    Interval::centered(beta_gls, half, Branch::RandomIntercept, 1.0 - alpha)
}

/// J_c: centered at β̃_W with half-length Φ⁻¹((c+1)/2) σε / SSW^{1/2}.
pub fn interval_jc(beta_w: f64, ssw: f64, sigma_eps: f64, c: f64) -> Interval {
    let half = normal::central_multiplier(c) * sigma_eps / ssw.sqrt();
    Interval::centered(beta_w, half, Branch::FixedEffects, c)
}

/// K = I if the pretest accepts, J otherwise.
pub fn two_stage(outcome: &PretestOutcome, i: Interval, j: Interval) -> Interval {
    if outcome.accept {
        i
    } else {
        j
    }
}

/// Everything the two-stage procedure produces on one replicate for a given
/// plug-in (σε, ψ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStageResult {
    pub outcome: PretestOutcome,
    pub i: Interval,
    pub j: Interval,
    pub k: Interval,
    pub weights: WeightQuantities,
}

/// Run the pretest and build I, J and K from a replicate's statistics, using
/// `sigma_eps` and `psi` wherever the variances enter.
pub fn run_two_stage(
    stats: &PanelStats,
    sigma_eps: f64,
    psi: f64,
    alpha: f64,
    alpha_tilde: f64,
) -> Result<TwoStageResult> {
    let t = stats.moments.t;
    let vars = conditional_variances(stats.ssw, stats.ssb, psi, t, sigma_eps)?;
    let stat = hausman(stats.beta_w, stats.beta_b, vars.within, vars.between)?;
    let outcome = PretestOutcome::new(stat, alpha_tilde);
    let beta_gls = gls_slope(stats.beta_w, stats.beta_b, stats.ssw, stats.ssb, psi, t);
    let i = interval_i(beta_gls, vars.gls, alpha);
    let j = interval_jc(stats.beta_w, stats.ssw, sigma_eps, 1.0 - alpha);
    let k = two_stage(&outcome, i, j);
    Ok(TwoStageResult {
        outcome,
        i,
        j,
        k,
        weights: WeightQuantities::new(psi, t, stats.r),
    })
}
