//! Within, between and GLS slope estimators, their conditional variances
//! given the covariates, and the three (σ̂ε², σ̂μ²) estimator pairs.

use crate::dgp::{EstimatorPair, PanelSample};
use crate::error::{Error, Result};

/// Within/between second moments of a balanced panel. All slope and
/// variance-component estimators are functions of these eight numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelMoments {
    pub n: usize,
    pub t: usize,
    /// SSW = Σ_i Σ_t (x_it − x̄_i)².
    pub ssw: f64,
    pub sxy_w: f64,
    pub syy_w: f64,
    /// SSB = Σ_i (x̄_i − x̄)².
    pub ssb: f64,
    pub sxy_b: f64,
    pub syy_b: f64,
}

impl PanelMoments {
    pub fn from_panel(p: &PanelSample) -> Self {
        let t = p.t;
        let ybar_i = p.y_bar_i();
        let ybar = ybar_i.iter().sum::<f64>() / p.n as f64;
        let (mut ssw, mut sxy_w, mut syy_w) = (0.0, 0.0, 0.0);
        let (mut ssb, mut sxy_b, mut syy_b) = (0.0, 0.0, 0.0);
        for i in 0..p.n {
            let (xb, yb) = (p.xbar_i[i], ybar_i[i]);
            for s in 0..t {
                let dx = p.x[i * t + s] - xb;
                let dy = p.y[i * t + s] - yb;
                ssw += dx * dx;
                sxy_w += dx * dy;
                syy_w += dy * dy;
            }
            let (dx, dy) = (xb - p.xbar, yb - ybar);
            ssb += dx * dx;
            sxy_b += dx * dy;
            syy_b += dy * dy;
        }
        Self {
            n: p.n,
            t,
            ssw,
            sxy_w,
            syy_w,
            ssb,
            sxy_b,
            syy_b,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::domain(
                "N",
                self.n as f64,
                "N >= 3 for the between regression",
            ));
        }
        if !(self.ssw > 0.0) {
            return Err(Error::DegenerateSample(
                "SSW = 0 (no within-individual covariate variation)",
            ));
        }
        if !(self.ssb > 0.0) {
            return Err(Error::DegenerateSample(
                "SSB = 0 (no between-individual covariate variation)",
            ));
        }
        Ok(())
    }

    /// Residual sums of squares of the pooled OLS fit of y on (1, x).
    /// Returns (Σ r̃_it², Σ_i Σ_{t<s} r̃_it r̃_is).
    pub fn pooled_residual_sums(&self) -> (f64, f64) {
        let tf = self.t as f64;
        let b = (self.sxy_w + tf * self.sxy_b) / (self.ssw + tf * self.ssb);
        let within = (self.syy_w - 2.0 * b * self.sxy_w + b * b * self.ssw).max(0.0);
        let between = (self.syy_b - 2.0 * b * self.sxy_b + b * b * self.ssb).max(0.0);
        let total = within + tf * between;
        // Σ_i (Σ_t r̃_it)² = T² Σ_i (r̃̄_i)²
        let cross = 0.5 * (tf * tf * between - total);
        (total, cross)
    }
}

/// Per-replicate summary used by the two-stage procedure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelStats {
    pub moments: PanelMoments,
    /// Within (fixed effects) OLS slope β̃_W.
    pub beta_w: f64,
    /// Between OLS slope β̃_B.
    pub beta_b: f64,
    pub ssw: f64,
    pub ssb: f64,
    /// r(x) = SSB / SSW.
    pub r: f64,
    /// Σ r_it² of the within regression.
    pub within_rss: f64,
    /// Σ r̄_i² of the between regression.
    pub between_rss: f64,
}

impl PanelStats {
    pub fn from_moments(m: PanelMoments) -> Result<Self> {
        m.check()?;
        let beta_w = m.sxy_w / m.ssw;
        let beta_b = m.sxy_b / m.ssb;
        Ok(Self {
            moments: m,
            beta_w,
            beta_b,
            ssw: m.ssw,
            ssb: m.ssb,
            r: m.ssb / m.ssw,
            within_rss: (m.syy_w - beta_w * m.sxy_w).max(0.0),
            between_rss: (m.syy_b - beta_b * m.sxy_b).max(0.0),
        })
    }

    pub fn from_panel(p: &PanelSample) -> Result<Self> {
        Self::from_moments(PanelMoments::from_panel(p))
    }

    /// Estimate (σε², σμ²) with the chosen pair.
    pub fn variances(&self, pair: EstimatorPair) -> Result<VarianceEstimates> {
        let (n, t) = (self.moments.n, self.moments.t);
        match pair {
            EstimatorPair::Unbiased => unbiased_from_sums(self.within_rss, self.between_rss, n, t),
            EstimatorPair::HsiaoMl => hsiao_ml(&self.moments),
            EstimatorPair::Wooldridge { k } => {
                let (ss, cross) = self.moments.pooled_residual_sums();
                wooldridge_from_sums(ss, cross, n, t, k)
            }
        }
    }
}

/// Within OLS fit of (y_it − ȳ_i) on (x_it − x̄_i) without intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct WithinFit {
    pub beta: f64,
    pub ssw: f64,
    pub residuals: Vec<f64>,
}

pub fn within_ols(p: &PanelSample) -> Result<WithinFit> {
    let t = p.t;
    let ybar_i = p.y_bar_i();
    let dx: Vec<f64> = (0..p.n * t).map(|k| p.x[k] - p.xbar_i[k / t]).collect();
    let dy: Vec<f64> = (0..p.n * t).map(|k| p.y[k] - ybar_i[k / t]).collect();
    let ssw: f64 = dx.iter().map(|d| d * d).sum();
    if !(ssw > 0.0) {
        return Err(Error::DegenerateSample(
            "SSW = 0 (no within-individual covariate variation)",
        ));
    }
    let beta = dx.iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>() / ssw;
    let residuals = dx.iter().zip(&dy).map(|(a, b)| b - beta * a).collect();
    Ok(WithinFit {
        beta,
        ssw,
        residuals,
    })
}

/// Between OLS fit of ȳ_i on (1, x̄_i).
#[derive(Debug, Clone, PartialEq)]
pub struct BetweenFit {
    pub intercept: f64,
    pub beta: f64,
    pub ssb: f64,
    pub residuals: Vec<f64>,
}

pub fn between_ols(p: &PanelSample) -> Result<BetweenFit> {
    if p.n < 3 {
        return Err(Error::domain(
            "N",
            p.n as f64,
            "N >= 3 for the between regression",
        ));
    }
    let ybar_i = p.y_bar_i();
    let ybar = ybar_i.iter().sum::<f64>() / p.n as f64;
    let ssb: f64 = p.xbar_i.iter().map(|x| (x - p.xbar).powi(2)).sum();
    if !(ssb > 0.0) {
        return Err(Error::DegenerateSample(
            "SSB = 0 (no between-individual covariate variation)",
        ));
    }
    let sxy: f64 = p
        .xbar_i
        .iter()
        .zip(&ybar_i)
        .map(|(x, y)| (x - p.xbar) * (y - ybar))
        .sum();
    let beta = sxy / ssb;
    let intercept = ybar - beta * p.xbar;
    let residuals = p
        .xbar_i
        .iter()
        .zip(&ybar_i)
        .map(|(x, y)| y - intercept - beta * x)
        .collect();
    Ok(BetweenFit {
        intercept,
        beta,
        ssb,
        residuals,
    })
}

/// Residuals r̃_it of pooled OLS of y on (1, x), ignoring the clustering.
pub fn pooled_ols_residuals(p: &PanelSample) -> Vec<f64> {
    let nt = p.y.len() as f64;
    let ym = p.y.iter().sum::<f64>() / nt;
    let sxx: f64 = p.x.iter().map(|x| (x - p.xbar).powi(2)).sum();
    let sxy: f64 =
        p.x.iter()
            .zip(&p.y)
            .map(|(x, y)| (x - p.xbar) * (y - ym))
            .sum();
    let b = sxy / sxx;
    let a = ym - b * p.xbar;
    p.x.iter().zip(&p.y).map(|(x, y)| y - a - b * x).collect()
}

/// q(ψ, T) = ψ² + 1/T.
#[inline]
pub fn q_factor(psi: f64, t: usize) -> f64 {
    psi * psi + 1.0 / t as f64
}

/// Weights tying the GLS estimator to the within estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightQuantities {
    pub q: f64,
    /// w = q / (q + r), so that Var₀(β̂(ψ) | x) = σε² w / SSW.
    pub w: f64,
}

impl WeightQuantities {
    pub fn new(psi: f64, t: usize, r: f64) -> Self {
        let q = q_factor(psi, t);
        Self { q, w: q / (q + r) }
    }
}

/// GLS slope β̂(ψ) as the precision-weighted combination of β̃_W and β̃_B.
pub fn gls_slope(beta_w: f64, beta_b: f64, ssw: f64, ssb: f64, psi: f64, t: usize) -> f64 {
    let q = q_factor(psi, t);
    if q.is_infinite() {
        return beta_w;
    }
    let between_precision = ssb / q;
    (ssw * beta_w + between_precision * beta_b) / (ssw + between_precision)
}

/// Conditional variances given x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalVariances {
    /// Var(β̃_W | x) = σε² / SSW.
    pub within: f64,
    /// Var₀(β̃_B | x) = σε² q / SSB.
    pub between: f64,
    /// Var₀(β̂(ψ) | x) = σε² w / SSW.
    pub gls: f64,
}

pub fn conditional_variances(
    ssw: f64,
    ssb: f64,
    psi: f64,
    t: usize,
    sigma_eps: f64,
) -> Result<ConditionalVariances> {
    if !(ssw > 0.0) || !(ssb > 0.0) {
        return Err(Error::DegenerateSample("SSW and SSB must be positive"));
    }
    let s2 = sigma_eps * sigma_eps;
    let wq = WeightQuantities::new(psi, t, ssb / ssw);
    Ok(ConditionalVariances {
        within: s2 / ssw,
        between: s2 * wq.q / ssb,
        gls: s2 * wq.w / ssw,
    })
}

/// Estimates of the two variance components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimates {
    /// σ̂ε² > 0.
    pub sigma_eps2: f64,
    /// σ̂μ² ≥ 0.
    pub sigma_mu2: f64,
}

impl VarianceEstimates {
    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps2.sqrt()
    }

    /// ψ̂ = σ̂μ / σ̂ε.
    pub fn psi(&self) -> f64 {
        self.sigma_mu2.sqrt() / self.sigma_eps2.sqrt()
    }
}

/// Unbiased pair from the within residuals r_it and between residuals r̄_i.
pub fn variances_unbiased(
    within_residuals: &[f64],
    between_residuals: &[f64],
    n: usize,
    t: usize,
) -> Result<VarianceEstimates> {
    let rw: f64 = within_residuals.iter().map(|r| r * r).sum();
    let rb: f64 = between_residuals.iter().map(|r| r * r).sum();
    unbiased_from_sums(rw, rb, n, t)
}

/// σ̂ε² = Σr_it² / (N(T−1) − 1),
/// σ̃μ² = Σr̄_i² / (N − 2) − Σr_it² / (NT(T−1) − T), σ̂μ² = max(0, σ̃μ²).
pub fn unbiased_from_sums(
    within_rss: f64,
    between_rss: f64,
    n: usize,
    t: usize,
) -> Result<VarianceEstimates> {
    let within_df = (n * (t - 1)) as f64 - 1.0;
    if !(within_df > 0.0) || n < 3 {
        return Err(Error::domain("N", n as f64, "N(T-1) - 1 > 0 and N - 2 > 0"));
    }
    let sigma_eps2 = within_rss / within_df;
    if !(sigma_eps2 > 0.0) {
        return Err(Error::DegenerateSample("within residuals are all zero"));
    }
    let (nf, tf) = (n as f64, t as f64);
    let tilde_mu2 = between_rss / (nf - 2.0) - within_rss / (nf * tf * (tf - 1.0) - tf);
    Ok(VarianceEstimates {
        sigma_eps2,
        sigma_mu2: tilde_mu2.max(0.0),
    })
}

/// Wooldridge pair from pooled OLS residuals r̃_it; `k` is the degrees of
/// freedom correction (0 or 2).
pub fn variances_wooldridge(
    pooled_residuals: &[f64],
    n: usize,
    t: usize,
    k: u8,
) -> Result<VarianceEstimates> {
    if pooled_residuals.len() != n * t {
        return Err(Error::Shape {
            expected: n * t,
            got: pooled_residuals.len(),
        });
    }
    let ss: f64 = pooled_residuals.iter().map(|r| r * r).sum();
    let cross: f64 = pooled_residuals
        .chunks_exact(t)
        .map(|row| {
            let mut acc = 0.0;
            for a in 0..t {
                for b in a + 1..t {
                    acc += row[a] * row[b];
                }
            }
            acc
        })
        .sum();
    wooldridge_from_sums(ss, cross, n, t, k)
}

/// Lower clamp factor for σ̃ε²: σ̂ε² = max(−ε σ̃ε², σ̃ε²).
pub const WOOLDRIDGE_EPS: f64 = 1e-6;

/// σ̃μ² = Σ_{t<s} r̃_it r̃_is / (NT(T−1)/2 − K),
/// σ̃ε² = Σ r̃_it² / (NT − K) − σ̃μ².
pub fn wooldridge_from_sums(
    ss: f64,
    cross: f64,
    n: usize,
    t: usize,
    k: u8,
) -> Result<VarianceEstimates> {
    if k != 0 && k != 2 {
        return Err(Error::domain("K", k as f64, "K in {0, 2}"));
    }
    let (nf, tf, kf) = (n as f64, t as f64, k as f64);
    let total_df = nf * tf - kf;
    let pair_df = nf * tf * (tf - 1.0) / 2.0 - kf;
    if !(total_df > 0.0 && pair_df > 0.0) {
        return Err(Error::domain("N", nf, "NT - K > 0 and NT(T-1)/2 - K > 0"));
    }
    let tilde_mu2 = cross / pair_df;
    let tilde_eps2 = ss / total_df - tilde_mu2;
    let sigma_eps2 = (-WOOLDRIDGE_EPS * tilde_eps2).max(tilde_eps2);
    if !(sigma_eps2 > 0.0) {
        return Err(Error::DegenerateSample(
            "Wooldridge error variance estimate is zero",
        ));
    }
    Ok(VarianceEstimates {
        sigma_eps2,
        sigma_mu2: tilde_mu2.max(0.0),
    })
}

/// Maximum likelihood pair for the Gaussian random-intercept model on a
/// panel, with a and β profiled out.
pub fn variances_hsiao_ml(p: &PanelSample) -> Result<VarianceEstimates> {
    hsiao_ml(&PanelMoments::from_panel(p))
}

/// Concentrated log-likelihood of the random-intercept model.
///
/// With φ = σε² / (σε² + T σμ²) ∈ (0, 1], profiling a, β and σε² leaves
/// `ℓ(φ) = −½ [NT log Q(φ) − N log φ]` where Q(φ) is the GLS residual
/// quadratic form. Values are reported relative to Q(1) so that ℓ is exactly
/// invariant to rescaling the data by powers of two.
#[derive(Debug, Clone, Copy)]
pub struct ProfileLikelihood {
    m: PanelMoments,
    q_one: f64,
}

impl ProfileLikelihood {
    pub fn new(m: PanelMoments) -> Result<Self> {
        m.check()?;
        let mut s = Self { m, q_one: 1.0 };
        let q1 = s.quadratic_form(1.0);
        if !(q1 > 0.0) {
            return Err(Error::DegenerateSample(
                "GLS residual sum of squares is zero",
            ));
        }
        s.q_one = q1;
        Ok(s)
    }

    /// Q(φ) = min over (a, β) of the within plus φ·T-weighted between SS.
    pub fn quadratic_form(&self, phi: f64) -> f64 {
        let m = &self.m;
        let wt = phi * m.t as f64;
        let sxx = m.ssw + wt * m.ssb;
        let sxy = m.sxy_w + wt * m.sxy_b;
        let syy = m.syy_w + wt * m.syy_b;
        (syy - sxy * sxy / sxx).max(0.0)
    }

    /// ℓ(φ) up to an additive constant.
    pub fn value(&self, phi: f64) -> f64 {
        let (n, nt) = (self.m.n as f64, (self.m.n * self.m.t) as f64);
        -0.5 * (nt * (self.quadratic_form(phi) / self.q_one).ln() - n * phi.ln())
    }

    /// ℓ at given variance components.
    pub fn value_at(&self, est: &VarianceEstimates) -> f64 {
        let phi = est.sigma_eps2 / (est.sigma_eps2 + self.m.t as f64 * est.sigma_mu2);
        self.value(phi)
    }

    /// Full log-likelihood (without the 2π constant) at arbitrary (σε², σμ²),
    /// with a and β at their GLS values.
    pub fn loglik(&self, sigma_eps2: f64, sigma_mu2: f64) -> f64 {
        let (n, nt) = (self.m.n as f64, (self.m.n * self.m.t) as f64);
        let lam = sigma_eps2 + self.m.t as f64 * sigma_mu2;
        let phi = sigma_eps2 / lam;
        -0.5 * ((nt - n) * sigma_eps2.ln() + n * lam.ln() + self.quadratic_form(phi) / sigma_eps2)
    }

    fn estimates_at(&self, phi: f64) -> VarianceEstimates {
        let nt = (self.m.n * self.m.t) as f64;
        let sigma_eps2 = self.quadratic_form(phi) / nt;
        let sigma_mu2 = if phi >= 1.0 {
            0.0
        } else {
            (sigma_eps2 * (1.0 / phi - 1.0) / self.m.t as f64).max(0.0)
        };
        VarianceEstimates {
            sigma_eps2,
            sigma_mu2,
        }
    }

    /// Maximize over φ ∈ (0, 1]: a log-spaced scan brackets the optimum and
    /// golden-section search refines it. φ = 1 (σ̂μ² = 0) is admitted.
    pub fn maximize(&self) -> Result<VarianceEstimates> {
        const SCAN: usize = 48;
        const LOG_PHI_MIN: f64 = -18.0;
        let grid: Vec<f64> = (0..=SCAN)
            .map(|k| LOG_PHI_MIN * (1.0 - k as f64 / SCAN as f64))
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&g| self.value(g.exp())).collect();
        let best = vals
            .iter()
            .enumerate()
            .fold(0, |b, (k, v)| if *v > vals[b] { k } else { b });
        if best == 0 {
            return Err(Error::Numerical {
                routine: "hsiao_ml",
                detail: format!("likelihood increasing towards phi -> 0 (log phi = {LOG_PHI_MIN})"),
            });
        }
        if best == SCAN {
            // the boundary wins unless the interior just inside it is higher
            let (lo, hi) = (grid[SCAN - 1], 0.0);
            let (x, v) = self.golden(lo, hi);
            return Ok(if v > vals[SCAN] {
                self.estimates_at(x.exp())
            } else {
                self.estimates_at(1.0)
            });
        }
        let (x, _) = self.golden(grid[best - 1], grid[best + 1]);
        Ok(self.estimates_at(x.exp()))
    }

    fn golden(&self, mut lo: f64, mut hi: f64) -> (f64, f64) {
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let f = |g: f64| self.value(g.exp());
        let mut c = hi - INV_PHI * (hi - lo);
        let mut d = lo + INV_PHI * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
            if hi - lo < 1e-12 {
                break;
            }
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - INV_PHI * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + INV_PHI * (hi - lo);
                fd = f(d);
            }
        }
        let x = 0.5 * (lo + hi);
        (x, f(x))
    }
}

pub fn hsiao_ml(m: &PanelMoments) -> Result<VarianceEstimates> {
    let est = ProfileLikelihood::new(*m)?.maximize()?;
    if !(est.sigma_eps2 > 0.0) {
        return Err(Error::DegenerateSample(
            "ML error variance estimate is zero",
        ));
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::ExperimentConfig;

    fn panel(n: usize, t: usize, x: Vec<f64>, y: Vec<f64>) -> PanelSample {
        let xbar_i = crate::dgp::row_means(&x, n, t);
        let xbar = xbar_i.iter().sum::<f64>() / n as f64;
        PanelSample {
            n,
            t,
            mu: vec![0.0; n],
            eps: vec![0.0; n * t],
            x,
            y,
            xbar_i,
            xbar,
        }
    }

    #[test]
    fn within_noiseless() {
        let x = vec![0.0, 1.0, 3.0, 2.0, 2.5, -1.0, 4.0, 0.0, 1.0];
        let mu = [5.0, -2.0, 0.3];
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, v)| 2.0 * v + mu[k / 3])
            .collect();
        let fit = within_ols(&panel(3, 3, x, y)).unwrap();
        assert!((fit.beta - 2.0).abs() < 1e-14);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-13));
    }

    #[test]
    fn within_hand_example() {
        // demeaned x: [-.5, .5, -1, 1], demeaned y: [-1.5, 1.5, -2, 2]
        // β = (0.75 + 0.75 + 2 + 2) / (0.25 + 0.25 + 1 + 1) = 5.5 / 2.5
        let p = panel(2, 2, vec![0.0, 1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0, 4.0]);
        let fit = within_ols(&p).unwrap();
        assert!((fit.beta - 2.2).abs() < 1e-15);
        assert!((fit.ssw - 2.5).abs() < 1e-15);
    }

    #[test]
    fn within_shift_invariant() {
        let c = ExperimentConfig {
            n: 8,
            tau: 0.3,
            ..Default::default()
        };
        let mut p = PanelSample::generate(&c, 0).unwrap();
        let b0 = within_ols(&p).unwrap().beta;
        p.y.iter_mut().for_each(|y| *y += 17.25);
        let b1 = within_ols(&p).unwrap().beta;
        assert!((b0 - b1).abs() < 1e-12);
    }

    #[test]
    fn within_degenerate() {
        let p = panel(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0], vec![0.0; 6]);
        assert!(matches!(within_ols(&p), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn between_exact_line() {
        // ȳ_i = 3 x̄_i + 1
        let x = vec![0.0, 2.0, 1.0, 3.0, -1.0, 0.0, 5.0, 5.0];
        let xb = crate::dgp::row_means(&x, 4, 2);
        let y: Vec<f64> = (0..8)
            .map(|k| 3.0 * xb[k / 2] + 1.0 + if k % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        let fit = between_ols(&panel(4, 2, x, y)).unwrap();
        assert!((fit.beta - 3.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
    }

    #[test]
    fn between_needs_three_individuals() {
        let p = panel(2, 2, vec![0.0, 1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0, 4.0]);
        assert!(matches!(
            between_ols(&p),
            Err(Error::ParameterDomain { .. })
        ));
    }

    #[test]
    fn between_matches_simple_regression_oracle() {
        let c = ExperimentConfig {
            n: 12,
            tau: 0.5,
            rho: 0.3,
            ..Default::default()
        };
        let p = PanelSample::generate(&c, 3).unwrap();
        let fit = between_ols(&p).unwrap();
        // textbook slope formula n Σxy − Σx Σy over n Σx² − (Σx)²
        let xs = &p.xbar_i;
        let ys = p.y_bar_i();
        let n = xs.len() as f64;
        let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
        let sxx: f64 = xs.iter().map(|a| a * a).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((fit.beta - slope).abs() < 1e-10);
    }

    #[test]
    fn gls_limits_and_weights() {
        // ψ = sqrt(2/3), T = 3 → q = 1; SSW = SSB → equal weights
        let psi = (2.0f64 / 3.0).sqrt();
        assert!((gls_slope(1.0, 3.0, 4.0, 4.0, psi, 3) - 2.0).abs() < 1e-14);
        assert!((gls_slope(1.0, 3.0, 4.0, 4.0, 1e9, 3) - 1.0).abs() < 1e-12);
        assert_eq!(gls_slope(1.0, 3.0, 4.0, 4.0, f64::INFINITY, 3), 1.0);
        // β̂ = w β̃_W + (1 − w) β̃_B
        let wq = WeightQuantities::new(0.7, 4, 0.3);
        let b = gls_slope(0.2, -1.0, 10.0, 3.0, 0.7, 4);
        assert!((b - (wq.w * 0.2 + -(1.0 - wq.w))).abs() < 1e-14);
    }

    #[test]
    fn conditional_variance_examples() {
        let v = conditional_variances(4.0, 1.0, 0.5, 3, 1.0).unwrap();
        assert_eq!(v.within, 0.25);
        assert!((q_factor(1.0 / 3.0, 3) - 4.0 / 9.0).abs() < 1e-15);
        assert!(v.gls <= v.within.min(v.between));
        // precision-weighted: 1/gls = 1/within + 1/between
        assert!((1.0 / v.gls - (1.0 / v.within + 1.0 / v.between)).abs() < 1e-12);
        assert!(conditional_variances(0.0, 1.0, 0.5, 3, 1.0).is_err());
    }

    #[test]
    fn unbiased_clamps_negative_mu() {
        // big within SS, tiny between SS → negative σ̃μ²
        let v = unbiased_from_sums(100.0, 0.01, 10, 3).unwrap();
        assert_eq!(v.sigma_mu2, 0.0);
        assert!((v.sigma_eps2 - 100.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn unbiased_formula_oracle_and_homogeneity() {
        let rw = [0.5, -0.25, 1.0, -1.25, 0.75, -0.75, 0.1, -0.1, 0.2];
        let rb = [2.0, -1.0, -1.0];
        let v = variances_unbiased(&rw, &rb, 3, 3).unwrap();
        let sw = 4.06;
        assert!((v.sigma_eps2 - sw / 5.0).abs() < 1e-14);
        let mu = 6.0 / 1.0 - sw / (3.0 * 3.0 * 2.0 - 3.0);
        assert!((v.sigma_mu2 - mu).abs() < 1e-13);
        let k = 3.0;
        let rw2: Vec<f64> = rw.iter().map(|r| r * k).collect();
        let rb2: Vec<f64> = rb.iter().map(|r| r * k).collect();
        let v2 = variances_unbiased(&rw2, &rb2, 3, 3).unwrap();
        assert!((v2.sigma_eps2 - 9.0 * v.sigma_eps2).abs() < 1e-12);
        assert!((v2.sigma_mu2 - 9.0 * v.sigma_mu2).abs() < 1e-12);
    }

    #[test]
    fn unbiased_zero_residuals_degenerate() {
        assert!(matches!(
            variances_unbiased(&[0.0; 9], &[1.0; 3], 3, 3),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn wooldridge_formula_oracle() {
        let r = [1.0, 2.0, -1.0, 0.5, 0.5, 0.0, -2.0, 1.0, 3.0];
        // Σr² = 1+4+1+.25+.25+0+4+1+9 = 20.5
        // cross: (2 - 1 - 2) + (.25 + 0 + 0) + (-2 - 6 + 3) = -1 + .25 - 5 = -5.75
        for k in [0u8, 2] {
            let v = variances_wooldridge(&r, 3, 3, k).unwrap();
            let kf = k as f64;
            let mu = -5.75 / (9.0 - kf);
            let eps = 20.5 / (9.0 - kf) - mu;
            assert_eq!(v.sigma_mu2, 0.0);
            assert!((v.sigma_eps2 - eps).abs() < 1e-14);
        }
        let pos = variances_wooldridge(&[1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 0.5, 0.5, 0.6], 3, 3, 0)
            .unwrap();
        assert!(pos.sigma_mu2 > 0.0);
        assert!(variances_wooldridge(&r, 3, 3, 1).is_err());
    }

    #[test]
    fn wooldridge_negative_error_variance_clamps_positive() {
        // σ̃ε² < 0 → σ̂ε² = −ε σ̃ε² > 0
        let v = wooldridge_from_sums(1.0, 10.0, 3, 3, 0).unwrap();
        let tilde = 1.0 / 9.0 - 10.0 / 9.0;
        assert!((v.sigma_eps2 - (-WOOLDRIDGE_EPS * tilde)).abs() < 1e-20);
    }

    #[test]
    fn moment_route_matches_residual_route() {
        for (rep, pair) in [(0u64, 0.0), (1, 0.4), (2, 0.8)] {
            let c = ExperimentConfig {
                n: 9,
                t: 4,
                tau: pair,
                rho: 0.35,
                a: 1.5,
                beta: -0.7,
                sigma_mu: 0.8,
                ..Default::default()
            };
            let p = PanelSample::generate(&c, rep).unwrap();
            let st = PanelStats::from_panel(&p).unwrap();
            let wf = within_ols(&p).unwrap();
            let bf = between_ols(&p).unwrap();
            assert!((st.beta_w - wf.beta).abs() < 1e-12);
            assert!((st.beta_b - bf.beta).abs() < 1e-12);
            let a = st.variances(EstimatorPair::Unbiased).unwrap();
            let b = variances_unbiased(&wf.residuals, &bf.residuals, 9, 4).unwrap();
            assert!((a.sigma_eps2 - b.sigma_eps2).abs() < 1e-12);
            assert!((a.sigma_mu2 - b.sigma_mu2).abs() < 1e-12);
            for k in [0, 2] {
                let a = st.variances(EstimatorPair::Wooldridge { k }).unwrap();
                let b = variances_wooldridge(&pooled_ols_residuals(&p), 9, 4, k).unwrap();
                assert!((a.sigma_eps2 - b.sigma_eps2).abs() < 1e-11);
                assert!((a.sigma_mu2 - b.sigma_mu2).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn ml_optimum_beats_unbiased_point() {
        for rep in 0..20 {
            let c = ExperimentConfig {
                n: 20,
                t: 3,
                sigma_mu: 0.6,
                ..Default::default()
            };
            let p = PanelSample::generate(&c, rep).unwrap();
            let m = PanelMoments::from_panel(&p);
            let prof = ProfileLikelihood::new(m).unwrap();
            let ml = hsiao_ml(&m).unwrap();
            let ub = PanelStats::from_moments(m)
                .unwrap()
                .variances(EstimatorPair::Unbiased)
                .unwrap();
            assert!(
                prof.loglik(ml.sigma_eps2, ml.sigma_mu2)
                    >= prof.loglik(ub.sigma_eps2, ub.sigma_mu2) - 1e-9
            );
            // nearby perturbations never improve the likelihood
            let base = prof.loglik(ml.sigma_eps2, ml.sigma_mu2);
            for (de, dm) in [(1.01, 1.0), (0.99, 1.0), (1.0, 1.05), (1.0, 0.95)] {
                assert!(prof.loglik(ml.sigma_eps2 * de, ml.sigma_mu2 * dm) <= base + 1e-9);
            }
        }
    }

    #[test]
    fn ml_boundary_when_no_random_effect() {
        let c = ExperimentConfig {
            n: 400,
            t: 5,
            sigma_mu: 0.0,
            ..Default::default()
        };
        let mut zero = 0;
        let mut mean_mu = 0.0;
        for rep in 0..20 {
            let p = PanelSample::generate(&c, rep).unwrap();
            let v = variances_hsiao_ml(&p).unwrap();
            if v.sigma_mu2 == 0.0 {
                zero += 1;
            }
            mean_mu += v.sigma_mu2 / 20.0;
        }
        assert!(
            zero >= 4,
            "boundary solution should occur often, got {zero}"
        );
        assert!(mean_mu < 0.02);
    }

    #[test]
    fn ml_concentrated_matches_full_likelihood() {
        let c = ExperimentConfig {
            n: 15,
            t: 3,
            sigma_mu: 1.0,
            ..Default::default()
        };
        let p = PanelSample::generate(&c, 4).unwrap();
        let prof = ProfileLikelihood::new(PanelMoments::from_panel(&p)).unwrap();
        // ℓ(φ) − full loglik at the profiled σε² is constant in φ
        let nt = 45.0;
        let offs: Vec<f64> = [0.05, 0.2, 0.5, 1.0]
            .iter()
            .map(|&phi: &f64| {
                let s2 = prof.quadratic_form(phi) / nt;
                let mu2 = s2 * (1.0 / phi - 1.0) / 3.0;
                prof.loglik(s2, mu2) - prof.value(phi)
            })
            .collect();
        for o in &offs {
            assert!((o - offs[0]).abs() < 1e-8);
        }
    }
}
