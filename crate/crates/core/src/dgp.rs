//! Panel data generation for the random-intercept model
//! `y_it = a + β x_it + μ_i + ε_it`.
//!
//! Covariates follow the equicorrelated construction
//! `x_it / σx = (1 − ρ)^{1/2} u_it + ρ^{1/2} v_i`, and each μ_i is drawn from
//! its normal law conditional on the individual's covariate mean, so that
//! `Corr(μ_i, x̄_i) = τ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NoiseStreams;

/// Which pair of (σ̂ε², σ̂μ²) estimators feeds the practical procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorPair {
    /// Unbiased within/between residual estimators, negative σ̃μ² set to 0.
    Unbiased,
    /// Maximum likelihood under σε² ≥ 0, σμ² ≥ 0.
    HsiaoMl,
    /// Pooled-OLS residual moments with degrees-of-freedom correction `k`
    /// (0 or 2).
    Wooldridge { k: u8 },
}

impl EstimatorPair {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unbiased" => Some(Self::Unbiased),
            "ml" | "hsiao" | "hsiao_ml" => Some(Self::HsiaoMl),
            "wooldridge0" => Some(Self::Wooldridge { k: 0 }),
            "wooldridge2" => Some(Self::Wooldridge { k: 2 }),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Unbiased => "unbiased",
            Self::HsiaoMl => "ml",
            Self::Wooldridge { k: 0 } => "wooldridge0",
            Self::Wooldridge { .. } => "wooldridge2",
        }
    }
}

/// All known quantities and model parameters of one simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Number of individuals.
    pub n: usize,
    /// Number of time points.
    pub t: usize,
    /// Nominal non-coverage of the intervals.
    pub alpha: f64,
    /// Nominal significance level of the pretest.
    pub alpha_tilde: f64,
    /// Equicorrelation of an individual's covariates.
    pub rho: f64,
    /// Non-exogeneity parameter, Corr(μ_i, x̄_i).
    pub tau: f64,
    pub sigma_eps: f64,
    pub sigma_mu: f64,
    pub sigma_x: f64,
    pub a: f64,
    pub beta: f64,
    pub estimator: EstimatorPair,
    /// Replicate count M.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 100,
            t: 3,
            alpha: 0.05,
            alpha_tilde: 0.05,
            rho: 0.0,
            tau: 0.0,
            sigma_eps: 1.0,
            sigma_mu: 1.0 / 3.0,
            sigma_x: 1.0,
            a: 0.0,
            beta: 0.0,
            estimator: EstimatorPair::Unbiased,
            replicates: 10_000,
            seed: 20_160_101,
        }
    }
}

impl ExperimentConfig {
    /// ψ = σμ / σε.
    pub fn psi(&self) -> f64 {
        self.sigma_mu / self.sigma_eps
    }

    /// Set σμ so that ψ takes the given value at the current σε.
    pub fn with_psi(mut self, psi: f64) -> Self {
        self.sigma_mu = psi * self.sigma_eps;
        self
    }

    /// λ = N^{1/2} τ.
    pub fn lambda(&self) -> f64 {
        (self.n as f64).sqrt() * self.tau
    }

    /// Set τ from λ = N^{1/2} τ.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.tau = lambda / (self.n as f64).sqrt();
        self
    }

    /// Var(x̄_i) = σx² (1 + (T − 1)ρ) / T.
    pub fn var_xbar(&self) -> f64 {
        let t = self.t as f64;
        self.sigma_x * self.sigma_x * (1.0 + (t - 1.0) * self.rho) / t
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::domain(
                "N",
                self.n as f64,
                "N >= 3 (the between regression needs a residual degree of freedom)",
            ));
        }
        if self.t < 2 {
            return Err(Error::domain("T", self.t as f64, "T >= 2"));
        }
        check_open_unit("alpha", self.alpha)?;
        if !(self.alpha_tilde > 0.0 && self.alpha_tilde <= 1.0) {
            return Err(Error::domain(
                "alpha_tilde",
                self.alpha_tilde,
                "0 < alpha_tilde <= 1",
            ));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::domain(
                "rho",
                self.rho,
                "0 <= rho < 1 for the covariate construction",
            ));
        }
        if !(self.tau.abs() < 1.0) {
            return Err(Error::domain("tau", self.tau, "|tau| < 1"));
        }
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::domain("sigma_eps", self.sigma_eps, "sigma_eps > 0"));
        }
        if !(self.sigma_mu >= 0.0 && self.sigma_mu.is_finite()) {
            return Err(Error::domain("sigma_mu", self.sigma_mu, "sigma_mu >= 0"));
        }
        if !(self.sigma_x > 0.0 && self.sigma_x.is_finite()) {
            return Err(Error::domain("sigma_x", self.sigma_x, "sigma_x > 0"));
        }
        if !self.a.is_finite() || !self.beta.is_finite() {
            return Err(Error::domain(
                "beta",
                self.beta,
                "a and beta must be finite",
            ));
        }
        if let EstimatorPair::Wooldridge { k } = self.estimator {
            if k != 0 && k != 2 {
                return Err(Error::domain("estimator.K", k as f64, "K in {0, 2}"));
            }
        }
        if self.replicates < 2 {
            return Err(Error::domain("M", self.replicates as f64, "M >= 2"));
        }
        Ok(())
    }
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "must lie in (0, 1)"))
    }
}

/// One simulated balanced panel. Arrays are row-major by individual.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSample {
    pub n: usize,
    pub t: usize,
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub eps: Vec<f64>,
    pub y: Vec<f64>,
    /// Per-individual covariate means x̄_i.
    pub xbar_i: Vec<f64>,
    /// Grand covariate mean x̄.
    pub xbar: f64,
}

impl PanelSample {
    /// Run the whole generation pipeline on one replicate's streams.
    pub fn from_streams(streams: &NoiseStreams, cfg: &ExperimentConfig) -> Result<Self> {
        let x = build_covariate_panel(streams, cfg.rho, cfg.sigma_x)?;
        let xbar_i = row_means(&x, streams.n, streams.t);
        let mu = sample_random_intercepts(streams, &xbar_i, cfg)?;
        assemble_responses(x, mu, streams, cfg)
    }

    /// Generate replicate `replicate` of `cfg` from its keyed streams.
    pub fn generate(cfg: &ExperimentConfig, replicate: u64) -> Result<Self> {
        let streams = NoiseStreams::generate(cfg.seed, replicate, cfg.n, cfg.t);
        Self::from_streams(&streams, cfg)
    }

    pub fn y_bar_i(&self) -> Vec<f64> {
        row_means(&self.y, self.n, self.t)
    }
}

pub(crate) fn row_means(values: &[f64], n: usize, t: usize) -> Vec<f64> {
    values
        .chunks_exact(t)
        .take(n)
        .map(|row| row.iter().sum::<f64>() / t as f64)
        .collect()
}

/// x_it = σx ((1 − ρ)^{1/2} u_it + ρ^{1/2} v_i).
pub fn build_covariate_panel(streams: &NoiseStreams, rho: f64, sigma_x: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::domain(
            "rho",
            rho,
            "0 <= rho < 1 (x_it uses sqrt(1 - rho) and sqrt(rho))",
        ));
    }
    if !(sigma_x > 0.0) {
        return Err(Error::domain("sigma_x", sigma_x, "sigma_x > 0"));
    }
    check_streams(streams)?;
    let (s1, s2) = ((1.0 - rho).sqrt(), rho.sqrt());
    let t = streams.t;
    let x = streams
        .u
        .chunks_exact(t)
        .zip(&streams.v)
        .flat_map(|(row, &v)| row.iter().map(move |&u| sigma_x * (s1 * u + s2 * v)))
        .collect();
    Ok(x)
}

/// μ_i = σμ (τ κ x̄_i / σx + (1 − τ²)^{1/2} w_i) with κ = (T / (1 + (T − 1)ρ))^{1/2},
/// the conditional law of μ_i given (x_i1, …, x_iT).
pub fn sample_random_intercepts(
    streams: &NoiseStreams,
    xbar_i: &[f64],
    cfg: &ExperimentConfig,
) -> Result<Vec<f64>> {
    if !(cfg.tau.abs() < 1.0) {
        return Err(Error::domain(
            "tau",
            cfg.tau,
            "|tau| < 1 (conditional variance of mu must be positive)",
        ));
    }
    if xbar_i.len() != streams.w_mu.len() {
        return Err(Error::Shape {
            expected: streams.w_mu.len(),
            got: xbar_i.len(),
        });
    }
    let kappa = mean_loading(cfg.t, cfg.rho);
    let slope = cfg.sigma_mu * cfg.tau * kappa;
    let resid_sd = cfg.sigma_mu * (1.0 - cfg.tau * cfg.tau).sqrt();
    Ok(xbar_i
        .iter()
        .zip(&streams.w_mu)
        .map(|(&xb, &w)| slope * (xb / cfg.sigma_x) + resid_sd * w)
        .collect())
}

/// κ = (T / (1 + (T − 1)ρ))^{1/2}, the inverse SD of x̄_i / σx.
pub fn mean_loading(t: usize, rho: f64) -> f64 {
    let t = t as f64;
    (t / (1.0 + (t - 1.0) * rho)).sqrt()
}

/// τ̃ = τ ((1 + (T − 1)ρ) / T)^{1/2}, the parameter in the joint covariance of
/// (μ_i, x_i1, …, x_iT).
pub fn tau_tilde(tau: f64, t: usize, rho: f64) -> f64 {
    tau / mean_loading(t, rho)
}

/// ε_it = σε · eps_it and y_it = a + β x_it + μ_i + ε_it.
pub fn assemble_responses(
    x: Vec<f64>,
    mu: Vec<f64>,
    streams: &NoiseStreams,
    cfg: &ExperimentConfig,
) -> Result<PanelSample> {
    let (n, t) = (streams.n, streams.t);
    if x.len() != n * t {
        return Err(Error::Shape {
            expected: n * t,
            got: x.len(),
        });
    }
    if mu.len() != n {
        return Err(Error::Shape {
            expected: n,
            got: mu.len(),
        });
    }
    check_streams(streams)?;
    let eps: Vec<f64> = streams.eps.iter().map(|&e| cfg.sigma_eps * e).collect();
    let y = x
        .chunks_exact(t)
        .zip(eps.chunks_exact(t))
        .zip(&mu)
        .flat_map(|((xr, er), &m)| {
            xr.iter()
                .zip(er)
                .map(move |(&xv, &ev)| cfg.a + cfg.beta * xv + m + ev)
        })
        .collect();
    let xbar_i = row_means(&x, n, t);
    let xbar = xbar_i.iter().sum::<f64>() / n as f64;
    Ok(PanelSample {
        n,
        t,
        x,
        mu,
        eps,
        y,
        xbar_i,
        xbar,
    })
}

fn check_streams(s: &NoiseStreams) -> Result<()> {
    let nt = s.n * s.t;
    for len in [s.u.len(), s.eps.len()] {
        if len != nt {
            return Err(Error::Shape {
                expected: nt,
                got: len,
            });
        }
    }
    for len in [s.v.len(), s.w_mu.len()] {
        if len != s.n {
            return Err(Error::Shape {
                expected: s.n,
                got: len,
            });
        }
    }
    Ok(())
}

/// Quadratic forms of one replicate's noise streams.
///
/// Every panel sufficient statistic is a quadratic form in (u, v, w, eps), so
/// once these are known the panel moments of any scenario (ρ, τ, σ's, a, β)
/// follow in O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct StreamMoments {
    pub n: usize,
    pub t: usize,
    /// Σ (u_it − ū_i)².
    pub uu_within: f64,
    /// Σ (u_it − ū_i)(e_it − ē_i).
    pub ue_within: f64,
    /// Σ (e_it − ē_i)².
    pub ee_within: f64,
    /// Gram matrix of the centered individual-level vectors (ū, v, w, ē).
    pub between_gram: [[f64; 4]; 4],
}

impl StreamMoments {
    pub fn from_streams(s: &NoiseStreams) -> Self {
        let (n, t) = (s.n, s.t);
        let tf = t as f64;
        let mut cols = [vec![0.0; n], s.v.clone(), s.w_mu.clone(), vec![0.0; n]];
        let (mut uu, mut ue, mut ee) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let ur = &s.u[i * t..(i + 1) * t];
            let er = &s.eps[i * t..(i + 1) * t];
            let ub = ur.iter().sum::<f64>() / tf;
            let eb = er.iter().sum::<f64>() / tf;
            for (&u, &e) in ur.iter().zip(er) {
                let (du, de) = (u - ub, e - eb);
                uu += du * du;
                ue += du * de;
                ee += de * de;
            }
            cols[0][i] = ub;
            cols[3][i] = eb;
        }
        for c in cols.iter_mut() {
            let m = c.iter().sum::<f64>() / n as f64;
            c.iter_mut().for_each(|z| *z -= m);
        }
        let mut gram = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let g: f64 = cols[a].iter().zip(&cols[b]).map(|(p, q)| p * q).sum();
                gram[a][b] = g;
                gram[b][a] = g;
            }
        }
        Self {
            n,
            t,
            uu_within: uu,
            ue_within: ue,
            ee_within: ee,
            between_gram: gram,
        }
    }

    fn quad(&self, p: &[f64; 4], q: &[f64; 4]) -> f64 {
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                acc += p[a] * self.between_gram[a][b] * q[b];
            }
        }
        acc
    }

    /// Panel moments of scenario `cfg` built from these streams; equal (up to
    /// rounding) to `PanelMoments::from_panel(&PanelSample::from_streams(..))`.
    pub fn panel_moments(&self, cfg: &ExperimentConfig) -> crate::estimators::PanelMoments {
        let (s1, s2) = ((1.0 - cfg.rho).sqrt(), cfg.rho.sqrt());
        let kappa = mean_loading(cfg.t, cfg.rho);
        let x_load = cfg.sigma_x * s1;
        let ssw = x_load * x_load * self.uu_within;
        let sxe_w = x_load * cfg.sigma_eps * self.ue_within;
        let see_w = cfg.sigma_eps * cfg.sigma_eps * self.ee_within;
        let sxy_w = cfg.beta * ssw + sxe_w;
        let syy_w = cfg.beta * cfg.beta * ssw + 2.0 * cfg.beta * sxe_w + see_w;

        // x̄_i = σx ξ_i with ξ_i = s1 ū_i + s2 v_i; μ_i loads on ξ_i and w_i
        let common = cfg.beta * cfg.sigma_x + cfg.sigma_mu * cfg.tau * kappa;
        let cx = [cfg.sigma_x * s1, cfg.sigma_x * s2, 0.0, 0.0];
        let cy = [
            common * s1,
            common * s2,
            cfg.sigma_mu * (1.0 - cfg.tau * cfg.tau).sqrt(),
            cfg.sigma_eps,
        ];
        crate::estimators::PanelMoments {
            n: self.n,
            t: self.t,
            ssw,
            sxy_w,
            syy_w,
            ssb: self.quad(&cx, &cx),
            sxy_b: self.quad(&cx, &cy),
            syy_b: self.quad(&cy, &cy),
        }
    }
}
