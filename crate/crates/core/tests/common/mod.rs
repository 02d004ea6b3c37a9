#![allow(dead_code)]

use pretest_lab::estimators::{conditional_variances, gls_slope};
use pretest_lab::normal;
use pretest_lab::pretest::{hausman, interval_i, interval_jc, PretestOutcome};
use pretest_lab::quadrature::integrate;
use pretest_lab::rng::{NormalStream, Stream};

/// Deterministic uniforms on (0, 1) for choosing test points.
pub struct Uniforms(NormalStream);

impl Uniforms {
    pub fn new(seed: u64) -> Self {
        Self(NormalStream::new(seed, 0, Stream::U))
    }

    pub fn next(&mut self) -> f64 {
        normal::cdf(self.0.next_normal())
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }

    pub fn log_range(&mut self, lo: f64, hi: f64) -> f64 {
        self.range(lo.ln(), hi.ln()).exp()
    }
}

fn density(s: f64, t: f64, r: f64) -> f64 {
    let d = 1.0 - r * r;
    (-(s * s - 2.0 * r * s * t + t * t) / (2.0 * d)).exp() / (std::f64::consts::TAU * d.sqrt())
}

/// P(X ≤ x, Y ≤ y) by nested adaptive quadrature of the bivariate density.
pub fn bvn_cdf_quadrature(x: f64, y: f64, r: f64) -> f64 {
    const WIDTH: f64 = 12.0;
    if x <= -WIDTH {
        return 0.0;
    }
    let sd = (1.0 - r * r).sqrt();
    let inner = |s: f64| {
        let lo = r * s - WIDTH * sd;
        let hi = y.min(r * s + WIDTH * sd);
        if hi <= lo {
            0.0
        } else {
            integrate(|t| density(s, t, r), lo, hi, 1e-15, 1e-13).expect("inner quadrature")
        }
    };
    integrate(inner, -WIDTH, x, 1e-14, 1e-12).expect("outer quadrature")
}

/// Coverage of K with known variances, simulated from the conditional law of
/// (β̃_W, β̃_B) given x for a panel with SSB = p², SSW = p²/r, Var(x̄_i) = 1,
/// σε = 1 and σμ = ψ. Returns (coverage, binomial standard error).
#[allow(clippy::too_many_arguments)]
pub fn simulate_conditional_coverage(
    tau: f64,
    psi: f64,
    t: usize,
    r: f64,
    p: f64,
    alpha: f64,
    alpha_tilde: f64,
    draws: usize,
    seed: u64,
) -> (f64, f64) {
    let ssb = p * p;
    let ssw = ssb / r;
    let vars = conditional_variances(ssw, ssb, psi, t, 1.0).unwrap();
    let between_sd = ((psi * psi * (1.0 - tau * tau) + 1.0 / t as f64) / ssb).sqrt();
    let mut zw = NormalStream::new(seed, 1, Stream::Eps);
    let mut zb = NormalStream::new(seed, 1, Stream::WMu);
    let beta = 0.0;
    let mut covered = 0usize;
    for _ in 0..draws {
        let bw = beta + zw.next_normal() / ssw.sqrt();
        let bb = beta + psi * tau + between_sd * zb.next_normal();
        let outcome = PretestOutcome::new(
            hausman(bw, bb, vars.within, vars.between).unwrap(),
            alpha_tilde,
        );
        let k = if outcome.accept {
            interval_i(gls_slope(bw, bb, ssw, ssb, psi, t), vars.gls, alpha)
        } else {
            interval_jc(bw, ssw, 1.0, 1.0 - alpha)
        };
        covered += usize::from(k.contains(beta));
    }
    let c = covered as f64 / draws as f64;
    (c, (c * (1.0 - c) / draws as f64).sqrt())
}

/// Kolmogorov–Smirnov distance between a sample and a continuous cdf.
pub fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// χ²₁ cdf, 2Φ(√h) − 1.
pub fn chi2_1_cdf(h: f64) -> f64 {
    if h <= 0.0 {
        0.0
    } else {
        1.0 - 2.0 * normal::sf(h.sqrt())
    }
}
