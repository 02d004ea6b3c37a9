//! Monte Carlo estimation of coverage and scaled expected length.
//!
//! A grid run draws the noise streams of each replicate once and evaluates
//! every grid point from them, so all points share common random numbers.
//! Replicates are processed in fixed-size chunks whose partial sums are merged
//! in chunk order; the result does not depend on the number of threads.

use std::time::Instant;

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::dgp::{ExperimentConfig, PanelSample, StreamMoments};
use crate::error::{Error, Result};
use crate::estimators::{PanelMoments, PanelStats};
use crate::exact_law::{
    accept_prob_given_x, conditional_coverage_known, conditional_moments, p_of_x,
};
use crate::normal;
use crate::pretest::{run_two_stage, TwoStageResult};
use crate::rng::NoiseStreams;

const CHUNK: usize = 256;

/// A Monte Carlo point estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    /// σε and σμ treated as known: K(σε, σμ).
    Known,
    /// The configured estimator pair is plugged in: K(σ̂ε, σ̂μ).
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    /// Every grid point sees the same replicate streams.
    Common,
    /// Each grid point gets its own streams.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    /// Panel moments from the quadratic forms of the streams.
    Moments,
    /// Build every panel explicitly.
    FullPanel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub mode: VarianceMode,
    pub seeds: SeedPolicy,
    pub path: EvalPath,
    /// Evaluate the exact conditional coverage (needed for C̃P).
    pub coverage: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: VarianceMode::Estimated,
            seeds: SeedPolicy::Common,
            path: EvalPath::Moments,
            coverage: true,
        }
    }
}

/// Everything one replicate contributes at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateEval {
    pub known: TwoStageResult,
    pub estimated: TwoStageResult,
    /// β ∈ K(σ̂ε, σ̂μ).
    pub covered_hat: bool,
    /// β ∈ K(σε, σμ).
    pub covered_known: bool,
    /// P(β ∈ K(σε, σμ) | x); NaN when not requested.
    pub conditional_coverage: f64,
    /// P(C | x), the known-variance acceptance probability.
    pub accept_prob: f64,
    /// σ̂ε / σε.
    pub scale_ratio: f64,
    /// Σ (u_it − ū_i)².
    pub suu: f64,
}

impl ReplicateEval {
    /// Per-replicate term of C̃P: 1(β ∈ K̂) − 1(β ∈ K) + P(β ∈ K | x).
    pub fn cp_tilde_term(&self) -> f64 {
        f64::from(u8::from(self.covered_hat)) - f64::from(u8::from(self.covered_known))
            + self.conditional_coverage
    }

    /// LK† = (σ̂ε/σε)(ŵ^{1/2} 1(B) + 1(Bᶜ)) Suu^{−1/2}.
    pub fn lk(&self) -> f64 {
        let f = if self.estimated.outcome.accept {
            self.estimated.weights.w.sqrt()
        } else {
            1.0
        };
        self.scale_ratio * f / self.suu.sqrt()
    }

    /// LKK† = (w^{1/2} 1(C) + 1(Cᶜ)) Suu^{−1/2}.
    pub fn lkk(&self) -> f64 {
        let f = if self.known.outcome.accept {
            self.known.weights.w.sqrt()
        } else {
            1.0
        };
        f / self.suu.sqrt()
    }

    /// E(LKK† | u) = (w^{1/2} P(C|x) + 1 − P(C|x)) Suu^{−1/2}.
    pub fn lkk_conditional_mean(&self) -> f64 {
        let p = self.accept_prob;
        (self.known.weights.w.sqrt() * p + (1.0 - p)) / self.suu.sqrt()
    }

    /// LJ† = (σ̂ε/σε) Suu^{−1/2}.
    pub fn lj(&self) -> f64 {
        self.scale_ratio / self.suu.sqrt()
    }

    /// LJK† = Suu^{−1/2}.
    pub fn ljk(&self) -> f64 {
        1.0 / self.suu.sqrt()
    }
}

/// E(LJK†) = 2^{−1/2} Γ((ν − 1)/2) / Γ(ν/2) with ν = N(T − 1).
pub fn expected_ljk(n: usize, t: usize) -> f64 {
    let nu = (n * (t - 1)) as f64;
    (ln_gamma(0.5 * (nu - 1.0)) - ln_gamma(0.5 * nu)).exp() / std::f64::consts::SQRT_2
}

/// Evaluate one replicate of scenario `cfg` from its panel statistics.
pub fn evaluate_stats(
    stats: &PanelStats,
    suu: f64,
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<ReplicateEval> {
    let psi = cfg.psi();
    let known = run_two_stage(stats, cfg.sigma_eps, psi, cfg.alpha, cfg.alpha_tilde)?;
    let (estimated, scale_ratio) = match opts.mode {
        VarianceMode::Known => (known, 1.0),
        VarianceMode::Estimated => {
            let v = stats.variances(cfg.estimator)?;
            let est = run_two_stage(stats, v.sigma_eps(), v.psi(), cfg.alpha, cfg.alpha_tilde)?;
            (est, v.sigma_eps() / cfg.sigma_eps)
        }
    };
    let law = conditional_moments(
        cfg.tau,
        psi,
        cfg.t,
        stats.r,
        p_of_x(stats.ssb, cfg.var_xbar()),
    )?;
    let conditional_coverage = if opts.coverage {
        conditional_coverage_known(&law, cfg.alpha, cfg.alpha_tilde)
    } else {
        f64::NAN
    };
    Ok(ReplicateEval {
        known,
        estimated,
        covered_hat: estimated.k.contains(cfg.beta),
        covered_known: known.k.contains(cfg.beta),
        conditional_coverage,
        accept_prob: accept_prob_given_x(&law, cfg.alpha_tilde),
        scale_ratio,
        suu,
    })
}

/// Evaluate replicate `replicate` of `cfg` along the chosen path.
pub fn evaluate_replicate(
    cfg: &ExperimentConfig,
    replicate: u64,
    opts: &RunOptions,
) -> Result<ReplicateEval> {
    let streams = NoiseStreams::generate(cfg.seed, replicate, cfg.n, cfg.t);
    let sm = StreamMoments::from_streams(&streams);
    evaluate_from_streams(&streams, &sm, cfg, opts)
}

fn evaluate_from_streams(
    streams: &NoiseStreams,
    sm: &StreamMoments,
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<ReplicateEval> {
    let moments = match opts.path {
        EvalPath::Moments => sm.panel_moments(cfg),
        EvalPath::FullPanel => PanelMoments::from_panel(&PanelSample::from_streams(streams, cfg)?),
    };
    let stats = PanelStats::from_moments(moments)?;
    evaluate_stats(&stats, sm.uu_within, cfg, opts)
}

// Channels accumulated per grid point.
const A: usize = 0; // 1(β ∈ K̂)
const B: usize = 1; // 1(β ∈ K)
const C: usize = 2; // P(β ∈ K | x)
const D: usize = 3; // a − b + c
const LK_HAT: usize = 4;
const LK_TILDE: usize = 5;
const LJ_HAT: usize = 6;
const LJ_TILDE: usize = 7;
const CHANNELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Acc {
    n: usize,
    rejected: usize,
    sum: [f64; CHANNELS],
    sq: [f64; CHANNELS],
    cross_tilde: f64,
    cross_hat: f64,
}

impl Acc {
    fn new() -> Self {
        Self {
            n: 0,
            rejected: 0,
            sum: [0.0; CHANNELS],
            sq: [0.0; CHANNELS],
            cross_tilde: 0.0,
            cross_hat: 0.0,
        }
    }

    fn push(&mut self, v: &[f64; CHANNELS]) {
        self.n += 1;
        for ((s, q), &x) in self.sum.iter_mut().zip(self.sq.iter_mut()).zip(v) {
            *s += x;
            *q += x * x;
        }
        self.cross_tilde += v[LK_TILDE] * v[LJ_TILDE];
        self.cross_hat += v[LK_HAT] * v[LJ_HAT];
    }

    fn merge(&mut self, o: &Acc) {
        self.n += o.n;
        self.rejected += o.rejected;
        for c in 0..CHANNELS {
            self.sum[c] += o.sum[c];
            self.sq[c] += o.sq[c];
        }
        self.cross_tilde += o.cross_tilde;
        self.cross_hat += o.cross_hat;
    }

    fn mean(&self, c: usize) -> f64 {
        self.sum[c] / self.n as f64
    }

    fn var(&self, c: usize) -> f64 {
        let m = self.n as f64;
        ((self.sq[c] - self.sum[c] * self.sum[c] / m) / (m - 1.0)).max(0.0)
    }

    fn cov(&self, cross: f64, c1: usize, c2: usize) -> f64 {
        let m = self.n as f64;
        (cross - self.sum[c1] * self.sum[c2] / m) / (m - 1.0)
    }

    fn estimate(&self, c: usize, wall: f64) -> McEstimate {
        McEstimate {
            value: self.mean(c),
            std_error: (self.var(c) / self.n as f64).sqrt(),
            replicates: self.n,
            wall_time_seconds: wall,
        }
    }
}

/// Coverage estimators at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimates {
    /// ĈP, the brute-force estimator.
    pub cp_hat: McEstimate,
    /// ĈPK.
    pub cpk_hat: McEstimate,
    /// C̃PK, the mean exact conditional coverage.
    pub cpk_tilde: McEstimate,
    /// C̃P = ĈP − (ĈPK − C̃PK).
    pub cp_tilde: McEstimate,
}

/// Expected-length estimators at one grid point. `sel` is filled in once c*
/// is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelComponents {
    pub lk_hat: McEstimate,
    pub lk_tilde: McEstimate,
    pub lj_hat: McEstimate,
    pub lj_tilde: McEstimate,
    /// Sample covariance of the per-replicate LK̃ and LJ̃ terms.
    pub cov_tilde: f64,
    pub sel: f64,
    pub sel_std_error: f64,
}

impl SelComponents {
    /// SEL = (z_{1−α/2} / Φ⁻¹((c* + 1)/2)) · L̃K† / L̃J†, with a delta-method
    /// standard error.
    pub fn with_c_star(mut self, alpha: f64, c_star: f64) -> Self {
        let k = normal::two_sided_critical(alpha) / normal::central_multiplier(c_star);
        let (a, b) = (self.lk_tilde.value, self.lj_tilde.value);
        let ratio = a / b;
        let m = self.lk_tilde.replicates as f64;
        let var_a = self.lk_tilde.std_error.powi(2);
        let var_b = self.lj_tilde.std_error.powi(2);
        let cov = self.cov_tilde / m;
        let var_ratio = (var_a - 2.0 * ratio * cov + ratio * ratio * var_b) / (b * b);
        self.sel = k * ratio;
        self.sel_std_error = k * var_ratio.max(0.0).sqrt();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPointResult {
    pub config: ExperimentConfig,
    pub coverage: CoverageEstimates,
    pub sel: SelComponents,
    pub rejected: usize,
}

fn check_grid(cfgs: &[ExperimentConfig]) -> Result<()> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::config("grid", "grid is empty"))?;
    for c in cfgs {
        c.validate()?;
        if c.n != first.n
            || c.t != first.t
            || c.replicates != first.replicates
            || c.seed != first.seed
        {
            return Err(Error::config(
                "grid",
                "all grid points must share N, T, replicates and seed",
            ));
        }
    }
    Ok(())
}

fn replicate_id(seeds: SeedPolicy, point: usize, k: usize) -> u64 {
    match seeds {
        SeedPolicy::Common => k as u64,
        SeedPolicy::Independent => ((point as u64 + 1) << 40) | k as u64,
    }
}

fn contributions(e: &ReplicateEval, ljk_mean: f64) -> [f64; CHANNELS] {
    let a = f64::from(u8::from(e.covered_hat));
    let b = f64::from(u8::from(e.covered_known));
    let c = e.conditional_coverage;
    let lk = e.lk();
    let lj = e.lj();
    [
        a,
        b,
        c,
        a - b + c,
        lk,
        lk - (e.lkk() - e.lkk_conditional_mean()),
        lj,
        lj - (e.ljk() - ljk_mean),
    ]
}

fn run_chunk(
    cfgs: &[ExperimentConfig],
    opts: &RunOptions,
    start: usize,
    end: usize,
    ljk_mean: f64,
) -> Result<Vec<Acc>> {
    let (n, t, seed) = (cfgs[0].n, cfgs[0].t, cfgs[0].seed);
    let mut accs = vec![Acc::new(); cfgs.len()];
    let record = |acc: &mut Acc, r: Result<ReplicateEval>| -> Result<()> {
        match r {
            Ok(e) => acc.push(&contributions(&e, ljk_mean)),
            Err(Error::DegenerateSample(_)) => acc.rejected += 1,
            Err(e) => return Err(e),
        }
        Ok(())
    };
    for k in start..end {
        match opts.seeds {
            SeedPolicy::Common => {
                let streams = NoiseStreams::generate(seed, k as u64, n, t);
                let sm = StreamMoments::from_streams(&streams);
                for (cfg, acc) in cfgs.iter().zip(accs.iter_mut()) {
                    record(acc, evaluate_from_streams(&streams, &sm, cfg, opts))?;
                }
            }
            SeedPolicy::Independent => {
                for (g, (cfg, acc)) in cfgs.iter().zip(accs.iter_mut()).enumerate() {
                    let streams =
                        NoiseStreams::generate(seed, replicate_id(opts.seeds, g, k), n, t);
                    let sm = StreamMoments::from_streams(&streams);
                    record(acc, evaluate_from_streams(&streams, &sm, cfg, opts))?;
                }
            }
        }
    }
    Ok(accs)
}

/// Evaluate every configuration in `cfgs` over the same M replicates.
pub fn run_grid(cfgs: &[ExperimentConfig], opts: &RunOptions) -> Result<Vec<GridPointResult>> {
    check_grid(cfgs)?;
    let m = cfgs[0].replicates;
    let ljk_mean = expected_ljk(cfgs[0].n, cfgs[0].t);
    let started = Instant::now();
    let chunks: Vec<(usize, usize)> = (0..m)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(m)))
        .collect();
    let partial: Vec<Result<Vec<Acc>>> = chunks
        .par_iter()
        .map(|&(s, e)| run_chunk(cfgs, opts, s, e, ljk_mean))
        .collect();
    let mut total = vec![Acc::new(); cfgs.len()];
    for p in partial {
        for (t, a) in total.iter_mut().zip(p?.iter()) {
            t.merge(a);
        }
    }
    let wall = started.elapsed().as_secs_f64();
    let limit = m / 1000;
    cfgs.iter()
        .zip(total)
        .map(|(cfg, acc)| {
            if acc.rejected > limit || acc.n < 2 {
                return Err(Error::TooManyDegenerate {
                    rejected: acc.rejected,
                    total: m,
                });
            }
            Ok(GridPointResult {
                config: *cfg,
                coverage: CoverageEstimates {
                    cp_hat: acc.estimate(A, wall),
                    cpk_hat: acc.estimate(B, wall),
                    cpk_tilde: acc.estimate(C, wall),
                    cp_tilde: acc.estimate(D, wall),
                },
                sel: SelComponents {
                    lk_hat: acc.estimate(LK_HAT, wall),
                    lk_tilde: acc.estimate(LK_TILDE, wall),
                    lj_hat: acc.estimate(LJ_HAT, wall),
                    lj_tilde: acc.estimate(LJ_TILDE, wall),
                    cov_tilde: acc.cov(acc.cross_tilde, LK_TILDE, LJ_TILDE),
                    sel: f64::NAN,
                    sel_std_error: f64::NAN,
                },
                rejected: acc.rejected,
            })
        })
        .collect()
}

/// ĈP, ĈPK, C̃PK and C̃P for one scenario.
pub fn run_coverage(cfg: &ExperimentConfig, mode: VarianceMode) -> Result<CoverageEstimates> {
    let opts = RunOptions {
        mode,
        ..RunOptions::default()
    };
    Ok(run_grid(std::slice::from_ref(cfg), &opts)?[0].coverage)
}

/// Expected-length components and SEL for one scenario, with the estimated
/// variances plugged in.
pub fn run_sel(cfg: &ExperimentConfig, c_star: f64) -> Result<SelComponents> {
    if !(c_star > 0.0 && c_star < 1.0) {
        return Err(Error::domain("c_star", c_star, "0 < c_star < 1"));
    }
    let opts = RunOptions {
        coverage: false,
        ..RunOptions::default()
    };
    Ok(run_grid(std::slice::from_ref(cfg), &opts)?[0]
        .sel
        .with_c_star(cfg.alpha, c_star))
}

/// Parameter swept by [`grid_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Lambda,
    Rho,
    Psi,
}

impl SweepParameter {
    pub fn apply(&self, base: &ExperimentConfig, value: f64) -> ExperimentConfig {
        match self {
            SweepParameter::Lambda => base.with_lambda(value),
            SweepParameter::Rho => ExperimentConfig {
                rho: value,
                ..*base
            },
            SweepParameter::Psi => base.with_psi(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub result: GridPointResult,
}

/// Evaluate `base` at every value of `grid` for one parameter.
pub fn grid_sweep(
    base: &ExperimentConfig,
    parameter: SweepParameter,
    grid: &[f64],
    opts: &RunOptions,
) -> Result<Vec<SweepRow>> {
    let cfgs: Vec<_> = grid.iter().map(|&v| parameter.apply(base, v)).collect();
    Ok(grid
        .iter()
        .zip(run_grid(&cfgs, opts)?)
        .map(|(&value, result)| SweepRow { value, result })
        .collect())
}

/// Relative efficiency (t̂ / t̃)(var̂ / var̃) of a control-variate estimator.
pub fn efficiency(var_hat: f64, var_tilde: f64, t_hat: f64, t_tilde: f64) -> Result<f64> {
    for (name, v) in [
        ("var_hat", var_hat),
        ("var_tilde", var_tilde),
        ("t_hat", t_hat),
        ("t_tilde", t_tilde),
    ] {
        if !(v > 0.0) {
            return Err(Error::domain(name, v, "must be positive"));
        }
    }
    Ok((t_hat / t_tilde) * (var_hat / var_tilde))
}

/// Variances and loop timings of the brute-force and control-variate
/// coverage estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    pub var_hat: f64,
    pub var_tilde: f64,
    pub t_hat: f64,
    pub t_tilde: f64,
    pub variance_ratio: f64,
    pub efficiency: f64,
    pub cp_hat: McEstimate,
    pub cp_tilde: McEstimate,
    pub lk_variance_ratio: f64,
    pub lj_variance_ratio: f64,
}

/// Time a brute-force loop (ĈP only) against the control-variate loop and
/// combine with the estimator variances.
pub fn efficiency_report(cfg: &ExperimentConfig) -> Result<EfficiencyReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut covered = 0usize;
    for k in 0..cfg.replicates {
        let streams = NoiseStreams::generate(cfg.seed, k as u64, cfg.n, cfg.t);
        let sm = StreamMoments::from_streams(&streams);
        let stats = PanelStats::from_moments(sm.panel_moments(cfg))?;
        let v = stats.variances(cfg.estimator)?;
        let est = run_two_stage(&stats, v.sigma_eps(), v.psi(), cfg.alpha, cfg.alpha_tilde)?;
        covered += usize::from(est.k.contains(cfg.beta));
    }
    let t_hat = started.elapsed().as_secs_f64();
    std::hint::black_box(covered);

    let full = run_grid(std::slice::from_ref(cfg), &RunOptions::default())?[0];
    let t_tilde = full.coverage.cp_tilde.wall_time_seconds;
    let var_hat = full.coverage.cp_hat.std_error.powi(2);
    let var_tilde = full.coverage.cp_tilde.std_error.powi(2);
    Ok(EfficiencyReport {
        var_hat,
        var_tilde,
        t_hat,
        t_tilde,
        variance_ratio: var_hat / var_tilde,
        efficiency: efficiency(var_hat, var_tilde, t_hat, t_tilde)?,
        cp_hat: full.coverage.cp_hat,
        cp_tilde: full.coverage.cp_tilde,
        lk_variance_ratio: (full.sel.lk_hat.std_error / full.sel.lk_tilde.std_error).powi(2),
        lj_variance_ratio: (full.sel.lj_hat.std_error / full.sel.lj_tilde.std_error).powi(2),
    })
}
