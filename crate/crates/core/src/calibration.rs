//! Coverage of the fixed-effects interval J_c with estimated σε, the c*
//! solver, and grid searches for minimum coverage and SEL extremes.

use crate::dgp::{EstimatorPair, ExperimentConfig, StreamMoments};
use crate::error::{Error, Result};
use crate::estimators::PanelStats;
use crate::mc::{run_grid, GridPointResult, RunOptions, SelComponents, SweepParameter};
use crate::normal;
use crate::quadrature::integrate;
use crate::rng::NoiseStreams;
use statrs::function::gamma::ln_gamma;

/// Replicates used when P(β ∈ J_c(σ̂ε)) has to be simulated.
pub const DEFAULT_JC_REPLICATES: usize = 100_000;

/// Absolute tolerance of the c* bisection.
pub const C_STAR_TOL: f64 = 1e-10;

/// Bisection for f(x) = target on [lo, hi] with f increasing.
pub fn bisect_increasing<F>(
    mut f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if !(flo <= target && target <= fhi) {
        return Err(Error::Numerical {
            routine: "bisect_increasing",
            detail: format!("target {target} not bracketed by f({lo}) = {flo}, f({hi}) = {fhi}"),
        });
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone)]
enum JcMethod {
    /// σ̂ε²/σε² ~ χ²_ν/ν independent of β̃_W, integrated numerically.
    Quadrature { nu: f64 },
    /// Sorted |β̃_W − β| SSW^{1/2} / σ̂ε over simulated replicates.
    Simulation { ratios: Vec<f64> },
}

/// P(β ∈ J_c(σ̂ε)) as a function of c for fixed N, T and estimator pair.
#[derive(Debug, Clone)]
pub struct JcCalibrator {
    pub n: usize,
    pub t: usize,
    pub estimator: EstimatorPair,
    method: JcMethod,
}

impl JcCalibrator {
    /// Quadrature for the unbiased pair, simulation with `replicates` draws
    /// keyed by `seed` otherwise.
    pub fn new(
        n: usize,
        t: usize,
        estimator: EstimatorPair,
        replicates: usize,
        seed: u64,
    ) -> Result<Self> {
        let method = match estimator {
            EstimatorPair::Unbiased => JcMethod::Quadrature {
                nu: (n * (t - 1) - 1) as f64,
            },
            _ => JcMethod::Simulation {
                ratios: simulate_ratios(n, t, estimator, replicates, seed)?,
            },
        };
        Ok(Self {
            n,
            t,
            estimator,
            method,
        })
    }

    pub fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        Self::new(cfg.n, cfg.t, cfg.estimator, DEFAULT_JC_REPLICATES, cfg.seed)
    }

    pub fn is_simulated(&self) -> bool {
        matches!(self.method, JcMethod::Simulation { .. })
    }

    /// P(β ∈ J_c(σ̂ε)).
    pub fn coverage(&self, c: f64) -> Result<f64> {
        if c <= 0.0 {
            return Ok(0.0);
        }
        if c >= 1.0 {
            return Ok(1.0);
        }
        let m = normal::central_multiplier(c);
        match &self.method {
            JcMethod::Quadrature { nu } => coverage_quadrature(m, *nu),
            JcMethod::Simulation { ratios } => {
                let k = ratios.partition_point(|&r| r <= m);
                Ok(k as f64 / ratios.len() as f64)
            }
        }
    }

    /// The c with P(β ∈ J_c(σ̂ε)) = c_min.
    pub fn solve_c_star(&self, c_min: f64) -> Result<f64> {
        if !(c_min > 0.0 && c_min < 1.0) {
            return Err(Error::domain("c_min", c_min, "0 < c_min < 1"));
        }
        match &self.method {
            JcMethod::Quadrature { .. } => {
                bisect_increasing(|c| self.coverage(c), c_min, 0.0, 1.0, C_STAR_TOL)
            }
            JcMethod::Simulation { ratios } => {
                // smallest order statistic whose empirical cdf reaches c_min
                let k = ((c_min * ratios.len() as f64).ceil() as usize).clamp(1, ratios.len());
                Ok(2.0 * normal::cdf(ratios[k - 1]) - 1.0)
            }
        }
    }
}

fn coverage_quadrature(m: f64, nu: f64) -> Result<f64> {
    let log_norm = 0.5 * nu * std::f64::consts::LN_2 + ln_gamma(0.5 * nu);
    let density = |y: f64| {
        if y <= 0.0 {
            0.0
        } else {
            ((0.5 * nu - 1.0) * y.ln() - 0.5 * y - log_norm).exp()
        }
    };
    let integrand = |y: f64| {
        let s = (y / nu).sqrt();
        (1.0 - 2.0 * normal::sf(m * s)) * density(y)
    };
    let sd = (2.0 * nu).sqrt();
    let lo = (nu - 20.0 * sd).max(0.0);
    let hi = nu + 40.0 * sd + 60.0;
    let mid = nu.min(hi);
    let left = integrate(integrand, lo, mid, 1e-13, 0.0)?;
    let right = integrate(integrand, mid, hi, 1e-13, 0.0)?;
    Ok((left + right).clamp(0.0, 1.0))
}

// |β̃_W − β| SSW^{1/2} / σ̂ε at τ = 0, ψ = 1, ρ = 0, unit scales; the law of
// this ratio does not depend on the parameters.
fn simulate_ratios(
    n: usize,
    t: usize,
    estimator: EstimatorPair,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let cfg = ExperimentConfig {
        n,
        t,
        tau: 0.0,
        rho: 0.0,
        sigma_eps: 1.0,
        sigma_mu: 1.0,
        sigma_x: 1.0,
        a: 0.0,
        beta: 0.0,
        estimator,
        replicates,
        seed,
        ..ExperimentConfig::default()
    };
    cfg.validate()?;
    let mut ratios = Vec::with_capacity(replicates);
    for k in 0..replicates {
        // offset keeps these draws apart from the coverage replicates
        let streams = NoiseStreams::generate(seed, (1u64 << 48) + k as u64, n, t);
        let stats = match PanelStats::from_moments(
            StreamMoments::from_streams(&streams).panel_moments(&cfg),
        ) {
            Ok(s) => s,
            Err(Error::DegenerateSample(_)) => continue,
            Err(e) => return Err(e),
        };
        let v = match stats.variances(estimator) {
            Ok(v) => v,
            Err(Error::DegenerateSample(_)) => continue,
            Err(e) => return Err(e),
        };
        ratios.push((stats.beta_w - cfg.beta).abs() * stats.ssw.sqrt() / v.sigma_eps());
    }
    if replicates - ratios.len() > replicates / 1000 {
        return Err(Error::TooManyDegenerate {
            rejected: replicates - ratios.len(),
            total: replicates,
        });
    }
    ratios.sort_by(f64::total_cmp);
    Ok(ratios)
}

/// Grids searched by the calibration routines.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub tau: Vec<f64>,
    pub psi: Vec<f64>,
    pub rho: Vec<f64>,
    /// Follow the product grid with a local pass around its minimizer.
    pub refine: bool,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            tau: (0..20).map(|i| i as f64 / 20.0).collect(),
            psi: vec![0.05, 0.1, 0.2, 1.0 / 3.0, 0.5, 1.0, 2.0, 5.0],
            rho: (0..=8).map(|i| i as f64 / 10.0).collect(),
            refine: true,
        }
    }
}

/// Local grid around a coarse minimizer: τ ± 0.05 in steps of 0.01 (kept in
/// [0, 0.99]), ψ times e^{0.05k} for |k| ≤ 5, and ρ together with its
/// neighbours in the coarse ρ grid.
pub fn refinement_grid(argmin: (f64, f64, f64), coarse: &Grids) -> Grids {
    let (tau0, psi0, rho0) = argmin;
    let centre = (tau0 * 100.0).round() as i64;
    let tau = (-5..=5)
        .map(|k| centre + k)
        .filter(|&i| (0..=99).contains(&i))
        .map(|i| i as f64 / 100.0)
        .collect();
    let psi = (-5..=5).map(|k| psi0 * (0.05 * k as f64).exp()).collect();
    let mut sorted = coarse.rho.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let pos = sorted.iter().position(|&r| r == rho0).unwrap_or(0);
    let rho = sorted[pos.saturating_sub(1)..(pos + 2).min(sorted.len())].to_vec();
    Grids {
        tau,
        psi,
        rho,
        refine: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub c_min: f64,
    pub c_min_std_error: f64,
    /// (τ, ψ, ρ) at the minimum.
    pub argmin: (f64, f64, f64),
    pub c_star: f64,
    pub grids: Grids,
}

fn product_grid(template: &ExperimentConfig, grids: &Grids) -> Vec<ExperimentConfig> {
    let mut out = Vec::with_capacity(grids.tau.len() * grids.psi.len() * grids.rho.len());
    for &rho in &grids.rho {
        for &psi in &grids.psi {
            for &tau in &grids.tau {
                out.push(
                    ExperimentConfig {
                        rho,
                        tau,
                        ..*template
                    }
                    .with_psi(psi),
                );
            }
        }
    }
    out
}

fn argmin_coverage(points: &[GridPointResult]) -> Option<&GridPointResult> {
    points.iter().min_by(|a, b| {
        a.coverage
            .cp_tilde
            .value
            .total_cmp(&b.coverage.cp_tilde.value)
    })
}

fn check_grids(grids: &Grids) -> Result<()> {
    if grids.tau.is_empty() || grids.psi.is_empty() || grids.rho.is_empty() {
        return Err(Error::config(
            "grid",
            "tau, psi and rho grids must be nonempty",
        ));
    }
    if grids.tau.iter().any(|&t| !(0.0..1.0).contains(&t)) {
        return Err(Error::config("tau_grid", "tau grid must lie in [0, 1)"));
    }
    Ok(())
}

/// Minimum of C̃P over the product grid, all points sharing the replicate
/// streams, and the matching c*.
pub fn minimize_coverage(
    template: &ExperimentConfig,
    grids: &Grids,
    calibrator: &JcCalibrator,
    opts: &RunOptions,
) -> Result<CalibrationResult> {
    check_grids(grids)?;
    let points = run_grid(&product_grid(template, grids), opts)?;
    let points = with_refinement(template, points, grids, opts)?;
    calibration_from_points(&points, grids, calibrator)
}

fn with_refinement(
    template: &ExperimentConfig,
    mut points: Vec<GridPointResult>,
    grids: &Grids,
    opts: &RunOptions,
) -> Result<Vec<GridPointResult>> {
    if !grids.refine {
        return Ok(points);
    }
    let best = argmin_coverage(&points).ok_or_else(|| Error::config("grid", "grid is empty"))?;
    let local = refinement_grid((best.config.tau, best.config.psi(), best.config.rho), grids);
    points.extend(run_grid(&product_grid(template, &local), opts)?);
    Ok(points)
}

fn calibration_from_points(
    points: &[GridPointResult],
    grids: &Grids,
    calibrator: &JcCalibrator,
) -> Result<CalibrationResult> {
    let best = argmin_coverage(points).ok_or_else(|| Error::config("grid", "grid is empty"))?;
    let c_min = best.coverage.cp_tilde.value;
    Ok(CalibrationResult {
        c_min,
        c_min_std_error: best.coverage.cp_tilde.std_error,
        argmin: (best.config.tau, best.config.psi(), best.config.rho),
        c_star: calibrator.solve_c_star(c_min)?,
        grids: grids.clone(),
    })
}

/// One extreme of SEL over a (τ, ψ) grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelExtreme {
    pub sel: f64,
    pub std_error: f64,
    pub tau: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelExtremes {
    pub min: SelExtreme,
    pub max: SelExtreme,
}

fn extremes(points: &[(f64, f64, SelComponents)]) -> Option<SelExtremes> {
    let to = |&(tau, psi, s): &(f64, f64, SelComponents)| SelExtreme {
        sel: s.sel,
        std_error: s.sel_std_error,
        tau,
        psi,
    };
    let min = points.iter().min_by(|a, b| a.2.sel.total_cmp(&b.2.sel))?;
    let max = points.iter().max_by(|a, b| a.2.sel.total_cmp(&b.2.sel))?;
    Some(SelExtremes {
        min: to(min),
        max: to(max),
    })
}

/// Minimum and maximum SEL over the (τ, ψ) grid at fixed α̃ and ρ.
pub fn sel_extremes(
    template: &ExperimentConfig,
    alpha_tilde: f64,
    rho: f64,
    tau_grid: &[f64],
    psi_grid: &[f64],
    c_star: f64,
    opts: &RunOptions,
) -> Result<SelExtremes> {
    let grids = Grids {
        tau: tau_grid.to_vec(),
        psi: psi_grid.to_vec(),
        rho: vec![rho],
        refine: false,
    };
    check_grids(&grids)?;
    let base = ExperimentConfig {
        alpha_tilde,
        ..*template
    };
    let opts = RunOptions {
        coverage: false,
        ..*opts
    };
    let points = run_grid(&product_grid(&base, &grids), &opts)?;
    let sels: Vec<_> = points
        .iter()
        .map(|p| {
            (
                p.config.tau,
                p.config.psi(),
                p.sel.with_c_star(p.config.alpha, c_star),
            )
        })
        .collect();
    extremes(&sels).ok_or_else(|| Error::config("grid", "grid is empty"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub alpha_tilde: f64,
    pub rho: f64,
    pub extremes: SelExtremes,
    pub calibration: CalibrationResult,
}

/// Min and max SEL for each α̃ and each ρ in `sel_rho`. For every α̃ a single
/// grid run over τ × ψ × (calibration ρ grid ∪ `sel_rho`) yields both c_min
/// and the expected-length components.
pub fn table1(
    template: &ExperimentConfig,
    alpha_tildes: &[f64],
    sel_rho: &[f64],
    grids: &Grids,
    calibrator: &JcCalibrator,
    opts: &RunOptions,
) -> Result<Vec<Table1Row>> {
    check_grids(grids)?;
    let mut rho_all = grids.rho.clone();
    for &r in sel_rho {
        if !rho_all.contains(&r) {
            rho_all.push(r);
        }
    }
    let run_grids = Grids {
        rho: rho_all,
        ..grids.clone()
    };
    let mut rows = Vec::new();
    for &alpha_tilde in alpha_tildes {
        let base = ExperimentConfig {
            alpha_tilde,
            ..*template
        };
        let points = run_grid(&product_grid(&base, &run_grids), opts)?;
        let in_cal: Vec<_> = points
            .iter()
            .filter(|p| grids.rho.contains(&p.config.rho))
            .copied()
            .collect();
        let in_cal = with_refinement(&base, in_cal, grids, opts)?;
        let cal = calibration_from_points(&in_cal, grids, calibrator)?;
        for &rho in sel_rho {
            let sels: Vec<_> = points
                .iter()
                .filter(|p| p.config.rho == rho)
                .map(|p| {
                    (
                        p.config.tau,
                        p.config.psi(),
                        p.sel.with_c_star(p.config.alpha, cal.c_star),
                    )
                })
                .collect();
            rows.push(Table1Row {
                alpha_tilde,
                rho,
                extremes: extremes(&sels)
                    .ok_or_else(|| Error::config("sel_rho", "no grid point"))?,
                calibration: cal.clone(),
            });
        }
    }
    Ok(rows)
}

/// Minimum over τ of C̃P for each value of a swept parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinCoverageRow {
    pub value: f64,
    pub c_min: f64,
    pub std_error: f64,
    pub argmin_tau: f64,
}

pub fn min_coverage_curve(
    base: &ExperimentConfig,
    parameter: SweepParameter,
    values: &[f64],
    tau_grid: &[f64],
    opts: &RunOptions,
) -> Result<Vec<MinCoverageRow>> {
    if values.is_empty() || tau_grid.is_empty() {
        return Err(Error::config("grid", "grids must be nonempty"));
    }
    let mut cfgs = Vec::with_capacity(values.len() * tau_grid.len());
    for &v in values {
        let c = parameter.apply(base, v);
        for &tau in tau_grid {
            cfgs.push(ExperimentConfig { tau, ..c });
        }
    }
    let points = run_grid(&cfgs, opts)?;
    Ok(values
        .iter()
        .zip(points.chunks(tau_grid.len()))
        .map(|(&value, chunk)| {
            let best = argmin_coverage(chunk).expect("nonempty tau grid");
            MinCoverageRow {
                value,
                c_min: best.coverage.cp_tilde.value,
                std_error: best.coverage.cp_tilde.std_error,
                argmin_tau: best.config.tau,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_on_identity_stub() {
        for &c_min in &[0.1, 0.5, 0.93] {
            let c = bisect_increasing(Ok, c_min, 0.0, 1.0, 1e-12).unwrap();
            assert!((c - c_min).abs() < 1e-11);
        }
        assert!(bisect_increasing(Ok, 2.0, 0.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn quadrature_limits() {
        let cal = JcCalibrator::new(100, 3, EstimatorPair::Unbiased, 0, 1).unwrap();
        assert_eq!(cal.coverage(0.0).unwrap(), 0.0);
        assert_eq!(cal.coverage(1.0).unwrap(), 1.0);
        assert!(cal.coverage(1e-9).unwrap() < 1e-8);
        assert!(cal.coverage(1.0 - 1e-12).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn c_star_is_monotone_and_above_target() {
        let cal = JcCalibrator::new(100, 3, EstimatorPair::Unbiased, 0, 1).unwrap();
        let a = cal.solve_c_star(0.6).unwrap();
        let b = cal.solve_c_star(0.95).unwrap();
        assert!(a < b);
        assert!(b > 0.95);
        assert!((cal.coverage(b).unwrap() - 0.95).abs() < 1e-9);
    }

    #[test]
    fn simulated_calibrator_inverts_empirical_cdf() {
        let cal = JcCalibrator::new(20, 3, EstimatorPair::Wooldridge { k: 0 }, 4000, 5).unwrap();
        assert!(cal.is_simulated());
        let c = cal.solve_c_star(0.8).unwrap();
        let cov = cal.coverage(c).unwrap();
        assert!((0.8..0.8 + 1.0 / 4000.0 + 1e-12).contains(&cov));
    }

    #[test]
    fn default_grids() {
        let g = Grids::default();
        assert_eq!(g.tau.len(), 20);
        assert!((g.tau[19] - 0.95).abs() < 1e-12);
        assert_eq!(g.rho.len(), 9);
        assert!((g.rho[8] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn refinement_stays_in_domain() {
        let g = Grids::default();
        let local = refinement_grid((0.95, 0.2, 0.8), &g);
        assert_eq!(local.tau.first(), Some(&0.9));
        assert_eq!(local.tau.last(), Some(&0.99));
        assert_eq!(local.rho, vec![0.7, 0.8]);
        assert_eq!(local.psi.len(), 11);
        assert!((local.psi[5] - 0.2).abs() < 1e-15);
        let local = refinement_grid((0.0, 1.0, 0.0), &g);
        assert_eq!(local.tau[0], 0.0);
        assert_eq!(local.rho, vec![0.0, 0.1]);
    }
}
