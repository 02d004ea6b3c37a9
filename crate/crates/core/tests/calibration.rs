use pretest_lab::calibration::{min_coverage_curve, minimize_coverage, Grids, JcCalibrator};
use pretest_lab::mc::{grid_sweep, run_grid, RunOptions, SweepParameter};
use pretest_lab::normal;
use pretest_lab::{EstimatorPair, ExperimentConfig};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn figure1_config(replicates: usize) -> ExperimentConfig {
    ExperimentConfig {
        rho: 0.3,
        replicates,
        ..ExperimentConfig::default()
    }
    .with_psi(1.0 / 3.0)
}

#[test]
fn always_reject_gives_flat_coverage() {
    let template = ExperimentConfig {
        alpha_tilde: 1.0,
        replicates: 4000,
        ..ExperimentConfig::default()
    };
    let grids = Grids {
        tau: vec![0.0, 0.5, 0.9],
        psi: vec![0.2, 2.0],
        rho: vec![0.0, 0.6],
        refine: false,
    };
    let cal = JcCalibrator::for_config(&template).unwrap();
    let opts = RunOptions::default();
    let res = minimize_coverage(&template, &grids, &cal, &opts).unwrap();
    let cfgs: Vec<_> = [0.0, 0.5, 0.9]
        .iter()
        .flat_map(|&tau| {
            [0.0, 0.6].map(|rho| ExperimentConfig {
                tau,
                rho,
                ..template
            })
        })
        .collect();
    let points = run_grid(&cfgs, &opts).unwrap();
    for p in &points {
        assert!((p.coverage.cp_tilde.value - res.c_min).abs() < 1e-12);
    }
    let exact = cal.coverage(0.95).unwrap();
    let se = points[0].coverage.cp_hat.std_error;
    assert!(
        (res.c_min - exact).abs() < 3.0 * se,
        "{} vs {exact}",
        res.c_min
    );
}

#[test]
fn c_star_matches_student_t_inverse() {
    let cal = JcCalibrator::new(100, 3, EstimatorPair::Unbiased, 0, 1).unwrap();
    let st = StudentsT::new(0.0, 1.0, 199.0).unwrap();
    for &c_min in &[0.3, 0.75, 0.95] {
        let oracle = 2.0 * normal::cdf(st.inverse_cdf((1.0 + c_min) / 2.0)) - 1.0;
        let c = cal.solve_c_star(c_min).unwrap();
        assert!((c - oracle).abs() < 1e-6, "{c} vs {oracle}");
        assert!(c > c_min);
    }
}

#[test]
fn doubling_lambda_resolution_is_stable() {
    let base = figure1_config(10_000);
    let coarse: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
    let fine: Vec<f64> = (0..39).map(|i| i as f64 * 0.25).collect();
    let min = |grid: &[f64]| {
        grid_sweep(&base, SweepParameter::Lambda, grid, &RunOptions::default())
            .unwrap()
            .into_iter()
            .map(|r| r.result.coverage.cp_tilde)
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .unwrap()
    };
    let (a, b) = (min(&coarse), min(&fine));
    assert!(b.value <= a.value);
    assert!(
        (a.value - b.value) < 2.0 * a.std_error,
        "{} vs {}",
        a.value,
        b.value
    );
}

#[test]
fn larger_pretest_level_improves_minimum_coverage() {
    let base = figure1_config(4000);
    let grid: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let curve = |alpha_tilde: f64| {
        grid_sweep(
            &ExperimentConfig {
                alpha_tilde,
                ..base
            },
            SweepParameter::Lambda,
            &grid,
            &RunOptions::default(),
        )
        .unwrap()
    };
    let (low, high) = (curve(0.05), curve(0.5));
    let worst = low
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.result
                .coverage
                .cp_tilde
                .value
                .total_cmp(&b.1.result.coverage.cp_tilde.value)
        })
        .unwrap()
        .0;
    assert!(high[worst].result.coverage.cp_tilde.value > low[worst].result.coverage.cp_tilde.value);
    // at λ = 0 both sit a little below the nominal level: I and the pretest
    // are independent there but J is not
    for c in [&low[0], &high[0]] {
        let v = c.result.coverage.cp_tilde.value;
        assert!(v < 0.95 && v > 0.92, "{v}");
    }
}

#[test]
fn minimum_coverage_decreases_in_rho() {
    let base = ExperimentConfig {
        replicates: 3000,
        ..ExperimentConfig::default()
    };
    let tau: Vec<f64> = (0..25).map(|i| i as f64 / 25.0).collect();
    let rho = [0.0, 0.3, 0.6, 0.9];
    let rows = min_coverage_curve(
        &base,
        SweepParameter::Rho,
        &rho,
        &tau,
        &RunOptions::default(),
    )
    .unwrap();
    assert!(rows.windows(2).all(|w| w[1].c_min < w[0].c_min));
}

#[test]
fn minimum_coverage_dips_near_psi_one_fifth() {
    let base = ExperimentConfig {
        rho: 0.4,
        replicates: 2000,
        ..ExperimentConfig::default()
    };
    let tau: Vec<f64> = (0..25).map(|i| i as f64 / 25.0).collect();
    let psi = [0.05, 0.1, 0.15, 0.2, 0.25, 0.35, 0.5, 1.0, 2.0, 5.0];
    let curve = |alpha_tilde: f64| {
        let rows = min_coverage_curve(
            &ExperimentConfig {
                alpha_tilde,
                ..base
            },
            SweepParameter::Psi,
            &psi,
            &tau,
            &RunOptions::default(),
        )
        .unwrap();
        *rows
            .iter()
            .min_by(|a, b| a.c_min.total_cmp(&b.c_min))
            .unwrap()
    };
    let low = curve(0.05);
    assert!(
        (0.1..=0.35).contains(&low.value),
        "dip at psi {}",
        low.value
    );
    assert!(low.c_min < 0.7);
    assert!(curve(0.5).c_min > low.c_min + 0.1);
}

#[test]
fn scaled_expected_length_exceeds_one() {
    let template = ExperimentConfig {
        replicates: 3000,
        ..ExperimentConfig::default()
    };
    let cal = JcCalibrator::for_config(&template).unwrap();
    let grids = Grids {
        tau: vec![0.0, 0.3, 0.6, 0.9],
        psi: vec![0.1, 0.2, 1.0, 5.0],
        rho: vec![0.0, 0.4, 0.8],
        refine: false,
    };
    let rows = pretest_lab::calibration::table1(
        &template,
        &[0.05, 0.5],
        &[0.0, 0.8],
        &grids,
        &cal,
        &RunOptions::default(),
    )
    .unwrap();
    for r in rows {
        assert!(r.extremes.min.sel > 1.0, "{r:?}");
        assert!(r.calibration.c_min > 0.0 && r.calibration.c_min < 1.0);
        let residual = cal.coverage(r.calibration.c_star).unwrap() - r.calibration.c_min;
        assert!(residual.abs() < 1e-6);
    }
}
