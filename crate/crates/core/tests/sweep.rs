use dte_core::channel::Detection;
use dte_core::estimators::{Direction, MiEstimatorConfig, MiMethod};
use dte_core::io::{
    read_sweep_csv, read_sweep_json, write_sweep_csv, write_sweep_json, EfficiencyRow,
};
use dte_core::recon::{
    conditional_entropy_identity, run_sweep, EfficiencySweep, MiXySource, MonteCarlo, SweepConfig,
};

fn config(grid: Vec<f64>, method: MiMethod, repeats: usize) -> SweepConfig {
    SweepConfig {
        grid,
        depths: vec![2, 3, 4],
        detections: vec![Detection::Heterodyne],
        mc: MonteCarlo {
            n: 10_000,
            repeats,
            seed: 3,
        },
        mod_variance: 1.0,
        excess_noise: 0.02,
        estimator: MiEstimatorConfig {
            method,
            ..MiEstimatorConfig::default()
        },
        mi_xy_source: MiXySource::Analytic,
    }
}

fn max_beta_gap(a: &EfficiencySweep, b: &EfficiencySweep) -> (f64, f64, u32) {
    let mut worst = (0.0, 0.0, 0);
    for (p, q) in a.points.iter().zip(&b.points) {
        assert_eq!((p.snr_db, p.depth), (q.snr_db, q.depth));
        let gap = (p.beta_rr.value - q.beta_rr.value).abs();
        if gap > worst.0 {
            worst = (gap, p.snr_db, p.depth);
        }
    }
    worst
}

#[test]
fn oracle_sweep_matches_estimator_sweep() {
    let grid: Vec<f64> = (0..=24).map(|k| -6.0 + 0.5 * k as f64).collect();
    let knn = run_sweep(&config(grid.clone(), MiMethod::KnnMixed, 1000)).unwrap();
    let exact = run_sweep(&config(grid, MiMethod::QuadratureOracle, 1)).unwrap();
    assert_eq!(knn.points.len(), exact.points.len());
    assert_eq!(knn.warnings.len(), 7);
    let (gap, snr, depth) = max_beta_gap(&knn, &exact);
    println!("max |beta_knn - beta_oracle| = {gap:.4} at {snr} dB, l = {depth}");
    assert!(gap <= 0.03, "gap {gap} at {snr} dB, l = {depth}");
}

#[test]
fn entropy_identity_and_round_trips() {
    let s = run_sweep(&config(vec![-1.0, 1.0], MiMethod::KnnMixed, 2)).unwrap();
    for p in &s.points {
        for dir in [Direction::Direct, Direction::Reverse] {
            let sum: f64 = p.reports.iter().map(|r| r.mi(dir).value).sum();
            let h = conditional_entropy_identity(&p.reports, dir);
            assert!((sum + h - p.depth as f64).abs() <= 1e-12);
        }
    }

    let mut csv = Vec::new();
    write_sweep_csv(&s, &mut csv).unwrap();
    let rows = read_sweep_csv(&csv[..]).unwrap();
    let want: Vec<EfficiencyRow> = s.points.iter().map(EfficiencyRow::from).collect();
    assert_eq!(rows, want);

    let mut json = Vec::new();
    write_sweep_json(&s, &mut json).unwrap();
    assert_eq!(read_sweep_json(&json[..]).unwrap(), s);
}
