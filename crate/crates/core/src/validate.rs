//! Cross-module invariant suite.

use std::fmt;

use crate::channel::{awgn_model, params_for_target_snr, Detection};
use crate::error::Result;
use crate::estimators::{
    binary_entropy, first_level_transition_probability, mi_bit_continuous_oracle,
    subchannel_report, transition_probs, Direction, Estimate, MiEstimatorConfig, SubChannelReport,
};
use crate::recon::{conditional_entropy_identity, run_sweep, MiXySource, MonteCarlo, SweepConfig};
use crate::seed::{derive, rng_from_seed, GaussianStream};
use crate::stats::{correlation, ks_p_value, ks_statistic_uniform};
use crate::transform::{dte_sequence, normal_cdf, DteConfig, GaussianCdf};

pub const PROPERTIES: [&str; 7] = [
    "uniformity_ks",
    "bit_balance",
    "bit_independence",
    "analytic_p1",
    "knn_oracle_agreement",
    "dpi_ordering",
    "entropy_identity",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Smaller samples and fewer repeats.
    pub quick: bool,
    /// Deliberately wrong BSC capacity `1 + H2(p)`; the suite must then
    /// fail `dpi_ordering`.
    pub flip_bsc_sign: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub results: Vec<PropertyResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name)
            .collect()
    }
}

struct Sizes {
    n: usize,
    repeats: usize,
}

fn standard_draws(n: usize, seed: u64) -> Vec<f64> {
    let mut g = GaussianStream::new(rng_from_seed(seed));
    (0..n).map(|_| g.next_standard()).collect()
}

fn uniformity_ks(sz: &Sizes, seed: u64) -> Result<PropertyResult> {
    let dist = GaussianCdf::standard();
    let u = standard_draws(sz.n, seed)
        .iter()
        .map(|&x| normal_cdf(x, &dist))
        .collect::<Result<Vec<_>>>()?;
    let d = ks_statistic_uniform(&u);
    let p = ks_p_value(d, u.len());
    Ok(PropertyResult {
        name: "uniformity_ks",
        passed: p > 0.01,
        detail: format!("D = {d:.5}, p = {p:.4}, n = {}", u.len()),
    })
}

fn bit_rows(sz: &Sizes, seed: u64) -> Result<Vec<Vec<f64>>> {
    let x = standard_draws(sz.n, seed);
    let m = dte_sequence(&x, &GaussianCdf::standard(), DteConfig::new(4)?)?;
    Ok(m.rows()
        .map(|r| r.iter().map(|&b| b as f64).collect())
        .collect())
}

fn bit_balance(rows: &[Vec<f64>]) -> PropertyResult {
    let n = rows[0].len() as f64;
    let tol = 4.0 * (0.25 / n).sqrt();
    let worst = rows
        .iter()
        .map(|r| (r.iter().sum::<f64>() / n - 0.5).abs())
        .fold(0.0, f64::max);
    PropertyResult {
        name: "bit_balance",
        passed: worst <= tol,
        detail: format!("max |mean - 1/2| = {worst:.5} (tol {tol:.5})"),
    }
}

fn bit_independence(rows: &[Vec<f64>]) -> PropertyResult {
    let n = rows[0].len() as f64;
    let tol = 4.0 / n.sqrt();
    let mut worst = 0.0f64;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            worst = worst.max(correlation(&rows[i], &rows[j]).abs());
        }
    }
    PropertyResult {
        name: "bit_independence",
        passed: worst <= tol,
        detail: format!("max |corr| = {worst:.5} (tol {tol:.5})"),
    }
}

fn analytic_p1(sz: &Sizes, seed: u64) -> Result<PropertyResult> {
    let mut passed = true;
    let mut parts = Vec::new();
    for det in Detection::ALL {
        let params = params_for_target_snr(0.0, 1.0, 0.02, det)?;
        let want = first_level_transition_probability(&awgn_model(&params));
        let pair = crate::channel::sample_raw_keys(&params, sz.n, derive(seed, &[det.tag()]))?;
        let p = transition_probs(&pair, DteConfig::new(1)?)?[0];
        let ok = (p.value - want).abs() <= 3.0 * p.std_error;
        passed &= ok;
        parts.push(format!(
            "{det}: p1 = {:.4} vs {want:.4} (se {:.4})",
            p.value, p.std_error
        ));
    }
    Ok(PropertyResult {
        name: "analytic_p1",
        passed,
        detail: parts.join(", "),
    })
}

fn knn_oracle_agreement(sz: &Sizes, seed: u64) -> Result<PropertyResult> {
    let params = params_for_target_snr(0.0, 1.0, 0.02, Detection::Heterodyne)?;
    let model = awgn_model(&params);
    let reports = subchannel_report(
        &params,
        DteConfig::new(4)?,
        &MiEstimatorConfig::default(),
        sz.n,
        sz.repeats,
        seed,
    )?;
    let mut worst = 0.0f64;
    for r in &reports {
        for dir in [Direction::Direct, Direction::Reverse] {
            let exact = mi_bit_continuous_oracle(r.level, &model, dir);
            worst = worst.max((r.mi(dir).value - exact).abs());
        }
    }
    Ok(PropertyResult {
        name: "knn_oracle_agreement",
        passed: worst <= 0.02,
        detail: format!("max |kNN - oracle| = {worst:.4} bits over levels 1-4 at 0 dB"),
    })
}

fn suite_sweep(sz: &Sizes, seed: u64) -> SweepConfig {
    SweepConfig {
        grid: vec![-4.0, -1.0, 2.0],
        depths: vec![2, 4],
        detections: Detection::ALL.to_vec(),
        mc: MonteCarlo {
            n: sz.n,
            repeats: sz.repeats,
            seed,
        },
        mod_variance: 1.0,
        excess_noise: 0.02,
        estimator: MiEstimatorConfig::default(),
        mi_xy_source: MiXySource::Analytic,
    }
}

fn capacity(p: f64, flip: bool) -> Result<f64> {
    let h = binary_entropy(p)?;
    Ok(if flip { 1.0 + h } else { 1.0 - h })
}

/// `C_BSC <= MI + 3 sigma`, with `sigma` the combined standard error of
/// the MI estimate and the plug-in capacity.
pub fn dpi_holds(c_bsc: f64, report: &SubChannelReport, mi: Estimate) -> bool {
    let sigma = mi.std_error.hypot(report.bsc_capacity_se());
    c_bsc <= mi.value + 3.0 * sigma
}

fn dpi_ordering(sweep: &crate::recon::EfficiencySweep, flip: bool) -> Result<PropertyResult> {
    let mut violations = 0;
    let mut checked = 0;
    for point in sweep.points.iter().filter(|p| p.depth == 4) {
        for r in &point.reports {
            let c = capacity(r.p.value, flip)?;
            for dir in [Direction::Direct, Direction::Reverse] {
                let mi = r.mi(dir);
                checked += 1;
                if !dpi_holds(c, r, mi) {
                    violations += 1;
                }
            }
        }
    }
    Ok(PropertyResult {
        name: "dpi_ordering",
        passed: violations == 0 && checked > 0,
        detail: format!("{violations} of {checked} C_BSC > MI + 3 se"),
    })
}

fn entropy_identity(sweep: &crate::recon::EfficiencySweep) -> PropertyResult {
    let mut worst = 0.0f64;
    for point in &sweep.points {
        for dir in [Direction::Direct, Direction::Reverse] {
            let sum: f64 = point.reports.iter().map(|r| r.mi(dir).value).sum();
            let h = conditional_entropy_identity(&point.reports, dir);
            worst = worst.max((sum + h - point.depth as f64).abs());
        }
    }
    PropertyResult {
        name: "entropy_identity",
        passed: worst <= 1e-12,
        detail: format!("max |sum MI + H - l| = {worst:.2e}"),
    }
}

/// Run every property in [`PROPERTIES`] order.
pub fn run_validation(opts: &ValidateOptions) -> Result<ValidationReport> {
    let sz = if opts.quick {
        Sizes {
            n: 2_000,
            repeats: 2,
        }
    } else {
        Sizes {
            n: 10_000,
            repeats: 8,
        }
    };
    let s = |tag: u64| derive(opts.seed, &[tag]);
    let rows = bit_rows(&sz, s(2))?;
    let sweep = run_sweep(&suite_sweep(&sz, s(5)))?;
    let results = vec![
        uniformity_ks(&sz, s(1))?,
        bit_balance(&rows),
        bit_independence(&rows),
        analytic_p1(&sz, s(3))?,
        knn_oracle_agreement(&sz, s(4))?,
        dpi_ordering(&sweep, opts.flip_bsc_sign)?,
        entropy_identity(&sweep),
    ];
    Ok(ValidationReport { results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let r = run_validation(&ValidateOptions {
            seed: 1,
            quick: true,
            flip_bsc_sign: false,
        })
        .unwrap();
        let names: Vec<_> = r.results.iter().map(|p| p.name).collect();
        assert_eq!(names, PROPERTIES);
        assert!(r.all_passed(), "{:#?}", r.results);
    }

    #[test]
    fn flipped_capacity_fails_dpi_only() {
        let r = run_validation(&ValidateOptions {
            seed: 1,
            quick: true,
            flip_bsc_sign: true,
        })
        .unwrap();
        assert_eq!(r.failures(), vec!["dpi_ordering"]);
    }
}
