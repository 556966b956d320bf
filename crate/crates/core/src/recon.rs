//! Maximum reconciliation efficiency of DTE-based reconciliation.
//!
//! With side information at the conditional-entropy limit, and because the
//! DTE bits are independent Bernoulli(1/2),
//!
//! ```text
//! H(D(X) | Y) = l - sum_i I(D_i(X); Y)
//! beta_dr     = sum_i I(D_i(X); Y) / I(X; Y)
//! beta_rr     = sum_i I(D_i(Y); X) / I(X; Y)
//! ```
//!
//! The secret key rate is `beta I(X;Y) - chi`; the Holevo term `chi` is not
//! computed here.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{awgn_model, params_for_target_snr, ChannelParams, Detection, RawKeyPair};
use crate::error::{Error, Result};
use crate::estimators::{
    cells, level_bits, marginal_cdfs, mi_gaussian_analytic, run_subchannels, Direction, Estimate,
    MiEstimatorConfig, SubChannelReport,
};
use crate::seed::derive;
use crate::transform::{BitMatrix, DteConfig};

/// `(beta_dr, beta_rr)` with their propagated standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    pub beta_dr: Estimate,
    pub beta_rr: Estimate,
    pub mi_sum_dr: Estimate,
    pub mi_sum_rr: Estimate,
}

fn sum_estimates(reports: &[SubChannelReport], direction: Direction) -> Estimate {
    let value = reports.iter().map(|r| r.mi(direction).value).sum();
    let var: f64 = reports
        .iter()
        .map(|r| r.mi(direction).std_error.powi(2))
        .sum();
    Estimate::new(value, var.sqrt())
}

/// Maximum efficiency for both directions given per-level reports and the
/// channel mutual information `mi_xy` in bits.
pub fn max_efficiency(reports: &[SubChannelReport], mi_xy: f64) -> Result<Efficiency> {
    if reports.is_empty() {
        return Err(Error::Empty);
    }
    if mi_xy.is_nan() || mi_xy <= 0.0 || mi_xy.is_infinite() {
        return Err(Error::Domain(format!(
            "I(X;Y) must be positive, got {mi_xy}"
        )));
    }
    let mi_sum_dr = sum_estimates(reports, Direction::Direct);
    let mi_sum_rr = sum_estimates(reports, Direction::Reverse);
    let ratio = |s: Estimate| Estimate::new(s.value / mi_xy, s.std_error / mi_xy);
    Ok(Efficiency {
        beta_dr: ratio(mi_sum_dr),
        beta_rr: ratio(mi_sum_rr),
        mi_sum_dr,
        mi_sum_rr,
    })
}

/// `H(D(.) | .) = l - sum_i I_i`, the minimal side information per sample.
pub fn conditional_entropy_identity(reports: &[SubChannelReport], direction: Direction) -> f64 {
    let l = reports.len() as f64;
    l - reports.iter().map(|r| r.mi(direction).value).sum::<f64>()
}

/// Source of the denominator `I(X; Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MiXySource {
    /// `0.5 log2(1 + SNR)`.
    #[default]
    Analytic,
    /// KSG estimate from the same samples, for sensitivity analysis.
    Ksg,
}

impl FromStr for MiXySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(MiXySource::Analytic),
            "ksg" | "knn" => Ok(MiXySource::Ksg),
            other => Err(Error::InvalidParameter(format!(
                "unknown I(X;Y) source '{other}'"
            ))),
        }
    }
}

impl fmt::Display for MiXySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MiXySource::Analytic => "analytic",
            MiXySource::Ksg => "ksg",
        })
    }
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub n: usize,
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub depths: Vec<u32>,
    pub detections: Vec<Detection>,
    pub mc: MonteCarlo,
    pub mod_variance: f64,
    pub excess_noise: f64,
    pub estimator: MiEstimatorConfig,
    pub mi_xy_source: MiXySource,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("SNR grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "SNR grid holds a non-finite value".into(),
            ));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "SNR grid must be strictly increasing".into(),
            ));
        }
        if self.depths.is_empty() || self.detections.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one depth and detection".into(),
            ));
        }
        for &d in &self.depths {
            DteConfig::new(d)?;
        }
        self.estimator.validate()?;
        if self.mc.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be at least 1".into()));
        }
        if self.mc.n < crate::estimators::knn::MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                got: self.mc.n,
                min: crate::estimators::knn::MIN_SAMPLES,
            });
        }
        if !(self.mod_variance > 0.0 && self.mod_variance.is_finite()) {
            return Err(Error::InvalidParameter(
                "modulation variance must be positive".into(),
            ));
        }
        if !(self.excess_noise >= 0.0 && self.excess_noise.is_finite()) {
            return Err(Error::InvalidParameter(
                "excess noise must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One `(SNR, detection, depth)` point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub snr_db: f64,
    pub detection: Detection,
    pub depth: u32,
    pub transmittance: f64,
    pub beta_dr: Estimate,
    pub beta_rr: Estimate,
    pub mi_sum_dr: Estimate,
    pub mi_sum_rr: Estimate,
    pub mi_xy: Estimate,
    /// Per-level reports for levels `1..=depth`.
    pub reports: Vec<SubChannelReport>,
}

/// A grid point skipped because the requested SNR is out of reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepWarning {
    pub snr_db: f64,
    pub detection: Detection,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySweep {
    pub config: SweepConfig,
    /// Ordered by detection (input order), then SNR, then depth.
    pub points: Vec<EfficiencyPoint>,
    pub warnings: Vec<SweepWarning>,
}

impl EfficiencySweep {
    pub fn series(&self, detection: Detection, depth: u32) -> Vec<&EfficiencyPoint> {
        self.points
            .iter()
            .filter(|p| p.detection == detection && p.depth == depth)
            .collect()
    }
}

/// Seed of a sweep point. It depends on the SNR value and detection only,
/// so a point yields the same numbers whatever grid it belongs to.
pub fn point_seed(master: u64, snr_db: f64, detection: Detection) -> u64 {
    derive(master, &[snr_db.to_bits(), detection.tag()])
}

/// Result of one `(SNR, detection)` cell of a sweep, evaluated at the
/// largest requested depth.
struct GridCell {
    params: ChannelParams,
    reports: Vec<SubChannelReport>,
    mi_xy: Estimate,
}

fn evaluate_cell(cfg: &SweepConfig, snr_db: f64, detection: Detection) -> Result<GridCell> {
    let params = params_for_target_snr(snr_db, cfg.mod_variance, cfg.excess_noise, detection)?;
    let max_depth = *cfg.depths.iter().max().expect("validated");
    let with_ksg = cfg.mi_xy_source == MiXySource::Ksg;
    let run = run_subchannels(
        &params,
        DteConfig::new(max_depth)?,
        &cfg.estimator,
        cfg.mc.n,
        cfg.mc.repeats,
        point_seed(cfg.mc.seed, snr_db, detection),
        with_ksg,
    )?;
    let mi_xy = match run.mi_xy_ksg {
        Some(e) => e,
        None => Estimate::exact(mi_gaussian_analytic(awgn_model(&params).snr_linear)),
    };
    Ok(GridCell {
        params,
        reports: run.reports,
        mi_xy,
    })
}

/// Sweep efficiency over an SNR grid.
///
/// The transmittance of each point is solved from the target SNR with the
/// modulation variance and excess noise held fixed. Expansion bits of level
/// `i` do not depend on the depth, so each `(SNR, detection)` cell is
/// simulated once at the largest depth and shallower depths use the leading
/// levels of the same reports. Unreachable points are skipped and recorded
/// as warnings.
pub fn run_sweep(cfg: &SweepConfig) -> Result<EfficiencySweep> {
    cfg.validate()?;
    let mut depths = cfg.depths.clone();
    depths.sort_unstable();
    depths.dedup();

    let jobs: Vec<(Detection, f64)> = cfg
        .detections
        .iter()
        .flat_map(|&d| cfg.grid.iter().map(move |&s| (d, s)))
        .collect();
    let results: Vec<Result<GridCell>> = jobs
        .par_iter()
        .map(|&(detection, snr_db)| evaluate_cell(cfg, snr_db, detection))
        .collect();

    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for (&(detection, snr_db), result) in jobs.iter().zip(results) {
        let cell = match result {
            Ok(c) => c,
            Err(e @ Error::UnreachableSnr { .. }) => {
                warnings.push(SweepWarning {
                    snr_db,
                    detection,
                    message: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        for &depth in &depths {
            let reports = cell.reports[..depth as usize].to_vec();
            let eff = max_efficiency(&reports, cell.mi_xy.value)?;
            points.push(EfficiencyPoint {
                snr_db,
                detection,
                depth,
                transmittance: cell.params.transmittance(),
                beta_dr: eff.beta_dr,
                beta_rr: eff.beta_rr,
                mi_sum_dr: eff.mi_sum_dr,
                mi_sum_rr: eff.mi_sum_rr,
                mi_xy: cell.mi_xy,
                reports,
            });
        }
    }
    Ok(EfficiencySweep {
        config: cfg.clone(),
        points,
        warnings,
    })
}

/// Linear interpolation of the SNR at which `beta_rr` of a series first
/// drops below `threshold`, scanning upwards in SNR.
pub fn beta_rr_crossing(
    sweep: &EfficiencySweep,
    detection: Detection,
    depth: u32,
    threshold: f64,
) -> Option<f64> {
    let series = sweep.series(detection, depth);
    series.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        let (ya, yb) = (a.beta_rr.value, b.beta_rr.value);
        if ya > threshold && yb <= threshold {
            let t = (ya - threshold) / (ya - yb);
            Some(a.snr_db + t * (b.snr_db - a.snr_db))
        } else {
            None
        }
    })
}

/// Bit frames of one reconciliation run without error correction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconcileFrames {
    pub direction: Direction,
    /// DTE bits of the quantizing party (Alice in DR, Bob in RR).
    pub quantized: BitMatrix,
    /// Values kept by the other party as side information for decoding.
    pub continuous: Vec<f64>,
    /// DTE bits the other party would obtain, for diagnostics.
    pub other: BitMatrix,
    /// `quantized XOR other`.
    pub mismatch: BitMatrix,
}

impl ReconcileFrames {
    /// Sample positions where level `level` (0-based) disagrees.
    pub fn mismatch_positions(&self, level: usize) -> Vec<usize> {
        self.mismatch
            .row(level)
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| (b == 1).then_some(j))
            .collect()
    }

    pub fn mismatch_rate(&self, level: usize) -> f64 {
        self.mismatch.row_weight(level) as f64 / self.mismatch.len() as f64
    }

    pub fn is_clean(&self) -> bool {
        (0..self.mismatch.depth()).all(|i| self.mismatch.row_weight(i) == 0)
    }
}

fn matrix_from_cells(cells: &[u64], depth: u32) -> BitMatrix {
    let rows = (1..=depth)
        .map(|level| level_bits(cells, depth, level))
        .collect();
    BitMatrix::from_rows(rows).expect("rows are well formed")
}

/// Quantize one side of a raw key pair and expose the per-level
/// disagreement with the other side's DTE.
pub fn dte_reconcile_frames(
    pair: &RawKeyPair,
    cfg: DteConfig,
    direction: Direction,
) -> Result<ReconcileFrames> {
    if pair.x.is_empty() {
        return Err(Error::Empty);
    }
    if pair.x.len() != pair.y.len() {
        return Err(Error::LengthMismatch(pair.x.len(), pair.y.len()));
    }
    let (fx, fy) = marginal_cdfs(&pair.params);
    let depth = cfg.depth();
    let mx = matrix_from_cells(&cells(&pair.x, &fx, depth), depth);
    let my = matrix_from_cells(&cells(&pair.y, &fy, depth), depth);
    let mismatch = mx.xor(&my)?;
    let (quantized, other, continuous) = match direction {
        Direction::Direct => (mx, my, pair.y.clone()),
        Direction::Reverse => (my, mx, pair.x.clone()),
    };
    Ok(ReconcileFrames {
        direction,
        quantized,
        continuous,
        other,
        mismatch,
    })
}
