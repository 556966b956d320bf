//! Parameters of the binary sub-channels induced by the DTE.
//!
//! When both parties quantize, level `i` behaves as a BSC with crossover
//! `p_i = P(D_i(X) != D_i(Y))`. When only one party quantizes, level `i` is a
//! binary-input AWGN channel whose capacity is `I(D_i(X); Y)` (direct) or
//! `I(D_i(Y); X)` (reverse). Those mutual informations are estimated with a
//! kNN estimator; [`oracle`] computes them exactly for verification.

pub mod knn;
pub mod oracle;
pub mod quadrature;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{awgn_model, sample_raw_keys, ChannelParams, RawKeyPair};
use crate::error::{Error, Result};
use crate::seed::derive;
use crate::stats::mean_and_se;
use crate::transform::{dyadic_cell, ContinuousCdf, DteConfig, GaussianCdf};

pub use knn::{mi_bit_continuous, mi_continuous_ksg, KnnContext};
pub use oracle::{first_level_transition_probability, mi_bit_continuous_oracle};

/// Reconciliation direction. In direct reconciliation Alice quantizes `X`
/// and Bob keeps `Y`; in reverse reconciliation Bob quantizes `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "dr")]
    Direct,
    #[serde(rename = "rr")]
    Reverse,
}

impl Direction {
    fn tag(self) -> u64 {
        match self {
            Direction::Direct => 0xD1,
            Direction::Reverse => 0xE2,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Direct => "dr",
            Direction::Reverse => "rr",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dr" | "direct" => Ok(Direction::Direct),
            "rr" | "reverse" => Ok(Direction::Reverse),
            other => Err(Error::InvalidParameter(format!(
                "unknown direction '{other}'"
            ))),
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn new(value: f64, std_error: f64) -> Self {
        Self { value, std_error }
    }

    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
        }
    }
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// `1 - H2(p)`.
pub fn bsc_capacity(p: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(p)?)
}

/// Capacity of the Gaussian channel, `0.5 log2(1 + snr)`, in bits.
pub fn mi_gaussian_analytic(snr_linear: f64) -> f64 {
    assert!(
        snr_linear >= 0.0,
        "SNR must be non-negative, got {snr_linear}"
    );
    0.5 * (1.0 + snr_linear).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MiMethod {
    /// Kozachenko-Leonenko based mixed discrete-continuous estimator.
    KnnMixed,
    /// Exact quadrature from the channel model; ignores the samples.
    QuadratureOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiEstimatorConfig {
    pub k_neighbors: usize,
    pub method: MiMethod,
    /// Seed of the tie-breaking jitter for single estimator calls. Report
    /// generation derives per-repeat jitter seeds instead.
    pub jitter_seed: u64,
}

impl Default for MiEstimatorConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 3,
            method: MiMethod::KnnMixed,
            jitter_seed: 0,
        }
    }
}

impl MiEstimatorConfig {
    pub fn new(k_neighbors: usize, method: MiMethod) -> Result<Self> {
        let cfg = Self {
            k_neighbors,
            method,
            jitter_seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=20).contains(&self.k_neighbors) {
            return Err(Error::InvalidParameter(format!(
                "k_neighbors must lie in 1..=20, got {}",
                self.k_neighbors
            )));
        }
        Ok(())
    }
}

/// `I(B; C)` in bits by the kNN mixed estimator configured in `cfg`.
pub fn mi_bit_continuous_knn(bits: &[u8], cont: &[f64], cfg: &MiEstimatorConfig) -> Result<f64> {
    cfg.validate()?;
    knn::mi_bit_continuous(bits, cont, cfg.k_neighbors, cfg.jitter_seed)
}

/// Marginal CDFs implied by the channel: `F_X = N(0, Vm~)` and
/// `F_Y = N(0, Vm~ + sigma_Z^2)`.
pub fn marginal_cdfs(params: &ChannelParams) -> (GaussianCdf, GaussianCdf) {
    let m = awgn_model(params);
    let fx = GaussianCdf::centered(m.signal_variance).expect("positive variance");
    let fy = GaussianCdf::centered(m.output_variance()).expect("positive variance");
    (fx, fy)
}

/// Expansion cells of every sample; the bits of cell `c` at depth `l` are
/// the expansion bits, most significant first.
pub(crate) fn cells<F: ContinuousCdf + ?Sized>(values: &[f64], cdf: &F, depth: u32) -> Vec<u64> {
    values
        .iter()
        .map(|&v| dyadic_cell(cdf.cdf(v), depth))
        .collect()
}

pub(crate) fn level_bits(cells: &[u64], depth: u32, level: u32) -> Vec<u8> {
    let shift = depth - level;
    cells.iter().map(|c| ((c >> shift) & 1) as u8).collect()
}

/// Transition probabilities per level with the marginal CDFs supplied
/// explicitly.
pub fn transition_probs_with<F, G>(
    x: &[f64],
    y: &[f64],
    fx: &F,
    fy: &G,
    cfg: DteConfig,
) -> Result<Vec<Estimate>>
where
    F: ContinuousCdf + ?Sized,
    G: ContinuousCdf + ?Sized,
{
    if x.is_empty() {
        return Err(Error::Empty);
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let depth = cfg.depth();
    let cx = cells(x, fx, depth);
    let cy = cells(y, fy, depth);
    let counts = mismatch_counts(&cx, &cy, depth);
    let n = x.len();
    Ok(counts
        .into_iter()
        .map(|c| binomial_estimate(c, n))
        .collect())
}

/// Per-level mismatch counts between two cell sequences.
pub(crate) fn mismatch_counts(cx: &[u64], cy: &[u64], depth: u32) -> Vec<usize> {
    let mut counts = vec![0usize; depth as usize];
    for (&a, &b) in cx.iter().zip(cy) {
        let diff = a ^ b;
        for (i, c) in counts.iter_mut().enumerate() {
            *c += ((diff >> (depth as usize - 1 - i)) & 1) as usize;
        }
    }
    counts
}

fn binomial_estimate(count: usize, n: usize) -> Estimate {
    let p = count as f64 / n as f64;
    Estimate::new(p, (p * (1.0 - p) / n as f64).sqrt())
}

/// `p_i = P(D_i(X) != D_i(Y))` with the analytic marginals of the pair's
/// channel.
pub fn transition_probs(pair: &RawKeyPair, cfg: DteConfig) -> Result<Vec<Estimate>> {
    let (fx, fy) = marginal_cdfs(&pair.params);
    transition_probs_with(&pair.x, &pair.y, &fx, &fy, cfg)
}

/// Estimated parameters of sub-channel `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubChannelReport {
    pub level: u32,
    pub p: Estimate,
    /// `1 - H2(p)` of the mean transition probability.
    pub bsc_capacity: f64,
    /// `I(D_i(X); Y)` in bits.
    pub mi_dr: Estimate,
    /// `I(D_i(Y); X)` in bits.
    pub mi_rr: Estimate,
}

impl SubChannelReport {
    /// Delta-method standard error of the BSC capacity.
    pub fn bsc_capacity_se(&self) -> f64 {
        let p = self.p.value;
        if p <= 0.0 || p >= 1.0 {
            return 0.0;
        }
        ((1.0 - p) / p).log2().abs() * self.p.std_error
    }

    pub fn mi(&self, direction: Direction) -> Estimate {
        match direction {
            Direction::Direct => self.mi_dr,
            Direction::Reverse => self.mi_rr,
        }
    }
}

/// Per-repeat raw results.
#[derive(Debug, Clone)]
pub(crate) struct RepeatOutcome {
    pub mismatches: Vec<usize>,
    pub mi_dr: Vec<f64>,
    pub mi_rr: Vec<f64>,
    pub mi_xy: Option<f64>,
}

/// One Monte Carlo repeat: sample, quantize, estimate.
pub(crate) fn run_repeat(
    params: &ChannelParams,
    dte_cfg: DteConfig,
    mi_cfg: &MiEstimatorConfig,
    n: usize,
    seed: u64,
    with_ksg: bool,
) -> Result<RepeatOutcome> {
    let pair = sample_raw_keys(params, n, seed)?;
    let (fx, fy) = marginal_cdfs(params);
    let depth = dte_cfg.depth();
    let cx = cells(&pair.x, &fx, depth);
    let cy = cells(&pair.y, &fy, depth);
    let mismatches = mismatch_counts(&cx, &cy, depth);

    let (mi_dr, mi_rr) = match mi_cfg.method {
        MiMethod::KnnMixed => {
            let k = mi_cfg.k_neighbors;
            let ctx_y = KnnContext::new(&pair.y, k, derive(seed, &[Direction::Direct.tag()]))?;
            let ctx_x = KnnContext::new(&pair.x, k, derive(seed, &[Direction::Reverse.tag()]))?;
            let mut dr = Vec::with_capacity(depth as usize);
            let mut rr = Vec::with_capacity(depth as usize);
            for level in 1..=depth {
                dr.push(ctx_y.mutual_information(&level_bits(&cx, depth, level))?);
                rr.push(ctx_x.mutual_information(&level_bits(&cy, depth, level))?);
            }
            (dr, rr)
        }
        // Deterministic; filled in once by the caller.
        MiMethod::QuadratureOracle => (Vec::new(), Vec::new()),
    };

    let mi_xy = if with_ksg {
        Some(mi_continuous_ksg(
            &pair.x,
            &pair.y,
            mi_cfg.k_neighbors,
            derive(seed, &[0x5E6]),
        )?)
    } else {
        None
    };
    Ok(RepeatOutcome {
        mismatches,
        mi_dr,
        mi_rr,
        mi_xy,
    })
}

/// Aggregated sub-channel run.
#[derive(Debug, Clone)]
pub(crate) struct SubChannelRun {
    pub reports: Vec<SubChannelReport>,
    pub mi_xy_ksg: Option<Estimate>,
}

pub(crate) fn run_subchannels(
    params: &ChannelParams,
    dte_cfg: DteConfig,
    mi_cfg: &MiEstimatorConfig,
    n: usize,
    repeats: usize,
    seed: u64,
    with_ksg: bool,
) -> Result<SubChannelRun> {
    mi_cfg.validate()?;
    if n < knn::MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n,
            min: knn::MIN_SAMPLES,
        });
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let outcomes: Vec<RepeatOutcome> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            run_repeat(
                params,
                dte_cfg,
                mi_cfg,
                n,
                derive(seed, &[r as u64]),
                with_ksg,
            )
        })
        .collect::<Result<_>>()?;

    let depth = dte_cfg.depth() as usize;
    let total = (n * repeats) as f64;
    let model = awgn_model(params);
    let mut reports = Vec::with_capacity(depth);
    for i in 0..depth {
        let count: usize = outcomes.iter().map(|o| o.mismatches[i]).sum();
        let p = count as f64 / total;
        let p_est = Estimate::new(p, (p * (1.0 - p) / total).sqrt());
        let level = i as u32 + 1;
        let (mi_dr, mi_rr) = match mi_cfg.method {
            MiMethod::KnnMixed => {
                let dr: Vec<f64> = outcomes.iter().map(|o| o.mi_dr[i]).collect();
                let rr: Vec<f64> = outcomes.iter().map(|o| o.mi_rr[i]).collect();
                let (dm, dse) = mean_and_se(&dr);
                let (rm, rse) = mean_and_se(&rr);
                (Estimate::new(dm, dse), Estimate::new(rm, rse))
            }
            MiMethod::QuadratureOracle => (
                Estimate::exact(mi_bit_continuous_oracle(level, &model, Direction::Direct)),
                Estimate::exact(mi_bit_continuous_oracle(level, &model, Direction::Reverse)),
            ),
        };
        reports.push(SubChannelReport {
            level,
            p: p_est,
            bsc_capacity: bsc_capacity(p)?,
            mi_dr,
            mi_rr,
        });
    }
    let mi_xy_ksg = with_ksg.then(|| {
        let v: Vec<f64> = outcomes.iter().filter_map(|o| o.mi_xy).collect();
        let (m, se) = mean_and_se(&v);
        Estimate::new(m, se)
    });
    Ok(SubChannelRun { reports, mi_xy_ksg })
}

/// Sub-channel parameters for every level of `dte_cfg`, averaged over
/// `repeats` independent runs of `n` samples.
///
/// Repeat `r` uses seed `derive(seed, [r])`; results are reduced in repeat
/// order, so they do not depend on the thread count.
pub fn subchannel_report(
    params: &ChannelParams,
    dte_cfg: DteConfig,
    mi_cfg: &MiEstimatorConfig,
    n: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<SubChannelReport>> {
    Ok(run_subchannels(params, dte_cfg, mi_cfg, n, repeats, seed, false)?.reports)
}
