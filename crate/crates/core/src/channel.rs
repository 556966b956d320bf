//! Equivalent classical channel of a Gaussian-modulated CV-QKD link.
//!
//! Alice draws `X ~ N(0, Vm~)` per quadrature. After a lossy channel with
//! transmittance `tau` and excess noise `xi` (shot-noise units, referred to
//! the channel output) Bob's normalised outcome is `Y = X + Z` with
//!
//! - homodyne:   `Z ~ N(0, (xi + 1) / (4 tau))`,   `SNR = tau Vm / (1 + xi)`
//! - heterodyne: `Z ~ N(0, (1 + xi/2) / (2 tau))`, `SNR = (tau/2) Vm / (1 + xi/2)`
//!
//! where `Vm = 4 Vm~`. Heterodyne quadratures are statistically equivalent,
//! so only one of them is simulated. Excess noise is an input; for a thermal
//! channel it would be `xi = 2 n (1 - tau)` with `n` mean thermal photons.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, GaussianStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detection {
    #[serde(rename = "hom")]
    Homodyne,
    #[serde(rename = "het")]
    Heterodyne,
}

impl Detection {
    pub const ALL: [Detection; 2] = [Detection::Heterodyne, Detection::Homodyne];

    pub fn short_name(self) -> &'static str {
        match self {
            Detection::Homodyne => "hom",
            Detection::Heterodyne => "het",
        }
    }

    pub(crate) fn tag(self) -> u64 {
        match self {
            Detection::Homodyne => 1,
            Detection::Heterodyne => 2,
        }
    }
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Detection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hom" | "homodyne" => Ok(Detection::Homodyne),
            "het" | "heterodyne" => Ok(Detection::Heterodyne),
            other => Err(Error::InvalidParameter(format!(
                "unknown detection mode '{other}'"
            ))),
        }
    }
}

/// Physical scenario: modulation variance, transmittance, excess noise and
/// detection mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    mod_variance: f64,
    transmittance: f64,
    excess_noise: f64,
    detection: Detection,
}

impl ChannelParams {
    /// `mod_variance` is the per-quadrature modulation variance `Vm~`.
    pub fn new(
        mod_variance: f64,
        transmittance: f64,
        excess_noise: f64,
        detection: Detection,
    ) -> Result<Self> {
        if !(mod_variance.is_finite() && mod_variance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "modulation variance must be positive, got {mod_variance}"
            )));
        }
        if !(transmittance > 0.0 && transmittance <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transmittance must lie in (0, 1], got {transmittance}"
            )));
        }
        if !(excess_noise.is_finite() && excess_noise >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "excess noise must be non-negative, got {excess_noise}"
            )));
        }
        Ok(Self {
            mod_variance,
            transmittance,
            excess_noise,
            detection,
        })
    }

    pub fn mod_variance(&self) -> f64 {
        self.mod_variance
    }

    pub fn transmittance(&self) -> f64 {
        self.transmittance
    }

    pub fn excess_noise(&self) -> f64 {
        self.excess_noise
    }

    pub fn detection(&self) -> Detection {
        self.detection
    }

    /// `Vm = 4 Vm~`, the modulation variance in shot-noise units.
    pub fn modulation_variance_snu(&self) -> f64 {
        4.0 * self.mod_variance
    }

    /// `V = Vm + 1`, Alice's total quadrature variance.
    pub fn total_variance(&self) -> f64 {
        self.modulation_variance_snu() + 1.0
    }
}

/// Linear SNR of the equivalent AWGN channel.
pub fn snr(params: &ChannelParams) -> f64 {
    let vm = params.modulation_variance_snu();
    let (tau, xi) = (params.transmittance, params.excess_noise);
    match params.detection {
        Detection::Homodyne => tau * vm / (1.0 + xi),
        Detection::Heterodyne => 0.5 * tau * vm / (1.0 + 0.5 * xi),
    }
}

pub fn snr_db(params: &ChannelParams) -> f64 {
    linear_to_db(snr(params))
}

pub fn linear_to_db(snr: f64) -> f64 {
    10.0 * snr.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `Y = X + Z` with `X ~ N(0, signal_variance)` and `Z ~ N(0, noise_variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwgnModel {
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub snr_linear: f64,
    pub snr_db: f64,
}

impl AwgnModel {
    /// Model with unit-free signal and noise variances, for oracles and tests.
    pub fn from_variances(signal_variance: f64, noise_variance: f64) -> Result<Self> {
        if !(signal_variance > 0.0 && noise_variance > 0.0)
            || !signal_variance.is_finite()
            || !noise_variance.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "variances must be positive and finite, got {signal_variance}, {noise_variance}"
            )));
        }
        let snr_linear = signal_variance / noise_variance;
        Ok(Self {
            signal_variance,
            noise_variance,
            snr_linear,
            snr_db: linear_to_db(snr_linear),
        })
    }

    pub fn output_variance(&self) -> f64 {
        self.signal_variance + self.noise_variance
    }

    /// Correlation coefficient of `(X, Y)`: `sqrt(SNR / (1 + SNR))`.
    pub fn correlation(&self) -> f64 {
        (self.signal_variance / self.output_variance()).sqrt()
    }
}

pub fn awgn_model(params: &ChannelParams) -> AwgnModel {
    let (tau, xi) = (params.transmittance, params.excess_noise);
    let noise_variance = match params.detection {
        Detection::Homodyne => (xi + 1.0) / (4.0 * tau),
        Detection::Heterodyne => (1.0 + 0.5 * xi) / (2.0 * tau),
    };
    let snr_linear = snr(params);
    debug_assert!(
        ((params.mod_variance / noise_variance) - snr_linear).abs() <= 1e-12 * snr_linear.max(1.0)
    );
    AwgnModel {
        signal_variance: params.mod_variance,
        noise_variance,
        snr_linear,
        snr_db: linear_to_db(snr_linear),
    }
}

/// Solve for the transmittance that yields `target_snr_db` with the other
/// parameters fixed.
pub fn params_for_target_snr(
    target_snr_db: f64,
    mod_variance: f64,
    excess_noise: f64,
    detection: Detection,
) -> Result<ChannelParams> {
    if !target_snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target SNR must be finite, got {target_snr_db}"
        )));
    }
    if !(mod_variance.is_finite() && mod_variance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "modulation variance must be positive, got {mod_variance}"
        )));
    }
    if !(excess_noise.is_finite() && excess_noise >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "excess noise must be non-negative, got {excess_noise}"
        )));
    }
    let target = db_to_linear(target_snr_db);
    let vm = 4.0 * mod_variance;
    let tau = match detection {
        Detection::Homodyne => target * (1.0 + excess_noise) / vm,
        Detection::Heterodyne => 2.0 * target * (1.0 + 0.5 * excess_noise) / vm,
    };
    if tau > 1.0 {
        // A maximal SNR quoted to 4 decimals in dB overshoots tau = 1 by
        // up to about 1.2e-5.
        if tau - 1.0 > 1.2e-5 {
            return Err(Error::UnreachableSnr {
                snr_db: target_snr_db,
                transmittance: tau,
            });
        }
        return ChannelParams::new(mod_variance, 1.0, excess_noise, detection);
    }
    ChannelParams::new(mod_variance, tau, excess_noise, detection)
}

/// Paired raw keys from one simulated protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawKeyPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub params: ChannelParams,
    pub seed: u64,
}

impl RawKeyPair {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn model(&self) -> AwgnModel {
        awgn_model(&self.params)
    }
}

/// Draw `n` pairs `(x_j, y_j = x_j + z_j)`.
///
/// One `ChaCha8Rng` stream seeded with `seed` feeds a polar-method normal
/// generator; deviates are consumed as `x_0, z_0, x_1, z_1, ...`.
pub fn sample_raw_keys(params: &ChannelParams, n: usize, seed: u64) -> Result<RawKeyPair> {
    if n == 0 {
        return Err(Error::Empty);
    }
    let model = awgn_model(params);
    let sx = model.signal_variance.sqrt();
    let sz = model.noise_variance.sqrt();
    let mut g = GaussianStream::new(rng_from_seed(seed));
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = sx * g.next_standard();
        let zi = sz * g.next_standard();
        x.push(xi);
        y.push(xi + zi);
    }
    Ok(RawKeyPair {
        x,
        y,
        params: *params,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{correlation, variance};

    fn p(vm: f64, tau: f64, xi: f64, d: Detection) -> ChannelParams {
        ChannelParams::new(vm, tau, xi, d).unwrap()
    }

    #[test]
    fn snr_examples() {
        assert_eq!(snr(&p(1.0, 1.0, 0.0, Detection::Homodyne)), 4.0);
        assert_eq!(snr(&p(1.0, 1.0, 0.0, Detection::Heterodyne)), 2.0);
        // 0.5 * 4 / 1.02
        let s = snr(&p(1.0, 0.5, 0.02, Detection::Homodyne));
        assert!((s - 1.960_784_313_725_490_2).abs() < 1e-15);
    }

    #[test]
    fn awgn_examples() {
        assert_eq!(
            awgn_model(&p(1.0, 1.0, 0.0, Detection::Homodyne)).noise_variance,
            0.25
        );
        assert_eq!(
            awgn_model(&p(1.0, 1.0, 0.0, Detection::Heterodyne)).noise_variance,
            0.5
        );
        let m = awgn_model(&p(1.0, 0.5, 0.02, Detection::Heterodyne));
        assert!((m.noise_variance - 1.01).abs() < 1e-15);
        for d in Detection::ALL {
            for &(vm, tau, xi) in &[(1.0, 0.3, 0.05), (2.5, 0.9, 0.0), (0.4, 0.01, 1.0)] {
                let params = p(vm, tau, xi, d);
                let m = awgn_model(&params);
                assert!((m.signal_variance / m.noise_variance - snr(&params)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_params() {
        assert!(ChannelParams::new(0.0, 0.5, 0.0, Detection::Homodyne).is_err());
        assert!(ChannelParams::new(1.0, 0.0, 0.0, Detection::Homodyne).is_err());
        assert!(ChannelParams::new(1.0, 1.1, 0.0, Detection::Homodyne).is_err());
        assert!(ChannelParams::new(1.0, 0.5, -0.1, Detection::Homodyne).is_err());
    }

    #[test]
    fn target_snr_inversion() {
        let h = params_for_target_snr(linear_to_db(4.0), 1.0, 0.0, Detection::Homodyne).unwrap();
        assert!((h.transmittance() - 1.0).abs() < 1e-12);
        let h = params_for_target_snr(6.0206, 1.0, 0.0, Detection::Homodyne).unwrap();
        assert!((h.transmittance() - 1.0).abs() < 1e-5);

        let t = params_for_target_snr(0.0, 1.0, 0.02, Detection::Heterodyne).unwrap();
        assert!((t.transmittance() - 0.505).abs() < 1e-15);

        // tau = 2 * 10^(-0.36) * 1.01 / 4 = 0.2204406...
        let t = params_for_target_snr(-3.6, 1.0, 0.02, Detection::Heterodyne).unwrap();
        let want = 0.505 * 10f64.powf(-0.36);
        assert!((t.transmittance() - want).abs() < 1e-15);
        assert!((t.transmittance() - 0.220_44).abs() < 5e-6);

        for d in Detection::ALL {
            for db in [-20.0, -6.0, -3.6, 0.0, 2.5] {
                let params = params_for_target_snr(db, 1.0, 0.02, d).unwrap();
                assert!((snr_db(&params) - db).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn unreachable_snr() {
        let e = params_for_target_snr(40.0, 1.0, 0.0, Detection::Homodyne).unwrap_err();
        assert!(matches!(e, Error::UnreachableSnr { .. }));
        // Heterodyne with Vm~ = 1, xi = 0.02 peaks at 10 log10(2/1.01) = 2.967 dB.
        assert!(params_for_target_snr(3.0, 1.0, 0.02, Detection::Heterodyne).is_err());
        assert!(params_for_target_snr(2.9, 1.0, 0.02, Detection::Heterodyne).is_ok());
    }

    #[test]
    fn snr_monotonicity_and_mode_distinction() {
        let base = |vm, tau, xi| snr(&p(vm, tau, xi, Detection::Heterodyne));
        assert!(base(1.0, 0.6, 0.1) > base(1.0, 0.5, 0.1));
        assert!(base(1.2, 0.5, 0.1) > base(1.0, 0.5, 0.1));
        assert!(base(1.0, 0.5, 0.2) < base(1.0, 0.5, 0.1));
        let hom = snr(&p(1.0, 0.5, 0.02, Detection::Homodyne));
        let het = snr(&p(1.0, 0.5, 0.02, Detection::Heterodyne));
        assert!(hom > 0.0 && het > 0.0 && hom != het);
    }

    #[test]
    fn sampling_is_deterministic() {
        let params = p(1.0, 0.4, 0.02, Detection::Heterodyne);
        let a = sample_raw_keys(&params, 5, 42).unwrap();
        let b = sample_raw_keys(&params, 5, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_raw_keys(&params, 5, 43).unwrap();
        assert_ne!(a.x, c.x);
        assert!(sample_raw_keys(&params, 0, 42).is_err());
    }

    #[test]
    fn sampling_statistics() {
        let params = p(1.0, 0.505, 0.02, Detection::Heterodyne);
        let pair = sample_raw_keys(&params, 100_000, 2024).unwrap();
        let vx = variance(&pair.x);
        assert!((vx - 1.0).abs() < 0.05, "{vx}");
        let rho = awgn_model(&params).correlation();
        assert!((rho - 0.5f64.sqrt()).abs() < 1e-12);
        let r = correlation(&pair.x, &pair.y);
        assert!((r - rho).abs() < 0.01, "{r} vs {rho}");
        let z: Vec<f64> = pair.x.iter().zip(&pair.y).map(|(a, b)| b - a).collect();
        let rz = correlation(&pair.x, &z);
        assert!(rz.abs() < 4.0 / (pair.len() as f64).sqrt(), "{rz}");
        let vz = variance(&z);
        assert!((vz - awgn_model(&params).noise_variance).abs() < 0.05 * 1.0);
    }
}
