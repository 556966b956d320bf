//! Distributional transform and its binary expansion.
//!
//! A sample `x` of a random variable with continuous CDF `F` is mapped to
//! `u = F(x)`, which is uniform on `[0, 1]`. The first `l` dyadic digits of
//! `u` are then independent Bernoulli(1/2) bits. The composition is the DTE
//! quantizer `D(x) = Q(F(x))`; bit `i` of it is `D_i(x)`.
//!
//! Dyadic boundaries are resolved with half-open intervals: bit `i` is 1 iff
//! `frac(u * 2^(i-1)) >= 1/2`. The point `u = 1` maps to all ones.
//!
//! Only the univariate transform is provided. The bivariate analogue
//! `F(Q, P)` is not uniform (its Kendall distribution function differs from
//! the identity even for independent components), so it cannot feed the
//! expansion.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported expansion depth.
pub const MAX_DEPTH: u32 = 32;

/// A strictly increasing, continuous distribution function.
pub trait ContinuousCdf {
    fn cdf(&self, x: f64) -> f64;
}

/// Normal distribution `N(mean, std_dev^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCdf {
    mean: f64,
    std_dev: f64,
}

impl GaussianCdf {
    pub fn new(mean: f64, std_dev: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mean must be finite, got {mean}"
            )));
        }
        if !(std_dev.is_finite() && std_dev > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "std_dev must be positive and finite, got {std_dev}"
            )));
        }
        Ok(Self { mean, std_dev })
    }

    pub fn standard() -> Self {
        Self {
            mean: 0.0,
            std_dev: 1.0,
        }
    }

    /// Zero-mean normal with the given variance.
    pub fn centered(variance: f64) -> Result<Self> {
        Self::new(0.0, variance.sqrt())
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std_dev(&self) -> f64 {
        self.std_dev
    }

    pub fn variance(&self) -> f64 {
        self.std_dev * self.std_dev
    }
}

impl ContinuousCdf for GaussianCdf {
    fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.mean) / self.std_dev)
    }
}

/// Standard normal CDF through `erfc`, accurate to a few ulps in absolute
/// terms and in relative terms for the lower tail.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `Phi((x - mean) / std_dev)`.
pub fn normal_cdf(x: f64, dist: &GaussianCdf) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite {
            what: "normal_cdf argument",
            value: x,
        });
    }
    Ok(dist.cdf(x))
}

/// Quantile function of `dist`, defined on the open interval `(0, 1)`.
pub fn normal_quantile(u: f64, dist: &GaussianCdf) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!(
            "quantile argument must lie in (0, 1), got {u}"
        )));
    }
    Ok(dist.mean + dist.std_dev * std_normal_quantile(u))
}

/// Standard normal quantile for `u` in `(0, 1)`.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Halley step against the erfc-based CDF. If the refined point misses the
/// target by more than 1e-14 the root is bracketed and bisected instead.
pub(crate) fn std_normal_quantile(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    let mut z = acklam(u);

    let e = std_normal_cdf(z) - u;
    let pdf = std_normal_pdf(z);
    if pdf > 0.0 {
        let step = e / pdf;
        z -= step / (1.0 + 0.5 * z * step);
    }

    if (std_normal_cdf(z) - u).abs() > 1e-14 {
        z = bisect_quantile(u, z);
    }
    z
}

fn acklam(u: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if u < P_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - P_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

fn bisect_quantile(u: f64, guess: f64) -> f64 {
    let mut lo = guess - 1.0;
    let mut hi = guess + 1.0;
    while std_normal_cdf(lo) > u {
        lo -= 2.0 * (hi - lo);
    }
    while std_normal_cdf(hi) < u {
        hi += 2.0 * (hi - lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if std_normal_cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Empirical distribution function `rank / (n + 1)`.
///
/// Useful when the marginal of a raw key is unknown. It is a step function,
/// so the transformed values are only approximately uniform and the
/// expansion bits only approximately independent.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(&bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "empirical sample",
                value: bad,
            });
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

impl ContinuousCdf for EmpiricalCdf {
    fn cdf(&self, x: f64) -> f64 {
        let rank = self.sorted.partition_point(|&s| s <= x);
        rank as f64 / (self.sorted.len() + 1) as f64
    }
}

/// Expansion depth `l`, the number of bits extracted per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DteConfig {
    depth: u32,
}

impl DteConfig {
    pub fn new(depth: u32) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::InvalidParameter(format!(
                "expansion depth must lie in 1..={MAX_DEPTH}, got {depth}"
            )));
        }
        Ok(Self { depth })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }
}

/// Index of the depth-`l` dyadic cell containing `d`, i.e. `floor(d * 2^l)`
/// with `d = 1` folded into the last cell. The bits of the index, most
/// significant first, are the expansion bits.
pub(crate) fn dyadic_cell(d: f64, depth: u32) -> u64 {
    let cells = 1u64 << depth;
    // d * 2^depth is exact in binary floating point.
    let scaled = (d * cells as f64).floor() as u64;
    scaled.min(cells - 1)
}

/// Bit `level` (1-based) of the expansion of `d`.
#[cfg(test)]
pub(crate) fn expansion_bit(d: f64, level: u32) -> u8 {
    (dyadic_cell(d, level) & 1) as u8
}

fn check_unit(d: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::Domain(format!(
            "expansion argument must lie in [0, 1], got {d}"
        )));
    }
    Ok(())
}

fn check_depth(depth: u32) -> Result<()> {
    DteConfig::new(depth).map(|_| ())
}

/// First `depth` binary digits of `d` in `[0, 1]`.
pub fn binary_expand(d: f64, depth: u32) -> Result<Vec<u8>> {
    check_unit(d)?;
    check_depth(depth)?;
    let cell = dyadic_cell(d, depth);
    Ok((1..=depth)
        .map(|i| ((cell >> (depth - i)) & 1) as u8)
        .collect())
}

/// DTE of a single sample under an arbitrary continuous CDF.
pub fn dte_with<F: ContinuousCdf + ?Sized>(x: f64, cdf: &F, cfg: DteConfig) -> Result<Vec<u8>> {
    if !x.is_finite() {
        return Err(Error::NonFinite {
            what: "DTE input",
            value: x,
        });
    }
    binary_expand(cdf.cdf(x), cfg.depth)
}

/// DTE of a single sample under a Gaussian CDF.
pub fn dte(x: f64, dist: &GaussianCdf, cfg: DteConfig) -> Result<Vec<u8>> {
    dte_with(x, dist, cfg)
}

/// `l x n` matrix of expansion bits; row `i` holds `D_{i+1}` of every
/// sample, column `j` is the expansion of sample `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMatrix {
    depth: usize,
    len: usize,
    bits: Vec<u8>,
}

impl BitMatrix {
    pub fn zeros(depth: usize, len: usize) -> Self {
        Self {
            depth,
            len,
            bits: vec![0; depth * len],
        }
    }

    /// Builds a matrix from rows. All rows must have equal length and hold
    /// only zeros and ones.
    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self> {
        let depth = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        let mut bits = Vec::with_capacity(depth * len);
        for row in rows {
            if row.len() != len {
                return Err(Error::LengthMismatch(row.len(), len));
            }
            if row.iter().any(|&b| b > 1) {
                return Err(Error::Domain("bit matrix entries must be 0 or 1".into()));
            }
            bits.extend(row);
        }
        Ok(Self { depth, len, bits })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Row for level `level` (0-based).
    pub fn row(&self, level: usize) -> &[u8] {
        &self.bits[level * self.len..(level + 1) * self.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.bits.chunks(self.len.max(1)).take(self.depth)
    }

    pub fn get(&self, level: usize, col: usize) -> u8 {
        self.bits[level * self.len + col]
    }

    pub fn set(&mut self, level: usize, col: usize, bit: u8) {
        debug_assert!(bit <= 1);
        self.bits[level * self.len + col] = bit;
    }

    pub fn column(&self, col: usize) -> Vec<u8> {
        (0..self.depth).map(|i| self.get(i, col)).collect()
    }

    /// Element-wise XOR. Both matrices must have the same shape.
    pub fn xor(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.depth != other.depth {
            return Err(Error::LengthMismatch(self.depth, other.depth));
        }
        if self.len != other.len {
            return Err(Error::LengthMismatch(self.len, other.len));
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitMatrix {
            depth: self.depth,
            len: self.len,
            bits,
        })
    }

    /// Number of ones in row `level`.
    pub fn row_weight(&self, level: usize) -> usize {
        self.row(level).iter().map(|&b| b as usize).sum()
    }
}

/// DTE of every element of `xs` under an arbitrary continuous CDF.
pub fn dte_sequence_with<F: ContinuousCdf + ?Sized>(
    xs: &[f64],
    cdf: &F,
    cfg: DteConfig,
) -> Result<BitMatrix> {
    if xs.is_empty() {
        return Err(Error::Empty);
    }
    let depth = cfg.depth;
    let mut out = BitMatrix::zeros(depth as usize, xs.len());
    for (j, &x) in xs.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                what: "DTE input",
                value: x,
            });
        }
        let cell = dyadic_cell(cdf.cdf(x), depth);
        for i in 0..depth {
            out.set(i as usize, j, ((cell >> (depth - 1 - i)) & 1) as u8);
        }
    }
    Ok(out)
}

/// DTE of every element of `xs` under a Gaussian CDF.
pub fn dte_sequence(xs: &[f64], dist: &GaussianCdf, cfg: DteConfig) -> Result<BitMatrix> {
    dte_sequence_with(xs, dist, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round3(v: f64) -> f64 {
        (v * 1000.0).round() / 1000.0
    }

    #[test]
    fn cdf_worked_example_values() {
        let n01 = GaussianCdf::standard();
        assert_eq!(normal_cdf(0.0, &n01).unwrap(), 0.5);
        assert_eq!(round3(normal_cdf(0.491, &n01).unwrap()), 0.688);
        // The published three-digit values mix rounding and truncation
        // (0.13654 -> 0.136, 0.49083 -> 0.491); each lies within 1e-3.
        let want = [0.688, 0.628, 0.257, 0.136, 0.491];
        for (x, w) in [0.491, 0.327, -0.652, -1.096, -0.023].into_iter().zip(want) {
            let f = normal_cdf(x, &n01).unwrap();
            assert!((f - w).abs() < 1e-3, "{x}: {f} vs {w}");
        }
    }

    #[test]
    fn cdf_rejects_non_finite() {
        let n01 = GaussianCdf::standard();
        assert!(normal_cdf(f64::NAN, &n01).is_err());
        assert!(normal_cdf(f64::INFINITY, &n01).is_err());
    }

    #[test]
    fn cdf_matches_reference_values() {
        // Reference values of Phi to 16 significant digits.
        let cases = [
            (-8.0, 6.220_960_574_271_785e-16),
            (-3.0, 1.349_898_031_630_094_6e-3),
            (-1.0, 0.158_655_253_931_457_05),
            (1.0, 0.841_344_746_068_542_9),
            (2.5, 0.993_790_334_674_223_8),
        ];
        for (z, want) in cases {
            let got = std_normal_cdf(z);
            assert!((got - want).abs() <= 1e-15, "Phi({z}) = {got}, want {want}");
        }
    }

    #[test]
    fn quantile_examples() {
        let n01 = GaussianCdf::standard();
        assert_eq!(normal_quantile(0.5, &n01).unwrap(), 0.0);
        // 0.688 is itself truncated; its quantile is 0.4902.
        assert_eq!(round3(normal_quantile(0.688, &n01).unwrap()), 0.49);
        assert_eq!(round3(normal_quantile(0.688_286_776, &n01).unwrap()), 0.491);
        // Bisection on the CDF gives 1.959963984540054.
        let q = normal_quantile(0.975, &n01).unwrap();
        assert!((q - 1.959_963_984_540_054).abs() < 1e-10, "{q}");
        assert_eq!((q * 1e5).round() / 1e5, 1.95996);
    }

    #[test]
    fn quantile_domain() {
        let n01 = GaussianCdf::standard();
        for u in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(normal_quantile(u, &n01).is_err(), "u = {u}");
        }
    }

    #[test]
    fn quantile_round_trip_grid() {
        let dist = GaussianCdf::new(0.3, 2.0).unwrap();
        for k in 0..1000 {
            let u = 0.001 + 0.998 * k as f64 / 999.0;
            let x = normal_quantile(u, &dist).unwrap();
            let back = normal_cdf(x, &dist).unwrap();
            assert!((back - u).abs() <= 1e-10, "u = {u}: {back}");
        }
    }

    #[test]
    fn quantile_extreme_tails() {
        for u in [1e-300, 1e-100, 1e-20, 1e-9, 1.0 - 1e-9, 1.0 - 1e-15] {
            let z = std_normal_quantile(u);
            let tol = if u < 0.5 { 1e-12 * u } else { 1e-14 };
            assert!((std_normal_cdf(z) - u).abs() <= tol, "u = {u}, z = {z}");
        }
    }

    #[test]
    fn expansion_examples() {
        assert_eq!(binary_expand(0.688, 3).unwrap(), vec![1, 0, 1]);
        assert_eq!(binary_expand(0.0, 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(binary_expand(0.136, 3).unwrap(), vec![0, 0, 1]);
        assert_eq!(binary_expand(1.0, 4).unwrap(), vec![1, 1, 1, 1]);
        assert_eq!(binary_expand(0.5, 2).unwrap(), vec![1, 0]);
        assert_eq!(binary_expand(0.25, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn expansion_domain_errors() {
        assert!(binary_expand(-0.01, 3).is_err());
        assert!(binary_expand(1.01, 3).is_err());
        assert!(binary_expand(f64::NAN, 3).is_err());
        assert!(binary_expand(0.5, 0).is_err());
        assert!(binary_expand(0.5, 33).is_err());
        assert!(binary_expand(0.5, 32).is_ok());
    }

    #[test]
    fn dte_examples() {
        let n01 = GaussianCdf::standard();
        let cfg3 = DteConfig::new(3).unwrap();
        assert_eq!(dte(0.491, &n01, cfg3).unwrap(), vec![1, 0, 1]);
        assert_eq!(dte(-0.652, &n01, cfg3).unwrap(), vec![0, 1, 0]);
        let shifted = GaussianCdf::new(-2.5, 0.7).unwrap();
        assert_eq!(
            dte(-2.5, &shifted, DteConfig::new(1).unwrap()).unwrap(),
            vec![1]
        );
    }

    #[test]
    fn dte_sequence_worked_example() {
        let x = [0.491, 0.327, -0.652, -1.096, -0.023];
        let z = [-0.722, 0.942, 0.191, 0.198, -0.370];
        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
        let cfg = DteConfig::new(3).unwrap();

        let mx = dte_sequence(&x, &GaussianCdf::standard(), cfg).unwrap();
        let want_x = BitMatrix::from_rows(vec![
            vec![1, 1, 0, 0, 0],
            vec![0, 0, 1, 0, 1],
            vec![1, 1, 0, 1, 1],
        ])
        .unwrap();
        assert_eq!(mx, want_x);

        let fy = GaussianCdf::centered(1.5).unwrap();
        let my = dte_sequence(&y, &fy, cfg).unwrap();
        let want_y = BitMatrix::from_rows(vec![
            vec![0, 1, 0, 0, 0],
            vec![1, 1, 1, 0, 1],
            vec![1, 0, 0, 1, 0],
        ])
        .unwrap();
        assert_eq!(my, want_y);
        assert_eq!(
            mx.column(0),
            dte(x[0], &GaussianCdf::standard(), cfg).unwrap()
        );
    }

    #[test]
    fn dte_sequence_constant_and_empty() {
        let cfg = DteConfig::new(2).unwrap();
        let m = dte_sequence(&[0.0; 6], &GaussianCdf::standard(), cfg).unwrap();
        for j in 0..6 {
            assert_eq!(m.column(j), vec![1, 0]);
        }
        assert!(matches!(
            dte_sequence(&[], &GaussianCdf::standard(), cfg),
            Err(Error::Empty)
        ));
        assert!(dte_sequence(&[0.0, f64::NAN], &GaussianCdf::standard(), cfg).is_err());
    }

    #[test]
    fn empirical_cdf_ranks() {
        let e = EmpiricalCdf::from_samples(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.cdf(0.0), 0.0);
        assert_eq!(e.cdf(1.0), 0.25);
        assert_eq!(e.cdf(2.5), 0.5);
        assert_eq!(e.cdf(3.0), 0.75);
        let m = dte_sequence_with(&[1.0, 2.0, 3.0], &e, DteConfig::new(2).unwrap()).unwrap();
        assert_eq!(m.column(0), vec![0, 1]);
        assert_eq!(m.column(1), vec![1, 0]);
        assert_eq!(m.column(2), vec![1, 1]);
    }

    #[test]
    fn xor_shape_checked() {
        let a = BitMatrix::zeros(2, 3);
        let b = BitMatrix::zeros(2, 4);
        assert!(a.xor(&b).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn expansion_brackets_value(d in 0.0f64..1.0, depth in 1u32..=32) {
                let bits = binary_expand(d, depth).unwrap();
                let approx: f64 = bits
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| b as f64 * 0.5f64.powi(i as i32 + 1))
                    .sum();
                prop_assert!(approx <= d);
                prop_assert!(d - approx < 0.5f64.powi(depth as i32));
            }

            #[test]
            fn expansion_prefix_stable(d in 0.0f64..=1.0, depth in 2u32..=32) {
                let long = binary_expand(d, depth).unwrap();
                let short = binary_expand(d, depth - 1).unwrap();
                prop_assert_eq!(&long[..depth as usize - 1], &short[..]);
                for (i, &b) in long.iter().enumerate() {
                    prop_assert_eq!(b, expansion_bit(d, i as u32 + 1));
                }
            }

            #[test]
            fn quantile_inverts_cdf(u in 1e-12f64..(1.0 - 1e-12)) {
                let z = std_normal_quantile(u);
                prop_assert!((std_normal_cdf(z) - u).abs() <= 1e-10);
            }
        }
    }
}
