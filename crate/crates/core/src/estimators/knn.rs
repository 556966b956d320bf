//! k-nearest-neighbour entropy and mutual information estimators.
//!
//! Differential entropy uses the Kozachenko-Leonenko estimator with the
//! max-norm, which on the real line reads
//!
//! ```text
//! h = psi(n) - psi(k) + ln 2 + mean_i ln r_k(i)
//! ```
//!
//! with `r_k(i)` the distance from sample `i` to its k-th nearest neighbour.
//! The mutual information between a bit `B` and a real `C` is obtained as
//! `h(C) - sum_b P(b) h(C | B = b)`, which avoids treating `B` as continuous.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::stats::{digamma_int, variance};

/// Minimum sample size accepted by the MI estimators.
pub const MIN_SAMPLES: usize = 100;

/// Relative magnitude of the tie-breaking jitter.
pub const JITTER_SCALE: f64 = 1e-10;

/// Distance from each element of a sorted slice to its k-th nearest
/// neighbour (excluding itself).
fn kth_neighbour_distances(sorted: &[f64], k: usize) -> impl Iterator<Item = f64> + '_ {
    let n = sorted.len();
    (0..n).map(move |i| {
        let x = sorted[i];
        let (mut left, mut right) = (i, i + 1);
        let mut dist = 0.0;
        for _ in 0..k {
            let dl = if left > 0 {
                x - sorted[left - 1]
            } else {
                f64::INFINITY
            };
            let dr = if right < n {
                sorted[right] - x
            } else {
                f64::INFINITY
            };
            if dl <= dr {
                dist = dl;
                left -= 1;
            } else {
                dist = dr;
                right += 1;
            }
        }
        dist
    })
}

/// Kozachenko-Leonenko differential entropy in nats of an already sorted
/// sample. Requires `sorted.len() > k`.
pub fn kl_entropy_sorted(sorted: &[f64], k: usize) -> f64 {
    let n = sorted.len();
    assert!(n > k && k >= 1, "need more than k samples");
    let sum_log: f64 = kth_neighbour_distances(sorted, k)
        .map(|d| d.max(f64::MIN_POSITIVE).ln())
        .sum();
    digamma_int(n) - digamma_int(k) + std::f64::consts::LN_2 + sum_log / n as f64
}

/// Kozachenko-Leonenko differential entropy in nats.
pub fn kl_entropy(samples: &[f64], k: usize) -> Result<f64> {
    if samples.len() <= k {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            min: k + 1,
        });
    }
    check_finite(samples)?;
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(kl_entropy_sorted(&s, k))
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(&value) => Err(Error::NonFinite {
            what: "estimator sample",
            value,
        }),
        None => Ok(()),
    }
}

fn jittered(values: &[f64], seed: u64) -> Vec<f64> {
    let sd = variance(values).sqrt();
    let eps = if sd > 0.0 {
        JITTER_SCALE * sd
    } else {
        JITTER_SCALE
    };
    let mut rng = rng_from_seed(seed);
    values
        .iter()
        .map(|v| v + eps * rng.random::<f64>())
        .collect()
}

/// Sorted, jittered continuous sample shared by several bit sequences.
///
/// Building the context once and querying it per expansion level avoids
/// re-sorting the continuous side for every level.
#[derive(Debug, Clone)]
pub struct KnnContext {
    k: usize,
    /// Sample indices in increasing order of value.
    order: Vec<usize>,
    sorted: Vec<f64>,
    entropy_all: f64,
}

impl KnnContext {
    pub fn new(cont: &[f64], k: usize, jitter_seed: u64) -> Result<Self> {
        if cont.len() < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                got: cont.len(),
                min: MIN_SAMPLES,
            });
        }
        check_finite(cont)?;
        let values = jittered(cont, jitter_seed);
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let entropy_all = kl_entropy_sorted(&sorted, k);
        Ok(Self {
            k,
            order,
            sorted,
            entropy_all,
        })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `h(C)` in nats.
    pub fn entropy(&self) -> f64 {
        self.entropy_all
    }

    /// `I(B; C)` in bits for a bit sequence aligned with the original
    /// (unsorted) continuous sample, clamped below at 0.
    pub fn mutual_information(&self, bits: &[u8]) -> Result<f64> {
        let n = self.len();
        if bits.len() != n {
            return Err(Error::LengthMismatch(bits.len(), n));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Domain("bit sequence must hold only 0 and 1".into()));
        }
        let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (&idx, &v) in self.order.iter().zip(&self.sorted) {
            groups[bits[idx] as usize].push(v);
        }
        if groups[0].is_empty() || groups[1].is_empty() {
            return Err(Error::DegenerateDiscrete);
        }
        let conditional: f64 = groups
            .iter()
            .map(|g| {
                let weight = g.len() as f64 / n as f64;
                let h = if g.len() > self.k {
                    kl_entropy_sorted(g, self.k)
                } else {
                    self.entropy_all
                };
                weight * h
            })
            .sum();
        let mi = (self.entropy_all - conditional) / std::f64::consts::LN_2;
        Ok(mi.max(0.0))
    }
}

/// Mixed discrete-continuous MI `I(B; C)` in bits.
pub fn mi_bit_continuous(bits: &[u8], cont: &[f64], k: usize, jitter_seed: u64) -> Result<f64> {
    if bits.len() != cont.len() {
        return Err(Error::LengthMismatch(bits.len(), cont.len()));
    }
    KnnContext::new(cont, k, jitter_seed)?.mutual_information(bits)
}

/// Kraskov-Stoegbauer-Grassberger estimate (algorithm 1, max-norm) of the
/// mutual information between two real sequences, in bits, clamped at 0.
pub fn mi_continuous_ksg(x: &[f64], y: &[f64], k: usize, jitter_seed: u64) -> Result<f64> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n,
            min: MIN_SAMPLES,
        });
    }
    check_finite(x)?;
    check_finite(y)?;
    let xj = jittered(x, jitter_seed);
    let yj = jittered(y, crate::seed::splitmix64(jitter_seed));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xj[a].total_cmp(&xj[b]));
    let px: Vec<f64> = order.iter().map(|&i| xj[i]).collect();
    let py: Vec<f64> = order.iter().map(|&i| yj[i]).collect();
    let mut ys_sorted = py.clone();
    ys_sorted.sort_by(f64::total_cmp);

    let mut heap: Vec<f64> = Vec::with_capacity(k + 1);
    let mut psi_sum = 0.0;
    for i in 0..n {
        heap.clear();
        // k smallest max-norm distances, kept sorted ascending.
        let push = |d: f64, heap: &mut Vec<f64>| {
            if heap.len() < k || d < heap[heap.len() - 1] {
                let pos = heap.partition_point(|&h| h <= d);
                heap.insert(pos, d);
                heap.truncate(k);
            }
        };
        let (mut left, mut right) = (i, i + 1);
        loop {
            let dl = if left > 0 {
                px[i] - px[left - 1]
            } else {
                f64::INFINITY
            };
            let dr = if right < n {
                px[right] - px[i]
            } else {
                f64::INFINITY
            };
            let dx = dl.min(dr);
            if dx.is_infinite() || (heap.len() == k && dx >= heap[k - 1]) {
                break;
            }
            let j = if dl <= dr {
                left -= 1;
                left
            } else {
                right += 1;
                right - 1
            };
            let d = dx.max((py[j] - py[i]).abs());
            push(d, &mut heap);
        }
        let eps = heap[k - 1];
        let nx = count_within(&px, px[i], eps);
        let ny = count_within(&ys_sorted, py[i], eps);
        psi_sum += digamma_int(nx + 1) + digamma_int(ny + 1);
    }
    let nats = digamma_int(k) + digamma_int(n) - psi_sum / n as f64;
    Ok((nats / std::f64::consts::LN_2).max(0.0))
}

/// Number of elements of `sorted` strictly within `eps` of `center`,
/// excluding one copy of `center` itself.
fn count_within(sorted: &[f64], center: f64, eps: f64) -> usize {
    let lo = sorted.partition_point(|&v| v <= center - eps);
    let hi = sorted.partition_point(|&v| v < center + eps);
    (hi - lo).saturating_sub(1)
}
