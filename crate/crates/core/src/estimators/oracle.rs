//! Deterministic mutual information of a DTE sub-channel by quadrature.
//!
//! Let `U` be the quantized variable and `W` the continuous side (RR:
//! `U = Y`, `W = X`; DR: `U = X`, `W = Y`). Both are zero-mean Gaussian and
//! `U | W = w ~ N(a w, s^2)`. The event `D_i(U) = 1` is the union of the odd
//! dyadic cells `[q_j, q_{j+1})`, `q_j = sd_U * Phi^{-1}(j / 2^i)`, so
//! `P(1 | w)` is a finite sum of normal CDF differences and
//!
//! ```text
//! I(D_i(U); W) = int f_W(w) sum_b P(b | w) log2(2 P(b | w)) dw
//! ```
//!
//! because `D_i(U)` is exactly Bernoulli(1/2).

use crate::channel::AwgnModel;
use crate::transform::{std_normal_cdf, std_normal_quantile};

use super::quadrature::integrate_partition;
use super::Direction;

/// Search window for the heaviest cell, in conditional standard deviations
/// around the conditional mean.
const WINDOW_SIGMAS: f64 = 10.0;

/// Half-width of the integration range in units of `sd_W`.
const RANGE_SIGMAS: f64 = 12.0;

/// `|P(1 | w) - P(0 | w)|` is at most the largest cell mass. Below half
/// this bound `P(1 | w) = 1/2` is used; the MI error it induces is under
/// `BALANCE_BOUND^2 / ln 2`.
const BALANCE_BOUND: f64 = 1e-4;

/// Tail truncation threshold of the alternating cell sum.
const TAIL_MASS: f64 = 1e-13;

/// Cell boundaries are cached up to this depth.
const MAX_CACHED_LEVEL: u32 = 20;

/// Absolute tolerance handed to the integrator.
const ABS_TOL: f64 = 1e-9;

struct SubChannel {
    level: u32,
    sd_u: f64,
    slope: f64,
    cond_sd: f64,
    sd_w: f64,
    /// `q_0 .. q_{2^level}` when cached.
    boundaries: Option<Vec<f64>>,
}

impl SubChannel {
    fn new(level: u32, model: &AwgnModel, direction: Direction) -> Self {
        let sv = model.signal_variance;
        let nv = model.noise_variance;
        let total = sv + nv;
        let (var_u, var_w, cond_var) = match direction {
            // U = Y, W = X: Y | X = x ~ N(x, nv).
            Direction::Reverse => (total, sv, nv),
            // U = X, W = Y: X | Y = y ~ N(sv y / total, sv nv / total).
            Direction::Direct => (sv, total, sv * nv / total),
        };
        let slope = sv / var_w;
        let sd_u = var_u.sqrt();
        let boundaries = (level <= MAX_CACHED_LEVEL).then(|| {
            let cells = 1u64 << level;
            (0..=cells).map(|j| boundary(sd_u, j, level)).collect()
        });
        Self {
            level,
            sd_u,
            slope,
            cond_sd: cond_var.sqrt(),
            sd_w: var_w.sqrt(),
            boundaries,
        }
    }

    fn q(&self, j: u64) -> f64 {
        match &self.boundaries {
            Some(b) => b[j as usize],
            None => boundary(self.sd_u, j, self.level),
        }
    }

    fn cell_of(&self, u: f64) -> u64 {
        let cells = 1u64 << self.level;
        let p = std_normal_cdf(u / self.sd_u);
        ((p * cells as f64).floor() as u64).min(cells - 1)
    }

    /// Conditional mass of cell `j` given conditional mean `m`.
    fn mass(&self, j: u64, m: f64) -> f64 {
        let s = self.cond_sd;
        let za = (self.q(j) - m) / s;
        let zb = (self.q(j + 1) - m) / s;
        if za > 0.0 {
            std_normal_cdf(-za) - std_normal_cdf(-zb)
        } else {
            std_normal_cdf(zb) - std_normal_cdf(za)
        }
    }

    /// Index of the heaviest cell. Cell masses are unimodal in `j` because
    /// the cells are equiprobable under `f_U` and `f_{U|W} / f_U` is
    /// Gaussian-shaped.
    fn peak_cell(&self, m: f64) -> u64 {
        let s = self.cond_sd;
        let mut lo = self.cell_of(m - WINDOW_SIGMAS * s);
        let mut hi = self.cell_of(m + WINDOW_SIGMAS * s);
        while hi - lo >= 3 {
            let third = (hi - lo) / 3;
            let (a, b) = (lo + third, hi - third);
            let (fa, fb) = (self.mass(a, m), self.mass(b, m));
            if fa < fb {
                lo = a + 1;
            } else if fa > fb {
                hi = b - 1;
            } else {
                lo = a;
                hi = b;
            }
        }
        (lo..=hi)
            .max_by(|&a, &b| self.mass(a, m).total_cmp(&self.mass(b, m)))
            .expect("non-empty range")
    }

    /// Alternating sum `sum_k (-1)^k mass(j_k)` along `cells`, which walk
    /// away from the peak so the masses decrease. The walk stops once a
    /// mass is negligible, or once the masses are locally linear to
    /// `TAIL_MASS`; the remaining sum is then `a/2 + (a - b)/4` up to second
    /// differences (Euler transform).
    fn alternating_tail(&self, m: f64, mut cells: impl Iterator<Item = u64>) -> f64 {
        let mut next = || cells.next().map(|j| self.mass(j, m));
        let Some(mut a) = next() else { return 0.0 };
        let mut b = next();
        let mut sign = 1.0;
        let mut sum = 0.0;
        loop {
            let Some(bv) = b else { return sum + sign * a };
            if a < TAIL_MASS {
                return sum + sign * a;
            }
            let c = next();
            if let Some(cv) = c {
                if (a - 2.0 * bv + cv).abs() < TAIL_MASS {
                    return sum + sign * (0.5 * a + 0.25 * (a - bv));
                }
            }
            sum += sign * a;
            sign = -sign;
            a = bv;
            b = c;
        }
    }

    /// `P(D_i(U) = 1 | W = w)` through `P(1) - P(0) = sum_j (-1)^(j+1) mass_j`,
    /// summed outwards from the heaviest cell.
    fn p_one(&self, w: f64) -> f64 {
        let m = self.slope * w;
        let peak = self.peak_cell(m);
        let peak_mass = self.mass(peak, m);
        if 2.0 * peak_mass < BALANCE_BOUND {
            return 0.5;
        }
        let last = (1u64 << self.level) - 1;
        // Both tails start with the cell next to the peak, of opposite parity.
        let up = self.alternating_tail(m, peak + 1..=last);
        let down = self.alternating_tail(m, (0..peak).rev());
        let s = if peak & 1 == 1 { 1.0 } else { -1.0 };
        let diff = s * (peak_mass - up - down);
        (0.5 * (1.0 + diff)).clamp(0.0, 1.0)
    }

    fn integrand(&self, w: f64) -> f64 {
        let p1 = self.p_one(w);
        let p0 = 1.0 - p1;
        let term = |p: f64| if p > 0.0 { p * (2.0 * p).log2() } else { 0.0 };
        let z = w / self.sd_w;
        let density = (-0.5 * z * z).exp() / (self.sd_w * (2.0 * std::f64::consts::PI).sqrt());
        density * (term(p1) + term(p0))
    }

    /// Integration breakpoints: range ends, zero and, for shallow levels,
    /// the `w` at which the conditional mean crosses a cell boundary.
    fn breakpoints(&self) -> Vec<f64> {
        let range = RANGE_SIGMAS * self.sd_w;
        let mut pts = vec![-range, 0.0, range];
        if self.level <= 12 {
            let cells = 1u64 << self.level;
            for j in 1..cells {
                let w = self.q(j) / self.slope;
                if w.abs() < range {
                    pts.push(w);
                }
            }
        }
        // Even coverage of the bulk so no feature hides inside one panel.
        for k in -24..=24 {
            pts.push(k as f64 * 0.5 * self.sd_w);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

fn boundary(sd_u: f64, j: u64, level: u32) -> f64 {
    let cells = 1u64 << level;
    if j == 0 {
        f64::NEG_INFINITY
    } else if j >= cells {
        f64::INFINITY
    } else {
        sd_u * std_normal_quantile(j as f64 / cells as f64)
    }
}

/// `I(D_i(U); W)` in bits for level `level` (1-based, at most 32).
pub fn mi_bit_continuous_oracle(level: u32, model: &AwgnModel, direction: Direction) -> f64 {
    assert!(
        (1..=crate::transform::MAX_DEPTH).contains(&level),
        "level out of range: {level}"
    );
    let sub = SubChannel::new(level, model, direction);
    let pts = sub.breakpoints();
    let r = integrate_partition(|w| sub.integrand(w), &pts, ABS_TOL);
    r.value.clamp(0.0, 1.0)
}

/// Level-1 transition probability `P(D_1(X) != D_1(Y))` in closed form:
/// `1/2 - arcsin(rho) / pi` with `rho` the correlation of `(X, Y)`.
pub fn first_level_transition_probability(model: &AwgnModel) -> f64 {
    0.5 - model.correlation().asin() / std::f64::consts::PI
}
