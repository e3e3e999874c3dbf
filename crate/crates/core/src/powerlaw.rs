//! Discrete power-law fitting of cluster sizes: maximum-likelihood exponent,
//! KS-optimal lower cutoff, semiparametric bootstrap p-value and the
//! significant-state filter.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::ClusterStats;
use crate::rng::{stream, Domain};

pub const ALPHA_MIN: f64 = 1.01;
pub const ALPHA_MAX: f64 = 6.0;
pub const ALPHA_TOLERANCE: f64 = 1e-6;
/// Bootstrap p-values above this are read as a plausible power law.
pub const PLAUSIBLE_P: f64 = 0.1;
pub const DEFAULT_BOOTSTRAP: usize = 1000;

// Direct summation runs until the argument reaches this, then Euler-Maclaurin.
const ZETA_SHIFT: f64 = 20.0;

// B_{2k} / (2k)! for k = 1..=7
const EM_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
];

fn zeta_tail(s: f64, a: f64) -> f64 {
    let a_s = a.powf(-s);
    let mut total = a * a_s / (s - 1.0) + 0.5 * a_s;
    let inv_a2 = 1.0 / (a * a);
    // rising factorial s (s+1) ... (s+2k-2) times a^{-s-2k+1}
    let mut term = s * a_s / a;
    for (k, coeff) in EM_COEFFS.iter().enumerate() {
        total += coeff * term;
        let m = 2.0 * k as f64 + 1.0;
        term *= (s + m) * (s + m + 1.0) * inv_a2;
    }
    total
}

/// Hurwitz zeta `sum_{k>=0} (q + k)^{-s}` for `s > 1`, `q > 0`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    let mut head = 0.0;
    let mut a = q;
    while a < ZETA_SHIFT {
        head += a.powf(-s);
        a += 1.0;
    }
    head + zeta_tail(s, a)
}

/// Discrete power law `p(x) = x^{-alpha} / zeta(alpha, x_min)` on `x >= x_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretePowerLaw {
    pub alpha: f64,
    pub x_min: u64,
    norm: f64,
}

impl DiscretePowerLaw {
    pub fn new(alpha: f64, x_min: u64) -> Self {
        assert!(alpha > 1.0 && x_min >= 1, "alpha > 1 and x_min >= 1 required");
        Self { alpha, x_min, norm: hurwitz_zeta(alpha, x_min as f64) }
    }

    pub fn pmf(&self, x: u64) -> f64 {
        if x < self.x_min {
            0.0
        } else {
            (x as f64).powf(-self.alpha) / self.norm
        }
    }

    /// `P(X >= x)`.
    pub fn survival(&self, x: u64) -> f64 {
        if x <= self.x_min {
            1.0
        } else {
            hurwitz_zeta(self.alpha, x as f64) / self.norm
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: u64) -> f64 {
        1.0 - self.survival(x + 1)
    }

    /// Inverse-survival sampler with a lookup table for the bulk.
    pub fn sampler(&self) -> Sampler {
        Sampler::new(*self)
    }
}

const SAMPLER_TABLE: usize = 4096;

/// Exact sampler: `x` is returned with probability `pmf(x)`.
#[derive(Debug, Clone)]
pub struct Sampler {
    law: DiscretePowerLaw,
    // survival[k] = P(X >= x_min + k), strictly decreasing
    survival: Vec<f64>,
}

impl Sampler {
    fn new(law: DiscretePowerLaw) -> Self {
        let mut survival = vec![0.0; SAMPLER_TABLE + 1];
        let end = law.x_min + SAMPLER_TABLE as u64;
        let mut z = hurwitz_zeta(law.alpha, end as f64);
        survival[SAMPLER_TABLE] = z / law.norm;
        for k in (0..SAMPLER_TABLE).rev() {
            z += ((law.x_min + k as u64) as f64).powf(-law.alpha);
            survival[k] = z / law.norm;
        }
        survival[0] = 1.0;
        Self { law, survival }
    }

    pub fn law(&self) -> &DiscretePowerLaw {
        &self.law
    }

    /// Largest `x` with `P(X >= x) >= u`, for `u` in `(0, 1]`.
    fn invert(&self, u: f64) -> u64 {
        let s = &self.survival;
        if u > s[SAMPLER_TABLE] {
            // first index whose survival drops below u, minus one
            let k = s.partition_point(|&v| v >= u);
            return self.law.x_min + k as u64 - 1;
        }
        // far tail: continuous guess, then exact bracketing
        let law = &self.law;
        let guess = (law.x_min as f64 - 0.5) * u.powf(-1.0 / (law.alpha - 1.0)) + 0.5;
        let mut lo = (guess.floor() as u64).max(law.x_min + SAMPLER_TABLE as u64);
        while lo > law.x_min + SAMPLER_TABLE as u64 && law.survival(lo) < u {
            lo = (lo / 2).max(law.x_min + SAMPLER_TABLE as u64);
        }
        let mut hi = lo.saturating_add(1).max(lo + 1);
        while law.survival(hi) >= u {
            lo = hi;
            hi = hi.saturating_mul(2);
        }
        // survival(lo) >= u > survival(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if law.survival(mid) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        // u in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        self.invert(u)
    }
}

/// Result of a discrete power-law fit to the tail `x >= x_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    #[serde(rename = "xmin")]
    pub x_min: u64,
    #[serde(rename = "ks")]
    pub ks_statistic: f64,
    pub p_value: Option<f64>,
    #[serde(rename = "loglik")]
    pub log_likelihood: f64,
    pub n_tail: usize,
    /// The exponent sits on the upper search bound (all tail mass at the cutoff).
    #[serde(skip)]
    pub at_upper_bound: bool,
}

fn tail_log_likelihood(alpha: f64, x_min: u64, n: usize, sum_ln: f64) -> f64 {
    -(n as f64) * hurwitz_zeta(alpha, x_min as f64).ln() - alpha * sum_ln
}

/// Golden-section maximization of the tail log-likelihood over `(1.01, 6]`.
fn maximize_alpha(x_min: u64, n: usize, sum_ln: f64) -> (f64, f64, bool) {
    let f = |a: f64| tail_log_likelihood(a, x_min, n, sum_ln);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (ALPHA_MIN, ALPHA_MAX);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > ALPHA_TOLERANCE {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    let alpha = 0.5 * (a + b);
    let value = f(alpha);
    if ALPHA_MAX - alpha < 10.0 * ALPHA_TOLERANCE {
        let edge = f(ALPHA_MAX);
        if edge >= value {
            return (ALPHA_MAX, edge, true);
        }
    }
    (alpha, value, false)
}

/// Maximum-likelihood exponent for the values `>= x_min`.
pub fn fit_alpha(sizes: &[u64], x_min: u64) -> Result<(f64, f64)> {
    fit_alpha_flagged(sizes, x_min).map(|(a, l, _)| (a, l))
}

/// As [`fit_alpha`], also reporting whether the upper bound was hit.
pub fn fit_alpha_flagged(sizes: &[u64], x_min: u64) -> Result<(f64, f64, bool)> {
    let tail: Vec<f64> = sizes.iter().filter(|&&x| x >= x_min).map(|&x| (x as f64).ln()).collect();
    if tail.len() < 2 || x_min == 0 {
        return Err(Error::InsufficientTail(tail.len()));
    }
    Ok(maximize_alpha(x_min, tail.len(), tail.iter().sum()))
}

/// Continuous-approximation exponent `1 + n / sum ln(x / (x_min - 1/2))`.
pub fn alpha_continuous_approx(sizes: &[u64], x_min: u64) -> f64 {
    let base = x_min as f64 - 0.5;
    let (n, s) =
        sizes.iter().filter(|&&x| x >= x_min).fold((0usize, 0.0), |(n, s), &x| (n + 1, s + (x as f64 / base).ln()));
    1.0 + n as f64 / s
}

/// Sup-distance between the empirical CDF of `tail` (sorted, all `>= x_min`)
/// and the fitted discrete CDF, over all integers `>= x_min`.
fn ks_sorted(tail: &[u64], alpha: f64, x_min: u64) -> f64 {
    let n = tail.len() as f64;
    let norm = hurwitz_zeta(alpha, x_min as f64);
    let mut ks: f64 = 0.0;
    let mut i = 0;
    while i < tail.len() {
        let v = tail[i];
        let mut j = i;
        while j < tail.len() && tail[j] == v {
            j += 1;
        }
        // empirical CDF before v (holds on [prev, v - 1]) and at v
        let before = i as f64 / n;
        let at = j as f64 / n;
        let z_v = hurwitz_zeta(alpha, v as f64);
        let z_next = z_v - (v as f64).powf(-alpha);
        if v > x_min {
            // model CDF at v - 1
            ks = ks.max((before - (1.0 - z_v / norm)).abs());
        }
        ks = ks.max((at - (1.0 - z_next / norm)).abs());
        i = j;
    }
    ks
}

/// KS distance of `sizes`' tail from the power law `(alpha, x_min)`.
pub fn ks_statistic(sizes: &[u64], alpha: f64, x_min: u64) -> f64 {
    let mut tail: Vec<u64> = sizes.iter().copied().filter(|&x| x >= x_min).collect();
    tail.sort_unstable();
    ks_sorted(&tail, alpha, x_min)
}

/// Chooses `x_min` among the distinct data values (leaving at least two tail
/// points) by minimum KS distance; ties go to the smaller cutoff.
pub fn select_xmin(sizes: &[u64]) -> Result<PowerLawFit> {
    let mut sorted: Vec<u64> = sizes.to_vec();
    sorted.sort_unstable();
    if sorted.first() == Some(&0) {
        return Err(Error::DegenerateData("cluster sizes must be positive".into()));
    }
    if sorted.len() < 2 || sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateData("fewer than two distinct values".into()));
    }
    let n = sorted.len();
    let mut suffix_ln = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_ln[i] = suffix_ln[i + 1] + (sorted[i] as f64).ln();
    }
    let mut best: Option<PowerLawFit> = None;
    let mut i = 0;
    while i < n && n - i >= 2 {
        let x_min = sorted[i];
        let tail = &sorted[i..];
        let (alpha, log_likelihood, at_upper_bound) = maximize_alpha(x_min, tail.len(), suffix_ln[i]);
        let ks = ks_sorted(tail, alpha, x_min);
        if best.as_ref().is_none_or(|b| ks < b.ks_statistic) {
            best = Some(PowerLawFit {
                alpha,
                x_min,
                ks_statistic: ks,
                p_value: None,
                log_likelihood,
                n_tail: tail.len(),
                at_upper_bound,
            });
        }
        while i < n && sorted[i] == x_min {
            i += 1;
        }
    }
    best.ok_or(Error::InsufficientTail(n))
}

/// Semiparametric bootstrap goodness-of-fit p-value.
///
/// Each replicate draws `n` points, from the fitted tail with probability
/// `n_tail / n` and otherwise uniformly from the observed values below
/// `x_min`, refits `(x_min, alpha)` and records its KS distance. The p-value
/// is the fraction of replicates at least as far from their fit as the data.
pub fn p_value(sizes: &[u64], fit: &PowerLawFit, n_bootstrap: usize, seed: u64) -> f64 {
    let n = sizes.len();
    let below: Vec<u64> = sizes.iter().copied().filter(|&x| x < fit.x_min).collect();
    let tail_prob = fit.n_tail as f64 / n as f64;
    let sampler = DiscretePowerLaw::new(fit.alpha, fit.x_min).sampler();
    let exceed = (0..n_bootstrap)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = stream(seed, Domain::Bootstrap, r as u64, 0);
            let synthetic: Vec<u64> = (0..n)
                .map(|_| {
                    if below.is_empty() || rng.random::<f64>() < tail_prob {
                        sampler.sample(&mut rng)
                    } else {
                        below[rng.random_range(0..below.len())]
                    }
                })
                .collect();
            // a replicate too degenerate to refit fits itself perfectly
            let ks = select_xmin(&synthetic).map_or(0.0, |f| f.ks_statistic);
            ks >= fit.ks_statistic
        })
        .count();
    exceed as f64 / n_bootstrap as f64
}

/// Full fit: cutoff selection followed by the bootstrap p-value.
pub fn fit(sizes: &[u64], n_bootstrap: usize, seed: u64) -> Result<PowerLawFit> {
    let mut f = select_xmin(sizes)?;
    f.p_value = Some(p_value(sizes, &f, n_bootstrap, seed));
    Ok(f)
}

/// Member counts of every cluster.
pub fn cluster_sizes(stats: &ClusterStats) -> Vec<u64> {
    stats.clusters.iter().map(|s| s.n as u64).collect()
}

/// Labels of clusters with at least `x_min` members, largest first (ties by
/// internal correlation, then label).
pub fn significant_states(stats: &ClusterStats, x_min: u64) -> Vec<u32> {
    let mut keep: Vec<_> = stats.clusters.iter().filter(|s| s.n as u64 >= x_min).collect();
    keep.sort_by(|a, b| b.n.cmp(&a.n).then(b.c.total_cmp(&a.c)).then(a.label.cmp(&b.label)));
    keep.into_iter().map(|s| s.label).collect()
}
