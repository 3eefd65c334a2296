//! Rank-sum testing, variance decomposition and control-variates efficiency.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::{mean, sample_variance};
use crate::error::{invalid, Error, Result};

/// Outcome of a two-sided Mann-Whitney U test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// U for pool A.
    pub u_statistic: f64,
    pub z: f64,
    pub p_two_sided: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub tie_correction_applied: bool,
}

impl TestResult {
    pub fn u_b(&self) -> f64 {
        (self.n_a * self.n_b) as f64 - self.u_statistic
    }
}

/// Computes the test from tie groups listed in increasing value order, each
/// given as `(count in A, count in B)`.
///
/// All rank sums are carried as exact integers (twice the mid-rank sum), so
/// any two callers that present the same groups get bit-identical results.
pub fn rank_sum_from_groups<I>(groups: I) -> Result<TestResult>
where
    I: IntoIterator<Item = (u64, u64)>,
{
    let mut below: u64 = 0;
    let mut twice_rank_sum_a: u128 = 0;
    let mut tie_term: u128 = 0;
    let mut n_a: u64 = 0;
    let mut n_b: u64 = 0;
    for (ca, cb) in groups {
        let t = ca + cb;
        if t == 0 {
            continue;
        }
        // Mid-rank of the group is below + (t + 1) / 2.
        twice_rank_sum_a += u128::from(ca) * u128::from(2 * below + t + 1);
        let t = u128::from(t);
        tie_term += t * t * t - t;
        below += ca + cb;
        n_a += ca;
        n_b += cb;
    }
    if n_a == 0 {
        return Err(Error::EmptyPool("A"));
    }
    if n_b == 0 {
        return Err(Error::EmptyPool("B"));
    }

    let na = n_a as f64;
    let nb = n_b as f64;
    let n = na + nb;
    let twice_u = twice_rank_sum_a as f64 - na * (na + 1.0);
    let u = twice_u / 2.0;
    let centered = u - na * nb / 2.0;
    let variance = na * nb / 12.0 * ((n + 1.0) - tie_term as f64 / (n * (n - 1.0)).max(1.0));

    let (z, p) = if variance <= 0.0 {
        (0.0, 1.0)
    } else {
        let sd = variance.sqrt();
        let corrected = (centered.abs() - 0.5).max(0.0);
        let z = corrected.copysign(centered) / sd;
        (z, erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
    };
    let p = if z == 0.0 { 1.0 } else { p };

    Ok(TestResult {
        u_statistic: u,
        z,
        p_two_sided: p,
        n_a: n_a as usize,
        n_b: n_b as usize,
        tie_correction_applied: tie_term > 0,
    })
}

/// Groups the pooled sample into tie groups of `(count in A, count in B)`.
fn tie_groups(a: &[f64], b: &[f64]) -> Result<Vec<(u64, u64)>> {
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(invalid("scores must not be NaN"));
    }
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    pooled.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));

    let mut groups = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let v = pooled[i].0;
        let (mut ca, mut cb) = (0u64, 0u64);
        while i < pooled.len() && pooled[i].0 == v {
            if pooled[i].1 {
                ca += 1;
            } else {
                cb += 1;
            }
            i += 1;
        }
        groups.push((ca, cb));
    }
    Ok(groups)
}

/// Two-sided Mann-Whitney U test by normal approximation with mid-rank ties
/// and the tie-corrected variance.
///
/// A continuity correction of one half is applied to `|U - n_a n_b / 2|`.
/// When every pooled value is identical the variance is zero and `p = 1`.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() {
        return Err(Error::EmptyPool("A"));
    }
    if b.is_empty() {
        return Err(Error::EmptyPool("B"));
    }
    rank_sum_from_groups(tie_groups(a, b)?)
}

/// Largest combined pool size `exact_rank_sum_p` will enumerate.
pub const EXACT_MAX_N: usize = 16;

/// Exact two-sided p-value by enumerating every assignment of the pooled,
/// tie-aware rank multiset to pool A.
pub fn exact_rank_sum_p(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyPool("A"));
    }
    if b.is_empty() {
        return Err(Error::EmptyPool("B"));
    }
    let n = a.len() + b.len();
    if n > EXACT_MAX_N {
        return Err(Error::EnumerationBound(n, EXACT_MAX_N));
    }

    // Twice the mid-rank of every pooled position, in sorted order.
    let groups = tie_groups(a, b)?;
    let mut twice_ranks = Vec::with_capacity(n);
    let mut twice_observed: i64 = 0;
    let mut below = 0i64;
    for (ca, cb) in groups {
        let t = (ca + cb) as i64;
        let r = 2 * below + t + 1;
        twice_ranks.extend(std::iter::repeat_n(r, t as usize));
        twice_observed += ca as i64 * r;
        below += t;
    }

    let na = a.len() as i64;
    let nb = b.len() as i64;
    // Work with 2U - n_a n_b, i.e. twice the centred statistic.
    let offset = na * (na + 1) + na * nb;
    let observed = (twice_observed - offset).abs();

    let mut extreme = 0u64;
    let mut total = 0u64;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as i64 != na {
            continue;
        }
        let sum: i64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| twice_ranks[i]).sum();
        total += 1;
        if (sum - offset).abs() >= observed {
            extreme += 1;
        }
    }
    Ok(extreme as f64 / total as f64)
}

/// Two-term split of judgment variance into annotator noise and signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    /// `annotator_noise + signal`.
    pub total: f64,
    /// Mean within-segment variance.
    pub annotator_noise: f64,
    /// Variance of the segment-level expected score.
    pub signal: f64,
    pub reducible_fraction: f64,
    /// Unbiased variance of all scores pooled together.
    pub raw_pooled_variance: f64,
    pub segments: usize,
    pub repeat_segments: usize,
}

/// Decomposes the variance of one system's judgments by the law of total
/// variance, using segments with repeat judgments to estimate noise.
pub fn variance_decomposition<'a, I>(judgments: I) -> Result<VarianceDecomposition>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut order: Vec<&str> = Vec::new();
    let mut by_segment: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut all = Vec::new();
    for (segment, score) in judgments {
        by_segment
            .entry(segment)
            .or_insert_with(|| {
                order.push(segment);
                Vec::new()
            })
            .push(score);
        all.push(score);
    }
    if order.len() < 2 {
        return Err(invalid("variance decomposition needs at least 2 segments"));
    }
    let groups: Vec<&Vec<f64>> = order.iter().map(|s| &by_segment[s]).collect();

    let within: Vec<f64> = groups
        .iter()
        .filter(|g| g.len() >= 2)
        .map(|g| sample_variance(g))
        .collect();
    if within.is_empty() {
        return Err(Error::NoRepeatJudgments);
    }
    let noise = mean(&within);
    let raw = sample_variance(&all);

    let balanced = groups.iter().all(|g| g.len() == groups[0].len());
    let signal = if balanced {
        let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
        sample_variance(&means)
    } else {
        (raw - noise).max(0.0)
    };
    let total = signal + noise;
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(VarianceDecomposition {
        total,
        annotator_noise: noise,
        signal,
        reducible_fraction: signal / total,
        raw_pooled_variance: raw,
        segments: groups.len(),
        repeat_segments: within.len(),
    })
}

/// Inputs to the control-variates data-efficiency formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyInputs {
    /// Sentence-level Pearson correlation of the metric with human scores.
    pub rho: f64,
    /// Noise-to-signal ratio: annotator noise variance over true-quality variance.
    pub gamma: f64,
}

impl EfficiencyInputs {
    pub fn new(rho: f64, gamma: f64) -> Result<Self> {
        if !rho.is_finite() || rho.abs() > 1.0 {
            return Err(invalid(format!("rho must lie in [-1, 1], got {rho}")));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(invalid(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(EfficiencyInputs { rho, gamma })
    }

    pub fn from_reducible(rho: f64, reducible_fraction: f64) -> Result<Self> {
        Self::new(rho, gamma_from_reducible(reducible_fraction)?)
    }
}

/// Variance ratio of the plain mean to the control-variates estimator,
/// `(1 + gamma) / (1 - rho^2 + gamma)`.
pub fn data_efficiency(inputs: EfficiencyInputs) -> Result<f64> {
    let EfficiencyInputs { rho, gamma } = EfficiencyInputs::new(inputs.rho, inputs.gamma)?;
    let denominator = 1.0 - rho * rho + gamma;
    if denominator <= 0.0 {
        return Err(Error::InfiniteEfficiency);
    }
    Ok((1.0 + gamma) / denominator)
}

/// `gamma = (1 - r) / r` for a reducible fraction `r` in (0, 1).
pub fn gamma_from_reducible(reducible_fraction: f64) -> Result<f64> {
    let r = reducible_fraction;
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid(format!("reducible fraction must lie in (0, 1), got {r}")));
    }
    Ok((1.0 - r) / r)
}
