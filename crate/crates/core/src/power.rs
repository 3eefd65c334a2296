//! Gamma judgment model, simulated power, sample-size search and observed MDEs.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::System;
use crate::error::{invalid, Error, Result};
use crate::rank::rank_sum_test;
use crate::seed::{self, StreamRng};
use crate::sequential::JudgmentSource;

/// Smallest variance the model accepts; below it the shape diverges.
pub const MIN_VARIANCE: f64 = 1e-6;
pub const DEFAULT_SAMPLE_SIZE_CAP: usize = 1_000_000;
pub const DEFAULT_TARGET_RATE: f64 = 0.95;

/// Scores distributed as `100 - Gamma(shape, scale)`, matched to a mean and
/// variance. Most mass sits near the top of the scale with a long lower tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaJudgmentModel {
    pub mean: f64,
    pub variance: f64,
    pub shape: f64,
    pub scale: f64,
}

pub fn fit_gamma_model(mean_score: f64, variance: f64) -> Result<GammaJudgmentModel> {
    if !(mean_score.is_finite() && mean_score < 100.0) {
        return Err(invalid(format!("mean score must be below 100, got {mean_score}")));
    }
    if mean_score <= 0.0 {
        return Err(invalid(format!("mean score must be positive, got {mean_score}")));
    }
    if !(variance.is_finite() && variance >= MIN_VARIANCE) {
        return Err(invalid(format!("variance must be at least {MIN_VARIANCE}, got {variance}")));
    }
    let deficit = 100.0 - mean_score;
    Ok(GammaJudgmentModel {
        mean: mean_score,
        variance,
        shape: deficit * deficit / variance,
        scale: variance / deficit,
    })
}

impl GammaJudgmentModel {
    pub fn model_mean(&self) -> f64 {
        100.0 - self.shape * self.scale
    }

    pub fn model_variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    /// Same variance, mean moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        fit_gamma_model(self.mean + delta, self.variance)
    }

    pub fn sampler(&self) -> JudgmentSampler {
        JudgmentSampler {
            gamma: Gamma::new(self.shape, self.scale).expect("fitted parameters are positive"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JudgmentSampler {
    gamma: Gamma<f64>,
}

impl Distribution<f64> for JudgmentSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        100.0 - self.gamma.sample(rng)
    }
}

/// Draws judgments for A and B from two models, each system on its own
/// stream so the k-th judgment of a system does not depend on batching.
#[derive(Debug, Clone)]
pub struct ModelSource {
    samplers: [JudgmentSampler; 2],
    streams: [StreamRng; 2],
}

impl ModelSource {
    pub fn new(a: &GammaJudgmentModel, b: &GammaJudgmentModel, master: u64, coords: &[u64]) -> Self {
        let stream = |tag: u64| {
            let mut c = coords.to_vec();
            c.push(tag);
            seed::stream(master, &c)
        };
        ModelSource {
            samplers: [a.sampler(), b.sampler()],
            streams: [stream(0), stream(1)],
        }
    }
}

impl JudgmentSource for ModelSource {
    fn draw(&mut self, system: System, n: usize, out: &mut Vec<f64>) -> Result<()> {
        let i = system as usize;
        let sampler = self.samplers[i];
        out.extend((0..n).map(|_| sampler.sample(&mut self.streams[i])));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub power: f64,
    pub reps: usize,
    /// Binomial standard error of `power`.
    pub std_error: f64,
}

impl PowerEstimate {
    pub fn from_counts(significant: usize, reps: usize) -> Self {
        let power = significant as f64 / reps as f64;
        PowerEstimate {
            power,
            reps,
            std_error: (power * (1.0 - power) / reps as f64).sqrt(),
        }
    }
}

/// Fraction of `reps` simulated fixed experiments with `total_n` judgments
/// (split evenly, A takes the odd one) that reach `p < alpha`.
///
/// Replicate `r` draws from streams keyed by `(seed, r)`, so estimates at
/// different `total_n` share their leading judgments.
pub fn estimate_power(
    model_a: &GammaJudgmentModel,
    model_b: &GammaJudgmentModel,
    total_n: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    if total_n < 4 {
        return Err(invalid("total_n must be at least 4"));
    }
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n_a = total_n - total_n / 2;
    let n_b = total_n / 2;
    let hits = seed::map_indexed(reps, |r| -> Result<bool> {
        let mut source = ModelSource::new(model_a, model_b, seed, &[r as u64]);
        let mut a = Vec::with_capacity(n_a);
        let mut b = Vec::with_capacity(n_b);
        source.draw(System::A, n_a, &mut a)?;
        source.draw(System::B, n_b, &mut b)?;
        Ok(rank_sum_test(&a, &b)?.p_two_sided < alpha)
    });
    let mut significant = 0;
    for hit in hits {
        significant += usize::from(hit?);
    }
    Ok(PowerEstimate::from_counts(significant, reps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    /// Judgments across both systems.
    pub total_n: usize,
    pub per_system_a: usize,
    pub per_system_b: usize,
    /// Power at `total_n` from the confirmation run.
    pub confirmation: PowerEstimate,
    pub evaluations: usize,
}

/// Smallest even total judgment count whose simulated power against a model
/// shifted down by `delta` reaches `target_power`.
///
/// Brackets by doubling, bisects, then confirms the answer at four times the
/// replicate count; if confirmation fails the search reruns at the larger
/// replicate count starting from the rejected size.
pub fn required_sample_size(
    delta: f64,
    base: &GammaJudgmentModel,
    target_power: f64,
    alpha: f64,
    reps: usize,
    seed: u64,
    cap: usize,
) -> Result<SampleSize> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    if !(target_power > 0.0 && target_power < 1.0) {
        return Err(invalid(format!("target power must lie in (0, 1), got {target_power}")));
    }
    if target_power <= alpha {
        return Err(invalid("target power must exceed alpha"));
    }
    let alternative = base.shifted(-delta)?;
    let mut evaluations = 0;
    let mut power_at = |n: usize, reps: usize| -> Result<PowerEstimate> {
        evaluations += 1;
        estimate_power(base, &alternative, n, alpha, reps, seed)
    };

    let mut floor = 4;
    let mut reps_now = reps;
    for attempt in 0..2 {
        let n = search(&mut power_at, floor, target_power, reps_now, cap)?;
        let confirmation = power_at(n, reps_now * 4)?;
        if confirmation.power >= target_power || attempt == 1 {
            return Ok(SampleSize {
                total_n: n,
                per_system_a: n - n / 2,
                per_system_b: n / 2,
                confirmation,
                evaluations,
            });
        }
        floor = n + 2;
        reps_now *= 4;
    }
    unreachable!()
}

fn search<F>(power_at: &mut F, floor: usize, target: f64, reps: usize, cap: usize) -> Result<usize>
where
    F: FnMut(usize, usize) -> Result<PowerEstimate>,
{
    let meets = |p: PowerEstimate| p.power >= target;
    if meets(power_at(floor, reps)?) {
        return Ok(floor);
    }
    let mut lo = floor;
    let mut hi = floor;
    loop {
        hi *= 2;
        if hi > cap {
            return Err(Error::Unattainable(cap));
        }
        if meets(power_at(hi, reps)?) {
            break;
        }
        lo = hi;
    }
    while hi - lo > 2 {
        let mid = (lo + hi) / 2 / 2 * 2;
        let mid = if mid <= lo { lo + 2 } else { mid };
        if meets(power_at(mid, reps)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Chance that a significant call matches the true ordering, `(1 - alpha)(1 - beta)`.
pub fn pairwise_accuracy(alpha: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
        return Err(invalid("alpha and beta must lie in [0, 1]"));
    }
    Ok((1.0 - alpha) * (1.0 - beta))
}

/// Power `1 - beta` needed to reach a pairwise accuracy at level `alpha`.
pub fn power_for_accuracy(accuracy: f64, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid("alpha must lie in [0, 1)"));
    }
    let power = accuracy / (1.0 - alpha);
    if !(power > 0.0 && power < 1.0) {
        return Err(invalid(format!(
            "accuracy {accuracy} is unreachable at alpha {alpha} (needs power {power})"
        )));
    }
    Ok(power)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdeResult {
    pub mde: f64,
    pub target_rate: f64,
    /// Comparisons with `|diff| >= mde`.
    pub n_above: usize,
    pub significant_above: usize,
}

/// Smallest observed `|diff|` threshold `d` such that at least `target_rate`
/// of the comparisons with `|diff| >= d` were significant.
pub fn observed_mde(corpus: &[(f64, bool)], target_rate: f64) -> Result<MdeResult> {
    if corpus.is_empty() {
        return Err(invalid("corpus is empty"));
    }
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(invalid(format!("target rate must lie in (0, 1), got {target_rate}")));
    }
    if corpus.iter().any(|(d, _)| !d.is_finite() || *d < 0.0) {
        return Err(invalid("absolute differences must be finite and non-negative"));
    }
    let mut sorted: Vec<(f64, bool)> = corpus.to_vec();
    sorted.sort_unstable_by(|x, y| y.0.total_cmp(&x.0));

    let mut best = None;
    let mut seen = 0;
    let mut significant = 0;
    let mut i = 0;
    while i < sorted.len() {
        let d = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == d {
            seen += 1;
            significant += usize::from(sorted[i].1);
            i += 1;
        }
        if significant as f64 >= target_rate * seen as f64 {
            best = Some(MdeResult {
                mde: d,
                target_rate,
                n_above: seen,
                significant_above: significant,
            });
        }
    }
    best.ok_or(Error::TargetRateNotReached(target_rate))
}
