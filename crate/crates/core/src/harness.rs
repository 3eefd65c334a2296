//! Benchmarking sequential procedures by bootstrap resampling a corpus of
//! comparisons, plus the curve and savings summaries built on top.

use std::io::Write;

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::data::{summarize, ComparisonData, System};
use crate::error::{invalid, Error, Result};
use crate::power::{fit_gamma_model, GammaJudgmentModel};
use crate::rank::{rank_sum_from_groups, TestResult};
use crate::seed::{self, StreamRng};
use crate::sequential::{
    make_plan, run_procedure, JudgmentSource, Outcome, PlanKind, SequentialData, SequentialPlan,
};

pub const DEFAULT_REPS: usize = 1000;
pub const DEFAULT_SPLIT_THRESHOLD: f64 = 2.0;

/// Sorted distinct values of a comparison's pooled judgments, with each pool
/// element mapped to its value's position. Built once per comparison and
/// shared by every replicate.
#[derive(Debug, Clone)]
pub struct BootstrapIndex {
    values: Vec<f64>,
    groups: [Vec<u32>; 2],
}

impl BootstrapIndex {
    pub fn new(c: &ComparisonData) -> Result<Self> {
        c.validate()?;
        let mut values: Vec<f64> = c.a.scores.iter().chain(&c.b.scores).copied().collect();
        if values.iter().any(|v| v.is_nan()) {
            return Err(invalid("scores must not be NaN"));
        }
        values.sort_unstable_by(f64::total_cmp);
        values.dedup();
        let locate = |xs: &[f64]| -> Vec<u32> {
            xs.iter()
                .map(|x| values.partition_point(|v| v < x) as u32)
                .collect()
        };
        let groups = [locate(&c.a.scores), locate(&c.b.scores)];
        Ok(BootstrapIndex { values, groups })
    }

    pub fn distinct_values(&self) -> usize {
        self.values.len()
    }
}

/// Draws judgments uniformly with replacement from a comparison's pools.
/// Each system has its own stream, so the k-th draw for a system is the same
/// whatever the batch schedule.
#[derive(Debug, Clone)]
pub struct BootstrapSampler<'a> {
    index: &'a BootstrapIndex,
    uniform: [Uniform<usize>; 2],
    streams: [StreamRng; 2],
}

impl<'a> BootstrapSampler<'a> {
    pub fn new(index: &'a BootstrapIndex, master: u64, coords: &[u64]) -> Self {
        let stream = |tag: u64| {
            let mut c = coords.to_vec();
            c.push(tag);
            seed::stream(master, &c)
        };
        let uniform = |g: &Vec<u32>| Uniform::new(0, g.len()).expect("pools are non-empty");
        BootstrapSampler {
            index,
            uniform: [uniform(&index.groups[0]), uniform(&index.groups[1])],
            streams: [stream(0), stream(1)],
        }
    }

    /// Position of the next draw within the value table.
    fn next_group(&mut self, system: System) -> usize {
        let i = system as usize;
        let k = self.uniform[i].sample(&mut self.streams[i]);
        self.index.groups[i][k] as usize
    }

    /// Index into the source pool of the next draw.
    pub fn next_position(&mut self, system: System) -> usize {
        let i = system as usize;
        self.uniform[i].sample(&mut self.streams[i])
    }
}

impl JudgmentSource for BootstrapSampler<'_> {
    fn draw(&mut self, system: System, n: usize, out: &mut Vec<f64>) -> Result<()> {
        out.extend((0..n).map(|_| self.index.values[self.next_group(system)]));
        Ok(())
    }
}

/// Bootstrap data collection that keeps per-value tallies instead of raw
/// scores, so each look costs one pass over the distinct values. Produces the
/// same test results as collecting the scores and calling `rank_sum_test`.
#[derive(Debug, Clone)]
pub struct BootstrapTally<'a> {
    sampler: BootstrapSampler<'a>,
    counts: [Vec<u64>; 2],
    collected: (usize, usize),
}

impl<'a> BootstrapTally<'a> {
    pub fn new(sampler: BootstrapSampler<'a>) -> Self {
        let k = sampler.index.values.len();
        BootstrapTally {
            sampler,
            counts: [vec![0; k], vec![0; k]],
            collected: (0, 0),
        }
    }
}

impl SequentialData for BootstrapTally<'_> {
    fn collect(&mut self, n_a: usize, n_b: usize) -> Result<()> {
        for _ in 0..n_a {
            let g = self.sampler.next_group(System::A);
            self.counts[0][g] += 1;
        }
        for _ in 0..n_b {
            let g = self.sampler.next_group(System::B);
            self.counts[1][g] += 1;
        }
        self.collected.0 += n_a;
        self.collected.1 += n_b;
        Ok(())
    }

    fn test(&mut self) -> Result<TestResult> {
        rank_sum_from_groups(self.counts[0].iter().copied().zip(self.counts[1].iter().copied()))
    }

    fn collected(&self) -> (usize, usize) {
        self.collected
    }
}

/// Stream coordinates of replicate `rep` on a comparison. Plans are not part
/// of the key: every plan sees the same judgment sequence for a replicate.
pub fn replicate_coords(comparison_id: &str, rep: usize) -> [u64; 2] {
    [seed::hash_str(comparison_id), rep as u64]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub comparison_id: String,
    pub language_pair: String,
    pub plan: String,
    pub kind: PlanKind,
    pub budget: usize,
    pub peeks: usize,
    pub power: f64,
    pub avg_spent: f64,
    pub true_diff: f64,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub master_seed: u64,
    pub reps: usize,
    pub plans: Vec<SequentialPlan>,
    /// Comparison-major, then plan order.
    pub rows: Vec<BenchmarkRow>,
}

#[derive(Debug, Serialize)]
struct NestedPlanResult<'a> {
    plan: &'a str,
    kind: PlanKind,
    budget: usize,
    peeks: usize,
    power: f64,
    avg_spent: f64,
}

#[derive(Debug, Serialize)]
struct NestedComparison<'a> {
    comparison_id: &'a str,
    language_pair: &'a str,
    true_diff: f64,
    results: Vec<NestedPlanResult<'a>>,
}

#[derive(Debug, Serialize)]
struct NestedReport<'a> {
    master_seed: u64,
    reps: usize,
    plans: &'a [SequentialPlan],
    comparisons: Vec<NestedComparison<'a>>,
}

impl BenchmarkReport {
    pub fn rows_for<'s>(&'s self, kind: PlanKind, budget: usize) -> impl Iterator<Item = &'s BenchmarkRow> + 's {
        self.rows
            .iter()
            .filter(move |r| r.kind == kind && r.budget == budget)
    }

    /// Nested JSON: one entry per comparison holding its per-plan results.
    pub fn to_json(&self) -> Result<String> {
        let mut comparisons: Vec<NestedComparison<'_>> = Vec::new();
        for row in &self.rows {
            if comparisons.last().is_none_or(|c| c.comparison_id != row.comparison_id) {
                comparisons.push(NestedComparison {
                    comparison_id: &row.comparison_id,
                    language_pair: &row.language_pair,
                    true_diff: row.true_diff,
                    results: Vec::new(),
                });
            }
            comparisons.last_mut().expect("pushed above").results.push(NestedPlanResult {
                plan: &row.plan,
                kind: row.kind,
                budget: row.budget,
                peeks: row.peeks,
                power: row.power,
                avg_spent: row.avg_spent,
            });
        }
        let nested = NestedReport {
            master_seed: self.master_seed,
            reps: self.reps,
            plans: &self.plans,
            comparisons,
        };
        serde_json::to_string_pretty(&nested).map_err(|e| invalid(e.to_string()))
    }

    /// Flat CSV: `comparison_id,plan,budget,power,avg_spent,true_diff,reps,seed`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["comparison_id", "plan", "budget", "power", "avg_spent", "true_diff", "reps", "seed"])?;
        for r in &self.rows {
            w.write_record([
                r.comparison_id.clone(),
                r.plan.clone(),
                r.budget.to_string(),
                r.power.to_string(),
                r.avg_spent.to_string(),
                r.true_diff.to_string(),
                r.reps.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates every plan `reps` times on every comparison by bootstrap
/// resampling and records power and mean spend.
pub fn benchmark(
    corpus: &[ComparisonData],
    plans: &[SequentialPlan],
    reps: usize,
    master_seed: u64,
) -> Result<BenchmarkReport> {
    if corpus.is_empty() {
        return Err(invalid("corpus is empty"));
    }
    if plans.is_empty() {
        return Err(invalid("no plans to benchmark"));
    }
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    for plan in plans {
        plan.validate()?;
    }
    let indexes = corpus.iter().map(BootstrapIndex::new).collect::<Result<Vec<_>>>()?;
    let diffs = corpus
        .iter()
        .map(|c| summarize(c).map(|s| s.diff))
        .collect::<Result<Vec<_>>>()?;

    let cells = corpus.len() * plans.len();
    let results = seed::map_indexed(cells, |cell| -> Result<(u64, u64)> {
        let (ci, pi) = (cell / plans.len(), cell % plans.len());
        let id = &corpus[ci].comparison_id;
        let mut significant = 0u64;
        let mut spent = 0u64;
        for rep in 0..reps {
            let sampler = BootstrapSampler::new(&indexes[ci], master_seed, &replicate_coords(id, rep));
            let result = run_procedure(&plans[pi], &mut BootstrapTally::new(sampler))?;
            significant += u64::from(result.outcome == Outcome::Significant);
            spent += result.judgments_spent as u64;
        }
        Ok((significant, spent))
    });

    let mut rows = Vec::with_capacity(cells);
    for (cell, result) in results.into_iter().enumerate() {
        let (significant, spent) = result?;
        let (c, plan) = (&corpus[cell / plans.len()], &plans[cell % plans.len()]);
        rows.push(BenchmarkRow {
            comparison_id: c.comparison_id.clone(),
            language_pair: c.language_pair.clone(),
            plan: plan.label(),
            kind: plan.kind,
            budget: plan.total_budget,
            peeks: plan.peeks,
            power: significant as f64 / reps as f64,
            avg_spent: spent as f64 / reps as f64,
            true_diff: diffs[cell / plans.len()],
            reps,
            seed: master_seed,
        });
    }
    Ok(BenchmarkReport {
        master_seed,
        reps,
        plans: plans.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub budget: usize,
    /// Unweighted mean over comparisons.
    pub mean_power: f64,
    pub mean_spend: f64,
    pub comparisons: usize,
}

/// Plans of one kind across budgets; fixed plans always use a single look.
pub fn plans_for(kind: PlanKind, budgets: &[usize], peeks: usize, alpha: f64) -> Result<Vec<SequentialPlan>> {
    if budgets.is_empty() || budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("budgets must be non-empty and strictly increasing"));
    }
    let peeks = if kind == PlanKind::Fixed { 1 } else { peeks };
    budgets
        .iter()
        .map(|&b| make_plan(kind, b, peeks, alpha, None))
        .collect()
}

/// Averages a report's rows of one kind per budget, over the comparisons
/// accepted by `keep` (which sees each comparison's true difference).
pub fn curve_from_report<F>(report: &BenchmarkReport, kind: PlanKind, keep: F) -> Vec<CurvePoint>
where
    F: Fn(f64) -> bool,
{
    let mut budgets: Vec<usize> = report
        .plans
        .iter()
        .filter(|p| p.kind == kind)
        .map(|p| p.total_budget)
        .collect();
    budgets.sort_unstable();
    budgets.dedup();
    budgets
        .into_iter()
        .filter_map(|budget| {
            let (mut n, mut power, mut spend) = (0usize, 0.0, 0.0);
            for row in report.rows_for(kind, budget).filter(|r| keep(r.true_diff)) {
                n += 1;
                power += row.power;
                spend += row.avg_spent;
            }
            (n > 0).then(|| CurvePoint {
                budget,
                mean_power: power / n as f64,
                mean_spend: spend / n as f64,
                comparisons: n,
            })
        })
        .collect()
}

/// Mean power and spend of one plan kind over the corpus at each budget.
pub fn power_curve(
    corpus: &[ComparisonData],
    kind: PlanKind,
    budgets: &[usize],
    peeks: usize,
    alpha: f64,
    reps: usize,
    master_seed: u64,
) -> Result<Vec<CurvePoint>> {
    let plans = plans_for(kind, budgets, peeks, alpha)?;
    let report = benchmark(corpus, &plans, reps, master_seed)?;
    Ok(curve_from_report(&report, kind, |_| true))
}

/// Pool-adjacent-violators fit of a non-decreasing sequence (equal weights).
pub fn isotonic_non_decreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let n = n1 + n2;
            blocks.push(((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub power_level: f64,
    /// Mean actual spend of the reference procedure.
    pub budget_ref: f64,
    /// Interpolated mean actual spend at which the alternative matches.
    pub budget_alt: f64,
    pub savings_fraction: f64,
}

fn cleaned(curve: &[CurvePoint]) -> (Vec<f64>, Vec<f64>) {
    let mut points = curve.to_vec();
    points.sort_by(|x, y| x.mean_spend.total_cmp(&y.mean_spend));
    let spend = points.iter().map(|p| p.mean_spend).collect();
    let power: Vec<f64> = points.iter().map(|p| p.mean_power).collect();
    (spend, isotonic_non_decreasing(&power))
}

/// Spend at which the alternative curve reaches the reference curve's power
/// at `budget_ref`, by linear interpolation of spend against power after
/// isotonic cleanup of both curves.
pub fn savings_at_equal_power(
    curve_ref: &[CurvePoint],
    budget_ref: usize,
    curve_alt: &[CurvePoint],
) -> Result<Savings> {
    let (ref_spend, ref_power) = cleaned(curve_ref);
    let at = curve_ref
        .iter()
        .find(|p| p.budget == budget_ref)
        .ok_or_else(|| invalid(format!("reference curve has no budget {budget_ref}")))?;
    let i = ref_spend
        .iter()
        .position(|&s| s == at.mean_spend)
        .expect("point comes from the same curve");
    let (level, spend_ref) = (ref_power[i], ref_spend[i]);

    let (spend, power) = cleaned(curve_alt);
    if power.is_empty() || level < power[0] || level > power[power.len() - 1] {
        return Err(Error::NoCrossing(level));
    }
    let budget_alt = if let Some(j) = power.iter().position(|&p| p == level) {
        spend[j]
    } else {
        let j = power.partition_point(|&p| p < level);
        let (p0, p1, s0, s1) = (power[j - 1], power[j], spend[j - 1], spend[j]);
        s0 + (level - p0) / (p1 - p0) * (s1 - s0)
    };
    Ok(Savings {
        power_level: level,
        budget_ref: spend_ref,
        budget_alt,
        savings_fraction: 1.0 - budget_alt / spend_ref,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Counts of `|diff|` per bin `[k w, (k + 1) w)`; empty bins are omitted.
pub fn histogram(abs_diffs: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(invalid(format!("bin width must be positive, got {bin_width}")));
    }
    let mut counts = std::collections::BTreeMap::new();
    for d in abs_diffs {
        *counts.entry((d.abs() / bin_width).floor() as u64).or_insert(0) += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(k, count)| HistogramBin {
            lower: k as f64 * bin_width,
            upper: (k + 1) as f64 * bin_width,
            count,
        })
        .collect())
}

/// Histogram of each comparison's absolute source-pool mean difference.
pub fn difference_histogram(corpus: &[ComparisonData], bin_width: f64) -> Result<Vec<HistogramBin>> {
    let diffs = corpus
        .iter()
        .map(|c| summarize(c).map(|s| s.diff.abs()))
        .collect::<Result<Vec<_>>>()?;
    histogram(&diffs, bin_width)
}

/// One component of a mixture over absolute system differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DiffComponent {
    Uniform { low: f64, high: f64 },
    /// `start + Exp(mean)`, redrawn while above `cap`.
    ExponentialTail { start: f64, mean: f64, cap: f64 },
}

impl DiffComponent {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DiffComponent::Uniform { low, high } => rng.random_range(low..high),
            DiffComponent::ExponentialTail { start, mean, cap } => {
                let exp = Exp::new(1.0 / mean).expect("positive mean");
                loop {
                    let d = start + exp.sample(rng);
                    if d <= cap {
                        return d;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceMixture {
    pub components: Vec<(f64, DiffComponent)>,
}

impl DifferenceMixture {
    /// Most comparisons within 1.5 points, a tail reaching past 10.
    pub fn dense_small_with_tail() -> Self {
        DifferenceMixture {
            components: vec![
                (0.65, DiffComponent::Uniform { low: 0.0, high: 1.5 }),
                (0.35, DiffComponent::ExponentialTail { start: 1.5, mean: 3.0, cap: 15.0 }),
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        let ok = !self.components.is_empty()
            && self.components.iter().all(|(w, c)| {
                *w >= 0.0
                    && match *c {
                        DiffComponent::Uniform { low, high } => low >= 0.0 && high > low,
                        DiffComponent::ExponentialTail { start, mean, cap } => {
                            start >= 0.0 && mean > 0.0 && cap > start
                        }
                    }
            })
            && total > 0.0;
        if ok {
            Ok(())
        } else {
            Err(invalid("mixture needs positive weights and well-formed components"))
        }
    }

    /// Component index and absolute difference.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        let mut u = rng.random_range(0.0..total);
        for (i, (w, c)) in self.components.iter().enumerate() {
            if u < *w || i + 1 == self.components.len() {
                return (i, c.sample(rng));
            }
            u -= w;
        }
        unreachable!()
    }
}

/// Recipe for a synthetic corpus of comparisons with declared differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub comparisons: usize,
    pub per_system: usize,
    /// Midpoint of the two systems' mean scores.
    pub mean: f64,
    pub variance: f64,
    pub mixture: DifferenceMixture,
    pub language_pair: String,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        SyntheticCorpusSpec {
            comparisons: 200,
            per_system: 600,
            mean: 75.0,
            variance: 27.0 * 27.0,
            mixture: DifferenceMixture::dense_small_with_tail(),
            language_pair: "SYN-SYN".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticComparison {
    pub data: ComparisonData,
    /// Signed `mean(a) - mean(b)` the pools were built to have.
    pub declared_diff: f64,
    pub component: usize,
}

fn draw_pool(model: &GammaJudgmentModel, n: usize, rng: &mut StreamRng) -> Vec<f64> {
    let sampler = model.sampler();
    (0..n)
        .map(|_| loop {
            let s = sampler.sample(rng);
            if s >= 0.0 {
                break s;
            }
        })
        .collect()
}

/// Pulls a pool's mean up to `target` by shrinking every score's distance
/// from 100 by a common factor; scores stay within [0, 100].
fn raise_mean(pool: &mut [f64], target: f64) {
    let current = pool.iter().sum::<f64>() / pool.len() as f64;
    let factor = (100.0 - target) / (100.0 - current);
    for s in pool.iter_mut() {
        *s = 100.0 - (100.0 - *s) * factor;
    }
}

/// Generates comparisons whose pools are drawn from Gamma judgment models
/// (truncated to [0, 100]) and then adjusted so each pool mean difference
/// equals a draw from the mixture, with a random sign.
pub fn synthetic_corpus(spec: &SyntheticCorpusSpec, seed: u64) -> Result<Vec<SyntheticComparison>> {
    spec.mixture.validate()?;
    if spec.comparisons == 0 || spec.per_system < 2 {
        return Err(invalid("synthetic corpus needs comparisons and at least 2 judgments per system"));
    }
    (0..spec.comparisons)
        .map(|i| {
            let mut rng = seed::stream(seed, &[i as u64]);
            let (component, magnitude) = spec.mixture.sample(&mut rng);
            let diff = if rng.random::<bool>() { magnitude } else { -magnitude };
            let model_a = fit_gamma_model(spec.mean + diff / 2.0, spec.variance)?;
            let model_b = fit_gamma_model(spec.mean - diff / 2.0, spec.variance)?;
            let mut a = draw_pool(&model_a, spec.per_system, &mut rng);
            let mut b = draw_pool(&model_b, spec.per_system, &mut rng);
            let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
            let realized = mean(&a) - mean(&b);
            if realized < diff {
                let target = mean(&b) + diff;
                raise_mean(&mut a, target);
            } else {
                let target = mean(&a) - diff;
                raise_mean(&mut b, target);
            }
            Ok(SyntheticComparison {
                data: ComparisonData::from_scores(format!("syn-{i:04}"), spec.language_pair.clone(), a, b),
                declared_diff: diff,
                component,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::rank_sum_test;
    use crate::sequential::ScoreStream;

    fn toy() -> ComparisonData {
        ComparisonData::from_scores(
            "t",
            "L",
            vec![70.0, 80.0, 80.0, 95.0, 100.0],
            vec![60.0, 70.0, 75.0, 80.0],
        )
    }

    #[test]
    fn tally_matches_raw_scores_bit_for_bit() {
        let c = toy();
        let index = BootstrapIndex::new(&c).unwrap();
        assert_eq!(index.distinct_values(), 6);
        for rep in 0..20 {
            let coords = replicate_coords("t", rep);
            let mut raw = ScoreStream::new(BootstrapSampler::new(&index, 9, &coords));
            let mut tally = BootstrapTally::new(BootstrapSampler::new(&index, 9, &coords));
            for (na, nb) in [(3, 2), (4, 4), (10, 1)] {
                raw.collect(na, nb).unwrap();
                tally.collect(na, nb).unwrap();
                let (a, b) = raw.pools();
                assert_eq!(tally.test().unwrap(), rank_sum_test(a, b).unwrap());
            }
        }
    }

    #[test]
    fn benchmark_rejects_empty_inputs() {
        let plans = plans_for(PlanKind::Fixed, &[20], 1, 0.05).unwrap();
        assert!(benchmark(&[], &plans, 10, 1).is_err());
        assert!(benchmark(&[toy()], &[], 10, 1).is_err());
        assert!(benchmark(&[toy()], &plans, 0, 1).is_err());
    }

    #[test]
    fn fixed_rows_spend_the_budget() {
        let plans = plans_for(PlanKind::Fixed, &[20, 40], 3, 0.05).unwrap();
        let report = benchmark(&[toy()], &plans, 50, 3).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert_eq!(row.avg_spent, row.budget as f64);
            assert_eq!(row.peeks, 1);
            assert!((0.0..=1.0).contains(&row.power));
        }
        assert_eq!(report.rows[0].true_diff, summarize(&toy()).unwrap().diff);
    }

    #[test]
    fn budgets_must_increase() {
        assert!(plans_for(PlanKind::Interim, &[1200, 600], 3, 0.05).is_err());
        assert!(plans_for(PlanKind::Interim, &[], 3, 0.05).is_err());
    }

    #[test]
    fn isotonic_cleanup() {
        assert_eq!(isotonic_non_decreasing(&[0.1, 0.3, 0.2, 0.4]), vec![0.1, 0.25, 0.25, 0.4]);
        assert_eq!(isotonic_non_decreasing(&[0.75, 0.5, 0.25]), vec![0.5; 3]);
        assert_eq!(isotonic_non_decreasing(&[]), Vec::<f64>::new());
    }

    fn point(budget: usize, spend: f64, power: f64) -> CurvePoint {
        CurvePoint { budget, mean_power: power, mean_spend: spend, comparisons: 1 }
    }

    #[test]
    fn savings_by_interpolation() {
        let reference = [point(1000, 1000.0, 0.5)];
        let alt = [point(600, 600.0, 0.4), point(1000, 1000.0, 0.6)];
        let s = savings_at_equal_power(&reference, 1000, &alt).unwrap();
        assert!((s.budget_alt - 800.0).abs() < 1e-9);
        assert!((s.savings_fraction - 0.2).abs() < 1e-12);
        assert_eq!(s.power_level, 0.5);
    }

    #[test]
    fn identical_curves_save_nothing() {
        let curve = [point(600, 600.0, 0.3), point(1200, 1200.0, 0.45), point(2400, 2400.0, 0.6)];
        let s = savings_at_equal_power(&curve, 1200, &curve).unwrap();
        assert_eq!(s.savings_fraction, 0.0);
    }

    #[test]
    fn savings_outside_range() {
        let reference = [point(1000, 1000.0, 0.9)];
        let alt = [point(600, 600.0, 0.4), point(1000, 1000.0, 0.6)];
        assert!(matches!(savings_at_equal_power(&reference, 1000, &alt), Err(Error::NoCrossing(_))));
        assert!(savings_at_equal_power(&reference, 1200, &alt).is_err());
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.2, -0.4, 3.0], 1.0).unwrap();
        assert_eq!(
            h,
            vec![
                HistogramBin { lower: 0.0, upper: 1.0, count: 2 },
                HistogramBin { lower: 3.0, upper: 4.0, count: 1 }
            ]
        );
        assert!(histogram(&[1.0], 0.0).is_err());
    }

    #[test]
    fn synthetic_pools_hit_declared_differences() {
        let spec = SyntheticCorpusSpec { comparisons: 30, per_system: 100, ..Default::default() };
        let corpus = synthetic_corpus(&spec, 4).unwrap();
        for s in &corpus {
            let diff = summarize(&s.data).unwrap().diff;
            assert!((diff - s.declared_diff).abs() < 1e-9, "{diff} vs {}", s.declared_diff);
            assert!(s.data.a.scores.iter().chain(&s.data.b.scores).all(|x| (0.0..=100.0).contains(x)));
        }
    }
}
