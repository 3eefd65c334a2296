//! Group sequential testing with Pocock boundaries and optional futility
//! stopping.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::data::System;
use crate::error::{invalid, Error, Result};
use crate::rank::{rank_sum_test, TestResult};
use crate::seed;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_PEEKS: usize = 3;
pub const DEFAULT_FUTILITY_P: f64 = 0.5;
/// Monte Carlo size used when no table entry applies.
pub const DEFAULT_POCOCK_REPS: usize = 1_000_000;
pub const DEFAULT_POCOCK_SEED: u64 = 0x5EED_0C0C;

/// Two-sided Pocock nominal levels at overall alpha = 0.05, indexed by K - 1.
/// Generated by `cargo run --release --example pocock_table` (10^7 reps).
pub const POCOCK_TABLE_ALPHA_05: [f64; 5] = [0.05, 0.0294, 0.0221, 0.0182, 0.0158];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanKind {
    Fixed,
    Interim,
    InterimFutility,
}

impl PlanKind {
    pub const ALL: [PlanKind; 3] = [PlanKind::Fixed, PlanKind::Interim, PlanKind::InterimFutility];

    pub fn as_str(self) -> &'static str {
        match self {
            PlanKind::Fixed => "fixed",
            PlanKind::Interim => "interim",
            PlanKind::InterimFutility => "interim-futility",
        }
    }
}

impl fmt::Display for PlanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for PlanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(PlanKind::Fixed),
            "interim" => Ok(PlanKind::Interim),
            "interim-futility" => Ok(PlanKind::InterimFutility),
            other => Err(invalid(format!("unknown plan kind {other:?}"))),
        }
    }
}

/// A testing procedure: how a budget is split into batches and how each
/// interim look is judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialPlan {
    pub kind: PlanKind,
    /// Judgments across both systems.
    pub total_budget: usize,
    pub peeks: usize,
    pub alpha: f64,
    pub per_look_alpha: f64,
    pub futility_p: Option<f64>,
    pub batch_sizes: Vec<usize>,
}

impl SequentialPlan {
    /// Short stable label, e.g. `interim-futility@2300/K3`.
    pub fn label(&self) -> String {
        format!("{}@{}/K{}", self.kind, self.total_budget, self.peeks)
    }

    /// Per-system split of a batch; system A takes the odd judgment.
    pub fn batch_split(&self, batch: usize) -> (usize, usize) {
        let size = self.batch_sizes[batch];
        (size - size / 2, size / 2)
    }

    /// Judgments per system collected once batches `1..=peek` are in.
    pub fn cumulative(&self, peek: usize) -> (usize, usize) {
        (0..peek.min(self.peeks)).fold((0, 0), |(a, b), i| {
            let (da, db) = self.batch_split(i);
            (a + da, b + db)
        })
    }

    /// Size of the batch collected after `peek`, if any.
    pub fn next_batch_size(&self, peek: usize) -> Option<usize> {
        self.batch_sizes.get(peek).copied()
    }

    /// Checks the structural invariants of a plan, e.g. one read from JSON.
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_structure(self.kind, self.total_budget, self.peeks, self.futility_p)?;
        if !(self.per_look_alpha > 0.0 && self.per_look_alpha <= self.alpha) {
            return Err(invalid("per_look_alpha must lie in (0, alpha]"));
        }
        if self.batch_sizes.len() != self.peeks
            || self.batch_sizes.iter().sum::<usize>() != self.total_budget
            || self.batch_sizes.iter().any(|&s| s < 2)
        {
            return Err(invalid("batch_sizes must contain one entry per peek summing to total_budget"));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_structure(kind: PlanKind, budget: usize, peeks: usize, futility_p: Option<f64>) -> Result<()> {
    match (kind, peeks) {
        (_, 0) => return Err(invalid("peeks must be at least 1")),
        (PlanKind::Fixed, k) if k != 1 => return Err(invalid("a fixed plan has exactly one peek")),
        (PlanKind::Interim | PlanKind::InterimFutility, 1) => {
            return Err(invalid("interim plans need at least two peeks"))
        }
        _ => {}
    }
    if budget < 2 * peeks {
        return Err(invalid(format!(
            "budget {budget} cannot give every one of {peeks} batches a judgment per system"
        )));
    }
    match (kind, futility_p) {
        (PlanKind::InterimFutility, Some(f)) if f > 0.0 && f < 1.0 => Ok(()),
        (PlanKind::InterimFutility, _) => Err(invalid("futility threshold must lie in (0, 1)")),
        (_, Some(_)) => Err(invalid("futility threshold only applies to interim-futility plans")),
        (_, None) => Ok(()),
    }
}

/// Equal batches; the remainder goes to the earliest batches.
pub fn batch_schedule(total_budget: usize, peeks: usize) -> Vec<usize> {
    let base = total_budget / peeks;
    let extra = total_budget % peeks;
    (0..peeks).map(|i| base + usize::from(i < extra)).collect()
}

/// Builds a plan. For interim-futility plans a missing threshold defaults to 0.5.
pub fn make_plan(
    kind: PlanKind,
    total_budget: usize,
    peeks: usize,
    alpha: f64,
    futility_p: Option<f64>,
) -> Result<SequentialPlan> {
    check_alpha(alpha)?;
    let futility_p = match kind {
        PlanKind::InterimFutility => futility_p.or(Some(DEFAULT_FUTILITY_P)),
        _ => futility_p,
    };
    check_structure(kind, total_budget, peeks, futility_p)?;
    Ok(SequentialPlan {
        kind,
        total_budget,
        peeks,
        alpha,
        per_look_alpha: pocock_threshold(peeks, alpha)?,
        futility_p,
        batch_sizes: batch_schedule(total_budget, peeks),
    })
}

/// Result of the Monte Carlo boundary search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PocockEstimate {
    /// Constant boundary on |Z| shared by every look.
    pub critical_z: f64,
    pub per_look_alpha: f64,
    /// Fraction of simulated paths crossing the boundary at some look.
    pub achieved_fpr: f64,
}

const CHUNK: usize = 1 << 16;

/// `max_i |Z_i|` over K looks of a standardized cumulative-sum process, for
/// `reps` independent paths, sorted ascending.
fn max_abs_z_paths(peeks: usize, reps: usize, seed: u64) -> Vec<f64> {
    let chunks = reps.div_ceil(CHUNK);
    let scales: Vec<f64> = (1..=peeks).map(|i| 1.0 / (i as f64).sqrt()).collect();
    let mut maxima: Vec<f64> = seed::map_indexed(chunks, |c| {
        let mut rng = seed::stream(seed, &[c as u64]);
        let len = CHUNK.min(reps - c * CHUNK);
        (0..len)
            .map(|_| {
                let mut sum = 0.0;
                let mut worst: f64 = 0.0;
                for scale in &scales {
                    sum += rng.sample::<f64, _>(StandardNormal);
                    worst = worst.max((sum * scale).abs());
                }
                worst
            })
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();
    maxima.sort_unstable_by(f64::total_cmp);
    maxima
}

fn exceed_fraction(sorted: &[f64], c: f64) -> f64 {
    let below = sorted.partition_point(|&m| m < c);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

fn check_mc(peeks: usize, alpha: f64, reps: usize) -> Result<()> {
    if peeks == 0 {
        return Err(invalid("peeks must be at least 1"));
    }
    check_alpha(alpha)?;
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    Ok(())
}

/// Searches for the constant boundary `c` with `P(max |Z_i| >= c) = alpha`
/// over K looks, where `Z_i = (xi_1 + ... + xi_i) / sqrt(i)`.
pub fn pocock_monte_carlo(peeks: usize, alpha: f64, reps: usize, seed: u64) -> Result<PocockEstimate> {
    check_mc(peeks, alpha, reps)?;
    let maxima = max_abs_z_paths(peeks, reps, seed);
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if exceed_fraction(&maxima, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(PocockEstimate {
        critical_z: hi,
        per_look_alpha: erfc(hi / std::f64::consts::SQRT_2),
        achieved_fpr: exceed_fraction(&maxima, hi),
    })
}

/// Nominal per-look two-sided level for K looks at overall `alpha`.
///
/// K = 1 needs no correction. The built-in table answers K <= 5 at
/// alpha = 0.05; anything else is computed by Monte Carlo with `reps` paths.
pub fn pocock_per_look_alpha(peeks: usize, alpha: f64, reps: usize, seed: u64) -> Result<f64> {
    check_mc(peeks, alpha, reps)?;
    if peeks == 1 {
        return Ok(alpha);
    }
    if alpha == DEFAULT_ALPHA && peeks <= POCOCK_TABLE_ALPHA_05.len() {
        return Ok(POCOCK_TABLE_ALPHA_05[peeks - 1]);
    }
    Ok(pocock_monte_carlo(peeks, alpha, reps, seed)?.per_look_alpha)
}

/// `pocock_per_look_alpha` with the default Monte Carlo size and seed.
pub fn pocock_threshold(peeks: usize, alpha: f64) -> Result<f64> {
    pocock_per_look_alpha(peeks, alpha, DEFAULT_POCOCK_REPS, DEFAULT_POCOCK_SEED)
}

/// Two-sided critical value `z` with `2 (1 - Phi(z)) = alpha`.
pub fn two_sided_critical(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Monte Carlo false-positive rate of testing at the uncorrected `alpha`
/// at each of K correlated looks.
pub fn naive_peeking_fpr(peeks: usize, alpha: f64, reps: usize, seed: u64) -> Result<f64> {
    check_mc(peeks, alpha, reps)?;
    let maxima = max_abs_z_paths(peeks, reps, seed);
    Ok(exceed_fraction(&maxima, two_sided_critical(alpha)))
}

/// `1 - (1 - alpha)^m`: chance of at least one false positive among `m`
/// independent tests.
pub fn independent_tests_fpr(tests: u32, alpha: f64) -> f64 {
    1.0 - (1.0 - alpha).powi(tests as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeekAction {
    Continue,
    StopSignificant,
    StopFutile,
    ExhaustedNotSignificant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeekDecision {
    pub action: PeekAction,
    pub p_value: f64,
    pub peek_index: usize,
    /// Judgments across both systems collected so far.
    pub judgments_used: usize,
}

/// The decision rule at look `peek` (1-based) given that look's p-value.
/// Futility is strict (`p > threshold`) and only applies before the last look.
pub fn decide(plan: &SequentialPlan, p: f64, peek: usize) -> PeekAction {
    if p < plan.per_look_alpha {
        PeekAction::StopSignificant
    } else if plan.kind == PlanKind::InterimFutility
        && peek < plan.peeks
        && plan.futility_p.is_some_and(|f| p > f)
    {
        PeekAction::StopFutile
    } else if peek >= plan.peeks {
        PeekAction::ExhaustedNotSignificant
    } else {
        PeekAction::Continue
    }
}

fn check_peek(plan: &SequentialPlan, peek: usize, n_a: usize, n_b: usize) -> Result<()> {
    if peek == 0 || peek > plan.peeks {
        return Err(invalid(format!("peek index {peek} outside 1..={}", plan.peeks)));
    }
    let (expected_a, expected_b) = plan.cumulative(peek);
    if (n_a, n_b) != (expected_a, expected_b) {
        return Err(Error::ScheduleMismatch { peek, n_a, n_b, expected_a, expected_b });
    }
    Ok(())
}

/// Runs the rank-sum test on everything collected through `peek` and applies
/// the plan's decision rule. Pool sizes must match the schedule exactly.
pub fn evaluate_peek(plan: &SequentialPlan, a: &[f64], b: &[f64], peek: usize) -> Result<PeekDecision> {
    check_peek(plan, peek, a.len(), b.len())?;
    let p = rank_sum_test(a, b)?.p_two_sided;
    Ok(PeekDecision {
        action: decide(plan, p, peek),
        p_value: p,
        peek_index: peek,
        judgments_used: a.len() + b.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Significant,
    NotSignificant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcedureResult {
    pub outcome: Outcome,
    pub stopped_at_peek: usize,
    pub judgments_spent: usize,
    pub final_p: f64,
}

/// Anything that can supply fresh judgments for either system.
pub trait JudgmentSource {
    fn draw(&mut self, system: System, n: usize, out: &mut Vec<f64>) -> Result<()>;
}

/// Data collected over the course of one procedure run.
pub trait SequentialData {
    /// Collects `n_a` more judgments for A and `n_b` for B.
    fn collect(&mut self, n_a: usize, n_b: usize) -> Result<()>;
    /// Tests everything collected so far.
    fn test(&mut self) -> Result<TestResult>;
    fn collected(&self) -> (usize, usize);
}

/// Accumulates raw scores from a [`JudgmentSource`] and tests them with
/// [`rank_sum_test`].
#[derive(Debug)]
pub struct ScoreStream<S> {
    source: S,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl<S: JudgmentSource> ScoreStream<S> {
    pub fn new(source: S) -> Self {
        ScoreStream { source, a: Vec::new(), b: Vec::new() }
    }

    pub fn pools(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.b)
    }
}

impl<S: JudgmentSource> SequentialData for ScoreStream<S> {
    fn collect(&mut self, n_a: usize, n_b: usize) -> Result<()> {
        self.source.draw(System::A, n_a, &mut self.a)?;
        self.source.draw(System::B, n_b, &mut self.b)
    }

    fn test(&mut self) -> Result<TestResult> {
        rank_sum_test(&self.a, &self.b)
    }

    fn collected(&self) -> (usize, usize) {
        (self.a.len(), self.b.len())
    }
}

/// Serves judgments from two fixed sequences, in order, and fails once a
/// sequence runs out.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    a: Vec<f64>,
    b: Vec<f64>,
    next: (usize, usize),
}

impl ReplaySource {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        ReplaySource { a, b, next: (0, 0) }
    }
}

impl JudgmentSource for ReplaySource {
    fn draw(&mut self, system: System, n: usize, out: &mut Vec<f64>) -> Result<()> {
        let (pool, cursor) = match system {
            System::A => (&self.a, &mut self.next.0),
            System::B => (&self.b, &mut self.next.1),
        };
        let end = *cursor + n;
        if end > pool.len() {
            return Err(Error::SourceExhausted(system.as_str()));
        }
        out.extend_from_slice(&pool[*cursor..end]);
        *cursor = end;
        Ok(())
    }
}

/// Executes a plan batch by batch until a look stops it.
pub fn run_procedure<D: SequentialData>(plan: &SequentialPlan, data: &mut D) -> Result<ProcedureResult> {
    for peek in 1..=plan.peeks {
        let (n_a, n_b) = plan.batch_split(peek - 1);
        data.collect(n_a, n_b)?;
        let (got_a, got_b) = data.collected();
        check_peek(plan, peek, got_a, got_b)?;
        let p = data.test()?.p_two_sided;
        let action = decide(plan, p, peek);
        if action != PeekAction::Continue {
            return Ok(ProcedureResult {
                outcome: if action == PeekAction::StopSignificant {
                    Outcome::Significant
                } else {
                    Outcome::NotSignificant
                },
                stopped_at_peek: peek,
                judgments_spent: got_a + got_b,
                final_p: p,
            });
        }
    }
    unreachable!("the last look always stops")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(kind: PlanKind, budget: usize, peeks: usize) -> SequentialPlan {
        make_plan(kind, budget, peeks, 0.05, None).unwrap()
    }

    #[test]
    fn fixed_plan() {
        let p = plan(PlanKind::Fixed, 1200, 1);
        assert_eq!(p.per_look_alpha, 0.05);
        assert_eq!(p.batch_sizes, vec![1200]);
        assert_eq!(p.futility_p, None);
        assert_eq!(p.cumulative(1), (600, 600));
    }

    #[test]
    fn figure_one_futility_plan() {
        let p = make_plan(PlanKind::InterimFutility, 1200, 2, 0.05, Some(0.5)).unwrap();
        assert_eq!(p.batch_sizes, vec![600, 600]);
        assert!((p.per_look_alpha - 0.029).abs() < 0.001);
        assert_eq!(p.futility_p, Some(0.5));
        assert_eq!(make_plan(PlanKind::InterimFutility, 1200, 2, 0.05, None).unwrap().futility_p, Some(0.5));
    }

    #[test]
    fn remainder_goes_to_earliest_batches() {
        let p = plan(PlanKind::Interim, 7, 3);
        assert_eq!(p.batch_sizes, vec![3, 2, 2]);
        assert_eq!(p.batch_split(0), (2, 1));
        assert_eq!(p.cumulative(3), (4, 3));
        assert_eq!(p.next_batch_size(1), Some(2));
        assert_eq!(p.next_batch_size(3), None);
    }

    #[test]
    fn inconsistent_plans_are_rejected() {
        assert!(make_plan(PlanKind::Fixed, 1200, 3, 0.05, None).is_err());
        assert!(make_plan(PlanKind::Interim, 1200, 1, 0.05, None).is_err());
        assert!(make_plan(PlanKind::Interim, 1200, 0, 0.05, None).is_err());
        assert!(make_plan(PlanKind::Interim, 5, 3, 0.05, None).is_err());
        assert!(make_plan(PlanKind::Interim, 1200, 3, 0.05, Some(0.5)).is_err());
        assert!(make_plan(PlanKind::InterimFutility, 1200, 3, 0.05, Some(1.5)).is_err());
        assert!(make_plan(PlanKind::Interim, 1200, 3, 1.0, None).is_err());
    }

    #[test]
    fn plan_json_shape() {
        let p = plan(PlanKind::InterimFutility, 1200, 3);
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["kind"], "interim-futility");
        assert_eq!(v["batch_sizes"], serde_json::json!([400, 400, 400]));
        assert_eq!(v["futility_p"], 0.5);
        let back: SequentialPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
        back.validate().unwrap();
    }

    #[test]
    fn decisions_follow_the_rule() {
        let interim = plan(PlanKind::Interim, 1200, 3);
        let futile = plan(PlanKind::InterimFutility, 1200, 3);
        assert_eq!(interim.per_look_alpha, 0.0221);
        assert_eq!(decide(&interim, 0.01, 1), PeekAction::StopSignificant);
        assert_eq!(decide(&futile, 0.6, 1), PeekAction::StopFutile);
        assert_eq!(decide(&interim, 0.6, 1), PeekAction::Continue);
        assert_eq!(decide(&futile, 0.03, 3), PeekAction::ExhaustedNotSignificant);
        assert_eq!(decide(&futile, 0.5, 1), PeekAction::Continue);
        // Futility never fires at the final look.
        assert_eq!(decide(&futile, 0.9, 3), PeekAction::ExhaustedNotSignificant);
        assert_eq!(decide(&futile, 0.0221, 2), PeekAction::Continue);
    }

    #[test]
    fn evaluate_peek_checks_schedule() {
        let p = plan(PlanKind::Interim, 12, 3);
        let a = [1.0, 2.0];
        let b = [3.0, 4.0];
        let d = evaluate_peek(&p, &a, &b, 1).unwrap();
        assert_eq!(d.action, PeekAction::Continue);
        assert_eq!(d.judgments_used, 4);
        assert!(matches!(evaluate_peek(&p, &a, &b, 2), Err(Error::ScheduleMismatch { .. })));
        assert!(evaluate_peek(&p, &a, &b, 0).is_err());
        assert!(evaluate_peek(&p, &a, &b, 4).is_err());
    }

    #[test]
    fn fixed_procedure_spends_budget() {
        let p = plan(PlanKind::Fixed, 10, 1);
        let src = ReplaySource::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let r = run_procedure(&p, &mut ScoreStream::new(src)).unwrap();
        assert_eq!(r.judgments_spent, 10);
        assert_eq!(r.outcome, Outcome::NotSignificant);
        assert_eq!(r.stopped_at_peek, 1);
    }

    #[test]
    fn exhausted_source_is_an_error() {
        let p = plan(PlanKind::Fixed, 10, 1);
        let src = ReplaySource::new(vec![1.0; 5], vec![1.0; 4]);
        assert!(matches!(
            run_procedure(&p, &mut ScoreStream::new(src)),
            Err(Error::SourceExhausted("B"))
        ));
    }

    #[test]
    fn early_stop_on_separated_data() {
        let p = plan(PlanKind::Interim, 60, 3);
        let a: Vec<f64> = (0..30).map(|i| 100.0 - i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let r = run_procedure(&p, &mut ScoreStream::new(ReplaySource::new(a, b))).unwrap();
        assert_eq!(r.outcome, Outcome::Significant);
        assert_eq!(r.stopped_at_peek, 1);
        assert_eq!(r.judgments_spent, 20);
    }

    #[test]
    fn pocock_inputs_are_validated() {
        assert!(pocock_per_look_alpha(0, 0.05, 1000, 1).is_err());
        assert!(pocock_per_look_alpha(2, 0.0, 1000, 1).is_err());
        assert!(pocock_per_look_alpha(2, 1.0, 1000, 1).is_err());
        assert_eq!(pocock_per_look_alpha(1, 0.05, 1000, 1).unwrap(), 0.05);
        assert_eq!(pocock_per_look_alpha(1, 0.1, 1000, 1).unwrap(), 0.1);
    }

    #[test]
    fn single_look_monte_carlo_recovers_alpha() {
        let est = pocock_monte_carlo(1, 0.05, 400_000, 3).unwrap();
        assert!((est.critical_z - 1.959964).abs() < 0.02, "{est:?}");
        assert!((est.achieved_fpr - 0.05).abs() < 1e-4);
    }

    #[test]
    fn independent_inflation() {
        assert!((independent_tests_fpr(20, 0.05) - 0.641514).abs() < 1e-6);
        assert!((independent_tests_fpr(1, 0.05) - 0.05).abs() < 1e-15);
    }
}
