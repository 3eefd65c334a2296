use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use dasense_core::harness::{self, CurvePoint, SyntheticCorpusSpec};
use dasense_core::power::{power_for_accuracy, SampleSize};
use dasense_core::sequential::PeekAction;
use dasense_core::{
    data_efficiency, estimate_power, evaluate_peek, fit_gamma_model, load_judgments, make_plan,
    observed_mde, rank_sum_test, required_sample_size, summarize, write_judgments, ComparisonData,
    EfficiencyInputs, Error, PlanKind, SequentialPlan,
};

use crate::manifest::{resolve_seed, RunManifest};
use crate::{
    DeArgs, DecideArgs, MdeArgs, PlanArgs, PlanSpec, PowerArgs, SampleSizeArgs, SimulateArgs,
    SynthArgs, ValidateArgs,
};

pub const EXIT_OK: u8 = 0;

fn exit_code(action: PeekAction) -> u8 {
    match action {
        PeekAction::Continue => 0,
        PeekAction::StopSignificant => 10,
        PeekAction::StopFutile => 20,
        PeekAction::ExhaustedNotSignificant => 30,
    }
}

fn load(path: &Path) -> Result<Vec<ComparisonData>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    load_judgments(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Writes `name` into `out` when given, otherwise prints it.
fn emit_report<T: Serialize>(out: Option<&Path>, name: &str, value: &T) -> Result<()> {
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_json(&dir.join(name), value)
        }
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

pub fn validate(args: &ValidateArgs) -> Result<u8> {
    let corpus = load(&args.input)?;
    let mut manifest = RunManifest::new("validate", json!({ "input": args.input }));
    manifest.digest(&args.input)?;

    let mut problems = Vec::new();
    println!("comparison_id,language_pair,n_a,n_b,mean_a,mean_b,diff");
    for c in &corpus {
        match summarize(c) {
            Ok(s) => println!(
                "{},{},{},{},{:.4},{:.4},{:.4}",
                c.comparison_id, c.language_pair, s.n_a, s.n_b, s.mean_a, s.mean_b, s.diff
            ),
            Err(e) => problems.push(format!("comparison {}: {e}", c.comparison_id)),
        }
    }
    manifest.emit(None)?;
    if !problems.is_empty() {
        bail!("{} invalid comparison(s):\n  {}", problems.len(), problems.join("\n  "));
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct MdeRow {
    group: String,
    comparisons: usize,
    significant: usize,
    insignificant: usize,
    /// `None` when no threshold reaches the target rate.
    mde: Option<f64>,
    n_above: Option<usize>,
    median_abs_diff: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn mde(args: &MdeArgs) -> Result<u8> {
    let corpus = load(&args.input)?;
    let mut groups: BTreeMap<String, Vec<(f64, bool)>> = BTreeMap::new();
    for c in &corpus {
        let stats = summarize(c).with_context(|| format!("comparison {}", c.comparison_id))?;
        let p = rank_sum_test(&c.a.scores, &c.b.scores)?.p_two_sided;
        let key = if args.by_language_pair { c.language_pair.clone() } else { "all".to_owned() };
        groups.entry(key).or_default().push((stats.diff.abs(), p < args.alpha));
    }

    let mut rows = Vec::new();
    for (group, entries) in groups {
        let significant = entries.iter().filter(|e| e.1).count();
        let (mde, n_above) = match observed_mde(&entries, args.target_rate) {
            Ok(r) => (Some(r.mde), Some(r.n_above)),
            Err(Error::TargetRateNotReached(_)) => (None, None),
            Err(e) => return Err(e.into()),
        };
        let mut diffs: Vec<f64> = entries.iter().map(|e| e.0).collect();
        rows.push(MdeRow {
            group,
            comparisons: entries.len(),
            significant,
            insignificant: entries.len() - significant,
            mde,
            n_above,
            median_abs_diff: median(&mut diffs),
        });
    }

    println!("group,comparisons,significant,insignificant,mde,n_above,median_abs_diff");
    for r in &rows {
        let mde = r.mde.map_or("unattained".to_owned(), |m| format!("{m:.4}"));
        let above = r.n_above.map_or(String::new(), |n| n.to_string());
        println!(
            "{},{},{},{},{mde},{above},{:.4}",
            r.group, r.comparisons, r.significant, r.insignificant, r.median_abs_diff
        );
    }

    let mut manifest = RunManifest::new(
        "mde",
        json!({
            "input": args.input,
            "alpha": args.alpha,
            "target_rate": args.target_rate,
            "by_language_pair": args.by_language_pair,
        }),
    );
    manifest.digest(&args.input)?;
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_json(&dir.join("mde.json"), &rows)?;
    }
    manifest.emit(args.out.as_deref())?;
    Ok(EXIT_OK)
}

pub fn samplesize(args: &SampleSizeArgs) -> Result<u8> {
    let seed = resolve_seed(args.seed);
    let target_power = power_for_accuracy(args.accuracy, args.alpha)?;
    let manifest = RunManifest::new(
        "samplesize",
        json!({
            "delta": args.delta,
            "mean": args.mean,
            "variance": args.variance,
            "alpha": args.alpha,
            "accuracy": args.accuracy,
            "target_power": target_power,
            "reps": args.reps,
            "cap": args.cap,
        }),
    )
    .with_seed(seed);

    let base = fit_gamma_model(args.mean, args.variance)?;
    let result: SampleSize = match required_sample_size(
        args.delta,
        &base,
        target_power,
        args.alpha,
        args.reps,
        seed,
        args.cap,
    ) {
        Ok(r) => r,
        Err(Error::Unattainable(cap)) => {
            manifest.emit(args.out.as_deref())?;
            bail!(
                "power {target_power:.4} is not reached within {cap} judgments; \
                 raise --cap or relax --delta/--accuracy"
            );
        }
        Err(e) => return Err(e.into()),
    };

    println!("target_power {target_power:.6}");
    println!("total_n {}", result.total_n);
    println!("per_system_a {}", result.per_system_a);
    println!("per_system_b {}", result.per_system_b);
    println!(
        "confirmation_power {:.4} (se {:.4}, reps {})",
        result.confirmation.power, result.confirmation.std_error, result.confirmation.reps
    );
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_json(&dir.join("samplesize.json"), &result)?;
    }
    manifest.emit(args.out.as_deref())?;
    Ok(EXIT_OK)
}

pub fn power(args: &PowerArgs) -> Result<u8> {
    let seed = resolve_seed(args.seed);
    let a = fit_gamma_model(args.mean_a, args.variance)?;
    let b = fit_gamma_model(args.mean_b, args.variance)?;
    let estimate = estimate_power(&a, &b, args.budget, args.alpha, args.reps, seed)?;
    let manifest = RunManifest::new(
        "power",
        json!({
            "mean_a": args.mean_a,
            "mean_b": args.mean_b,
            "variance": args.variance,
            "budget": args.budget,
            "alpha": args.alpha,
            "reps": args.reps,
        }),
    )
    .with_seed(seed);
    println!("power {:.4} (se {:.4}, reps {})", estimate.power, estimate.std_error, estimate.reps);
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_json(&dir.join("power.json"), &estimate)?;
    }
    manifest.emit(args.out.as_deref())?;
    Ok(EXIT_OK)
}

fn plan_from_spec(spec: &PlanSpec) -> Result<SequentialPlan> {
    let (Some(kind), Some(budget)) = (spec.kind, spec.budget) else {
        bail!("--kind and --budget are both required to build a plan");
    };
    let futility = (kind == PlanKind::InterimFutility).then_some(spec.futility_p);
    let peeks = if kind == PlanKind::Fixed { 1 } else { spec.peeks };
    Ok(make_plan(kind, budget, peeks, spec.alpha, futility)?)
}

fn spec_params(spec: &PlanSpec) -> serde_json::Value {
    json!({
        "kind": spec.kind,
        "budget": spec.budget,
        "peeks": spec.peeks,
        "alpha": spec.alpha,
        "futility_p": spec.futility_p,
    })
}

pub fn plan(args: &PlanArgs) -> Result<u8> {
    let plan = plan_from_spec(&args.spec)?;
    emit_report(args.out.as_deref(), "plan.json", &plan)?;
    RunManifest::new("plan", spec_params(&args.spec)).emit(args.out.as_deref())?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct DecisionRecord {
    comparison_id: String,
    plan: String,
    peek_index: usize,
    action: PeekAction,
    p_value: f64,
    per_look_alpha: f64,
    judgments_used: usize,
    next_batch_size: Option<usize>,
}

pub fn decide(args: &DecideArgs) -> Result<u8> {
    let mut manifest;
    let plan: SequentialPlan = match &args.plan {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let plan: SequentialPlan =
                serde_json::from_str(&text).with_context(|| format!("parsing plan {}", path.display()))?;
            plan.validate()?;
            manifest = RunManifest::new("decide", json!({ "plan": path, "input": args.input, "peek": args.peek }));
            manifest.digest(path)?;
            plan
        }
        None => {
            let mut params = spec_params(&args.spec);
            params["input"] = json!(args.input);
            params["peek"] = json!(args.peek);
            manifest = RunManifest::new("decide", params);
            plan_from_spec(&args.spec)?
        }
    };
    manifest.digest(&args.input)?;

    let corpus = load(&args.input)?;
    let comparison = match &args.comparison {
        Some(id) => corpus
            .iter()
            .find(|c| &c.comparison_id == id)
            .with_context(|| format!("comparison {id} not found in {}", args.input.display()))?,
        None if corpus.len() == 1 => &corpus[0],
        None => bail!("input holds {} comparisons; choose one with --comparison", corpus.len()),
    };

    let decision = evaluate_peek(&plan, &comparison.a.scores, &comparison.b.scores, args.peek)?;
    let next_batch_size = match decision.action {
        PeekAction::Continue => plan.next_batch_size(args.peek),
        _ => None,
    };
    let record = DecisionRecord {
        comparison_id: comparison.comparison_id.clone(),
        plan: plan.label(),
        peek_index: decision.peek_index,
        action: decision.action,
        p_value: decision.p_value,
        per_look_alpha: plan.per_look_alpha,
        judgments_used: decision.judgments_used,
        next_batch_size,
    };
    println!("{}", serde_json::to_string_pretty(&record)?);
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_json(&dir.join("decision.json"), &record)?;
    }
    manifest.emit(args.out.as_deref())?;
    Ok(exit_code(decision.action))
}

#[derive(Debug, Serialize)]
struct SavingsRow {
    reference: String,
    alternative: PlanKind,
    power_level: Option<f64>,
    spend_ref: Option<f64>,
    spend_alt: Option<f64>,
    savings_fraction: Option<f64>,
    note: Option<String>,
}

fn write_curves<W: Write>(sink: W, curves: &[(PlanKind, &str, Vec<CurvePoint>)]) -> Result<()> {
    let mut w = BufWriter::new(sink);
    writeln!(w, "kind,split,budget,mean_power,mean_spend,comparisons")?;
    for (kind, split, curve) in curves {
        for p in curve {
            writeln!(
                w,
                "{kind},{split},{},{},{},{}",
                p.budget, p.mean_power, p.mean_spend, p.comparisons
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<u8> {
    let seed = resolve_seed(args.seed);
    let corpus = load(&args.input)?;
    let mut budgets = args.budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let mut kinds = args.kind.clone();
    kinds.dedup();

    let mut plans = Vec::new();
    for &kind in &kinds {
        plans.extend(harness::plans_for(kind, &budgets, args.peeks, args.alpha)?);
    }

    let workers = args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let report = pool.install(|| harness::benchmark(&corpus, &plans, args.reps, seed))?;

    let out = &args.out;
    ensure_dir(out)?;
    fs::write(out.join("report.json"), report.to_json()? + "\n")?;
    report.write_csv(File::create(out.join("report.csv"))?)?;

    let histogram = harness::difference_histogram(&corpus, args.bin_width)?;
    let mut h = BufWriter::new(File::create(out.join("histogram.csv"))?);
    writeln!(h, "lower,upper,count")?;
    for bin in &histogram {
        writeln!(h, "{},{},{}", bin.lower, bin.upper, bin.count)?;
    }
    h.flush()?;

    let cut = args.split_threshold;
    let mut curves = Vec::new();
    for &kind in &kinds {
        curves.push((kind, "all", harness::curve_from_report(&report, kind, |_| true)));
        curves.push((kind, "small", harness::curve_from_report(&report, kind, |d| d.abs() < cut)));
        curves.push((kind, "large", harness::curve_from_report(&report, kind, |d| d.abs() >= cut)));
    }
    write_curves(File::create(out.join("curves.csv"))?, &curves)?;

    let mut savings = Vec::new();
    if kinds.contains(&PlanKind::Fixed) {
        let fixed = harness::curve_from_report(&report, PlanKind::Fixed, |_| true);
        for &alt in kinds.iter().filter(|&&k| k != PlanKind::Fixed) {
            let alt_curve = harness::curve_from_report(&report, alt, |_| true);
            for point in &fixed {
                let reference = format!("fixed@{}", point.budget);
                savings.push(match harness::savings_at_equal_power(&fixed, point.budget, &alt_curve) {
                    Ok(s) => SavingsRow {
                        reference,
                        alternative: alt,
                        power_level: Some(s.power_level),
                        spend_ref: Some(s.budget_ref),
                        spend_alt: Some(s.budget_alt),
                        savings_fraction: Some(s.savings_fraction),
                        note: None,
                    },
                    Err(e) => SavingsRow {
                        reference,
                        alternative: alt,
                        power_level: None,
                        spend_ref: None,
                        spend_alt: None,
                        savings_fraction: None,
                        note: Some(e.to_string()),
                    },
                });
            }
        }
    }
    write_json(&out.join("savings.json"), &savings)?;

    let mut manifest = RunManifest::new(
        "simulate",
        json!({
            "input": args.input,
            "kinds": kinds,
            "budgets": budgets,
            "peeks": args.peeks,
            "alpha": args.alpha,
            "reps": args.reps,
            "split_threshold": args.split_threshold,
            "bin_width": args.bin_width,
            "workers": workers,
        }),
    )
    .with_seed(seed);
    manifest.digest(&args.input)?;
    manifest.emit(Some(out))?;

    println!("seed {seed}");
    for (kind, split, curve) in curves.iter().filter(|c| c.1 == "all") {
        for p in curve {
            println!(
                "{kind:<17} {split:<5} budget {:>6}  power {:.3}  spend {:.1}",
                p.budget, p.mean_power, p.mean_spend
            );
        }
    }
    for s in &savings {
        if let Some(f) = s.savings_fraction {
            println!("savings {} vs {}: {:.1}%", s.reference, s.alternative, 100.0 * f);
        }
    }
    Ok(EXIT_OK)
}

pub fn de(args: &DeArgs) -> Result<u8> {
    let inputs = match (args.reducible, args.gamma) {
        (Some(r), None) => EfficiencyInputs::from_reducible(args.rho, r)?,
        (None, Some(g)) => EfficiencyInputs::new(args.rho, g)?,
        _ => unreachable!("clap enforces exactly one of --reducible/--gamma"),
    };
    let value = data_efficiency(inputs)?;
    println!("{value:.4}");
    RunManifest::new(
        "de",
        json!({ "rho": args.rho, "reducible": args.reducible, "gamma": inputs.gamma }),
    )
    .emit(None)?;
    Ok(EXIT_OK)
}

pub fn synth(args: &SynthArgs) -> Result<u8> {
    let seed = resolve_seed(args.seed);
    let spec = SyntheticCorpusSpec {
        comparisons: args.comparisons,
        per_system: args.per_system,
        mean: args.mean,
        variance: args.variance,
        ..SyntheticCorpusSpec::default()
    };
    let corpus = harness::synthetic_corpus(&spec, seed)?;
    let data: Vec<ComparisonData> = corpus.into_iter().map(|c| c.data).collect();
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_judgments(BufWriter::new(file), &data)?;
    let manifest = RunManifest::new("synth", json!({ "spec": spec, "out": args.out })).with_seed(seed);
    manifest.emit(None)?;
    Ok(EXIT_OK)
}
