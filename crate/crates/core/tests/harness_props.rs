use dasense_core::data::{summarize, ComparisonData, System};
use dasense_core::harness::{
    benchmark, curve_from_report, difference_histogram, plans_for, power_curve, synthetic_corpus,
    BootstrapIndex, BootstrapSampler, DifferenceMixture, SyntheticCorpusSpec,
};
use dasense_core::power::fit_gamma_model;
use dasense_core::sequential::PlanKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

fn gamma_pools(id: &str, mean_a: f64, mean_b: f64, n: usize, seed: u64) -> ComparisonData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = fit_gamma_model(mean_a, 27.0 * 27.0).unwrap().sampler();
    let b = fit_gamma_model(mean_b, 27.0 * 27.0).unwrap().sampler();
    ComparisonData::from_scores(
        id,
        "SYN",
        (0..n).map(|_| a.sample(&mut rng)).collect(),
        (0..n).map(|_| b.sample(&mut rng)).collect(),
    )
}

#[test]
fn identical_pools_have_nominal_power() {
    let pool = gamma_pools("null", 74.0, 74.0, 600, 1).a;
    let c = ComparisonData { b: pool.clone(), a: pool, ..gamma_pools("null", 74.0, 74.0, 1, 1) };
    let mut plans = plans_for(PlanKind::Fixed, &[1200], 1, 0.05).unwrap();
    plans.extend(plans_for(PlanKind::Interim, &[1200], 3, 0.05).unwrap());
    plans.extend(plans_for(PlanKind::InterimFutility, &[1200], 3, 0.05).unwrap());
    let report = benchmark(&[c], &plans, 1000, 7).unwrap();
    for row in &report.rows {
        assert!((row.power - 0.05).abs() <= 0.02, "{}: {}", row.plan, row.power);
        assert_eq!(row.true_diff, 0.0);
    }
}

#[test]
fn futility_rarely_matters_for_large_differences() {
    let c = gamma_pools("big", 80.0, 70.0, 600, 2);
    let mut plans = plans_for(PlanKind::Interim, &[1200], 3, 0.05).unwrap();
    plans.extend(plans_for(PlanKind::InterimFutility, &[1200], 3, 0.05).unwrap());
    let report = benchmark(&[c], &plans, 1000, 8).unwrap();
    assert!((report.rows[0].power - report.rows[1].power).abs() <= 0.05);
}

#[test]
fn power_rises_with_budget() {
    let c = gamma_pools("mid", 76.0, 73.0, 600, 3);
    let curve = power_curve(&[c], PlanKind::Fixed, &[400, 1200, 3600], 1, 0.05, 1000, 9).unwrap();
    assert!(curve.windows(2).all(|w| w[0].mean_power <= w[1].mean_power), "{curve:?}");
    assert_eq!(curve.iter().map(|p| p.mean_spend).collect::<Vec<_>>(), vec![400.0, 1200.0, 3600.0]);
}

#[test]
fn futility_saves_on_near_null_pairs() {
    let spec = SyntheticCorpusSpec { comparisons: 40, per_system: 300, ..Default::default() };
    let corpus: Vec<ComparisonData> = synthetic_corpus(&spec, 5).unwrap().into_iter().map(|s| s.data).collect();
    let mut plans = plans_for(PlanKind::Interim, &[1200], 3, 0.05).unwrap();
    plans.extend(plans_for(PlanKind::InterimFutility, &[1200], 3, 0.05).unwrap());
    let report = benchmark(&corpus, &plans, 200, 10).unwrap();
    let small = |d: f64| d.abs() < 1.0;
    let interim = curve_from_report(&report, PlanKind::Interim, small);
    let futile = curve_from_report(&report, PlanKind::InterimFutility, small);
    assert!(futile[0].mean_spend < interim[0].mean_spend);

    // Mean over the corpus equals the plain mean of per-comparison rows.
    let all = curve_from_report(&report, PlanKind::Interim, |_| true);
    let rows: Vec<f64> = report.rows_for(PlanKind::Interim, 1200).map(|r| r.power).collect();
    assert_eq!(all[0].mean_power, rows.iter().sum::<f64>() / rows.len() as f64);
    assert_eq!(all[0].comparisons, 40);
}

#[test]
fn oversampling_stays_uniform() {
    let c = ComparisonData::from_scores("u", "L", vec![10.0, 20.0, 20.0, 30.0, 40.0, 50.0], vec![1.0]);
    let index = BootstrapIndex::new(&c).unwrap();
    let mut sampler = BootstrapSampler::new(&index, 3, &[0, 0]);
    let draws = 60_000;
    let mut counts = [0usize; 6];
    for _ in 0..draws {
        counts[sampler.next_position(System::A)] += 1;
    }
    let expected = draws as f64 / 6.0;
    let chi2: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-square with 5 degrees of freedom.
    assert!(chi2 < 20.52, "chi2 {chi2}, counts {counts:?}");
}

#[test]
fn histogram_follows_mixture_weights() {
    let spec = SyntheticCorpusSpec {
        comparisons: 4000,
        per_system: 4,
        mixture: DifferenceMixture::dense_small_with_tail(),
        ..Default::default()
    };
    let corpus = synthetic_corpus(&spec, 6).unwrap();
    let data: Vec<ComparisonData> = corpus.iter().map(|s| s.data.clone()).collect();
    let hist = difference_histogram(&data, 0.5).unwrap();
    let below: usize = hist.iter().filter(|b| b.upper <= 1.5).map(|b| b.count).sum();
    let n = spec.comparisons as f64;
    let se = (0.65f64 * 0.35 / n).sqrt();
    assert!((below as f64 / n - 0.65).abs() < 4.0 * se, "{below}");
    assert_eq!(hist.iter().map(|b| b.count).sum::<usize>(), spec.comparisons);
    // The generator's own component labels agree with the bins.
    let labelled = corpus.iter().filter(|s| s.component == 0).count();
    assert_eq!(labelled, below);
    assert!(corpus.iter().all(|s| (summarize(&s.data).unwrap().diff - s.declared_diff).abs() < 1e-9));
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let spec = SyntheticCorpusSpec { comparisons: 6, per_system: 200, ..Default::default() };
    let corpus: Vec<ComparisonData> = synthetic_corpus(&spec, 7).unwrap().into_iter().map(|s| s.data).collect();
    let mut plans = plans_for(PlanKind::Fixed, &[600], 1, 0.05).unwrap();
    plans.extend(plans_for(PlanKind::InterimFutility, &[600, 1200], 3, 0.05).unwrap());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| benchmark(&corpus, &plans, 50, 11).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one.to_json().unwrap(), run(3).to_json().unwrap());

    // Adding a plan leaves existing rows untouched.
    let mut more = plans.clone();
    more.extend(plans_for(PlanKind::Interim, &[900], 3, 0.05).unwrap());
    let bigger = benchmark(&corpus, &more, 50, 11).unwrap();
    for row in &one.rows {
        assert!(bigger.rows.contains(row));
    }
}
