use dasense_core::power::{fit_gamma_model, ModelSource};
use dasense_core::sequential::{
    make_plan, naive_peeking_fpr, pocock_monte_carlo, pocock_per_look_alpha, run_procedure, Outcome,
    PlanKind, ReplaySource, ScoreStream, SequentialData, SequentialPlan,
};

fn plan(kind: PlanKind, budget: usize, peeks: usize) -> SequentialPlan {
    make_plan(kind, budget, peeks, 0.05, None).unwrap()
}

#[test]
fn per_look_alpha_decreases_with_peeks() {
    let mut last = 1.0;
    for k in 1..=7 {
        let a = pocock_per_look_alpha(k, 0.05, 1_000_000, 99).unwrap();
        assert!(a < last, "K={k}: {a} !< {last}");
        assert!(a <= 0.05);
        last = a;
    }
}

#[test]
fn monte_carlo_agrees_with_table_at_other_seeds() {
    for (k, expected) in [(2, 0.0294), (3, 0.0221)] {
        let est = pocock_monte_carlo(k, 0.05, 2_000_000, 1234).unwrap();
        assert!((est.per_look_alpha - expected).abs() < 0.0008, "K={k}: {est:?}");
        assert!((est.achieved_fpr - 0.05).abs() <= 0.001);
    }
}

#[test]
fn non_default_alpha_uses_monte_carlo() {
    let a = pocock_per_look_alpha(3, 0.10, 1_000_000, 5).unwrap();
    // Pocock two-sided K=3 at alpha 0.10: c = 1.993, nominal level about 0.0463.
    assert!((a - 0.0463).abs() < 0.0015, "{a}");
}

#[test]
fn naive_peeking_inflates_error() {
    let one = naive_peeking_fpr(1, 0.05, 1_000_000, 8).unwrap();
    assert!((one - 0.05).abs() < 3.0 * (0.05f64 * 0.95 / 1e6).sqrt() + 1e-6, "{one}");
    let three = naive_peeking_fpr(3, 0.05, 1_000_000, 8).unwrap();
    assert!(three > 0.05 && three <= 1.0 - 0.95f64.powi(3), "{three}");
}

fn null_source(rep: u64) -> ScoreStream<ModelSource> {
    let m = fit_gamma_model(74.0, 27.0 * 27.0).unwrap();
    ScoreStream::new(ModelSource::new(&m, &m, 77, &[rep]))
}

#[test]
fn futility_under_the_null_keeps_size_and_saves_budget() {
    let p = plan(PlanKind::InterimFutility, 1200, 3);
    let runs = 3000;
    let (mut sig, mut spent) = (0, 0);
    for r in 0..runs {
        let res = run_procedure(&p, &mut null_source(r)).unwrap();
        sig += usize::from(res.outcome == Outcome::Significant);
        spent += res.judgments_spent;
        assert!(res.judgments_spent <= 1200);
    }
    let rate = sig as f64 / runs as f64;
    let se = (0.05f64 * 0.95 / runs as f64).sqrt();
    assert!((rate - 0.05).abs() < 3.0 * se, "rate {rate}");
    assert!((spent as f64 / runs as f64) < 1200.0);
}

#[test]
fn large_effects_stop_at_the_first_look() {
    let a = fit_gamma_model(80.0, 27.0 * 27.0).unwrap();
    let b = fit_gamma_model(60.0, 27.0 * 27.0).unwrap();
    let p = plan(PlanKind::Interim, 1200, 3);
    let runs = 500;
    let first = (0..runs)
        .filter(|&r| {
            let mut data = ScoreStream::new(ModelSource::new(&a, &b, 3, &[r]));
            run_procedure(&p, &mut data).unwrap().stopped_at_peek == 1
        })
        .count();
    assert!(first as f64 >= 0.95 * runs as f64, "{first}/{runs}");
}

#[test]
fn futility_is_pathwise_dominated_by_interim() {
    let a = fit_gamma_model(76.0, 700.0).unwrap();
    let b = fit_gamma_model(74.5, 700.0).unwrap();
    let interim = plan(PlanKind::Interim, 900, 3);
    let futile = plan(PlanKind::InterimFutility, 900, 3);
    for r in 0..400 {
        let x = run_procedure(&interim, &mut ScoreStream::new(ModelSource::new(&a, &b, 1, &[r]))).unwrap();
        let y = run_procedure(&futile, &mut ScoreStream::new(ModelSource::new(&a, &b, 1, &[r]))).unwrap();
        if y.outcome == Outcome::Significant {
            assert_eq!(x.outcome, Outcome::Significant);
        }
        assert!(y.judgments_spent <= x.judgments_spent);
        assert_eq!(x.judgments_spent == 900, x.outcome == Outcome::NotSignificant || x.stopped_at_peek == 3);
    }
}

#[test]
fn identical_inputs_give_identical_results() {
    let p = plan(PlanKind::InterimFutility, 300, 3);
    for r in 0..20 {
        let x = run_procedure(&p, &mut null_source(r)).unwrap();
        let y = run_procedure(&p, &mut null_source(r)).unwrap();
        assert_eq!(x, y);
    }
    let pools = (vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0], vec![2.0, 6.0, 5.0, 3.0]);
    let q = plan(PlanKind::Interim, 10, 2);
    let mut d1 = ScoreStream::new(ReplaySource::new(pools.0.clone(), pools.1.clone()));
    let mut d2 = ScoreStream::new(ReplaySource::new(pools.0, pools.1));
    assert_eq!(run_procedure(&q, &mut d1).unwrap(), run_procedure(&q, &mut d2).unwrap());
    assert_eq!(d1.collected(), (6, 4));
}
