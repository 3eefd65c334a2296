//! Prints Monte Carlo Pocock nominal levels, the source of the built-in table.
//!
//! cargo run --release -p dasense-core --example pocock_table [alpha] [reps] [max_k]

use dasense_core::sequential::pocock_monte_carlo;

fn main() {
    let mut args = std::env::args().skip(1);
    let alpha: f64 = args.next().map_or(0.05, |a| a.parse().expect("alpha"));
    let reps: usize = args.next().map_or(10_000_000, |a| a.parse().expect("reps"));
    let max_k: usize = args.next().map_or(5, |a| a.parse().expect("max_k"));
    println!("K,critical_z,per_look_alpha,achieved_fpr");
    for k in 1..=max_k {
        let est = pocock_monte_carlo(k, alpha, reps, 20_231_017 + k as u64).expect("valid inputs");
        println!("{k},{:.5},{:.5},{:.6}", est.critical_z, est.per_look_alpha, est.achieved_fpr);
    }
}
