//! Decay-rate spectrum and dark-state census of the (1/2, 3/2) system.
//!
//! `cargo run --example dark_spectrum`

use superrad::spectra::{analytic_dark_count, analytic_dark_states, circular_spectrum, renyi_sparse, six_level};
use superrad::symspace::Limits;

fn main() -> superrad::error::Result<()> {
    let level = six_level();
    println!("{:>3} {:>6} {:>6} {:>10}", "N", "states", "dark", "R-only dark");
    for n in 1..=6u32 {
        let spec = circular_spectrum(level, n, |_| true, &Limits::default())?;
        let dark: usize = spec.census().values().map(|r| r.dark).sum();
        println!("{n:>3} {:>6} {dark:>6} {:>10}", spec.records.len(), analytic_dark_count(n));
    }

    // rates of the first few bright states at N = 4, k = 1
    let spec = circular_spectrum(level, 4, |_| true, &Limits::default())?;
    let mut rates: Vec<f64> = spec.records.iter().filter(|r| r.k == 1).map(|r| r.rate).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    println!("N = 4, k = 1 distinct rates (units of Γ): {rates:.4?}");

    let n = 10;
    for ((k, n_a), state) in analytic_dark_states(n)?.into_iter().take(5) {
        println!("dark state k = {k}, N_A = {n_a}: R1 = {:.4}", renyi_sparse(&state)?);
    }
    Ok(())
}
