//! Search for product states that are dark to both Π and Σ decay.
//!
//! `cargo run --example dark_search -- [excited fraction]`

use superrad::angular::Axis;
use superrad::level::LevelStructure;
use superrad::operators::Channel;
use superrad::potential::{find_mf_dark_two_pol, DarkSearch};

fn main() -> superrad::error::Result<()> {
    let target: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.25);
    let level = LevelStructure::from_twice(3, 3)?;
    let search = DarkSearch {
        channels: [Channel::Pi.raising(&level, Axis::V), Channel::Sigma.raising(&level, Axis::V)],
        excited_fraction: Some(target),
        support: Vec::new(),
        starts: 64,
        seed: 1,
    };
    let report = find_mf_dark_two_pol(&search)?;
    println!("{} solutions, {} starts did not converge", report.solutions.len(), report.failed_starts);
    for s in report.solutions.iter().take(5) {
        println!(
            "n_e = {:.4}, residuals {:.1e} {:.1e}, curvatures {:+.4} {:+.4}, {:?}",
            s.excited_fraction, s.residuals[0], s.residuals[1], s.curvatures[0], s.curvatures[1], s.stability
        );
    }
    Ok(())
}
