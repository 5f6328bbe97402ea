//! Exact permutation-symmetric decay of the (1/2, 3/2) system after an
//! R pulse, showing the excitations left in dark states.
//!
//! `cargo run --example exact_decay -- [N] [theta0/pi]`

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use superrad::angular::Axis;
use superrad::generator::GeneratorSpec;
use superrad::lindblad::{ed_basis, evolve, Coherences, EvolveOptions, PSDensityMatrix};
use superrad::ode::uniform_grid;
use superrad::operators::Channel;
use superrad::semiclassical::pulse_single_atom;
use superrad::spectra::six_level;
use superrad::symspace::{coherent_state, coherent_support, Limits};

fn main() -> superrad::error::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: u32 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(6);
    let theta0: f64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1.0);

    let level = six_level();
    let r = Channel::R.raising(&level, Axis::Par);
    // (|g−1/2⟩ − |g1/2⟩)/√2 in the ∥ basis
    let mut psi = vec![Complex64::new(0.0, 0.0); level.ell()];
    psi[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    psi[1] = Complex64::new(-FRAC_1_SQRT_2, 0.0);
    let psi = pulse_single_atom(&psi, &r, theta0 * PI, 0.0);

    let gen = GeneratorSpec::new(level, Axis::Par, &[Channel::L, Channel::R]);
    let basis = ed_basis(&gen, coherent_support(&level, n, &psi), n, &Limits::default())?;
    println!("N = {n}, θ0 = {theta0}π, basis size {}", basis.len());
    let v = coherent_state(&basis, &psi)?;
    let rho = PSDensityMatrix::from_pure(basis, &v, Some(&gen), Coherences::SectorDiagonal)?;

    // times in units of 1/Γ; print in units of 1/(NΓ)
    let grid = uniform_grid(200.0 / n as f64, 20);
    let ev = evolve(&rho, &gen, &grid, &EvolveOptions::default())?;
    println!("{:>8} {:>9} {:>11}", "NΓt", "n_e", "⟨R⁺R⁻⟩");
    for s in &ev.samples {
        println!("{:>8.1} {:>9.5} {:>11.4e}", s.time * n as f64, s.n_e, s.emission[3]);
    }
    for w in &ev.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
