//! Mean field, truncated Wigner and second-order cumulants side by side
//! for the (1/2, 3/2) system.
//!
//! `cargo run --release --example semiclassical -- [N] [theta0/pi]`

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use superrad::angular::Axis;
use superrad::generator::GeneratorSpec;
use superrad::ode::{uniform_grid, Tolerances};
use superrad::operators::Channel;
use superrad::semiclassical::cumulant::{Cumulant, CumulantState};
use superrad::semiclassical::twa::{twa_ensemble, TwaOptions};
use superrad::semiclassical::{pulse_single_atom, Decoupling, MeanField, OneBodyState};
use superrad::spectra::six_level;

fn main() -> superrad::error::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: f64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(1000.0);
    let theta0: f64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1.5);

    let level = six_level();
    let r = Channel::R.raising(&level, Axis::Par);
    let mut psi = vec![Complex64::new(0.0, 0.0); level.ell()];
    psi[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    psi[1] = Complex64::new(-FRAC_1_SQRT_2, 0.0);
    let psi = pulse_single_atom(&psi, &r, theta0 * PI, 0.0);

    let gen = GeneratorSpec::new(level, Axis::Par, &[Channel::L, Channel::R]);
    // 30 units of NΓt
    let grid = uniform_grid(30.0 / n, 10);
    let tol = Tolerances::new(1e-8, 1e-10);

    let state = OneBodyState::homogeneous(level, Axis::Par, &psi, n)?;
    let mf = MeanField::new(&gen, state.groups.clone(), Decoupling::Factorized)?;
    let mean_field = mf.evolve(&state, &grid, &tol)?.samples;
    let twa = twa_ensemble(&mf, &psi, &grid, &TwaOptions::new(2000, 1))?;
    let cumulant = Cumulant::new(&gen, n, 1.0)?;
    let (second, _, _) = cumulant.evolve(&CumulantState::product(&psi, n), &grid, &tol)?;

    println!("N = {n}, θ0 = {theta0}π");
    println!("{:>6} {:>9} {:>9} {:>9}", "NΓt", "MF", "TWA", "cumulant");
    for ((a, b), c) in mean_field.iter().zip(&twa.samples).zip(&second) {
        println!("{:>6.1} {:>9.5} {:>9.5} {:>9.5}", a.time * n, a.n_e, b.n_e, c.n_e);
    }
    Ok(())
}
