//! Superradiance potential of a driven ground state: stationary points,
//! delay-time orders and the gradient-flow endpoint.
//!
//! `cargo run --example potential -- [theta0/pi]`

use std::f64::consts::PI;

use superrad::angular::Axis;
use superrad::level::LevelStructure;
use superrad::operators::Channel;
use superrad::potential::{delay_time, orthogonal_curvature, potential_from_state, StationaryKind};
use superrad::semiclassical::{basis_state, pulse_single_atom, OneBodyState};

fn main() -> superrad::error::Result<()> {
    let theta0: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3.0);

    // |g−3/2⟩_V driven with horizontal polarization
    let level = LevelStructure::from_twice(3, 3)?;
    let psi = basis_state(&level, Axis::V, level.parse_label("g-3/2")?, Axis::V);
    let sigma = Channel::Sigma.raising(&level, Axis::V);
    let pot = potential_from_state(&level, Axis::V, &psi, &sigma, vec![1.0])?;

    for t in &pot.terms {
        println!("term r = {:.4}, c = {:.4}, φ = {:.4}", t.radius, t.coupling, t.phase);
    }
    println!("{:>10} {:>8} {:>6} {:>9}", "θ/π", "V", "order", "kind");
    for p in pot.stationary_points(0.0, 4.0 * PI) {
        let kind = match p.kind {
            StationaryKind::Minimum => "minimum",
            StationaryKind::Maximum => "maximum",
            StationaryKind::Saddle => "saddle",
            StationaryKind::Flat => "flat",
        };
        println!("{:>10.5} {:>8.4} {:>6} {kind:>9}", p.theta / PI, p.value, p.order);
        if p.kind != StationaryKind::Minimum {
            let d = delay_time(&pot, p.theta, 1e4)?;
            println!("{:>10} delay order n = {}, NΓt_D ~ {:.3e} at N = 10⁴", "", d.order, d.scaled_delay);
        }
    }

    let end = pot.flow_endpoint(theta0 * PI);
    println!("θ0 = {theta0}π flows to θ = {:.4}π with n_e = {:.4}", end.theta / PI, pot.excited_fraction(end.theta));

    let pi = Channel::Pi.raising(&level, Axis::V);
    let start = OneBodyState::homogeneous(level, Axis::V, &pulse_single_atom(&psi, &sigma, theta0 * PI, 0.0), 1.0)?;
    let u = orthogonal_curvature(&start, &pi)?;
    println!("curvature of the Π potential at θ0: {:.4} ({})", u.curvature, if u.curvature < 0.0 { "unstable" } else { "stable" });
    Ok(())
}
