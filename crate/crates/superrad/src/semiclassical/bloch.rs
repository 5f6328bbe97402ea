//! α-spin Bloch vectors of a one-body state for a multi-two-level operator.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::MultiTwoLevel;

use super::OneBodyState;

/// In-plane reference direction for the parallel/perpendicular split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frame {
    /// Unit vector along `Ω⃗ = (Re Ω, −Im Ω)` for a drive phase `φ`, i.e.
    /// `Ω ∝ e^{iφ}`.
    Drive { phase: f64 },
    /// Along the torque vector `D⃗_⊥ = (−D_y, D_x)`.
    Dipole,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlochSet {
    /// `(S^x_α, S^y_α, S^z_α)`.
    pub spins: Vec<[f64; 3]>,
    pub radii: Vec<f64>,
    pub couplings: Vec<f64>,
    pub labels: Vec<Option<(usize, usize)>>,
    /// `D⃗ = Σ_α c_α S⃗_α` restricted to the plane.
    pub dipole: [f64; 2],
    /// In-plane unit vector used for the split.
    pub direction: [f64; 2],
    pub parallel: Vec<f64>,
    pub perpendicular: Vec<f64>,
    /// Set when the dipole frame was requested but `|D⃗|` vanished.
    pub frame_fallback: bool,
}

impl BlochSet {
    /// `S^⊥_α + i S^z_α`.
    pub fn polar(&self, alpha: usize) -> Complex64 {
        Complex64::new(self.perpendicular[alpha], self.spins[alpha][2])
    }
}

/// Unit vector of a drive with phase `φ` (`Ω = |Ω| e^{iφ}`).
pub fn drive_direction(phase: f64) -> [f64; 2] {
    // Ω = Ω_x − iΩ_y
    [phase.cos(), -phase.sin()]
}

/// Project `state` onto the pairs of `dec`. `fallback` is used when the
/// dipole frame is undefined.
pub fn bloch_projection(state: &OneBodyState, dec: &MultiTwoLevel, frame: Frame, fallback_phase: f64) -> Result<BlochSet> {
    if dec.level != state.level {
        return Err(Error::domain("decomposition and state use different level structures"));
    }
    let dec = dec.in_basis(state.axis);
    let p = state.total();
    let mut spins = Vec::with_capacity(dec.pairs.len());
    let mut dipole = [0.0; 2];
    for pair in &dec.pairs {
        let g: &DVector<Complex64> = &pair.ground;
        let e: &DVector<Complex64> = &pair.excited;
        // ⟨σ_{ẽ g̃}⟩ = g̃† P ẽ
        let up = (g.adjoint() * &p * e)[(0, 0)];
        let ee = (e.adjoint() * &p * e)[(0, 0)].re;
        let gg = (g.adjoint() * &p * g)[(0, 0)].re;
        let s = [up.re, up.im, 0.5 * (ee - gg)];
        dipole[0] += pair.coupling * s[0];
        dipole[1] += pair.coupling * s[1];
        spins.push(s);
    }
    let norm = dipole[0].hypot(dipole[1]);
    let (direction, frame_fallback) = match frame {
        Frame::Drive { phase } => (drive_direction(phase), false),
        Frame::Dipole if norm > 1e-12 * state.n_atoms() => ([-dipole[1] / norm, dipole[0] / norm], false),
        Frame::Dipole => (drive_direction(fallback_phase), true),
    };
    // ẑ × n̂
    let perp_dir = [-direction[1], direction[0]];
    let parallel = spins.iter().map(|s| s[0] * direction[0] + s[1] * direction[1]).collect();
    let perpendicular = spins.iter().map(|s| s[0] * perp_dir[0] + s[1] * perp_dir[1]).collect();
    Ok(BlochSet {
        radii: spins.iter().map(|s| (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt()).collect(),
        spins,
        couplings: dec.couplings(),
        labels: dec.pairs.iter().map(|p| p.labels).collect(),
        dipole,
        direction,
        parallel,
        perpendicular,
        frame_fallback,
    })
}
