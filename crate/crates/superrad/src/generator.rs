//! Master-equation generator: collective decay channels with rate Γ, the
//! elastic interaction χ, and one-body Hamiltonians (Zeeman shifts, Rabi
//! drives).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::Axis;
use crate::error::{Error, Result};
use crate::level::{LevelStructure, Manifold};
use crate::operators::{operator_in_basis, Channel, CollectiveOp, Transition};

/// Elastic and dissipative couplings after eliminating a cavity mode with
/// coupling `g_c`, detuning `Δ_c` and linewidth `κ`.
pub fn chi_gamma(g_c: f64, delta_c: f64, kappa: f64) -> Result<(f64, f64)> {
    if kappa <= 0.0 || !kappa.is_finite() {
        return Err(Error::domain(format!("cavity linewidth must be positive, got {kappa}")));
    }
    let den = delta_c * delta_c + 0.25 * kappa * kappa;
    Ok((g_c * g_c * delta_c / den, g_c * g_c * kappa / den))
}

/// Linear Zeeman shifts `δ_g Σ m σ_gg + δ_e Σ m σ_ee` in the V basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Zeeman {
    pub delta_g: f64,
    pub delta_e: f64,
}

impl Zeeman {
    /// `δ_g = (2/3) δ_e ≡ δ_z`.
    pub fn single_knob(delta_z: f64) -> Self {
        Zeeman {
            delta_g: delta_z,
            delta_e: 1.5 * delta_z,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.delta_g == 0.0 && self.delta_e == 0.0
    }

    pub fn hamiltonian(&self, level: &LevelStructure, axis: Axis) -> CollectiveOp {
        let terms = (0..level.ell()).map(|i| {
            let lv = level.level(i);
            let d = match lv.manifold {
                Manifold::Ground => self.delta_g,
                Manifold::Excited => self.delta_e,
            };
            Transition {
                to: i,
                from: i,
                amp: Complex64::new(d * lv.m.value(), 0.0),
            }
        });
        operator_in_basis(&CollectiveOp::new(*level, Axis::V, terms), axis)
    }
}

/// `H_Ω = (Ω D⁺ + Ω* D⁻)/2`.
pub fn drive_hamiltonian(d_plus: &CollectiveOp, omega: Complex64) -> CollectiveOp {
    let half = 0.5 * omega;
    let up = d_plus.scaled(half);
    let down = d_plus.adjoint().scaled(half.conj());
    up.plus(&down).expect("a raising operator and its adjoint share level and axis")
}

/// Everything that enters the right-hand side of the master equation.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub level: LevelStructure,
    pub axis: Axis,
    pub gamma: f64,
    pub chi: f64,
    /// Raising operators `D⁺_γ`; each contributes a jump `√Γ D⁻_γ`.
    pub channels: Vec<CollectiveOp>,
    /// One-body Hamiltonian (Zeeman, drive, …).
    pub hamiltonian: CollectiveOp,
}

impl GeneratorSpec {
    pub fn new(level: LevelStructure, axis: Axis, channels: &[Channel]) -> Self {
        GeneratorSpec {
            level,
            axis,
            gamma: 1.0,
            chi: 0.0,
            channels: channels.iter().map(|c| c.raising(&level, axis)).collect(),
            hamiltonian: CollectiveOp::zero(level, axis),
        }
    }

    pub fn with_rates(mut self, gamma: f64, chi: f64) -> Self {
        self.gamma = gamma;
        self.chi = chi;
        self
    }

    pub fn with_zeeman(mut self, z: Zeeman) -> Self {
        self.add_hamiltonian(&z.hamiltonian(&self.level, self.axis));
        self
    }

    pub fn with_drive(mut self, d_plus: &CollectiveOp, omega: Complex64) -> Self {
        self.add_hamiltonian(&drive_hamiltonian(&operator_in_basis(d_plus, self.axis), omega));
        self
    }

    fn add_hamiltonian(&mut self, h: &CollectiveOp) {
        self.hamiltonian = self
            .hamiltonian
            .plus(&operator_in_basis(h, self.axis))
            .expect("hamiltonian terms share level and axis");
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            errs.push(format!("Γ must be finite and non-negative, got {}", self.gamma));
        }
        if !self.chi.is_finite() {
            errs.push(format!("χ must be finite, got {}", self.chi));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if c.axis != self.axis || c.level != self.level {
                errs.push(format!("channel {i} uses a different basis"));
            }
        }
        let h = self.hamiltonian.single_atom_matrix();
        if (&h - h.adjoint()).norm() > 1e-12 {
            errs.push("one-body Hamiltonian is not Hermitian".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn hamiltonian_matrix(&self) -> DMatrix<Complex64> {
        self.hamiltonian.single_atom_matrix()
    }

    /// Single-atom matrices of the raising operators.
    pub fn channel_matrices(&self) -> Vec<DMatrix<Complex64>> {
        self.channels.iter().map(|c| c.single_atom_matrix()).collect()
    }
}
