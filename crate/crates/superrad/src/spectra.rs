//! Spectrum of the collective decay operator `Σ_γ D⁺_γ D⁻_γ`, block by
//! conserved sector, plus dark-state constructions and the single-particle
//! Renyi entropy.
//!
//! `H_eff = (χ − iΓ/2) Σ_γ D⁺_γ D⁻_γ`, so one Hermitian eigenproblem gives
//! both the energy shift `ε = χ λ` and the decay rate `γ = Γ λ`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::angular::Axis;
use crate::error::{Error, Result};
use crate::level::LevelStructure;
use crate::operators::{Channel, CollectiveOp};
use crate::symspace::{
    one_body_mixed, one_body_pure, product_matrix, Csr, Limits, Move, Occupation, PSBasis, SectorKey, SparseState,
};

/// Eigenvalues below `DARK_TOL · N` count as dark.
pub const DARK_TOL: f64 = 1e-10;

/// One diagonal block of `Σ D⁺D⁻`.
#[derive(Clone, Debug)]
pub struct Block {
    pub key: SectorKey,
    pub basis: PSBasis,
    pub matrix: DMatrix<Complex64>,
}

#[derive(Clone, Debug)]
pub struct EigenRecord {
    /// Index into [`Spectrum::blocks`].
    pub block: usize,
    pub k: u32,
    pub sector: SectorKey,
    /// Eigenvalue of `Σ D⁺D⁻`: decay rate in units of Γ, shift in units of χ.
    pub rate: f64,
    pub state: DVector<Complex64>,
    pub renyi: f64,
}

impl EigenRecord {
    pub fn decay_rate(&self, gamma: f64) -> f64 {
        gamma * self.rate
    }

    pub fn energy_shift(&self, chi: f64) -> f64 {
        chi * self.rate
    }

    pub fn is_dark(&self, n_atoms: u32) -> bool {
        self.rate < DARK_TOL * n_atoms as f64
    }
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub n_atoms: u32,
    pub blocks: Vec<Block>,
    pub records: Vec<EigenRecord>,
}

/// Per-`k` eigenstate counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CensusRow {
    pub total: usize,
    pub dark: usize,
}

impl Spectrum {
    pub fn census(&self) -> BTreeMap<u32, CensusRow> {
        let mut out: BTreeMap<u32, CensusRow> = BTreeMap::new();
        for r in &self.records {
            let row = out.entry(r.k).or_default();
            row.total += 1;
            if r.is_dark(self.n_atoms) {
                row.dark += 1;
            }
        }
        out
    }

    /// Dark states with at least one excitation.
    pub fn excited_dark_count(&self) -> usize {
        self.records.iter().filter(|r| r.k > 0 && r.is_dark(self.n_atoms)).count()
    }

    pub fn max_block_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.basis.len()).max().unwrap_or(0)
    }

    pub fn max_block_dim_at(&self, k: u32) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.key.n_e == Some(k))
            .map(|b| b.basis.len())
            .max()
            .unwrap_or(0)
    }
}

/// The two circular channels in the ∥ basis.
pub fn circular_channels(level: &LevelStructure) -> Vec<CollectiveOp> {
    vec![Channel::L.raising(level, Axis::Par), Channel::R.raising(level, Axis::Par)]
}

/// Moves generated by `D⁺D⁻` for each channel.
pub fn decay_pair_moves(channels: &[CollectiveOp]) -> Vec<Move> {
    let mut out = Vec::new();
    for ch in channels {
        for lo in &ch.terms {
            for hi in &ch.terms {
                // lowering takes lo.to ← lo.from in reverse, then raising
                out.push(Move(vec![(lo.from, lo.to), (hi.to, hi.from)]));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.dedup();
    out
}

/// Sparse `Σ_γ D⁺_γ D⁻_γ` on a basis.
pub fn decay_operator(basis: &PSBasis, channels: &[CollectiveOp]) -> Result<Csr> {
    let mut acc = Csr::zeros(basis.len(), basis.len());
    for ch in channels {
        acc = acc.plus(&product_matrix(ch, &ch.adjoint(), basis, false)?);
    }
    Ok(acc)
}

/// Split `Σ D⁺D⁻` on `basis` into its connected blocks.
pub fn effective_blocks(basis: &PSBasis, channels: &[CollectiveOp], limits: &Limits) -> Result<Vec<Block>> {
    let h = decay_operator(basis, channels)?;
    let labels = basis.components(&decay_pair_moves(channels));
    let n_blocks = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut local = vec![0usize; basis.len()];
    for m in &members {
        for (p, &i) in m.iter().enumerate() {
            local[i] = p;
        }
        if m.len() > limits.dense_block_max {
            return Err(Error::Resource {
                what: "dense spectrum block".into(),
                requested: m.len(),
                cap: limits.dense_block_max,
            });
        }
    }
    let mut mats: Vec<DMatrix<Complex64>> = members.iter().map(|m| DMatrix::zeros(m.len(), m.len())).collect();
    for (r, c, v) in h.triplets() {
        debug_assert_eq!(labels[r], labels[c]);
        mats[labels[r]][(local[r], local[c])] += v;
    }
    let level = *basis.level();
    let mut blocks: Vec<Block> = members
        .iter()
        .zip(mats)
        .map(|(m, matrix)| Block {
            key: SectorKey::of(&level, basis.state(m[0])),
            basis: basis.subset(m),
            matrix,
        })
        .collect();
    blocks.sort_by(|a, b| a.key.cmp(&b.key).then_with(|| b.basis.state(0).cmp(a.basis.state(0))));
    Ok(blocks)
}

/// Diagonalize every block.
pub fn eigendecompose(blocks: Vec<Block>, n_atoms: u32) -> Result<Spectrum> {
    let per_block: Vec<Result<Vec<EigenRecord>>> = blocks
        .par_iter()
        .enumerate()
        .map(|(bi, b)| {
            let eig = b.matrix.clone().symmetric_eigen();
            if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("eigensolver failed on block {:?}", b.key)));
            }
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            order
                .into_iter()
                .map(|j| {
                    let state = canonical_phase(eig.eigenvectors.column(j).clone_owned());
                    let renyi = renyi_pure(&b.basis, &state)?;
                    Ok(EigenRecord {
                        block: bi,
                        k: b.key.n_e.unwrap_or(0),
                        sector: b.key,
                        rate: eig.eigenvalues[j].max(0.0),
                        state,
                        renyi,
                    })
                })
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    for r in per_block {
        records.extend(r?);
    }
    Ok(Spectrum {
        n_atoms,
        blocks,
        records,
    })
}

/// Full circular-channel spectrum, optionally on a filtered basis.
pub fn circular_spectrum(
    level: LevelStructure,
    n_atoms: u32,
    keep: impl Fn(&[u32]) -> bool,
    limits: &Limits,
) -> Result<Spectrum> {
    let basis = PSBasis::enumerate_where(level, Axis::Par, n_atoms, keep, limits)?;
    let blocks = effective_blocks(&basis, &circular_channels(&level), limits)?;
    eigendecompose(blocks, n_atoms)
}

fn canonical_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    if let Some((_, &big)) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()).then(b.0.cmp(&a.0)))
    {
        if big.norm() > 0.0 {
            let ph = big.conj() / big.norm();
            v.iter_mut().for_each(|x| *x *= ph);
        }
    }
    v
}

/// `R₁ = −log₄ tr ρ₁²` from the collective one-body matrix `P = N ρ₁`.
pub fn renyi_from_one_body(p: &DMatrix<Complex64>, n_atoms: u32) -> f64 {
    let n = n_atoms as f64;
    let purity: f64 = p.iter().map(|x| x.norm_sqr()).sum::<f64>() / (n * n);
    (-purity.ln() / 4f64.ln()).max(0.0)
}

pub fn renyi_pure(basis: &PSBasis, psi: &DVector<Complex64>) -> Result<f64> {
    let norm = psi.norm_squared();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!("state norm² = {norm}, expected 1")));
    }
    Ok(renyi_from_one_body(&one_body_pure(basis, psi), basis.n_atoms()))
}

pub fn renyi_mixed(basis: &PSBasis, rho: &DMatrix<Complex64>) -> Result<f64> {
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!("density matrix trace = {tr}, expected 1")));
    }
    Ok(renyi_from_one_body(&one_body_mixed(basis, rho), basis.n_atoms()))
}

pub fn renyi_sparse(state: &SparseState) -> Result<f64> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!("state norm = {norm}, expected 1")));
    }
    Ok(renyi_from_one_body(&state.one_body()?, state.n_atoms))
}

/// The six-level structure (1/2, 3/2).
pub fn six_level() -> LevelStructure {
    LevelStructure::from_twice(1, 3).expect("(1/2,3/2) is dipole-allowed")
}

/// Dark state of (1/2, 3/2) with `k` excitations, `N_A` atoms in class A and
/// no population in `e−3/2`, `e−1/2`. Amplitudes follow the pairwise
/// cancellation recursion for the actual `R⁻` couplings.
pub fn analytic_dark_state(n_atoms: u32, k: u32, n_a: u32) -> Result<SparseState> {
    let l = six_level();
    if n_a > n_atoms {
        return Err(Error::domain(format!("N_A = {n_a} exceeds N = {n_atoms}")));
    }
    let n_b = n_atoms - n_a;
    if k == 0 || n_a < k || n_b < k {
        return Err(Error::domain(format!(
            "dark states need 1 ≤ k ≤ min(N_A, N_B); got k = {k}, N_A = {n_a}, N_B = {n_b}"
        )));
    }
    let gm = l.parse_label("g-1/2")?;
    let gp = l.parse_label("g1/2")?;
    let e_lo = l.parse_label("e1/2")?;
    let e_hi = l.parse_label("e3/2")?;
    let lowering = Channel::R.raising(&l, Axis::Par).adjoint();
    let coupling = |to: usize, from: usize| -> Result<Complex64> {
        lowering
            .terms
            .iter()
            .find(|t| t.to == to && t.from == from)
            .map(|t| t.amp)
            .ok_or_else(|| Error::Numerical("R⁻ lacks an expected transition".into()))
    };
    let c_hi = coupling(gp, e_hi)?;
    let c_lo = coupling(gm, e_lo)?;
    let phase_step = -(c_hi / c_lo) / (c_hi / c_lo).norm();
    let mag_step = (c_hi / c_lo).norm();

    let (k, n_a, n_b) = (k as f64, n_a as f64, n_b as f64);
    let mut log_mag = vec![0.0f64; k as usize + 1];
    let mut phase = vec![Complex64::new(1.0, 0.0); k as usize + 1];
    for r in 0..k as usize {
        let rf = r as f64;
        let ratio = mag_step * ((k - rf) * (n_b - k + rf + 1.0) / ((n_a - rf) * (rf + 1.0))).sqrt();
        log_mag[r + 1] = log_mag[r] + ratio.ln();
        phase[r + 1] = phase[r] * phase_step;
    }
    let top = log_mag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_mag.iter().map(|x| (x - top).exp()).collect();
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let amplitudes = (0..=k as usize)
        .map(|r| {
            let mut occ: Occupation = vec![0; 6];
            occ[e_lo] = r as u32;
            occ[e_hi] = (k as usize - r) as u32;
            occ[gm] = (n_a as usize - r) as u32;
            occ[gp] = (n_b as usize - k as usize + r) as u32;
            (occ, phase[r] * (weights[r] / norm))
        })
        .collect();
    Ok(SparseState {
        level: l,
        axis: Axis::Par,
        n_atoms,
        amplitudes,
    })
}

/// All analytic dark states for `N` atoms, keyed by `(k, N_A)`.
pub fn analytic_dark_states(n_atoms: u32) -> Result<Vec<((u32, u32), SparseState)>> {
    let mut out = Vec::new();
    for k in 1..=n_atoms / 2 {
        for n_a in k..=n_atoms - k {
            out.push(((k, n_a), analytic_dark_state(n_atoms, k, n_a)?));
        }
    }
    Ok(out)
}

/// `Σ_{k=1}^{⌊N/2⌋} (N − 2k + 1)`.
pub fn analytic_dark_count(n_atoms: u32) -> u64 {
    (1..=n_atoms / 2).map(|k| (n_atoms - 2 * k + 1) as u64).sum()
}

/// The single-excitation bright partner of the `k = 1` dark state.
pub fn single_excitation_bright_state(n_atoms: u32, n_a: u32) -> Result<SparseState> {
    let mut s = analytic_dark_state(n_atoms, 1, n_a)?;
    let (d0, d1) = (s.amplitudes[0].1, s.amplitudes[1].1);
    s.amplitudes[0].1 = d1.conj();
    s.amplitudes[1].1 = -d0.conj();
    Ok(s)
}

/// `⟨D⁺D⁻⟩` for the product state `ψ^{⊗N}`.
pub fn product_state_emission(op: &CollectiveOp, psi: &[Complex64], n_atoms: u32) -> f64 {
    let m = op.single_atom_matrix();
    let v = DVector::from_column_slice(psi);
    let dplus = (v.adjoint() * &m * &v)[(0, 0)];
    let local = (v.adjoint() * &m * m.adjoint() * &v)[(0, 0)].re;
    let n = n_atoms as f64;
    n * local + n * (n - 1.0) * dplus.norm_sqr()
}
