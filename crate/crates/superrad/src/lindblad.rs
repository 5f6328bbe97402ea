//! Exact density-matrix dynamics on a PS basis:
//! `dρ/dt = −i[H, ρ] + Γ Σ_γ (D⁻_γ ρ D⁺_γ − ½{D⁺_γ D⁻_γ, ρ})` with
//! `H = χ Σ_γ D⁺_γ D⁻_γ + h`.
//!
//! A density matrix is stored as dense blocks over a partition of the basis.
//! With [`Coherences::Full`] there is a single block. With
//! [`Coherences::SectorDiagonal`] the blocks are the connected components of
//! the generator's move graph; coherences between components never feed back
//! into the blocks, so dropping them is exact for every observable that does
//! not connect components. Observables that do are reported as NaN.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::ode::{integrate, Control, Stats, Tolerances};
use crate::operators::{operator_in_basis, Channel, CollectiveOp};
use crate::spectra::{decay_operator, decay_pair_moves, renyi_from_one_body};
use crate::symspace::{apply_transition, collective_matrix, Csr, Limits, Move, Occupation, PSBasis};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest block for which the minimum eigenvalue is monitored.
pub const MIN_EIG_MAX_DIM: usize = 800;

/// `exp(−i t h)` for a Hermitian `h`. Each connected block of `h` is
/// diagonalized separately, so decoupled levels stay exactly untouched.
pub fn hermitian_expm(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let mut label = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        label[start] = blocks.len();
        let mut k = 0;
        while k < members.len() {
            let i = members[k];
            for j in 0..n {
                if label[j] == usize::MAX && (h[(i, j)] != ZERO || h[(j, i)] != ZERO) {
                    label[j] = blocks.len();
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        blocks.push(members);
    }
    let mut u = DMatrix::<Complex64>::zeros(n, n);
    for b in &blocks {
        let sub = DMatrix::from_fn(b.len(), b.len(), |r, c| h[(b[r], b[c])]);
        let eig = sub.symmetric_eigen();
        let phases = DVector::from_iterator(b.len(), eig.eigenvalues.iter().map(|&l| (-I * t * l).exp()));
        let ub = &eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();
        for (r, &i) in b.iter().enumerate() {
            for (c, &j) in b.iter().enumerate() {
                u[(i, j)] = ub[(r, c)];
            }
        }
    }
    u
}

/// Single-atom drive `exp(−iθ (e^{iφ} M + e^{−iφ} M†)/2)` applied to `ψ`.
pub fn pulse_product_state(psi: &[Complex64], d_plus: &DMatrix<Complex64>, theta: f64, phase: f64) -> Vec<Complex64> {
    let w = Complex64::from_polar(0.5, phase);
    let h = d_plus * w + d_plus.adjoint() * w.conj();
    let u = hermitian_expm(&h, theta);
    (u * DVector::from_column_slice(psi)).iter().copied().collect()
}

/// Moves through which the generator connects occupations.
pub fn generator_moves(gen: &GeneratorSpec) -> Vec<Move> {
    let mut moves: Vec<Move> = gen
        .channels
        .iter()
        .flat_map(|c| c.terms.iter().map(|t| Move(vec![(t.from, t.to)])))
        .collect();
    moves.extend(decay_pair_moves(&gen.channels));
    moves.extend(
        gen.hamiltonian
            .terms
            .iter()
            .filter(|t| t.to != t.from)
            .map(|t| Move(vec![(t.to, t.from)])),
    );
    moves.sort_by(|a, b| a.0.cmp(&b.0));
    moves.dedup();
    moves
}

/// Smallest basis that contains `seeds` and is closed under the generator.
pub fn ed_basis(gen: &GeneratorSpec, seeds: impl IntoIterator<Item = Occupation>, n_atoms: u32, limits: &Limits) -> Result<PSBasis> {
    PSBasis::reachable(gen.level, gen.axis, n_atoms, seeds, &generator_moves(gen), limits)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coherences {
    #[default]
    Full,
    SectorDiagonal,
}

/// Mixed state on a PS basis, block diagonal over a partition.
#[derive(Clone, Debug)]
pub struct PSDensityMatrix {
    basis: PSBasis,
    labels: Vec<usize>,
    local: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    data: Vec<Vec<Complex64>>,
    pub time: f64,
}

impl PSDensityMatrix {
    fn partition(basis: &PSBasis, labels: Vec<usize>) -> (Vec<usize>, Vec<Vec<usize>>) {
        let n = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); n];
        let mut local = vec![0; basis.len()];
        for (i, &l) in labels.iter().enumerate() {
            local[i] = blocks[l].len();
            blocks[l].push(i);
        }
        (local, blocks)
    }

    fn labels_for(basis: &PSBasis, gen: Option<&GeneratorSpec>, mode: Coherences) -> Vec<usize> {
        match (mode, gen) {
            (Coherences::SectorDiagonal, Some(g)) => basis.components(&generator_moves(g)),
            _ => vec![0; basis.len()],
        }
    }

    /// `|ψ⟩⟨ψ|`, keeping only the diagonal blocks of the chosen partition.
    pub fn from_pure(
        basis: PSBasis,
        psi: &DVector<Complex64>,
        gen: Option<&GeneratorSpec>,
        mode: Coherences,
    ) -> Result<Self> {
        if psi.len() != basis.len() {
            return Err(Error::domain("state vector does not match the basis"));
        }
        let labels = Self::labels_for(&basis, gen, mode);
        let (local, blocks) = Self::partition(&basis, labels.clone());
        let data = blocks
            .iter()
            .map(|b| {
                let d = b.len();
                let mut m = vec![ZERO; d * d];
                for (r, &i) in b.iter().enumerate() {
                    for (c, &j) in b.iter().enumerate() {
                        m[r * d + c] = psi[i] * psi[j].conj();
                    }
                }
                m
            })
            .collect();
        Ok(PSDensityMatrix {
            basis,
            labels,
            local,
            blocks,
            data,
            time: 0.0,
        })
    }

    /// Classical mixture of basis states.
    pub fn from_diagonal(basis: PSBasis, weights: &[f64], gen: Option<&GeneratorSpec>, mode: Coherences) -> Result<Self> {
        let v = DVector::from_iterator(basis.len(), weights.iter().map(|&w| Complex64::new(w.max(0.0).sqrt(), 0.0)));
        let mut rho = Self::from_pure(basis, &v, gen, mode)?;
        for (b, m) in rho.blocks.iter().zip(rho.data.iter_mut()) {
            let d = b.len();
            for r in 0..d {
                for c in 0..d {
                    if r != c {
                        m[r * d + c] = ZERO;
                    }
                }
            }
        }
        Ok(rho)
    }

    pub fn basis(&self) -> &PSBasis {
        &self.basis
    }

    pub fn n_atoms(&self) -> u32 {
        self.basis.n_atoms()
    }

    pub fn is_full(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    /// `ρ_ij`; zero for entries between blocks.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let (l, m) = (self.labels[i], self.labels[j]);
        if l != m {
            return ZERO;
        }
        let d = self.blocks[l].len();
        self.data[l][self.local[i] * d + self.local[j]]
    }

    /// Dense matrix; inter-block coherences appear as zeros.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = self.basis.len();
        let mut m = DMatrix::zeros(d, d);
        for (b, data) in self.blocks.iter().zip(&self.data) {
            let n = b.len();
            for (r, &i) in b.iter().enumerate() {
                for (c, &j) in b.iter().enumerate() {
                    m[(i, j)] = data[r * n + c];
                }
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        self.blocks
            .iter()
            .zip(&self.data)
            .map(|(b, m)| (0..b.len()).map(|r| m[r * b.len() + r].re).sum::<f64>())
            .sum()
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut e: f64 = 0.0;
        for (b, m) in self.blocks.iter().zip(&self.data) {
            let d = b.len();
            for r in 0..d {
                for c in 0..=r {
                    e = e.max((m[r * d + c] - m[c * d + r].conj()).norm());
                }
            }
        }
        e
    }

    /// Minimum eigenvalue over all blocks; NaN when a block is too large.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut out = f64::INFINITY;
        for (b, m) in self.blocks.iter().zip(&self.data) {
            let d = b.len();
            if d > MIN_EIG_MAX_DIM {
                return f64::NAN;
            }
            let mat = DMatrix::from_row_slice(d, d, m);
            let eig = mat.symmetric_eigen();
            out = out.min(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min));
        }
        out
    }

    /// `tr(A ρ)`; NaN if `A` connects different blocks.
    pub fn expectation(&self, a: &Csr) -> Complex64 {
        let mut acc = ZERO;
        for (r, c, v) in a.triplets() {
            if self.labels[r] != self.labels[c] {
                return Complex64::new(f64::NAN, f64::NAN);
            }
            acc += v * self.entry(c, r);
        }
        acc
    }

    /// Collective one-body matrix `P[b][a] = ⟨σ_ab⟩`; entries that need
    /// dropped coherences are NaN.
    pub fn one_body(&self) -> DMatrix<Complex64> {
        let ell = self.basis.level().ell();
        let mut p = DMatrix::zeros(ell, ell);
        let mut scratch = Vec::with_capacity(ell);
        for (j, s) in self.basis.states().iter().enumerate() {
            for a in 0..ell {
                for b in 0..ell {
                    scratch.clear();
                    scratch.extend_from_slice(s);
                    if let Some(f) = apply_transition(&mut scratch, a, b) {
                        if let Some(i) = self.basis.index_of(&scratch) {
                            if self.labels[i] != self.labels[j] {
                                p[(b, a)] = Complex64::new(f64::NAN, f64::NAN);
                            } else {
                                p[(b, a)] += self.entry(j, i) * f;
                            }
                        }
                    }
                }
            }
        }
        p
    }

    /// Level populations `⟨σ_aa⟩ / N`.
    pub fn populations(&self) -> Vec<f64> {
        let ell = self.basis.level().ell();
        let mut pops = vec![0.0; ell];
        for (i, s) in self.basis.states().iter().enumerate() {
            let w = self.entry(i, i).re;
            for a in 0..ell {
                pops[a] += w * s[a] as f64;
            }
        }
        let n = self.n_atoms() as f64;
        pops.iter_mut().for_each(|p| *p /= n);
        pops
    }

    pub fn excited_fraction(&self) -> f64 {
        let l = self.basis.level();
        self.populations()
            .iter()
            .enumerate()
            .filter(|(a, _)| l.is_excited(*a))
            .map(|(_, p)| p)
            .sum()
    }

    /// Probability of each value of `key` over the basis states.
    pub fn distribution(&self, key: impl Fn(&[u32]) -> i64) -> BTreeMap<i64, f64> {
        let mut out = BTreeMap::new();
        for (i, s) in self.basis.states().iter().enumerate() {
            *out.entry(key(s)).or_insert(0.0) += self.entry(i, i).re;
        }
        out
    }

    /// Distribution of the excitation number `N_e`.
    pub fn excitation_distribution(&self) -> BTreeMap<i64, f64> {
        let l = *self.basis.level();
        self.distribution(|s| l.excited_indices().map(|e| s[e] as i64).sum())
    }

    /// Distribution of `n_a − n_b` (atom counts).
    pub fn imbalance_distribution(&self, a: usize, b: usize) -> BTreeMap<i64, f64> {
        self.distribution(|s| s[a] as i64 - s[b] as i64)
    }

    pub fn renyi(&self) -> f64 {
        renyi_from_one_body(&self.one_body(), self.n_atoms())
    }

    /// Unitary `exp(−iθ H₁)` with `H₁ = (e^{iφ} D⁺ + e^{−iφ} D⁻)/2`.
    pub fn apply_pulse(&mut self, d_plus: &CollectiveOp, theta: f64, phase: f64) -> Result<()> {
        if theta < 0.0 {
            return Err(Error::domain(format!("pulse area must be non-negative, got {theta}")));
        }
        if theta == 0.0 {
            return Ok(());
        }
        let op = operator_in_basis(d_plus, self.basis.axis());
        if op.axis != self.basis.axis() || op.level != *self.basis.level() {
            return Err(Error::domain("drive operator and basis disagree"));
        }
        let w = Complex64::from_polar(0.5, phase);
        let h1 = op.scaled(w).plus(&op.adjoint().scaled(w.conj()))?;
        let h = collective_matrix(&h1, &self.basis, true)
            .map_err(|e| Error::domain(format!("basis is not closed under the drive: {e}")))?;
        if !h.respects(&self.labels) {
            return Err(Error::domain("drive couples blocks of a sector-diagonal state"));
        }
        let parts = split_blocks(&h, &self.labels, &self.local, self.blocks.len());
        for ((b, m), hb) in self.blocks.iter().zip(self.data.iter_mut()).zip(parts) {
            let d = b.len();
            let a = expm_multiply(&hb, theta, m, d);
            let at = conj_transpose(&a, d);
            *m = expm_multiply(&hb, theta, &at, d);
        }
        Ok(())
    }
}

fn conj_transpose(m: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; d * d];
    for r in 0..d {
        for c in 0..d {
            out[c * d + r] = m[r * d + c].conj();
        }
    }
    out
}

fn split_blocks(a: &Csr, labels: &[usize], local: &[usize], n_blocks: usize) -> Vec<Csr> {
    let mut dims = vec![0usize; n_blocks];
    for &l in labels {
        dims[l] += 1;
    }
    let mut trips: Vec<Vec<(usize, usize, Complex64)>> = vec![Vec::new(); n_blocks];
    for (r, c, v) in a.triplets() {
        if labels[r] == labels[c] {
            trips[labels[r]].push((local[r], local[c], v));
        }
    }
    trips
        .into_iter()
        .zip(dims)
        .map(|(t, d)| Csr::from_triplets(d, d, t))
        .collect()
}

/// `exp(−iθ H) X` for row-major `X` with `width` columns, by Taylor series
/// on substeps of norm at most one.
fn expm_multiply(h: &Csr, theta: f64, x: &[Complex64], width: usize) -> Vec<Complex64> {
    let norm1 = (0..h.nrows)
        .map(|r| (h.indptr[r]..h.indptr[r + 1]).map(|k| h.values[k].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let steps = (theta * norm1).ceil().max(1.0) as usize;
    let dt = theta / steps as f64;
    let mut cur = x.to_vec();
    let mut term = vec![ZERO; x.len()];
    let mut next = vec![ZERO; x.len()];
    for _ in 0..steps {
        term.copy_from_slice(&cur);
        for k in 1..200 {
            h.mul_rows(&term, width, &mut next);
            let f = -I * dt / k as f64;
            let mut big: f64 = 0.0;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = n * f;
                big = big.max(t.norm());
            }
            for (c, t) in cur.iter_mut().zip(&term) {
                *c += t;
            }
            if big < 1e-17 {
                break;
            }
        }
    }
    cur
}

/// Precomputed operators for `⟨D⁺D⁻⟩` in the four named channels.
#[derive(Clone, Debug)]
pub struct EmissionOperators {
    pub ops: [Csr; 4],
}

impl EmissionOperators {
    pub fn new(basis: &PSBasis) -> Result<Self> {
        let l = *basis.level();
        let build = |c: Channel| decay_operator(basis, &[c.raising(&l, basis.axis())]);
        Ok(EmissionOperators {
            ops: [build(Channel::Pi)?, build(Channel::Sigma)?, build(Channel::L)?, build(Channel::R)?],
        })
    }

    /// `⟨D⁺D⁻⟩` for Π, Σ, L, R.
    pub fn evaluate(&self, rho: &PSDensityMatrix) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, op) in out.iter_mut().zip(&self.ops) {
            *o = rho.expectation(op).re;
        }
        out
    }
}

/// Snapshot of the observables at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    pub time: f64,
    pub n_e: f64,
    pub populations: Vec<f64>,
    /// `⟨D⁺D⁻⟩` for Π, Σ, L, R.
    pub emission: [f64; 4],
    pub trace: f64,
    pub min_eig: f64,
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub tol: Tolerances,
    /// Stop once `Σ_γ ⟨D⁺_γ D⁻_γ⟩ < threshold · N` over the generator's
    /// channels.
    pub stop_when_dark: Option<f64>,
    pub monitor_min_eig: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            tol: Tolerances::new(1e-9, 1e-11),
            stop_when_dark: None,
            monitor_min_eig: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub samples: Vec<Observables>,
    pub final_state: PSDensityMatrix,
    pub stats: Stats,
    pub warnings: Vec<String>,
}

struct BlockOps {
    dim: usize,
    offset: usize,
    k: Csr,
    jumps: Vec<Csr>,
}

/// Evolve on `grid`, calling `observe` at every grid time.
pub fn evolve_with(
    rho0: &PSDensityMatrix,
    gen: &GeneratorSpec,
    grid: &[f64],
    opts: &EvolveOptions,
    mut observe: impl FnMut(&PSDensityMatrix) -> Control,
) -> Result<(PSDensityMatrix, Stats)> {
    gen.validate()?;
    let basis = &rho0.basis;
    if gen.level != *basis.level() || gen.axis != basis.axis() {
        return Err(Error::domain("generator and state use different bases"));
    }
    let s = decay_operator(basis, &gen.channels)?;
    let h = collective_matrix(&gen.hamiltonian, basis, true)
        .map_err(|e| Error::domain(format!("basis is not closed under the Hamiltonian: {e}")))?;
    let k_full = s.scaled(Complex64::new(gen.chi, -0.5 * gen.gamma)).plus(&h);
    let jumps_full: Vec<Csr> = gen
        .channels
        .iter()
        .map(|c| collective_matrix(&c.adjoint(), basis, true))
        .collect::<Result<_>>()
        .map_err(|e| Error::domain(format!("basis is not closed under decay: {e}")))?;
    if !k_full.respects(&rho0.labels) || jumps_full.iter().any(|j| !j.respects(&rho0.labels)) {
        return Err(Error::domain("generator couples blocks of a sector-diagonal state"));
    }
    let nb = rho0.blocks.len();
    let ks = split_blocks(&k_full, &rho0.labels, &rho0.local, nb);
    let mut js: Vec<Vec<Csr>> = vec![Vec::new(); nb];
    for j in &jumps_full {
        for (b, part) in split_blocks(j, &rho0.labels, &rho0.local, nb).into_iter().enumerate() {
            if part.nnz() > 0 {
                js[b].push(part);
            }
        }
    }
    let mut offset = 0;
    let ops: Vec<BlockOps> = ks
        .into_iter()
        .zip(js)
        .zip(&rho0.blocks)
        .map(|((k, jumps), b)| {
            let d = b.len();
            let o = BlockOps { dim: d, offset, k, jumps };
            offset += d * d;
            o
        })
        .collect();
    let total = offset;
    let max_sq = ops.iter().map(|o| o.dim * o.dim).max().unwrap_or(0);
    let mut x = vec![ZERO; max_sq];
    let mut yt = vec![ZERO; max_sq];
    let mut z = vec![ZERO; max_sq];
    let mut herm = vec![ZERO; max_sq];
    let gamma = gen.gamma;
    let rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        for o in &ops {
            let d = o.dim;
            let n = d * d;
            // work on the Hermitian part; the formulas below assume it and
            // would otherwise amplify rounding in the anti-Hermitian part
            let raw = &y[o.offset..o.offset + n];
            for r in 0..d {
                for c in 0..d {
                    herm[r * d + c] = 0.5 * (raw[r * d + c] + raw[c * d + r].conj());
                }
            }
            let rho = &herm[..n];
            let out = &mut dy[o.offset..o.offset + n];
            o.k.mul_rows(rho, d, &mut x[..n]);
            for r in 0..d {
                for c in 0..d {
                    out[r * d + c] = -I * (x[r * d + c] - x[c * d + r].conj());
                }
            }
            for j in &o.jumps {
                j.mul_rows(rho, d, &mut x[..n]);
                for r in 0..d {
                    for c in 0..d {
                        yt[c * d + r] = x[r * d + c].conj();
                    }
                }
                j.mul_rows(&yt[..n], d, &mut z[..n]);
                for (a, b) in out.iter_mut().zip(&z[..n]) {
                    *a += b * gamma;
                }
            }
        }
    };
    let mut y: Vec<Complex64> = Vec::with_capacity(total);
    for m in &rho0.data {
        y.extend_from_slice(m);
    }
    let t0 = rho0.time;
    let shifted: Vec<f64> = grid.iter().map(|t| t + t0).collect();
    let mut current = rho0.clone();
    let unpack = |cur: &mut PSDensityMatrix, y: &[Complex64], t: f64| {
        let mut off = 0;
        for m in cur.data.iter_mut() {
            let n = m.len();
            m.copy_from_slice(&y[off..off + n]);
            // keep ρ exactly Hermitian
            let d = (n as f64).sqrt().round() as usize;
            for r in 0..d {
                for c in 0..r {
                    let avg = 0.5 * (m[r * d + c] + m[c * d + r].conj());
                    m[r * d + c] = avg;
                    m[c * d + r] = avg.conj();
                }
                m[r * d + r] = Complex64::new(m[r * d + r].re, 0.0);
            }
            off += n;
        }
        cur.time = t;
    };
    let stats = integrate(rhs, &mut y, &shifted, &opts.tol, |t, y| {
        unpack(&mut current, y, t);
        observe(&current)
    })?;
    unpack(&mut current, &y, stats.t_end);
    Ok((current, stats))
}

/// Evolve and record [`Observables`] at every grid time.
pub fn evolve(rho0: &PSDensityMatrix, gen: &GeneratorSpec, grid: &[f64], opts: &EvolveOptions) -> Result<Evolution> {
    let emission = EmissionOperators::new(&rho0.basis)?;
    let decay = decay_operator(&rho0.basis, &gen.channels)?;
    let n = rho0.n_atoms() as f64;
    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    let (final_state, stats) = evolve_with(rho0, gen, grid, opts, |rho| {
        let min_eig = if opts.monitor_min_eig {
            rho.min_eigenvalue()
        } else {
            f64::NAN
        };
        if min_eig < -1e-6 {
            warnings.push(format!("positivity breach at t = {}: min eigenvalue {min_eig:e}", rho.time));
        }
        samples.push(Observables {
            time: rho.time,
            n_e: rho.excited_fraction(),
            populations: rho.populations(),
            emission: emission.evaluate(rho),
            trace: rho.trace(),
            min_eig,
        });
        match opts.stop_when_dark {
            Some(th) if rho.expectation(&decay).re < th * n => Control::Stop,
            _ => Control::Continue,
        }
    })?;
    Ok(Evolution {
        samples,
        final_state,
        stats,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::Axis;
    use crate::level::LevelStructure;
    use crate::ode::uniform_grid;
    use crate::symspace::{coherent_state, coherent_support};

    fn two_level_gen() -> (LevelStructure, GeneratorSpec) {
        let l = LevelStructure::from_twice(0, 2).unwrap();
        let e0 = l.parse_label("e0").unwrap();
        let mut g = GeneratorSpec::new(l, Axis::V, &[Channel::Pi]);
        g.channels[0] = g.channels[0].restricted(|i| i == 0 || i == e0);
        (l, g)
    }

    #[test]
    fn pi_pulse_inverts_two_level_ensemble() {
        let (l, g) = two_level_gen();
        let e0 = l.parse_label("e0").unwrap();
        let n = 6;
        let mut seed = vec![0; 4];
        seed[0] = n;
        let basis = ed_basis(&g.clone().with_drive(&g.channels[0], Complex64::new(1.0, 0.0)), [seed.clone()], n, &Limits::default()).unwrap();
        assert_eq!(basis.len(), n as usize + 1);
        let mut psi = DVector::zeros(basis.len());
        psi[basis.index_of(&seed).unwrap()] = Complex64::new(1.0, 0.0);
        let mut rho = PSDensityMatrix::from_pure(basis.clone(), &psi, None, Coherences::Full).unwrap();
        let before = rho.clone();
        rho.apply_pulse(&g.channels[0], 0.0, 0.0).unwrap();
        assert!((rho.to_dense() - before.to_dense()).norm() < 1e-15);
        rho.apply_pulse(&g.channels[0], std::f64::consts::PI, 0.3).unwrap();
        let mut top = vec![0; 4];
        top[e0] = n;
        let i = basis.index_of(&top).unwrap();
        assert!((rho.entry(i, i).re - 1.0).abs() < 1e-10);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generic_pulse_matches_product_state_pulse() {
        let l = LevelStructure::from_twice(1, 3).unwrap();
        let r = Channel::R.raising(&l, Axis::Par);
        let n = 3;
        let gen = GeneratorSpec::new(l, Axis::Par, &[Channel::L, Channel::R]).with_drive(&r, Complex64::new(1.0, 0.0));
        let mut psi0 = vec![ZERO; 6];
        psi0[0] = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        psi0[1] = Complex64::new(-1.0 / 2f64.sqrt(), 0.0);
        let basis = ed_basis(&gen, coherent_support(&l, n, &psi0), n, &Limits::default()).unwrap();
        let v0 = coherent_state(&basis, &psi0).unwrap();
        let mut rho = PSDensityMatrix::from_pure(basis.clone(), &v0, None, Coherences::Full).unwrap();
        let theta = 1.3 * std::f64::consts::PI;
        rho.apply_pulse(&r, theta, 0.4).unwrap();
        let psi1 = pulse_product_state(&psi0, &r.single_atom_matrix(), theta, 0.4);
        let v1 = coherent_state(&basis, &psi1).unwrap();
        let want = &v1 * v1.adjoint();
        assert!((rho.to_dense() - want).norm() < 1e-10);
    }

    #[test]
    fn ground_state_is_stationary_and_dicke_cascade_conserves_trace() {
        let (l, g) = two_level_gen();
        let e0 = l.parse_label("e0").unwrap();
        let n = 8;
        let mut top = vec![0; 4];
        top[e0] = n;
        let basis = ed_basis(&g, [top.clone()], n, &Limits::default()).unwrap();
        let mut psi = DVector::zeros(basis.len());
        psi[basis.index_of(&top).unwrap()] = Complex64::new(1.0, 0.0);
        let rho = PSDensityMatrix::from_pure(basis.clone(), &psi, None, Coherences::Full).unwrap();
        let grid = uniform_grid(3.0 / n as f64, 60);
        let ev = evolve(&rho, &g, &grid, &EvolveOptions::default()).unwrap();
        assert!(ev.warnings.is_empty());
        // dN_e/dt = −Γ⟨D⁺D⁻⟩
        for w in ev.samples.windows(3) {
            let dt = w[2].time - w[0].time;
            let dne = (w[2].n_e - w[0].n_e) * n as f64 / dt;
            assert!((dne + w[1].emission[0]).abs() < 1e-3 * n as f64 * n as f64);
        }
        for s in &ev.samples {
            assert!((s.trace - 1.0).abs() < 1e-8);
        }
        let peak = ev.samples.iter().map(|s| s.emission[0]).fold(0.0, f64::max);
        // Dicke peak k(N−k+1) at k = N/2 is N²/4 + N/2
        assert!(peak > 0.8 * (n * n) as f64 / 4.0 && peak < (n * n) as f64 / 4.0 + n as f64);

        let mut bottom = vec![0; 4];
        bottom[0] = n;
        let gb = PSBasis::from_occupations(l, Axis::V, n, [bottom]).unwrap();
        let psi = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let rho = PSDensityMatrix::from_pure(gb, &psi, None, Coherences::Full).unwrap();
        let ev = evolve(&rho, &g, &uniform_grid(1.0, 4), &EvolveOptions::default()).unwrap();
        assert!(ev.samples.iter().all(|s| s.n_e == 0.0 && (s.trace - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sector_diagonal_agrees_with_full_on_block_observables() {
        let l = LevelStructure::from_twice(1, 1).unwrap();
        let gen = GeneratorSpec::new(l, Axis::Par, &[Channel::L, Channel::R]);
        let n = 4;
        let psi0 = vec![ZERO, ZERO, Complex64::new(0.6, 0.0), Complex64::new(0.0, -0.8)];
        let basis = ed_basis(&gen, coherent_support(&l, n, &psi0), n, &Limits::default()).unwrap();
        let v = coherent_state(&basis, &psi0).unwrap();
        let full = PSDensityMatrix::from_pure(basis.clone(), &v, Some(&gen), Coherences::Full).unwrap();
        let diag = PSDensityMatrix::from_pure(basis.clone(), &v, Some(&gen), Coherences::SectorDiagonal).unwrap();
        assert!(diag.block_dims().len() > 1);
        let grid = uniform_grid(2.0, 10);
        let a = evolve(&full, &gen, &grid, &EvolveOptions::default()).unwrap();
        let b = evolve(&diag, &gen, &grid, &EvolveOptions::default()).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x.n_e - y.n_e).abs() < 1e-8);
            assert!((x.emission[2] - y.emission[2]).abs() < 1e-8);
            assert!((x.emission[3] - y.emission[3]).abs() < 1e-8);
        }
        assert!(b.samples[0].emission[0].is_nan() || b.samples[0].emission[0].is_finite());
    }
}
