//! Semiclassical dynamics on one-body expectation values: mean field,
//! truncated Wigner sampling, second-order cumulants and Bloch-sphere
//! projections.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::Axis;
use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::level::LevelStructure;
use crate::ode::{integrate, Control, Stats, Tolerances};
use crate::operators::{Channel, CollectiveOp};

pub mod bloch;
pub mod cumulant;
pub mod twa;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sparse single-atom matrix entry `(row, col, value)`.
pub(crate) type Entry = (usize, usize, Complex64);

pub(crate) fn entries(op: &CollectiveOp) -> Vec<Entry> {
    op.terms.iter().map(|t| (t.to, t.from, t.amp)).collect()
}

pub(crate) fn adjoint_entries(e: &[Entry]) -> Vec<Entry> {
    e.iter().map(|&(r, c, v)| (c, r, v.conj())).collect()
}

/// `out += P A − A P` for dense row-major `P` and sparse `A`.
pub(crate) fn commutator_into(ell: usize, p: &[Complex64], a: &[Entry], out: &mut [Complex64]) {
    for &(k, c, v) in a {
        // (P A)_{r c} += P_{r k} A_{k c}
        for r in 0..ell {
            out[r * ell + c] += p[r * ell + k] * v;
        }
        // (A P)_{k j} += A_{k c} P_{c j}
        for j in 0..ell {
            out[k * ell + j] -= v * p[c * ell + j];
        }
    }
}

/// `tr(M P) = Σ M_{rc} P_{cr}`.
pub(crate) fn trace_product(ell: usize, m: &[Entry], p: &[Complex64]) -> Complex64 {
    m.iter().map(|&(r, c, v)| v * p[c * ell + r]).sum()
}

/// A set of atoms sharing one coupling weight `ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteGroup {
    pub weight: f64,
    pub atoms: f64,
}

/// Site weights `ξ_i = cos(π (λ_L/λ_c) i)` for `i = 0..n_sites`, with the
/// atoms split evenly.
pub fn lattice_groups(lambda_ratio: f64, n_sites: usize, atoms: f64) -> Vec<SiteGroup> {
    let per = atoms / n_sites.max(1) as f64;
    (0..n_sites)
        .map(|i| SiteGroup {
            weight: (std::f64::consts::PI * lambda_ratio * i as f64).cos(),
            atoms: per,
        })
        .collect()
}

/// Collective one-body matrices `P_i` with `P_i[b][a] = ⟨σ_ab⟩` summed over
/// the atoms of group `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneBodyState {
    pub level: LevelStructure,
    pub axis: Axis,
    pub groups: Vec<SiteGroup>,
    /// Row-major `ℓ×ℓ` blocks, one per group.
    pub data: Vec<Complex64>,
}

impl OneBodyState {
    /// Every atom in the single-atom state `psi`.
    pub fn product(level: LevelStructure, axis: Axis, psi: &[Complex64], groups: Vec<SiteGroup>) -> Result<Self> {
        let ell = level.ell();
        if psi.len() != ell {
            return Err(Error::domain(format!("single-atom state has {} entries, expected {ell}", psi.len())));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("single-atom state is not normalized (norm {norm})")));
        }
        if groups.is_empty() || groups.iter().any(|g| !(g.atoms > 0.0) || !g.weight.is_finite()) {
            return Err(Error::domain("site groups need positive atom counts and finite weights"));
        }
        let mut data = Vec::with_capacity(groups.len() * ell * ell);
        for g in &groups {
            for r in 0..ell {
                for c in 0..ell {
                    data.push(psi[r] * psi[c].conj() * g.atoms);
                }
            }
        }
        Ok(OneBodyState { level, axis, groups, data })
    }

    pub fn homogeneous(level: LevelStructure, axis: Axis, psi: &[Complex64], atoms: f64) -> Result<Self> {
        Self::product(level, axis, psi, vec![SiteGroup { weight: 1.0, atoms }])
    }

    pub fn ell(&self) -> usize {
        self.level.ell()
    }

    pub fn n_atoms(&self) -> f64 {
        self.groups.iter().map(|g| g.atoms).sum()
    }

    pub fn group_matrix(&self, g: usize) -> DMatrix<Complex64> {
        let ell = self.ell();
        DMatrix::from_row_slice(ell, ell, &self.data[g * ell * ell..(g + 1) * ell * ell])
    }

    /// Sum of all group blocks.
    pub fn total(&self) -> DMatrix<Complex64> {
        let ell = self.ell();
        let mut m = DMatrix::zeros(ell, ell);
        for g in 0..self.groups.len() {
            m += self.group_matrix(g);
        }
        m
    }

    /// Level populations divided by the atom number.
    pub fn populations(&self) -> Vec<f64> {
        populations(&self.level, &self.data, self.n_atoms())
    }

    pub fn excited_fraction(&self) -> f64 {
        excited_fraction(&self.level, &self.data, self.n_atoms())
    }

    pub fn hermiticity_error(&self) -> f64 {
        let ell = self.ell();
        let mut err: f64 = 0.0;
        for blk in self.data.chunks(ell * ell) {
            for r in 0..ell {
                for c in 0..ell {
                    err = err.max((blk[r * ell + c] - blk[c * ell + r].conj()).norm());
                }
            }
        }
        err
    }

    /// The same state in another atomic basis.
    pub fn in_basis(&self, to_axis: Axis) -> OneBodyState {
        let t = crate::angular::basis_change(&self.level, self.axis, to_axis);
        let ell = self.ell();
        let mut data = Vec::with_capacity(self.data.len());
        for g in 0..self.groups.len() {
            let p = &t * self.group_matrix(g) * t.adjoint();
            for r in 0..ell {
                for c in 0..ell {
                    data.push(p[(r, c)]);
                }
            }
        }
        OneBodyState {
            level: self.level,
            axis: to_axis,
            groups: self.groups.clone(),
            data,
        }
    }
}

pub(crate) fn populations(level: &LevelStructure, data: &[Complex64], n: f64) -> Vec<f64> {
    let ell = level.ell();
    let mut pops = vec![0.0; ell];
    for blk in data.chunks(ell * ell) {
        for (a, p) in pops.iter_mut().enumerate() {
            *p += blk[a * ell + a].re;
        }
    }
    pops.iter().map(|p| p / n).collect()
}

pub(crate) fn excited_fraction(level: &LevelStructure, data: &[Complex64], n: f64) -> f64 {
    let ell = level.ell();
    let mut s = 0.0;
    for blk in data.chunks(ell * ell) {
        for a in level.excited_indices() {
            s += blk[a * ell + a].re;
        }
    }
    s / n
}

/// Treatment of same-atom products `⟨σ^i σ^i⟩` in the mean-field equations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decoupling {
    /// `⟨σ_ab σ_cd⟩ ≈ ⟨σ_ab⟩⟨σ_cd⟩` for all atom pairs.
    #[default]
    Factorized,
    /// Diagnostic: contract same-atom products exactly. Produces a spurious
    /// `1/N` decay of mean-field dark states.
    SelfInteraction,
}

/// Mean-field equations compiled from a generator.
#[derive(Clone, Debug)]
pub struct MeanField {
    level: LevelStructure,
    axis: Axis,
    gamma: f64,
    chi: f64,
    hamiltonian: Vec<Entry>,
    channels: Vec<Vec<Entry>>,
    groups: Vec<SiteGroup>,
    decoupling: Decoupling,
    /// Single-atom terms of the self-interaction variant, per group.
    self_terms: Vec<SelfTerms>,
    probes: Probes,
}

#[derive(Clone, Debug)]
struct SelfTerms {
    /// `Γξ²` jump parts `(M†, M)` and the non-Hermitian one-body generator.
    jumps: Vec<(Vec<Entry>, Vec<Entry>)>,
    rate: f64,
    effective: Vec<Entry>,
}

/// Raising operators of the four reported emission channels.
#[derive(Clone, Debug)]
pub(crate) struct Probes {
    pub ops: Vec<Vec<Entry>>,
}

impl Probes {
    pub fn new(level: &LevelStructure, axis: Axis) -> Self {
        Probes {
            ops: Channel::ALL.iter().map(|c| entries(&c.raising(level, axis))).collect(),
        }
    }

    /// Product-state estimate `|d⁺|² + Σ_i ξ_i² (tr(M M† P_i) − |tr(M P_i)|²/N_i)`.
    pub fn emission(&self, ell: usize, groups: &[SiteGroup], data: &[Complex64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, m) in out.iter_mut().zip(&self.ops) {
            *o = product_emission(ell, m, groups, data);
        }
        out
    }

    /// Symmetric-ordering estimator for a phase-space sample:
    /// `|d⁺|² + ½ Σ_i ξ_i² tr([M, M†] P_i)`.
    pub fn wigner_emission(&self, ell: usize, groups: &[SiteGroup], data: &[Complex64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, m) in out.iter_mut().zip(&self.ops) {
            let d = weighted_dipole(ell, m, groups, data);
            let mut corr = 0.0;
            for (g, blk) in groups.iter().zip(data.chunks(ell * ell)) {
                corr += g.weight * g.weight * 0.5 * trace_commutator(ell, m, blk);
            }
            *o = d.norm_sqr() + corr;
        }
        out
    }
}

fn weighted_dipole(ell: usize, m: &[Entry], groups: &[SiteGroup], data: &[Complex64]) -> Complex64 {
    groups
        .iter()
        .zip(data.chunks(ell * ell))
        .map(|(g, blk)| trace_product(ell, m, blk) * g.weight)
        .sum()
}

/// `tr(M M† P)` for sparse `M`.
fn trace_mmdag(ell: usize, m: &[Entry], p: &[Complex64]) -> f64 {
    // (M M†)_{r s} = Σ_c M_{rc} conj(M_{sc})
    let mut s = ZERO;
    for &(r, c, v) in m {
        for &(q, c2, w) in m {
            if c2 == c {
                s += v * w.conj() * p[q * ell + r];
            }
        }
    }
    s.re
}

/// `tr(M† M P)`.
fn trace_mdagm(ell: usize, m: &[Entry], p: &[Complex64]) -> f64 {
    let mut s = ZERO;
    for &(r, c, v) in m {
        for &(r2, q, w) in m {
            if r2 == r {
                s += v.conj() * w * p[q * ell + c];
            }
        }
    }
    s.re
}

fn trace_commutator(ell: usize, m: &[Entry], p: &[Complex64]) -> f64 {
    trace_mmdag(ell, m, p) - trace_mdagm(ell, m, p)
}

fn product_emission(ell: usize, m: &[Entry], groups: &[SiteGroup], data: &[Complex64]) -> f64 {
    let d = weighted_dipole(ell, m, groups, data);
    let mut self_part = 0.0;
    for (g, blk) in groups.iter().zip(data.chunks(ell * ell)) {
        let local = trace_product(ell, m, blk);
        self_part += g.weight * g.weight * (trace_mmdag(ell, m, blk) - local.norm_sqr() / g.atoms);
    }
    d.norm_sqr() + self_part
}

/// One output row of a semiclassical evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub n_e: f64,
    pub populations: Vec<f64>,
    /// `⟨D⁺D⁻⟩` for `[Π, Σ, L, R]`.
    pub emission: [f64; 4],
}

impl MeanField {
    pub fn new(gen: &GeneratorSpec, groups: Vec<SiteGroup>, decoupling: Decoupling) -> Result<Self> {
        gen.validate()?;
        if groups.is_empty() {
            return Err(Error::domain("mean field needs at least one site group"));
        }
        let ell = gen.level.ell();
        let channels: Vec<Vec<Entry>> = gen.channels.iter().map(entries).collect();
        let self_terms = groups
            .iter()
            .map(|g| {
                let w2 = g.weight * g.weight;
                let mut eff = DMatrix::<Complex64>::zeros(ell, ell);
                let mut jumps = Vec::new();
                for (c, op) in gen.channels.iter().enumerate() {
                    let m = op.single_atom_matrix();
                    let mmd = &m * m.adjoint();
                    // ρ̇ = −i(K ρ − ρ K†) + Γ M† ρ M with K = (χ − iΓ/2) ξ² M M†
                    eff += mmd * Complex64::new(gen.chi * w2, -0.5 * gen.gamma * w2);
                    jumps.push((adjoint_entries(&channels[c]), channels[c].clone()));
                }
                let effective = (0..ell)
                    .flat_map(|r| (0..ell).map(move |c| (r, c)))
                    .filter(|&(r, c)| eff[(r, c)].norm() > 0.0)
                    .map(|(r, c)| (r, c, eff[(r, c)]))
                    .collect();
                SelfTerms {
                    jumps,
                    rate: gen.gamma * w2,
                    effective,
                }
            })
            .collect();
        Ok(MeanField {
            level: gen.level,
            axis: gen.axis,
            gamma: gen.gamma,
            chi: gen.chi,
            hamiltonian: entries(&gen.hamiltonian),
            channels,
            groups,
            decoupling,
            self_terms,
            probes: Probes::new(&gen.level, gen.axis),
        })
    }

    pub fn level(&self) -> &LevelStructure {
        &self.level
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn groups(&self) -> &[SiteGroup] {
        &self.groups
    }

    pub fn n_atoms(&self) -> f64 {
        self.groups.iter().map(|g| g.atoms).sum()
    }

    pub fn dim(&self) -> usize {
        let ell = self.level.ell();
        self.groups.len() * ell * ell
    }

    /// Collective dipoles `d⁺_γ = Σ_i ξ_i tr(M_γ P_i)`.
    pub fn dipoles(&self, y: &[Complex64]) -> Vec<Complex64> {
        let ell = self.level.ell();
        self.channels.iter().map(|m| weighted_dipole(ell, m, &self.groups, y)).collect()
    }

    pub fn rhs(&self, y: &[Complex64], dy: &mut [Complex64]) {
        let ell = self.level.ell();
        let sq = ell * ell;
        let alpha = Complex64::new(0.5 * self.gamma, -self.chi);
        let beta = Complex64::new(0.5 * self.gamma, self.chi);
        let d_plus = self.dipoles(y);
        dy.iter_mut().for_each(|v| *v = ZERO);
        let mut a: Vec<Entry> = Vec::new();
        for (gi, g) in self.groups.iter().enumerate() {
            let scale = match self.decoupling {
                Decoupling::Factorized => 1.0,
                Decoupling::SelfInteraction => 1.0 - 1.0 / g.atoms,
            };
            a.clear();
            a.extend(self.hamiltonian.iter().map(|&(r, c, v)| (r, c, Complex64::i() * v)));
            for (m, dp) in self.channels.iter().zip(&d_plus) {
                let up = beta * dp.conj() * (g.weight * scale);
                let down = -alpha * dp * (g.weight * scale);
                a.extend(m.iter().map(|&(r, c, v)| (r, c, v * up)));
                a.extend(m.iter().map(|&(r, c, v)| (c, r, v.conj() * down)));
            }
            let p = &y[gi * sq..(gi + 1) * sq];
            let out = &mut dy[gi * sq..(gi + 1) * sq];
            commutator_into(ell, p, &a, out);
            if self.decoupling == Decoupling::SelfInteraction {
                let st = &self.self_terms[gi];
                // −i(K P − P K†)
                for &(r, c, v) in &st.effective {
                    let w = -Complex64::i() * v;
                    for j in 0..ell {
                        out[r * ell + j] += w * p[c * ell + j];
                    }
                    // (P K†)_{j r} += P_{j c} conj(K_{r c})
                    let w2 = Complex64::i() * v.conj();
                    for j in 0..ell {
                        out[j * ell + r] += p[j * ell + c] * w2;
                    }
                }
                for (lower, raise) in &st.jumps {
                    // Γξ² M† P M
                    for &(r1, c1, v1) in lower {
                        for &(r2, c2, v2) in raise {
                            out[r1 * ell + c2] += v1 * p[c1 * ell + r2] * v2 * st.rate;
                        }
                    }
                }
            }
        }
    }

    pub fn sample(&self, t: f64, y: &[Complex64]) -> Sample {
        let n = self.n_atoms();
        let ell = self.level.ell();
        Sample {
            time: t,
            n_e: excited_fraction(&self.level, y, n),
            populations: populations(&self.level, y, n),
            emission: self.probes.emission(ell, &self.groups, y),
        }
    }

    pub(crate) fn probes(&self) -> &Probes {
        &self.probes
    }

    /// Integrate from `state` over `grid` (absolute times), recording a
    /// sample at every grid point.
    pub fn evolve(&self, state: &OneBodyState, grid: &[f64], tol: &Tolerances) -> Result<MfEvolution> {
        self.check_state(state)?;
        let mut y = state.data.clone();
        let mut samples = Vec::with_capacity(grid.len());
        let stats = integrate(|_, y, dy| self.rhs(y, dy), &mut y, grid, tol, |t, y| {
            samples.push(self.sample(t, y));
            Control::Continue
        })?;
        Ok(MfEvolution {
            samples,
            final_state: OneBodyState { data: y, ..state.clone() },
            stats,
        })
    }

    /// Like [`MeanField::evolve`] with a caller-supplied observer.
    pub fn evolve_with(
        &self,
        state: &OneBodyState,
        grid: &[f64],
        tol: &Tolerances,
        mut observe: impl FnMut(f64, &OneBodyState) -> Control,
    ) -> Result<(OneBodyState, Stats)> {
        self.check_state(state)?;
        let mut y = state.data.clone();
        let mut scratch = state.clone();
        let stats = integrate(|_, y, dy| self.rhs(y, dy), &mut y, grid, tol, |t, y| {
            scratch.data.copy_from_slice(y);
            observe(t, &scratch)
        })?;
        Ok((OneBodyState { data: y, ..state.clone() }, stats))
    }

    fn check_state(&self, state: &OneBodyState) -> Result<()> {
        if state.level != self.level || state.axis != self.axis {
            return Err(Error::domain("state and generator use different bases"));
        }
        if state.groups != self.groups {
            return Err(Error::domain("state and generator use different site groups"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MfEvolution {
    pub samples: Vec<Sample>,
    pub final_state: OneBodyState,
    pub stats: Stats,
}

/// Apply the one-body pulse `exp(−iθ(e^{iφ}M + e^{−iφ}M†)/2)` to every atom.
pub fn pulse_single_atom(psi: &[Complex64], d_plus: &CollectiveOp, theta: f64, phase: f64) -> Vec<Complex64> {
    crate::lindblad::pulse_product_state(psi, &d_plus.single_atom_matrix(), theta, phase)
}

/// Single-atom state vector from a level label in a given basis, expressed
/// in `target` basis.
pub fn basis_state(level: &LevelStructure, axis: Axis, idx: usize, target: Axis) -> Vec<Complex64> {
    let mut v = DVector::<Complex64>::zeros(level.ell());
    v[idx] = Complex64::new(1.0, 0.0);
    let t = crate::angular::basis_change(level, axis, target);
    (t * v).iter().copied().collect()
}
