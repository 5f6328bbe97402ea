//! Permutation-symmetric (PS) basis of `N` identical `ℓ`-level atoms and
//! sparse matrices of collective operators on it.
//!
//! A basis state is an occupation tuple `n⃗` with `Σ n_a = N`. States are
//! kept in reverse-lexicographic order, so `(N, 0, …, 0)` comes first.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::angular::Axis;
use crate::error::{Error, Result};
use crate::level::{LevelStructure, ParityClass};
use crate::operators::CollectiveOp;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub type Occupation = Vec<u32>;

/// Size limits for exact methods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    pub max_basis: usize,
    pub dense_block_max: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_basis: 5000,
            dense_block_max: 4096,
        }
    }
}

/// `binomial(N + ℓ − 1, ℓ − 1)`, exactly.
pub fn ps_dimension(n_atoms: u64, ell: u64) -> u128 {
    let (n, k) = ((n_atoms + ell - 1) as u128, (ell - 1) as u128);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Conserved labels of an occupation in the ∥ basis. Unset fields match
/// anything.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SectorKey {
    pub n_e: Option<u32>,
    pub n_a: Option<u32>,
    /// Twice the total magnetic number.
    pub twice_m: Option<i32>,
}

impl SectorKey {
    /// Full key of an occupation.
    pub fn of(level: &LevelStructure, occ: &[u32]) -> SectorKey {
        let mut n_e = 0;
        let mut n_a = 0;
        let mut twice_m = 0i32;
        for (i, &n) in occ.iter().enumerate() {
            if level.is_excited(i) {
                n_e += n;
            }
            if level.parity_class(i) == ParityClass::A {
                n_a += n;
            }
            twice_m += level.level(i).m.twice() * n as i32;
        }
        SectorKey {
            n_e: Some(n_e),
            n_a: Some(n_a),
            twice_m: Some(twice_m),
        }
    }

    pub fn matches(&self, level: &LevelStructure, occ: &[u32]) -> bool {
        let full = SectorKey::of(level, occ);
        self.n_e.is_none_or(|v| full.n_e == Some(v))
            && self.n_a.is_none_or(|v| full.n_a == Some(v))
            && self.twice_m.is_none_or(|v| full.twice_m == Some(v))
    }
}

/// Apply `σ_{to,from}` to an occupation in place, returning the matrix
/// element, or `None` when the result vanishes.
pub fn apply_transition(occ: &mut [u32], to: usize, from: usize) -> Option<f64> {
    if to == from {
        let n = occ[to];
        return if n == 0 { None } else { Some(n as f64) };
    }
    let nf = occ[from];
    if nf == 0 {
        return None;
    }
    let f = (nf as f64 * (occ[to] as f64 + 1.0)).sqrt();
    occ[from] -= 1;
    occ[to] += 1;
    Some(f)
}

/// A product of transitions applied right to left: `moves[0]` acts first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Move(pub Vec<(usize, usize)>);

impl Move {
    pub fn apply(&self, occ: &[u32]) -> Option<Occupation> {
        let mut o = occ.to_vec();
        for &(to, from) in &self.0 {
            apply_transition(&mut o, to, from)?;
        }
        Some(o)
    }
}

/// Indexed PS basis.
#[derive(Clone, Debug)]
pub struct PSBasis {
    level: LevelStructure,
    axis: Axis,
    n_atoms: u32,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl PSBasis {
    /// All occupations, optionally restricted to a sector.
    pub fn enumerate(
        level: LevelStructure,
        axis: Axis,
        n_atoms: u32,
        sector: Option<&SectorKey>,
        limits: &Limits,
    ) -> Result<Self> {
        match sector {
            None => {
                let dim = ps_dimension(n_atoms as u64, level.ell() as u64);
                if dim > limits.max_basis as u128 {
                    return Err(Error::Resource {
                        what: format!("PS basis for N = {n_atoms}, ℓ = {}", level.ell()),
                        requested: dim.min(usize::MAX as u128) as usize,
                        cap: limits.max_basis,
                    });
                }
                Self::enumerate_where(level, axis, n_atoms, |_| true, limits)
            }
            Some(key) => {
                let key = *key;
                Self::enumerate_where(level, axis, n_atoms, move |o| key.matches(&level, o), limits)
            }
        }
    }

    /// Occupations satisfying a predicate.
    pub fn enumerate_where(
        level: LevelStructure,
        axis: Axis,
        n_atoms: u32,
        keep: impl Fn(&[u32]) -> bool,
        limits: &Limits,
    ) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::domain("N must be at least 1"));
        }
        let ell = level.ell();
        let mut states = Vec::new();
        let mut cur = vec![0u32; ell];
        let mut overflow = false;
        fn rec(
            pos: usize,
            left: u32,
            cur: &mut [u32],
            states: &mut Vec<Occupation>,
            keep: &dyn Fn(&[u32]) -> bool,
            cap: usize,
            overflow: &mut bool,
        ) {
            if *overflow {
                return;
            }
            if pos + 1 == cur.len() {
                cur[pos] = left;
                if keep(cur) {
                    if states.len() >= cap {
                        *overflow = true;
                        return;
                    }
                    states.push(cur.to_vec());
                }
                return;
            }
            for n in (0..=left).rev() {
                cur[pos] = n;
                rec(pos + 1, left - n, cur, states, keep, cap, overflow);
            }
        }
        rec(0, n_atoms, &mut cur, &mut states, &keep, limits.max_basis, &mut overflow);
        if overflow {
            return Err(Error::Resource {
                what: format!("filtered PS basis for N = {n_atoms}, ℓ = {ell}"),
                requested: limits.max_basis + 1,
                cap: limits.max_basis,
            });
        }
        Ok(Self::from_sorted(level, axis, n_atoms, states))
    }

    /// Basis over an explicit set of occupations.
    pub fn from_occupations(
        level: LevelStructure,
        axis: Axis,
        n_atoms: u32,
        occs: impl IntoIterator<Item = Occupation>,
    ) -> Result<Self> {
        let mut states: Vec<Occupation> = occs.into_iter().collect();
        for s in &states {
            if s.len() != level.ell() || s.iter().sum::<u32>() != n_atoms {
                return Err(Error::domain(format!("occupation {s:?} is not an ℓ-tuple summing to {n_atoms}")));
            }
        }
        states.sort_by(|a, b| b.cmp(a));
        states.dedup();
        Ok(Self::from_sorted(level, axis, n_atoms, states))
    }

    /// Closure of `seeds` under the given moves.
    pub fn reachable(
        level: LevelStructure,
        axis: Axis,
        n_atoms: u32,
        seeds: impl IntoIterator<Item = Occupation>,
        moves: &[Move],
        limits: &Limits,
    ) -> Result<Self> {
        let mut seen: HashMap<Occupation, ()> = HashMap::new();
        let mut queue = VecDeque::new();
        for s in seeds {
            if s.len() != level.ell() || s.iter().sum::<u32>() != n_atoms {
                return Err(Error::domain(format!("seed {s:?} is not an ℓ-tuple summing to {n_atoms}")));
            }
            if seen.insert(s.clone(), ()).is_none() {
                queue.push_back(s);
            }
        }
        if seen.len() > limits.max_basis {
            return Err(Error::Resource {
                what: format!("PS basis seeds for N = {n_atoms}, ℓ = {}", level.ell()),
                requested: seen.len(),
                cap: limits.max_basis,
            });
        }
        while let Some(s) = queue.pop_front() {
            for mv in moves {
                if let Some(t) = mv.apply(&s) {
                    if !seen.contains_key(&t) {
                        if seen.len() >= limits.max_basis {
                            return Err(Error::Resource {
                                what: format!("reachable PS basis for N = {n_atoms}, ℓ = {}", level.ell()),
                                requested: limits.max_basis + 1,
                                cap: limits.max_basis,
                            });
                        }
                        seen.insert(t.clone(), ());
                        queue.push_back(t);
                    }
                }
            }
        }
        Self::from_occupations(level, axis, n_atoms, seen.into_keys())
    }

    fn from_sorted(level: LevelStructure, axis: Axis, n_atoms: u32, states: Vec<Occupation>) -> Self {
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        PSBasis {
            level,
            axis,
            n_atoms,
            states,
            index,
        }
    }

    pub fn level(&self) -> &LevelStructure {
        &self.level
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn n_atoms(&self) -> u32 {
        self.n_atoms
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Basis restricted to the given positions (kept in order).
    pub fn subset(&self, positions: &[usize]) -> PSBasis {
        let states = positions.iter().map(|&i| self.states[i].clone()).collect();
        Self::from_sorted(self.level, self.axis, self.n_atoms, states)
    }

    /// Connected components of the graph whose edges are the given moves.
    /// Labels are numbered in order of first appearance.
    pub fn components(&self, moves: &[Move]) -> Vec<usize> {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (j, s) in self.states.iter().enumerate() {
            for mv in moves {
                if let Some(t) = mv.apply(s) {
                    if let Some(i) = self.index_of(&t) {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
        let mut label = HashMap::new();
        (0..n)
            .map(|i| {
                let r = find(&mut parent, i);
                let next = label.len();
                *label.entry(r).or_insert(next)
            })
            .collect()
    }

    fn check_op(&self, op: &CollectiveOp) -> Result<()> {
        if op.axis != self.axis || op.level != self.level {
            return Err(Error::domain(format!(
                "operator labelled in {} axis for {} but basis uses {} axis for {}",
                op.axis, op.level, self.axis, self.level
            )));
        }
        Ok(())
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl Csr {
    /// Sums duplicates and drops exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, Complex64)>) -> Csr {
        trip.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for k in 0..indices.len() {
            if values[k] != ZERO {
                indptr[rows[k] + 1] += 1;
                keep_idx.push(indices[k]);
                keep_val.push(values[k]);
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices: keep_idx,
            values: keep_val,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Csr {
        Csr::from_triplets(nrows, ncols, Vec::new())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Csr {
        Csr::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn scaled(&self, s: Complex64) -> Csr {
        Csr {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn plus(&self, other: &Csr) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Csr::from_triplets(self.nrows, self.ncols, self.triplets().chain(other.triplets()).collect())
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.nrows) {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    /// `Y = A X` for row-major `X` with `width` columns.
    pub fn mul_rows(&self, x: &[Complex64], width: usize, y: &mut [Complex64]) {
        for r in 0..self.nrows {
            let out = &mut y[r * width..(r + 1) * width];
            out.fill(ZERO);
            for k in self.indptr[r]..self.indptr[r + 1] {
                let v = self.values[k];
                let src = &x[self.indices[k] * width..(self.indices[k] + 1) * width];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
    }

    /// Whether every nonzero connects states with equal labels.
    pub fn respects(&self, labels: &[usize]) -> bool {
        self.triplets().all(|(r, c, _)| labels[r] == labels[c])
    }
}

/// Matrix of a collective operator on a basis. Targets outside the basis
/// are dropped, or reported as errors when `strict`.
pub fn collective_matrix(op: &CollectiveOp, basis: &PSBasis, strict: bool) -> Result<Csr> {
    basis.check_op(op)?;
    let mut trip = Vec::new();
    let mut scratch = Vec::with_capacity(basis.level.ell());
    for (j, s) in basis.states.iter().enumerate() {
        for t in &op.terms {
            scratch.clear();
            scratch.extend_from_slice(s);
            if let Some(f) = apply_transition(&mut scratch, t.to, t.from) {
                match basis.index_of(&scratch) {
                    Some(i) => trip.push((i, j, t.amp * f)),
                    None if strict => {
                        return Err(Error::domain(format!("σ applied to {s:?} leaves the basis ({scratch:?})")));
                    }
                    None => {}
                }
            }
        }
    }
    Ok(Csr::from_triplets(basis.len(), basis.len(), trip))
}

/// Matrix of `left · right` on a basis, with intermediate states allowed
/// anywhere in the full PS space.
pub fn product_matrix(left: &CollectiveOp, right: &CollectiveOp, basis: &PSBasis, strict: bool) -> Result<Csr> {
    basis.check_op(left)?;
    basis.check_op(right)?;
    let mut trip = Vec::new();
    let mut mid = Vec::with_capacity(basis.level.ell());
    let mut fin = Vec::with_capacity(basis.level.ell());
    for (j, s) in basis.states.iter().enumerate() {
        for t2 in &right.terms {
            mid.clear();
            mid.extend_from_slice(s);
            let Some(f2) = apply_transition(&mut mid, t2.to, t2.from) else {
                continue;
            };
            for t1 in &left.terms {
                fin.clear();
                fin.extend_from_slice(&mid);
                if let Some(f1) = apply_transition(&mut fin, t1.to, t1.from) {
                    match basis.index_of(&fin) {
                        Some(i) => trip.push((i, j, t1.amp * t2.amp * (f1 * f2))),
                        None if strict => {
                            return Err(Error::domain(format!("product applied to {s:?} leaves the basis")));
                        }
                        None => {}
                    }
                }
            }
        }
    }
    Ok(Csr::from_triplets(basis.len(), basis.len(), trip))
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Amplitude of `n⃗` in the product state `ψ^{⊗N}`.
pub fn coherent_amplitude(occ: &[u32], psi: &[Complex64]) -> Complex64 {
    let n: u32 = occ.iter().sum();
    let mut ln_mag = 0.5 * ln_factorial(n);
    let mut phase = Complex64::new(1.0, 0.0);
    for (&k, &a) in occ.iter().zip(psi) {
        if k == 0 {
            continue;
        }
        if a.norm() == 0.0 {
            return ZERO;
        }
        ln_mag += k as f64 * a.norm().ln() - 0.5 * ln_factorial(k);
        phase *= (a / a.norm()).powu(k);
    }
    phase * ln_mag.exp()
}

/// Occupations carrying weight in `ψ^{⊗N}`.
pub fn coherent_support(level: &LevelStructure, n_atoms: u32, psi: &[Complex64]) -> Vec<Occupation> {
    let active: Vec<usize> = (0..level.ell()).filter(|&i| psi[i].norm() > 0.0).collect();
    let mut out = Vec::new();
    let mut cur = vec![0u32; level.ell()];
    fn rec(k: usize, left: u32, active: &[usize], cur: &mut Vec<u32>, out: &mut Vec<Occupation>) {
        if k + 1 == active.len() {
            cur[active[k]] = left;
            out.push(cur.clone());
            cur[active[k]] = 0;
            return;
        }
        for n in (0..=left).rev() {
            cur[active[k]] = n;
            rec(k + 1, left - n, active, cur, out);
        }
        cur[active[k]] = 0;
    }
    if !active.is_empty() {
        rec(0, n_atoms, &active, &mut cur, &mut out);
    }
    out
}

/// `ψ^{⊗N}` on a basis; fails if part of the state lies outside it.
pub fn coherent_state(basis: &PSBasis, psi: &[Complex64]) -> Result<DVector<Complex64>> {
    if psi.len() != basis.level.ell() {
        return Err(Error::domain("single-atom state has the wrong dimension"));
    }
    let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!("single-atom state norm² = {norm}")));
    }
    let v = DVector::from_iterator(basis.len(), basis.states.iter().map(|s| coherent_amplitude(s, psi)));
    let captured = v.norm_squared();
    if (captured - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "basis captures only {captured:.6} of the product state's weight"
        )));
    }
    Ok(v)
}

/// Collective one-body matrix `P` with `P[b][a] = ⟨σ_ab⟩` for a pure state.
pub fn one_body_pure(basis: &PSBasis, psi: &DVector<Complex64>) -> DMatrix<Complex64> {
    let ell = basis.level.ell();
    let mut p = DMatrix::zeros(ell, ell);
    let mut scratch = Vec::with_capacity(ell);
    for (j, s) in basis.states.iter().enumerate() {
        if psi[j] == ZERO {
            continue;
        }
        for a in 0..ell {
            for b in 0..ell {
                scratch.clear();
                scratch.extend_from_slice(s);
                if let Some(f) = apply_transition(&mut scratch, a, b) {
                    if let Some(i) = basis.index_of(&scratch) {
                        p[(b, a)] += psi[i].conj() * psi[j] * f;
                    }
                }
            }
        }
    }
    p
}

/// Collective one-body matrix for a density matrix on the basis.
pub fn one_body_mixed(basis: &PSBasis, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let ell = basis.level.ell();
    let mut p = DMatrix::zeros(ell, ell);
    let mut scratch = Vec::with_capacity(ell);
    for (j, s) in basis.states.iter().enumerate() {
        for a in 0..ell {
            for b in 0..ell {
                scratch.clear();
                scratch.extend_from_slice(s);
                if let Some(f) = apply_transition(&mut scratch, a, b) {
                    if let Some(i) = basis.index_of(&scratch) {
                        // tr(σ ρ) = Σ σ_ij ρ_ji
                        p[(b, a)] += rho[(j, i)] * f;
                    }
                }
            }
        }
    }
    p
}

/// A PS state given by its support only, for states whose support is far
/// smaller than any enumerable basis.
#[derive(Clone, Debug)]
pub struct SparseState {
    pub level: LevelStructure,
    pub axis: Axis,
    pub n_atoms: u32,
    pub amplitudes: Vec<(Occupation, Complex64)>,
}

impl SparseState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Basis spanned by the support, and the amplitude vector on it.
    pub fn to_basis(&self) -> Result<(PSBasis, DVector<Complex64>)> {
        let basis = PSBasis::from_occupations(
            self.level,
            self.axis,
            self.n_atoms,
            self.amplitudes.iter().map(|(o, _)| o.clone()),
        )?;
        let mut v = DVector::zeros(basis.len());
        for (o, a) in &self.amplitudes {
            v[basis.index_of(o).unwrap()] += a;
        }
        Ok((basis, v))
    }

    /// `op |ψ⟩` as a sparse state.
    pub fn apply(&self, op: &CollectiveOp) -> Result<SparseState> {
        if op.axis != self.axis || op.level != self.level {
            return Err(Error::domain("operator and state use different bases"));
        }
        let mut acc: HashMap<Occupation, Complex64> = HashMap::new();
        for (o, a) in &self.amplitudes {
            for t in &op.terms {
                let mut s = o.clone();
                if let Some(f) = apply_transition(&mut s, t.to, t.from) {
                    *acc.entry(s).or_insert(ZERO) += a * t.amp * f;
                }
            }
        }
        let mut amplitudes: Vec<(Occupation, Complex64)> = acc.into_iter().collect();
        amplitudes.sort_by(|a, b| b.0.cmp(&a.0));
        Ok(SparseState {
            amplitudes,
            ..self.clone()
        })
    }

    pub fn one_body(&self) -> Result<DMatrix<Complex64>> {
        let (b, v) = self.to_basis()?;
        Ok(one_body_pure(&b, &v))
    }
}
