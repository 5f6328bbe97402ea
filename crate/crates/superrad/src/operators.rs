//! Collective one-body operators as sparse transition lists: the cavity
//! dipole operators Π, Σ, L, R for any level structure, polarization and
//! quantization axis, plus the multi-two-level decomposition.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::{basis_change, clebsch_gordan, Axis, HalfInt};
use crate::error::{Error, Result};
use crate::level::LevelStructure;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const DROP_TOL: f64 = 1e-14;

/// `amp · Σ_i |to⟩⟨from|_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub to: usize,
    pub from: usize,
    pub amp: Complex64,
}

/// A collective one-body operator `Σ_t amp_t σ_{to_t, from_t}` with levels
/// labelled in the basis of `axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveOp {
    pub level: LevelStructure,
    pub axis: Axis,
    pub terms: Vec<Transition>,
}

impl CollectiveOp {
    /// Merges duplicate transitions and drops vanishing amplitudes.
    pub fn new(level: LevelStructure, axis: Axis, terms: impl IntoIterator<Item = Transition>) -> Self {
        let mut acc: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for t in terms {
            assert!(t.to < level.ell() && t.from < level.ell(), "transition index out of range");
            *acc.entry((t.to, t.from)).or_insert(ZERO) += t.amp;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, a)| a.norm() > DROP_TOL)
            .map(|((to, from), amp)| Transition { to, from, amp })
            .collect();
        CollectiveOp { level, axis, terms }
    }

    pub fn zero(level: LevelStructure, axis: Axis) -> Self {
        CollectiveOp { level, axis, terms: Vec::new() }
    }

    /// Single-atom matrix `M[to][from] = amp`.
    pub fn single_atom_matrix(&self) -> DMatrix<Complex64> {
        let ell = self.level.ell();
        let mut m = DMatrix::zeros(ell, ell);
        for t in &self.terms {
            m[(t.to, t.from)] += t.amp;
        }
        m
    }

    pub fn from_matrix(level: LevelStructure, axis: Axis, m: &DMatrix<Complex64>) -> Self {
        let ell = level.ell();
        assert_eq!(m.shape(), (ell, ell));
        let terms = (0..ell).flat_map(|to| (0..ell).map(move |from| (to, from))).map(|(to, from)| Transition {
            to,
            from,
            amp: m[(to, from)],
        });
        CollectiveOp::new(level, axis, terms)
    }

    pub fn adjoint(&self) -> Self {
        CollectiveOp::new(
            self.level,
            self.axis,
            self.terms.iter().map(|t| Transition {
                to: t.from,
                from: t.to,
                amp: t.amp.conj(),
            }),
        )
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        CollectiveOp::new(
            self.level,
            self.axis,
            self.terms.iter().map(|t| Transition { amp: t.amp * c, ..*t }),
        )
    }

    /// Sum of two operators labelled in the same basis.
    pub fn plus(&self, other: &CollectiveOp) -> Result<Self> {
        if self.axis != other.axis || self.level != other.level {
            return Err(Error::domain("cannot add operators labelled in different bases"));
        }
        Ok(CollectiveOp::new(
            self.level,
            self.axis,
            self.terms.iter().chain(other.terms.iter()).copied(),
        ))
    }

    /// Keep only the terms whose both ends satisfy `keep`.
    pub fn restricted(&self, keep: impl Fn(usize) -> bool) -> Self {
        CollectiveOp {
            terms: self.terms.iter().filter(|t| keep(t.to) && keep(t.from)).copied().collect(),
            ..self.clone()
        }
    }

    /// Euclidean norm of the amplitude list.
    pub fn coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.amp.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Every term is an excited ← ground transition with `|Δm| ≤ 1`.
    pub fn validate_raising_dipole(&self) -> Result<()> {
        for t in &self.terms {
            if !self.level.is_excited(t.to) || self.level.is_excited(t.from) {
                return Err(Error::domain(format!(
                    "term {} <- {} is not an excited <- ground transition",
                    self.level.label(t.to),
                    self.level.label(t.from)
                )));
            }
            let dm = self.level.level(t.to).m - self.level.level(t.from).m;
            if dm.twice().abs() > 2 {
                return Err(Error::domain(format!("term with Δm = {dm} is dipole-forbidden")));
            }
        }
        Ok(())
    }

    /// True when the operator commutes with the occupation-class partition
    /// given by `class`, i.e. every term stays within one class.
    pub fn preserves<K: PartialEq>(&self, class: impl Fn(usize) -> K) -> bool {
        self.terms.iter().all(|t| class(t.to) == class(t.from))
    }
}

impl fmt::Display for CollectiveOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                format!(
                    "({:.6}{:+.6}i) s[{},{}]",
                    t.amp.re,
                    t.amp.im,
                    self.level.label(t.to),
                    self.level.label(t.from)
                )
            })
            .collect();
        write!(f, "[{}] {}", self.axis, parts.join(" + "))
    }
}

/// Cavity polarization as amplitudes on the vertical and horizontal unit
/// vectors, `ε = v ε_V + h ε_H`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polarization {
    pub v: Complex64,
    pub h: Complex64,
}

impl Polarization {
    pub fn new(v: Complex64, h: Complex64) -> Result<Self> {
        let n = v.norm_sqr() + h.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("polarization norm² = {n}, expected 1")));
        }
        Ok(Polarization { v, h })
    }

    pub fn vertical() -> Self {
        Polarization { v: Complex64::new(1.0, 0.0), h: ZERO }
    }

    pub fn horizontal() -> Self {
        Polarization { v: ZERO, h: Complex64::new(1.0, 0.0) }
    }

    /// `ε_R = -(ε_V + i ε_H)/√2`.
    pub fn right() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Polarization {
            v: Complex64::new(-s, 0.0),
            h: Complex64::new(0.0, -s),
        }
    }

    /// `ε_L = (ε_V − i ε_H)/√2`.
    pub fn left() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Polarization {
            v: Complex64::new(s, 0.0),
            h: Complex64::new(0.0, -s),
        }
    }

    /// Cartesian vector in V-frame coordinates; `ε_H = ŷ_V`, `ε_V = ẑ_V`.
    fn cartesian(&self) -> [Complex64; 3] {
        [ZERO, self.h, self.v]
    }
}

/// The four named cavity channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "Pi")]
    Pi,
    #[serde(rename = "Sigma")]
    Sigma,
    #[serde(rename = "L")]
    L,
    #[serde(rename = "R")]
    R,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Pi, Channel::Sigma, Channel::L, Channel::R];

    pub fn polarization(self) -> Polarization {
        match self {
            Channel::Pi => Polarization::vertical(),
            Channel::Sigma => Polarization::horizontal(),
            Channel::L => Polarization::left(),
            Channel::R => Polarization::right(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Pi => "Pi",
            Channel::Sigma => "Sigma",
            Channel::L => "L",
            Channel::R => "R",
        }
    }

    /// The channel sharing the cavity with this one under the same basis pair.
    pub fn orthogonal(self) -> Channel {
        match self {
            Channel::Pi => Channel::Sigma,
            Channel::Sigma => Channel::Pi,
            Channel::L => Channel::R,
            Channel::R => Channel::L,
        }
    }

    pub fn raising(self, level: &LevelStructure, axis: Axis) -> CollectiveOp {
        dipole_operator(level, &self.polarization(), axis).expect("named polarizations are normalized")
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Pi" | "pi" | "V" => Ok(Channel::Pi),
            "Sigma" | "sigma" | "H" => Ok(Channel::Sigma),
            "L" | "l" => Ok(Channel::L),
            "R" | "r" => Ok(Channel::R),
            other => Err(Error::domain(format!("unknown channel '{other}'"))),
        }
    }
}

/// Spherical unit vector `ê_p` of a frame, in V coordinates.
fn spherical(axis: Axis, p: i32) -> [Complex64; 3] {
    let [x, y, z] = axis.frame();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = [ZERO; 3];
    for k in 0..3 {
        out[k] = match p {
            0 => Complex64::new(z[k], 0.0),
            1 => -Complex64::new(x[k], y[k]) * s,
            -1 => Complex64::new(x[k], -y[k]) * s,
            _ => unreachable!(),
        };
    }
    out
}

/// Raising operator `D⁺ = Σ_{m,n} C^{m-n}_n (ê_{m-n})* · ε  σ_{e_m g_n}` in
/// the basis of `axis`.
pub fn dipole_operator(level: &LevelStructure, pol: &Polarization, axis: Axis) -> Result<CollectiveOp> {
    let pol = Polarization::new(pol.v, pol.h)?;
    let eps = pol.cartesian();
    let mut terms = Vec::new();
    for n in level.fg().projections() {
        for p in -1..=1 {
            let m = n + HalfInt::from_int(p);
            if !level.fe().admits(m) {
                continue;
            }
            let c = clebsch_gordan(level.fg(), n, HalfInt::from_int(p), level.fe())?;
            if c == 0.0 {
                continue;
            }
            let e = spherical(axis, p);
            let overlap: Complex64 = (0..3).map(|k| e[k].conj() * eps[k]).sum();
            terms.push(Transition {
                to: level.excited(m)?,
                from: level.ground(n)?,
                amp: overlap * c,
            });
        }
    }
    Ok(CollectiveOp::new(*level, axis, terms))
}

/// Re-express an operator in the basis of another axis.
pub fn operator_in_basis(op: &CollectiveOp, to_axis: Axis) -> CollectiveOp {
    if op.axis == to_axis {
        return op.clone();
    }
    let t = basis_change(&op.level, op.axis, to_axis);
    let m = &t * op.single_atom_matrix() * t.adjoint();
    CollectiveOp::from_matrix(op.level, to_axis, &m)
}

/// One coupled ground/excited pair `c |ẽ⟩⟨g̃|`. The vectors are single-atom
/// states over all `ℓ` levels in the basis of the decomposed operator.
#[derive(Clone, Debug)]
pub struct TwoLevelPair {
    pub ground: DVector<Complex64>,
    pub excited: DVector<Complex64>,
    pub coupling: f64,
    /// Level indices when the pair vectors are plain basis states.
    pub labels: Option<(usize, usize)>,
}

/// `D⁺ = Σ_α c_α |ẽ_α⟩⟨g̃_α|` with disjoint pairs.
#[derive(Clone, Debug)]
pub struct MultiTwoLevel {
    pub level: LevelStructure,
    pub axis: Axis,
    pub pairs: Vec<TwoLevelPair>,
}

impl MultiTwoLevel {
    pub fn couplings(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.coupling).collect()
    }

    /// `Σ_α c_α |ẽ_α⟩⟨g̃_α|` as a single-atom matrix.
    pub fn reassemble(&self) -> DMatrix<Complex64> {
        let ell = self.level.ell();
        let mut m = DMatrix::zeros(ell, ell);
        for p in &self.pairs {
            m += (&p.excited * p.ground.adjoint()) * Complex64::new(p.coupling, 0.0);
        }
        m
    }

    /// The same decomposition with pair vectors expressed in another basis.
    pub fn in_basis(&self, to_axis: Axis) -> MultiTwoLevel {
        let t = basis_change(&self.level, self.axis, to_axis);
        MultiTwoLevel {
            level: self.level,
            axis: to_axis,
            pairs: self
                .pairs
                .iter()
                .map(|p| TwoLevelPair {
                    ground: &t * &p.ground,
                    excited: &t * &p.excited,
                    coupling: p.coupling,
                    labels: if to_axis == self.axis { p.labels } else { None },
                })
                .collect(),
        }
    }
}

fn unit(ell: usize, i: usize, phase: Complex64) -> DVector<Complex64> {
    let mut v = DVector::zeros(ell);
    v[i] = phase;
    v
}

/// Decompose a raising dipole operator into disjoint two-level pairs with
/// real couplings.
///
/// Operators whose excited-ground block has at most one entry per row and
/// column are returned as-is (signed real couplings where the amplitude is
/// real). Otherwise the block is factorized by singular values, which
/// diagonalizes `[D⁺, D⁻]`; degenerate couplings are resolved towards the
/// ∥ basis.
pub fn multi_two_level(op: &CollectiveOp) -> Result<MultiTwoLevel> {
    op.validate_raising_dipole()?;
    let level = op.level;
    let ell = level.ell();
    let (ng, ne) = (level.n_ground(), level.n_excited());

    let mut row_count = vec![0usize; ell];
    let mut col_count = vec![0usize; ell];
    for t in &op.terms {
        row_count[t.to] += 1;
        col_count[t.from] += 1;
    }
    if row_count.iter().all(|&c| c <= 1) && col_count.iter().all(|&c| c <= 1) {
        let pairs = op
            .terms
            .iter()
            .map(|t| {
                let (coupling, phase) = if t.amp.im.abs() <= DROP_TOL {
                    (t.amp.re, Complex64::new(1.0, 0.0))
                } else {
                    (t.amp.norm(), t.amp / t.amp.norm())
                };
                TwoLevelPair {
                    ground: unit(ell, t.from, Complex64::new(1.0, 0.0)),
                    excited: unit(ell, t.to, phase),
                    coupling,
                    labels: Some((t.from, t.to)),
                }
            })
            .collect();
        return Ok(MultiTwoLevel { level, axis: op.axis, pairs });
    }

    let full = op.single_atom_matrix();
    let block = full.view((ng, 0), (ne, ng)).clone_owned();
    let svd = block.clone().svd(true, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("singular value decomposition failed".into()))?;
    let values = svd.singular_values;

    // reference directions: ∥-basis ground states expressed in the op basis
    let to_op = basis_change(&level, Axis::Par, op.axis);
    let refs: Vec<DVector<Complex64>> = (0..ng).map(|k| to_op.view((0, k), (ng, 1)).column(0).clone_owned()).collect();

    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 1e-12).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());

    let mut pairs = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && (values[order[i]] - values[order[j]]).abs() < 1e-10 {
            j += 1;
        }
        let cluster: Vec<DVector<Complex64>> = order[i..j]
            .iter()
            .map(|&k| v_t.row(k).adjoint())
            .collect();
        let chosen = if cluster.len() == 1 {
            cluster
        } else {
            resolve_degenerate(&cluster, &refs)
        };
        let sv = values[order[i]];
        for g in chosen {
            let g = canonical_phase(g);
            let e = (&block * &g) / Complex64::new(sv, 0.0);
            let mut ground = DVector::zeros(ell);
            ground.rows_mut(0, ng).copy_from(&g);
            let mut excited = DVector::zeros(ell);
            excited.rows_mut(ng, ne).copy_from(&e);
            pairs.push(TwoLevelPair {
                ground,
                excited,
                coupling: sv,
                labels: None,
            });
        }
        i = j;
    }
    let out = MultiTwoLevel { level, axis: op.axis, pairs };
    let err = (out.reassemble() - full).norm();
    if err > 1e-10 {
        return Err(Error::Numerical(format!("multi-two-level reassembly error {err:.3e}")));
    }
    Ok(out)
}

/// Orthonormal basis of `span(cluster)` built from the projections of the
/// reference vectors, largest projection first.
fn resolve_degenerate(cluster: &[DVector<Complex64>], refs: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    let project = |v: &DVector<Complex64>| -> DVector<Complex64> {
        let mut out = DVector::zeros(v.len());
        for c in cluster {
            out += c * c.dotc(v);
        }
        out
    };
    let mut chosen: Vec<DVector<Complex64>> = Vec::new();
    let mut pool: Vec<DVector<Complex64>> = refs.iter().map(project).collect();
    while chosen.len() < cluster.len() {
        // remove components along already chosen vectors
        for p in pool.iter_mut() {
            for c in &chosen {
                let ov = c.dotc(p);
                *p -= c * ov;
            }
        }
        let best = pool
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .map(|(i, _)| i);
        match best {
            Some(i) if pool[i].norm() > 1e-8 => {
                let v = pool.remove(i);
                let n = v.norm();
                chosen.push(v / Complex64::new(n, 0.0));
            }
            _ => {
                // references exhausted; complete from the cluster itself
                for c in cluster {
                    let mut v = c.clone();
                    for k in &chosen {
                        let ov = k.dotc(&v);
                        v -= k * ov;
                    }
                    if v.norm() > 1e-8 && chosen.len() < cluster.len() {
                        let n = v.norm();
                        chosen.push(v / Complex64::new(n, 0.0));
                    }
                }
            }
        }
    }
    chosen
}

/// Rotate the global phase so the largest component is real and positive.
fn canonical_phase(v: DVector<Complex64>) -> DVector<Complex64> {
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .unwrap_or(ZERO);
    if big.norm() == 0.0 {
        return v;
    }
    let phase = big.conj() / big.norm();
    v * phase
}
