//! Second-order cumulant equations for `S_ab = ⟨Σ_i σ^i_ab⟩` and
//! `T_{ab,cd} = ⟨(Σ_i σ^i_ab)(Σ_j σ^j_cd)⟩`, with connected three-body
//! parts dropped.
//!
//! Every collective operator is written `X = Σ x_ab σ_ab`, so commutators
//! act on coefficient matrices. The slot map `Φ_A(y) = Aᵀy − yAᵀ` gives the
//! coefficients of `[A, σ_ab]` contracted with `y`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::level::LevelStructure;
use crate::ode::{integrate, Control, Stats, Tolerances};

use super::{adjoint_entries, entries, Entry, Probes, Sample};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `out += scale · Φ_A(y)` for an `ℓ×ℓ` matrix `y` stored with strides
/// `(row_stride, col_stride)` inside a larger buffer.
#[inline]
fn slot_map(ell: usize, a: &[Entry], y: &[Complex64], out: &mut [Complex64], stride: (usize, usize), base: usize) {
    let (rs, cs) = stride;
    for &(i, j, v) in a {
        // (Aᵀ y)_{j b} += A_ij y_{i b}
        for b in 0..ell {
            out[base + j * rs + b * cs] += v * y[base + i * rs + b * cs];
        }
        // (y Aᵀ)_{a i} += y_{a j} A_ij
        for r in 0..ell {
            out[base + r * rs + i * cs] -= y[base + r * rs + j * cs] * v;
        }
    }
}

fn phi(ell: usize, a: &[Entry], y: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; ell * ell];
    slot_map(ell, a, y, &mut out, (ell, 1), 0);
    out
}

fn contract(m: &[Entry], ell: usize, s: &[Complex64]) -> Complex64 {
    m.iter().map(|&(r, c, v)| v * s[r * ell + c]).sum()
}

struct ChannelTerms {
    raise: Vec<Entry>,
    lower: Vec<Entry>,
}

/// Cumulant equations for a homogeneous ensemble.
pub struct Cumulant {
    level: LevelStructure,
    ell: usize,
    atoms: f64,
    gamma: f64,
    chi: f64,
    hamiltonian: Vec<Entry>,
    channels: Vec<ChannelTerms>,
    probes: Probes,
}

/// `(S, T)` flattened as `S[a·ℓ+b]` followed by `T[(a·ℓ+b)·ℓ² + c·ℓ+d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantState {
    pub ell: usize,
    pub atoms: f64,
    pub data: Vec<Complex64>,
}

impl CumulantState {
    /// Exact moments of `N` atoms in the product state `psi`:
    /// `T = (1 − 1/N) S⊗S + δ_bc S_ad`.
    pub fn product(psi: &[Complex64], atoms: f64) -> Self {
        let ell = psi.len();
        let sq = ell * ell;
        let mut data = vec![ZERO; sq + sq * sq];
        for a in 0..ell {
            for b in 0..ell {
                // ⟨σ_ab⟩ = N ψ_a* ψ_b
                data[a * ell + b] = psi[a].conj() * psi[b] * atoms;
            }
        }
        let (s, t) = data.split_at_mut(sq);
        for ab in 0..sq {
            for cd in 0..sq {
                t[ab * sq + cd] = s[ab] * s[cd] * (1.0 - 1.0 / atoms);
            }
        }
        for a in 0..ell {
            for b in 0..ell {
                for d in 0..ell {
                    t[(a * ell + b) * sq + b * ell + d] += s[a * ell + d];
                }
            }
        }
        CumulantState { ell, atoms, data }
    }

    pub fn one_body(&self) -> &[Complex64] {
        &self.data[..self.ell * self.ell]
    }

    pub fn two_body(&self) -> &[Complex64] {
        &self.data[self.ell * self.ell..]
    }

    /// `⟨σ_ab⟩`.
    pub fn mean(&self, a: usize, b: usize) -> Complex64 {
        self.data[a * self.ell + b]
    }

    /// `⟨σ_ab σ_cd⟩`.
    pub fn pair(&self, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        let sq = self.ell * self.ell;
        self.data[sq + (a * self.ell + b) * sq + c * self.ell + d]
    }
}

impl Cumulant {
    /// Homogeneous ensemble of `atoms` atoms with coupling weight `weight`.
    pub fn new(gen: &GeneratorSpec, atoms: f64, weight: f64) -> Result<Self> {
        gen.validate()?;
        if !(atoms > 1.0) {
            return Err(Error::domain("cumulant equations need more than one atom"));
        }
        let channels = gen
            .channels
            .iter()
            .map(|op| {
                let raise: Vec<Entry> = entries(op).into_iter().map(|(r, c, v)| (r, c, v * weight)).collect();
                let lower = adjoint_entries(&raise);
                ChannelTerms { raise, lower }
            })
            .collect();
        Ok(Cumulant {
            level: gen.level,
            ell: gen.level.ell(),
            atoms,
            gamma: gen.gamma,
            chi: gen.chi,
            hamiltonian: entries(&gen.hamiltonian),
            channels,
            probes: Probes::new(&gen.level, gen.axis),
        })
    }

    pub fn dim(&self) -> usize {
        let sq = self.ell * self.ell;
        sq + sq * sq
    }

    pub fn rhs(&self, y: &[Complex64], dy: &mut [Complex64]) {
        let ell = self.ell;
        let sq = ell * ell;
        let alpha = Complex64::new(0.5 * self.gamma, -self.chi);
        let beta = Complex64::new(0.5 * self.gamma, self.chi);
        let (s, t) = y.split_at(sq);
        dy.iter_mut().for_each(|v| *v = ZERO);
        let (ds, dt) = dy.split_at_mut(sq);

        let ih: Vec<Entry> = self.hamiltonian.iter().map(|&(r, c, v)| (r, c, Complex64::i() * v)).collect();
        slot_map(ell, &ih, s, ds, (ell, 1), 0);

        let mut a_slot = ih.clone();
        // W accumulates the vector multiplying S in W⊗S + S⊗W
        let mut w = vec![ZERO; sq];
        let mut outer: Vec<(Complex64, Vec<Complex64>, Vec<Complex64>)> = Vec::new();
        for ch in &self.channels {
            let d_plus = contract(&ch.raise, ell, s);
            let d_minus = contract(&ch.lower, ell, s);
            // u = T(m, ·), v = T(·, m†)
            let mut u = vec![ZERO; sq];
            for &(a, b, m) in &ch.raise {
                let row = &t[(a * ell + b) * sq..(a * ell + b + 1) * sq];
                for (ui, ti) in u.iter_mut().zip(row) {
                    *ui += m * ti;
                }
            }
            let mut v = vec![ZERO; sq];
            for (ab, vi) in v.iter_mut().enumerate() {
                let row = &t[ab * sq..(ab + 1) * sq];
                *vi = ch.lower.iter().map(|&(c, d, m)| m * row[c * ell + d]).sum();
            }
            // F* = −Φ_{m†}, G* = Φ_m
            let neg = |x: Vec<Complex64>| x.into_iter().map(|z| -z).collect::<Vec<_>>();
            let f = neg(phi(ell, &ch.lower, s));
            let g = phi(ell, &ch.raise, s);
            let fu = neg(phi(ell, &ch.lower, &u));
            let gv = phi(ell, &ch.raise, &v);
            for i in 0..sq {
                ds[i] += alpha * fu[i] + beta * gv[i];
                w[i] += alpha * fu[i] + beta * gv[i] - 2.0 * (alpha * d_plus * f[i] + beta * d_minus * g[i]);
            }
            a_slot.extend(ch.raise.iter().map(|&(r, c, m)| (r, c, beta * d_minus * m)));
            a_slot.extend(ch.lower.iter().map(|&(r, c, m)| (r, c, -alpha * d_plus * m)));
            outer.push((alpha, u, f));
            outer.push((beta, g, v));
        }

        // (Φ_A ⊗ 1) T: first index pair strided by ℓ·ℓ², second fixed
        for cd in 0..sq {
            slot_map(ell, &a_slot, t, dt, (ell * sq, sq), cd);
        }
        // (1 ⊗ Φ_A) T
        for ab in 0..sq {
            slot_map(ell, &a_slot, t, dt, (ell, 1), ab * sq);
        }
        for ab in 0..sq {
            let row = &mut dt[ab * sq..(ab + 1) * sq];
            for cd in 0..sq {
                let mut acc = w[ab] * s[cd] + s[ab] * w[cd];
                for (c, x, z) in &outer {
                    acc += c * (x[ab] * z[cd] + z[ab] * x[cd]);
                }
                row[cd] += acc;
            }
        }
    }

    pub fn sample(&self, time: f64, y: &[Complex64]) -> Sample {
        let ell = self.ell;
        let sq = ell * ell;
        let n = self.atoms;
        let populations: Vec<f64> = (0..ell).map(|a| y[a * ell + a].re / n).collect();
        let n_e = self.level.excited_indices().map(|a| populations[a]).sum();
        let t = &y[sq..];
        let mut emission = [0.0; 4];
        for (e, m) in emission.iter_mut().zip(&self.probes.ops) {
            let lower = adjoint_entries(m);
            let mut acc = ZERO;
            for &(a, b, x) in m {
                for &(c, d, z) in &lower {
                    acc += x * z * t[(a * ell + b) * sq + c * ell + d];
                }
            }
            *e = acc.re;
        }
        Sample {
            time,
            n_e,
            populations,
            emission,
        }
    }

    pub fn evolve(&self, init: &CumulantState, grid: &[f64], tol: &Tolerances) -> Result<(Vec<Sample>, CumulantState, Stats)> {
        if init.ell != self.ell || init.data.len() != self.dim() {
            return Err(Error::domain("cumulant state does not match the level structure"));
        }
        let mut y = init.data.clone();
        let mut samples = Vec::with_capacity(grid.len());
        let stats = integrate(|_, y, dy| self.rhs(y, dy), &mut y, grid, tol, |t, y| {
            samples.push(self.sample(t, y));
            Control::Continue
        })?;
        Ok((
            samples,
            CumulantState {
                ell: self.ell,
                atoms: self.atoms,
                data: y,
            },
            stats,
        ))
    }
}
