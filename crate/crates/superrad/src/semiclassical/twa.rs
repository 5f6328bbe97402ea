//! Truncated Wigner ensembles: Gaussian sampling of the one-body variables
//! followed by mean-field trajectories.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ode::{integrate, Control, Tolerances};

use super::{excited_fraction, populations, MeanField, OneBodyState, Sample};

/// Trajectories handled sequentially by one worker. Fixed so that the
/// reduction order does not depend on the thread count.
const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwaOptions {
    pub n_traj: usize,
    pub seed: u64,
    pub tol: Tolerances,
}

impl TwaOptions {
    pub fn new(n_traj: usize, seed: u64) -> Self {
        TwaOptions {
            n_traj,
            seed,
            tol: Tolerances::new(1e-7, 1e-9),
        }
    }
}

/// Hermitian single-atom operators `σ_aa`, `σ^x_ab`, `σ^y_ab` (`a > b`).
fn variable_operators(ell: usize) -> Vec<DMatrix<Complex64>> {
    let mut ops = Vec::with_capacity(ell * ell);
    for a in 0..ell {
        let mut m = DMatrix::zeros(ell, ell);
        m[(a, a)] = Complex64::new(1.0, 0.0);
        ops.push(m);
    }
    for a in 0..ell {
        for b in 0..a {
            let mut x = DMatrix::zeros(ell, ell);
            x[(a, b)] = Complex64::new(0.5, 0.0);
            x[(b, a)] = Complex64::new(0.5, 0.0);
            ops.push(x);
            let mut y = DMatrix::zeros(ell, ell);
            // (σ_ab − σ_ba)/(2i)
            y[(a, b)] = Complex64::new(0.0, -0.5);
            y[(b, a)] = Complex64::new(0.0, 0.5);
            ops.push(y);
        }
    }
    ops
}

/// Gaussian phase-space distribution of one site group.
#[derive(Clone, Debug)]
struct GroupSampler {
    mean: Vec<f64>,
    /// Columns scaled by `√(N λ_j)`.
    factor: DMatrix<f64>,
    clipped: f64,
}

impl GroupSampler {
    fn new(psi: &[Complex64], atoms: f64) -> Result<Self> {
        let ell = psi.len();
        let v = nalgebra::DVector::from_column_slice(psi);
        let ops = variable_operators(ell);
        let k = ops.len();
        let mu: Vec<f64> = ops.iter().map(|o| (v.adjoint() * o * &v)[(0, 0)].re).collect();
        // Re⟨o_i o_j⟩ = Re((o_i ψ)†(o_j ψ)) contracts same-atom products exactly
        let applied: Vec<_> = ops.iter().map(|o| o * &v).collect();
        let mut cov = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                cov[(i, j)] = applied[i].dotc(&applied[j]).re - mu[i] * mu[j];
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut clipped: f64 = 0.0;
        let mut factor = eig.eigenvectors.clone();
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam < -1e-10 {
                return Err(Error::Numerical(format!("sampling covariance has eigenvalue {lam:e}")));
            }
            if lam < 0.0 {
                clipped = clipped.max(-lam);
            }
            // rounding noise on exactly conserved combinations
            let lam = if lam.abs() < 1e-13 { 0.0 } else { lam };
            let s = (lam.max(0.0) * atoms).sqrt();
            factor.column_mut(j).scale_mut(s);
        }
        Ok(GroupSampler {
            mean: mu.iter().map(|m| m * atoms).collect(),
            factor,
            clipped,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, ell: usize, out: &mut [Complex64]) {
        let k = self.mean.len();
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = self.mean.clone();
        for (j, zj) in z.iter().enumerate() {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += self.factor[(i, j)] * zj;
            }
        }
        for a in 0..ell {
            out[a * ell + a] = Complex64::new(x[a], 0.0);
        }
        let mut idx = ell;
        for a in 0..ell {
            for b in 0..a {
                let (re, im) = (x[idx], x[idx + 1]);
                idx += 2;
                // P[b][a] = ⟨σ_ab⟩ = X + iY
                out[b * ell + a] = Complex64::new(re, im);
                out[a * ell + b] = Complex64::new(re, -im);
            }
        }
    }
}

/// Phase-space sampler for a product initial state.
#[derive(Clone, Debug)]
pub struct Sampler {
    ell: usize,
    groups: Vec<GroupSampler>,
}

impl Sampler {
    pub fn new(psi: &[Complex64], state: &OneBodyState) -> Result<Self> {
        let groups = state
            .groups
            .iter()
            .map(|g| GroupSampler::new(psi, g.atoms))
            .collect::<Result<_>>()?;
        Ok(Sampler { ell: state.ell(), groups })
    }

    /// Largest eigenvalue magnitude clipped to zero.
    pub fn clipped(&self) -> f64 {
        self.groups.iter().map(|g| g.clipped).fold(0.0, f64::max)
    }

    /// Trajectory `index` of the ensemble with `seed`.
    pub fn draw(&self, seed: u64, index: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let sq = self.ell * self.ell;
        let mut out = vec![Complex64::new(0.0, 0.0); self.groups.len() * sq];
        for (g, blk) in self.groups.iter().zip(out.chunks_mut(sq)) {
            g.draw(&mut rng, self.ell, blk);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TwaResult {
    pub n_traj: usize,
    pub seed: u64,
    /// Ensemble averages; emission uses the symmetric-ordering estimator.
    pub samples: Vec<Sample>,
    /// `n_e` of every trajectory at the last grid time.
    pub final_excited: Vec<f64>,
    /// Trajectories ending with a negative level population.
    pub negative_trajectories: usize,
    /// Most negative final population over all trajectories (divided by `N`).
    pub min_population: f64,
    pub clipped_covariance: f64,
}

impl TwaResult {
    /// Normalized histogram of the final excited fraction over `bins`
    /// equal bins on `[lo, hi]`. Returns `(bin centre, probability density)`.
    pub fn histogram(&self, bins: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in &self.final_excited {
            let b = ((x - lo) / width).floor();
            if b >= 0.0 && (b as usize) < bins {
                counts[b as usize] += 1;
            }
        }
        let total = self.final_excited.len().max(1) as f64;
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (lo + (i as f64 + 0.5) * width, c as f64 / (total * width)))
            .collect()
    }
}

/// Per-chunk accumulator: flat sums over time of `n_e`, populations and
/// emission.
struct Partial {
    sums: Vec<f64>,
    finals: Vec<f64>,
    negative: usize,
    min_pop: f64,
}

fn pairwise_sum(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// Run `opts.n_traj` trajectories of `mf` from the product state `psi`.
pub fn twa_ensemble(mf: &MeanField, psi: &[Complex64], grid: &[f64], opts: &TwaOptions) -> Result<TwaResult> {
    if opts.n_traj == 0 {
        return Err(Error::domain("TWA needs at least one trajectory"));
    }
    let template = OneBodyState::product(*mf.level(), mf.axis(), psi, mf.groups().to_vec())?;
    let sampler = Sampler::new(psi, &template)?;
    let ell = mf.level().ell();
    let n = mf.n_atoms();
    let width = 1 + ell + 4;
    let nt = grid.len();
    let level = *mf.level();
    let groups = mf.groups().to_vec();
    let n_chunks = opts.n_traj.div_ceil(CHUNK);

    let partials: Vec<Result<Partial>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(opts.n_traj);
            let mut traj_rows = Vec::with_capacity(hi - lo);
            let mut finals = Vec::with_capacity(hi - lo);
            let mut negative = 0;
            let mut min_pop = f64::INFINITY;
            for idx in lo..hi {
                let mut y = sampler.draw(opts.seed, idx as u64);
                let mut rows = vec![0.0; nt * width];
                let mut step = 0;
                integrate(|_, y, dy| mf.rhs(y, dy), &mut y, grid, &opts.tol, |_, y| {
                    let row = &mut rows[step * width..(step + 1) * width];
                    row[0] = excited_fraction(&level, y, n);
                    row[1..1 + ell].copy_from_slice(&populations(&level, y, n));
                    row[1 + ell..].copy_from_slice(&mf.probes().wigner_emission(ell, &groups, y));
                    step += 1;
                    Control::Continue
                })
                .map_err(|e| Error::Numerical(format!("trajectory {idx}: {e}")))?;
                let pops = populations(&level, &y, n);
                let lowest = pops.iter().copied().fold(f64::INFINITY, f64::min);
                if lowest < 0.0 {
                    negative += 1;
                }
                min_pop = min_pop.min(lowest);
                finals.push(excited_fraction(&level, &y, n));
                traj_rows.push(rows);
            }
            Ok(Partial {
                sums: pairwise_sum(traj_rows),
                finals,
                negative,
                min_pop,
            })
        })
        .collect();

    let mut sums = Vec::with_capacity(n_chunks);
    let mut final_excited = Vec::with_capacity(opts.n_traj);
    let mut negative_trajectories = 0;
    let mut min_population = f64::INFINITY;
    for p in partials {
        let p = p?;
        sums.push(p.sums);
        final_excited.extend(p.finals);
        negative_trajectories += p.negative;
        min_population = min_population.min(p.min_pop);
    }
    let total = pairwise_sum(sums);
    let inv = 1.0 / opts.n_traj as f64;
    let samples = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let row = &total[i * width..(i + 1) * width];
            let mut emission = [0.0; 4];
            for (e, v) in emission.iter_mut().zip(&row[1 + ell..]) {
                *e = v * inv;
            }
            Sample {
                time: t,
                n_e: row[0] * inv,
                populations: row[1..1 + ell].iter().map(|v| v * inv).collect(),
                emission,
            }
        })
        .collect();
    Ok(TwaResult {
        n_traj: opts.n_traj,
        seed: opts.seed,
        samples,
        final_excited,
        negative_trajectories,
        min_population,
        clipped_covariance: sampler.clipped(),
    })
}
