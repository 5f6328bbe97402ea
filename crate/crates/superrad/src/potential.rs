//! Superradiance potentials: construction from a prepared state, gradient
//! flow, stationary points, curvature and delay-time order, and the search
//! for product states dark to two polarizations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::Axis;
use crate::error::{Error, Result};
use crate::level::LevelStructure;
use crate::ode::{integrate, Control, Tolerances};
use crate::operators::{multi_two_level, operator_in_basis, CollectiveOp, MultiTwoLevel};
use crate::semiclassical::bloch::{bloch_projection, BlochSet, Frame};
use crate::semiclassical::OneBodyState;

/// One `r sin(c ξ θ + φ)` contribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub radius: f64,
    pub coupling: f64,
    pub phase: f64,
}

/// `V(θ) = (1/N) Σ_α r_α ⟨sin(c_α ξ θ + φ_α)⟩_ξ + 1/2`, where `⟨·⟩_ξ`
/// averages over the site weights (equal atom numbers per site).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub terms: Vec<PotentialTerm>,
    pub weights: Vec<f64>,
    pub n_atoms: f64,
    /// `n_e = V − offset`; nonzero when some ground population is not
    /// covered by any pair.
    pub offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationaryKind {
    Minimum,
    Maximum,
    /// Odd lowest non-vanishing order.
    Saddle,
    /// No non-vanishing derivative up to the highest order checked.
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub theta: f64,
    pub value: f64,
    /// Lowest non-vanishing derivative order (≥ 2).
    pub order: usize,
    pub kind: StationaryKind,
}

/// Highest derivative order inspected when classifying extrema.
pub const MAX_ORDER: usize = 10;
const SCAN_STEP: f64 = 1e-3;
const ROOT_TOL: f64 = 1e-10;
const VANISH: f64 = 1e-8;

impl PotentialSpec {
    pub fn homogeneous(terms: Vec<PotentialTerm>, n_atoms: f64) -> Self {
        PotentialSpec {
            terms,
            weights: vec![1.0],
            n_atoms,
            offset: 0.0,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    /// The same potential for an ensemble of `n_atoms` atoms.
    pub fn rescaled(&self, n_atoms: f64) -> Self {
        let s = n_atoms / self.n_atoms;
        PotentialSpec {
            terms: self.terms.iter().map(|t| PotentialTerm { radius: t.radius * s, ..*t }).collect(),
            n_atoms,
            ..self.clone()
        }
    }

    /// `k`-th derivative; `k = 0` is the potential itself.
    pub fn derivative(&self, theta: f64, k: usize) -> f64 {
        let shift = k as f64 * std::f64::consts::FRAC_PI_2;
        let mut acc = 0.0;
        for w in &self.weights {
            for t in &self.terms {
                let c = t.coupling * w;
                acc += t.radius * c.powi(k as i32) * (c * theta + t.phase + shift).sin();
            }
        }
        let v = acc / (self.n_atoms * self.weights.len() as f64);
        if k == 0 {
            v + 0.5
        } else {
            v
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.derivative(theta, 0)
    }

    pub fn slope(&self, theta: f64) -> f64 {
        self.derivative(theta, 1)
    }

    pub fn curvature(&self, theta: f64) -> f64 {
        self.derivative(theta, 2)
    }

    pub fn excited_fraction(&self, theta: f64) -> f64 {
        self.value(theta) - self.offset
    }

    /// Size of the `k`-th derivative terms, used as a vanishing threshold.
    fn scale(&self, k: usize) -> f64 {
        let mut s = 0.0;
        for w in &self.weights {
            for t in &self.terms {
                s += (t.radius * (t.coupling * w).powi(k as i32)).abs();
            }
        }
        s / (self.n_atoms * self.weights.len() as f64)
    }

    /// Lowest non-vanishing derivative order at `theta` and its sign.
    pub fn classify(&self, theta: f64) -> (usize, StationaryKind) {
        for k in 2..=MAX_ORDER {
            let d = self.derivative(theta, k);
            if d.abs() > VANISH * self.scale(k).max(f64::MIN_POSITIVE) {
                let kind = if k % 2 == 1 {
                    StationaryKind::Saddle
                } else if d > 0.0 {
                    StationaryKind::Minimum
                } else {
                    StationaryKind::Maximum
                };
                return (k, kind);
            }
        }
        (MAX_ORDER + 1, StationaryKind::Flat)
    }

    fn point(&self, theta: f64) -> StationaryPoint {
        let (order, kind) = self.classify(theta);
        StationaryPoint {
            theta,
            value: self.value(theta),
            order,
            kind,
        }
    }

    fn is_stationary(&self, theta: f64) -> bool {
        self.slope(theta).abs() <= VANISH * self.scale(1).max(f64::MIN_POSITIVE)
    }

    /// Stationary points in `[lo, hi]`, sorted by angle.
    pub fn stationary_points(&self, lo: f64, hi: f64) -> Vec<StationaryPoint> {
        let mut roots: Vec<f64> = Vec::new();
        let n = ((hi - lo) / SCAN_STEP).ceil().max(1.0) as usize;
        let at = |i: usize| (lo + i as f64 * SCAN_STEP).min(hi);
        // sign changes of V′, then of V″ at points where V′ also vanishes
        for k in [1usize, 2] {
            let mut prev = self.derivative(at(0), k);
            if prev == 0.0 && self.is_stationary(at(0)) {
                roots.push(at(0));
            }
            for i in 1..=n {
                let x = at(i);
                let cur = self.derivative(x, k);
                if cur == 0.0 {
                    if self.is_stationary(x) {
                        roots.push(x);
                    }
                } else if prev != 0.0 && prev.signum() != cur.signum() {
                    let r = bisect(|t| self.derivative(t, k), at(i - 1), x);
                    if k == 1 || self.is_stationary(r) {
                        roots.push(r);
                    }
                }
                prev = cur;
            }
        }
        let mut pts: Vec<StationaryPoint> = roots.into_iter().map(|r| self.refine(r)).filter(|p| p.theta >= lo && p.theta <= hi).collect();
        pts.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());
        pts.dedup_by(|a, b| (a.theta - b.theta).abs() < 1e-7);
        pts
    }

    /// Near a flat point, rounding in the couplings spreads spurious roots
    /// of `V′` and `V″` over a finite interval. The simple root of
    /// `V^(k−1)` stays sharp, so scan nearby roots of every derivative and
    /// keep the highest-order one.
    fn refine(&self, theta: f64) -> StationaryPoint {
        let mut best = self.point(theta);
        if best.order <= 2 {
            return best;
        }
        let c_max = self
            .terms
            .iter()
            .flat_map(|t| self.weights.iter().map(move |w| (t.coupling * w).abs()))
            .fold(0.0, f64::max);
        let w = 0.2 / c_max.max(1e-12);
        let n = 2000;
        let step = 2.0 * w / n as f64;
        for j in 1..MAX_ORDER {
            let at = |i: usize| theta - w + i as f64 * step;
            let mut prev = self.derivative(at(0), j);
            for i in 1..=n {
                let cur = self.derivative(at(i), j);
                if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
                    let r = bisect(|t| self.derivative(t, j), at(i - 1), at(i));
                    if self.is_stationary(r) {
                        let p = self.point(r);
                        if p.order > best.order {
                            best = p;
                        }
                    }
                }
                prev = cur;
            }
        }
        best
    }

    /// The stationary point the gradient flow from `theta0` converges to.
    pub fn flow_endpoint(&self, theta0: f64) -> StationaryPoint {
        if self.is_stationary(theta0) {
            return self.point(theta0);
        }
        let dir = -self.slope(theta0).signum();
        // widen the search window until a stationary point appears
        let mut span = 4.0 * std::f64::consts::PI;
        loop {
            let (lo, hi) = if dir > 0.0 { (theta0, theta0 + span) } else { (theta0 - span, theta0) };
            let pts = self.stationary_points(lo, hi);
            let next = if dir > 0.0 {
                pts.into_iter().find(|p| p.theta > theta0)
            } else {
                pts.into_iter().rev().find(|p| p.theta < theta0)
            };
            if let Some(p) = next {
                return p;
            }
            span *= 2.0;
        }
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `r_α e^{iφ_α} = S^⊥_α + i S^z_α` from a Bloch projection.
pub fn potential_from_bloch(set: &BlochSet, n_atoms: f64) -> PotentialSpec {
    let terms = (0..set.spins.len())
        .map(|a| {
            let z = set.polar(a);
            PotentialTerm {
                radius: z.norm(),
                coupling: set.couplings[a],
                phase: z.arg(),
            }
        })
        .collect();
    let covered: f64 = set.radii.iter().sum::<f64>() * 2.0;
    PotentialSpec {
        terms,
        weights: vec![1.0],
        n_atoms,
        offset: 0.5 * (n_atoms - covered).max(0.0) / n_atoms,
    }
}

/// Potential of the excitation-decay protocol: all atoms start in the
/// ground state `psi` (in `axis`) and are rotated by `drive`.
pub fn potential_from_state(level: &LevelStructure, axis: Axis, psi: &[Complex64], drive: &CollectiveOp, weights: Vec<f64>) -> Result<PotentialSpec> {
    let excited: f64 = level.excited_indices().map(|i| psi[i].norm_sqr()).sum();
    if excited > 1e-12 {
        return Err(Error::domain("potential_from_state needs a ground-manifold initial state"));
    }
    let n = 1.0;
    let state = OneBodyState::homogeneous(*level, axis, psi, n)?;
    let dec = multi_two_level(&operator_in_basis(drive, axis))?;
    let set = bloch_projection(&state, &dec, Frame::Drive { phase: 0.0 }, 0.0)?;
    Ok(potential_from_bloch(&set, n).with_weights(weights))
}

/// Exact single-atom excited fraction after a Rabi pulse of area `theta`.
pub fn rabi_excitation(level: &LevelStructure, psi: &[Complex64], drive: &CollectiveOp, theta: f64) -> f64 {
    let out = crate::lindblad::pulse_product_state(psi, &drive.single_atom_matrix(), theta, 0.0);
    level.excited_indices().map(|i| out[i].norm_sqr()).sum()
}

/// One sample of the gradient flow `dθ/dt = −NΓ V′(θ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSample {
    pub time: f64,
    pub theta: f64,
    pub n_e: f64,
}

/// Integrate the gradient flow over `grid` (times in units of `1/Γ`).
pub fn theta_flow(pot: &PotentialSpec, theta0: f64, gamma: f64, grid: &[f64]) -> Result<Vec<FlowSample>> {
    let rate = pot.n_atoms * gamma;
    let mut y = vec![theta0];
    let mut out = Vec::with_capacity(grid.len());
    integrate(
        |_, y: &[f64], dy: &mut [f64]| dy[0] = -rate * pot.slope(y[0]),
        &mut y,
        grid,
        &Tolerances::new(1e-11, 1e-13),
        |t, y| {
            out.push(FlowSample {
                time: t,
                theta: y[0],
                n_e: pot.excited_fraction(y[0]),
            });
            Control::Continue
        },
    )?;
    Ok(out)
}

/// `d²V/dθ²` at the current state for decay through `dec`:
/// `−(1/N) Σ_α c_α² S^z_α`. Independent of the in-plane frame.
pub fn local_curvature(state: &OneBodyState, dec: &MultiTwoLevel) -> Result<f64> {
    let set = bloch_projection(state, dec, Frame::Drive { phase: 0.0 }, 0.0)?;
    let n = state.n_atoms();
    Ok(-set.couplings.iter().zip(&set.spins).map(|(c, s)| c * c * s[2]).sum::<f64>() / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalCurvature {
    /// `d²U/dθ̃²` at `θ̃ = 0`.
    pub curvature: f64,
    /// `|⟨D₂⁺⟩|/N`; nonzero means the state is not stationary for the
    /// orthogonal channel and `U′(0) ≠ 0`.
    pub dipole: f64,
    pub slope: f64,
}

/// Curvature of the orthogonal potential for `state` and channel `orth`.
pub fn orthogonal_curvature(state: &OneBodyState, orth: &CollectiveOp) -> Result<OrthogonalCurvature> {
    let dec = multi_two_level(orth)?;
    let set = bloch_projection(state, &dec, Frame::Dipole, 0.0)?;
    let n = state.n_atoms();
    let dipole = set.dipole[0].hypot(set.dipole[1]) / n;
    let curvature = -set.couplings.iter().zip(&set.spins).map(|(c, s)| c * c * s[2]).sum::<f64>() / n;
    // U′(0) = (1/N) Σ c r cos φ = (1/N) Σ c S^⊥
    let slope = set.couplings.iter().zip(&set.perpendicular).map(|(c, p)| c * p).sum::<f64>() / n;
    Ok(OrthogonalCurvature { curvature, dipole, slope })
}

/// Order of the extremum and the delay-time scale `N Γ t_D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    /// `n` = lowest non-vanishing derivative order minus two.
    pub order: usize,
    /// `log N` for `n = 0`, `N^{n/2}` otherwise.
    pub scaled_delay: f64,
}

pub fn delay_time(pot: &PotentialSpec, theta_e: f64, n_atoms: f64) -> Result<DelayEstimate> {
    if !pot.is_stationary(theta_e) {
        return Err(Error::domain(format!("θ = {theta_e} is not a stationary point (V′ = {:e})", pot.slope(theta_e))));
    }
    let (k, kind) = pot.classify(theta_e);
    if kind == StationaryKind::Flat {
        return Err(Error::Numerical(format!("no non-vanishing derivative up to order {MAX_ORDER}")));
    }
    let order = k - 2;
    let scaled_delay = if order == 0 {
        n_atoms.ln()
    } else {
        n_atoms.powf(order as f64 / 2.0)
    };
    Ok(DelayEstimate { order, scaled_delay })
}

/// Search settings for product states dark to two channels.
#[derive(Clone, Debug)]
pub struct DarkSearch {
    pub channels: [CollectiveOp; 2],
    /// Required excited fraction; ground states are trivially dark.
    pub excited_fraction: Option<f64>,
    /// Levels allowed to carry amplitude (all when empty).
    pub support: Vec<usize>,
    pub starts: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    /// Positive curvature for both channels.
    Stable,
    /// Negative curvature for both channels.
    Unstable,
    /// Mixed or marginal curvatures.
    Saddle,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DarkSolution {
    pub amplitudes: Vec<Complex64>,
    /// `|⟨D_γ⁺⟩|` per atom for both channels.
    pub residuals: [f64; 2],
    pub excited_fraction: f64,
    pub curvatures: [f64; 2],
    pub stability: Stability,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DarkReport {
    pub solutions: Vec<DarkSolution>,
    pub failed_starts: usize,
}

fn expectation(m: &DMatrix<Complex64>, psi: &DVector<Complex64>) -> Complex64 {
    (psi.adjoint() * m * psi)[(0, 0)]
}

/// Residuals `Re/Im ⟨M_γ⟩`, optional `n_e − target`, and `|ψ|² − 1`.
fn residual(ms: &[DMatrix<Complex64>; 2], excited: &[usize], target: Option<f64>, psi: &DVector<Complex64>) -> Vec<f64> {
    let mut r = Vec::with_capacity(6);
    for m in ms {
        let e = expectation(m, psi);
        r.push(e.re);
        r.push(e.im);
    }
    if let Some(t) = target {
        r.push(excited.iter().map(|&i| psi[i].norm_sqr()).sum::<f64>() - t);
    }
    r.push(psi.norm_squared() - 1.0);
    r
}

fn jacobian(ms: &[DMatrix<Complex64>; 2], excited: &[usize], target: Option<f64>, psi: &DVector<Complex64>, support: &[usize]) -> DMatrix<f64> {
    let rows = 5 + usize::from(target.is_some());
    let mut j = DMatrix::zeros(rows, 2 * support.len());
    for (g, m) in ms.iter().enumerate() {
        let mpsi = m * psi;
        let mdpsi = m.adjoint() * psi;
        for (col, &k) in support.iter().enumerate() {
            // ∂/∂Re ψ_k and ∂/∂Im ψ_k of ψ†Mψ
            let d_re = mpsi[k] + mdpsi[k].conj();
            let d_im = Complex64::i() * (mdpsi[k].conj() - mpsi[k]);
            j[(2 * g, 2 * col)] = d_re.re;
            j[(2 * g + 1, 2 * col)] = d_re.im;
            j[(2 * g, 2 * col + 1)] = d_im.re;
            j[(2 * g + 1, 2 * col + 1)] = d_im.im;
        }
    }
    let mut row = 4;
    if target.is_some() {
        for (col, &k) in support.iter().enumerate() {
            if excited.contains(&k) {
                j[(row, 2 * col)] = 2.0 * psi[k].re;
                j[(row, 2 * col + 1)] = 2.0 * psi[k].im;
            }
        }
        row += 1;
    }
    for (col, &k) in support.iter().enumerate() {
        j[(row, 2 * col)] = 2.0 * psi[k].re;
        j[(row, 2 * col + 1)] = 2.0 * psi[k].im;
    }
    j
}

fn newton(ms: &[DMatrix<Complex64>; 2], excited: &[usize], target: Option<f64>, support: &[usize], mut psi: DVector<Complex64>) -> Option<DVector<Complex64>> {
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut r = residual(ms, excited, target, &psi);
    let mut lambda = 1e-6;
    for _ in 0..500 {
        if r.iter().all(|x| x.abs() < 1e-13) {
            return Some(psi);
        }
        let j = jacobian(ms, excited, target, &psi, support);
        let jjt = &j * j.transpose();
        let current = norm(&r);
        let rv = DVector::from_vec(r.clone());
        // Levenberg–Marquardt on the minimum-norm step, renormalized onto the sphere
        let mut accepted = false;
        while lambda < 1e8 {
            let sys = &jjt + DMatrix::identity(j.nrows(), j.nrows()) * lambda;
            let y = sys.lu().solve(&rv)?;
            let step = -(j.transpose() * y);
            let mut trial = psi.clone();
            for (col, &k) in support.iter().enumerate() {
                trial[k] += Complex64::new(step[2 * col], step[2 * col + 1]);
            }
            trial /= Complex64::new(trial.norm(), 0.0);
            let rt = residual(ms, excited, target, &trial);
            if norm(&rt) < current {
                psi = trial;
                r = rt;
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    if r.iter().all(|x| x.abs() < 1e-10) {
        Some(psi)
    } else {
        None
    }
}

fn canonical(mut psi: DVector<Complex64>) -> DVector<Complex64> {
    psi /= Complex64::new(psi.norm(), 0.0);
    if let Some(k) = (0..psi.len()).max_by(|&a, &b| psi[a].norm().partial_cmp(&psi[b].norm()).unwrap()) {
        let ph = psi[k] / psi[k].norm();
        psi /= ph;
    }
    psi
}

/// Multi-start damped Newton search for `⟨D₁⁺⟩ = ⟨D₂⁺⟩ = 0` product states.
pub fn find_mf_dark_two_pol(search: &DarkSearch) -> Result<DarkReport> {
    let [a, b] = &search.channels;
    if a.level != b.level || a.axis != b.axis {
        return Err(Error::domain("both channels must share level structure and basis"));
    }
    let level = a.level;
    let ell = level.ell();
    let support: Vec<usize> = if search.support.is_empty() { (0..ell).collect() } else { search.support.clone() };
    if support.iter().any(|&k| k >= ell) {
        return Err(Error::domain("support index out of range"));
    }
    let excited: Vec<usize> = level.excited_indices().collect();
    let ms = [a.single_atom_matrix(), b.single_atom_matrix()];
    let decs = [multi_two_level(a)?, multi_two_level(b)?];
    let target = search.excited_fraction;

    let found: Vec<Option<DVector<Complex64>>> = (0..search.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
            rng.set_stream(s as u64);
            let mut psi = DVector::<Complex64>::zeros(ell);
            for &k in &support {
                psi[k] = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            }
            let nrm = psi.norm();
            psi /= Complex64::new(nrm, 0.0);
            newton(&ms, &excited, target, &support, psi).map(canonical)
        })
        .collect();

    let mut solutions: Vec<DarkSolution> = Vec::new();
    let mut kept: Vec<DVector<Complex64>> = Vec::new();
    let mut failed_starts = 0;
    for f in found {
        let Some(psi) = f else {
            failed_starts += 1;
            continue;
        };
        if kept.iter().any(|k| k.dotc(&psi).norm_sqr() > 1.0 - 1e-8) {
            continue;
        }
        let amps: Vec<Complex64> = psi.iter().copied().collect();
        let state = OneBodyState::homogeneous(level, a.axis, &amps, 1.0)?;
        let curvatures = [local_curvature(&state, &decs[0])?, local_curvature(&state, &decs[1])?];
        let tol = 1e-9;
        let stability = if curvatures.iter().all(|&c| c > tol) {
            Stability::Stable
        } else if curvatures.iter().all(|&c| c < -tol) {
            Stability::Unstable
        } else {
            Stability::Saddle
        };
        solutions.push(DarkSolution {
            residuals: [expectation(&ms[0], &psi).norm(), expectation(&ms[1], &psi).norm()],
            excited_fraction: excited.iter().map(|&i| psi[i].norm_sqr()).sum(),
            amplitudes: amps,
            curvatures,
            stability,
        });
        kept.push(psi);
    }
    Ok(DarkReport { solutions, failed_starts })
}
