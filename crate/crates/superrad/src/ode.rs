//! Adaptive Dormand–Prince 5(4) integration for real or complex state
//! vectors, stepping exactly onto a caller-supplied output grid.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar types the integrator can carry.
pub trait Element: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn magnitude(self) -> f64;
}

impl Element for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Element for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the right-hand side when absent.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: None,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

/// Returned by observers to stop integration early.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Last grid time handed to the observer.
    pub t_end: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<E: Element>(out: &mut [E], y: &[E], h: f64, terms: &[(f64, &[E])]) {
    for i in 0..out.len() {
        let mut acc = E::default();
        for (c, k) in terms {
            acc = acc + k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrate `dy/dt = rhs(t, y)` from `grid[0]` through every grid point,
/// calling `observe` at each. `y` holds the state at the last observed
/// time on return.
pub fn integrate<E, F, O>(
    mut rhs: F,
    y: &mut Vec<E>,
    grid: &[f64],
    tol: &Tolerances,
    mut observe: O,
) -> Result<Stats>
where
    E: Element,
    F: FnMut(f64, &[E], &mut [E]),
    O: FnMut(f64, &[E]) -> Control,
{
    let mut stats = Stats::default();
    let Some(&t0) = grid.first() else {
        return Ok(stats);
    };
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("output grid must be non-decreasing"));
    }
    stats.t_end = t0;
    if observe(t0, y) == Control::Stop {
        return Ok(stats);
    }
    let n = y.len();
    let mut k = vec![vec![E::default(); n]; 7];
    let mut tmp = vec![E::default(); n];
    let mut ynew = vec![E::default(); n];
    rhs(t0, y, &mut k[0]);
    stats.evaluations += 1;

    let norm = |v: &[E], a: &[E], b: &[E]| -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        let s: f64 = v
            .iter()
            .zip(a.iter().zip(b))
            .map(|(e, (x, z))| {
                let sc = tol.atol + tol.rtol * x.magnitude().max(z.magnitude());
                (e.magnitude() / sc).powi(2)
            })
            .sum();
        (s / v.len() as f64).sqrt()
    };

    let span = grid.last().unwrap() - t0;
    let mut h = match tol.h_init {
        Some(h) => h,
        None => {
            let zero = vec![E::default(); n];
            let d0 = norm(y, y, &zero);
            let d1 = norm(&k[0], y, &zero);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(span.max(1e-12))
        }
    }
    .min(tol.h_max);
    let mut t = t0;
    let mut err_prev: f64 = 1e-4;

    for &target in &grid[1..] {
        while t < target {
            if stats.accepted + stats.rejected >= tol.max_steps {
                return Err(Error::Numerical(format!("step budget exhausted at t = {t}")));
            }
            let remaining = target - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let hs = if last { remaining } else { h };
            {
                let (k0, rest) = k.split_at_mut(1);
                let k0 = &k0[0];
                combine(&mut tmp, y, hs, &[(A21, k0)]);
                rhs(t + C2 * hs, &tmp, &mut rest[0]);
                combine(&mut tmp, y, hs, &[(A31, k0), (A32, &rest[0])]);
                rhs(t + C3 * hs, &tmp, &mut rest[1]);
                combine(&mut tmp, y, hs, &[(A41, k0), (A42, &rest[0]), (A43, &rest[1])]);
                rhs(t + C4 * hs, &tmp, &mut rest[2]);
                combine(&mut tmp, y, hs, &[(A51, k0), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])]);
                rhs(t + C5 * hs, &tmp, &mut rest[3]);
                combine(
                    &mut tmp,
                    y,
                    hs,
                    &[(A61, k0), (A62, &rest[0]), (A63, &rest[1]), (A64, &rest[2]), (A65, &rest[3])],
                );
                rhs(t + hs, &tmp, &mut rest[4]);
                combine(
                    &mut ynew,
                    y,
                    hs,
                    &[(B1, k0), (B3, &rest[1]), (B4, &rest[2]), (B5, &rest[3]), (B6, &rest[4])],
                );
                rhs(t + hs, &ynew, &mut rest[5]);
            }
            stats.evaluations += 6;
            for i in 0..n {
                tmp[i] = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * hs;
            }
            let err = norm(&tmp, y, &ynew);
            if !err.is_finite() {
                return Err(Error::Numerical(format!("non-finite state near t = {t}")));
            }
            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { target } else { t + hs };
                std::mem::swap(y, &mut ynew);
                k.swap(0, 6);
                // PI step control
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0)
                };
                err_prev = err.max(1e-4);
                if !last || fac < 1.0 {
                    h = (hs * fac).min(tol.h_max);
                }
            } else {
                stats.rejected += 1;
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if h < tol.h_min {
                    return Err(Error::Numerical(format!("step size underflow (h = {h:e}) at t = {t}")));
                }
            }
        }
        stats.t_end = target;
        if observe(target, y) == Control::Stop {
            break;
        }
    }
    Ok(stats)
}

/// Uniform grid `0, dt, …, t_max` with `n` intervals.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}
