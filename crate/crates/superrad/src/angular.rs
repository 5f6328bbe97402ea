//! Angular-momentum algebra: Clebsch–Gordan coefficients, Wigner rotation
//! matrices and the unitary changes between the V, H and ∥ atomic bases.
//!
//! Conventions: Condon–Shortley phases, active rotations
//! `R(φ, θ, χ) = exp(-iφJz) exp(-iθJy) exp(-iχJz)`, magnetic sublevels
//! ordered by ascending `m`.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::LevelStructure;

/// A half-integer stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "HalfIntRepr", into = "String")]
pub struct HalfInt(i32);

#[derive(Deserialize)]
#[serde(untagged)]
enum HalfIntRepr {
    Int(i64),
    Float(f64),
    Text(String),
}

impl TryFrom<HalfIntRepr> for HalfInt {
    type Error = Error;
    fn try_from(r: HalfIntRepr) -> Result<Self> {
        match r {
            HalfIntRepr::Int(n) => Ok(HalfInt::from_int(n as i32)),
            HalfIntRepr::Float(x) => HalfInt::from_f64(x),
            HalfIntRepr::Text(s) => s.parse(),
        }
    }
}

impl From<HalfInt> for String {
    fn from(h: HalfInt) -> String {
        h.to_string()
    }
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    /// Accepts only exact multiples of 1/2.
    pub fn from_f64(x: f64) -> Result<Self> {
        let t = 2.0 * x;
        if (t - t.round()).abs() > 1e-9 {
            return Err(Error::domain(format!("{x} is not a half-integer")));
        }
        Ok(HalfInt(t.round() as i32))
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// `-F, -F+1, …, F`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> + Clone {
        (-self.0..=self.0).step_by(2).map(HalfInt)
    }

    /// Number of projections, `2F + 1`.
    pub fn multiplicity(self) -> usize {
        (self.0 + 1) as usize
    }

    /// Whether `m` is a valid projection of angular momentum `self`.
    pub fn admits(self, m: HalfInt) -> bool {
        m.0.abs() <= self.0 && (self.0 - m.0) % 2 == 0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for HalfInt {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: i32 = num
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad half-integer '{s}'")))?;
            match den.trim() {
                "2" => Ok(HalfInt(num)),
                "1" => Ok(HalfInt(2 * num)),
                _ => Err(Error::Parse(format!("bad half-integer '{s}'"))),
            }
        } else if let Ok(n) = s.parse::<i32>() {
            Ok(HalfInt(2 * n))
        } else {
            let x: f64 = s
                .parse()
                .map_err(|_| Error::Parse(format!("bad half-integer '{s}'")))?;
            HalfInt::from_f64(x)
        }
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 - o.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

/// Quantization axis of an atomic basis.
///
/// `V` quantizes along the vertical polarization, `H` along the horizontal
/// one, and `Par` along the cavity axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "V")]
    V,
    #[serde(rename = "H")]
    H,
    #[serde(rename = "par")]
    Par,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::V => "V",
            Axis::H => "H",
            Axis::Par => "par",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "V" | "v" => Ok(Axis::V),
            "H" | "h" => Ok(Axis::H),
            "par" | "parallel" | "∥" => Ok(Axis::Par),
            other => Err(Error::domain(format!("unknown axis '{other}'"))),
        }
    }
}

impl Axis {
    /// Active rotation taking the V-axis basis onto this axis' basis,
    /// `|m⟩_axis = R |m⟩_V`.
    pub fn rotation_from_v(self) -> RotationSpec {
        use std::f64::consts::FRAC_PI_2;
        match self {
            Axis::V => RotationSpec::IDENTITY,
            // exp(iπ/2 Jx) = Rz(-π/2) Ry(-π/2) Rz(π/2)
            Axis::H => RotationSpec::new(-FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2),
            // exp(iπ/2 Jy)
            Axis::Par => RotationSpec::new(0.0, -FRAC_PI_2, 0.0),
        }
    }

    /// Frame vectors `(x, y, z)` of this axis in V-frame coordinates.
    pub fn frame(self) -> [[f64; 3]; 3] {
        match self {
            Axis::V => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            Axis::H => [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
            Axis::Par => [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]],
        }
    }
}

/// Euler angles of an active rotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub phi: f64,
    pub theta: f64,
    pub chi: f64,
}

impl RotationSpec {
    pub const IDENTITY: RotationSpec = RotationSpec {
        phi: 0.0,
        theta: 0.0,
        chi: 0.0,
    };

    pub const fn new(phi: f64, theta: f64, chi: f64) -> Self {
        RotationSpec { phi, theta, chi }
    }

    pub fn inverse(self) -> Self {
        RotationSpec::new(-self.chi, -self.theta, -self.phi)
    }
}

const FACTORIALS: [f64; 41] = {
    let mut t = [1.0f64; 41];
    let mut i = 1;
    while i < 41 {
        t[i] = t[i - 1] * i as f64;
        i += 1;
    }
    t
};

fn fact(twice: i32) -> f64 {
    debug_assert!(twice >= 0 && twice % 2 == 0);
    FACTORIALS[(twice / 2) as usize]
}

/// General `⟨j1 m1; j2 m2 | J M⟩`, zero outside selection rules.
pub fn cg_general(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> f64 {
    let (j1, m1, j2, m2, j, m) = (j1.0, m1.0, j2.0, m2.0, j.0, m.0);
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if j > j1 + j2 || j < (j1 - j2).abs() || (j1 + j2 + j) % 2 != 0 {
        return 0.0;
    }
    let pre = ((j + 1) as f64 * fact(j + j1 - j2) * fact(j - j1 + j2) * fact(j1 + j2 - j)
        / fact(j1 + j2 + j + 2))
        .sqrt();
    let norm = (fact(j + m) * fact(j - m) * fact(j1 - m1) * fact(j1 + m1) * fact(j2 - m2) * fact(j2 + m2)).sqrt();
    let mut sum = 0.0;
    let mut k = 0;
    loop {
        let a = j1 + j2 - j - k;
        let b = j1 - m1 - k;
        let c = j2 + m2 - k;
        if a < 0 || b < 0 || c < 0 {
            break;
        }
        let d = j - j2 + m1 + k;
        let e = j - j1 - m2 + k;
        if d >= 0 && e >= 0 {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign / (fact(k) * fact(a) * fact(b) * fact(c) * fact(d) * fact(e));
        }
        k += 2;
    }
    pre * norm * sum
}

/// Dipole Clebsch–Gordan coefficient `C^p_m = ⟨F_g m; 1 p | F_e m+p⟩`.
pub fn clebsch_gordan(fg: HalfInt, m: HalfInt, p: HalfInt, fe: HalfInt) -> Result<f64> {
    check_pair(fg, fe)?;
    if !fg.admits(m) {
        return Err(Error::domain(format!("m = {m} is not a projection of F_g = {fg}")));
    }
    if !p.is_integer() {
        return Err(Error::domain(format!("p = {p} must be an integer")));
    }
    if p.0.abs() > 2 {
        return Ok(0.0);
    }
    let me = m + p;
    if !fe.admits(me) {
        return Ok(0.0);
    }
    Ok(cg_general(fg, m, HalfInt::ONE, p, fe, me))
}

pub(crate) fn check_pair(fg: HalfInt, fe: HalfInt) -> Result<()> {
    if fg.0 < 0 || fe.0 < 0 {
        return Err(Error::domain("angular momenta must be non-negative"));
    }
    if (fg.0 - fe.0).abs() > 2 {
        return Err(Error::domain(format!(
            "F_g = {fg} and F_e = {fe} differ by more than 1"
        )));
    }
    if (fg.0 - fe.0) % 2 != 0 {
        return Err(Error::domain(format!(
            "F_g = {fg} and F_e = {fe} must both be integer or both half-integer"
        )));
    }
    if fg.0 == 0 && fe.0 == 0 {
        return Err(Error::domain("F_g = F_e = 0 has no dipole transition"));
    }
    Ok(())
}

/// Wigner small-d element `d^j_{m'm}(β)`.
pub fn wigner_small_d(j: HalfInt, mp: HalfInt, m: HalfInt, beta: f64) -> f64 {
    let (j, mp, m) = (j.0, mp.0, m.0);
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let pre = (fact(j + mp) * fact(j - mp) * fact(j + m) * fact(j - m)).sqrt();
    let mut sum = 0.0;
    let mut k = 0;
    loop {
        let a = j + m - k;
        let b = j - mp - k;
        if a < 0 || b < 0 {
            break;
        }
        let d = mp - m + k;
        if d >= 0 {
            let sign = if ((mp - m + k) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let pc = (2 * j + m - mp - 2 * k) / 2;
            let ps = (mp - m + 2 * k) / 2;
            sum += sign * c.powi(pc) * s.powi(ps) / (fact(a) * fact(k) * fact(d) * fact(b));
        }
        k += 2;
    }
    pre * sum
}

/// Matrix of the rotation operator on spin `f`, rows/columns ordered by
/// ascending `m`.
pub fn wigner_matrix(f: HalfInt, rot: RotationSpec) -> DMatrix<Complex64> {
    let dim = f.multiplicity();
    let ms: Vec<HalfInt> = f.projections().collect();
    DMatrix::from_fn(dim, dim, |i, k| {
        let (mp, m) = (ms[i], ms[k]);
        let d = wigner_small_d(f, mp, m, rot.theta);
        Complex64::from_polar(d, -(mp.value() * rot.phi + m.value() * rot.chi))
    })
}

/// `J_z` on spin `f`.
pub fn spin_z(f: HalfInt) -> DMatrix<Complex64> {
    let ms: Vec<HalfInt> = f.projections().collect();
    DMatrix::from_fn(ms.len(), ms.len(), |i, k| {
        if i == k {
            Complex64::new(ms[i].value(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `J_+` on spin `f`.
pub fn spin_plus(f: HalfInt) -> DMatrix<Complex64> {
    let ms: Vec<HalfInt> = f.projections().collect();
    let j = f.value();
    DMatrix::from_fn(ms.len(), ms.len(), |i, k| {
        if i == k + 1 {
            let m = ms[k].value();
            Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `J_x` on spin `f`.
pub fn spin_x(f: HalfInt) -> DMatrix<Complex64> {
    let p = spin_plus(f);
    (&p + p.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `J_y` on spin `f`.
pub fn spin_y(f: HalfInt) -> DMatrix<Complex64> {
    let p = spin_plus(f);
    (&p - p.adjoint()) * Complex64::new(0.0, -0.5)
}

/// Block-diagonal unitary `T` with `ψ^{to} = T ψ^{from}` and
/// `O^{to} = T O^{from} T†`.
pub fn basis_change(level: &LevelStructure, from: Axis, to: Axis) -> DMatrix<Complex64> {
    let ell = level.ell();
    let mut out = DMatrix::zeros(ell, ell);
    let mut offset = 0;
    for f in [level.fg(), level.fe()] {
        let u_from = wigner_matrix(f, from.rotation_from_v());
        let u_to = wigner_matrix(f, to.rotation_from_v());
        let block = u_to.adjoint() * u_from;
        let n = f.multiplicity();
        out.view_mut((offset, offset), (n, n)).copy_from(&block);
        offset += n;
    }
    out
}
