//! The ground/excited manifold pair and its level indexing.
//!
//! Levels are indexed with the ground manifold first (ascending `m`),
//! followed by the excited manifold (ascending `m`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::angular::{check_pair, HalfInt};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    Ground,
    Excited,
}

/// One magnetic sublevel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Level {
    pub manifold: Manifold,
    pub m: HalfInt,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.manifold {
            Manifold::Ground => 'g',
            Manifold::Excited => 'e',
        };
        write!(f, "{tag}{}", self.m)
    }
}

/// Parity class of a level in the ∥ basis. Collective decay through the two
/// circular modes conserves the number of atoms in each class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParityClass {
    A,
    B,
}

/// An `F_g ↔ F_e` dipole transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LevelRepr", into = "LevelRepr")]
pub struct LevelStructure {
    fg: HalfInt,
    fe: HalfInt,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelRepr {
    #[serde(rename = "F_g")]
    fg: HalfInt,
    #[serde(rename = "F_e")]
    fe: HalfInt,
}

impl TryFrom<LevelRepr> for LevelStructure {
    type Error = Error;
    fn try_from(r: LevelRepr) -> Result<Self> {
        LevelStructure::new(r.fg, r.fe)
    }
}

impl From<LevelStructure> for LevelRepr {
    fn from(l: LevelStructure) -> Self {
        LevelRepr { fg: l.fg, fe: l.fe }
    }
}

impl fmt::Display for LevelStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.fg, self.fe)
    }
}

impl LevelStructure {
    pub fn new(fg: HalfInt, fe: HalfInt) -> Result<Self> {
        check_pair(fg, fe)?;
        Ok(LevelStructure { fg, fe })
    }

    /// Shorthand from doubled values, e.g. `from_twice(1, 3)` is (1/2, 3/2).
    pub fn from_twice(fg2: i32, fe2: i32) -> Result<Self> {
        Self::new(HalfInt::from_twice(fg2), HalfInt::from_twice(fe2))
    }

    pub fn fg(&self) -> HalfInt {
        self.fg
    }

    pub fn fe(&self) -> HalfInt {
        self.fe
    }

    pub fn n_ground(&self) -> usize {
        self.fg.multiplicity()
    }

    pub fn n_excited(&self) -> usize {
        self.fe.multiplicity()
    }

    /// Total number of single-atom levels, `2(F_g + F_e) + 2`.
    pub fn ell(&self) -> usize {
        self.n_ground() + self.n_excited()
    }

    pub fn ground(&self, m: HalfInt) -> Result<usize> {
        if !self.fg.admits(m) {
            return Err(Error::domain(format!("no ground level m = {m} for F_g = {}", self.fg)));
        }
        Ok(((m.twice() + self.fg.twice()) / 2) as usize)
    }

    pub fn excited(&self, m: HalfInt) -> Result<usize> {
        if !self.fe.admits(m) {
            return Err(Error::domain(format!("no excited level m = {m} for F_e = {}", self.fe)));
        }
        Ok(self.n_ground() + ((m.twice() + self.fe.twice()) / 2) as usize)
    }

    pub fn level(&self, idx: usize) -> Level {
        assert!(idx < self.ell(), "level index {idx} out of range");
        if idx < self.n_ground() {
            Level {
                manifold: Manifold::Ground,
                m: HalfInt::from_twice(2 * idx as i32 - self.fg.twice()),
            }
        } else {
            let k = idx - self.n_ground();
            Level {
                manifold: Manifold::Excited,
                m: HalfInt::from_twice(2 * k as i32 - self.fe.twice()),
            }
        }
    }

    pub fn is_excited(&self, idx: usize) -> bool {
        idx >= self.n_ground()
    }

    pub fn ground_indices(&self) -> std::ops::Range<usize> {
        0..self.n_ground()
    }

    pub fn excited_indices(&self) -> std::ops::Range<usize> {
        self.n_ground()..self.ell()
    }

    /// Label such as `g-1/2` or `e3/2`.
    pub fn label(&self, idx: usize) -> String {
        self.level(idx).to_string()
    }

    pub fn parse_label(&self, label: &str) -> Result<usize> {
        let label = label.trim();
        let (tag, rest) = label.split_at(label.char_indices().nth(1).map(|(i, _)| i).unwrap_or(label.len()));
        let m: HalfInt = rest.parse()?;
        match tag {
            "g" => self.ground(m),
            "e" => self.excited(m),
            _ => Err(Error::domain(format!("level label '{label}' must start with g or e"))),
        }
    }

    /// Class of a level in the ∥ basis: `m` is even when `m + F_g` is even;
    /// class A holds even ground and odd excited sublevels.
    pub fn parity_class(&self, idx: usize) -> ParityClass {
        let lv = self.level(idx);
        let even = ((lv.m.twice() + self.fg.twice()) / 2) % 2 == 0;
        match (lv.manifold, even) {
            (Manifold::Ground, true) | (Manifold::Excited, false) => ParityClass::A,
            _ => ParityClass::B,
        }
    }
}
