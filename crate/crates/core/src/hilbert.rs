//! Composite space of the three-level atom and the truncated mode.
//!
//! Basis ordering is atom-major: `index = level * (n_max + 1) + n`, with
//! levels ordered g, e, f.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    G,
    E,
    F,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G, Level::E, Level::F];

    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
            Level::F => 2,
        }
    }

    /// Excitation charge of the level in the pump frame. The pump links g and
    /// f, so both carry zero; e carries one, like a phonon.
    pub fn charge(self) -> i64 {
        match self {
            Level::E => 1,
            Level::G | Level::F => 0,
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "g" | "G" => Ok(Level::G),
            "e" | "E" => Ok(Level::E),
            "f" | "F" => Ok(Level::F),
            other => Err(Error::UnknownLevel(other.to_string())),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Level::G => "g",
            Level::E => "e",
            Level::F => "f",
        };
        f.write_str(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    fock_cutoff: usize,
}

impl HilbertSpace {
    pub const N_ATOM_LEVELS: usize = 3;

    pub fn new(fock_cutoff: usize) -> Result<Self> {
        if fock_cutoff < 1 {
            return Err(Error::InvalidParameter {
                name: "fock_cutoff".into(),
                reason: "must be >= 1".into(),
            });
        }
        Ok(Self { fock_cutoff })
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn n_fock(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        Self::N_ATOM_LEVELS * self.n_fock()
    }

    pub fn index(&self, level: Level, n: usize) -> usize {
        debug_assert!(n <= self.fock_cutoff);
        level.index() * self.n_fock() + n
    }

    pub fn decompose(&self, index: usize) -> (Level, usize) {
        let level = Level::ALL[index / self.n_fock()];
        (level, index % self.n_fock())
    }

    /// Conserved excitation number `n + [level == e]` of a basis state.
    pub fn charge(&self, index: usize) -> i64 {
        let (level, n) = self.decompose(index);
        n as i64 + level.charge()
    }
}
