use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthmap::Utm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cell edge M in meters.
    pub cell_size_m: f64,
    /// Group modulus N; there are N² groups.
    pub group_modulus: u16,
    /// Training-tile rotations in degrees.
    pub rotations: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cell_size_m: 100.0,
            group_modulus: 2,
            rotations: (0..12).map(|i| 30.0 * i as f64).collect(),
        }
    }
}

impl GridSpec {
    pub fn new(cell_size_m: f64, group_modulus: u16, rotations: Vec<f64>) -> Result<Self> {
        let g = Self {
            cell_size_m,
            group_modulus,
            rotations,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size_m > 0.0 && self.cell_size_m.is_finite()) {
            return Err(Error::Config(format!("cell size must be > 0, got {}", self.cell_size_m)));
        }
        if self.group_modulus == 0 {
            return Err(Error::Config("group modulus must be >= 1".into()));
        }
        if self.rotations.is_empty() {
            return Err(Error::Config("rotation set must not be empty".into()));
        }
        if let Some(r) = self.rotations.iter().find(|r| !(0.0..360.0).contains(*r)) {
            return Err(Error::Config(format!("rotation {r} outside [0, 360)")));
        }
        Ok(())
    }

    pub fn cell_of(&self, utm: Utm) -> CellId {
        cell_of(utm, self.cell_size_m)
    }

    pub fn group_of(&self, cell: CellId) -> GroupId {
        group_of(cell, self.group_modulus)
    }

    /// Groups in row-major `(u, v)` order.
    pub fn groups(&self) -> Vec<GroupId> {
        let n = self.group_modulus;
        (0..n).flat_map(|u| (0..n).map(move |v| GroupId { u, v })).collect()
    }

    /// Center of a cell in UTM.
    pub fn cell_center(&self, cell: CellId) -> Utm {
        Utm::new(
            (cell.e as f64 + 0.5) * self.cell_size_m,
            (cell.n as f64 + 0.5) * self.cell_size_m,
        )
    }
}

/// Integer UTM cell indices `(⌊E/M⌋, ⌊N/M⌋)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub e: i64,
    pub n: i64,
}

impl CellId {
    pub fn new(e: i64, n: i64) -> Self {
        Self { e, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId {
    pub u: u16,
    pub v: u16,
}

pub fn cell_of(utm: Utm, cell_size_m: f64) -> CellId {
    CellId {
        e: (utm.easting / cell_size_m).floor() as i64,
        n: (utm.northing / cell_size_m).floor() as i64,
    }
}

/// Non-negative residues of the cell indices.
pub fn group_of(cell: CellId, modulus: u16) -> GroupId {
    let m = modulus as i64;
    GroupId {
        u: cell.e.rem_euclid(m) as u16,
        v: cell.n.rem_euclid(m) as u16,
    }
}
