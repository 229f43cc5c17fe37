// SPDX-License-Identifier: Apache-2.0

//! Atom registers: named planar coordinates in µm.

use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single trapped atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    pub x: f64,
    pub y: f64,
    /// When set, the coordinate pair is read from the parameter set under
    /// `name` (a 2-vector) instead of the stored position.
    #[serde(default)]
    pub trainable: bool,
}

impl Atom {
    pub fn new(name: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            name: name.into(),
            x,
            y,
            trainable: false,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Canonical register layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Layout {
    Linear,
    Rectangular { rows: usize, cols: usize },
    Triangular,
}

/// Ordered collection of uniquely named atoms with pairwise distinct positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegisterDoc", into = "RegisterDoc")]
pub struct Register {
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
struct RegisterDoc {
    atoms: Vec<Atom>,
}

impl TryFrom<RegisterDoc> for Register {
    type Error = Error;

    fn try_from(doc: RegisterDoc) -> Result<Self> {
        Register::new(doc.atoms)
    }
}

impl From<Register> for RegisterDoc {
    fn from(reg: Register) -> Self {
        RegisterDoc { atoms: reg.atoms }
    }
}

impl Register {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Register("at least one atom is required".into()));
        }
        let mut seen = HashSet::new();
        for atom in &atoms {
            if !seen.insert(atom.name.as_str()) {
                return Err(Error::Register(format!("duplicate atom name `{}`", atom.name)));
            }
            if !atom.x.is_finite() || !atom.y.is_finite() {
                return Err(Error::Register(format!(
                    "atom `{}` has a non-finite coordinate",
                    atom.name
                )));
            }
        }
        let reg = Self { atoms };
        reg.check_distinct()?;
        Ok(reg)
    }

    /// Builds a register from `(name, (x, y))` pairs.
    pub fn from_coords<S: Into<String>>(
        coords: impl IntoIterator<Item = (S, (f64, f64))>,
    ) -> Result<Self> {
        Self::new(
            coords
                .into_iter()
                .map(|(name, (x, y))| Atom::new(name, x, y))
                .collect(),
        )
    }

    /// Builds one of the canonical layouts. Atoms are named `q0`, `q1`, ...
    pub fn build(layout: Layout, spacing: f64, n_atoms: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid("spacing", "must be positive"));
        }
        if n_atoms == 0 {
            return Err(Error::invalid("n_atoms", "must be at least 1"));
        }
        let positions: Vec<(f64, f64)> = match layout {
            Layout::Linear => (0..n_atoms).map(|k| (k as f64 * spacing, 0.0)).collect(),
            Layout::Rectangular { rows, cols } => {
                if rows * cols != n_atoms {
                    return Err(Error::invalid(
                        "layout",
                        format!("rectangular {rows}x{cols} does not hold {n_atoms} atoms"),
                    ));
                }
                (0..rows)
                    .flat_map(|r| (0..cols).map(move |c| (c as f64 * spacing, r as f64 * spacing)))
                    .collect()
            }
            Layout::Triangular => {
                // Rows of ceil(sqrt(n)) atoms; odd rows shifted by half a lattice constant.
                let per_row = (n_atoms as f64).sqrt().ceil() as usize;
                let row_height = spacing * 3f64.sqrt() / 2.0;
                (0..n_atoms)
                    .map(|k| {
                        let (r, c) = (k / per_row, k % per_row);
                        let shift = if r % 2 == 1 { spacing / 2.0 } else { 0.0 };
                        (c as f64 * spacing + shift, r as f64 * row_height)
                    })
                    .collect()
            }
        };
        Self::from_coords(
            positions
                .into_iter()
                .enumerate()
                .map(|(k, p)| (format!("q{k}"), p)),
        )
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().map(|a| a.name.as_str())
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.atoms.iter().map(Atom::position).collect()
    }

    pub fn atom(&self, name: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.name == name)
    }

    /// Marks the named atom's coordinates as trainable.
    pub fn with_trainable(mut self, name: &str) -> Result<Self> {
        let atom = self
            .atoms
            .iter_mut()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Register(format!("no atom named `{name}`")))?;
        atom.trainable = true;
        Ok(self)
    }

    /// Copy of this register with positions replaced, keeping names and flags.
    pub fn with_positions(&self, positions: &[[f64; 2]]) -> Result<Self> {
        if positions.len() != self.atoms.len() {
            return Err(Error::ShapeMismatch {
                name: "positions".into(),
                expected: self.atoms.len(),
                got: positions.len(),
            });
        }
        let atoms = self
            .atoms
            .iter()
            .zip(positions)
            .map(|(a, p)| Atom {
                x: p[0],
                y: p[1],
                ..a.clone()
            })
            .collect();
        Register::new(atoms)
    }

    pub fn pairwise_distances(&self) -> Array2<f64> {
        distance_matrix(&self.positions())
    }

    /// Smallest pairwise distance, `None` for a single atom.
    pub fn min_distance(&self) -> Option<f64> {
        let pos = self.positions();
        let mut best: Option<f64> = None;
        for i in 0..pos.len() {
            for j in (i + 1)..pos.len() {
                let d = distance(pos[i], pos[j]);
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
        }
        best
    }

    fn check_distinct(&self) -> Result<()> {
        match self.min_distance() {
            Some(d) if d <= 0.0 => Err(Error::Register("two atoms share a position".into())),
            _ => Ok(()),
        }
    }
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Symmetric Euclidean distance matrix with zero diagonal.
pub fn distance_matrix(positions: &[[f64; 2]]) -> Array2<f64> {
    let n = positions.len();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let r = distance(positions[i], positions[j]);
            d[[i, j]] = r;
            d[[j, i]] = r;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_two_atoms() {
        let reg = Register::build(Layout::Linear, 8.0, 2).unwrap();
        assert_eq!(reg.positions(), vec![[0.0, 0.0], [8.0, 0.0]]);
        assert_eq!(reg.pairwise_distances()[[0, 1]], 8.0);
    }

    #[test]
    fn single_atom_has_no_pairs() {
        let reg = Register::build(Layout::Linear, 7.0, 1).unwrap();
        assert_eq!(reg.positions(), vec![[0.0, 0.0]]);
        assert_eq!(reg.min_distance(), None);
    }

    #[test]
    fn linear_distances_are_exact_multiples() {
        let reg = Register::build(Layout::Linear, 6.5, 5).unwrap();
        let d = reg.pairwise_distances();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(d[[i, j]], (i as f64 - j as f64).abs() * 6.5);
            }
        }
    }

    #[test]
    fn triangular_nearest_neighbours_match_spacing() {
        let reg = Register::build(Layout::Triangular, 7.0, 6).unwrap();
        let d = reg.pairwise_distances();
        // brute force: every atom's nearest neighbour sits at the lattice constant
        for i in 0..6 {
            let nearest = (0..6)
                .filter(|&j| j != i)
                .map(|j| d[[i, j]])
                .fold(f64::INFINITY, f64::min);
            assert!((nearest - 7.0).abs() < 1e-12, "atom {i}: {nearest}");
        }
        assert!((reg.min_distance().unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn rectangular_shape_checked() {
        assert!(Register::build(Layout::Rectangular { rows: 2, cols: 2 }, 7.0, 6).is_err());
        let reg = Register::build(Layout::Rectangular { rows: 2, cols: 3 }, 7.0, 6).unwrap();
        assert_eq!(reg.len(), 6);
        assert!((reg.min_distance().unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn bad_spacing_rejected() {
        assert!(Register::build(Layout::Linear, 0.0, 2).is_err());
        assert!(Register::build(Layout::Linear, -1.0, 2).is_err());
    }

    #[test]
    fn invariants_enforced() {
        assert!(Register::new(vec![]).is_err());
        assert!(Register::from_coords([("a", (0.0, 0.0)), ("a", (1.0, 0.0))]).is_err());
        assert!(Register::from_coords([("a", (1.0, 1.0)), ("b", (1.0, 1.0))]).is_err());
    }

    #[test]
    fn off_axis_distance() {
        let reg = Register::from_coords([("q0", (0.5, 0.4)), ("q1", (8.3, 0.1))]).unwrap();
        let expected = (7.8f64 * 7.8 + 0.3 * 0.3).sqrt();
        assert!((reg.pairwise_distances()[[0, 1]] - expected).abs() < 1e-14);
    }

    #[test]
    fn toml_round_trip_validates() {
        let reg = Register::build(Layout::Linear, 8.0, 2).unwrap();
        let text = toml::to_string(&reg).unwrap();
        let back: Register = toml::from_str(&text).unwrap();
        assert_eq!(back, reg);
        let dup = "[[atoms]]\nname = \"a\"\nx = 0.0\ny = 0.0\n[[atoms]]\nname = \"a\"\nx = 1.0\ny = 0.0\n";
        assert!(toml::from_str::<Register>(dup).is_err());
    }
}
