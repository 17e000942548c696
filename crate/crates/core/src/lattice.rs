//! The group ℤ^l, its elements as shift vectors, and finite boxes used for
//! truncation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported codimension.
pub const MAX_DIMENSION: usize = 3;

/// Default cap on the number of rows of an assembled truncation.
pub const DEFAULT_ROW_CAP: usize = 200_000;

/// ℤ^l with fiber ℂ^N at every site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    fiber: usize,
}

impl Lattice {
    pub fn new(dim: usize, fiber: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIMENSION {
            return Err(Error::InvalidLattice(format!(
                "dimension must be in 1..={MAX_DIMENSION}, got {dim}"
            )));
        }
        if fiber == 0 {
            return Err(Error::InvalidLattice("fiber dimension must be positive".into()));
        }
        Ok(Self { dim, fiber })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub(crate) fn ensure_same(&self, other: &Lattice) -> Result<()> {
        if self != other {
            return Err(Error::LatticeMismatch(self.to_string(), other.to_string()));
        }
        Ok(())
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z^{} x C^{}", self.dim, self.fiber)
    }
}

/// A group element g ∈ ℤ^l.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Shift(pub Vec<i64>);

impl Shift {
    pub fn zero(dim: usize) -> Self {
        Shift(vec![0; dim])
    }

    /// Unit vector ±e_j.
    pub fn unit(dim: usize, axis: usize, sign: i64) -> Self {
        let mut v = vec![0; dim];
        v[axis] = sign;
        Shift(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn neg(&self) -> Shift {
        Shift(self.0.iter().map(|c| -c).collect())
    }

    pub fn add(&self, other: &Shift) -> Shift {
        Shift(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Sup-norm |g|_∞.
    pub fn radius(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// The shift with coordinate `axis` removed.
    pub fn without(&self, axis: usize) -> Shift {
        Shift(
            self.0
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != axis)
                .map(|(_, &c)| c)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
}

/// The box {-L, ..., L}^l with zero boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationBox {
    half_width: usize,
    dim: usize,
    boundary: Boundary,
}

impl TruncationBox {
    pub fn new(dim: usize, half_width: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIMENSION {
            return Err(Error::InvalidLattice(format!("box dimension {dim}")));
        }
        if half_width == 0 {
            return Err(Error::InvalidArgument("box half-width must be positive".into()));
        }
        Ok(Self {
            half_width,
            dim,
            boundary: Boundary::Dirichlet,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn num_sites(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    /// Dimension of the truncated Hilbert space, (2L+1)^l · N.
    pub fn space_dim(&self, fiber: usize) -> usize {
        self.num_sites() * fiber
    }

    /// Site of a linear index; the first coordinate varies slowest.
    pub fn site(&self, mut index: usize) -> Vec<i64> {
        let side = self.side();
        let l = self.half_width as i64;
        let mut x = vec![0i64; self.dim];
        for k in (0..self.dim).rev() {
            x[k] = (index % side) as i64 - l;
            index /= side;
        }
        x
    }

    pub fn index(&self, x: &[i64]) -> Option<usize> {
        let l = self.half_width as i64;
        let side = self.side();
        let mut idx = 0usize;
        for &c in x {
            if c < -l || c > l {
                return None;
            }
            idx = idx * side + (c + l) as usize;
        }
        Some(idx)
    }

    pub fn sites(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.num_sites()).map(move |i| self.site(i))
    }

    /// Lattice distance (sup-norm) from `x` to the complement of the box.
    pub fn depth(&self, x: &[i64]) -> usize {
        let l = self.half_width as i64;
        x.iter().map(|&c| (l - c.abs()).max(0) as usize).min().unwrap_or(0)
    }
}

/// Vector norm helpers shared by several modules.
pub(crate) fn norm(v: &[faer::c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_bounds() {
        assert!(Lattice::new(0, 1).is_err());
        assert!(Lattice::new(4, 1).is_err());
        assert!(Lattice::new(1, 0).is_err());
        assert!(Lattice::new(3, 4).is_ok());
    }

    #[test]
    fn box_indexing_round_trips() {
        let b = TruncationBox::new(2, 3).unwrap();
        assert_eq!(b.num_sites(), 49);
        assert_eq!(b.space_dim(2), 98);
        for i in 0..b.num_sites() {
            assert_eq!(b.index(&b.site(i)), Some(i));
        }
        assert_eq!(b.index(&[4, 0]), None);
        assert_eq!(b.site(0), vec![-3, -3]);
        assert_eq!(b.depth(&[3, 0]), 0);
        assert_eq!(b.depth(&[0, 0]), 3);
    }

    #[test]
    fn shift_algebra() {
        let g = Shift(vec![1, -2]);
        assert_eq!(g.neg(), Shift(vec![-1, 2]));
        assert_eq!(g.add(&g.neg()), Shift::zero(2));
        assert_eq!(g.radius(), 2);
        assert_eq!(g.without(0), Shift(vec![-2]));
    }
}
