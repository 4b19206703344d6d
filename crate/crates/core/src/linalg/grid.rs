use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Periodic two-dimensional lattice with unit spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    nx: usize,
    ny: usize,
}

/// Site displacement reduced modulo the grid, so `(nx, 0)` and `(0, 0)` are
/// the same offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Offset {
    pub d1: usize,
    pub d2: usize,
}

impl Offset {
    pub const ZERO: Offset = Offset { d1: 0, d2: 0 };
}

impl Grid {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Config(format!(
                "grid dimensions must be positive, got {nx}x{ny}"
            )));
        }
        Ok(Grid { nx, ny })
    }

    pub fn square(l: usize) -> Result<Self> {
        Self::new(l, l)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of sites `N = nx * ny`.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major site index: `x2` varies fastest.
    #[inline]
    pub fn site(&self, x1: usize, x2: usize) -> usize {
        debug_assert!(x1 < self.nx && x2 < self.ny);
        x1 * self.ny + x2
    }

    #[inline]
    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site / self.ny, site % self.ny)
    }

    pub fn offset(&self, dx1: i64, dx2: i64) -> Offset {
        Offset {
            d1: dx1.rem_euclid(self.nx as i64) as usize,
            d2: dx2.rem_euclid(self.ny as i64) as usize,
        }
    }

    /// Site reached from `site` by `offset`, with periodic wrap.
    #[inline]
    pub fn shift(&self, site: usize, offset: Offset) -> usize {
        let (x1, x2) = self.coords(site);
        let y1 = (x1 + offset.d1) % self.nx;
        let y2 = (x2 + offset.d2) % self.ny;
        y1 * self.ny + y2
    }

    /// Shortest periodic displacement between two sites, per axis.
    pub fn periodic_distance(&self, a: usize, b: usize) -> (usize, usize) {
        let (a1, a2) = self.coords(a);
        let (b1, b2) = self.coords(b);
        let d1 = a1.abs_diff(b1);
        let d2 = a2.abs_diff(b2);
        (d1.min(self.nx - d1), d2.min(self.ny - d2))
    }

    /// Iterator over `(x1, x2)` in site order.
    pub fn sites(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(move |s| self.coords(s))
    }
}
