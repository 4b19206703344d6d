use super::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X1,
    X2,
}

/// Finite-difference stencil: `(D u)(x) = sum_k w_k u(x + delta_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub offsets: Vec<(i64, i64, f64)>,
}

impl Stencil {
    pub fn identity() -> Self {
        Stencil {
            offsets: vec![(0, 0, 1.0)],
        }
    }

    pub fn zero() -> Self {
        Stencil { offsets: vec![] }
    }

    /// Largest per-axis reach of the stencil.
    pub fn radius(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(a, b, _)| a.unsigned_abs().max(b.unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    /// Applies the stencil to a scalar field with periodic wrap.
    pub fn apply(&self, grid: &Grid, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len(), grid.len(), "field length must match grid");
        let shifted: Vec<_> = self
            .offsets
            .iter()
            .map(|&(a, b, w)| (grid.offset(a, b), w))
            .collect();
        (0..grid.len())
            .map(|s| {
                shifted
                    .iter()
                    .map(|&(o, w)| w * field[grid.shift(s, o)])
                    .sum()
            })
            .collect()
    }
}

/// Second-order central difference on the unit lattice,
/// `(u(x + e) - u(x - e)) / 2`.
pub fn central_difference(axis: Axis) -> Stencil {
    let (a, b) = match axis {
        Axis::X1 => (1, 0),
        Axis::X2 => (0, 1),
    };
    Stencil {
        offsets: vec![(a, b, 0.5), (-a, -b, -0.5)],
    }
}
