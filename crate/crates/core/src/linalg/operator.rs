use std::borrow::Cow;
use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{CsrMatrix, Grid, Offset, SparseBlock, Stencil};
use crate::{Error, Result};

/// Component blocks attached to one site offset.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteBlocks {
    /// Same block at every site (translation-invariant operator).
    Uniform(SparseBlock),
    /// One block per site, indexed by the output site.
    PerSite(Vec<SparseBlock>),
}

impl SiteBlocks {
    #[inline]
    pub fn at(&self, site: usize) -> &SparseBlock {
        match self {
            SiteBlocks::Uniform(b) => b,
            SiteBlocks::PerSite(v) => &v[site],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetTerm {
    pub offset: Offset,
    pub blocks: SiteBlocks,
}

/// Global operator assembled from dense-indexed component blocks coupling
/// each site `x` to the sites `x + offset`:
///
/// `(M v)(x) = sum_terms block(x, offset) · v(x + offset)`.
///
/// Terms are kept sorted by offset and offsets are unique, which fixes the
/// summation order of [`BlockSparseOperator::apply`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseOperator {
    grid: Grid,
    block_rows: usize,
    block_cols: usize,
    terms: Vec<OffsetTerm>,
}

impl BlockSparseOperator {
    /// Empty (zero) operator.
    pub fn zero(grid: Grid, block_rows: usize, block_cols: usize) -> Self {
        BlockSparseOperator {
            grid,
            block_rows,
            block_cols,
            terms: vec![],
        }
    }

    pub fn identity(grid: Grid, block: usize) -> Self {
        Self::local(grid, SparseBlock::identity(block))
    }

    /// Purely on-site operator `I_N ⊗ block`.
    pub fn local(grid: Grid, block: SparseBlock) -> Self {
        Self::uniform(
            grid,
            block.rows(),
            block.cols(),
            vec![(Offset::ZERO, block)],
        )
    }

    /// `block ⊗ D` for a translation-invariant stencil `D`.
    pub fn from_stencil(grid: Grid, stencil: &Stencil, block: &SparseBlock) -> Self {
        let terms = stencil
            .offsets
            .iter()
            .map(|&(a, b, w)| (grid.offset(a, b), block.scale(w)))
            .collect();
        Self::uniform(grid, block.rows(), block.cols(), terms)
    }

    /// Translation-invariant operator; repeated offsets are summed.
    pub fn uniform(
        grid: Grid,
        block_rows: usize,
        block_cols: usize,
        terms: Vec<(Offset, SparseBlock)>,
    ) -> Self {
        let mut merged: BTreeMap<Offset, SparseBlock> = BTreeMap::new();
        for (offset, block) in terms {
            assert_eq!((block.rows(), block.cols()), (block_rows, block_cols));
            let entry = merged
                .entry(offset)
                .or_insert_with(|| SparseBlock::zeros(block_rows, block_cols));
            *entry = entry.add(&block);
        }
        let terms = merged
            .into_iter()
            .filter(|(_, b)| !b.is_zero())
            .map(|(offset, b)| OffsetTerm {
                offset,
                blocks: SiteBlocks::Uniform(b),
            })
            .collect();
        BlockSparseOperator {
            grid,
            block_rows,
            block_cols,
            terms,
        }
    }

    /// Site-dependent operator; each entry carries one block per site.
    pub fn per_site(
        grid: Grid,
        block_rows: usize,
        block_cols: usize,
        terms: Vec<(Offset, Vec<SparseBlock>)>,
    ) -> Self {
        let n = grid.len();
        let mut merged: BTreeMap<Offset, Vec<SparseBlock>> = BTreeMap::new();
        for (offset, blocks) in terms {
            assert_eq!(blocks.len(), n, "one block per site required");
            match merged.get_mut(&offset) {
                Some(existing) => {
                    for (e, b) in existing.iter_mut().zip(&blocks) {
                        *e = e.add(b);
                    }
                }
                None => {
                    merged.insert(offset, blocks);
                }
            }
        }
        let terms = merged
            .into_iter()
            .filter(|(_, v)| v.iter().any(|b| !b.is_zero()))
            .map(|(offset, blocks)| OffsetTerm {
                offset,
                blocks: SiteBlocks::PerSite(blocks),
            })
            .collect();
        BlockSparseOperator {
            grid,
            block_rows,
            block_cols,
            terms,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn block_cols(&self) -> usize {
        self.block_cols
    }

    pub fn terms(&self) -> &[OffsetTerm] {
        &self.terms
    }

    /// Global dimension `(block_rows * N, block_cols * N)`.
    pub fn shape(&self) -> (usize, usize) {
        let n = self.grid.len();
        (self.block_rows * n, self.block_cols * n)
    }

    pub fn offsets(&self) -> Vec<Offset> {
        self.terms.iter().map(|t| t.offset).collect()
    }

    /// Block coupling `site` to `site + offset`, if any.
    pub fn block_at(&self, site: usize, offset: Offset) -> Option<Cow<'_, SparseBlock>> {
        self.terms
            .binary_search_by(|t| t.offset.cmp(&offset))
            .ok()
            .map(|i| Cow::Borrowed(self.terms[i].blocks.at(site)))
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| matches!(t.blocks, SiteBlocks::Uniform(_)))
    }

    fn check_input(&self, v: &[f64]) -> Result<()> {
        let expected = self.block_cols * self.grid.len();
        if v.len() != expected {
            return Err(Error::Shape {
                expected,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Sparse matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.block_rows * self.grid.len()];
        self.apply_add(v, &mut out)?;
        Ok(out)
    }

    /// `out += M v`. Output sites are processed in parallel; each site sums
    /// its terms in offset order, so results do not depend on thread count.
    pub fn apply_add(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_input(v)?;
        let expected = self.block_rows * self.grid.len();
        if out.len() != expected {
            return Err(Error::Shape {
                expected,
                found: out.len(),
            });
        }
        if self.block_rows == 0 {
            return Ok(());
        }
        let (br, bc) = (self.block_rows, self.block_cols);
        out.par_chunks_mut(br).enumerate().for_each(|(site, y)| {
            for term in &self.terms {
                let src = self.grid.shift(site, term.offset);
                term.blocks
                    .at(site)
                    .mul_acc(&v[src * bc..(src + 1) * bc], y);
            }
        });
        Ok(())
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| OffsetTerm {
                offset: t.offset,
                blocks: match &t.blocks {
                    SiteBlocks::Uniform(b) => SiteBlocks::Uniform(b.scale(alpha)),
                    SiteBlocks::PerSite(v) => {
                        SiteBlocks::PerSite(v.iter().map(|b| b.scale(alpha)).collect())
                    }
                },
            })
            .collect();
        BlockSparseOperator { terms, ..*self }
    }

    /// Operator sum; the result stays uniform when both inputs are.
    pub fn add(&self, other: &BlockSparseOperator) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if (self.block_rows, self.block_cols) != (other.block_rows, other.block_cols) {
            return Err(Error::Shape {
                expected: self.block_rows * self.block_cols,
                found: other.block_rows * other.block_cols,
            });
        }
        if self.is_translation_invariant() && other.is_translation_invariant() {
            let terms = self
                .terms
                .iter()
                .chain(&other.terms)
                .map(|t| (t.offset, t.blocks.at(0).clone()))
                .collect();
            return Ok(Self::uniform(
                self.grid,
                self.block_rows,
                self.block_cols,
                terms,
            ));
        }
        let n = self.grid.len();
        let terms = self
            .terms
            .iter()
            .chain(&other.terms)
            .map(|t| (t.offset, (0..n).map(|s| t.blocks.at(s).clone()).collect()))
            .collect();
        Ok(Self::per_site(
            self.grid,
            self.block_rows,
            self.block_cols,
            terms,
        ))
    }

    /// Maximum number of structural nonzeros in any global row.
    pub fn max_row_nnz(&self) -> usize {
        let sites: Vec<usize> = if self.is_translation_invariant() {
            vec![0]
        } else {
            (0..self.grid.len()).collect()
        };
        sites
            .into_iter()
            .flat_map(|s| {
                (0..self.block_rows).map(move |r| {
                    self.terms
                        .iter()
                        .map(|t| t.blocks.at(s).row_nnz(r))
                        .sum::<usize>()
                })
            })
            .max()
            .unwrap_or(0)
    }

    /// Structural nonzero count of the global matrix.
    pub fn nnz(&self) -> usize {
        let n = self.grid.len();
        self.terms
            .iter()
            .map(|t| match &t.blocks {
                SiteBlocks::Uniform(b) => b.nnz() * n,
                SiteBlocks::PerSite(v) => v.iter().map(SparseBlock::nnz).sum(),
            })
            .sum()
    }

    /// Appends global `(row, col, value)` triplets, shifted by the given
    /// row/column origin (used to place blocks inside a larger matrix).
    pub fn push_triplets(&self, row0: usize, col0: usize, out: &mut Vec<(usize, usize, f64)>) {
        let (br, bc) = (self.block_rows, self.block_cols);
        for site in 0..self.grid.len() {
            for term in &self.terms {
                let src = self.grid.shift(site, term.offset);
                for (r, c, v) in term.blocks.at(site).iter() {
                    out.push((row0 + site * br + r, col0 + src * bc + c, v));
                }
            }
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let (rows, cols) = self.shape();
        let mut t = Vec::with_capacity(self.nnz());
        self.push_triplets(0, 0, &mut t);
        CsrMatrix::from_triplets(rows, cols, t)
    }
}

/// Sitewise Kronecker compression: the returned operator has site block
/// `A(x, x') ⊗ B(x, x')` for every site pair. This is the full Kronecker
/// product `A ⊗ B` restricted to product fields that live on the diagonal
/// `x = x'` of the two-site space.
pub fn kron_compress(
    a: &BlockSparseOperator,
    b: &BlockSparseOperator,
) -> Result<BlockSparseOperator> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let rows = a.block_rows * b.block_rows;
    let cols = a.block_cols * b.block_cols;
    let shared: Vec<(&OffsetTerm, &OffsetTerm)> = a
        .terms
        .iter()
        .filter_map(|ta| {
            b.terms
                .binary_search_by(|tb| tb.offset.cmp(&ta.offset))
                .ok()
                .map(|j| (ta, &b.terms[j]))
        })
        .collect();
    if a.is_translation_invariant() && b.is_translation_invariant() {
        let terms = shared
            .into_iter()
            .map(|(ta, tb)| (ta.offset, ta.blocks.at(0).kron(tb.blocks.at(0))))
            .collect();
        return Ok(BlockSparseOperator::uniform(a.grid, rows, cols, terms));
    }
    let n = a.grid.len();
    let terms = shared
        .into_iter()
        .map(|(ta, tb)| {
            let blocks = (0..n)
                .map(|s| ta.blocks.at(s).kron(tb.blocks.at(s)))
                .collect();
            (ta.offset, blocks)
        })
        .collect();
    Ok(BlockSparseOperator::per_site(a.grid, rows, cols, terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{central_difference, Axis};
    use proptest::prelude::*;

    #[test]
    fn identity_is_identity() {
        let g = Grid::new(3, 4).unwrap();
        let op = BlockSparseOperator::identity(g, 2);
        let v: Vec<f64> = (0..24).map(|i| i as f64 * 0.5 - 3.0).collect();
        assert_eq!(op.apply(&v).unwrap(), v);
    }

    #[test]
    fn single_offset_is_circular_shift() {
        let g = Grid::new(4, 3).unwrap();
        let op =
            BlockSparseOperator::uniform(g, 1, 1, vec![(g.offset(1, 0), SparseBlock::identity(1))]);
        let v: Vec<f64> = (0..g.len()).map(|i| i as f64).collect();
        let out = op.apply(&v).unwrap();
        for (x1, x2) in g.sites() {
            assert_eq!(out[g.site(x1, x2)], v[g.site((x1 + 1) % 4, x2)]);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = Grid::square(2).unwrap();
        let op = BlockSparseOperator::identity(g, 3);
        assert!(matches!(
            op.apply(&[1.0; 5]),
            Err(Error::Shape {
                expected: 12,
                found: 5
            })
        ));
    }

    #[test]
    fn kron_compress_identity_and_local() {
        let g = Grid::square(3).unwrap();
        let i2 = BlockSparseOperator::identity(g, 2);
        let i3 = BlockSparseOperator::identity(g, 3);
        assert_eq!(
            kron_compress(&i2, &i3).unwrap(),
            BlockSparseOperator::identity(g, 6)
        );

        let a = SparseBlock::from_dense(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let b = SparseBlock::from_dense(2, 2, &[0.0, -1.0, 4.0, 0.5]);
        let k = kron_compress(
            &BlockSparseOperator::local(g, a.clone()),
            &BlockSparseOperator::local(g, b.clone()),
        )
        .unwrap();
        assert_eq!(k, BlockSparseOperator::local(g, a.kron(&b)));
    }

    #[test]
    fn kron_compress_rejects_grid_mismatch() {
        let a = BlockSparseOperator::identity(Grid::square(2).unwrap(), 1);
        let b = BlockSparseOperator::identity(Grid::square(3).unwrap(), 1);
        assert!(matches!(kron_compress(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn wrapped_offsets_merge_on_tiny_grids() {
        // On a 2-wide grid the +1 and -1 neighbours coincide and cancel.
        let g = Grid::new(2, 5).unwrap();
        let op = BlockSparseOperator::from_stencil(
            g,
            &central_difference(Axis::X1),
            &SparseBlock::identity(1),
        );
        assert_eq!(op.nnz(), 0);
    }

    fn dense(op: &BlockSparseOperator) -> Vec<Vec<f64>> {
        let (r, c) = op.shape();
        let mut m = vec![vec![0.0; c]; r];
        let mut t = vec![];
        op.push_triplets(0, 0, &mut t);
        for (i, j, v) in t {
            m[i][j] += v;
        }
        m
    }

    /// Full Kronecker product of the global matrices applied to a product
    /// field that is nonzero only on the site diagonal, read back on the
    /// diagonal.
    fn brute_force_compress(
        a: &BlockSparseOperator,
        b: &BlockSparseOperator,
        w: &[f64],
    ) -> Vec<f64> {
        let g = a.grid();
        let n = g.len();
        let (ar, ac) = (a.block_rows(), a.block_cols());
        let (br, bc) = (b.block_rows(), b.block_cols());
        let (da, db) = (dense(a), dense(b));
        let (in_a, in_b) = (ac * n, bc * n);
        let mut full = vec![0.0; in_a * in_b];
        for s in 0..n {
            for p in 0..ac {
                for q in 0..bc {
                    full[(s * ac + p) * in_b + s * bc + q] = w[s * ac * bc + p * bc + q];
                }
            }
        }
        let mut out = vec![0.0; n * ar * br];
        for s in 0..n {
            for p in 0..ar {
                for q in 0..br {
                    let (i, j) = (s * ar + p, s * br + q);
                    let mut acc = 0.0;
                    for k in 0..in_a {
                        if da[i][k] == 0.0 {
                            continue;
                        }
                        for l in 0..in_b {
                            acc += da[i][k] * db[j][l] * full[k * in_b + l];
                        }
                    }
                    out[s * ar * br + p * br + q] = acc;
                }
            }
        }
        out
    }

    fn block_strategy(rows: usize, cols: usize) -> impl Strategy<Value = SparseBlock> {
        prop::collection::vec(prop_oneof![2 => Just(0.0), 3 => -1.0f64..1.0], rows * cols)
            .prop_map(move |d| SparseBlock::from_dense(rows, cols, &d))
    }

    fn operator_strategy(
        nx: usize,
        ny: usize,
        rows: usize,
        cols: usize,
        per_site: bool,
    ) -> impl Strategy<Value = BlockSparseOperator> {
        let g = Grid::new(nx, ny).unwrap();
        let n = if per_site { g.len() } else { 1 };
        let offsets = prop::collection::vec((-1i64..=1, -1i64..=1), 1..4);
        (
            offsets,
            prop::collection::vec(prop::collection::vec(block_strategy(rows, cols), n), 3),
        )
            .prop_map(move |(offs, blocks)| {
                if per_site {
                    let terms = offs
                        .iter()
                        .zip(blocks)
                        .map(|(&(a, b), bl)| (g.offset(a, b), bl))
                        .collect();
                    BlockSparseOperator::per_site(g, rows, cols, terms)
                } else {
                    let terms = offs
                        .iter()
                        .zip(blocks)
                        .map(|(&(a, b), mut bl)| (g.offset(a, b), bl.remove(0)))
                        .collect();
                    BlockSparseOperator::uniform(g, rows, cols, terms)
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn kron_compress_matches_full_kronecker(
            a in operator_strategy(4, 4, 2, 2, false),
            b in operator_strategy(4, 4, 2, 1, true),
            w in prop::collection::vec(-1.0f64..1.0, 16 * 2),
        ) {
            let k = kron_compress(&a, &b).unwrap();
            let fast = k.apply(&w).unwrap();
            let slow = brute_force_compress(&a, &b, &w);
            for (x, y) in fast.iter().zip(&slow) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn apply_is_linear(
            op in operator_strategy(3, 4, 2, 3, true),
            u in prop::collection::vec(-1.0f64..1.0, 36),
            v in prop::collection::vec(-1.0f64..1.0, 36),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = op.apply(&mix).unwrap();
            let (au, av) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (alpha * au[i] + beta * av[i])).abs() < 1e-13);
            }
        }

        #[test]
        fn csr_export_agrees_with_apply(
            op in operator_strategy(3, 3, 2, 2, false),
            v in prop::collection::vec(-1.0f64..1.0, 18),
        ) {
            let a = op.apply(&v).unwrap();
            let b = op.to_csr().matvec(&v);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-14);
            }
        }
    }
}
