//! Carleman linearization of the discretized Grad system.
//!
//! One forward-Euler step of the Grad moments at a site reads
//!
//! ```text
//! V' = Â V + B (V ⊗ V) + C (V ⊗ V ⊗ V)
//! ```
//!
//! with `Â = A_loc ⊗ I_N + A_d1 ⊗ D1 + A_d2 ⊗ D2` (central differences `D`)
//! and purely local `B`, `C`. The lifted state holds the sitewise tensor
//! powers `W_j = V^⊗j`, `j = 1..K`, evolved by the block upper-triangular
//! matrix
//!
//! ```text
//! W_j' = T_jj W_j + T_j,j+1 W_{j+1} + T_j,j+2 W_{j+2}
//! ```
//!
//! truncated at `K`. The product of two transported fields involves pairs of
//! distinct sites, so `T_jj` needs a closure that keeps the state on the
//! diagonal `x = x'`; see [`ClosureMode`].

use std::io::Write;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::grad_dns::{DensityInverse, FlowField, GradParams, J1, J2, NV, P11, P12, P22, RHO};
use crate::linalg::{
    central_difference, kron_compress, Axis, BlockSparseOperator, CsrMatrix, Grid, Offset,
    SparseBlock,
};
use crate::{Error, Result};

/// Largest truncation order accepted by [`build_carleman_operator`].
pub const MAX_ORDER: usize = 5;

/// Largest grid accepted by [`exact_nonlocal_lift`].
pub const NONLOCAL_MAX_SITES: usize = 16;

/// How the transport part of `Â^⊗j` is restricted to same-site products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureMode {
    /// Sitewise Kronecker compression: only equal offsets of the factors are
    /// paired, giving blocks `(A_off)^⊗j` at each stencil offset.
    #[default]
    Diagonal,
    /// Product rule: `A_loc^⊗j` on site plus the derivative stencil applied
    /// once to the product field, with the component matrix inserted in each
    /// slot in turn and averaged. Exact when the derivative coefficients are
    /// scalar; commutes with slot permutations.
    Leibniz,
    /// Full two-site lift; small grids and `K = 2` only, see
    /// [`exact_nonlocal_lift`].
    ExactNonlocal,
}

impl std::str::FromStr for ClosureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(ClosureMode::Diagonal),
            "leibniz" => Ok(ClosureMode::Leibniz),
            "exact-nonlocal" => Ok(ClosureMode::ExactNonlocal),
            other => Err(Error::Config(format!(
                "unknown closure '{other}' (expected diagonal, leibniz or exact-nonlocal)"
            ))),
        }
    }
}

impl std::fmt::Display for ClosureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClosureMode::Diagonal => "diagonal",
            ClosureMode::Leibniz => "leibniz",
            ClosureMode::ExactNonlocal => "exact-nonlocal",
        })
    }
}

/// Per-site matrices of one Euler step; all entries carry the `dt` factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMatrices {
    /// On-site part, `I + dt L_loc`.
    pub a_loc: SparseBlock,
    /// Coefficient of the `D1` stencil.
    pub a_d1: SparseBlock,
    /// Coefficient of the `D2` stencil.
    pub a_d2: SparseBlock,
    /// Quadratic part, 6×36.
    pub b: SparseBlock,
    /// Cubic part, 6×216.
    pub c: SparseBlock,
}

#[inline]
fn pair(a: usize, b: usize) -> usize {
    a * NV + b
}

#[inline]
fn triple(a: usize, b: usize, c: usize) -> usize {
    (a * NV + b) * NV + c
}

/// Assembles the local matrices for the polynomial-inverse Grad step.
pub fn build_local_matrices(params: &GradParams) -> Result<LocalMatrices> {
    params.validate()?;
    if params.inverse != DensityInverse::Polynomial {
        return Err(Error::Config(
            "the Carleman lift needs the polynomial density inverse".into(),
        ));
    }
    let (dt, om, c2) = (params.dt, params.omega, params.cs2());

    let mut a_loc = vec![(RHO, RHO, 1.0), (J1, J1, 1.0), (J2, J2, 1.0)];
    for p in [P11, P12, P22] {
        a_loc.push((p, p, 1.0 - om * dt));
    }
    a_loc.push((P11, RHO, om * dt * c2));
    a_loc.push((P22, RHO, om * dt * c2));

    let a_d1 = vec![
        (RHO, J1, -dt),
        (J1, P11, -dt),
        (J2, P12, -dt),
        (P11, J1, -3.0 * dt * c2),
        (P12, J2, -dt * c2),
        (P22, J1, -dt * c2),
    ];
    let a_d2 = vec![
        (RHO, J2, -dt),
        (J1, P12, -dt),
        (J2, P22, -dt),
        (P11, J2, -dt * c2),
        (P12, J1, -dt * c2),
        (P22, J2, -3.0 * dt * c2),
    ];
    let b = vec![
        (P11, pair(J1, J1), 2.0 * dt * om),
        (P12, pair(J1, J2), 2.0 * dt * om),
        (P22, pair(J2, J2), 2.0 * dt * om),
    ];
    let c = vec![
        (P11, triple(J1, J1, RHO), -dt * om),
        (P12, triple(J1, J2, RHO), -dt * om),
        (P22, triple(J2, J2, RHO), -dt * om),
    ];
    Ok(LocalMatrices {
        a_loc: SparseBlock::from_triplets(NV, NV, a_loc),
        a_d1: SparseBlock::from_triplets(NV, NV, a_d1),
        a_d2: SparseBlock::from_triplets(NV, NV, a_d2),
        b: SparseBlock::from_triplets(NV, NV * NV, b),
        c: SparseBlock::from_triplets(NV, NV * NV * NV, c),
    })
}

impl LocalMatrices {
    /// Same matrices with the transport stencils switched off.
    pub fn collision_only(&self) -> Self {
        LocalMatrices {
            a_d1: SparseBlock::zeros(NV, NV),
            a_d2: SparseBlock::zeros(NV, NV),
            ..self.clone()
        }
    }

    /// Same matrices with the quadratic and cubic parts switched off.
    pub fn linear_only(&self) -> Self {
        LocalMatrices {
            b: SparseBlock::zeros(NV, NV * NV),
            c: SparseBlock::zeros(NV, NV * NV * NV),
            ..self.clone()
        }
    }

    /// The first-order global operator `Â`.
    pub fn a_hat(&self, grid: Grid) -> BlockSparseOperator {
        let mut terms = vec![(Offset::ZERO, self.a_loc.clone())];
        for (axis, a) in [(Axis::X1, &self.a_d1), (Axis::X2, &self.a_d2)] {
            for &(d1, d2, w) in &central_difference(axis).offsets {
                terms.push((grid.offset(d1, d2), a.scale(w)));
            }
        }
        BlockSparseOperator::uniform(grid, NV, NV, terms)
    }

    /// `A_loc V + B V⊗V + C V⊗V⊗V` for one site, ignoring transport.
    pub fn local_step(&self, v: &[f64]) -> Vec<f64> {
        let v2 = tensor_power(v, 2);
        let v3 = tensor_power(v, 3);
        let mut out = self.a_loc.matvec(v);
        self.b.mul_acc(&v2, &mut out);
        self.c.mul_acc(&v3, &mut out);
        out
    }
}

/// `v^⊗j` in lexicographic (first slot slowest) order.
pub fn tensor_power(v: &[f64], j: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..j {
        out = out
            .iter()
            .flat_map(|&a| v.iter().map(move |&b| a * b))
            .collect();
    }
    out
}

fn kron_power(a: &SparseBlock, j: usize) -> SparseBlock {
    (0..j).fold(SparseBlock::identity(1), |acc, _| acc.kron(a))
}

/// `sum_m I^⊗(m-1) ⊗ x ⊗ I^⊗(j-m)` for a square `x`.
fn slot_sum(x: &SparseBlock, j: usize) -> SparseBlock {
    let n = x.rows();
    let mut total = SparseBlock::zeros(n.pow(j as u32), n.pow(j as u32));
    for m in 1..=j {
        let left = SparseBlock::identity(n.pow((m - 1) as u32));
        let right = SparseBlock::identity(n.pow((j - m) as u32));
        total = total.add(&left.kron(x).kron(&right));
    }
    total
}

/// `sum_m A^⊗(m-1) ⊗ x ⊗ A^⊗(j-m)`.
fn coupling(a: &SparseBlock, x: &SparseBlock, j: usize) -> SparseBlock {
    let mut total = SparseBlock::zeros(
        a.rows().pow((j - 1) as u32) * x.rows(),
        a.cols().pow((j - 1) as u32) * x.cols(),
    );
    for m in 1..=j {
        total = total.add(&kron_power(a, m - 1).kron(x).kron(&kron_power(a, j - m)));
    }
    total
}

/// Lifted one-step operator, stored as its nonzero block rows.
#[derive(Debug, Clone)]
pub struct CarlemanOperator {
    grid: Grid,
    order: usize,
    closure: ClosureMode,
    /// `T_jj`, index `j - 1`.
    diag: Vec<BlockSparseOperator>,
    /// `T_j,j+1`, present for `j + 1 <= K`.
    up1: Vec<BlockSparseOperator>,
    /// `T_j,j+2`, present for `j + 2 <= K`.
    up2: Vec<BlockSparseOperator>,
}

/// Builds the order-`k` Carleman operator for a Grad step.
pub fn build_carleman_operator(
    params: &GradParams,
    grid: Grid,
    k: usize,
    closure: ClosureMode,
) -> Result<CarlemanOperator> {
    CarlemanOperator::assemble(&build_local_matrices(params)?, grid, k, closure, MAX_ORDER)
}

impl CarlemanOperator {
    /// Assembles the operator from explicit local matrices, refusing orders
    /// above `max_order`.
    pub fn assemble(
        local: &LocalMatrices,
        grid: Grid,
        k: usize,
        closure: ClosureMode,
        max_order: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("truncation order must be at least 1".into()));
        }
        if k > max_order {
            return Err(Error::ResourceGuard(format!(
                "truncation order {k} exceeds the limit {max_order} (state size {} per site)",
                (1..=k).map(|j| NV.pow(j as u32)).sum::<usize>()
            )));
        }
        let a_hat = local.a_hat(grid);
        let mut diag = vec![a_hat.clone()];
        for j in 2..=k {
            let t = match closure {
                ClosureMode::Diagonal => kron_compress(&diag[j - 2], &a_hat)?,
                ClosureMode::Leibniz => leibniz_block(local, grid, j),
                ClosureMode::ExactNonlocal => return Err(Error::Config(
                    "the exact nonlocal lift is not a sitewise operator; use exact_nonlocal_lift"
                        .into(),
                )),
            };
            diag.push(t);
        }
        let up1 = (1..k)
            .map(|j| BlockSparseOperator::local(grid, coupling(&local.a_loc, &local.b, j)))
            .collect();
        let up2 = (1..k.saturating_sub(1))
            .map(|j| BlockSparseOperator::local(grid, coupling(&local.a_loc, &local.c, j)))
            .collect();
        Ok(CarlemanOperator {
            grid,
            order: k,
            closure,
            diag,
            up1,
            up2,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn closure(&self) -> ClosureMode {
        self.closure
    }

    /// `T_jj` for `1 <= j <= K`.
    pub fn diag_block(&self, j: usize) -> &BlockSparseOperator {
        &self.diag[j - 1]
    }

    /// `T_j,j+1`, if present.
    pub fn up1_block(&self, j: usize) -> Option<&BlockSparseOperator> {
        self.up1.get(j.wrapping_sub(1))
    }

    /// `T_j,j+2`, if present.
    pub fn up2_block(&self, j: usize) -> Option<&BlockSparseOperator> {
        self.up2.get(j.wrapping_sub(1))
    }

    /// Total number of lifted unknowns, `N sum_j 6^j`.
    pub fn dim(&self) -> usize {
        lifted_dim(self.grid.len(), self.order)
    }

    /// Global row offset of order `j` in the flat layout.
    pub fn order_offset(&self, j: usize) -> usize {
        lifted_dim(self.grid.len(), j - 1)
    }

    /// One application `s -> T s`.
    pub fn step(&self, s: &LiftedState) -> Result<LiftedState> {
        if s.order != self.order || s.grid != self.grid {
            return Err(Error::Shape {
                expected: self.dim(),
                found: s.blocks.iter().map(Vec::len).sum(),
            });
        }
        let mut blocks = Vec::with_capacity(self.order);
        for j in 1..=self.order {
            let mut out = vec![0.0; s.blocks[j - 1].len()];
            self.diag[j - 1].apply_add(&s.blocks[j - 1], &mut out)?;
            if let Some(t) = self.up1_block(j) {
                t.apply_add(&s.blocks[j], &mut out)?;
            }
            if let Some(t) = self.up2_block(j) {
                t.apply_add(&s.blocks[j + 1], &mut out)?;
            }
            blocks.push(out);
        }
        Ok(LiftedState {
            grid: self.grid,
            order: self.order,
            blocks,
        })
    }

    /// The one-step matrix as a global CSR matrix (orders stacked in
    /// increasing `j`, sites row-major, components fastest).
    pub fn to_csr(&self) -> CsrMatrix {
        let mut t = vec![];
        for j in 1..=self.order {
            let row0 = self.order_offset(j);
            self.diag[j - 1].push_triplets(row0, row0, &mut t);
            if let Some(b) = self.up1_block(j) {
                b.push_triplets(row0, self.order_offset(j + 1), &mut t);
            }
            if let Some(c) = self.up2_block(j) {
                c.push_triplets(row0, self.order_offset(j + 2), &mut t);
            }
        }
        CsrMatrix::from_triplets(self.dim(), self.dim(), t)
    }

    /// Writes the one-step matrix as `row col value` lines.
    pub fn write_triplets<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_triplets(&self.to_csr(), w)
    }
}

fn lifted_dim(n: usize, k: usize) -> usize {
    n * (1..=k).map(|j| NV.pow(j as u32)).sum::<usize>()
}

fn leibniz_block(local: &LocalMatrices, grid: Grid, j: usize) -> BlockSparseOperator {
    let dim = NV.pow(j as u32);
    let mut terms = vec![(Offset::ZERO, kron_power(&local.a_loc, j))];
    for (axis, a) in [(Axis::X1, &local.a_d1), (Axis::X2, &local.a_d2)] {
        let inserted = slot_sum(a, j).scale(1.0 / j as f64);
        for &(d1, d2, w) in &central_difference(axis).offsets {
            terms.push((grid.offset(d1, d2), inserted.scale(w)));
        }
    }
    BlockSparseOperator::uniform(grid, dim, dim, terms)
}

/// Sitewise tensor powers `W_j`, `j = 1..K`, each stored site-major with
/// `6^j` components per site.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    grid: Grid,
    order: usize,
    blocks: Vec<Vec<f64>>,
}

/// `W_j(x) = V0(x)^⊗j`.
pub fn lift_initial_state(v0: &FlowField, k: usize) -> Result<LiftedState> {
    if k == 0 {
        return Err(Error::Config("truncation order must be at least 1".into()));
    }
    let grid = *v0.grid();
    let blocks = (1..=k)
        .map(|j| {
            (0..grid.len())
                .flat_map(|s| tensor_power(v0.site(s), j))
                .collect()
        })
        .collect();
    Ok(LiftedState {
        grid,
        order: k,
        blocks,
    })
}

impl LiftedState {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Order-`j` block.
    pub fn block(&self, j: usize) -> &[f64] {
        &self.blocks[j - 1]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.blocks[j - 1]
    }

    /// The order-1 block as a moment field.
    pub fn order1(&self) -> FlowField {
        FlowField::from_vec(self.grid, self.blocks[0].clone())
            .expect("order-1 block has 6 entries per site")
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks.concat()
    }

    pub fn from_flat(grid: Grid, order: usize, flat: &[f64]) -> Result<Self> {
        let expected = lifted_dim(grid.len(), order);
        if flat.len() != expected || order == 0 {
            return Err(Error::Shape {
                expected,
                found: flat.len(),
            });
        }
        let mut blocks = vec![];
        let mut start = 0;
        for j in 1..=order {
            let len = grid.len() * NV.pow(j as u32);
            blocks.push(flat[start..start + len].to_vec());
            start += len;
        }
        Ok(LiftedState {
            grid,
            order,
            blocks,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|v| v.is_finite())
    }
}

/// Evolves `s0` for `steps` steps and returns the order-1 block at steps
/// `0..=steps` (every `keep_every`-th, plus the last).
pub fn carleman_run(
    op: &CarlemanOperator,
    s0: &LiftedState,
    steps: usize,
    keep_every: usize,
) -> Result<Vec<(usize, FlowField)>> {
    let keep_every = keep_every.max(1);
    let mut out = vec![(0, s0.order1())];
    let mut s = s0.clone();
    for step in 1..=steps {
        s = op.step(&s)?;
        if !s.is_finite() {
            return Err(Error::Instability { step });
        }
        if step % keep_every == 0 || step == steps {
            out.push((step, s.order1()));
        }
    }
    Ok(out)
}

/// Max and mean absolute deviation between two vectors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Deviation {
    pub max: f64,
    pub mean: f64,
}

impl Deviation {
    fn between(a: &[f64], b: &[f64]) -> Self {
        let (mut max, mut sum) = (0.0f64, 0.0);
        for (x, y) in a.iter().zip(b) {
            let d = (x - y).abs();
            max = max.max(d);
            sum += d;
        }
        Deviation {
            max,
            mean: sum / a.len().max(1) as f64,
        }
    }
}

/// Deviation of one local closure from the nonlocal lift at one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClosureDeviation {
    pub order1: Deviation,
    pub order2: Deviation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlocalStep {
    pub step: usize,
    pub diagonal: ClosureDeviation,
    pub leibniz: ClosureDeviation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlocalReport {
    pub steps: Vec<NonlocalStep>,
}

impl NonlocalReport {
    /// Largest order-1 and order-2 deviation over the run for a closure.
    pub fn worst(&self, closure: ClosureMode) -> ClosureDeviation {
        let mut w = ClosureDeviation::default();
        for s in &self.steps {
            let d = match closure {
                ClosureMode::Leibniz => s.leibniz,
                _ => s.diagonal,
            };
            w.order1.max = w.order1.max.max(d.order1.max);
            w.order1.mean = w.order1.mean.max(d.order1.mean);
            w.order2.max = w.order2.max.max(d.order2.max);
            w.order2.mean = w.order2.mean.max(d.order2.mean);
        }
        w
    }
}

/// Second-order lift without any locality closure: the full two-site
/// product `X = W1 W1ᵀ` evolves by `X' = Â X Âᵀ` and feeds the first order
/// through its diagonal, `W1' = Â W1 + B diag(X)`. The diagonal of `X` is
/// compared step by step against both local closures at `K = 2`.
pub fn exact_nonlocal_lift(
    local: &LocalMatrices,
    initial: &FlowField,
    steps: usize,
) -> Result<NonlocalReport> {
    let grid = *initial.grid();
    let n = grid.len();
    if n > NONLOCAL_MAX_SITES {
        return Err(Error::ResourceGuard(format!(
            "exact nonlocal lift limited to {NONLOCAL_MAX_SITES} sites, grid has {n}"
        )));
    }
    let dim = NV * n;
    let a_dense = local.a_hat(grid).to_csr().to_faer_dense();
    let b_hat = BlockSparseOperator::local(grid, local.b.clone());

    let mut w1 = initial.as_slice().to_vec();
    let mut x = Mat::<f64>::from_fn(dim, dim, |i, j| w1[i] * w1[j]);

    let ops = [
        CarlemanOperator::assemble(local, grid, 2, ClosureMode::Diagonal, 2)?,
        CarlemanOperator::assemble(local, grid, 2, ClosureMode::Leibniz, 2)?,
    ];
    let mut states = [
        lift_initial_state(initial, 2)?,
        lift_initial_state(initial, 2)?,
    ];

    let diag_of = |x: &Mat<f64>| -> Vec<f64> {
        let mut d = Vec::with_capacity(n * NV * NV);
        for s in 0..n {
            for a in 0..NV {
                for b in 0..NV {
                    d.push(x[(s * NV + a, s * NV + b)]);
                }
            }
        }
        d
    };

    let mut report = NonlocalReport { steps: vec![] };
    for step in 1..=steps {
        let w2 = diag_of(&x);
        let mut next = vec![0.0; dim];
        for i in 0..dim {
            next[i] = (0..dim).map(|k| a_dense[(i, k)] * w1[k]).sum();
        }
        b_hat.apply_add(&w2, &mut next)?;
        w1 = next;
        x = &a_dense * &x * a_dense.transpose();
        if w1.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability { step });
        }
        let exact2 = diag_of(&x);

        let mut devs = [ClosureDeviation::default(); 2];
        for (i, op) in ops.iter().enumerate() {
            states[i] = op.step(&states[i])?;
            devs[i] = ClosureDeviation {
                order1: Deviation::between(states[i].block(1), &w1),
                order2: Deviation::between(states[i].block(2), &exact2),
            };
        }
        report.steps.push(NonlocalStep {
            step,
            diagonal: devs[0],
            leibniz: devs[1],
        });
    }
    Ok(report)
}
