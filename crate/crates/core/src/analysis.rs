//! Error metrics, curve fits, Carleman variable counting, telescopic
//! propagators, condition-number sweeps and quantum-solver cost formulas.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleman_grad::{
    build_carleman_operator, lift_initial_state, CarlemanOperator, ClosureMode, LiftedState,
};
use crate::grad_dns::{FlowField, GradParams, J1, J2, NV};
use crate::linalg::{
    condition_number, condition_number_dense, ConditionMethod, ConditionOptions, CsrMatrix, Grid,
};
use crate::{Error, Result};

/// Reference currents at or below this magnitude count as zero.
pub const ZERO_CURRENT: f64 = 1e-12;

// ---------------------------------------------------------------- fits

/// Least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination.
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::Shape {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Domain("a line fit needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}

/// Fit of `y = c x^p` on log-log axes; `slope` is the exponent `p`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Exponential decay rate `gamma` of `amp(t) ≈ a0 exp(-gamma t)`.
pub fn decay_rate_fit(times: &[f64], amps: &[f64]) -> Result<f64> {
    if amps.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Domain("decay fit needs positive amplitudes".into()));
    }
    let ly: Vec<f64> = amps.iter().map(|a| a.ln()).collect();
    Ok(-linear_fit(times, &ly)?.slope)
}

/// Projection `(2/N) sum_x f(x) cos(k x_axis)` with `k = 2 pi / L` along
/// the chosen axis (0 for `x1`, 1 for `x2`).
pub fn cosine_amplitude(grid: &Grid, values: &[f64], axis: usize) -> f64 {
    let l = if axis == 0 { grid.nx() } else { grid.ny() };
    let k = 2.0 * std::f64::consts::PI / l as f64;
    let sum: f64 = grid
        .sites()
        .map(|(x1, x2)| {
            let x = if axis == 0 { x1 } else { x2 };
            values[grid.site(x1, x2)] * (k * x as f64).cos()
        })
        .sum();
    2.0 * sum / grid.len() as f64
}

/// Relative L2 distance `|a - b| / |b|`.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

// ------------------------------------------------------- error metrics

/// Which reference values decide that a current component is skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MaskRule {
    /// Skip components that were zero in the initial reference state.
    #[default]
    InitialZero,
    /// Skip components whose current reference value is zero.
    Pointwise,
}

/// Per-site relative current error
/// `sum_a |(J_a^ref - J_a) / J_a^ref|` at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub step: usize,
    /// Error per site; zero at excluded sites.
    pub field: Vec<f64>,
    /// `true` where both components were skipped.
    pub excluded: Vec<bool>,
    /// Mean over included sites.
    pub mean: f64,
}

/// Components that take part in the error, per site.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMask {
    keep: Vec<[bool; 2]>,
}

impl ErrorMask {
    /// Keep components whose value in `reference` is nonzero.
    pub fn from_reference(reference: &FlowField) -> Self {
        let n = reference.grid().len();
        ErrorMask {
            keep: (0..n)
                .map(|s| {
                    [
                        reference.get(s, J1).abs() > ZERO_CURRENT,
                        reference.get(s, J2).abs() > ZERO_CURRENT,
                    ]
                })
                .collect(),
        }
    }

    /// Sites where both components are skipped.
    pub fn excluded_sites(&self) -> Vec<usize> {
        (0..self.keep.len())
            .filter(|&s| self.keep[s] == [false, false])
            .collect()
    }
}

pub fn relative_error(
    initial_reference: &FlowField,
    reference: &FlowField,
    approx: &FlowField,
    step: usize,
    rule: MaskRule,
) -> Result<ErrorReport> {
    if reference.grid() != approx.grid() || reference.grid() != initial_reference.grid() {
        return Err(Error::GridMismatch);
    }
    let mask = match rule {
        MaskRule::InitialZero => ErrorMask::from_reference(initial_reference),
        MaskRule::Pointwise => ErrorMask::from_reference(reference),
    };
    relative_error_masked(&mask, reference, approx, step)
}

pub fn relative_error_masked(
    mask: &ErrorMask,
    reference: &FlowField,
    approx: &FlowField,
    step: usize,
) -> Result<ErrorReport> {
    let n = reference.grid().len();
    let mut field = vec![0.0; n];
    let mut excluded = vec![true; n];
    let (mut sum, mut count) = (0.0, 0usize);
    for s in 0..n {
        for (i, comp) in [J1, J2].into_iter().enumerate() {
            if mask.keep[s][i] {
                let r = reference.get(s, comp);
                field[s] += ((r - approx.get(s, comp)) / r).abs();
                excluded[s] = false;
            }
        }
        if !excluded[s] {
            sum += field[s];
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyReport);
    }
    Ok(ErrorReport {
        step,
        field,
        excluded,
        mean: sum / count as f64,
    })
}

/// Mean relative error per stored step, for steps up to `horizon`. Both
/// series must hold the same steps; the mask is taken from the first
/// reference state.
pub fn mean_error_series(
    reference: &[(usize, FlowField)],
    approx: &[(usize, FlowField)],
    horizon: usize,
) -> Result<Vec<(usize, f64)>> {
    let first = reference.first().ok_or(Error::EmptyReport)?;
    let mask = ErrorMask::from_reference(&first.1);
    let mut out = vec![];
    for ((sr, r), (sa, a)) in reference.iter().zip(approx) {
        if sr != sa {
            return Err(Error::Config(format!("series out of step: {sr} vs {sa}")));
        }
        if *sr > horizon {
            break;
        }
        out.push((*sr, relative_error_masked(&mask, r, a, *sr)?.mean));
    }
    Ok(out)
}

// ----------------------------------------------------------- counting

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VariableCount {
    pub b: u64,
    pub k: u64,
    /// `sum_{j=1..k} C(b + j - 1, j)`.
    pub variables: u64,
    /// `ceil(log2 variables)`.
    pub qubits: u32,
}

/// Number of distinct Carleman monomials up to order `k` in `b` variables
/// and the qubits needed to index them.
pub fn carleman_variable_count(b: u64, k: u64) -> Result<VariableCount> {
    if b == 0 || k == 0 {
        return Err(Error::Domain("b and k must be at least 1".into()));
    }
    let big = || Error::BigCount { b, k };
    let mut term: u128 = 1; // C(b - 1, 0)
    let mut total: u128 = 0;
    for j in 1..=k as u128 {
        // C(b + j - 1, j) = C(b + j - 2, j - 1) (b + j - 1) / j
        term = term.checked_mul(b as u128 + j - 1).ok_or_else(big)? / j;
        total = total.checked_add(term).ok_or_else(big)?;
    }
    let variables = u64::try_from(total).map_err(|_| big())?;
    Ok(VariableCount {
        b,
        k,
        variables,
        qubits: ceil_log2(variables),
    })
}

fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Qubits needed for a 3D simulation at Reynolds number `re`,
/// `Q = 3 log2 Re`.
pub fn qubit_estimate(re: f64) -> Result<f64> {
    if !(re > 1.0) {
        return Err(Error::Domain(format!(
            "Reynolds number must exceed 1, got {re}"
        )));
    }
    Ok(3.0 * re.log2())
}

// ---------------------------------------------------------- telescoping

/// Refuses dense materialization above this many lifted unknowns.
pub const DENSE_GUARD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BandwidthPoint {
    pub power: usize,
    /// Largest periodic Manhattan distance between coupled sites.
    pub site_bandwidth: usize,
}

#[derive(Debug, Clone)]
pub struct Telescopic {
    /// `M^T`, dense.
    pub matrix: Mat<f64>,
    /// Site bandwidth of `M^t` for `t = 1..=T`.
    pub bandwidth: Vec<BandwidthPoint>,
}

fn site_of(op: &CarlemanOperator, idx: usize) -> usize {
    let j = (1..=op.order())
        .rev()
        .find(|&j| idx >= op.order_offset(j))
        .unwrap();
    (idx - op.order_offset(j)) / NV.pow(j as u32)
}

fn site_bandwidth(op: &CarlemanOperator, m: &Mat<f64>) -> usize {
    let g = op.grid();
    let sites: Vec<usize> = (0..m.nrows()).map(|i| site_of(op, i)).collect();
    (0..m.nrows())
        .into_par_iter()
        .map(|r| {
            (0..m.ncols())
                .filter(|&c| m[(r, c)] != 0.0)
                .map(|c| {
                    let (d1, d2) = g.periodic_distance(sites[r], sites[c]);
                    d1 + d2
                })
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}

/// Dense `M^T` of the one-step matrix together with the site bandwidth of
/// each intermediate power.
pub fn telescopic_propagator(op: &CarlemanOperator, t: usize) -> Result<Telescopic> {
    if t == 0 {
        return Err(Error::Domain("telescopic power must be at least 1".into()));
    }
    if op.dim() > DENSE_GUARD {
        return Err(Error::ResourceGuard(format!(
            "dense propagator of dimension {} exceeds the guard {DENSE_GUARD}; use telescopic_apply",
            op.dim()
        )));
    }
    let m = op.to_csr().to_faer_dense();
    let mut power = m.clone();
    let mut bandwidth = vec![BandwidthPoint {
        power: 1,
        site_bandwidth: site_bandwidth(op, &power),
    }];
    for p in 2..=t {
        power = &m * &power;
        bandwidth.push(BandwidthPoint {
            power: p,
            site_bandwidth: site_bandwidth(op, &power),
        });
    }
    Ok(Telescopic {
        matrix: power,
        bandwidth,
    })
}

/// `M^T s` by repeated application, without materializing the power.
pub fn telescopic_apply(op: &CarlemanOperator, s: &LiftedState, t: usize) -> Result<LiftedState> {
    let mut cur = s.clone();
    for step in 1..=t {
        cur = op.step(&cur)?;
        if !cur.is_finite() {
            return Err(Error::Instability { step });
        }
    }
    Ok(cur)
}

/// Dense matrix-vector product.
pub fn dense_apply(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .into_par_iter()
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * x[c]).sum())
        .collect()
}

// ---------------------------------------------------- condition numbers

/// One point of a condition-number sweep. `kappa` is `None` when the
/// estimate failed; the reason is kept in `error`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaPoint {
    pub k: usize,
    pub sites: usize,
    pub steps: usize,
    pub dim: usize,
    pub kappa: Option<f64>,
    pub method: Option<String>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaSweep {
    pub points: Vec<KappaPoint>,
    /// Power-law fit over the successful points (`None` if fewer than two).
    pub fit: Option<LinearFit>,
}

fn method_name(m: ConditionMethod) -> String {
    match m {
        ConditionMethod::DenseSvd => "dense-svd".into(),
        ConditionMethod::Iterative => "lanczos".into(),
    }
}

fn sweep_fit(points: &[KappaPoint], x: impl Fn(&KappaPoint) -> f64) -> Option<LinearFit> {
    let ok: Vec<_> = points.iter().filter(|p| p.kappa.is_some()).collect();
    if ok.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = ok.iter().map(|p| x(p)).collect();
    let ys: Vec<f64> = ok.iter().map(|p| p.kappa.unwrap()).collect();
    power_law_fit(&xs, &ys).ok()
}

/// `kappa` of the one-step Carleman matrix on `L×L` grids, `N = L²`.
pub fn kappa_vs_sites(
    params: &GradParams,
    k: usize,
    sides: &[usize],
    closure: ClosureMode,
    opts: &ConditionOptions,
) -> Result<KappaSweep> {
    let mut points = vec![];
    for &l in sides {
        let grid = Grid::square(l)?;
        let op = build_carleman_operator(params, grid, k, closure)?;
        let dim = op.dim();
        let est = condition_number(&op.to_csr(), opts);
        points.push(point_from(k, grid.len(), 1, dim, est));
    }
    let fit = sweep_fit(&points, |p| p.sites as f64);
    Ok(KappaSweep { points, fit })
}

fn point_from(
    k: usize,
    sites: usize,
    steps: usize,
    dim: usize,
    est: Result<crate::linalg::ConditionEstimate>,
) -> KappaPoint {
    match est {
        Ok(e) => KappaPoint {
            k,
            sites,
            steps,
            dim,
            kappa: Some(e.kappa),
            method: Some(method_name(e.method)),
            converged: e.converged,
            error: None,
        },
        Err(e) => KappaPoint {
            k,
            sites,
            steps,
            dim,
            kappa: None,
            method: None,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

/// `kappa(M^T)` for the given powers on one grid (dense; guarded).
pub fn kappa_vs_steps(
    params: &GradParams,
    k: usize,
    grid: Grid,
    steps: &[usize],
    closure: ClosureMode,
) -> Result<KappaSweep> {
    let op = build_carleman_operator(params, grid, k, closure)?;
    let dim = op.dim();
    if dim > DENSE_GUARD {
        return Err(Error::ResourceGuard(format!(
            "kappa(M^T) needs a dense matrix of dimension {dim} (guard {DENSE_GUARD})"
        )));
    }
    let m = op.to_csr().to_faer_dense();
    let mut sorted: Vec<usize> = steps.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut power = Mat::<f64>::identity(dim, dim);
    let mut done = 0;
    let mut points = vec![];
    for &t in &sorted {
        while done < t {
            power = &m * &power;
            done += 1;
        }
        points.push(point_from(
            k,
            grid.len(),
            t,
            dim,
            condition_number_dense(power.as_ref()),
        ));
    }
    let fit = sweep_fit(&points, |p| p.steps.max(1) as f64);
    Ok(KappaSweep { points, fit })
}

/// `kappa` of an explicit sparse matrix, dense or iterative by size.
pub fn kappa(m: &CsrMatrix, opts: &ConditionOptions) -> Result<f64> {
    Ok(condition_number(m, opts)?.kappa)
}

// ------------------------------------------------------------ costs

/// Quantum linear-solver family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Hhl,
    Cks,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hhl" => Ok(SolverKind::Hhl),
            "cks" => Ok(SolverKind::Cks),
            other => Err(Error::Config(format!(
                "unknown solver '{other}' (expected hhl or cks)"
            ))),
        }
    }
}

/// Per-site first-order block dimension used in the cost formulas.
pub const BLOCK_DIM: f64 = 6.0;

/// Abstract cost with unit constant and base-2 logarithms:
/// HHL `log(g^k N) s² kappa² / eps`, CKS `log(g^k N / eps) kappa`.
pub fn solver_complexity(
    kind: SolverKind,
    n: f64,
    k: u32,
    kappa: f64,
    eps: f64,
    s: f64,
) -> Result<f64> {
    if !(n > 0.0 && kappa > 0.0 && eps > 0.0 && s > 0.0) || eps >= 1.0 || k == 0 {
        return Err(Error::Domain(
            "cost inputs must be positive with 0 < eps < 1 and k >= 1".into(),
        ));
    }
    let size = BLOCK_DIM.powi(k as i32) * n;
    Ok(match kind {
        SolverKind::Hhl => size.log2() * s * s * kappa * kappa / eps,
        SolverKind::Cks => (size / eps).log2() * kappa,
    })
}

/// Lifts `field` and evolves the order-`k` system, convenience wrapper for
/// sweeps over `K`.
pub fn carleman_series(
    params: &GradParams,
    field: &FlowField,
    k: usize,
    closure: ClosureMode,
    steps: usize,
    keep_every: usize,
) -> Result<Vec<(usize, FlowField)>> {
    let op = build_carleman_operator(params, *field.grid(), k, closure)?;
    crate::carleman_grad::carleman_run(&op, &lift_initial_state(field, k)?, steps, keep_every)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad_dns::{grad_run, kolmogorov_init, PressureInit, P11, RHO};
    use proptest::prelude::*;

    fn params() -> GradParams {
        GradParams::default()
    }

    #[test]
    fn line_and_power_fits() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let f = linear_fit(&xs, &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        let p = power_law_fit(&xs, &xs.map(|x: f64| 5.0 * x.powf(0.7))).unwrap();
        assert!((p.slope - 0.7).abs() < 1e-12);
        let t = [0.0, 1.0, 2.0];
        assert!(
            (decay_rate_fit(&t, &t.map(|t: f64| (-0.3 * t).exp())).unwrap() - 0.3).abs() < 1e-14
        );
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(power_law_fit(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn cosine_projection() {
        let g = Grid::square(16).unwrap();
        let k = 2.0 * std::f64::consts::PI / 16.0;
        let v: Vec<f64> = g
            .sites()
            .map(|(_, x2)| 0.3 * (k * x2 as f64).cos())
            .collect();
        assert!((cosine_amplitude(&g, &v, 1) - 0.3).abs() < 1e-15);
        assert!(cosine_amplitude(&g, &v, 0).abs() < 1e-15);
    }

    fn single_site(j1: f64, j2: f64) -> FlowField {
        FlowField::uniform(Grid::square(1).unwrap(), [1.0, j1, j2, 0.0, 0.0, 0.0])
    }

    #[test]
    fn relative_error_examples() {
        let r = single_site(0.1, 0.05);
        let a = single_site(0.11, 0.045);
        let rep = relative_error(&r, &r, &a, 0, MaskRule::InitialZero).unwrap();
        assert!((rep.mean - 0.2).abs() < 1e-14);
        let same = relative_error(&r, &r, &r, 0, MaskRule::InitialZero).unwrap();
        assert_eq!(same.mean, 0.0);
        let zero = single_site(0.0, 0.0);
        assert!(matches!(
            relative_error(&zero, &zero, &a, 0, MaskRule::InitialZero),
            Err(Error::EmptyReport)
        ));
        // Only the nonzero component contributes.
        let half = single_site(0.1, 0.0);
        let rep = relative_error(&half, &half, &a, 0, MaskRule::InitialZero).unwrap();
        assert!((rep.mean - 0.1).abs() < 1e-14);
    }

    #[test]
    fn kolmogorov_mask_is_the_zero_bands() {
        let l = 32;
        let g = Grid::square(l).unwrap();
        let f = kolmogorov_init(g, 0.1, 0.1, &params(), PressureInit::Equilibrium).unwrap();
        let rep = relative_error(&f, &f, &f, 0, MaskRule::InitialZero).unwrap();
        let expected: Vec<usize> = g
            .sites()
            .filter(|&(x1, x2)| (x1 == 8 || x1 == 24) && (x2 == 8 || x2 == 24))
            .map(|(x1, x2)| g.site(x1, x2))
            .collect();
        let got: Vec<usize> = (0..g.len()).filter(|&s| rep.excluded[s]).collect();
        assert_eq!(got, expected);
    }

    proptest! {
        #[test]
        fn relative_error_scale_covariant(
            j in prop::collection::vec(-1.0f64..1.0, 8),
            e in prop::collection::vec(-0.1f64..0.1, 8),
            alpha in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0, 7.0]),
        ) {
            let g = Grid::new(2, 2).unwrap();
            let mk = |scale: f64, pert: bool| {
                let mut f = FlowField::zeros(g);
                for s in 0..4 {
                    f.set(s, RHO, 1.0);
                    let (a, b) = (j[2 * s] + 1.5, j[2 * s + 1] - 1.5);
                    let (da, db) = if pert { (e[2 * s], e[2 * s + 1]) } else { (0.0, 0.0) };
                    f.set(s, J1, scale * (a + da));
                    f.set(s, J2, scale * (b + db));
                }
                f
            };
            let base = relative_error(&mk(1.0, false), &mk(1.0, false), &mk(1.0, true), 0, MaskRule::InitialZero).unwrap();
            let scaled = relative_error(&mk(alpha, false), &mk(alpha, false), &mk(alpha, true), 0, MaskRule::InitialZero).unwrap();
            prop_assert!((base.mean - scaled.mean).abs() < 1e-12 * base.mean.max(1e-300));
        }
    }

    #[test]
    fn error_series_identical_runs() {
        let g = Grid::square(8).unwrap();
        let f = kolmogorov_init(g, 0.1, 0.1, &params(), PressureInit::Equilibrium).unwrap();
        let run = grad_run(&f, &params(), 10, 1).unwrap();
        let series = mean_error_series(&run, &run, 5).unwrap();
        assert_eq!(series.len(), 6);
        assert!(series.iter().all(|&(_, e)| e == 0.0));
    }

    fn brute_force_multisets(b: u64, k: u64) -> u64 {
        // Count nondecreasing index sequences of each length 1..=k.
        fn count(b: u64, len: u64, min: u64) -> u64 {
            if len == 0 {
                return 1;
            }
            (min..b).map(|i| count(b, len - 1, i)).sum()
        }
        (1..=k).map(|j| count(b, j, 0)).sum()
    }

    #[test]
    fn variable_count_matches_enumeration() {
        for b in 1..=5 {
            for k in 1..=5 {
                assert_eq!(
                    carleman_variable_count(b, k).unwrap().variables,
                    brute_force_multisets(b, k)
                );
            }
        }
    }

    #[test]
    fn variable_count_examples_and_overflow() {
        let c = carleman_variable_count(9, 2).unwrap();
        assert_eq!((c.variables, c.qubits), (54, 6));
        let c = carleman_variable_count(19, 3).unwrap();
        assert_eq!((c.variables, c.qubits), (1539, 11));
        assert_eq!(carleman_variable_count(19, 8).unwrap().variables, 2_220_074);
        assert!(matches!(
            carleman_variable_count(1000, 40),
            Err(Error::BigCount { .. })
        ));
        assert!(carleman_variable_count(0, 2).is_err());
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(64), 6);
        assert_eq!(ceil_log2(65), 7);
    }

    #[test]
    fn qubit_estimates() {
        assert!((qubit_estimate(2.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((qubit_estimate(1e7).unwrap() - 69.76).abs() < 0.01);
        for n in 2..9 {
            let q = qubit_estimate(10f64.powi(n)).unwrap();
            assert!((q / (10.0 * n as f64) - 1.0).abs() < 0.01);
        }
        assert!(qubit_estimate(1.0).is_err());
    }

    #[test]
    fn cost_scaling() {
        let cks1 = solver_complexity(SolverKind::Cks, 1024.0, 2, 100.0, 1e-2, 36.0).unwrap();
        let cks2 = solver_complexity(SolverKind::Cks, 1024.0, 2, 200.0, 1e-2, 36.0).unwrap();
        assert!((cks2 / cks1 - 2.0).abs() < 1e-14);
        let h1 = solver_complexity(SolverKind::Hhl, 1024.0, 2, 100.0, 1e-2, 36.0).unwrap();
        let h2 = solver_complexity(SolverKind::Hhl, 1024.0, 2, 200.0, 1e-2, 36.0).unwrap();
        assert!((h2 / h1 - 4.0).abs() < 1e-14);
        let expected_h1 = (36.0f64 * 1024.0).log2() * 36.0 * 36.0 * 1e4 / 1e-2;
        assert!((h1 / expected_h1 - 1.0).abs() < 1e-14);
        assert!(solver_complexity(SolverKind::Cks, 1.0, 1, 1.0, 1.5, 1.0).is_err());
        assert_eq!("HHL".parse::<SolverKind>().unwrap(), SolverKind::Hhl);
    }

    #[test]
    fn telescoping_identity_and_bandwidth() {
        let g = Grid::square(8).unwrap();
        let op = build_carleman_operator(&params(), g, 1, ClosureMode::Diagonal).unwrap();
        let f = kolmogorov_init(g, 0.1, 0.1, &params(), PressureInit::Equilibrium).unwrap();
        let s = lift_initial_state(&f, 1).unwrap();
        let tele = telescopic_propagator(&op, 6).unwrap();
        let via_power = dense_apply(&tele.matrix, &s.to_flat());
        let sequential = telescopic_apply(&op, &s, 6).unwrap().to_flat();
        for (a, b) in via_power.iter().zip(&sequential) {
            assert!((a - b).abs() < 1e-14);
        }
        let bw: Vec<usize> = tele.bandwidth.iter().map(|b| b.site_bandwidth).collect();
        assert_eq!(bw, vec![1, 2, 3, 4, 5, 6]);

        let one = telescopic_propagator(&op, 1).unwrap();
        let m = op.to_csr().to_faer_dense();
        assert_eq!(one.matrix, m);
        let big = build_carleman_operator(
            &params(),
            Grid::square(16).unwrap(),
            2,
            ClosureMode::Diagonal,
        )
        .unwrap();
        assert!(matches!(
            telescopic_propagator(&big, 2),
            Err(Error::ResourceGuard(_))
        ));
        assert!(telescopic_propagator(&op, 0).is_err());
    }

    #[test]
    fn bandwidth_saturates_on_small_grid() {
        let g = Grid::square(4).unwrap();
        let op = build_carleman_operator(&params(), g, 1, ClosureMode::Diagonal).unwrap();
        let tele = telescopic_propagator(&op, 6).unwrap();
        assert!(tele.bandwidth.iter().all(|b| b.site_bandwidth <= 4));
        assert_eq!(tele.bandwidth.last().unwrap().site_bandwidth, 4);
    }

    #[test]
    fn kappa_of_identity_power_and_scaling() {
        let g = Grid::square(4).unwrap();
        let sweep = kappa_vs_steps(&params(), 1, g, &[0, 1, 3], ClosureMode::Diagonal).unwrap();
        assert!((sweep.points[0].kappa.unwrap() - 1.0).abs() < 1e-12);
        assert!(sweep.points[1].kappa.unwrap() >= 1.0);
        let m = build_carleman_operator(&params(), g, 1, ClosureMode::Diagonal)
            .unwrap()
            .to_csr();
        let opts = ConditionOptions::default();
        let k1 = kappa(&m, &opts).unwrap();
        let k2 = kappa(&m.scale(-7.5), &opts).unwrap();
        assert!((k1 - k2).abs() < 1e-12 * k1);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let a = kappa_vs_sites(
            &params(),
            1,
            &[2, 4],
            ClosureMode::Diagonal,
            &ConditionOptions::default(),
        )
        .unwrap();
        let b = kappa_vs_sites(
            &params(),
            1,
            &[2, 4],
            ClosureMode::Diagonal,
            &ConditionOptions::default(),
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.fit.is_some());
    }

    #[test]
    fn carleman_series_wrapper() {
        let g = Grid::square(4).unwrap();
        let f = kolmogorov_init(g, 0.1, 0.0, &params(), PressureInit::Equilibrium).unwrap();
        let s = carleman_series(&params(), &f, 2, ClosureMode::Leibniz, 4, 2).unwrap();
        assert_eq!(s.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 2, 4]);
        assert!(s[2].1.get(0, P11).is_finite());
    }
}
