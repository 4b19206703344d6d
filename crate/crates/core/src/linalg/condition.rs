use faer::linalg::solvers::Solve;
use faer::{Mat, MatMut, MatRef, Side};

use super::CsrMatrix;
use crate::{Error, Result};

/// Ratio below which `sigma_min / sigma_max` is treated as singular.
pub const SINGULAR_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionOptions {
    /// Matrices up to this dimension go through a full SVD.
    pub dense_threshold: usize,
    /// Relative tolerance of the iterative singular-value estimates.
    pub rel_tol: f64,
    /// Krylov dimension cap for each iterative estimate.
    pub max_iter: usize,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions {
            dense_threshold: 5000,
            rel_tol: 1e-6,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionMethod {
    DenseSvd,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub kappa: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub method: ConditionMethod,
    /// `false` when an iterative estimate hit the Krylov cap before meeting
    /// its residual tolerance.
    pub converged: bool,
}

fn from_sigmas(
    sigma_max: f64,
    sigma_min: f64,
    method: ConditionMethod,
    converged: bool,
) -> Result<ConditionEstimate> {
    if !(sigma_max > 0.0) || sigma_min < SINGULAR_RATIO * sigma_max {
        return Err(Error::Singular {
            ratio: if sigma_max > 0.0 {
                sigma_min / sigma_max
            } else {
                0.0
            },
        });
    }
    Ok(ConditionEstimate {
        kappa: sigma_max / sigma_min,
        sigma_max,
        sigma_min,
        method,
        converged,
    })
}

/// `sigma_max / sigma_min` from a full singular value decomposition.
pub fn condition_number_dense(m: MatRef<'_, f64>) -> Result<ConditionEstimate> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Shape {
            expected: 1,
            found: 0,
        });
    }
    let s = m
        .singular_values()
        .map_err(|e| Error::LinearAlgebra(format!("svd: {e:?}")))?;
    from_sigmas(s[0], s[s.len() - 1], ConditionMethod::DenseSvd, true)
}

/// Spectral condition number of a square sparse matrix.
///
/// Small matrices use a dense SVD. Larger ones estimate `sigma_max` from
/// Krylov (Lanczos) iterations on `MᵀM` and `sigma_min` from the same
/// iteration on `(MᵀM)⁻¹`, applied through a sparse LU factorization of `M`.
pub fn condition_number(m: &CsrMatrix, opts: &ConditionOptions) -> Result<ConditionEstimate> {
    if m.rows() != m.cols() {
        return Err(Error::Shape {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    if m.rows() <= opts.dense_threshold {
        return condition_number_dense(m.to_faer_dense().as_ref());
    }
    iterative(m, opts)
}

fn iterative(m: &CsrMatrix, opts: &ConditionOptions) -> Result<ConditionEstimate> {
    let mt = m.transpose();
    let (lam_max, conv_max) = lanczos_largest(m.rows(), |x| mt.matvec(&m.matvec(x)), opts)?;

    let lu = m
        .to_faer_sparse()?
        .sp_lu()
        .map_err(|_| Error::Singular { ratio: 0.0 })?;
    let solve_normal = |x: &[f64]| {
        let mut buf = x.to_vec();
        let n = buf.len();
        lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut buf, n, 1));
        lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut buf, n, 1));
        buf
    };
    let (inv_lam_min, conv_min) = lanczos_largest(m.rows(), solve_normal, opts)?;
    if !inv_lam_min.is_finite() || inv_lam_min <= 0.0 {
        return Err(Error::Singular { ratio: 0.0 });
    }
    from_sigmas(
        lam_max.sqrt(),
        (1.0 / inv_lam_min).sqrt(),
        ConditionMethod::Iterative,
        conv_max && conv_min,
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest eigenvalue of a symmetric positive semi-definite operator by
/// Lanczos with full reorthogonalization. The Krylov space is the one spanned
/// by the power-iteration sequence, so the Ritz value is never worse than the
/// power-method Rayleigh quotient after the same number of products.
fn lanczos_largest(
    dim: usize,
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    opts: &ConditionOptions,
) -> Result<(f64, bool)> {
    // Deterministic, non-symmetric start vector.
    let mut q: Vec<f64> = (0..dim)
        .map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0)
        .collect();
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= norm);

    let max_iter = opts.max_iter.min(dim).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter + 1);
    let mut alphas: Vec<f64> = vec![];
    let mut betas: Vec<f64> = vec![];
    basis.push(q);
    let mut last = f64::NAN;

    for j in 0..max_iter {
        let mut w = apply(&basis[j]);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearAlgebra(
                "non-finite value in Krylov iteration".into(),
            ));
        }
        let alpha = dot(&basis[j], &w);
        alphas.push(alpha);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = dot(&w, &w).sqrt();
        let k = alphas.len();
        let check = k == max_iter || beta <= 1e-13 * alpha.abs().max(1e-300) || k.is_multiple_of(5);
        if check {
            let (theta, last_comp) = tridiagonal_top(&alphas, &betas)?;
            let residual = beta * last_comp.abs();
            if beta <= 1e-13 * alpha.abs().max(1e-300) || residual <= opts.rel_tol * theta {
                return Ok((theta, true));
            }
            if k == max_iter {
                return Ok((theta, false));
            }
            last = theta;
        }
        betas.push(beta);
        w.iter_mut().for_each(|v| *v /= beta);
        basis.push(w);
    }
    Ok((last, false))
}

/// Largest eigenvalue of the Lanczos tridiagonal matrix and the last
/// component of its eigenvector.
fn tridiagonal_top(alphas: &[f64], betas: &[f64]) -> Result<(f64, f64)> {
    let k = alphas.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i == j + 1 {
            betas[j]
        } else if j == i + 1 {
            betas[i]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("tridiagonal eigensolve: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let top = (0..k)
        .max_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap())
        .unwrap();
    Ok((s[top], u[(k - 1, top)]))
}
