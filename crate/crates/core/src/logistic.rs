//! Carleman linearization of the logistic equation `x' = -a x + b x²`.
//!
//! This zero-dimensional model is both a teaching example and an oracle: the
//! truncated Carleman hierarchy has a closed-form solution (a geometric
//! partial sum), so every property of the lifted system can be checked
//! against exact arithmetic.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Terms larger than this flag a divergent partial sum.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Linear decay rate.
    pub a: f64,
    /// Quadratic rate.
    pub b: f64,
    /// Initial condition.
    pub x0: f64,
}

/// Partial sum of the Carleman series together with a divergence flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub diverged: bool,
}

impl LogisticParams {
    pub fn new(a: f64, b: f64, x0: f64) -> Self {
        LogisticParams { a, b, x0 }
    }

    /// Ratio `R = b / a`; undefined for `a = 0`.
    pub fn ratio(&self) -> Option<f64> {
        (self.a != 0.0).then(|| self.b / self.a)
    }

    /// Series variable `q(t) = R x0 (1 - e^{-at})`.
    pub fn series_ratio(&self, t: f64) -> f64 {
        match self.ratio() {
            Some(r) => r * self.x0 * (-(-self.a * t).exp_m1()),
            // a -> 0 limit of R (1 - e^{-at}) is b t.
            None => self.b * self.x0 * t,
        }
    }

    /// Time at which the exact solution hits its pole, if it ever does for
    /// `t > 0`.
    pub fn singular_time(&self) -> Option<f64> {
        if self.x0 == 0.0 || self.b == 0.0 {
            return None;
        }
        let t = match self.ratio() {
            // 1 - R x0 (1 - e^{-at}) = 0  =>  e^{-at} = 1 - 1/(R x0)
            Some(r) => {
                let rx = r * self.x0;
                let e = 1.0 - 1.0 / rx;
                if e <= 0.0 {
                    return None;
                }
                -e.ln() / self.a
            }
            None => 1.0 / (self.b * self.x0),
        };
        (t > 0.0 && t.is_finite()).then_some(t)
    }
}

/// Exact solution `x0 e^{-at} / (1 - R x0 (1 - e^{-at}))`.
pub fn exact_solution(p: &LogisticParams, t: f64) -> Result<f64> {
    if let Some(t_sing) = p.singular_time() {
        if t >= t_sing {
            return Err(Error::BlowUp { t_sing });
        }
    }
    let denom = 1.0 - p.series_ratio(t);
    if denom == 0.0 {
        return Err(Error::BlowUp { t_sing: t });
    }
    Ok(p.x0 * (-p.a * t).exp() / denom)
}

/// Finite-time blow-up of the decaying logistic equation (`a, b > 0`);
/// `None` when `R x0 <= 1`.
pub fn blowup_time(p: &LogisticParams) -> Result<Option<f64>> {
    if !(p.a > 0.0 && p.b > 0.0) {
        return Err(Error::Domain(format!(
            "blow-up time requires a > 0 and b > 0 (a = {}, b = {})",
            p.a, p.b
        )));
    }
    let rx = p.b / p.a * p.x0;
    if rx <= 1.0 {
        return Ok(None);
    }
    Ok(Some((rx / (rx - 1.0)).ln() / p.a))
}

/// Time horizon beyond which the Carleman series of the growing logistic
/// equation (`a, b < 0`) diverges: `|a|⁻¹ ln((1 + R x0) / (R x0))`.
pub fn convergence_horizon(p: &LogisticParams) -> Result<f64> {
    if !(p.a < 0.0 && p.b < 0.0) {
        return Err(Error::Domain(format!(
            "convergence horizon requires a < 0 and b < 0 (a = {}, b = {})",
            p.a, p.b
        )));
    }
    let rx = p.b / p.a * p.x0;
    if !(rx > 0.0) {
        return Err(Error::Domain(format!("R x0 must be positive, got {rx}")));
    }
    Ok(((1.0 + rx) / rx).ln() / p.a.abs())
}

/// Truncated Carleman series `x0 e^{-at} sum_{k=0}^{K} q^k`.
pub fn carleman_series(p: &LogisticParams, t: f64, order: usize) -> SeriesValue {
    let q = p.series_ratio(t);
    let lead = p.x0 * (-p.a * t).exp();
    let mut term = lead;
    let mut value = lead;
    let mut diverged = !lead.is_finite() || lead.abs() > DIVERGENCE_THRESHOLD;
    for _ in 0..order {
        term *= q;
        value += term;
        if !term.is_finite() || term.abs() > DIVERGENCE_THRESHOLD {
            diverged = true;
        }
    }
    SeriesValue { value, diverged }
}

/// Forward-Euler integration of the truncated hierarchy
/// `d x_k/dt = -k (a x_k - b x_{k+1})`, `x_{K+1} = 0`, starting from the
/// lift `(x0, x0², …, x0^K)`. Returns `x_1` at steps `0..=steps`.
pub fn carleman_hierarchy(
    p: &LogisticParams,
    dt: f64,
    steps: usize,
    order: usize,
) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::Config("hierarchy order must be at least 1".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let mut x: Vec<f64> = (1..=order as i32).map(|k| p.x0.powi(k)).collect();
    let mut next = vec![0.0; order];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x[0]);
    for step in 1..=steps {
        for k in 0..order {
            let higher = if k + 1 < order { x[k + 1] } else { 0.0 };
            let kk = (k + 1) as f64;
            next[k] = x[k] - dt * kk * (p.a * x[k] - p.b * higher);
        }
        std::mem::swap(&mut x, &mut next);
        if !x[0].is_finite() {
            return Err(Error::Instability { step });
        }
        out.push(x[0]);
    }
    Ok(out)
}
