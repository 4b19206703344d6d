//! Direct numerical solution of the two-dimensional Grad moment system
//!
//! ```text
//! d_t rho  + d_a J_a      = 0
//! d_t J_a  + d_b P_ab     = 0
//! d_t P_ab + d_c Q^eq_abc = -omega (P_ab - P^eq_ab)
//! ```
//!
//! with `P^eq_ab = J_a J_b / rho + c_s² rho delta_ab` and
//! `Q^eq_abc = c_s² (J_a delta_bc + J_b delta_ac + J_c delta_ab)`, discretized
//! with central differences and forward Euler.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Grid;
use crate::{Error, Result};

/// Number of local moments per site.
pub const NV: usize = 6;

pub const RHO: usize = 0;
pub const J1: usize = 1;
pub const J2: usize = 2;
pub const P11: usize = 3;
pub const P12: usize = 4;
pub const P22: usize = 5;

/// How `1/rho` is evaluated inside the equilibrium momentum flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DensityInverse {
    /// Weakly compressible expansion `1/rho ≈ 2 - rho`, which keeps the
    /// system polynomial.
    #[default]
    Polynomial,
    Exact,
}

impl DensityInverse {
    #[inline]
    pub fn eval(self, rho: f64) -> f64 {
        match self {
            DensityInverse::Polynomial => 2.0 - rho,
            DensityInverse::Exact => 1.0 / rho,
        }
    }
}

/// Initial momentum flux for [`kolmogorov_init`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PressureInit {
    #[default]
    Equilibrium,
    ChapmanEnskog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradParams {
    /// Relaxation rate of the momentum flux, `1/tau`.
    pub omega: f64,
    /// Speed of sound.
    pub cs: f64,
    pub dt: f64,
    #[serde(default)]
    pub inverse: DensityInverse,
}

impl Default for GradParams {
    fn default() -> Self {
        GradParams {
            omega: 2.0,
            cs: 1.0 / 3f64.sqrt(),
            dt: 0.01,
            inverse: DensityInverse::Polynomial,
        }
    }
}

impl GradParams {
    pub fn cs2(&self) -> f64 {
        self.cs * self.cs
    }

    /// Kinematic viscosity of the adiabatic (Navier-Stokes) limit,
    /// `c_s² / omega`.
    pub fn viscosity(&self) -> f64 {
        self.cs2() / self.omega
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.cs > 0.0 && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "omega, cs and dt must be positive (omega = {}, cs = {}, dt = {})",
                self.omega, self.cs, self.dt
            )));
        }
        if self.omega * self.dt >= 2.0 {
            return Err(Error::Config(format!(
                "omega * dt = {} violates relaxation stability (< 2)",
                self.omega * self.dt
            )));
        }
        if self.cs * self.dt >= 1.0 {
            return Err(Error::Config(format!(
                "cs * dt = {} violates the acoustic CFL limit (< 1)",
                self.cs * self.dt
            )));
        }
        Ok(())
    }
}

/// Moment field `V = (rho, J1, J2, P11, P12, P22)` on a periodic grid,
/// stored site-major with the component index varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    grid: Grid,
    data: Vec<f64>,
}

impl FlowField {
    pub fn zeros(grid: Grid) -> Self {
        FlowField {
            grid,
            data: vec![0.0; grid.len() * NV],
        }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() * NV {
            return Err(Error::Shape {
                expected: grid.len() * NV,
                found: data.len(),
            });
        }
        Ok(FlowField { grid, data })
    }

    /// Spatially uniform state.
    pub fn uniform(grid: Grid, v: [f64; NV]) -> Self {
        FlowField {
            grid,
            data: v.iter().copied().cycle().take(grid.len() * NV).collect(),
        }
    }

    /// Rest state `rho = 1, J = 0, P = c_s² I`.
    pub fn global_equilibrium(grid: Grid, cs: f64) -> Self {
        let c2 = cs * cs;
        Self::uniform(grid, [1.0, 0.0, 0.0, c2, 0.0, c2])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn site(&self, s: usize) -> &[f64] {
        &self.data[s * NV..(s + 1) * NV]
    }

    #[inline]
    pub fn get(&self, s: usize, comp: usize) -> f64 {
        self.data[s * NV + comp]
    }

    pub fn set(&mut self, s: usize, comp: usize, v: f64) {
        self.data[s * NV + comp] = v;
    }

    /// One component as a scalar field.
    pub fn component(&self, comp: usize) -> Vec<f64> {
        self.data.iter().skip(comp).step_by(NV).copied().collect()
    }

    pub fn total(&self, comp: usize) -> f64 {
        self.data.iter().skip(comp).step_by(NV).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Mirror image under `x1 <-> x2`, with `J1 <-> J2` and `P11 <-> P22`.
    pub fn swap_axes(&self) -> Result<Self> {
        let g = self.grid;
        if g.nx() != g.ny() {
            return Err(Error::Config("axis swap needs a square grid".into()));
        }
        let mut out = FlowField::zeros(g);
        for (x1, x2) in g.sites() {
            let src = self.site(g.site(x1, x2));
            let d = g.site(x2, x1);
            out.data[d * NV..(d + 1) * NV]
                .copy_from_slice(&[src[RHO], src[J2], src[J1], src[P22], src[P12], src[P11]]);
        }
        Ok(out)
    }
}

/// Equilibrium momentum flux and heat flux at one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumTensors {
    /// `(P11, P12, P22)`.
    pub p: [f64; 3],
    /// `Q[a][b][c]`, indices 0/1 for the two axes.
    pub q: [[[f64; 2]; 2]; 2],
}

pub fn equilibrium_tensors(
    v: &[f64],
    cs: f64,
    inverse: DensityInverse,
) -> Result<EquilibriumTensors> {
    let rho = v[RHO];
    if inverse == DensityInverse::Exact && !(rho > 0.0) {
        return Err(Error::Domain(format!(
            "density must be positive, got {rho}"
        )));
    }
    let c2 = cs * cs;
    let inv = inverse.eval(rho);
    let j = [v[J1], v[J2]];
    let p = [
        j[0] * j[0] * inv + c2 * rho,
        j[0] * j[1] * inv,
        j[1] * j[1] * inv + c2 * rho,
    ];
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut q = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                q[a][b][c] = c2 * (j[a] * delta(b, c) + j[b] * delta(a, c) + j[c] * delta(a, b));
            }
        }
    }
    Ok(EquilibriumTensors { p, q })
}

#[inline]
fn p_eq(v: &[f64], c2: f64, inverse: DensityInverse) -> [f64; 3] {
    let inv = inverse.eval(v[RHO]);
    [
        v[J1] * v[J1] * inv + c2 * v[RHO],
        v[J1] * v[J2] * inv,
        v[J2] * v[J2] * inv + c2 * v[RHO],
    ]
}

/// Neighbour table `[x+e1, x-e1, x+e2, x-e2]` per site.
fn neighbours(grid: &Grid) -> Vec<[usize; 4]> {
    let o = [
        grid.offset(1, 0),
        grid.offset(-1, 0),
        grid.offset(0, 1),
        grid.offset(0, -1),
    ];
    (0..grid.len())
        .map(|s| {
            [
                grid.shift(s, o[0]),
                grid.shift(s, o[1]),
                grid.shift(s, o[2]),
                grid.shift(s, o[3]),
            ]
        })
        .collect()
}

/// Central-difference gradients of all six moments at one site:
/// `(d1 V, d2 V)`.
#[inline]
fn gradients(data: &[f64], nb: &[usize; 4]) -> ([f64; NV], [f64; NV]) {
    let mut d1 = [0.0; NV];
    let mut d2 = [0.0; NV];
    for c in 0..NV {
        d1[c] = 0.5 * (data[nb[0] * NV + c] - data[nb[1] * NV + c]);
        d2[c] = 0.5 * (data[nb[2] * NV + c] - data[nb[3] * NV + c]);
    }
    (d1, d2)
}

/// Divergence `d_c Q^eq_abc` as `(11, 12, 22)` components.
#[inline]
fn div_q(d1: &[f64; NV], d2: &[f64; NV], c2: f64) -> [f64; 3] {
    [
        c2 * (3.0 * d1[J1] + d2[J2]),
        c2 * (d1[J2] + d2[J1]),
        c2 * (d1[J1] + 3.0 * d2[J2]),
    ]
}

/// Initial Kolmogorov flow: `rho = 1`, `J1 = A1 cos(k x2)`,
/// `J2 = A2 cos(k x1)`, `k = 2 pi / L`, momentum flux at equilibrium or at
/// its Chapman-Enskog estimate.
pub fn kolmogorov_init(
    grid: Grid,
    a1: f64,
    a2: f64,
    params: &GradParams,
    pressure: PressureInit,
) -> Result<FlowField> {
    if grid.nx() != grid.ny() {
        return Err(Error::Config(format!(
            "Kolmogorov initial data needs a square grid, got {}x{}",
            grid.nx(),
            grid.ny()
        )));
    }
    let k = 2.0 * std::f64::consts::PI / grid.nx() as f64;
    let c2 = params.cs2();
    let mut f = FlowField::zeros(grid);
    for (x1, x2) in grid.sites() {
        let s = grid.site(x1, x2);
        let v = &mut f.data[s * NV..(s + 1) * NV];
        v[RHO] = 1.0;
        v[J1] = a1 * (k * x2 as f64).cos();
        v[J2] = a2 * (k * x1 as f64).cos();
        let p = p_eq(v, c2, params.inverse);
        v[P11] = p[0];
        v[P12] = p[1];
        v[P22] = p[2];
    }
    if pressure == PressureInit::ChapmanEnskog {
        let p = chapman_enskog_pressure(&f, params);
        for (s, ps) in p.iter().enumerate() {
            f.data[s * NV + P11..s * NV + P22 + 1].copy_from_slice(ps);
        }
    }
    Ok(f)
}

/// Adiabatic-closure estimate `P_ab ≈ P^eq_ab - tau d_c Q^eq_abc` at every
/// site, as `(P11, P12, P22)`.
pub fn chapman_enskog_pressure(field: &FlowField, params: &GradParams) -> Vec<[f64; 3]> {
    let c2 = params.cs2();
    let tau = 1.0 / params.omega;
    let nb = neighbours(&field.grid);
    (0..field.grid.len())
        .map(|s| {
            let v = field.site(s);
            let (d1, d2) = gradients(&field.data, &nb[s]);
            let peq = p_eq(v, c2, params.inverse);
            let dq = div_q(&d1, &d2, c2);
            [
                peq[0] - tau * dq[0],
                peq[1] - tau * dq[1],
                peq[2] - tau * dq[2],
            ]
        })
        .collect()
}

/// Relative distance `|P - P_CE| / |P|` of the momentum flux from its
/// Chapman-Enskog estimate (Euclidean norms over all sites).
pub fn chapman_enskog_distance(field: &FlowField, params: &GradParams) -> f64 {
    let ce = chapman_enskog_pressure(field, params);
    let (mut num, mut den) = (0.0, 0.0);
    for (s, p) in ce.iter().enumerate() {
        for (i, comp) in [P11, P12, P22].into_iter().enumerate() {
            let v = field.get(s, comp);
            num += (v - p[i]).powi(2);
            den += v * v;
        }
    }
    (num / den).sqrt()
}

/// One forward-Euler step of the Grad system.
pub fn grad_step(field: &FlowField, params: &GradParams) -> Result<FlowField> {
    let nb = neighbours(&field.grid);
    let next = step_with(field, params, &nb, false);
    if !next.is_finite() {
        return Err(Error::Instability { step: 1 });
    }
    Ok(next)
}

/// One step with the quadratic part of `P^eq` dropped (`P^eq = c_s² rho I`).
pub fn linearized_step(field: &FlowField, params: &GradParams) -> Result<FlowField> {
    let nb = neighbours(&field.grid);
    let next = step_with(field, params, &nb, true);
    if !next.is_finite() {
        return Err(Error::Instability { step: 1 });
    }
    Ok(next)
}

fn step_with(field: &FlowField, params: &GradParams, nb: &[[usize; 4]], linear: bool) -> FlowField {
    let (dt, om, c2, inverse) = (params.dt, params.omega, params.cs2(), params.inverse);
    let data = &field.data;
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(NV).enumerate().for_each(|(s, w)| {
        let v = &data[s * NV..(s + 1) * NV];
        let (d1, d2) = gradients(data, &nb[s]);
        let peq = if linear {
            [c2 * v[RHO], 0.0, c2 * v[RHO]]
        } else {
            p_eq(v, c2, inverse)
        };
        let dq = div_q(&d1, &d2, c2);
        w[RHO] = v[RHO] - dt * (d1[J1] + d2[J2]);
        w[J1] = v[J1] - dt * (d1[P11] + d2[P12]);
        w[J2] = v[J2] - dt * (d1[P12] + d2[P22]);
        w[P11] = v[P11] - dt * dq[0] - dt * om * (v[P11] - peq[0]);
        w[P12] = v[P12] - dt * dq[1] - dt * om * (v[P12] - peq[1]);
        w[P22] = v[P22] - dt * dq[2] - dt * om * (v[P22] - peq[2]);
    });
    FlowField {
        grid: field.grid,
        data: out,
    }
}

/// Runs `steps` Grad steps, returning the states at steps `0..=steps`
/// (only every `keep_every`-th state is kept, plus the last one).
pub fn grad_run(
    initial: &FlowField,
    params: &GradParams,
    steps: usize,
    keep_every: usize,
) -> Result<Vec<(usize, FlowField)>> {
    params.validate()?;
    let keep_every = keep_every.max(1);
    let nb = neighbours(&initial.grid);
    let mut out = vec![(0, initial.clone())];
    let mut cur = initial.clone();
    for step in 1..=steps {
        cur = step_with(&cur, params, &nb, false);
        if !cur.is_finite() {
            return Err(Error::Instability { step });
        }
        if step % keep_every == 0 || step == steps {
            out.push((step, cur.clone()));
        }
    }
    Ok(out)
}
