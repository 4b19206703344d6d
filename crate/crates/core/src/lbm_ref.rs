//! D2Q9 BGK lattice Boltzmann reference solver on a periodic grid.
//!
//! Used as an independent oracle: in the low-Mach regime its density and
//! current fields follow the same hydrodynamics as the Grad moment system,
//! with kinematic viscosity `nu = c_s² (1/omega - 1/2)`.

use rayon::prelude::*;

use crate::linalg::Grid;
use crate::{Error, Result};

pub const Q: usize = 9;

/// Lattice sound speed squared.
pub const CS2: f64 = 1.0 / 3.0;

/// Discrete velocities: rest, four axis neighbours, four diagonals.
pub const VELOCITIES: [(i64, i64); Q] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

pub const WEIGHTS: [f64; Q] = [
    4.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

/// Shear viscosity of the BGK scheme at relaxation rate `omega`.
pub fn viscosity(omega: f64) -> f64 {
    CS2 * (1.0 / omega - 0.5)
}

/// Nine populations per site, stored site-major (`f[site * 9 + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    grid: Grid,
    f: Vec<f64>,
}

/// Macroscopic density and current fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub rho: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
}

/// Local equilibrium for one site:
/// `w_i (rho + J·c_i / c_s² + (J·c_i)² / (2 c_s⁴ rho) - J·J / (2 c_s² rho))`.
pub fn site_equilibrium(rho: f64, j: [f64; 2]) -> [f64; Q] {
    let jj = j[0] * j[0] + j[1] * j[1];
    let mut feq = [0.0; Q];
    for i in 0..Q {
        let (c1, c2) = VELOCITIES[i];
        let jc = j[0] * c1 as f64 + j[1] * c2 as f64;
        feq[i] = WEIGHTS[i]
            * (rho + jc / CS2 + jc * jc / (2.0 * CS2 * CS2 * rho) - jj / (2.0 * CS2 * rho));
    }
    feq
}

/// Equilibrium populations for the given density and current fields.
pub fn d2q9_equilibrium(grid: Grid, rho: &[f64], j1: &[f64], j2: &[f64]) -> Result<Populations> {
    let n = grid.len();
    for len in [rho.len(), j1.len(), j2.len()] {
        if len != n {
            return Err(Error::Shape {
                expected: n,
                found: len,
            });
        }
    }
    if let Some(bad) = rho.iter().find(|&&r| !(r > 0.0)) {
        return Err(Error::Domain(format!(
            "density must be positive, got {bad}"
        )));
    }
    let mut f = vec![0.0; n * Q];
    for (s, chunk) in f.chunks_mut(Q).enumerate() {
        chunk.copy_from_slice(&site_equilibrium(rho[s], [j1[s], j2[s]]));
    }
    Ok(Populations { grid, f })
}

impl Populations {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.f
    }

    pub fn site(&self, s: usize) -> &[f64] {
        &self.f[s * Q..(s + 1) * Q]
    }

    pub fn from_raw(grid: Grid, f: Vec<f64>) -> Result<Self> {
        if f.len() != grid.len() * Q {
            return Err(Error::Shape {
                expected: grid.len() * Q,
                found: f.len(),
            });
        }
        Ok(Populations { grid, f })
    }

    pub fn total_mass(&self) -> f64 {
        self.f.iter().sum()
    }
}

/// Density `sum_i f_i` and current `sum_i f_i c_i` at every site.
pub fn moments(f: &Populations) -> Moments {
    let n = f.grid.len();
    let mut m = Moments {
        rho: vec![0.0; n],
        j1: vec![0.0; n],
        j2: vec![0.0; n],
    };
    for s in 0..n {
        let (r, a, b) = site_moments(f.site(s));
        m.rho[s] = r;
        m.j1[s] = a;
        m.j2[s] = b;
    }
    m
}

#[inline]
fn site_moments(fs: &[f64]) -> (f64, f64, f64) {
    let mut rho = 0.0;
    let mut j1 = 0.0;
    let mut j2 = 0.0;
    for i in 0..Q {
        rho += fs[i];
        j1 += fs[i] * VELOCITIES[i].0 as f64;
        j2 += fs[i] * VELOCITIES[i].1 as f64;
    }
    (rho, j1, j2)
}

/// One BGK collide-then-stream update with unit time step:
/// `f_i(x + c_i, t + 1) = f_i(x, t) - omega (f_i - f_i^eq)(x, t)`.
///
/// Streaming is done in pull form, so each output site is written by exactly
/// one task regardless of how the sites are partitioned.
pub fn lbm_step(f: &Populations, omega: f64) -> Populations {
    let grid = f.grid;
    let n = grid.len();
    let mut post = vec![0.0; n * Q];
    post.par_chunks_mut(Q).enumerate().for_each(|(s, out)| {
        let fs = f.site(s);
        let (rho, j1, j2) = site_moments(fs);
        let feq = site_equilibrium(rho, [j1, j2]);
        for i in 0..Q {
            out[i] = fs[i] - omega * (fs[i] - feq[i]);
        }
    });
    let upstream: Vec<_> = VELOCITIES
        .iter()
        .map(|&(c1, c2)| grid.offset(-c1, -c2))
        .collect();
    let mut next = vec![0.0; n * Q];
    next.par_chunks_mut(Q).enumerate().for_each(|(s, out)| {
        for i in 0..Q {
            out[i] = post[grid.shift(s, upstream[i]) * Q + i];
        }
    });
    Populations { grid, f: next }
}

/// Kolmogorov-type initial state at equilibrium: `rho = 1`,
/// `J1 = A1 cos(k x2)`, `J2 = A2 cos(k x1)`, `k = 2 pi / L`.
pub fn kolmogorov_populations(grid: Grid, a1: f64, a2: f64) -> Result<Populations> {
    if grid.nx() != grid.ny() {
        return Err(Error::Config(format!(
            "Kolmogorov initial data needs a square grid, got {}x{}",
            grid.nx(),
            grid.ny()
        )));
    }
    let k = 2.0 * std::f64::consts::PI / grid.nx() as f64;
    let n = grid.len();
    let rho = vec![1.0; n];
    let j1: Vec<f64> = grid
        .sites()
        .map(|(_, x2)| a1 * (k * x2 as f64).cos())
        .collect();
    let j2: Vec<f64> = grid
        .sites()
        .map(|(x1, _)| a2 * (k * x1 as f64).cos())
        .collect();
    d2q9_equilibrium(grid, &rho, &j1, &j2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::square(8).unwrap()
    }

    #[test]
    fn rest_equilibrium_is_weights() {
        assert_eq!(site_equilibrium(1.0, [0.0, 0.0]), WEIGHTS);
        let f = d2q9_equilibrium(grid(), &[1.0; 64], &[0.0; 64], &[0.0; 64]).unwrap();
        let m = moments(&f);
        assert!(m.rho.iter().all(|&r| (r - 1.0).abs() < 1e-15));
        assert!(m.j1.iter().chain(&m.j2).all(|&j| j.abs() < 1e-16));
    }

    #[test]
    fn nonpositive_density_rejected() {
        assert!(matches!(
            d2q9_equilibrium(grid(), &[0.0; 64], &[0.0; 64], &[0.0; 64]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn second_moment_of_equilibrium() {
        let feq = site_equilibrium(1.0, [0.1, 0.0]);
        let p11: f64 = (0..Q)
            .map(|i| feq[i] * (VELOCITIES[i].0 * VELOCITIES[i].0) as f64)
            .sum();
        let p12: f64 = (0..Q)
            .map(|i| feq[i] * (VELOCITIES[i].0 * VELOCITIES[i].1) as f64)
            .sum();
        let p22: f64 = (0..Q)
            .map(|i| feq[i] * (VELOCITIES[i].1 * VELOCITIES[i].1) as f64)
            .sum();
        assert!((p11 - (CS2 + 0.01)).abs() < 1e-15);
        assert!(p12.abs() < 1e-16);
        assert!((p22 - CS2).abs() < 1e-15);
    }

    #[test]
    fn global_equilibrium_is_fixed_point() {
        let f = d2q9_equilibrium(grid(), &[1.0; 64], &[0.0; 64], &[0.0; 64]).unwrap();
        let g = lbm_step(&f, 1.3);
        for (a, b) in f.as_slice().iter().zip(g.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn collisionless_step_only_streams() {
        let g = grid();
        let f = kolmogorov_populations(g, 0.1, 0.05).unwrap();
        let s = lbm_step(&f, 0.0);
        for site in 0..g.len() {
            for (i, &(c1, c2)) in VELOCITIES.iter().enumerate() {
                let dst = g.shift(site, g.offset(c1, c2));
                assert_eq!(s.site(dst)[i], f.site(site)[i]);
            }
        }
        let (m0, m1) = (moments(&f), moments(&s));
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        assert!((sum(&m0.rho) - sum(&m1.rho)).abs() < 1e-12);
        assert!((sum(&m0.j1) - sum(&m1.j1)).abs() < 1e-12);
        assert!((sum(&m0.j2) - sum(&m1.j2)).abs() < 1e-12);
    }

    #[test]
    fn mass_conserved_over_many_steps() {
        let mut f = kolmogorov_populations(grid(), 0.1, 0.1).unwrap();
        let m0 = f.total_mass();
        for _ in 0..200 {
            f = lbm_step(&f, 1.0);
        }
        assert!((f.total_mass() - m0).abs() < 1e-11);
        assert!(moments(&f).rho.iter().all(|&r| r > 0.0 && r < 2.0));
    }

    #[test]
    fn shear_wave_decays_at_viscous_rate() {
        let l = 32;
        let g = Grid::square(l).unwrap();
        let k = 2.0 * std::f64::consts::PI / l as f64;
        let amplitude = |f: &Populations| {
            let m = moments(f);
            let sum: f64 = g
                .sites()
                .map(|(x1, x2)| m.j1[g.site(x1, x2)] * (k * x2 as f64).cos())
                .sum();
            2.0 * sum / g.len() as f64
        };
        let mut f = kolmogorov_populations(g, 0.1, 0.0).unwrap();
        let mut samples = vec![(0.0, amplitude(&f).ln())];
        for t in 1..=100 {
            f = lbm_step(&f, 1.0);
            samples.push((t as f64, amplitude(&f).ln()));
        }
        let n = samples.len() as f64;
        let (st, sy) = samples
            .iter()
            .fold((0.0, 0.0), |a, s| (a.0 + s.0, a.1 + s.1));
        let (mt, my) = (st / n, sy / n);
        let cov: f64 = samples.iter().map(|s| (s.0 - mt) * (s.1 - my)).sum();
        let var: f64 = samples.iter().map(|s| (s.0 - mt).powi(2)).sum();
        let rate = -cov / var;
        let expected = viscosity(1.0) * k * k;
        assert!(
            ((rate - expected) / expected).abs() < 0.01,
            "rate {rate} vs {expected}"
        );
    }

    #[test]
    fn viscosity_at_unit_omega() {
        assert!((viscosity(1.0) - 1.0 / 6.0).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn equilibrium_reproduces_moments(
            rho in 0.5f64..1.5, j1 in -0.2f64..0.2, j2 in -0.2f64..0.2,
        ) {
            let feq = site_equilibrium(rho, [j1, j2]);
            let (r, a, b) = site_moments(&feq);
            prop_assert!((r - rho).abs() < 1e-14);
            prop_assert!((a - j1).abs() < 1e-15);
            prop_assert!((b - j2).abs() < 1e-15);
            let p12: f64 = (0..Q).map(|i| feq[i] * (VELOCITIES[i].0 * VELOCITIES[i].1) as f64).sum();
            prop_assert!((p12 - j1 * j2 / rho).abs() < 1e-14);
        }

        #[test]
        fn collision_preserves_mass_and_momentum(
            f in prop::collection::vec(0.01f64..0.3, Q), omega in 0.1f64..1.9,
        ) {
            let (rho, j1, j2) = site_moments(&f);
            let feq = site_equilibrium(rho, [j1, j2]);
            let post: Vec<f64> = (0..Q).map(|i| f[i] - omega * (f[i] - feq[i])).collect();
            let (r2, a2, b2) = site_moments(&post);
            prop_assert!((r2 - rho).abs() < 1e-14);
            prop_assert!((a2 - j1).abs() < 1e-14);
            prop_assert!((b2 - j2).abs() < 1e-14);
        }
    }
}
