//! CSV snapshot and matrix-triplet writers shared by the solvers.

use std::io::Write;

use serde::Serialize;

use crate::grad_dns::{FlowField, J1, J2, RHO};
use crate::lbm_ref::{moments, Populations};
use crate::linalg::CsrMatrix;
use crate::Result;

/// One row of a density/current snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotRow {
    pub step: usize,
    pub t: f64,
    pub site: usize,
    pub rho: f64,
    pub j1: f64,
    pub j2: f64,
}

/// Streams `(step, t, site, rho, j1, j2)` rows; the same schema is used for
/// lattice Boltzmann and Grad fields.
pub struct SnapshotWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> SnapshotWriter<W> {
    /// Writes the header immediately.
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(["step", "t", "site", "rho", "j1", "j2"])?;
        Ok(SnapshotWriter { inner })
    }

    pub fn write_fields(
        &mut self,
        step: usize,
        t: f64,
        rho: &[f64],
        j1: &[f64],
        j2: &[f64],
    ) -> Result<()> {
        for site in 0..rho.len() {
            self.inner.serialize(SnapshotRow {
                step,
                t,
                site,
                rho: rho[site],
                j1: j1[site],
                j2: j2[site],
            })?;
        }
        Ok(())
    }

    pub fn write_flow(&mut self, step: usize, t: f64, f: &FlowField) -> Result<()> {
        self.write_fields(
            step,
            t,
            &f.component(RHO),
            &f.component(J1),
            &f.component(J2),
        )
    }

    pub fn write_populations(&mut self, step: usize, t: f64, f: &Populations) -> Result<()> {
        let m = moments(f);
        self.write_fields(step, t, &m.rho, &m.j1, &m.j2)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| crate::Error::Io(e.into_error()))
    }
}

/// Writes `row col value` lines, one per stored nonzero, in row order.
pub fn write_triplets<W: Write>(m: &CsrMatrix, mut w: W) -> Result<()> {
    writeln!(w, "# {} {} {}", m.rows(), m.cols(), m.nnz())?;
    for (r, c, v) in m.triplets() {
        writeln!(w, "{r} {c} {v:e}")?;
    }
    w.flush()?;
    Ok(())
}
