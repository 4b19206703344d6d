use carleman_core::analysis::{carleman_series, mean_error_series};
use carleman_core::carleman_grad::{build_carleman_operator, lift_initial_state, ClosureMode};
use carleman_core::grad_dns::{
    grad_run, kolmogorov_init, linearized_step, FlowField, GradParams, PressureInit, J1, J2, RHO,
};
use carleman_core::io::SnapshotWriter;
use carleman_core::lbm_ref::{kolmogorov_populations, lbm_step, moments};
use carleman_core::linalg::Grid;

fn flow(l: usize, a1: f64, a2: f64) -> (GradParams, FlowField) {
    let p = GradParams::default();
    let f = kolmogorov_init(
        Grid::square(l).unwrap(),
        a1,
        a2,
        &p,
        PressureInit::Equilibrium,
    )
    .unwrap();
    (p, f)
}

#[test]
fn first_order_step_is_linearized_dns() {
    let (p, f) = flow(16, 0.1, 0.1);
    for closure in [ClosureMode::Diagonal, ClosureMode::Leibniz] {
        let op = build_carleman_operator(&p, *f.grid(), 1, closure).unwrap();
        let lifted = op
            .step(&lift_initial_state(&f, 1).unwrap())
            .unwrap()
            .order1();
        let direct = linearized_step(&f, &p).unwrap();
        let diff = lifted
            .as_slice()
            .iter()
            .zip(direct.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-15, "{closure}: {diff:e}");
    }
}

#[test]
fn shear_flow_currents_do_not_depend_on_order() {
    // With A2 = 0 the advective terms vanish and every order tracks the DNS.
    // The leibniz closure is excluded above first order: it applies the
    // stencil to products such as J1 P22, whose gradient is nonzero here.
    let (p, f) = flow(16, 0.01, 0.0);
    let dns = grad_run(&f, &p, 100, 1).unwrap();
    let cases = [(ClosureMode::Diagonal, 3), (ClosureMode::Leibniz, 1)];
    for (closure, kmax) in cases {
        for k in 1..=kmax {
            let run = carleman_series(&p, &f, k, closure, 100, 1).unwrap();
            let worst = mean_error_series(&dns, &run, 100)
                .unwrap()
                .into_iter()
                .map(|(_, e)| e)
                .fold(0.0, f64::max);
            assert!(worst < 1e-4, "{closure} K={k}: {worst:e}");
        }
    }
}

#[test]
fn first_order_tracks_dns_early_in_full_flow() {
    let (p, f) = flow(16, 0.1, 0.1);
    let dns = grad_run(&f, &p, 10, 1).unwrap();
    let run = carleman_series(&p, &f, 1, ClosureMode::Diagonal, 10, 1).unwrap();
    let eps = mean_error_series(&dns, &run, 10).unwrap();
    assert_eq!(eps[0].1, 0.0);
    assert!(eps[10].1 < 1e-3, "{:e}", eps[10].1);
}

#[test]
fn snapshot_csv_roundtrip() {
    let (p, f) = flow(4, 0.1, 0.1);
    let frames = grad_run(&f, &p, 4, 2).unwrap();
    let mut w = SnapshotWriter::new(Vec::new()).unwrap();
    for (step, field) in &frames {
        w.write_flow(*step, *step as f64 * p.dt, field).unwrap();
    }
    let bytes = w.finish().unwrap();
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let rows: Vec<(usize, f64, usize, f64, f64, f64)> =
        reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), frames.len() * 16);
    for (i, (step, t, site, rho, j1, j2)) in rows.into_iter().enumerate() {
        let (want_step, field) = &frames[i / 16];
        assert_eq!(step, *want_step);
        assert_eq!(t, *want_step as f64 * p.dt);
        assert_eq!(site, i % 16);
        assert_eq!(
            (rho, j1, j2),
            (
                field.get(site, RHO),
                field.get(site, J1),
                field.get(site, J2)
            )
        );
    }
}

#[test]
fn lattice_snapshots_use_moment_schema() {
    let g = Grid::square(4).unwrap();
    let f = lbm_step(&kolmogorov_populations(g, 0.1, 0.1).unwrap(), 1.0);
    let mut w = SnapshotWriter::new(Vec::new()).unwrap();
    w.write_populations(1, 1.0, &f).unwrap();
    let text = String::from_utf8(w.finish().unwrap()).unwrap();
    let m = moments(&f);
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(&last[3..], &[m.rho[15], m.j1[15], m.j2[15]]);
}
