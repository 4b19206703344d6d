//! One function per experiment kind, each producing a [`Report`].

use carleman_core::analysis::{
    self, carleman_variable_count, kappa_vs_sites, kappa_vs_steps, linear_fit, mean_error_series,
    relative_error, solver_complexity, KappaPoint, LinearFit, MaskRule,
};
use carleman_core::carleman_grad::{
    build_carleman_operator, build_local_matrices, carleman_run, exact_nonlocal_lift,
    lift_initial_state, ClosureMode, Deviation,
};
use carleman_core::grad_dns::{grad_run, kolmogorov_init, FlowField, J1};
use carleman_core::io::write_triplets;
use carleman_core::lbm_ref::{kolmogorov_populations, lbm_step, Populations};
use carleman_core::linalg::{ConditionOptions, Grid};
use carleman_core::logistic::{
    carleman_series, convergence_horizon, exact_solution, LogisticParams,
};
use carleman_core::Error;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::*;
use crate::output::{self, num, Body, Report};
use crate::CliError;

type Series = Vec<(usize, FlowField)>;

pub fn run(config: &ExperimentConfig) -> Result<Report, CliError> {
    match config {
        ExperimentConfig::Logistic(a) => logistic(a),
        ExperimentConfig::Lbm(a) => lbm(a),
        ExperimentConfig::GradDns(a) => grad_dns(a),
        ExperimentConfig::Carleman(a) => carleman(a),
        ExperimentConfig::ErrorCompare(a) => error_compare(a),
        ExperimentConfig::KappaSweep(a) => kappa_sweep(a),
        ExperimentConfig::Counts(a) => counts(a),
        ExperimentConfig::Telescopic(a) => telescopic(a),
        ExperimentConfig::Cost(a) => cost(a),
        ExperimentConfig::Probe(a) => probe(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn positive(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return Err(usage(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn initial_flow(flow: &FlowArgs) -> Result<(Grid, FlowField), CliError> {
    let grid = Grid::square(flow.l)?;
    let init = kolmogorov_init(grid, flow.a1, flow.a2, &flow.params(), flow.pressure_init)?;
    Ok((grid, init))
}

fn fit_json(fit: &LinearFit) -> Value {
    json!({ "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2 })
}

/// Runs each truncation order concurrently; results keep the order of `ks`.
fn carleman_runs(
    flow: &FlowArgs,
    init: &FlowField,
    ks: &[usize],
    closure: ClosureMode,
    steps: usize,
) -> Result<Vec<Series>, CliError> {
    let params = flow.params();
    let runs: Vec<Result<Series, Error>> = ks
        .par_iter()
        .map(|&k| analysis::carleman_series(&params, init, k, closure, steps, 1))
        .collect();
    Ok(runs.into_iter().collect::<Result<_, _>>()?)
}

fn logistic(a: &LogisticArgs) -> Result<Report, CliError> {
    if a.samples < 2 {
        return Err(usage("samples must be at least 2"));
    }
    if !(a.t_max > 0.0) {
        return Err(usage("t_max must be positive"));
    }
    let p = LogisticParams::new(a.a, a.b, a.x0);
    let mut columns = vec!["t".to_string(), "exact".to_string()];
    columns.extend(a.k.0.iter().map(|k| format!("S_{k}")));
    let rows = (0..a.samples)
        .map(|i| {
            let t = a.t_max * i as f64 / (a.samples - 1) as f64;
            let mut row = vec![num(t), exact_solution(&p, t).map(num).unwrap_or_default()];
            row.extend(a.k.0.iter().map(|&k| num(carleman_series(&p, t, k).value)));
            row
        })
        .collect();
    Ok(Report::table(columns, rows)
        .annotate("t_lim", convergence_horizon(&p).ok())
        .annotate("t_singular", p.singular_time()))
}

fn lbm(a: &LbmArgs) -> Result<Report, CliError> {
    positive("snapshot_every", a.snapshot_every)?;
    if !(a.omega > 0.0 && a.omega < 2.0) {
        return Err(usage(format!(
            "lbm omega must lie in (0, 2), got {}",
            a.omega
        )));
    }
    let grid = Grid::square(a.l)?;
    let mut f: Populations = kolmogorov_populations(grid, a.a1, a.a2)?;
    let mut frames = vec![(0, f.clone())];
    for step in 1..=a.steps {
        f = lbm_step(&f, a.omega);
        if !f.as_slice().iter().all(|v| v.is_finite()) {
            return Err(Error::Instability { step }.into());
        }
        if step % a.snapshot_every == 0 || step == a.steps {
            frames.push((step, f.clone()));
        }
    }
    Ok(Report {
        annotations: Default::default(),
        body: Body::Lattice { frames },
    }
    .annotate("viscosity", carleman_core::lbm_ref::viscosity(a.omega)))
}

fn grad_dns(a: &GradDnsArgs) -> Result<Report, CliError> {
    positive("snapshot_every", a.snapshot_every)?;
    let (_, init) = initial_flow(&a.flow)?;
    let params = a.flow.params();
    let frames = grad_run(&init, &params, a.steps, a.snapshot_every)?;
    Ok(Report {
        annotations: Default::default(),
        body: Body::Flow {
            dt: params.dt,
            frames,
        },
    }
    .annotate("viscosity", params.viscosity()))
}

fn carleman(a: &CarlemanArgs) -> Result<Report, CliError> {
    positive("snapshot_every", a.snapshot_every)?;
    let (grid, init) = initial_flow(&a.flow)?;
    let params = a.flow.params();
    if a.closure == ClosureMode::ExactNonlocal {
        if a.k != 2 {
            return Err(usage("the exact nonlocal lift is second order; use K = 2"));
        }
        let report = exact_nonlocal_lift(&build_local_matrices(&params)?, &init, a.steps)?;
        let mut columns = vec!["step".to_string(), "t".to_string()];
        for closure in ["diagonal", "leibniz"] {
            for part in ["order1_max", "order1_mean", "order2_max", "order2_mean"] {
                columns.push(format!("{closure}_{part}"));
            }
        }
        let dev = |d: &Deviation| [num(d.max), num(d.mean)];
        let rows = report
            .steps
            .iter()
            .map(|s| {
                let mut row = vec![s.step.to_string(), num(s.step as f64 * params.dt)];
                for c in [&s.diagonal, &s.leibniz] {
                    row.extend(dev(&c.order1));
                    row.extend(dev(&c.order2));
                }
                row
            })
            .collect();
        return Ok(Report::table(columns, rows));
    }
    let op = build_carleman_operator(&params, grid, a.k, a.closure)?;
    let m = op.to_csr();
    if let Some(path) = &a.triplets {
        write_triplets(&m, output::create(&output::resolve_path(path))?)?;
    }
    let frames = carleman_run(
        &op,
        &lift_initial_state(&init, a.k)?,
        a.steps,
        a.snapshot_every,
    )?;
    Ok(Report {
        annotations: Default::default(),
        body: Body::Flow {
            dt: params.dt,
            frames,
        },
    }
    .annotate("dim", op.dim())
    .annotate("nnz", m.nnz())
    .annotate("max_row_nnz", m.max_row_nnz()))
}

fn error_compare(a: &ErrorCompareArgs) -> Result<Report, CliError> {
    let (_, init) = initial_flow(&a.flow)?;
    let params = a.flow.params();
    let dns = grad_run(&init, &params, a.steps, 1)?;
    let runs = carleman_runs(&a.flow, &init, &a.k.0, a.closure, a.steps)?;
    let series: Vec<Vec<f64>> = runs
        .iter()
        .map(|run| match a.mask {
            MaskRule::InitialZero => Ok(mean_error_series(&dns, run, a.steps)?
                .into_iter()
                .map(|(_, e)| e)
                .collect()),
            rule => dns
                .iter()
                .zip(run)
                .map(|((s, r), (_, x))| Ok(relative_error(&init, r, x, *s, rule)?.mean))
                .collect(),
        })
        .collect::<Result<_, Error>>()?;
    let mut columns = vec!["step".to_string(), "t".to_string()];
    columns.extend(a.k.0.iter().map(|k| format!("eps_K{k}")));
    let rows = dns
        .iter()
        .enumerate()
        .map(|(i, (step, _))| {
            let mut row = vec![step.to_string(), num(*step as f64 * params.dt)];
            row.extend(series.iter().map(|s| num(s[i])));
            row
        })
        .collect();
    Ok(Report::table(columns, rows))
}

fn kappa_row(p: &KappaPoint) -> Vec<String> {
    vec![
        p.k.to_string(),
        p.sites.to_string(),
        p.steps.to_string(),
        p.dim.to_string(),
        p.kappa.map(num).unwrap_or_default(),
        p.method.clone().unwrap_or_default(),
        p.converged.to_string(),
        p.error.clone().unwrap_or_default(),
    ]
}

fn kappa_sweep(a: &KappaSweepArgs) -> Result<Report, CliError> {
    let params = a.flow.params();
    let columns = [
        "k",
        "sites",
        "steps",
        "dim",
        "kappa",
        "method",
        "converged",
        "error",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = vec![];
    let mut fits = vec![];
    match &a.powers {
        None => {
            let opts = ConditionOptions {
                dense_threshold: a.dense_threshold,
                ..ConditionOptions::default()
            };
            let sweeps: Vec<_> =
                a.k.0
                    .par_iter()
                    .map(|&k| kappa_vs_sites(&params, k, &a.sides.0, a.closure, &opts))
                    .collect();
            for (k, sweep) in a.k.0.iter().zip(sweeps) {
                let sweep = sweep?;
                rows.extend(sweep.points.iter().map(kappa_row));
                fits.push(json!({ "k": k, "power_law": sweep.fit.as_ref().map(fit_json) }));
            }
        }
        Some(powers) => {
            let jobs: Vec<(usize, usize)> =
                a.k.0
                    .iter()
                    .flat_map(|&k| a.sides.0.iter().map(move |&l| (k, l)))
                    .collect();
            let sweeps: Vec<_> = jobs
                .par_iter()
                .map(|&(k, l)| kappa_vs_steps(&params, k, Grid::square(l)?, &powers.0, a.closure))
                .collect();
            for (&(k, l), sweep) in jobs.iter().zip(sweeps) {
                match sweep {
                    Ok(sweep) => {
                        rows.extend(sweep.points.iter().map(kappa_row));
                        let ok: Vec<&KappaPoint> =
                            sweep.points.iter().filter(|p| p.kappa.is_some()).collect();
                        let ts: Vec<f64> = ok.iter().map(|p| p.steps as f64).collect();
                        let logs: Vec<f64> = ok.iter().map(|p| p.kappa.unwrap().ln()).collect();
                        let exponential = linear_fit(&ts, &logs).ok();
                        fits.push(json!({
                            "k": k,
                            "sites": l * l,
                            "power_law": sweep.fit.as_ref().map(fit_json),
                            "exponential": exponential.as_ref().map(fit_json),
                        }));
                    }
                    Err(e @ Error::ResourceGuard(_)) => rows.push(vec![
                        k.to_string(),
                        (l * l).to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        "false".into(),
                        e.to_string(),
                    ]),
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    Ok(Report::table(columns, rows).annotate("fits", fits))
}

fn counts(a: &CountsArgs) -> Result<Report, CliError> {
    positive("kmax", a.kmax)?;
    let mut columns = vec!["k".to_string()];
    for b in &a.b.0 {
        columns.push(format!("N_{b}"));
        columns.push(format!("Q_{b}"));
    }
    let mut rows = vec![];
    for k in 1..=a.kmax as u64 {
        let mut row = vec![k.to_string()];
        for &b in &a.b.0 {
            let c = carleman_variable_count(b as u64, k)?;
            row.push(c.variables.to_string());
            row.push(c.qubits.to_string());
        }
        rows.push(row);
    }
    Ok(Report::table(columns, rows))
}

fn telescopic(a: &TelescopicArgs) -> Result<Report, CliError> {
    positive("T", a.t)?;
    let (grid, init) = initial_flow(&a.flow)?;
    let op = build_carleman_operator(&a.flow.params(), grid, a.k, a.closure)?;
    let tele = analysis::telescopic_propagator(&op, a.t)?;
    let s0 = lift_initial_state(&init, a.k)?;
    let dense = analysis::dense_apply(&tele.matrix, &s0.to_flat());
    let stepped = analysis::telescopic_apply(&op, &s0, a.t)?.to_flat();
    let residual = dense
        .iter()
        .zip(&stepped)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let columns = vec!["power".to_string(), "site_bandwidth".to_string()];
    let rows = tele
        .bandwidth
        .iter()
        .map(|b| vec![b.power.to_string(), b.site_bandwidth.to_string()])
        .collect();
    Ok(Report::table(columns, rows)
        .annotate("dim", op.dim())
        .annotate("power_vs_steps_max_abs", residual))
}

fn cost(a: &CostArgs) -> Result<Report, CliError> {
    let columns = ["solver", "sites", "k", "kappa", "eps", "sparsity", "cost"]
        .map(String::from)
        .to_vec();
    let mut rows = vec![];
    for &kind in &a.solver {
        let name = serde_json::to_value(kind).expect("solver serializes");
        for &n in &a.sites.0 {
            for &k in &a.k.0 {
                let s = a.sparsity.unwrap_or(5.0 * 6f64.powi(k as i32));
                let c = solver_complexity(kind, n as f64, k as u32, a.kappa, a.eps, s)?;
                rows.push(vec![
                    name.as_str().unwrap_or_default().to_string(),
                    n.to_string(),
                    k.to_string(),
                    num(a.kappa),
                    num(a.eps),
                    num(s),
                    num(c),
                ]);
            }
        }
    }
    Ok(Report::table(columns, rows))
}

fn probe(a: &ProbeArgs) -> Result<Report, CliError> {
    let sites = a.probe_sites();
    let l = a.flow.l;
    if let Some(Site(x1, x2)) = sites.iter().find(|s| s.0 >= l || s.1 >= l) {
        return Err(usage(format!(
            "probe site ({x1},{x2}) lies outside the {l}x{l} grid"
        )));
    }
    let (grid, init) = initial_flow(&a.flow)?;
    let params = a.flow.params();
    let dns = grad_run(&init, &params, a.steps, 1)?;
    let runs = carleman_runs(&a.flow, &init, &a.k.0, a.closure, a.steps)?;
    let mut columns = ["step", "t", "x1", "x2", "j1_dns"]
        .map(String::from)
        .to_vec();
    columns.extend(a.k.0.iter().map(|k| format!("j1_K{k}")));
    let mut rows = vec![];
    for (i, (step, field)) in dns.iter().enumerate() {
        for &Site(x1, x2) in &sites {
            let s = grid.site(x1, x2);
            let mut row = vec![
                step.to_string(),
                num(*step as f64 * params.dt),
                x1.to_string(),
                x2.to_string(),
                num(field.get(s, J1)),
            ];
            row.extend(runs.iter().map(|r| num(r[i].1.get(s, J1))));
            rows.push(row);
        }
    }
    Ok(Report::table(columns, rows))
}
