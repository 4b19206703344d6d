use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_carleman-hydro"));
    c.env_remove("CARLEMAN_HYDRO_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Metadata JSON, header, and data rows split on commas.
fn parse(text: &str) -> (Value, Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let meta = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (meta, header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn counts_table_layout() {
    let (meta, header, rows) = parse(&stdout(&run(&["counts", "--b", "9,19", "--kmax", "10"])));
    assert_eq!(meta["config"]["experiment"], "counts");
    assert_eq!(header, ["k", "N_9", "Q_9", "N_19", "Q_19"]);
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[7], ["8", "24309", "15", "2220074", "22"]);
    assert_eq!(rows[9], ["10", "92377", "17", "20030009", "25"]);
}

#[test]
fn logistic_series_annotates_horizon() {
    let out = run(&[
        "logistic",
        "--a",
        "-1",
        "--b",
        "-1",
        "--x0",
        "0.5",
        "--K",
        "1,2,4,8",
        "--t-max",
        "1",
        "--samples",
        "11",
    ]);
    let (meta, header, rows) = parse(&stdout(&out));
    let t_lim = meta["results"]["t_lim"].as_f64().unwrap();
    assert!((t_lim - 3f64.ln()).abs() < 1e-12);
    assert_eq!(header, ["t", "exact", "S_1", "S_2", "S_4", "S_8"]);
    // Inside the horizon higher orders approach the exact solution.
    let exact = column(&header, &rows, "exact");
    let s4 = column(&header, &rows, "S_4");
    let s8 = column(&header, &rows, "S_8");
    assert!((s8[5] - exact[5]).abs() < (s4[5] - exact[5]).abs());
}

#[test]
fn json_config_matches_flags_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "error-compare", "L": 8, "K": "1..2", "steps": 5}"#,
    )
    .unwrap();
    let from_json = stdout(&run(&["run", cfg.to_str().unwrap()]));
    let from_flags = stdout(&run(&[
        "error-compare",
        "--L",
        "8",
        "--K",
        "1,2",
        "--steps",
        "5",
    ]));
    assert_eq!(from_json, from_flags);
    let (_, header, rows) = parse(&from_json);
    assert_eq!(header, ["step", "t", "eps_K1", "eps_K2"]);
    assert_eq!(rows.len(), 6);
    assert_eq!(column(&header, &rows, "eps_K1")[0], 0.0);
}

#[test]
fn rerun_is_identical() {
    let args = [
        "carleman",
        "--L",
        "4",
        "--K",
        "2",
        "--steps",
        "6",
        "--snapshot-every",
        "3",
    ];
    assert_eq!(stdout(&run(&args)), stdout(&run(&args)));
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"experiment": "counts", "kmax": 3, "omgea": 2}"#).unwrap();
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'omgea'"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["no-such-kind"]).status.code(), Some(2));
    assert_eq!(run(&["probe", "--site", "32,0"]).status.code(), Some(2));
    assert_eq!(run(&["grad-dns", "--omega", "300"]).status.code(), Some(2));
    assert_eq!(
        run(&["grad-dns", "--L", "8", "--dt", "0.9", "--steps", "400"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(run(&["telescopic"]).status.code(), Some(4));
    assert_eq!(
        run(&["carleman", "--closure", "exact-nonlocal"])
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn output_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["counts", "--kmax", "2"])
        .env("CARLEMAN_HYDRO_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("counts.csv")).unwrap();
    assert_eq!(parse(&text).2.len(), 2);

    let out = bin()
        .args(["counts", "--kmax", "2", "--output", "sub/table.csv"])
        .env("CARLEMAN_HYDRO_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(Path::new(&dir.path().join("sub/table.csv")).exists());
}

#[test]
fn probe_initial_values() {
    let out = run(&["probe", "--L", "32", "--K", "1", "--steps", "2"]);
    let (_, header, rows) = parse(&stdout(&out));
    assert_eq!(header, ["step", "t", "x1", "x2", "j1_dns", "j1_K1"]);
    // Three default sites per step.
    assert_eq!(rows.len(), 9);
    // J1 = A1 cos(2 pi x2 / L) at (0,0), (8,0), (8,16).
    for (r, want) in rows[..3].iter().zip([0.1, 0.1, -0.1]) {
        assert_eq!(r[4].parse::<f64>().unwrap(), want);
        assert_eq!(r[5].parse::<f64>().unwrap(), want);
    }
    assert_eq!((rows[1][2].as_str(), rows[1][3].as_str()), ("8", "0"));
}

#[test]
fn grad_dns_snapshots() {
    let (meta, header, rows) = parse(&stdout(&run(&[
        "grad-dns",
        "--L",
        "4",
        "--steps",
        "10",
        "--snapshot-every",
        "5",
    ])));
    assert_eq!(header, ["step", "t", "site", "rho", "j1", "j2"]);
    assert_eq!(rows.len(), 3 * 16);
    assert!((meta["results"]["viscosity"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(rows[16][0], "5");
    assert_eq!(rows[16][1].parse::<f64>().unwrap(), 0.05);
}

#[test]
fn lbm_snapshots_conserve_mass() {
    let (_, header, rows) = parse(&stdout(&run(&[
        "lbm",
        "--L",
        "8",
        "--steps",
        "20",
        "--snapshot-every",
        "20",
    ])));
    let rho = column(&header, &rows, "rho");
    let first: f64 = rho[..64].iter().sum();
    let last: f64 = rho[64..].iter().sum();
    assert!((first - last).abs() < 1e-12);
}

#[test]
fn exact_nonlocal_report() {
    let (_, header, rows) = parse(&stdout(&run(&[
        "carleman",
        "--L",
        "4",
        "--closure",
        "exact-nonlocal",
        "--steps",
        "5",
    ])));
    assert_eq!(header.len(), 10);
    assert_eq!(rows.len(), 5);
    assert!(column(&header, &rows, "leibniz_order1_max")
        .iter()
        .all(|v| v.is_finite()));
    assert_eq!(
        run(&[
            "carleman",
            "--L",
            "4",
            "--K",
            "3",
            "--closure",
            "exact-nonlocal"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn carleman_triplets_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let out = run(&[
        "carleman",
        "--L",
        "4",
        "--K",
        "1",
        "--steps",
        "1",
        "--triplets",
        path.to_str().unwrap(),
    ]);
    let (meta, _, _) = parse(&stdout(&out));
    let text = std::fs::read_to_string(path).unwrap();
    let head: Vec<usize> = text.lines().next().unwrap()[2..]
        .split(' ')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(head[0], 96);
    assert_eq!(head[2] as u64, meta["results"]["nnz"].as_u64().unwrap());
    assert_eq!(text.lines().count(), head[2] + 1);
}

#[test]
fn kappa_sweeps() {
    let (meta, header, rows) = parse(&stdout(&run(&[
        "kappa-sweep",
        "--K",
        "1",
        "--sides",
        "4,8",
    ])));
    let kappa = column(&header, &rows, "kappa");
    assert_eq!(kappa.len(), 2);
    assert!((kappa[0] - kappa[1]).abs() < 1e-6 * kappa[0]);
    assert!(
        meta["results"]["fits"][0]["power_law"]["slope"]
            .as_f64()
            .unwrap()
            .abs()
            < 0.1
    );

    let (meta, header, rows) = parse(&stdout(&run(&[
        "kappa-sweep",
        "--K",
        "1",
        "--sides",
        "4",
        "--powers",
        "1..4",
    ])));
    let kappa = column(&header, &rows, "kappa");
    assert_eq!(column(&header, &rows, "steps"), [1.0, 2.0, 3.0, 4.0]);
    assert!(kappa.windows(2).all(|w| w[1] >= w[0]));
    assert!(meta["results"]["fits"][0]["exponential"]["r2"].is_number());
}

#[test]
fn cost_scaling() {
    let table = |kappa: &str| {
        let (_, header, rows) = parse(&stdout(&run(&[
            "cost", "--sites", "64", "--K", "2", "--kappa", kappa,
        ])));
        column(&header, &rows, "cost")
    };
    let (one, two) = (table("1"), table("2"));
    // HHL row first, then CKS.
    assert!((two[0] / one[0] - 4.0).abs() < 1e-12);
    assert!((two[1] / one[1] - 2.0).abs() < 1e-12);
}
