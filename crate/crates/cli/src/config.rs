//! Experiment configurations. Every kind is both a CLI subcommand and a
//! JSON document tagged by `"experiment"`; defaults are shared between the
//! two by deriving the serde default from the clap defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use carleman_core::analysis::{MaskRule, SolverKind};
use carleman_core::carleman_grad::ClosureMode;
use carleman_core::grad_dns::{DensityInverse, GradParams, PressureInit};
use clap::{Args, FromArgMatches, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::CliError;

/// Parses a kebab-case name through the type's serde representation.
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

macro_rules! kebab_parser {
    ($name:ident, $ty:ty) => {
        fn $name(s: &str) -> Result<$ty, String> {
            kebab(s)
        }
    };
}

kebab_parser!(parse_closure, ClosureMode);
kebab_parser!(parse_inverse, DensityInverse);
kebab_parser!(parse_pressure, PressureInit);
kebab_parser!(parse_mask, MaskRule);
kebab_parser!(parse_solver, SolverKind);

/// Defaults come from clap so that the CLI and JSON paths cannot drift.
macro_rules! clap_default {
    ($ty:ty) => {
        impl Default for $ty {
            fn default() -> Self {
                let cmd = <$ty>::augment_args(clap::Command::new("defaults"));
                <$ty>::from_arg_matches(&cmd.get_matches_from(["defaults"]))
                    .expect("clap defaults parse")
            }
        }
    };
}

/// Ordered list of non-negative integers written as `1..5`, `1,2,4,8` or a
/// mix such as `1..3,6`. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntList(pub Vec<usize>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = vec![];
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || format!("invalid integer list element '{part}'");
            if let Some((lo, hi)) = part.split_once("..") {
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi
                    .trim()
                    .trim_start_matches('=')
                    .parse()
                    .map_err(|_| bad())?;
                if hi < lo {
                    return Err(format!("empty range '{part}'"));
                }
                out.extend(lo..=hi);
            } else {
                out.push(part.parse().map_err(|_| bad())?);
            }
        }
        if out.is_empty() {
            return Err("integer list is empty".into());
        }
        Ok(IntList(out))
    }
}

impl fmt::Display for IntList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl Serialize for IntList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(usize),
            Many(Vec<usize>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::One(k) => Ok(IntList(vec![k])),
            Raw::Many(v) if v.is_empty() => Err(serde::de::Error::custom("integer list is empty")),
            Raw::Many(v) => Ok(IntList(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Lattice site `(x1, x2)`, written `x1,x2` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site(pub usize, pub usize);

impl FromStr for Site {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| format!("site '{s}' is not of the form x1,x2"))?;
        let p = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid site coordinate '{v}'"))
        };
        Ok(Site(p(a)?, p(b)?))
    }
}

/// Kolmogorov flow setting and Grad-system parameters.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowArgs {
    /// Lattice side length
    #[arg(long = "L", default_value_t = 32)]
    #[serde(rename = "L")]
    pub l: usize,
    /// Amplitude of J1 = A1 cos(k x2)
    #[arg(long = "A1", default_value_t = 0.1)]
    #[serde(rename = "A1")]
    pub a1: f64,
    /// Amplitude of J2 = A2 cos(k x1)
    #[arg(long = "A2", default_value_t = 0.1)]
    #[serde(rename = "A2")]
    pub a2: f64,
    /// Relaxation frequency
    #[arg(long, default_value_t = 2.0)]
    pub omega: f64,
    /// Sound speed
    #[arg(long, default_value_t = 0.5773502691896258)]
    pub cs: f64,
    /// Time step
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Evaluation of 1/rho in the momentum flux: polynomial or exact
    #[arg(long, default_value = "polynomial", value_parser = parse_inverse)]
    pub inverse: DensityInverse,
    /// Initial momentum flux: equilibrium or chapman-enskog
    #[arg(long = "pressure-init", default_value = "equilibrium", value_parser = parse_pressure)]
    pub pressure_init: PressureInit,
}
clap_default!(FlowArgs);

impl FlowArgs {
    pub fn params(&self) -> GradParams {
        GradParams {
            omega: self.omega,
            cs: self.cs,
            dt: self.dt,
            inverse: self.inverse,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputArgs {
    /// Output file; relative paths resolve against CARLEMAN_HYDRO_OUT_DIR
    /// when it is set. Defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
clap_default!(OutputArgs);

/// Truncated Carleman series of the logistic equation against the exact
/// solution.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 0.45, allow_negative_numbers = true)]
    pub x0: f64,
    /// Truncation orders
    #[arg(long = "K", default_value = "1,2,4,8")]
    #[serde(rename = "K")]
    pub k: IntList,
    /// Last sample time
    #[arg(long, default_value_t = 5.0)]
    pub t_max: f64,
    /// Number of equally spaced samples on [0, t_max]
    #[arg(long, default_value_t = 501)]
    pub samples: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(LogisticArgs);

/// D2Q9 lattice Boltzmann run from Kolmogorov initial data.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbmArgs {
    #[arg(long = "L", default_value_t = 32)]
    #[serde(rename = "L")]
    pub l: usize,
    #[arg(long = "A1", default_value_t = 0.1)]
    #[serde(rename = "A1")]
    pub a1: f64,
    #[arg(long = "A2", default_value_t = 0.1)]
    #[serde(rename = "A2")]
    pub a2: f64,
    /// BGK relaxation frequency; 1 gives viscosity 1/6
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub snapshot_every: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(LbmArgs);

/// Direct forward-Euler integration of the Grad system.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradDnsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub snapshot_every: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(GradDnsArgs);

/// Lifted Carleman-Grad run; `--closure exact-nonlocal` instead reports the
/// deviation of both local closures from the exact second-order lift.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarlemanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    /// Truncation order
    #[arg(long = "K", default_value_t = 2)]
    #[serde(rename = "K")]
    pub k: usize,
    /// diagonal, leibniz or exact-nonlocal
    #[arg(long, default_value = "diagonal", value_parser = parse_closure)]
    pub closure: ClosureMode,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub snapshot_every: usize,
    /// Also write the one-step matrix as `row col value` triplets
    #[arg(long)]
    pub triplets: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(CarlemanArgs);

/// Mean relative current error of each truncation order against the DNS.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorCompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    /// Truncation orders
    #[arg(long = "K", default_value = "1..5")]
    #[serde(rename = "K")]
    pub k: IntList,
    #[arg(long, default_value = "diagonal", value_parser = parse_closure)]
    pub closure: ClosureMode,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Which zero reference components are excluded: initial-zero or pointwise
    #[arg(long, default_value = "initial-zero", value_parser = parse_mask)]
    pub mask: MaskRule,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(ErrorCompareArgs);

/// Condition number of the one-step matrix against the number of sites, or
/// of its powers when `--powers` is given.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KappaSweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    /// Truncation orders
    #[arg(long = "K", default_value = "1..3")]
    #[serde(rename = "K")]
    pub k: IntList,
    #[arg(long, default_value = "diagonal", value_parser = parse_closure)]
    pub closure: ClosureMode,
    /// Lattice side lengths
    #[arg(long, default_value = "4,8,16")]
    pub sides: IntList,
    /// Powers T of the one-step matrix; sweeps kappa(M^T) on each side
    #[arg(long)]
    pub powers: Option<IntList>,
    /// Largest dimension handled by dense SVD
    #[arg(long, default_value_t = 5000)]
    pub dense_threshold: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(KappaSweepArgs);

/// Number of Carleman variables and index qubits.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CountsArgs {
    /// Numbers of base variables
    #[arg(long, default_value = "9,19")]
    pub b: IntList,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(CountsArgs);

/// Powers of the one-step matrix and their site bandwidth.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TelescopicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    #[arg(long = "K", default_value_t = 1)]
    #[serde(rename = "K")]
    pub k: usize,
    #[arg(long, default_value = "diagonal", value_parser = parse_closure)]
    pub closure: ClosureMode,
    /// Largest power
    #[arg(long = "T", default_value_t = 10)]
    #[serde(rename = "T")]
    pub t: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(TelescopicArgs);

/// Abstract quantum linear-solver cost table.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostArgs {
    /// Solvers: hhl, cks
    #[arg(long, value_delimiter = ',', default_value = "hhl,cks", value_parser = parse_solver)]
    pub solver: Vec<SolverKind>,
    /// Numbers of lattice sites
    #[arg(long, default_value = "16,64,256,1024")]
    pub sites: IntList,
    /// Truncation orders
    #[arg(long = "K", default_value = "1..3")]
    #[serde(rename = "K")]
    pub k: IntList,
    /// Condition number
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Target precision
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Sparsity; defaults to 5 * 6^K
    #[arg(long)]
    pub sparsity: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(CostArgs);

/// Current time series at individual lattice sites for the DNS and each
/// truncation order.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    /// Truncation orders
    #[arg(long = "K", default_value = "1..3")]
    #[serde(rename = "K")]
    pub k: IntList,
    #[arg(long, default_value = "diagonal", value_parser = parse_closure)]
    pub closure: ClosureMode,
    #[arg(long, default_value_t = 600)]
    pub steps: usize,
    /// Probe site x1,x2 (repeatable); defaults to (0,0), (8,0), (8,16)
    #[arg(long = "site")]
    pub sites: Vec<Site>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}
clap_default!(ProbeArgs);

impl ProbeArgs {
    pub const DEFAULT_SITES: [Site; 3] = [Site(0, 0), Site(8, 0), Site(8, 16)];

    pub fn probe_sites(&self) -> Vec<Site> {
        if self.sites.is_empty() {
            Self::DEFAULT_SITES.to_vec()
        } else {
            self.sites.clone()
        }
    }
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Logistic(LogisticArgs),
    Lbm(LbmArgs),
    GradDns(GradDnsArgs),
    Carleman(CarlemanArgs),
    ErrorCompare(ErrorCompareArgs),
    KappaSweep(KappaSweepArgs),
    Counts(CountsArgs),
    Telescopic(TelescopicArgs),
    Cost(CostArgs),
    Probe(ProbeArgs),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Logistic(_) => "logistic",
            ExperimentConfig::Lbm(_) => "lbm",
            ExperimentConfig::GradDns(_) => "grad-dns",
            ExperimentConfig::Carleman(_) => "carleman",
            ExperimentConfig::ErrorCompare(_) => "error-compare",
            ExperimentConfig::KappaSweep(_) => "kappa-sweep",
            ExperimentConfig::Counts(_) => "counts",
            ExperimentConfig::Telescopic(_) => "telescopic",
            ExperimentConfig::Cost(_) => "cost",
            ExperimentConfig::Probe(_) => "probe",
        }
    }

    pub fn output(&self) -> Option<&PathBuf> {
        match self {
            ExperimentConfig::Logistic(a) => a.out.output.as_ref(),
            ExperimentConfig::Lbm(a) => a.out.output.as_ref(),
            ExperimentConfig::GradDns(a) => a.out.output.as_ref(),
            ExperimentConfig::Carleman(a) => a.out.output.as_ref(),
            ExperimentConfig::ErrorCompare(a) => a.out.output.as_ref(),
            ExperimentConfig::KappaSweep(a) => a.out.output.as_ref(),
            ExperimentConfig::Counts(a) => a.out.output.as_ref(),
            ExperimentConfig::Telescopic(a) => a.out.output.as_ref(),
            ExperimentConfig::Cost(a) => a.out.output.as_ref(),
            ExperimentConfig::Probe(a) => a.out.output.as_ref(),
        }
    }

    /// Full config as JSON, with every key present.
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Parses a JSON document, rejecting keys the experiment does not use.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::Usage("config must be a JSON object".into()))?;
        let kind = obj
            .get("experiment")
            .ok_or_else(|| CliError::Usage("config is missing the 'experiment' key".into()))?;
        let config: ExperimentConfig = serde_json::from_value(value.clone())
            .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        let known = config.to_json();
        let known = known.as_object().expect("config serializes to an object");
        if let Some(key) = obj.keys().find(|k| !known.contains_key(*k)) {
            return Err(CliError::Usage(format!(
                "unknown key '{key}' for experiment {kind}"
            )));
        }
        Ok(config)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "carleman-hydro",
    version,
    about = "Carleman linearization experiments for kinetic flow models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    #[command(flatten)]
    Experiment(ExperimentConfig),
    /// Run the experiment described by a JSON config file
    Run { config: PathBuf },
}
