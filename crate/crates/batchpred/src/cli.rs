//! Command-line experiment runner.
//!
//! Every run is fully determined by its flags (echoed into the output
//! header as JSON), the artifact version, and the seed; outputs are
//! byte-identical across reruns and thread counts. Wall time is reported
//! on stderr so it never perturbs the output bytes.
//!
//! Exit codes: 0 success, 2 configuration error, 3 evaluation budget
//! exceeded, 4 malformed input data.

use crate::predictors::{
    add_beta_next_raw, markov_initial_prob, BetaParam, InitialEstimator, PredictorFamily,
    PredictorSpec,
};
use crate::regret_markov::{
    markov_regret_brute_force, markov_regret_mc, theorem3_initial_sweep,
    theorem5_transition_sweep, EllRuleRef, MARKOV_BRUTE_FORCE_BUDGET,
};
use crate::regret_memoryless::{
    regret_exact_double_sum, regret_exact_single_sum, theorem1_residual_sweep,
    theorem2_boundary_check, RegretError, RegretEstimate,
};
use crate::sources::{
    parse_training_text, EllRule, ExperimentShape, MarkovParam, MemorylessParam, SourceError,
    SufficientCounts, ThetaRange, TrainingSet,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;
pub const EXIT_DATA: u8 = 4;

#[derive(Debug)]
enum CliError {
    Config(String),
    Budget(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Budget(m) | CliError::Data(m) => m,
        }
    }
}

impl From<RegretError> for CliError {
    fn from(e: RegretError) -> Self {
        match e {
            RegretError::SummandBudget { .. } => CliError::Budget(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SourceError> for CliError {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::Parse { .. } | SourceError::RaggedBatch { .. } => {
                CliError::Data(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "batchpred",
    version,
    about = "Batch universal prediction for binary memoryless and Markov sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact batch regret of a memoryless predictor at one or more theta.
    MemorylessRegret(MemorylessArgs),
    /// Sweep tables verifying the asymptotic regret trends (1, 2, 3, 5).
    TheoremSweep(SweepArgs),
    /// Markov batch regret, decomposed into initial and transition parts.
    MarkovRegret(MarkovArgs),
    /// Per-symbol predictions and log-loss on a data file.
    Predict(PredictArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum PredictorArg {
    AddBetaBatch,
    NaiveIgnorePast,
    NaiveTrainOnly,
    MarkovComposite,
    MarkovTransitionOnly,
}

impl PredictorArg {
    fn family(self) -> PredictorFamily {
        match self {
            PredictorArg::AddBetaBatch => PredictorFamily::AddBetaBatch,
            PredictorArg::NaiveIgnorePast => PredictorFamily::NaiveIgnorePast,
            PredictorArg::NaiveTrainOnly => PredictorFamily::NaiveTrainOnly,
            PredictorArg::MarkovComposite => PredictorFamily::MarkovComposite,
            PredictorArg::MarkovTransitionOnly => PredictorFamily::MarkovTransitionOnly,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum EstimatorArg {
    FirstCoordinate,
    LeakageAveraged,
}

impl EstimatorArg {
    fn estimator(self) -> InitialEstimator {
        match self {
            EstimatorArg::FirstCoordinate => InitialEstimator::FirstCoordinate,
            EstimatorArg::LeakageAveraged => InitialEstimator::LeakageAveraged,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct MemorylessArgs {
    /// Source parameter(s) theta in [0, 1]; repeatable.
    #[arg(long, required = true, num_args = 1..)]
    theta: Vec<f64>,
    /// Number of training batches.
    #[arg(long)]
    n: u64,
    /// Batch length.
    #[arg(long)]
    ell: u64,
    /// Add-constant parameter, 1/2 <= beta <= 1.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Accept beta outside [1/2, 1].
    #[arg(long)]
    beta_override: bool,
    #[arg(long, value_enum, default_value = "add-beta-batch")]
    predictor: PredictorArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Which asymptotic trend to sweep: 1, 2, 3 or 5.
    #[arg(long)]
    theorem: u32,
    /// Interior margin delta; the parameter set is [delta, 1-delta].
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Add-constant parameter.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    beta_override: bool,
    /// Comma-separated n values, e.g. "8,16,32,64".
    #[arg(long)]
    n_values: Option<String>,
    /// Batch-length rule: "n", "const:<k>", or "sqrt".
    #[arg(long)]
    ell_rule: Option<String>,
    /// Initial-distribution estimator (theorem 3).
    #[arg(long, value_enum, default_value = "first-coordinate")]
    estimator: EstimatorArg,
    /// Monte Carlo replicas per sweep point (theorems 3 and 5).
    #[arg(long)]
    replicas: Option<u64>,
    /// Largest training length t for the boundary sweep (theorem 2).
    #[arg(long, default_value_t = 1000)]
    t_max: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct MarkovArgs {
    /// Initial probability of a one.
    #[arg(long)]
    p1: f64,
    /// Transition probability p = p(1|0).
    #[arg(long)]
    p: f64,
    /// Transition probability q = p(0|1).
    #[arg(long)]
    q: f64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    ell: u64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long)]
    beta_override: bool,
    #[arg(long, value_enum, default_value = "markov-composite")]
    predictor: PredictorArg,
    #[arg(long, value_enum, default_value = "first-coordinate")]
    estimator: EstimatorArg,
    /// Monte Carlo replicas (used when the instance is beyond the
    /// brute-force budget).
    #[arg(long, default_value_t = 1000)]
    replicas: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Data file: one training batch per line ('0'/'1' characters), final
    /// line "test:<bits>".
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long)]
    beta_override: bool,
    #[arg(long, value_enum, default_value = "add-beta-batch")]
    predictor: PredictorArg,
    #[arg(long, value_enum, default_value = "first-coordinate")]
    estimator: EstimatorArg,
    #[command(flatten)]
    output: OutputArgs,
}

fn beta_param(beta: f64, allow_override: bool) -> Result<BetaParam, CliError> {
    let r = if allow_override {
        BetaParam::with_override(beta)
    } else {
        BetaParam::new(beta)
    };
    r.map_err(|e| CliError::Config(e.to_string()))
}

fn parse_n_values(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("invalid n value {p:?}")))
        })
        .collect()
}

/// A finished table: header comments, CSV column names, rows of printed
/// cells, and trailing check lines. The JSON mirror carries the same data.
struct Table {
    config: serde_json::Value,
    seed: Option<u64>,
    columns: &'static [&'static str],
    rows: Vec<Vec<String>>,
    checks: Vec<(String, bool)>,
}

impl Table {
    fn render_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# batchpred v{}", crate::VERSION);
        match self.seed {
            Some(s) => {
                let _ = writeln!(out, "# seed: {s}");
            }
            None => {
                let _ = writeln!(out, "# seed: none");
            }
        }
        let _ = writeln!(out, "# config: {}", self.config);
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        for (name, ok) in &self.checks {
            let _ = writeln!(out, "# check {}: {}", name, if *ok { "PASS" } else { "FAIL" });
        }
        out
    }

    fn render_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (col, cell) in self.columns.iter().zip(row) {
                    let v = cell
                        .parse::<f64>()
                        .ok()
                        .and_then(serde_json::Number::from_f64)
                        .map(serde_json::Value::Number)
                        .unwrap_or_else(|| serde_json::Value::String(cell.clone()));
                    obj.insert((*col).to_string(), v);
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        let checks: Vec<serde_json::Value> = self
            .checks
            .iter()
            .map(|(name, ok)| json!({ "name": name, "pass": ok }))
            .collect();
        let doc = json!({
            "version": crate::VERSION,
            "seed": self.seed,
            "config": self.config,
            "rows": rows,
            "checks": checks,
        });
        format!("{:#}\n", doc)
    }

    fn write(&self, output: &OutputArgs) -> Result<(), CliError> {
        let body = match output.format {
            FormatArg::Csv => self.render_csv(),
            FormatArg::Json => self.render_json(),
        };
        match &output.out {
            Some(path) => std::fs::write(path, body)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(body.as_bytes())
                    .map_err(|e| CliError::Config(format!("cannot write stdout: {e}")))
            }
        }
    }

    fn all_pass(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn run_memoryless(args: &MemorylessArgs) -> Result<Table, CliError> {
    let beta = beta_param(args.beta, args.beta_override)?;
    let family = args.predictor.family();
    let spec = PredictorSpec::memoryless(family, beta)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let shape =
        ExperimentShape::new(args.n, args.ell).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rows = Vec::new();
    for &theta in &args.theta {
        let param = MemorylessParam::new(theta).map_err(|e| CliError::Config(e.to_string()))?;
        let est: RegretEstimate = if family == PredictorFamily::AddBetaBatch {
            regret_exact_single_sum(&param, &shape, beta)?
        } else {
            regret_exact_double_sum(&param, &shape, &spec)?
        };
        rows.push(vec![
            fmt_f64(theta),
            args.n.to_string(),
            args.ell.to_string(),
            fmt_f64(beta.value()),
            family.to_string(),
            fmt_f64(est.value),
            est.method.to_string(),
        ]);
    }
    Ok(Table {
        config: json!({
            "subcommand": "memoryless-regret",
            "theta": args.theta,
            "n": args.n,
            "ell": args.ell,
            "beta": beta.value(),
            "predictor": family.to_string(),
        }),
        seed: None,
        columns: &["theta", "n", "ell", "beta", "predictor", "regret", "method"],
        rows,
        checks: Vec::new(),
    })
}

fn sweep_theorem1(args: &SweepArgs, beta: BetaParam) -> Result<Table, CliError> {
    let n_values = match &args.n_values {
        Some(s) => parse_n_values(s)?,
        None => vec![8, 16, 32, 64],
    };
    let rule = match &args.ell_rule {
        Some(s) => EllRule::parse(s).map_err(CliError::Config)?,
        None => EllRule::EqualN,
    };
    let range = ThetaRange::new(args.delta).map_err(|e| CliError::Config(e.to_string()))?;
    let rows_data = theorem1_residual_sweep(&range, beta, &n_values, rule)?;
    let rows = rows_data
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.ell.to_string(),
                fmt_f64(r.beta),
                fmt_f64(r.theta_star),
                fmt_f64(r.max_regret),
                fmt_f64(r.predicted),
                fmt_f64(r.scaled_residual),
            ]
        })
        .collect();
    let tail: Vec<f64> = rows_data
        .iter()
        .rev()
        .take(3)
        .map(|r| r.scaled_residual)
        .collect();
    let decreasing = tail.len() == 3 && tail[0] < tail[1] && tail[1] < tail[2];
    Ok(Table {
        config: json!({
            "subcommand": "theorem-sweep", "theorem": 1, "delta": args.delta,
            "beta": beta.value(), "n_values": n_values,
            "ell_rule": args.ell_rule.clone().unwrap_or_else(|| "n".into()),
        }),
        seed: None,
        columns: &[
            "n",
            "ell",
            "beta",
            "theta_star",
            "max_regret",
            "predicted",
            "scaled_residual",
        ],
        rows,
        checks: vec![(
            "scaled residual decreasing over last three rows".into(),
            decreasing,
        )],
    })
}

fn sweep_theorem2(args: &SweepArgs) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    let mut violations = 0u64;
    for &beta in &[0.5, 0.75, 1.0] {
        let b = BetaParam::new(beta).expect("grid betas lie in the window");
        for &ell in &[1u64, 8, 64] {
            for t in 1..=args.t_max {
                let chk = theorem2_boundary_check(t, ell, b)?;
                if !chk.within_bounds() {
                    violations += 1;
                }
                rows.push(vec![
                    t.to_string(),
                    ell.to_string(),
                    fmt_f64(beta),
                    fmt_f64(chk.exact),
                    fmt_f64(chk.asymptote),
                    fmt_f64(chk.lower_bound),
                    fmt_f64(chk.upper_bound),
                ]);
            }
        }
    }
    Ok(Table {
        config: json!({
            "subcommand": "theorem-sweep", "theorem": 2, "t_max": args.t_max,
            "ell_grid": [1, 8, 64], "beta_grid": [0.5, 0.75, 1.0],
        }),
        seed: None,
        columns: &["t", "ell", "beta", "exact", "asymptote", "lower_bound", "upper_bound"],
        rows,
        checks: vec![("boundary sandwich, zero violations".into(), violations == 0)],
    })
}

/// Parameter grid for the initial-regret sweep: p1 in {0.1, ..., 0.9} at a
/// fixed interior (p, q). The first-coordinate estimator's regret depends
/// only on p1.
fn theorem3_grid() -> Vec<MarkovParam> {
    (1..=9)
        .map(|i| MarkovParam::new(i as f64 / 10.0, 0.3, 0.3).expect("valid grid point"))
        .collect()
}

const THEOREM3_BAND: (f64, f64) = (0.4, 0.62);
const THEOREM5_BAND: (f64, f64) = (0.35, 0.7);

fn sweep_theorem3(args: &SweepArgs, beta: BetaParam) -> Result<Table, CliError> {
    let n_values = match &args.n_values {
        Some(s) => parse_n_values(s)?,
        None => vec![256],
    };
    let rule = match &args.ell_rule {
        Some(s) => EllRule::parse(s).map_err(CliError::Config)?,
        None => EllRule::Const(16),
    };
    let replicas = args.replicas.unwrap_or(10_000);
    let rows_data = theorem3_initial_sweep(
        &theorem3_grid(),
        &n_values,
        EllRuleRef(&rule),
        args.estimator.estimator(),
        beta,
        replicas,
        args.seed,
    )?;
    let rows = rows_data
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.ell.to_string(),
                r.estimator.to_string(),
                fmt_f64(r.max_r1),
                fmt_f64(r.n_times_r1),
                fmt_f64(r.std_error),
            ]
        })
        .collect();
    let last = rows_data.last().expect("nonempty sweep");
    let (lo, hi) = THEOREM3_BAND;
    let in_band = (lo..=hi).contains(&last.n_times_r1);
    Ok(Table {
        config: json!({
            "subcommand": "theorem-sweep", "theorem": 3,
            "beta": beta.value(), "n_values": n_values,
            "ell_rule": args.ell_rule.clone().unwrap_or_else(|| "const:16".into()),
            "estimator": args.estimator.estimator().to_string(),
            "replicas": replicas, "p1_grid": "0.1..0.9 step 0.1",
        }),
        seed: Some(args.seed),
        columns: &["n", "ell", "estimator", "max_R1", "n_times_R1", "std_error"],
        rows,
        checks: vec![(
            format!("n*max_R1 in [{lo}, {hi}] at largest n"),
            in_band,
        )],
    })
}

fn sweep_theorem5(args: &SweepArgs, beta: BetaParam) -> Result<Table, CliError> {
    let n_values = match &args.n_values {
        Some(s) => parse_n_values(s)?,
        None => vec![32, 64, 128],
    };
    let rule = match &args.ell_rule {
        Some(s) => EllRule::parse(s).map_err(CliError::Config)?,
        None => EllRule::EqualN,
    };
    let replicas = args.replicas.unwrap_or(1000);
    let rows_data = theorem5_transition_sweep(
        args.delta,
        &n_values,
        EllRuleRef(&rule),
        beta,
        replicas,
        args.seed,
    )?;
    let rows = rows_data
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.ell.to_string(),
                fmt_f64(r.delta),
                fmt_f64(r.max_rt),
                fmt_f64(r.n_times_rt),
                fmt_f64(r.std_error),
            ]
        })
        .collect();
    let (lo, hi) = THEOREM5_BAND;
    let in_band = rows_data.len() >= 2
        && rows_data
            .iter()
            .rev()
            .take(2)
            .all(|r| (lo..=hi).contains(&r.n_times_rt));
    Ok(Table {
        config: json!({
            "subcommand": "theorem-sweep", "theorem": 5, "delta": args.delta,
            "beta": beta.value(), "n_values": n_values,
            "ell_rule": args.ell_rule.clone().unwrap_or_else(|| "n".into()),
            "replicas": replicas, "pq_grid_step": 0.05,
        }),
        seed: Some(args.seed),
        columns: &["n", "ell", "delta", "max_RT", "n_times_RT", "std_error"],
        rows,
        checks: vec![(
            format!("n*max_RT in [{lo}, {hi}] at the two largest n"),
            in_band,
        )],
    })
}

fn run_sweep(args: &SweepArgs) -> Result<Table, CliError> {
    let default_beta = match args.theorem {
        3 => crate::predictors::BETA_0,
        _ => 0.5,
    };
    let beta = beta_param(args.beta.unwrap_or(default_beta), args.beta_override)?;
    match args.theorem {
        1 => sweep_theorem1(args, beta),
        2 => sweep_theorem2(args),
        3 => sweep_theorem3(args, beta),
        5 => sweep_theorem5(args, beta),
        other => Err(CliError::Config(format!(
            "unknown theorem {other}; expected 1, 2, 3 or 5"
        ))),
    }
}

fn run_markov(args: &MarkovArgs) -> Result<Table, CliError> {
    let beta = beta_param(args.beta, args.beta_override)?;
    let family = args.predictor.family();
    let spec = PredictorSpec::markov(family, beta, args.estimator.estimator())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let param = MarkovParam::new(args.p1, args.p, args.q)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let shape =
        ExperimentShape::new(args.n, args.ell).map_err(|e| CliError::Config(e.to_string()))?;
    let within_brute = shape.t() + shape.ell() <= MARKOV_BRUTE_FORCE_BUDGET;
    let d = if within_brute {
        markov_regret_brute_force(&param, &shape, &spec)?
    } else {
        markov_regret_mc(&param, &shape, &spec, args.replicas, args.seed)?
    };
    let row = vec![
        fmt_f64(args.p1),
        fmt_f64(args.p),
        fmt_f64(args.q),
        args.n.to_string(),
        args.ell.to_string(),
        family.to_string(),
        args.estimator.estimator().to_string(),
        fmt_f64(beta.value()),
        fmt_f64(d.total.value),
        fmt_f64(d.total.std_error),
        fmt_f64(d.initial.value),
        fmt_f64(d.initial.std_error),
        fmt_f64(d.transition.value),
        fmt_f64(d.transition.std_error),
        d.total.method.to_string(),
    ];
    Ok(Table {
        config: json!({
            "subcommand": "markov-regret",
            "p1": args.p1, "p": args.p, "q": args.q,
            "n": args.n, "ell": args.ell, "beta": beta.value(),
            "predictor": family.to_string(),
            "estimator": args.estimator.estimator().to_string(),
            "replicas": args.replicas,
        }),
        seed: if within_brute { None } else { Some(args.seed) },
        columns: &[
            "p1",
            "p",
            "q",
            "n",
            "ell",
            "predictor",
            "estimator",
            "beta",
            "total",
            "total_std_error",
            "initial",
            "initial_std_error",
            "transition",
            "transition_std_error",
            "method",
        ],
        rows: vec![row],
        checks: Vec::new(),
    })
}

/// Next-symbol probability of a one for the chosen predictor, given
/// training counts and the test prefix. Markov prediction tracks
/// within-test transition counts.
struct SymbolPredictor {
    family: PredictorFamily,
    beta: BetaParam,
    estimator: InitialEstimator,
    counts: SufficientCounts,
    prefix_ones: u64,
    prefix_len: u64,
    prev: Option<u8>,
    l_hk: [[u64; 2]; 2],
    l_h: [u64; 2],
}

impl SymbolPredictor {
    fn prob_one(&self) -> Result<f64, CliError> {
        let c = &self.counts;
        match self.family {
            PredictorFamily::AddBetaBatch => Ok(add_beta_next_raw(
                c.t1,
                c.t(),
                self.prefix_ones,
                self.prefix_len,
                self.beta,
            )),
            PredictorFamily::NaiveIgnorePast => Ok(add_beta_next_raw(
                0,
                0,
                self.prefix_ones,
                self.prefix_len,
                self.beta,
            )),
            PredictorFamily::NaiveTrainOnly => {
                Ok(add_beta_next_raw(c.t1, c.t(), 0, 0, self.beta))
            }
            PredictorFamily::MarkovComposite => match self.prev {
                None => markov_initial_prob(c, self.beta, self.estimator)
                    .map_err(|e| CliError::Config(e.to_string())),
                Some(h) => {
                    let h = h as usize;
                    let b = self.beta.value();
                    Ok((c.t_hk[h][1] as f64 + self.l_hk[h][1] as f64 + b)
                        / (c.t_h[h] as f64 + self.l_h[h] as f64 + 2.0 * b))
                }
            },
            PredictorFamily::MarkovTransitionOnly => Err(CliError::Config(
                "the transition-only predictor assigns no probability to the first \
                 test symbol; use markov-composite for prediction"
                    .into(),
            )),
        }
    }

    fn observe(&mut self, bit: u8) {
        if let Some(h) = self.prev {
            let (h, k) = (h as usize, bit as usize);
            self.l_hk[h][k] += 1;
            self.l_h[h] += 1;
        }
        self.prev = Some(bit);
        self.prefix_ones += u64::from(bit);
        self.prefix_len += 1;
    }
}

fn run_predict(args: &PredictArgs) -> Result<Table, CliError> {
    let beta = beta_param(args.beta, args.beta_override)?;
    let family = args.predictor.family();
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.input.display())))?;
    let (batches, test) = parse_training_text(&text)?;
    let test = test.ok_or_else(|| {
        CliError::Data("missing test batch: final line must start with \"test:\"".into())
    })?;
    let counts = if batches.is_empty() {
        SufficientCounts::empty(test.len() as u64)
    } else {
        let ell = batches[0].len() as u64;
        crate::sources::extract_counts(&TrainingSet::new(batches, ell)?)
    };
    let mut predictor = SymbolPredictor {
        family,
        beta,
        estimator: args.estimator.estimator(),
        counts,
        prefix_ones: 0,
        prefix_len: 0,
        prev: None,
        l_hk: [[0; 2]; 2],
        l_h: [0; 2],
    };
    let mut rows = Vec::new();
    let mut cumulative = 0.0;
    for (i, &bit) in test.iter().enumerate() {
        let p1 = predictor.prob_one()?;
        let p_sym = if bit == 1 { p1 } else { 1.0 - p1 };
        let loss = -p_sym.ln();
        cumulative += loss;
        rows.push(vec![
            (i + 1).to_string(),
            bit.to_string(),
            fmt_f64(p1),
            fmt_f64(p_sym),
            fmt_f64(loss),
            fmt_f64(cumulative),
        ]);
        predictor.observe(bit);
    }
    Ok(Table {
        config: json!({
            "subcommand": "predict",
            "input": args.input.display().to_string(),
            "beta": beta.value(),
            "predictor": family.to_string(),
            "estimator": args.estimator.estimator().to_string(),
        }),
        seed: None,
        columns: &["index", "symbol", "prob_one", "prob_symbol", "loss", "cumulative_loss"],
        rows,
        checks: Vec::new(),
    })
}

/// Parse arguments, run the requested subcommand, and return the process
/// exit code. Clap's own usage errors exit with code 2 directly.
pub fn main() -> u8 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; everything else is a
            // configuration error.
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let result = match &cli.command {
        Command::MemorylessRegret(args) => run_memoryless(args).map(|t| (t, &args.output)),
        Command::TheoremSweep(args) => run_sweep(args).map(|t| (t, &args.output)),
        Command::MarkovRegret(args) => run_markov(args).map(|t| (t, &args.output)),
        Command::Predict(args) => run_predict(args).map(|t| (t, &args.output)),
    };
    match result {
        Ok((table, output)) => {
            if let Err(e) = table.write(output) {
                eprintln!("error: {}", e.message());
                return e.exit_code();
            }
            eprintln!("wall-time: {:.3}s", started.elapsed().as_secs_f64());
            if !table.all_pass() {
                eprintln!("one or more acceptance bands FAILED");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
