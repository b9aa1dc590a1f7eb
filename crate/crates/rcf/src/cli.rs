//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 assertion or feasibility failure, 3 I/O
//! or malformed input file.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rcf_core::instance::Reports;
use rcf_core::multi_unit::run_multi_unit;
use rcf_core::single_item::{run_single_item, EtaPolicy};
use rcf_core::{AuctionInstance, Error as CoreError};

use crate::bench;
use crate::format::{
    to_csv, AssignmentRow, DecompositionRecord, FormatError, InstanceFile, OutcomeRecord, RunMeta,
};
use crate::generator::GeneratorSpec;
use crate::montecarlo;
use crate::reproduce::{self, ReproduceError};
use crate::verify::{self, summary_rows, VerificationReport, SIGMAS};

#[derive(Debug, Parser)]
#[command(name = "rcf", version, about = "Randomized candidate filtering auctions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the mechanism on one instance.
    Run(RunArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
    /// Time the mechanism over increasing n.
    Bench(BenchArgs),
    /// Emit data for the illustrative examples and constants.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    fn json(self) -> bool {
        self != OutputFormat::Csv
    }

    fn csv(self) -> bool {
        self != OutputFormat::Json
    }
}

#[derive(Debug, Args)]
pub struct Source {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    pub instance: Option<PathBuf>,
    /// Generator spec, `family:key=value,...`.
    #[arg(long, requires = "seed")]
    pub generate: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Number of identical items (overrides the instance).
    #[arg(long)]
    pub m: Option<usize>,
    /// `known`, `unknown` or a positive number.
    #[arg(long, default_value = "known")]
    pub eta: String,
    /// Monte Carlo draws to check the closed form against.
    #[arg(long, requires = "seed")]
    pub samples: Option<u64>,
    /// Base seed for generation and sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value = "known")]
    pub eta: String,
    /// Monte Carlo draws for the equivalence and rounding checks.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Generated instances per suite (with `--generate`).
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    /// Misreport points per truthfulness sweep.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, required = true)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "bounded:d=2")]
    pub generate: String,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',', default_values_t = bench::DEFAULT_SIZES)]
    pub sizes: Vec<usize>,
    #[arg(long, required = true)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Example31,
    Example32,
    Constants,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    pub which: Which,
    /// Bidder counts (example31: one value; example32: perfect squares).
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Instances per corpus for `constants`.
    #[arg(long, default_value_t = 200)]
    pub trials: u64,
    #[arg(long, required = true)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Assertion(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Assertion(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Assertion(m) => write!(f, "check failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Mechanism(c) => c.into(),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Infeasible { .. } => CliError::Assertion(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<ReproduceError> for CliError {
    fn from(e: ReproduceError) -> Self {
        match e {
            ReproduceError::Format(f) => f.into(),
            ReproduceError::Core(c) => c.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
/// Normal output goes to `stdout`, diagnostics to `stderr`.
pub fn run_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Reproduce(a) => cmd_reproduce(a, out),
    }
}

fn parse_spec(s: &str) -> Result<GeneratorSpec, CliError> {
    s.parse().map_err(|e: crate::generator::SpecError| CliError::Usage(e.to_string()))
}

/// Loads or generates the instance file, applying `--m`.
fn load_source(source: &Source, m: Option<usize>, seed: Option<u64>) -> Result<(InstanceFile, String), CliError> {
    let (mut file, label) = match (&source.instance, &source.generate) {
        (Some(path), None) => (InstanceFile::load(path)?, path.display().to_string()),
        (None, Some(spec)) => {
            let seed = seed.ok_or_else(|| CliError::Usage("--generate needs --seed".into()))?;
            (parse_spec(spec)?.generate(seed), spec.clone())
        }
        _ => return Err(CliError::Usage("give exactly one of --instance and --generate".into())),
    };
    if let Some(m) = m {
        file.m = m;
    }
    Ok((file, label))
}

fn parse_eta(s: &str, instance: &AuctionInstance) -> Result<EtaPolicy, CliError> {
    match s {
        "known" => Ok(match instance.known_d() {
            Some(d) => EtaPolicy::KnownD(d),
            None => EtaPolicy::KnownD(instance.effective_d()),
        }),
        "unknown" => Ok(EtaPolicy::UnknownD),
        v => match v.parse::<f64>() {
            Ok(x) if x.is_finite() && x > 0.0 => Ok(EtaPolicy::Fixed(x)),
            _ => Err(CliError::Usage(format!("--eta must be known, unknown or a positive number, got {v:?}"))),
        },
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    crate::format::write_file(&dir.join(name), contents).map_err(CliError::from)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn cmd_run(a: RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (file, label) = load_source(&a.source, a.m, a.seed)?;
    let inst = file.build()?;
    let policy = parse_eta(&a.eta, &inst)?;
    let run_id = file.name.clone().unwrap_or_else(|| label.clone());
    let meta = RunMeta {
        run_id: run_id.clone(),
        source: label,
        eta_policy: format!("{policy:?}"),
        seed: a.seed,
        samples: a.samples,
    };
    let (outcome, multi) = if inst.items() == 1 {
        (run_single_item(&inst, policy, a.seed)?, None)
    } else {
        let r = run_multi_unit(&inst, policy, a.seed)?;
        (r.outcome.clone(), Some(r))
    };
    let assignment = multi.as_ref().and_then(|r| r.assignment.clone());
    let record = OutcomeRecord::new(meta, &outcome, assignment.clone());

    writeln!(out, "run {run_id}").map_err(io)?;
    writeln!(out, "x = {}", fmt_vec(&outcome.x)).map_err(io)?;
    writeln!(out, "p = {}", fmt_vec(&outcome.p)).map_err(io)?;
    writeln!(out, "eta = {}", fmt_vec(&outcome.eta)).map_err(io)?;
    writeln!(out, "welfare ratio = {:.6}", outcome.welfare_ratio()).map_err(io)?;
    if let Some(w) = &outcome.winners {
        writeln!(out, "winners = {w:?}").map_err(io)?;
    }

    let mut failures = Vec::new();
    if let Some(samples) = a.samples {
        let seed = a.seed.expect("clap enforces --seed with --samples");
        let reports = Reports::elicit(&inst)?;
        let n = inst.n();
        let est = montecarlo::rcf_monte_carlo(&reports, n - inst.items(), &outcome.eta, samples, seed);
        let exact: Vec<f64> = outcome.candidate_probability.clone();
        let z = verify::z_scores(&exact, &est.tally.probabilities(), est.tally.draws);
        let worst = z.iter().copied().fold(0.0, f64::max);
        writeln!(out, "monte carlo x = {} (max z = {worst:.3})", fmt_vec(&est.x)).map_err(io)?;
        if worst > SIGMAS {
            failures.push(format!("Monte Carlo estimate is {worst:.2} sigma from the closed form"));
        }
    }
    if let Some(w) = &outcome.winners {
        if w.len() > inst.items() {
            failures.push(format!("{} winners for {} items", w.len(), inst.items()));
        }
    }

    let json = record.to_json();
    let csv = to_csv(&record.csv_rows(inst.known_d()))?;
    match &a.out {
        Some(dir) => {
            if a.format.json() {
                write_out(dir, "outcome.json", &json)?;
            }
            if a.format.csv() {
                write_out(dir, "outcome.csv", &csv)?;
            }
            if let Some(r) = &multi {
                write_out(dir, "decomposition.json", &DecompositionRecord::new(&run_id, &r.matrix, &r.decomposition).to_json())?;
                if let (Some(pairs), Some(seed)) = (&assignment, a.seed) {
                    let rows: Vec<AssignmentRow> = pairs
                        .iter()
                        .map(|&(i, item)| AssignmentRow { run_id: run_id.clone(), i, item, seed })
                        .collect();
                    write_out(dir, "assignments.csv", &to_csv(&rows)?)?;
                }
            }
        }
        None => {
            if a.format.json() {
                writeln!(out, "{json}").map_err(io)?;
            }
            if a.format.csv() {
                write!(out, "{csv}").map_err(io)?;
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(failures.join("; ")))
    }
}

/// Every per-instance check on one file.
pub fn instance_suite(file: &InstanceFile, policy_arg: &str, samples: u64, points: usize, seed: u64) -> Result<Vec<VerificationReport>, CliError> {
    let inst = file.build()?;
    let policy = parse_eta(policy_arg, &inst)?;
    let n = inst.n();
    let mut reports = Vec::new();
    if inst.items() == 1 {
        for i in 0..n {
            reports.push(verify::verify_truthfulness(file, i, points, policy));
        }
        reports.push(verify::verify_candidate_bound_diagnostics(file));
    }
    reports.push(verify::verify_welfare(file, policy));
    if n <= 10 && samples > 0 {
        reports.push(verify::verify_oracle_equivalence(file, samples, seed));
    }
    reports.push(verify::verify_query_complexity(&inst, &file.name.clone().unwrap_or_default()));
    if inst.items() > 1 {
        let outcome = run_multi_unit(&inst, policy, None)?;
        reports.push(verify::verify_rounding(
            &file.name.clone().unwrap_or_default(),
            &outcome.matrix,
            &outcome.decomposition,
            samples,
            seed,
        ));
    }
    Ok(reports)
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = a.seed.expect("clap enforces --seed");
    let mut reports = Vec::new();
    match (&a.source.instance, &a.source.generate) {
        (Some(_), None) => {
            let (file, _) = load_source(&a.source, a.m, None)?;
            reports.extend(instance_suite(&file, &a.eta, a.samples, a.points, seed)?);
        }
        (None, Some(spec)) => {
            let mut spec = parse_spec(spec)?;
            if let Some(m) = a.m {
                spec.m = m;
            }
            for t in 0..a.trials {
                let file = spec.generate(seed.wrapping_add(t));
                reports.extend(instance_suite(&file, &a.eta, a.samples, a.points, seed.wrapping_add(t))?);
            }
            let inst = spec.generate(seed).build()?;
            let policy = parse_eta(&a.eta, &inst)?;
            reports.push(verify::verify_feasibility_suite(&spec, a.trials, seed, policy));
        }
        _ => return Err(CliError::Usage("give exactly one of --instance and --generate".into())),
    }
    reports.extend(verify::negative_controls(seed));

    let failed: Vec<&VerificationReport> = reports.iter().filter(|r| !r.passed).collect();
    for r in &reports {
        writeln!(
            out,
            "{} {:<22} {:<32} statistic={:.6e} bound={:.6e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.check,
            r.instance,
            r.statistic,
            r.bound
        )
        .map_err(io)?;
    }
    writeln!(out, "{} checks, {} failed", reports.len(), failed.len()).map_err(io)?;
    if let Some(dir) = &a.out {
        if a.format.json() {
            let lines: String = reports.iter().map(|r| r.to_json_line() + "\n").collect();
            write_out(dir, "reports.jsonl", &lines)?;
        }
        if a.format.csv() {
            write_out(dir, "summary.csv", &to_csv(&summary_rows(&reports))?)?;
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<String> = failed.iter().map(|r| format!("{} on {}", r.check, r.instance)).collect();
        Err(CliError::Assertion(names.join(", ")))
    }
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = parse_spec(&a.generate)?;
    let seed = a.seed.expect("clap enforces --seed");
    if a.sizes.iter().any(|&n| n < 2) {
        return Err(CliError::Usage("sizes must be at least 2".into()));
    }
    let rows = bench::bench(&spec, &a.sizes, seed)?;
    let csv = to_csv(&rows)?;
    write!(out, "{csv}").map_err(io)?;
    if rows.len() >= 2 {
        let f = bench::fit(&rows);
        writeln!(out, "query exponent {:.3}, time exponent {:.3}", f.query_exponent, f.time_exponent).map_err(io)?;
    }
    if let Some(dir) = &a.out {
        write_out(dir, "bench.csv", &csv)?;
    }
    match rows.iter().find(|r| !r.queries_exact()) {
        Some(r) => Err(CliError::Assertion(format!("n = {}: {} queries, expected {}", r.n, r.queries, r.expected_queries))),
        None => Ok(()),
    }
}

fn cmd_reproduce(a: ReproduceArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = a.seed.expect("clap enforces --seed");
    let (name, csv, ok) = match a.which {
        Which::Example31 => {
            let ns = if a.n.is_empty() { vec![8] } else { a.n.clone() };
            let rows = ns
                .iter()
                .map(|&n| reproduce::example31(n, a.eps, a.samples, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let ok = rows.iter().all(|r| r.deterministic_count == r.n && r.randomized_expectation <= r.bound);
            ("example31.csv", to_csv(&rows)?, ok)
        }
        Which::Example32 => {
            let ns = if a.n.is_empty() { vec![16, 64, 256] } else { a.n.clone() };
            let rows = ns
                .iter()
                .map(|&n| reproduce::example32(n, a.samples, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let ok = rows.iter().all(|r| r.random_priority <= 4.0 + verify::TOLERANCE);
            ("example32.csv", to_csv(&rows)?, ok)
        }
        Which::Constants => {
            let n = a.n.first().copied().unwrap_or(5);
            let rows = reproduce::constants(n, a.trials, seed);
            let ok = rows.iter().all(|r| r.passed);
            ("constants.csv", to_csv(&rows)?, ok)
        }
    };
    write!(out, "{csv}").map_err(io)?;
    if let Some(dir) = &a.out {
        write_out(dir, name, &csv)?;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Assertion(format!("{name}: a reproduced bound does not hold")))
    }
}
