//! Command-line front end: argument and config-file parsing, mode dispatch,
//! JSON/CSV/table rendering and the exit-code contract
//! (0 = all checks pass, 1 = verification or I/O failure, 2 = usage error).

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use std::ffi::OsString;
use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, McStats, ProtocolReport, SweepSpec};
use crate::channel::{ChannelParams, InputState};
use crate::povm::{self, PovmValidation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Enumerate,
    Montecarlo,
    VerifyPovm,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Parser)]
#[command(
    name = "wteleport",
    about = "Exact and sampled verification of two-qubit teleportation through a W-class channel",
    args_override_self = true
)]
struct Args {
    /// Channel amplitude on |001>
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Channel amplitude on |010>
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Channel amplitude on |100>
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long = "alpha-re", allow_negative_numbers = true)]
    alpha_re: Option<f64>,
    #[arg(long = "alpha-im", allow_negative_numbers = true)]
    alpha_im: Option<f64>,
    #[arg(long = "beta-re", allow_negative_numbers = true)]
    beta_re: Option<f64>,
    #[arg(long = "beta-im", allow_negative_numbers = true)]
    beta_im: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Number of Monte Carlo trials (montecarlo mode)
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep grid as param:start:stop:steps, e.g. c:0.5:0:11
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key=value file supplying any of the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub mode: Mode,
    pub trials: Option<u64>,
    pub seed: u64,
    pub sweep: Option<SweepSpec>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("config file {path}: {message}")]
    Config { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            _ => EXIT_USAGE,
        }
    }

    /// Prints the error the way clap would (help and version go to stdout).
    pub fn print(&self) {
        match self {
            CliError::Clap(e) => {
                let _ = e.print();
            }
            other => eprintln!("error: {other}"),
        }
    }
}

/// Converts `key=value` lines into `--key value` arguments. Blank lines and
/// lines starting with `#` are ignored.
fn config_args(path: &PathBuf) -> Result<Vec<OsString>, CliError> {
    let err = |message: String| CliError::Config {
        path: path.clone(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected key=value", n + 1)))?;
        let key = key.trim();
        if key == "config" {
            return Err(err(format!("line {}: nested config files are not supported", n + 1)));
        }
        out.push(OsString::from(format!("--{key}")));
        out.push(OsString::from(value.trim()));
    }
    Ok(out)
}

fn find_config(argv: &[OsString]) -> Option<PathBuf> {
    let mut found = None;
    let mut iter = argv.iter().skip(1);
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            found = iter.next().map(PathBuf::from);
        } else if let Some(rest) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(rest));
        }
    }
    found
}

/// Parses command-line arguments (including the program name). Values from a
/// `--config` file are applied first so explicit flags override them.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let mut merged: Vec<OsString> = argv.first().cloned().into_iter().collect();
    if let Some(path) = find_config(&argv) {
        merged.extend(config_args(&path)?);
    }
    merged.extend(argv.iter().skip(1).cloned());
    let args = Args::try_parse_from(merged)?;

    let require = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Usage(format!("--{name} is required")));
    let mode = args.mode.unwrap_or(Mode::Enumerate);
    let sweep = args
        .sweep
        .as_deref()
        .map(str::parse::<SweepSpec>)
        .transpose()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    match mode {
        Mode::Montecarlo => match args.trials {
            None => return Err(CliError::Usage("montecarlo mode requires --trials".into())),
            Some(0) => return Err(CliError::Usage("--trials must be at least 1".into())),
            Some(_) => {}
        },
        Mode::Sweep if sweep.is_none() => {
            return Err(CliError::Usage(
                "sweep mode requires --sweep param:start:stop:steps".into(),
            ))
        }
        _ => {}
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Ok(RunConfig {
        a: require(args.a, "a")?,
        b: require(args.b, "b")?,
        c: require(args.c, "c")?,
        alpha: Complex64::new(args.alpha_re.unwrap_or(h), args.alpha_im.unwrap_or(0.0)),
        beta: Complex64::new(args.beta_re.unwrap_or(h), args.beta_im.unwrap_or(0.0)),
        mode,
        trials: args.trials,
        seed: args.seed.unwrap_or(0),
        sweep,
        format: args.format.unwrap_or(Format::Table),
        out: args.out,
    })
}

#[derive(Serialize)]
struct ComplexJson {
    re: f64,
    im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Serialize)]
struct ParamsJson {
    a: f64,
    b: f64,
    c: f64,
    alpha: ComplexJson,
    beta: ComplexJson,
}

impl ParamsJson {
    fn new(p: &ChannelParams, s: &InputState) -> Self {
        Self {
            a: p.a(),
            b: p.b(),
            c: p.c(),
            alpha: s.alpha().into(),
            beta: s.beta().into(),
        }
    }
}

#[derive(Serialize)]
struct BranchJson {
    bell_family: &'static str,
    bell_sign: &'static str,
    vonneumann: u8,
    povm: Option<&'static str>,
    probability: f64,
    classification: &'static str,
    fidelity: Option<f64>,
}

#[derive(Serialize)]
struct PovmJson<'a> {
    set_a: &'a PovmValidation,
    set_b: &'a PovmValidation,
}

#[derive(Serialize)]
struct McJson<'a> {
    #[serde(flatten)]
    stats: &'a McStats,
    within_3_sigma: bool,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    params: ParamsJson,
    p_success_exact: f64,
    p_success_formula: f64,
    p_fail_vonneumann: f64,
    p_fail_inconclusive: f64,
    min_success_fidelity: Option<f64>,
    branches: Vec<BranchJson>,
    povm: PovmJson<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc: Option<McJson<'a>>,
    passed: bool,
}

fn branch_rows(r: &ProtocolReport) -> Vec<BranchJson> {
    r.branch_table
        .rows
        .iter()
        .map(|row| {
            let bell = row.outcomes.bell();
            BranchJson {
                bell_family: match bell.family {
                    crate::protocol::BellFamily::Phi => "Phi",
                    crate::protocol::BellFamily::Psi => "Psi",
                },
                bell_sign: bell.sign.symbol(),
                vonneumann: row.outcomes.vonneumann(),
                povm: row.outcomes.povm().map(|p| p.as_str()),
                probability: row.probability,
                classification: row.classification.as_str(),
                fidelity: row.fidelity,
            }
        })
        .collect()
}

fn report_json(r: &ProtocolReport) -> ReportJson<'_> {
    ReportJson {
        params: ParamsJson::new(&r.channel, &r.input),
        p_success_exact: r.p_success_exact,
        p_success_formula: r.p_success_formula,
        p_fail_vonneumann: r.p_fail_vonneumann_exact,
        p_fail_inconclusive: r.p_fail_inconclusive_exact,
        min_success_fidelity: r.min_success_fidelity,
        branches: branch_rows(r),
        povm: PovmJson {
            set_a: &r.povm_a,
            set_b: &r.povm_b,
        },
        mc: r.mc.as_ref().map(|stats| McJson {
            stats,
            within_3_sigma: stats.within_sigma(r.p_success_formula, 3.0),
        }),
        passed: r.passed(),
    }
}

#[derive(Serialize)]
struct SweepJson<'a> {
    sweep: &'a SweepSpec,
    reports: Vec<ReportJson<'a>>,
}

#[derive(Serialize)]
struct VerifyPovmJson<'a> {
    params: ParamsJson,
    x1: f64,
    y1: f64,
    povm: PovmJson<'a>,
    passed: bool,
}

/// Everything a run produced, before rendering.
enum Outcome {
    Report(ProtocolReport),
    Sweep(SweepSpec, Vec<ProtocolReport>),
    Povm {
        channel: ChannelParams,
        input: InputState,
        x1: f64,
        y1: f64,
        set_a: PovmValidation,
        set_b: PovmValidation,
    },
}

impl Outcome {
    fn failed_checks(&self) -> Vec<String> {
        match self {
            Outcome::Report(r) => r.failed_checks(),
            Outcome::Sweep(_, reports) => reports
                .iter()
                .enumerate()
                .flat_map(|(i, r)| r.failed_checks().into_iter().map(move |m| format!("point {i}: {m}")))
                .collect(),
            Outcome::Povm { set_a, set_b, .. } => [("set_a", set_a), ("set_b", set_b)]
                .into_iter()
                .filter(|(_, v)| !v.passed)
                .map(|(n, _)| format!("POVM {n} failed validation"))
                .collect(),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

fn render_json(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Report(r) => to_json(&report_json(r)),
        Outcome::Sweep(spec, reports) => to_json(&SweepJson {
            sweep: spec,
            reports: reports.iter().map(report_json).collect(),
        }),
        Outcome::Povm {
            channel,
            input,
            x1,
            y1,
            set_a,
            set_b,
        } => to_json(&VerifyPovmJson {
            params: ParamsJson::new(channel, input),
            x1: *x1,
            y1: *y1,
            povm: PovmJson { set_a, set_b },
            passed: set_a.passed && set_b.passed,
        }),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render_csv(outcome: &Outcome) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match outcome {
        Outcome::Report(r) => {
            w.write_record([
                "bell_family",
                "bell_sign",
                "vonneumann",
                "povm",
                "probability",
                "classification",
                "fidelity",
            ])?;
            for b in branch_rows(r) {
                w.write_record([
                    b.bell_family.to_string(),
                    b.bell_sign.to_string(),
                    b.vonneumann.to_string(),
                    b.povm.unwrap_or_default().to_string(),
                    b.probability.to_string(),
                    b.classification.to_string(),
                    opt(b.fidelity),
                ])?;
            }
        }
        Outcome::Sweep(_, reports) => {
            w.write_record([
                "index",
                "a",
                "b",
                "c",
                "p_success_exact",
                "p_success_formula",
                "p_fail_vonneumann",
                "p_fail_inconclusive",
                "min_success_fidelity",
            ])?;
            for (i, r) in reports.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    r.channel.a().to_string(),
                    r.channel.b().to_string(),
                    r.channel.c().to_string(),
                    r.p_success_exact.to_string(),
                    r.p_success_formula.to_string(),
                    r.p_fail_vonneumann_exact.to_string(),
                    r.p_fail_inconclusive_exact.to_string(),
                    opt(r.min_success_fidelity),
                ])?;
            }
        }
        Outcome::Povm { set_a, set_b, .. } => {
            w.write_record([
                "set",
                "completeness_residual",
                "min_eigenvalue",
                "unambiguity_residual",
                "conclusive_probability",
                "passed",
            ])?;
            for (name, v) in [("set_a", set_a), ("set_b", set_b)] {
                w.write_record([
                    name.to_string(),
                    v.completeness_residual.to_string(),
                    v.min_eigenvalue.to_string(),
                    v.unambiguity_residual.to_string(),
                    v.conclusive_probability.to_string(),
                    v.passed.to_string(),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

struct Style {
    color: bool,
}

impl Style {
    fn verdict(&self, ok: bool) -> String {
        let (text, code) = if ok { ("PASS", "32") } else { ("FAIL", "31") };
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }
}

fn table_report(out: &mut String, r: &ProtocolReport, style: &Style) {
    use std::fmt::Write as _;
    let (p, s) = (&r.channel, &r.input);
    let _ = writeln!(out, "channel  a = {:.6}  b = {:.6}  c = {:.6}", p.a(), p.b(), p.c());
    let _ = writeln!(out, "input    alpha = {:.6}  beta = {:.6}", s.alpha(), s.beta());
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<6} {:>2} {:<13} {:>22} {:<18} {:>20}",
        "bell", "vn", "povm", "probability", "class", "fidelity"
    );
    for row in &r.branch_table.rows {
        let _ = writeln!(
            out,
            "{:<6} {:>2} {:<13} {:>22.15e} {:<18} {:>20}",
            row.outcomes.bell().to_string(),
            row.outcomes.vonneumann(),
            row.outcomes.povm().map(|p| p.as_str()).unwrap_or("-"),
            row.probability,
            row.classification.as_str(),
            row.fidelity.map(|f| format!("{f:.15}")).unwrap_or_else(|| "-".into()),
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "P(success)          {:.15}   (2b^2 = {:.15})",
        r.p_success_exact, r.p_success_formula
    );
    let _ = writeln!(out, "P(fail, von Neumann) {:.15}", r.p_fail_vonneumann_exact);
    let _ = writeln!(out, "P(fail, inconclusive) {:.15}", r.p_fail_inconclusive_exact);
    match r.min_success_fidelity {
        Some(f) => {
            let _ = writeln!(out, "min success fidelity {f:.15}");
        }
        None => {
            let _ = writeln!(out, "min success fidelity -  (no reachable success leaf)");
        }
    }
    for (name, v) in [("A", &r.povm_a), ("B", &r.povm_b)] {
        let _ = writeln!(
            out,
            "POVM set {name}: {}  completeness {:.3e}  min eig {:.3e}  unambiguity {:.3e}  conclusive {:.15}",
            style.verdict(v.passed),
            v.completeness_residual,
            v.min_eigenvalue,
            v.unambiguity_residual,
            v.conclusive_probability
        );
    }
    if let Some(mc) = &r.mc {
        let _ = writeln!(
            out,
            "Monte Carlo: {} trials, seed {}, p_hat = {:.6} +/- {:.6}  ({} within 3 sigma of 2b^2)",
            mc.trials,
            mc.seed,
            mc.p_hat,
            mc.std_err,
            style.verdict(mc.within_sigma(r.p_success_formula, 3.0))
        );
    }
    let _ = writeln!(out, "checks: {}", style.verdict(r.passed()));
}

fn render_table(outcome: &Outcome, style: &Style) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    match outcome {
        Outcome::Report(r) => table_report(&mut out, r, style),
        Outcome::Sweep(spec, reports) => {
            let _ = writeln!(out, "sweep {spec}");
            let _ = writeln!(
                out,
                "{:>5} {:>10} {:>10} {:>10} {:>20} {:>20}  checks",
                "index", "a", "b", "c", "P(success)", "2b^2"
            );
            for (i, r) in reports.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{i:>5} {:>10.6} {:>10.6} {:>10.6} {:>20.15} {:>20.15}  {}",
                    r.channel.a(),
                    r.channel.b(),
                    r.channel.c(),
                    r.p_success_exact,
                    r.p_success_formula,
                    style.verdict(r.passed())
                );
            }
        }
        Outcome::Povm {
            x1, y1, set_a, set_b, ..
        } => {
            let _ = writeln!(out, "x1 = {x1:.15}  y1 = {y1:.15}  2*y1^2 = {:.15}", 2.0 * y1 * y1);
            for (name, v) in [("A", set_a), ("B", set_b)] {
                let _ = writeln!(
                    out,
                    "set {name}: {}  completeness {:.3e}  min eig {:.3e}  unambiguity {:.3e}  conclusive {:.15}",
                    style.verdict(v.passed),
                    v.completeness_residual,
                    v.min_eigenvalue,
                    v.unambiguity_residual,
                    v.conclusive_probability
                );
            }
        }
    }
    out
}

fn execute(config: &RunConfig) -> Result<Outcome, AnalysisError> {
    let channel = ChannelParams::new(config.a, config.b, config.c)?;
    let input = InputState::new(config.alpha, config.beta)?;
    Ok(match config.mode {
        Mode::Enumerate => Outcome::Report(analysis::report(&channel, &input, None)?),
        Mode::Montecarlo => {
            let trials = config.trials.ok_or(AnalysisError::ZeroTrials)?;
            Outcome::Report(analysis::report(&channel, &input, Some((trials, config.seed)))?)
        }
        Mode::VerifyPovm => {
            let d = povm::derive_params(&channel);
            Outcome::Povm {
                channel,
                input,
                x1: d.x1(),
                y1: d.y1(),
                set_a: povm::validate(&povm::build_set_a(&d)),
                set_b: povm::validate(&povm::build_set_b(&d)),
            }
        }
        Mode::Sweep => {
            let spec = config
                .sweep
                .ok_or_else(|| AnalysisError::SweepSpec("missing sweep specification".into()))?;
            let grid = spec.grid([channel.a(), channel.b(), channel.c()])?;
            Outcome::Sweep(spec, analysis::sweep(&grid, &input)?)
        }
    })
}

fn is_usage_error(e: &AnalysisError) -> bool {
    matches!(
        e,
        AnalysisError::Param(_)
            | AnalysisError::ZeroTrials
            | AnalysisError::SweepPoint { .. }
            | AnalysisError::SweepSpec(_)
    )
}

/// Renders the report for `config` without touching the configured sink.
pub fn render(config: &RunConfig, color: bool) -> Result<(String, Vec<String>), AnalysisError> {
    let outcome = execute(config)?;
    let text = match config.format {
        Format::Json => render_json(&outcome),
        Format::Csv => render_csv(&outcome).expect("in-memory CSV writer"),
        Format::Table => render_table(&outcome, &Style { color }),
    };
    Ok((text, outcome.failed_checks()))
}

/// Runs one configuration, writing the report to `--out` or `stdout` and
/// diagnostics to `stderr`. Returns the process exit code.
pub fn run_with(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let color = config.format == Format::Table
        && config.out.is_none()
        && std::env::var_os("NO_COLOR").is_none()
        && std::io::stdout().is_terminal();
    let (text, failed) = match render(config, color) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return if is_usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_VERIFICATION
            };
        }
    };
    emit(config.out.as_deref(), &text, &failed, stdout, stderr)
}

/// Writes `text` to `out` (or `stdout`) and maps the result and the list of
/// failed checks to an exit code.
pub fn emit(out: Option<&Path>, text: &str, failed: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let written = match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => stdout
            .write_all(text.as_bytes())
            .and_then(|_| stdout.flush())
            .map_err(|e| format!("cannot write report: {e}")),
    };
    if let Err(msg) = written {
        let _ = writeln!(stderr, "error: {msg}");
        return EXIT_VERIFICATION;
    }
    if failed.is_empty() {
        EXIT_OK
    } else {
        for m in failed {
            let _ = writeln!(stderr, "verification failed: {m}");
        }
        EXIT_VERIFICATION
    }
}

pub fn run(config: &RunConfig) -> i32 {
    run_with(config, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Full entry point: parse, run, return the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    match parse_args(argv) {
        Ok(config) => run(&config),
        Err(e) => {
            e.print();
            e.exit_code()
        }
    }
}
