//! Command-line surface: configuration merging, dispatch to the compute
//! modules and byte-deterministic CSV/JSON emission.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::asymptotics_lab::{
    audit_bounds, chernoff_tail, chernoff_tail_with, lyapunov_fit, rate_function, AuditReport, AuditSuite, GridSpec,
};
use crate::error::Error;
use crate::fredholm_pfaffian::{goe_cdf, laplace_transform, FredholmContext, DEFAULT_L_MAX, DEFAULT_M};
use crate::goe_kernel::{correlation, k_entry, EvaluationPoints, Formula, KernelEntrySelector, DEFAULT_WINDOW};
use crate::quadrature::LogValue;
use crate::she_moments::{fractional_moment_with, leading_term, moment_params, Route};
use crate::special_functions::{airy, airy_tail};

/// Exit status for a successful run.
pub const EXIT_OK: u8 = 0;
/// Exit status for rejected input or configuration.
pub const EXIT_VALIDATION: u8 = 1;
/// Exit status for a failed computation.
pub const EXIT_NUMERIC: u8 = 2;

const DEFAULT_P_GRID: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Airy,
    Kernel,
    Correlation,
    Laplace,
    GoeCdf,
    Moments,
    Lyapunov,
    Tail,
    Audit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Airy => "airy",
            Command::Kernel => "kernel",
            Command::Correlation => "correlation",
            Command::Laplace => "laplace",
            Command::GoeCdf => "goe-cdf",
            Command::Moments => "moments",
            Command::Lyapunov => "lyapunov",
            Command::Tail => "tail",
            Command::Audit => "audit",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A failed run: exit status plus the sub-computation that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub context: String,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, context: "configuration".into(), message: message.into() }
    }

    fn from_lib(e: Error, context: impl Into<String>) -> Self {
        let code = match e {
            _ if e.is_validation() => EXIT_VALIDATION,
            Error::Io(_) => EXIT_VALIDATION,
            _ => EXIT_NUMERIC,
        };
        CliError { code, context: context.into(), message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.code == EXIT_NUMERIC { "numeric failure" } else { "invalid input" };
        write!(f, "{kind} in {}: {}", self.context, self.message)
    }
}

impl std::error::Error for CliError {}

type CliResult<T> = std::result::Result<T, CliError>;

// ---- argument parsing ----

#[derive(Debug, Parser)]
#[command(name = "shelab", version, about = "GOE-Airy Pfaffian kernels, Fredholm Pfaffians and half-line SHE moment asymptotics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

/// Flags accepted by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// Config file (TOML, sections [grid], [params], [audit], [output]); flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Quadrature window lo:hi
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Quadrature nodes (multiple of 10)
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Highest series order L
    #[arg(long, global = true)]
    pub lmax: Option<usize>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ListArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub s: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub t: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub s0: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Ai, Ai' and the tails of Ai and Ai^2 at each --x
    #[command(after_help = "Anchor: Ai(x), T(x) = int_x^inf Ai, int_x^inf Ai^2; accurate on [-30, 30].")]
    Airy {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = false)]
        x: Vec<f64>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Kernel entries K11, K12, K21, K22 on the grid --x by --y
    #[command(after_help = "Anchor: GOE Pfaffian kernel, K12(x,y) = int_0^inf Ai(x+l)Ai(y+l)dl + Ai(x)(1 - T(y))/2.")]
    Kernel {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// L-point correlation rho_L at the points --x
    #[command(after_help = "Anchor: rho_L(x_1, ..., x_L) = Pf[K(x_i, x_j)].")]
    Correlation {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Laplace transform of the half-line SHE at each (--s, --t)
    #[command(after_help = "Anchor: E[exp(-s Z e^{t/12})] = Pf[J + K] on L^2(phi_{s,t} dx), phi_{s,t}(x) = -s e^{t^{1/3} x}/(1 + s e^{t^{1/3} x}).\nUses --window, --m, --lmax.")]
    Laplace {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        s: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        t: Vec<f64>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// GOE Tracy-Widom distribution function at each --s0
    #[command(after_help = "Anchor: lim P(...) = GOE(s), the Fredholm Pfaffian of -1_{(s, inf)}.\nUses --window (upper end), --m.")]
    GoeCdf {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        s0: Vec<f64>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Fractional moment decomposition at each (--p, --t)
    #[command(after_help = "Anchor: E[X^p] = A_p(t) + sum_{L>=2} B_{p,L}(t) + R_p(t), R_p bounded.\nUses --lmax (1 to 3) and --m for the B_{p,L} tensors; t <= 30 when lmax > 1.")]
    Moments {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        t: Vec<f64>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Fit log A_p(t) = a t + b log t + c over --t for each --p
    #[command(after_help = "Anchor: (1/t) log E[X^p] -> p^3/3.\nCSV output writes the fit record to <out>.fit.json (stderr without --out).")]
    Lyapunov {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        t: Vec<f64>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Chernoff estimate of the upper-tail rate at each --s and --t
    #[command(after_help = "Anchor: Phi_+(s) = sup_p (p s - p^3/3) = (2/3) s^{3/2}.\n--p sets the search grid (default 0.25..2 step 0.25); --lmax fixes the moment order.")]
    Tail {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        s: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        t: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Fit-and-verify audit of a bound family
    #[command(after_help = "Anchor: bounds on K12(x,x), the Pfaffian kernel, rho_L, phi_{s,t}, the V_n/U_n profiles, their integrals and B_{p,L}.\nSuites: k12, kernel, pf, phi, laplace_profiles, integration, bpl, all.")]
    Audit {
        #[arg(long)]
        suite: Option<String>,
        /// Points per axis in the base pass
        #[arg(long)]
        density: Option<usize>,
        #[command(flatten)]
        shared: SharedArgs,
    },
}

// ---- configuration ----

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub window: Option<String>,
    pub m: Option<usize>,
    pub lmax: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub s0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub suite: Option<String>,
    pub density: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config file: {}", e.message())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Fully merged settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub window: Option<(f64, f64)>,
    pub m: Option<usize>,
    pub l_max: Option<usize>,
    pub x_list: Vec<f64>,
    pub y_list: Vec<f64>,
    pub s_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub p_list: Vec<f64>,
    pub s0_list: Vec<f64>,
    pub suite: Option<String>,
    pub density: Option<usize>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

pub fn parse_window(text: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::validation(format!("--window expects lo:hi with lo < hi, got '{text}'"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn pick(flag: Vec<f64>, file: Option<Vec<f64>>) -> Vec<f64> {
    if flag.is_empty() {
        file.unwrap_or_default()
    } else {
        flag
    }
}

impl RunConfig {
    /// Merges parsed flags over the config file named by `--config`, if any.
    pub fn from_cli(cli: Cli) -> CliResult<Self> {
        let (command, lists, shared, suite, density) = match cli.command {
            CliCommand::Airy { x, shared } => (Command::Airy, ListArgs { x, ..Default::default() }, shared, None, None),
            CliCommand::Kernel { x, y, shared } => {
                (Command::Kernel, ListArgs { x, y, ..Default::default() }, shared, None, None)
            }
            CliCommand::Correlation { x, shared } => {
                (Command::Correlation, ListArgs { x, ..Default::default() }, shared, None, None)
            }
            CliCommand::Laplace { s, t, shared } => {
                (Command::Laplace, ListArgs { s, t, ..Default::default() }, shared, None, None)
            }
            CliCommand::GoeCdf { s0, shared } => {
                (Command::GoeCdf, ListArgs { s0, ..Default::default() }, shared, None, None)
            }
            CliCommand::Moments { p, t, shared } => {
                (Command::Moments, ListArgs { p, t, ..Default::default() }, shared, None, None)
            }
            CliCommand::Lyapunov { p, t, shared } => {
                (Command::Lyapunov, ListArgs { p, t, ..Default::default() }, shared, None, None)
            }
            CliCommand::Tail { s, t, p, shared } => {
                (Command::Tail, ListArgs { s, t, p, ..Default::default() }, shared, None, None)
            }
            CliCommand::Audit { suite, density, shared } => {
                (Command::Audit, ListArgs::default(), shared, suite, density)
            }
        };
        let file = match &shared.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::merge(command, lists, shared, suite, density, file)
    }

    fn merge(
        command: Command,
        lists: ListArgs,
        shared: SharedArgs,
        suite: Option<String>,
        density: Option<usize>,
        file: FileConfig,
    ) -> CliResult<Self> {
        let window = match shared.window.or(file.grid.window) {
            Some(w) => Some(parse_window(&w)?),
            None => None,
        };
        let cfg = RunConfig {
            command,
            window,
            m: shared.m.or(file.grid.m),
            l_max: shared.lmax.or(file.grid.lmax),
            x_list: pick(lists.x, file.params.x),
            y_list: pick(lists.y, file.params.y),
            s_list: pick(lists.s, file.params.s),
            t_list: pick(lists.t, file.params.t),
            p_list: pick(lists.p, file.params.p),
            s0_list: pick(lists.s0, file.params.s0),
            suite: suite.or(file.audit.suite),
            density: density.or(file.audit.density),
            output_path: shared.out.or(file.output.out),
            format: shared.format.or(file.output.format).unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn require(&self, name: &str, list: &[f64]) -> CliResult<()> {
        if list.is_empty() {
            return Err(CliError::validation(format!(
                "{} needs --{name} (comma-separated) or {name} = [...] under [params] in the config file",
                self.command
            )));
        }
        if let Some(v) = list.iter().find(|v| !v.is_finite()) {
            return Err(CliError::validation(format!("--{name} contains a non-finite value {v}")));
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.m == Some(0) || self.l_max == Some(0) || self.density == Some(0) {
            return Err(CliError::validation("--m, --lmax and --density must be positive"));
        }
        match self.command {
            Command::Airy | Command::Correlation => self.require("x", &self.x_list),
            Command::Kernel => {
                self.require("x", &self.x_list)?;
                self.require("y", &self.y_list)
            }
            Command::Laplace => {
                self.require("s", &self.s_list)?;
                self.require("t", &self.t_list)
            }
            Command::GoeCdf => self.require("s0", &self.s0_list),
            Command::Moments | Command::Lyapunov => {
                self.require("p", &self.p_list)?;
                self.require("t", &self.t_list)
            }
            Command::Tail => {
                self.require("s", &self.s_list)?;
                self.require("t", &self.t_list)?;
                if !self.p_list.is_empty() {
                    self.require("p", &self.p_list)?;
                }
                Ok(())
            }
            Command::Audit => {
                let suite = self.suite.as_deref().ok_or_else(|| {
                    CliError::validation("audit needs --suite (a suite name or 'all') or suite under [audit]")
                })?;
                self.suites_for(suite).map(|_| ())
            }
        }
    }

    fn suites_for(&self, suite: &str) -> CliResult<Vec<AuditSuite>> {
        if suite == "all" {
            return Ok(AuditSuite::ALL.to_vec());
        }
        suite.parse::<AuditSuite>().map(|s| vec![s]).map_err(|e| CliError::from_lib(e, "--suite"))
    }

    fn params_record(&self) -> Map<String, Value> {
        let mut m = Map::new();
        if let Some((lo, hi)) = self.window {
            m.insert("window".into(), json!([lo, hi]));
        }
        if let Some(v) = self.m {
            m.insert("m".into(), json!(v));
        }
        if let Some(v) = self.l_max {
            m.insert("lmax".into(), json!(v));
        }
        for (name, list) in [
            ("x", &self.x_list),
            ("y", &self.y_list),
            ("s", &self.s_list),
            ("t", &self.t_list),
            ("p", &self.p_list),
            ("s0", &self.s0_list),
        ] {
            if !list.is_empty() {
                m.insert(name.into(), json!(list));
            }
        }
        if let Some(s) = &self.suite {
            m.insert("suite".into(), json!(s));
        }
        if let Some(d) = self.density {
            m.insert("density".into(), json!(d));
        }
        m
    }
}

// ---- reports ----

/// Tabular result of one command, plus any non-tabular records.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Command,
    pub params: Map<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub extra: Map<String, Value>,
}

impl Report {
    fn new(cfg: &RunConfig, columns: Vec<&'static str>) -> Self {
        Report { command: cfg.command, params: cfg.params_record(), columns, rows: Vec::new(), extra: Map::new() }
    }

    /// The single top-level JSON object.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), json!(self.command.name()));
        m.insert("params".into(), Value::Object(self.params.clone()));
        m.insert("columns".into(), json!(self.columns));
        m.insert("rows".into(), Value::Array(self.rows.iter().map(|r| Value::Array(r.clone())).collect()));
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }
}

fn num(x: f64) -> Value {
    // non-finite values have no JSON number form; they travel as null
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn log_value_cells(v: Option<LogValue>) -> [Value; 2] {
    match v {
        Some(l) => [json!(l.sign), num(l.log_mag)],
        None => [Value::Null, Value::Null],
    }
}

/// Float text with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn write_json(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => out.push_str(&i.to_string()),
            (_, Some(u)) => out.push_str(&u.to_string()),
            _ => out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            // serde_json's map is ordered by key, so iteration is sorted
            out.push('{');
            for (i, (k, x)) in m.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_json(x, out);
            }
            out.push('}');
        }
    }
}

/// Compact JSON with sorted keys and 17-digit floats, newline-terminated.
pub fn render_json(v: &Value) -> String {
    let mut s = String::new();
    write_json(v, &mut s);
    s.push('\n');
    s
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.to_string(),
            (_, Some(u)) => u.to_string(),
            _ => format_float(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => s.clone(),
        other => render_json(other).trim_end().to_string(),
    }
}

/// Header row plus one line per row, `\n`-terminated.
pub fn render_csv(report: &Report) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| CliError::from_lib(Error::Io(e.to_string()), "csv output");
    w.write_record(&report.columns).map_err(io)?;
    for row in &report.rows {
        w.write_record(row.iter().map(csv_cell)).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::from_lib(Error::Io(e.to_string()), "csv output"))?;
    String::from_utf8(bytes).map_err(|e| CliError::from_lib(Error::Io(e.to_string()), "csv output"))
}

/// Writes `report` in `format` to `path`, or returns the text for stdout.
/// Lyapunov fits ride along as a `<path>.fit.json` sidecar in CSV mode.
pub fn emit_report(report: &Report, format: Format, path: Option<&Path>) -> CliResult<Emitted> {
    let main = match format {
        Format::Json => render_json(&report.to_json()),
        Format::Csv => render_csv(report)?,
    };
    let sidecar = match (format, report.extra.get("fits")) {
        (Format::Csv, Some(fits)) => Some(render_json(&json!({ "fits": fits }))),
        _ => None,
    };
    let write = |p: &Path, text: &str| {
        fs::write(p, text).map_err(|e| CliError::from_lib(Error::from(e), format!("writing {}", p.display())))
    };
    if let Some(p) = path {
        write(p, &main)?;
        if let Some(side) = &sidecar {
            write(&p.with_extension("fit.json"), side)?;
        }
    }
    Ok(Emitted { main, sidecar })
}

/// Text produced by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub main: String,
    pub sidecar: Option<String>,
}

// ---- dispatch ----

fn context_for(cfg: &RunConfig) -> CliResult<FredholmContext> {
    FredholmContext::new(
        cfg.window.unwrap_or(DEFAULT_WINDOW),
        cfg.m.unwrap_or(DEFAULT_M),
        cfg.l_max.unwrap_or(DEFAULT_L_MAX),
    )
    .map_err(|e| CliError::from_lib(e, "quadrature setup"))
}

fn wrap<T>(r: crate::Result<T>, ctx: impl FnOnce() -> String) -> CliResult<T> {
    r.map_err(|e| CliError::from_lib(e, ctx()))
}

/// Executes the configured command and returns its report.
pub fn compute(cfg: &RunConfig) -> CliResult<Report> {
    match cfg.command {
        Command::Airy => {
            let mut rep = Report::new(cfg, vec!["x", "ai", "ai_prime", "upper_tail", "square_tail"]);
            for &x in &cfg.x_list {
                let a = wrap(airy(x), || format!("airy(x={x:?})"))?;
                let tl = wrap(airy_tail(x), || format!("airy_tail(x={x:?})"))?;
                rep.rows.push(vec![num(x), num(a.ai), num(a.ai_prime), num(tl.upper_tail), num(tl.square_tail)]);
            }
            Ok(rep)
        }
        Command::Kernel => {
            let mut rep = Report::new(cfg, vec!["x", "y", "k11", "k12", "k21", "k22"]);
            for &x in &cfg.x_list {
                for &y in &cfg.y_list {
                    let mut row = vec![num(x), num(y)];
                    for sel in
                        [KernelEntrySelector::K11, KernelEntrySelector::K12, KernelEntrySelector::K21, KernelEntrySelector::K22]
                    {
                        let v = wrap(k_entry(sel, x, y, Formula::Primary), || {
                            format!("kernel K{}{}(x={x:?}, y={y:?})", sel.row_kind, sel.col_kind)
                        })?;
                        row.push(num(v));
                    }
                    rep.rows.push(row);
                }
            }
            Ok(rep)
        }
        Command::Correlation => {
            let mut rep = Report::new(cfg, vec!["points", "rho"]);
            let pts = wrap(EvaluationPoints::new(cfg.x_list.clone()), || "correlation points".into())?;
            let rho = wrap(correlation(&pts), || format!("correlation(L={})", pts.len()))?;
            rep.rows.push(vec![json!(pts.len()), num(rho)]);
            Ok(rep)
        }
        Command::Laplace => {
            let ctx = context_for(cfg)?;
            let mut rep = Report::new(cfg, vec!["s", "t", "laplace"]);
            for &t in &cfg.t_list {
                for &s in &cfg.s_list {
                    let v = wrap(laplace_transform(s, t, &ctx), || format!("laplace_transform(s={s:?}, t={t:?})"))?;
                    rep.rows.push(vec![num(s), num(t), num(v)]);
                }
            }
            Ok(rep)
        }
        Command::GoeCdf => {
            let ctx = context_for(cfg)?;
            let mut rep = Report::new(cfg, vec!["s0", "F"]);
            for &s0 in &cfg.s0_list {
                let v = wrap(goe_cdf(s0, &ctx), || format!("goe_cdf(s0={s0:?})"))?;
                rep.rows.push(vec![num(s0), num(v)]);
            }
            Ok(rep)
        }
        Command::Moments => {
            let l_max = cfg.l_max.unwrap_or(DEFAULT_L_MAX);
            let m = cfg.m.unwrap_or(DEFAULT_M);
            let mut rep = Report::new(
                cfg,
                vec![
                    "p",
                    "t",
                    "n",
                    "alpha",
                    "sign_leading",
                    "log_leading",
                    "sign_b2",
                    "log_abs_b2",
                    "sign_b3",
                    "log_abs_b3",
                    "sign_total",
                    "log_total",
                    "remainder_bound",
                ],
            );
            for &p in &cfg.p_list {
                for &t in &cfg.t_list {
                    let params = wrap(moment_params(p, t), || format!("moment_params(p={p:?}, t={t:?})"))?;
                    let b = wrap(fractional_moment_with(&params, l_max, m), || {
                        format!("fractional_moment(p={p:?}, t={t:?}, lmax={l_max})")
                    })?;
                    let mut row = vec![num(p), num(t), json!(params.n), num(params.alpha)];
                    row.extend(log_value_cells(Some(b.leading)));
                    row.extend(log_value_cells(b.higher.first().copied()));
                    row.extend(log_value_cells(b.higher.get(1).copied()));
                    row.extend(log_value_cells(Some(b.total)));
                    row.push(num(b.remainder_bound));
                    rep.rows.push(row);
                }
            }
            Ok(rep)
        }
        Command::Lyapunov => {
            let mut rep = Report::new(cfg, vec!["p", "t", "log_A"]);
            let mut fits = Vec::new();
            for &p in &cfg.p_list {
                let mut samples = Vec::new();
                for &t in &cfg.t_list {
                    let params = wrap(moment_params(p, t), || format!("moment_params(p={p:?}, t={t:?})"))?;
                    let a = wrap(leading_term(&params, Route::Split), || format!("leading_term(p={p:?}, t={t:?})"))?;
                    rep.rows.push(vec![num(p), num(t), num(a.log_mag)]);
                    samples.push((t, a.log_mag));
                }
                let f = wrap(lyapunov_fit(&samples), || format!("lyapunov_fit(p={p:?})"))?;
                fits.push(json!({
                    "p": num(p),
                    "slope": num(f.slope),
                    "log_coeff": num(f.log_coeff),
                    "intercept": num(f.intercept),
                    "residual": num(f.residual),
                    "target_slope": num(p * p * p / 3.0),
                }));
            }
            rep.extra.insert("fits".into(), Value::Array(fits));
            Ok(rep)
        }
        Command::Tail => {
            let grid = if cfg.p_list.is_empty() { DEFAULT_P_GRID.to_vec() } else { cfg.p_list.clone() };
            let mut rep = Report::new(cfg, vec!["s", "t", "estimate", "closed_form"]);
            for &t in &cfg.t_list {
                for &s in &cfg.s_list {
                    let what = || format!("chernoff_tail(s={s:?}, t={t:?})");
                    let est = match cfg.l_max {
                        None => wrap(chernoff_tail(s, t, &grid), what)?,
                        Some(l) => {
                            let m = cfg.m.unwrap_or(DEFAULT_M);
                            let log_moment =
                                |p, t| fractional_moment_with(&moment_params(p, t)?, l, m)?.total.ln();
                            wrap(chernoff_tail_with(s, t, &grid, log_moment), what)?.0
                        }
                    };
                    let closed = wrap(rate_function(s), || format!("rate_function(s={s:?})"))?.0;
                    rep.rows.push(vec![num(s), num(t), num(est), num(closed)]);
                }
            }
            Ok(rep)
        }
        Command::Audit => {
            let suites = cfg.suites_for(cfg.suite.as_deref().unwrap_or("all"))?;
            let grid = cfg.density.map(|density| GridSpec { density }).unwrap_or_default();
            let mut rep = Report::new(
                cfg,
                vec![
                    "suite",
                    "kind",
                    "name",
                    "constant",
                    "refined_constant",
                    "drift",
                    "violations",
                    "non_finite",
                    "samples",
                    "value",
                    "limit",
                    "pass",
                ],
            );
            let mut reports = Vec::new();
            for suite in suites {
                let r = wrap(audit_bounds(suite, &grid), || format!("audit_bounds({suite})"))?;
                audit_rows(&r, &mut rep.rows);
                reports.push(audit_json(&r));
            }
            rep.extra.insert("reports".into(), Value::Array(reports));
            Ok(rep)
        }
    }
}

fn audit_rows(r: &AuditReport, rows: &mut Vec<Vec<Value>>) {
    let suite = json!(r.suite.name());
    for e in &r.entries {
        rows.push(vec![
            suite.clone(),
            json!("bound"),
            json!(e.inequality),
            num(e.constant),
            num(e.refined_constant),
            num(e.drift),
            json!(e.violations),
            json!(e.non_finite),
            json!(e.samples),
            Value::Null,
            Value::Null,
            json!(e.passes()),
        ]);
    }
    for c in &r.checks {
        rows.push(vec![
            suite.clone(),
            json!("check"),
            json!(c.name),
            Value::Null,
            Value::Null,
            Value::Null,
            Value::Null,
            Value::Null,
            Value::Null,
            num(c.value),
            num(c.limit),
            json!(c.pass),
        ]);
    }
}

fn audit_json(r: &AuditReport) -> Value {
    let entries: Vec<Value> = r
        .entries
        .iter()
        .map(|e| {
            json!({
                "inequality": e.inequality,
                "constant": num(e.constant),
                "refined_constant": num(e.refined_constant),
                "drift": num(e.drift),
                "violations": e.violations,
                "non_finite": e.non_finite,
                "samples": e.samples,
                "pass": e.passes(),
            })
        })
        .collect();
    let checks: Vec<Value> = r
        .checks
        .iter()
        .map(|c| json!({ "name": c.name, "value": num(c.value), "limit": num(c.limit), "pass": c.pass }))
        .collect();
    json!({
        "suite": r.suite.name(),
        "density": r.density,
        "entries": entries,
        "checks": checks,
        "pass": r.passes(),
    })
}

/// Computes and emits; the returned text is what belongs on stdout.
pub fn run(cfg: &RunConfig) -> CliResult<Emitted> {
    let report = compute(cfg)?;
    emit_report(&report, cfg.format, cfg.output_path.as_deref())
}

/// Entry point shared by the binary: parses `args`, runs, and returns the
/// exit status together with stdout and stderr text.
pub fn main_with_args<I, T>(args: I) -> (u8, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() { (EXIT_VALIDATION, String::new(), text) } else { (EXIT_OK, text, String::new()) };
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|cfg| {
        let emitted = run(&cfg)?;
        Ok((cfg, emitted))
    });
    match result {
        Ok((cfg, emitted)) => {
            let stdout = if cfg.output_path.is_none() { emitted.main } else { String::new() };
            let stderr = match (&cfg.output_path, emitted.sidecar) {
                (None, Some(side)) => side,
                _ => String::new(),
            };
            (EXIT_OK, stdout, stderr)
        }
        Err(e) => (e.code, String::new(), format!("shelab: {e}\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> CliResult<RunConfig> {
        let mut full = vec!["shelab"];
        full.extend_from_slice(args);
        RunConfig::from_cli(Cli::try_parse_from(full).map_err(|e| CliError::validation(e.to_string()))?)
    }

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window("-12:12").unwrap(), (-12.0, 12.0));
        assert!(parse_window("3:1").is_err());
        assert!(parse_window("3").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = FileConfig::parse("[grid]\nm = 40\nwindow = \"-8:8\"\n[params]\ns0 = [-2, 0.5]\n").unwrap();
        let mut shared = SharedArgs { m: Some(60), ..Default::default() };
        let c = RunConfig::merge(Command::GoeCdf, ListArgs::default(), shared.clone(), None, None, file.clone()).unwrap();
        assert_eq!((c.m, c.window, c.s0_list.clone()), (Some(60), Some((-8.0, 8.0)), vec![-2.0, 0.5]));
        shared.window = Some("-6:10".into());
        let lists = ListArgs { s0: vec![1.0], ..Default::default() };
        let c = RunConfig::merge(Command::GoeCdf, lists, shared, None, None, file).unwrap();
        assert_eq!((c.window, c.s0_list), (Some((-6.0, 10.0)), vec![1.0]));
    }

    #[test]
    fn unknown_config_keys_rejected() {
        assert!(FileConfig::parse("[grid]\nmm = 3\n").is_err());
    }

    #[test]
    fn missing_lists_are_validation_errors() {
        let e = cfg(&["goe-cdf"]).unwrap_err();
        assert_eq!(e.code, EXIT_VALIDATION);
        assert!(e.message.contains("--s0"));
        assert_eq!(cfg(&["audit", "--suite", "nope"]).unwrap_err().code, EXIT_VALIDATION);
    }

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.0), "-2.0000000000000000e0");
        let v: f64 = format_float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn json_is_sorted_and_terminated() {
        let text = render_json(&json!({"b": 1, "a": [0.5, null, "x,y"]}));
        assert_eq!(text, "{\"a\":[5.0000000000000000e-1,null,\"x,y\"],\"b\":1}\n");
    }

    #[test]
    fn airy_csv() {
        let c = cfg(&["airy", "--x", "0,-1"]).unwrap();
        let text = render_csv(&compute(&c).unwrap()).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], "x,ai,ai_prime,upper_tail,square_tail");
        assert!(lines[1].starts_with("0.0000000000000000e0,3.5502805388781"));
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "");
    }

    #[test]
    fn range_errors_exit_one() {
        let (code, _, err) = main_with_args(["shelab", "airy", "--x", "40"]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(err.contains("airy(x=40.0)"), "{err}");
    }
}
