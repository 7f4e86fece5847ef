//! The `hecke` command line: evaluate a series, run a check, print a table.
//!
//! Exit codes: 0 success or passing check, 1 failing check, 2 usage error,
//! 3 numerical failure (no convergence, tail too large, …).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::arith::{kloosterman, ramanujan_sum, KloostermanParams};
use crate::continuation::{
    omega2, s_series_fourier, xi_extrapolated, xi_fourier, xi_star_with, FourierAssemblyConfig, DEFAULT_SAMPLES,
    XI_STAR_PRINTED,
};
use crate::error::{Error, Result};
use crate::identities::{
    check_dbar_z1, check_dbar_z2, check_dirichlet, check_lemma1, check_omega_proportionality, check_petersson,
    check_weil, lemma1_default_points, omega_default_pairs, theorem3_candidates, theorem3_default_pairs,
    CheckReport, DerivativeConfig, QuadratureGrid, DBAR_Z1_PRINTED, LEMMA1_NS, LEMMA1_SS,
};
use crate::latsum::{
    omega_direct, omega_n_direct, psi_direct, s_series_direct, xi0_direct, xi_direct, xic_direct, EvalResult, PsiKind,
    TruncationPolicy,
};
use crate::modforms::{delta_series, eisenstein, tau_coefficients};
use crate::point::UpperHalfPoint;
use crate::sum::with_workers;

pub const SCHEMA: &str = "hecke-kernel/1";
pub const WORKERS_ENV: &str = "HECKE_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hecke", version, about = "Hecke-kernel lattice series and identity checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Machine-readable output: one JSON object on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for the parallel sums (HECKE_WORKERS takes precedence).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// key=value file supplying defaults for any flag; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Suppress run-dependent output (timings) so identical argv gives identical bytes.
    #[arg(long, global = true)]
    pub seedless: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one series at a point.
    Eval(EvalArgs),
    /// Run an identity check and print its report.
    Check(CheckArgs),
    /// Print a table of arithmetic or q-expansion data.
    Table(TableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalTarget {
    Xi,
    Xi0,
    Xic,
    XiStar,
    SSeries,
    Omega,
    OmegaN,
    Omega2,
    Psi1,
    Psi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Direct,
    Fourier,
    Extrapolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckName {
    Lemma1,
    DbarZ1,
    DbarZ2,
    Theorem3,
    Weil,
    Dirichlet,
    OmegaProportionality,
    Petersson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableName {
    Kloosterman,
    Ramanujan,
    E4,
    E6,
    Delta,
    Tau,
}

/// Flags shared by the subcommands. Everything is optional here so that the
/// config file can fill gaps; requiredness is enforced per target.
#[derive(Debug, Default, Clone, Args)]
pub struct Params {
    /// First point, as `x+yi` (the sign of the imaginary part is mandatory).
    #[arg(long, allow_hyphen_values = true)]
    pub z1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub z2: Option<String>,
    /// The point of a one-variable series.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Weight of the ω kernel.
    #[arg(long)]
    pub k: Option<u32>,
    /// Determinant of the ω kernel.
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub rmax: Option<u32>,
    #[arg(long)]
    pub cmax: Option<u32>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Completion constant κ of `Ξ*₁`.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Expected coefficient in the `∂̄_{z₁}` check.
    #[arg(long, allow_hyphen_values = true)]
    pub coefficient: Option<f64>,
    /// `default` or `z1,z2;z1,z2;…`.
    #[arg(long, allow_hyphen_values = true)]
    pub pairs: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<i64>,
    /// Number of q-expansion coefficients.
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub target: EvalTarget,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub name: CheckName,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    pub name: TableName,
    #[command(flatten)]
    pub params: Params,
}

/// Parses `x+yi` / `x-yi`, with optional whitespace around the parts.
pub fn parse_complex(text: &str) -> std::result::Result<Complex64, String> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let body = compact
        .strip_suffix('i')
        .ok_or_else(|| format!("'{text}': expected the form x+yi"))?;
    // The sign of the imaginary part: the last +/- not at the start and not
    // part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(|| format!("'{text}': the imaginary part needs an explicit sign"))?;
    let (re, im) = body.split_at(split);
    let parse = |part: &str| {
        part.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("'{text}': '{part}' is not a number"))
    };
    if im.len() < 2 {
        return Err(format!("'{text}': missing imaginary part"));
    }
    Ok(Complex64::new(parse(re)?, parse(im)?))
}

fn parse_point(text: &str) -> Result<UpperHalfPoint> {
    let z = parse_complex(text).map_err(Error::InvalidArgument)?;
    UpperHalfPoint::try_from(z)
}

fn parse_pairs(text: &str) -> Result<Vec<(UpperHalfPoint, UpperHalfPoint)>> {
    text.split(';')
        .map(|pair| {
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| Error::InvalidArgument(format!("'{pair}': expected z1,z2")))?;
            Ok((parse_point(a)?, parse_point(b)?))
        })
        .collect()
}

const CONFIG_KEYS: [&str; 21] = [
    "z1", "z2", "z", "n", "s", "k", "m", "method", "height", "rmax", "cmax", "tol", "kappa", "coefficient", "pairs",
    "a", "b", "r", "order", "workers", "json",
];

/// Reads a `key=value` file; `#` starts a comment. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().trim_start_matches("--").to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidArgument(format!("config line {}: unknown key '{key}'", lineno + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn from_config<T: std::str::FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    cfg.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::InvalidArgument(format!("config: bad value '{v}' for {key}")))
        })
        .transpose()
}

impl Params {
    /// Fills every unset flag from the config file.
    fn merge(mut self, cfg: &BTreeMap<String, String>) -> Result<Self> {
        macro_rules! fill {
            ($($field:ident),*) => {$(
                if self.$field.is_none() {
                    self.$field = from_config(cfg, stringify!($field))?;
                }
            )*};
        }
        fill!(z1, z2, z, n, s, k, m, height, rmax, cmax, tol, kappa, coefficient, pairs, a, b, r, order);
        if self.method.is_none() {
            if let Some(v) = cfg.get("method") {
                self.method = Some(
                    MethodArg::from_str(v, true)
                        .map_err(|_| Error::InvalidArgument(format!("config: bad method '{v}'")))?,
                );
            }
        }
        Ok(self)
    }

    fn point(&self, field: &Option<String>, name: &str) -> Result<UpperHalfPoint> {
        parse_point(field.as_deref().ok_or_else(|| missing(name))?)
    }

    fn z1(&self) -> Result<UpperHalfPoint> {
        self.point(&self.z1, "z1")
    }

    fn z2(&self) -> Result<UpperHalfPoint> {
        self.point(&self.z2, "z2")
    }

    fn s(&self) -> Result<f64> {
        self.s.ok_or_else(|| missing("s"))
    }

    fn policy(&self) -> Result<TruncationPolicy> {
        let mut p = TruncationPolicy::default();
        if let Some(h) = self.height {
            p = p.with_height(h);
        }
        if let Some(r) = self.rmax {
            p.r_max = r;
        }
        if let Some(c) = self.cmax {
            p.c_cutoff = c;
            p.kloosterman_cutoff = c;
        }
        if let Some(t) = self.tol {
            p.tol = t;
        }
        p.validate()?;
        Ok(p)
    }

    fn assembly(&self) -> Result<FourierAssemblyConfig> {
        let mut cfg = FourierAssemblyConfig::default();
        if let Some(r) = self.rmax {
            cfg.r_max = r;
        }
        if let Some(c) = self.cmax {
            cfg.kloosterman_cutoff = c;
        }
        if let Some(h) = self.height {
            cfg.correction = cfg.correction.with_height(h);
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn pair_list(&self, default: Vec<(UpperHalfPoint, UpperHalfPoint)>) -> Result<Vec<(UpperHalfPoint, UpperHalfPoint)>> {
        match (&self.pairs, &self.z1, &self.z2) {
            (Some(p), _, _) if p == "default" => Ok(default),
            (Some(p), _, _) => parse_pairs(p),
            (None, Some(_), Some(_)) => Ok(vec![(self.z1()?, self.z2()?)]),
            _ => Ok(default),
        }
    }
}

fn missing(name: &str) -> Error {
    Error::InvalidArgument(format!("--{name} is required"))
}

// ---------------------------------------------------------------------------
// Output

/// Compact JSON with sorted keys and every float written with 17 significant
/// digits, so that re-parsing and re-printing reproduces the same bytes.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().expect("f64 number")));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // serde_json's default map is ordered by key.
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    schema: &'static str,
    target: &'a str,
    #[serde(flatten)]
    result: &'a EvalResult,
    timing_ms: f64,
}

struct Output {
    json: Value,
    text: String,
    code: i32,
}

fn to_value(x: &impl Serialize) -> Value {
    serde_json::to_value(x).expect("output serializes")
}

fn with_schema(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.insert("schema".into(), Value::String(SCHEMA.into()));
    }
    v
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::NotInvertible { .. } => EXIT_USAGE,
        Error::AmbiguousNormalization { .. } => EXIT_CHECK_FAILED,
        _ => EXIT_NUMERICAL,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::NotInvertible { .. } => "NotInvertible",
        Error::PrecisionLoss { .. } => "PrecisionLoss",
        Error::PoleAt { .. } => "PoleAt",
        Error::Underflow { .. } => "Underflow",
        Error::TailTooLarge { .. } => "TailTooLarge",
        Error::NotConverged { .. } => "NotConverged",
        Error::NearDiagonal { .. } => "NearDiagonal",
        Error::AmbiguousNormalization { .. } => "AmbiguousNormalization",
        Error::QuadratureNotConverged { .. } => "QuadratureNotConverged",
        Error::InvalidArgument(_) => "InvalidArgument",
    }
}

// ---------------------------------------------------------------------------
// Commands

fn eval(args: &EvalArgs, p: &Params, seedless: bool) -> Result<Output> {
    let start = Instant::now();
    let n = p.n.unwrap_or(1);
    let result = match args.target {
        EvalTarget::Xi => {
            let (z1, z2, s) = (p.z1()?, p.z2()?, p.s()?);
            let convergent = s > (n as f64 + 1.0) / 2.0;
            let method = p.method.unwrap_or(if convergent { MethodArg::Direct } else { MethodArg::Fourier });
            match method {
                MethodArg::Direct => xi_direct(z1, z2, n, s, &p.policy()?)?,
                MethodArg::Fourier => xi_fourier(z1, z2, n, s, &p.assembly()?)?,
                MethodArg::Extrapolate => xi_extrapolated(z1, z2, n, s, &DEFAULT_SAMPLES, &p.policy()?)?,
            }
        }
        EvalTarget::Xi0 => xi0_direct(p.z1()?, p.z2()?, n, p.s()?, &p.policy()?)?,
        EvalTarget::Xic => xic_direct(p.z1()?, p.z2()?, n, p.s()?, &p.policy()?, false)?,
        EvalTarget::XiStar => xi_star_with(p.z1()?, p.z2()?, &p.assembly()?, p.kappa.unwrap_or(XI_STAR_PRINTED))?,
        EvalTarget::SSeries => {
            let z = match (&p.z, &p.z1) {
                (Some(_), _) => p.point(&p.z, "z")?,
                (None, Some(_)) => p.z1()?,
                _ => return Err(missing("z")),
            };
            match p.method.unwrap_or(MethodArg::Direct) {
                MethodArg::Direct => s_series_direct(z.z(), n, p.s()?, &p.policy()?)?,
                MethodArg::Fourier => s_series_fourier(z, n, p.s()?, p.rmax.unwrap_or(20))?,
                MethodArg::Extrapolate => {
                    return Err(Error::InvalidArgument("s-series supports direct and fourier".into()))
                }
            }
        }
        EvalTarget::Omega => omega_direct(p.z1()?, p.z2()?, p.k.unwrap_or(12), p.m.unwrap_or(1), &p.policy()?)?,
        EvalTarget::OmegaN => omega_n_direct(p.z1()?, p.z2()?, n, p.s()?, &p.policy()?)?,
        EvalTarget::Omega2 => omega2(p.z1()?, p.z2()?, &DEFAULT_SAMPLES, &p.policy()?)?,
        EvalTarget::Psi1 => psi_direct(PsiKind::One, p.z1()?, p.z2()?, p.s()?, &p.policy()?)?,
        EvalTarget::Psi2 => psi_direct(PsiKind::Two, p.z1()?, p.z2()?, p.s()?, &p.policy()?)?,
    };
    let timing_ms = if seedless { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
    let target = args.target.to_possible_value().expect("named target");
    let json = to_value(&EvalOutput { schema: SCHEMA, target: target.get_name(), result: &result, timing_ms });
    let v = result.value;
    let mut text = format!(
        "{} = {:.16e} {:+.16e}i\nerr_estimate = {:.3e}\nmethod = {}",
        target.get_name(),
        v.re,
        v.im,
        result.err_estimate,
        json["method"].as_str().unwrap_or("")
    );
    for w in &result.warnings {
        text.push_str(&format!("\nwarning: {w}"));
    }
    Ok(Output { json, text, code: EXIT_OK })
}

fn check(args: &CheckArgs, p: &Params) -> Result<Output> {
    let dbar_pairs = || omega_default_pairs().into_iter().take(2).collect::<Vec<_>>();
    let report = match args.name {
        CheckName::Lemma1 => {
            let points = match (&p.z, &p.z1) {
                (Some(_), _) => vec![p.point(&p.z, "z")?],
                (None, Some(_)) => vec![p.z1()?],
                _ => lemma1_default_points(),
            };
            check_lemma1(&points, &LEMMA1_NS, &LEMMA1_SS, p.rmax.unwrap_or(20))?
        }
        CheckName::DbarZ1 | CheckName::DbarZ2 => {
            let cfg = DerivativeConfig {
                coefficient: p.coefficient.unwrap_or(DBAR_Z1_PRINTED),
                assembly: p.assembly()?,
                omega_height: Some(p.height.unwrap_or(800)),
                ..DerivativeConfig::default()
            };
            let reports = p
                .pair_list(dbar_pairs())?
                .into_iter()
                .map(|(z1, z2)| match args.name {
                    CheckName::DbarZ1 => check_dbar_z1(z1, z2, &cfg),
                    _ => check_dbar_z2(z1, z2, &cfg),
                })
                .collect::<Result<Vec<_>>>()?;
            let name = if args.name == CheckName::DbarZ1 { "dbar_z1" } else { "dbar_z2" };
            CheckReport::merge(name, &reports)
        }
        CheckName::Theorem3 => {
            let pairs = p.pair_list(theorem3_default_pairs())?;
            theorem3_candidates(&pairs, &p.assembly()?, p.kappa.unwrap_or(XI_STAR_PRINTED))?.best_report()
        }
        CheckName::Weil => check_weil(p.cmax.unwrap_or(200) as u64, p.a.unwrap_or(20)),
        CheckName::Dirichlet => check_dirichlet()?,
        CheckName::OmegaProportionality => {
            check_omega_proportionality(&p.pair_list(omega_default_pairs())?, p.height.unwrap_or(400))?
        }
        CheckName::Petersson => {
            let z2s: Vec<UpperHalfPoint> = p.pair_list(omega_default_pairs())?.into_iter().map(|(_, z2)| z2).take(3).collect();
            let grid = QuadratureGrid { height: p.height.unwrap_or(24), ..QuadratureGrid::default() };
            check_petersson(&z2s, &grid)?
        }
    };
    let code = if report.pass() { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok(Output { json: with_schema(to_value(&report)), text: report.to_string(), code })
}

fn table(args: &TableArgs, p: &Params) -> Result<Output> {
    let (name, rows): (&str, Vec<(Value, Value)>) = match args.name {
        TableName::Kloosterman => {
            let (a, b) = (p.a.ok_or_else(|| missing("a"))?, p.b.ok_or_else(|| missing("b"))?);
            let rows = (1..=p.cmax.unwrap_or(20) as u64)
                .map(|c| Ok((json!(c), json!(kloosterman(KloostermanParams::new(a, b, c)?).re))))
                .collect::<Result<_>>()?;
            ("kloosterman", rows)
        }
        TableName::Ramanujan => {
            let r = p.r.ok_or_else(|| missing("r"))?;
            let rows = (1..=p.cmax.unwrap_or(20) as u64)
                .map(|c| Ok((json!(c), json!(ramanujan_sum(c, r)?))))
                .collect::<Result<_>>()?;
            ("ramanujan", rows)
        }
        TableName::Tau => {
            let tau = tau_coefficients(p.order.unwrap_or(20))?;
            let rows = tau.iter().enumerate().map(|(n, &t)| (json!(n), json!(t as i64))).collect();
            ("tau", rows)
        }
        TableName::E4 | TableName::E6 | TableName::Delta => {
            let order = p.order.unwrap_or(20);
            let (name, series) = match args.name {
                TableName::E4 => ("e4", eisenstein(4, order)?),
                TableName::E6 => ("e6", eisenstein(6, order)?),
                _ => ("delta", delta_series(order)?),
            };
            let rows = series.coefficients().iter().enumerate().map(|(n, &c)| (json!(n), json!(c))).collect();
            (name, rows)
        }
    };
    let key = if matches!(args.name, TableName::Kloosterman | TableName::Ramanujan) { "c" } else { "n" };
    let json = json!({
        "schema": SCHEMA,
        "table": name,
        "rows": rows.iter().map(|(k, v)| json!({ key: k, "value": v })).collect::<Vec<_>>(),
    });
    let text = rows
        .iter()
        .map(|(k, v)| match v.as_f64() {
            Some(x) if v.is_f64() => format!("{k}\t{x:.16e}"),
            _ => format!("{k}\t{v}"),
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Output { json, text, code: EXIT_OK })
}

fn resolve_workers(flag: Option<usize>, config: &BTreeMap<String, String>) -> Result<Option<usize>> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let w = v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w >= 1)
            .ok_or_else(|| Error::InvalidArgument(format!("{WORKERS_ENV}='{v}' is not a positive integer")))?;
        return Ok(Some(w));
    }
    match flag {
        Some(0) => Err(Error::InvalidArgument("--workers must be >= 1".into())),
        Some(w) => Ok(Some(w)),
        None => from_config(config, "workers"),
    }
}

/// Runs the command line `args` (including the program name), writing to
/// `out` and `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let mut json_out = cli.global.json;
    let result = (|| -> Result<Output> {
        let config = match &cli.global.config {
            Some(path) => parse_config(
                &std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?,
            )?,
            None => BTreeMap::new(),
        };
        json_out |= from_config::<bool>(&config, "json")?.unwrap_or(false);
        let workers = resolve_workers(cli.global.workers, &config)?;
        let seedless = cli.global.seedless;
        with_workers(workers, || match &cli.command {
            Command::Eval(a) => eval(a, &a.params.clone().merge(&config)?, seedless),
            Command::Check(a) => check(a, &a.params.clone().merge(&config)?),
            Command::Table(a) => table(a, &a.params.clone().merge(&config)?),
        })
    })();
    match result {
        Ok(o) => {
            let _ = if json_out { writeln!(out, "{}", canonical_json(&o.json)) } else { writeln!(out, "{}", o.text) };
            o.code
        }
        Err(e) => {
            let code = exit_code(&e);
            if json_out {
                let v = json!({
                    "schema": SCHEMA,
                    "error": { "kind": error_kind(&e), "message": e.to_string() },
                });
                let _ = writeln!(out, "{}", canonical_json(&v));
            }
            let _ = writeln!(err, "error: {e}");
            if code == EXIT_USAGE {
                let _ = writeln!(err, "run `hecke --help` for the grammar");
            }
            code
        }
    }
}
