//! The `spinres` command line tool.
//!
//! Settings are merged in the order preset < JSON config file < flags.
//! Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::analytic::{self, MethodId};
use crate::error::Error;
use crate::model::DriveParams;
use crate::numeric::{
    closed_form_series, format_float, hf_average, integrate_window, resonance_sweep_collect,
    sample_times, Method, TimeSeries, MAX_TOL, MIN_TOL,
};
use crate::special::{bessel_j0, bessel_j0_zero, struve_h0};
use crate::su2::Spinor;

const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "spinres",
    version,
    about = "Spin-1/2 resonance under a high-frequency axial drive: closed forms, reference integration and figure data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print zeros of J0 and the gamma functions.
    Constants(ConstantsArgs),
    /// Time traces of <sigma_z> per method.
    Evolve(RunArgs),
    /// Resonance amplitude on an omega_par grid.
    Sweep(RunArgs),
    /// Compare the (phi_hf, phi) run with the equivalent (0, phi + r sin phi_hf) run.
    Compare(RunArgs),
}

#[derive(Debug, Args)]
struct ConstantsArgs {
    /// Number of J0 zeros to list.
    #[arg(long, default_value_t = 1)]
    zeros: usize,
    /// Comma-separated r values for the gamma table (tokens like r1 allowed).
    #[arg(long = "gamma-at", value_delimiter = ',', allow_hyphen_values = true)]
    gamma_at: Vec<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
struct RunArgs {
    #[arg(long = "omega-perp", allow_hyphen_values = true)]
    omega_perp: Option<String>,
    #[arg(long = "omega-par", allow_hyphen_values = true)]
    omega_par: Option<String>,
    #[arg(long = "Omega-HF", alias = "omega-hf", allow_hyphen_values = true)]
    hf_frequency: Option<String>,
    /// Drive ratio; accepts rN for the N-th zero of J0.
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    /// Phase of the drive; accepts pi-tokens such as pi/2.
    #[arg(long = "phi-hf", allow_hyphen_values = true)]
    phi_hf: Option<String>,
    /// plus, minus, or "c,phi".
    #[arg(long, allow_hyphen_values = true)]
    initial: Option<String>,
    /// Comma-separated subset of exact, avg, ms, numeric.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long = "t-start", allow_hyphen_values = true)]
    t_start: Option<String>,
    #[arg(long = "t-end")]
    t_end: Option<String>,
    /// Integrator sampling step (default: drive period / 32).
    #[arg(long = "sample-dt")]
    sample_dt: Option<String>,
    /// Spacing of written rows (rounded to a multiple of sample-dt).
    #[arg(long = "output-dt")]
    output_dt: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// omega_par grid as "min,max,points".
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Omit the HF-averaged numeric column.
    #[arg(long = "no-hf-average")]
    no_hf_average: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// fig2 .. fig7.
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with run settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(usage(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Initial state of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Plus,
    Minus,
    Superposition { c: f64, phi: f64 },
}

impl InitialState {
    pub fn spinor(&self) -> crate::Result<Spinor> {
        match *self {
            InitialState::Plus => Ok(Spinor::plus()),
            InitialState::Minus => Ok(Spinor::minus()),
            InitialState::Superposition { c, phi } => Spinor::superposition(c, phi),
        }
    }

    /// The state whose relative phase is advanced by `shift`.
    fn with_phase_shift(&self, shift: f64) -> Self {
        match *self {
            InitialState::Superposition { c, phi } => InitialState::Superposition {
                c,
                phi: phi + shift,
            },
            other => other,
        }
    }

    fn to_json(self) -> Value {
        match self {
            InitialState::Plus => json!("plus"),
            InitialState::Minus => json!("minus"),
            InitialState::Superposition { c, phi } => json!({ "c": c, "phi": phi }),
        }
    }
}

impl FromStr for InitialState {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus" | "+" => return Ok(InitialState::Plus),
            "minus" | "-" => return Ok(InitialState::Minus),
            _ => {}
        }
        let (c, phi) = s
            .split_once(',')
            .ok_or_else(|| usage(format!("initial state '{s}' is not plus, minus or c,phi")))?;
        let c = parse_real(c)?;
        let phi = parse_real(phi)?;
        if !(0.0..=1.0).contains(&c) {
            return Err(usage(format!(
                "initial amplitude c = {c} is outside [0, 1]"
            )));
        }
        Ok(InitialState::Superposition { c, phi })
    }
}

/// `omega_par` grid, `points` values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.min + (self.max - self.min) * i as f64 / n)
            .collect()
    }
}

impl FromStr for Grid {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(usage(format!("grid '{s}' is not min,max,points")));
        }
        let points: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| usage(format!("grid point count '{}' is not an integer", parts[2])))?;
        grid(parse_real(parts[0])?, parse_real(parts[1])?, points)
    }
}

fn grid(min: f64, max: f64, points: usize) -> CliResult<Grid> {
    if points == 0 || (points > 1 && !(max > min)) {
        return Err(usage("grid needs max > min and at least one point"));
    }
    Ok(Grid { min, max, points })
}

/// Parses a real number or a token expression: products and quotients of
/// decimals, `pi`, `rN` (N-th zero of J0) and `sqrtX`, e.g. `3*pi/2`, `1/sqrt2`.
pub fn parse_real(s: &str) -> CliResult<f64> {
    let text = s.trim();
    let bad = || usage(format!("cannot parse '{s}' as a number"));
    if let Ok(v) = text.parse::<f64>() {
        return if v.is_finite() { Ok(v) } else { Err(bad()) };
    }
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, text.strip_prefix('+').unwrap_or(text)),
    };
    let mut value = sign;
    let mut op = '*';
    let mut rest = body;
    loop {
        let end = rest.find(['*', '/']).unwrap_or(rest.len());
        let factor = parse_factor(rest[..end].trim()).ok_or_else(bad)?;
        if op == '*' {
            value *= factor;
        } else {
            value /= factor;
        }
        if end == rest.len() {
            break;
        }
        op = rest.as_bytes()[end] as char;
        rest = &rest[end + 1..];
    }
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

fn parse_factor(f: &str) -> Option<f64> {
    let lower = f.to_ascii_lowercase();
    if lower == "pi" {
        return Some(std::f64::consts::PI);
    }
    if let Some(arg) = lower.strip_prefix("sqrt") {
        let arg = arg.trim_start_matches('(').trim_end_matches(')');
        return arg.parse::<f64>().ok().filter(|x| *x >= 0.0).map(f64::sqrt);
    }
    if let Some(j) = lower.strip_prefix('r') {
        return j.parse::<usize>().ok().and_then(|j| bessel_j0_zero(j).ok());
    }
    lower.parse::<f64>().ok()
}

fn parse_methods(s: &str) -> CliResult<Vec<Method>> {
    let mut out = Vec::new();
    for token in s.split(',').filter(|t| !t.trim().is_empty()) {
        let m: Method = token.parse().map_err(|e: Error| usage(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(usage("no methods given"));
    }
    Ok(out)
}

/// Settings before defaults are applied.
#[derive(Debug, Clone, Default)]
struct Partial {
    omega_perp: Option<f64>,
    omega_par: Option<f64>,
    hf_frequency: Option<f64>,
    r: Option<f64>,
    phi_hf: Option<f64>,
    initial: Option<InitialState>,
    methods: Option<Vec<Method>>,
    t_start: Option<f64>,
    t_end: Option<f64>,
    sample_dt: Option<f64>,
    output_dt: Option<f64>,
    tol: Option<f64>,
    grid: Option<Grid>,
    hf_average: Option<bool>,
    format: Option<Format>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
}

impl Partial {
    fn overlay(mut self, top: &Partial) -> Partial {
        macro_rules! take {
            ($($f:ident),*) => {$(if top.$f.is_some() { self.$f = top.$f.clone(); })*};
        }
        take!(
            omega_perp,
            omega_par,
            hf_frequency,
            r,
            phi_hf,
            initial,
            methods,
            t_start,
            t_end,
            sample_dt,
            output_dt,
            tol,
            grid,
            hf_average,
            format,
            out,
            jobs
        );
        self
    }

    fn from_args(a: &RunArgs) -> CliResult<Partial> {
        let real = |v: &Option<String>| v.as_deref().map(parse_real).transpose();
        Ok(Partial {
            omega_perp: real(&a.omega_perp)?,
            omega_par: real(&a.omega_par)?,
            hf_frequency: real(&a.hf_frequency)?,
            r: real(&a.r)?,
            phi_hf: real(&a.phi_hf)?,
            initial: a.initial.as_deref().map(str::parse).transpose()?,
            methods: a.methods.as_deref().map(parse_methods).transpose()?,
            t_start: real(&a.t_start)?,
            t_end: real(&a.t_end)?,
            sample_dt: real(&a.sample_dt)?,
            output_dt: real(&a.output_dt)?,
            tol: real(&a.tol)?,
            grid: a.grid.as_deref().map(str::parse).transpose()?,
            hf_average: a.no_hf_average.then_some(false),
            format: a.format.as_deref().map(str::parse).transpose()?,
            out: a.out.clone(),
            jobs: a.jobs,
        })
    }

    fn from_json(v: &Value) -> CliResult<(Partial, Option<String>, Option<String>)> {
        let obj = v
            .as_object()
            .ok_or_else(|| usage("config file must hold a JSON object"))?;
        let mut p = Partial::default();
        let mut subcommand = None;
        let mut preset = None;
        for (key, val) in obj {
            match key.as_str() {
                "subcommand" => subcommand = Some(json_string(key, val)?),
                "preset" => preset = Some(json_string(key, val)?),
                "params" => {
                    let params = val
                        .as_object()
                        .ok_or_else(|| usage("config 'params' must be an object"))?;
                    for (k, x) in params {
                        let target = match k.as_str() {
                            "omega_perp" => &mut p.omega_perp,
                            "omega_par" => &mut p.omega_par,
                            "Omega_HF" => &mut p.hf_frequency,
                            "r" => &mut p.r,
                            "phi_hf" => &mut p.phi_hf,
                            other => {
                                return Err(usage(format!("unknown config key params.{other}")))
                            }
                        };
                        *target = Some(json_real(k, x)?);
                    }
                }
                "initial" => {
                    p.initial = Some(match val {
                        Value::Object(o) => {
                            let c = json_real("initial.c", o.get("c").unwrap_or(&Value::Null))?;
                            let phi = o
                                .get("phi")
                                .map(|x| json_real("initial.phi", x))
                                .transpose()?;
                            format!("{c},{}", phi.unwrap_or(0.0)).parse()?
                        }
                        other => json_string(key, other)?.parse()?,
                    })
                }
                "methods" => {
                    let list = match val {
                        Value::Array(items) => items
                            .iter()
                            .map(|x| json_string(key, x))
                            .collect::<CliResult<Vec<_>>>()?
                            .join(","),
                        other => json_string(key, other)?,
                    };
                    p.methods = Some(parse_methods(&list)?);
                }
                "t_start" => p.t_start = Some(json_real(key, val)?),
                "t_end" => p.t_end = Some(json_real(key, val)?),
                "sample_dt" => p.sample_dt = Some(json_real(key, val)?),
                "output_dt" => p.output_dt = Some(json_real(key, val)?),
                "tol" => p.tol = Some(json_real(key, val)?),
                "grid" => {
                    p.grid = Some(match val {
                        Value::Object(o) => {
                            let get = |k: &str| json_real(k, o.get(k).unwrap_or(&Value::Null));
                            let points = get("points")?;
                            if points.fract() != 0.0 || points < 1.0 {
                                return Err(usage("grid.points must be a positive integer"));
                            }
                            grid(get("min")?, get("max")?, points as usize)?
                        }
                        other => json_string(key, other)?.parse()?,
                    })
                }
                "hf_average" => {
                    p.hf_average = Some(
                        val.as_bool()
                            .ok_or_else(|| usage("config 'hf_average' must be a boolean"))?,
                    )
                }
                "format" => p.format = Some(json_string(key, val)?.parse()?),
                "out" => p.out = Some(PathBuf::from(json_string(key, val)?)),
                "jobs" => {
                    p.jobs = Some(
                        val.as_u64()
                            .ok_or_else(|| usage("config 'jobs' must be a positive integer"))?
                            as usize,
                    )
                }
                other => return Err(usage(format!("unknown config key '{other}'"))),
            }
        }
        Ok((p, subcommand, preset))
    }
}

fn json_string(key: &str, v: &Value) -> CliResult<String> {
    v.as_str()
        .map(str::to_owned)
        .ok_or_else(|| usage(format!("config '{key}' must be a string")))
}

fn json_real(key: &str, v: &Value) -> CliResult<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| usage(format!("config '{key}' is not a finite number"))),
        Value::String(s) => parse_real(s),
        _ => Err(usage(format!(
            "config '{key}' must be a number or a token string"
        ))),
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: DriveParams,
    pub initial: InitialState,
    pub methods: Vec<Method>,
    pub t_start: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub output_dt: f64,
    pub tol: f64,
    pub grid: Option<Grid>,
    pub hf_average: bool,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    fn resolve(p: &Partial) -> CliResult<RunConfig> {
        let params = DriveParams::new(
            p.omega_perp.unwrap_or(3.0),
            p.omega_par.unwrap_or(-1.0),
            p.hf_frequency.unwrap_or(50.0),
            p.r.unwrap_or(1.0),
            p.phi_hf.unwrap_or(std::f64::consts::FRAC_PI_2),
        )?;
        let methods = p.methods.clone().unwrap_or_else(|| {
            vec![
                Method::Analytic(MethodId::Averaging),
                Method::Analytic(MethodId::MultiScale),
            ]
        });
        if methods.contains(&Method::Analytic(MethodId::ExactR0)) && params.r() != 0.0 {
            return Err(usage(format!(
                "method 'exact' is only valid without the axial drive (r = 0), got r = {}",
                params.r()
            )));
        }
        let sample_dt = p.sample_dt.unwrap_or(params.hf_period() / 32.0);
        let t_start = p.t_start.unwrap_or(0.0);
        let t_end = p.t_end.unwrap_or(6.0);
        if !(sample_dt > 0.0) {
            return Err(usage("sample-dt must be positive"));
        }
        if !(t_start >= 0.0 && t_end > t_start) {
            return Err(usage(format!(
                "need 0 <= t-start < t-end, got [{t_start}, {t_end}]"
            )));
        }
        let output_dt = p.output_dt.unwrap_or(sample_dt);
        if !(output_dt > 0.0) {
            return Err(usage("output-dt must be positive"));
        }
        if p.jobs == Some(0) {
            return Err(usage("jobs must be at least 1"));
        }
        let tol = p.tol.unwrap_or(DEFAULT_TOL);
        if !(MIN_TOL..=MAX_TOL).contains(&tol) {
            return Err(usage(format!(
                "tol must lie in [{MIN_TOL:e}, {MAX_TOL:e}], got {tol:e}"
            )));
        }
        Ok(RunConfig {
            params,
            initial: p.initial.unwrap_or(InitialState::Plus),
            methods,
            t_start,
            t_end,
            sample_dt,
            output_dt,
            tol,
            grid: p.grid,
            hf_average: p.hf_average.unwrap_or(true),
            format: p.format.unwrap_or(Format::Csv),
            out: p.out.clone(),
            jobs: p.jobs,
        })
    }

    fn metadata(&self, command: &str) -> BTreeMap<&'static str, Value> {
        let mut m = BTreeMap::new();
        m.insert("tool", json!("spinres"));
        m.insert("version", json!(env!("CARGO_PKG_VERSION")));
        m.insert("command", json!(command));
        m.insert(
            "params",
            serde_json::to_value(self.params).expect("params serialize"),
        );
        m.insert(
            "methods",
            json!(self.methods.iter().map(Method::name).collect::<Vec<_>>()),
        );
        m.insert(
            "tolerances",
            json!({ "integrator": self.tol, "quadrature": 1e-12 }),
        );
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PresetKind {
    Evolve,
    Sweep,
}

struct Preset {
    kind: PresetKind,
    base: Partial,
    variants: Vec<(&'static str, Partial)>,
}

fn preset(name: &str) -> CliResult<Preset> {
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
    let r1 = bessel_j0_zero(1)?;
    let m = |s: &str| Some(parse_methods(s).expect("preset methods"));
    let figure_base = Partial {
        omega_perp: Some(3.0),
        omega_par: Some(-1.0),
        hf_frequency: Some(50.0),
        phi_hf: Some(FRAC_PI_2),
        initial: Some(InitialState::Plus),
        ..Partial::default()
    };
    let long_run = |omega_par: f64| Partial {
        omega_par: Some(omega_par),
        t_start: Some(0.0),
        t_end: Some(4000.0),
        output_dt: Some(1.0),
        ..Partial::default()
    };
    Ok(match name.to_ascii_lowercase().as_str() {
        "fig2" => Preset {
            kind: PresetKind::Sweep,
            base: Partial {
                grid: Some(Grid {
                    min: -4.0,
                    max: 2.0,
                    points: 25,
                }),
                ..figure_base
            },
            variants: vec![
                (
                    "r0",
                    Partial {
                        r: Some(0.0),
                        methods: m("exact"),
                        ..Partial::default()
                    },
                ),
                (
                    "r1",
                    Partial {
                        r: Some(1.0),
                        methods: m("avg,numeric"),
                        ..Partial::default()
                    },
                ),
                (
                    "r2",
                    Partial {
                        r: Some(2.0),
                        methods: m("avg,numeric"),
                        ..Partial::default()
                    },
                ),
            ],
        },
        "fig3" => Preset {
            kind: PresetKind::Evolve,
            base: Partial {
                r: Some(1.0),
                methods: m("avg,ms,numeric"),
                ..figure_base
            },
            variants: vec![
                (
                    "early",
                    Partial {
                        t_start: Some(0.0),
                        t_end: Some(6.0),
                        ..Partial::default()
                    },
                ),
                (
                    "late",
                    Partial {
                        t_start: Some(1700.0),
                        t_end: Some(1706.0),
                        ..Partial::default()
                    },
                ),
            ],
        },
        "fig4" => Preset {
            kind: PresetKind::Sweep,
            base: Partial {
                r: Some(r1),
                methods: m("ms,numeric"),
                grid: Some(Grid {
                    min: -1.02,
                    max: -0.98,
                    points: 9,
                }),
                ..figure_base
            },
            variants: vec![("r1", Partial::default())],
        },
        "fig5" => Preset {
            kind: PresetKind::Evolve,
            base: Partial {
                r: Some(r1),
                methods: m("avg,ms,numeric"),
                ..figure_base
            },
            variants: vec![
                ("w-1.1", long_run(-1.1)),
                ("w-1.005", long_run(-1.005)),
                ("w-1.001", long_run(-1.001)),
                ("w-1.0005", long_run(-1.0005)),
                ("w-1", long_run(-1.0)),
            ],
        },
        "fig6" => Preset {
            kind: PresetKind::Evolve,
            base: Partial {
                r: Some(r1),
                methods: m("ms,numeric"),
                ..long_run(-1.0).overlay(&figure_base)
            },
            variants: vec![
                (
                    "phi-pi2",
                    Partial {
                        phi_hf: Some(FRAC_PI_2),
                        ..Partial::default()
                    },
                ),
                (
                    "phi-0",
                    Partial {
                        phi_hf: Some(0.0),
                        ..Partial::default()
                    },
                ),
            ],
        },
        "fig7" => Preset {
            kind: PresetKind::Evolve,
            base: Partial {
                r: Some(r1),
                methods: m("avg,ms,numeric"),
                ..long_run(-1.0).overlay(&figure_base)
            },
            variants: vec![
                (
                    "upper",
                    Partial {
                        phi_hf: Some(FRAC_PI_2),
                        initial: Some(InitialState::Superposition {
                            c: FRAC_1_SQRT_2,
                            phi: 0.0,
                        }),
                        ..Partial::default()
                    },
                ),
                (
                    "lower",
                    Partial {
                        phi_hf: Some(0.0),
                        initial: Some(InitialState::Superposition {
                            c: FRAC_1_SQRT_2,
                            phi: r1,
                        }),
                        ..Partial::default()
                    },
                ),
            ],
        },
        other => {
            return Err(usage(format!(
                "unknown preset '{other}' (expected fig2 .. fig7)"
            )))
        }
    })
}

/// Expands preset, config file and flags into labelled runs.
fn expand(args: &RunArgs, command: &str) -> CliResult<Vec<(Option<&'static str>, RunConfig)>> {
    let (file, file_command, file_preset) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: invalid JSON: {e}", path.display())))?;
            Partial::from_json(&v)?
        }
        None => (Partial::default(), None, None),
    };
    if let Some(c) = file_command {
        if c != command {
            return Err(usage(format!(
                "config file is for '{c}' but the '{command}' subcommand was run"
            )));
        }
    }
    let flags = Partial::from_args(args)?;
    let preset_name = args.preset.clone().or(file_preset);
    let layers: Vec<(Option<&'static str>, Partial)> = match preset_name {
        Some(name) => {
            let p = preset(&name)?;
            let expected = match p.kind {
                PresetKind::Evolve => ["evolve", "compare"].contains(&command),
                PresetKind::Sweep => command == "sweep",
            };
            if !expected {
                return Err(usage(format!(
                    "preset '{name}' does not apply to '{command}'"
                )));
            }
            let single = p.variants.len() == 1;
            p.variants
                .into_iter()
                .map(|(label, v)| ((!single).then_some(label), p.base.clone().overlay(&v)))
                .collect()
        }
        None => vec![(None, Partial::default())],
    };
    layers
        .into_iter()
        .map(|(label, layer)| {
            let merged = layer.overlay(&file).overlay(&flags);
            RunConfig::resolve(&merged).map(|cfg| (label, cfg))
        })
        .collect()
}

/// Where one rendered document goes.
fn emit(
    text: &str,
    out: Option<&Path>,
    label: Option<&str>,
    format: Format,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    match out {
        Some(path) => {
            let target = match label {
                Some(l) => labelled_path(path, l, format),
                None => path.to_path_buf(),
            };
            fs::write(&target, text).map_err(|source| CliError::Io {
                path: target.display().to_string(),
                source,
            })
        }
        None => {
            if let (Some(l), Format::Csv) = (label, format) {
                write_out(stdout, &format!("# run: {l}\n"))?;
            }
            write_out(stdout, text)
        }
    }
}

fn labelled_path(path: &Path, label: &str, format: Format) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| format.extension().into());
    path.with_file_name(format!("{stem}_{label}.{ext}"))
}

fn write_out(w: &mut dyn Write, text: &str) -> CliResult<()> {
    w.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn opt_json(x: Option<f64>) -> Value {
    x.filter(|v| v.is_finite())
        .map_or(Value::Null, |v| json!(v))
}

/// Columns of an evolve run at the output times.
struct Traces {
    times: Vec<f64>,
    columns: Vec<(String, Vec<Option<f64>>)>,
}

fn lookup(series: &TimeSeries, t: f64) -> Option<f64> {
    let times = series.times();
    let i = times.partition_point(|&x| x < t - 1e-9);
    (i < times.len() && (times[i] - t).abs() <= 1e-9).then(|| series.values()[i])
}

fn compute_traces(cfg: &RunConfig) -> CliResult<Traces> {
    let p = &cfg.params;
    let init = cfg.initial.spinor()?;
    let stride = (cfg.output_dt / cfg.sample_dt).round().max(1.0);
    let times = sample_times(cfg.t_start, cfg.t_end, stride * cfg.sample_dt);
    let mut columns = Vec::new();
    for &m in &cfg.methods {
        match m {
            Method::Analytic(id) => {
                let s = closed_form_series(id, p, &init, &times)?;
                columns.push((
                    id.name().to_string(),
                    s.values().iter().map(|&v| Some(v)).collect(),
                ));
            }
            Method::Numeric => {
                let margin = p.hf_period();
                let start = (cfg.t_start - margin).max(0.0);
                let traj =
                    integrate_window(p, &init, start, cfg.t_end + margin, cfg.sample_dt, cfg.tol)?;
                let raw = &traj.series;
                columns.push((
                    "numeric".into(),
                    times.iter().map(|&t| lookup(raw, t)).collect(),
                ));
                if cfg.hf_average {
                    let avg = hf_average(raw, p)?;
                    columns.push((
                        "numeric_hf".into(),
                        times.iter().map(|&t| lookup(&avg, t)).collect(),
                    ));
                }
            }
        }
    }
    Ok(Traces { times, columns })
}

fn render_traces(cfg: &RunConfig, traces: &Traces) -> String {
    match cfg.format {
        Format::Csv => {
            let mut out = String::from("t");
            for (name, _) in &traces.columns {
                out.push(',');
                out.push_str(name);
            }
            out.push('\n');
            for (i, t) in traces.times.iter().enumerate() {
                out.push_str(&format_float(*t));
                for (_, col) in &traces.columns {
                    out.push(',');
                    out.push_str(&format_float(col[i].unwrap_or(f64::NAN)));
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let mut m = cfg.metadata("evolve");
            m.insert("initial", cfg.initial.to_json());
            m.insert("sample_dt", json!(cfg.sample_dt));
            m.insert("t", json!(traces.times));
            let cols: serde_json::Map<String, Value> = traces
                .columns
                .iter()
                .map(|(n, c)| {
                    (
                        n.clone(),
                        Value::Array(c.iter().map(|x| opt_json(*x)).collect()),
                    )
                })
                .collect();
            m.insert("columns", Value::Object(cols));
            json_text(&json!(m))
        }
    }
}

fn cmd_evolve(args: &RunArgs, stdout: &mut dyn Write) -> CliResult<()> {
    for (label, cfg) in expand(args, "evolve")? {
        let traces = compute_traces(&cfg)?;
        emit(
            &render_traces(&cfg, &traces),
            cfg.out.as_deref(),
            label,
            cfg.format,
            stdout,
        )?;
    }
    Ok(())
}

fn cmd_sweep(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let mut failed = false;
    for (label, cfg) in expand(args, "sweep")? {
        let grid = cfg
            .grid
            .ok_or_else(|| usage("sweep needs --grid min,max,points (or a preset)"))?;
        let values = grid.values();
        let run = || resonance_sweep_collect(&cfg.params, &values, &cfg.methods, cfg.tol);
        let result = match cfg.jobs {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Numerical(format!("cannot start worker pool: {e}")))?
                .install(run),
            None => run(),
        }?;
        for f in &result.failures {
            let _ = writeln!(
                stderr,
                "sweep point omega_par = {} ({}): {}",
                format_float(f.omega_par),
                f.method,
                f.message
            );
        }
        failed |= !result.is_complete();
        let text = match cfg.format {
            Format::Csv => result.to_csv(),
            Format::Json => {
                let mut m = cfg.metadata("sweep");
                m.insert("grid", json!(grid));
                m.insert("omega_par", json!(result.omega_par_grid));
                let cols: serde_json::Map<String, Value> = result
                    .methods
                    .iter()
                    .zip(&result.amplitudes)
                    .map(|(meth, c)| {
                        (
                            meth.name().to_string(),
                            Value::Array(c.iter().map(|x| opt_json(*x)).collect()),
                        )
                    })
                    .collect();
                m.insert("amplitudes", Value::Object(cols));
                m.insert("failures", json!(result.failures));
                json_text(&json!(m))
            }
        };
        emit(&text, cfg.out.as_deref(), label, cfg.format, stdout)?;
    }
    if failed {
        return Err(CliError::Numerical(
            "some sweep points failed; gaps are marked".into(),
        ));
    }
    Ok(())
}

/// Deviation between the (φ, ϕ) run and the (0, ϕ + r sin φ) run for one method.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub method: String,
    pub max_deviation: f64,
}

fn compare_configs(cfg: &RunConfig) -> CliResult<Vec<Comparison>> {
    let p = &cfg.params;
    let shift = p.r() * p.phi_hf().sin();
    let twin = RunConfig {
        params: p.with_phi_hf(0.0)?,
        initial: cfg.initial.with_phase_shift(shift),
        ..cfg.clone()
    };
    let a = compute_traces(cfg)?;
    let b = compute_traces(&twin)?;
    let mut out = Vec::new();
    for ((name, x), (_, y)) in a.columns.iter().zip(&b.columns) {
        if name == "numeric" && cfg.hf_average {
            // raw traces differ by the drive ripple; the averaged column is the comparison
            continue;
        }
        let dev = x
            .iter()
            .zip(y)
            .filter_map(|(u, v)| Some((u.as_ref()? - v.as_ref()?).abs()))
            .fold(0.0, f64::max);
        out.push(Comparison {
            method: name.clone(),
            max_deviation: dev,
        });
    }
    Ok(out)
}

fn cmd_compare(args: &RunArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let runs = expand(args, "compare")?;
    let (_, cfg) = runs.into_iter().next().expect("at least one run");
    let report = compare_configs(&cfg)?;
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("method,max_deviation\n");
            for c in &report {
                s.push_str(&format!("{},{}\n", c.method, format_float(c.max_deviation)));
            }
            s
        }
        Format::Json => {
            let mut m = cfg.metadata("compare");
            m.insert("initial", cfg.initial.to_json());
            m.insert("t_start", json!(cfg.t_start));
            m.insert("t_end", json!(cfg.t_end));
            m.insert("report", json!(report));
            json_text(&json!(m))
        }
    };
    emit(&text, cfg.out.as_deref(), None, cfg.format, stdout)
}

fn cmd_constants(
    args: &ConstantsArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<()> {
    let format: Format = args.format.as_deref().unwrap_or("csv").parse()?;
    let rs = args
        .gamma_at
        .iter()
        .map(|s| parse_real(s))
        .collect::<CliResult<Vec<_>>>()?;
    let zeros = (1..=args.zeros)
        .map(bessel_j0_zero)
        .collect::<crate::Result<Vec<_>>>()?;
    let mut failed = false;
    type GammaRow = (f64, Result<(f64, f64), String>);
    let rows: Vec<GammaRow> = rs
        .iter()
        .map(|&r| {
            let g = analytic::gamma1(r).and_then(|g1| Ok((g1, analytic::gamma2(r)?)));
            (r, g.map_err(|e| e.to_string()))
        })
        .collect();
    for (r, row) in &rows {
        if let Err(e) = row {
            failed = true;
            let _ = writeln!(stderr, "gamma at r = {}: {e}", format_float(*r));
        }
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("# zeros of J0\nj,r_j\n");
            for (j, z) in zeros.iter().enumerate() {
                s.push_str(&format!("{},{}\n", j + 1, format_float(*z)));
            }
            if !rows.is_empty() {
                s.push_str("# gamma functions\nr,J0,H0,gamma1,gamma2\n");
                for (r, row) in &rows {
                    let (g1, g2) = row.clone().unwrap_or((f64::NAN, f64::NAN));
                    s.push_str(&format!(
                        "{},{},{},{},{}\n",
                        format_float(*r),
                        format_float(bessel_j0(*r)),
                        format_float(struve_h0(*r)),
                        format_float(g1),
                        format_float(g2)
                    ));
                }
            }
            s
        }
        Format::Json => {
            let gamma: Vec<Value> = rows
                .iter()
                .map(|(r, row)| match row {
                    Ok((g1, g2)) => json!({
                        "r": r, "J0": bessel_j0(*r), "H0": struve_h0(*r), "gamma1": g1, "gamma2": g2
                    }),
                    Err(e) => json!({ "r": r, "error": e }),
                })
                .collect();
            json_text(&json!({
                "tool": "spinres",
                "version": env!("CARGO_PKG_VERSION"),
                "zeros": zeros,
                "gamma": gamma,
            }))
        }
    };
    emit(&text, args.out.as_deref(), None, format, stdout)?;
    if failed {
        return Err(CliError::Numerical("some gamma entries failed".into()));
    }
    Ok(())
}

/// Runs the tool with explicit arguments and streams; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Constants(a) => cmd_constants(a, stdout, stderr),
        Command::Evolve(a) => cmd_evolve(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout, stderr),
        Command::Compare(a) => cmd_compare(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "spinres: {e}");
            e.exit_code()
        }
    }
}
