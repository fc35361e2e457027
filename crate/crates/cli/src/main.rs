//! `cascade-tracer`: sweeps, component traces, cascade reports, orbit counts,
//! boundary censuses and horseshoe certificates.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use cascades::census::{
    boundary_census, predict_cascades, verify_horseshoe, CensusConfig, Enumeration, Family,
};
use cascades::combinatorics::{count_row, numeric_census_crosscheck, Alphabet};
use cascades::continuation::export::{cascades_json, trace_lines};
use cascades::continuation::{
    check_index_conservation, check_index_orientation, continue_component, detect_cascades_with, ComponentTrace,
    ContinuationConfig,
};
use cascades::orbits::{find_orbit, NewtonOptions};
use cascades::output::{csv_header, fmt_real, json_header};
use cascades::sweep::{attracting_set_sweep, InitialPolicy, SweepConfig};
use cascades::{builtin_map, Error, MapDefinition};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};

const EXIT_VERDICT: u8 = 2;
const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "cascade-tracer", version, about = "Period-doubling cascades in parametrized maps")]
#[command(args_override_self = true)]
struct Cli {
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every stochastic choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// File of `key = value` lines overriding flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "CASCADE_TRACER_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Attracting-set sweep over a parameter grid (CSV).
    Sweep(SweepArgs),
    /// Trace the component through a seed orbit (JSON lines).
    Trace(TraceArgs),
    /// Cascades and index checks along a component (JSON).
    Cascades(CascadeArgs),
    /// Orbit count table for a symbolic model (CSV).
    Count(CountArgs),
    /// Entry and exit orbits on a parameter slab and the implied cascades (JSON).
    Census(CensusArgs),
    /// Horseshoe estimates for a map family (JSON).
    VerifyHorseshoe(HorseshoeArgs),
    /// Numerically classified orbits against the symbolic counts (CSV).
    Crosscheck(CrosscheckArgs),
}

#[derive(Args, Debug, Clone)]
struct MapArgs {
    #[arg(long)]
    map: String,
    /// Map parameter override `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, allow_hyphen_values = true)]
    lambda_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    lambda_max: f64,
    #[arg(long, default_value_t = 400)]
    count: usize,
    /// Initial condition, comma separated; zeros when absent.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    x0: Option<Coords>,
    #[arg(long, default_value_t = 1000)]
    transient: usize,
    #[arg(long, default_value_t = 200)]
    record: usize,
    /// fixed, carry_forward or fixed_point_seed.
    #[arg(long, default_value = "fixed")]
    policy: String,
    #[arg(long, default_value_t = 1e6)]
    escape_radius: f64,
}

#[derive(Args, Debug, Clone)]
struct SeedArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, allow_hyphen_values = true)]
    seed_lambda: f64,
    /// Seed point, comma separated.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    seed_x: Coords,
    #[arg(long, default_value_t = 1)]
    period: usize,
    /// Parameter domain `lo:hi`.
    #[arg(long, value_parser = parse_domain, allow_hyphen_values = true)]
    domain: (f64, f64),
    #[arg(long)]
    max_period: Option<usize>,
    #[arg(long)]
    max_step: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args, Debug)]
struct CascadeArgs {
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long, default_value_t = 4)]
    min_doublings: usize,
}

#[derive(Args, Debug)]
struct CountArgs {
    /// tent, cubic or tent_product.
    #[arg(long)]
    model: String,
    /// Period or range `a..b`.
    #[arg(long, value_parser = parse_range)]
    k: (u64, u64),
    /// Factors of the tent product.
    #[arg(long, default_value_t = 2)]
    n: usize,
}

#[derive(Args, Debug)]
struct CensusArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, allow_hyphen_values = true)]
    lambda0: f64,
    #[arg(long, allow_hyphen_values = true)]
    lambda1: f64,
    #[arg(long, default_value_t = 3)]
    max_period: usize,
    /// auto, symbolic or multistart.
    #[arg(long, default_value = "auto")]
    enumeration: String,
    /// Multi-start grid points per axis.
    #[arg(long, default_value_t = 200)]
    per_axis: usize,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
struct HorseshoeArgs {
    /// quadratic, cubic or coupled_quadratic.
    #[arg(long)]
    family: String,
    #[arg(long)]
    beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    lambda0: f64,
    #[arg(long, allow_hyphen_values = true)]
    lambda1: f64,
    /// Coupled family: number of maps.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Coupled family: coupling constant.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    coupling: f64,
    /// Coupled family: `K_i(λ) = (1 + k_step i) λ`.
    #[arg(long, default_value_t = 0.1)]
    k_step: f64,
}

#[derive(Args, Debug)]
struct CrosscheckArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    /// Period or range `a..b`.
    #[arg(long, value_parser = parse_range)]
    k: (u64, u64),
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Comma-separated coordinates.
#[derive(Clone, Debug)]
struct Coords(Vec<f64>);

fn parse_vector(s: &str) -> Result<Coords, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"))).collect::<Result<_, _>>().map(Coords)
}

fn parse_domain(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo = a.trim().parse::<f64>().map_err(|e| format!("`{a}`: {e}"))?;
    let hi = b.trim().parse::<f64>().map_err(|e| format!("`{b}`: {e}"))?;
    if !(lo < hi) {
        return Err(format!("empty domain {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once("..").unwrap_or((s, s));
    let lo = a.trim().parse::<u64>().map_err(|e| format!("`{a}`: {e}"))?;
    let hi = b.trim().parse::<u64>().map_err(|e| format!("`{b}`: {e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("bad range `{s}`"));
    }
    Ok((lo, hi))
}

/// `key = value` lines as `--key value` arguments; `#` starts a comment.
fn config_args(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), i + 1))?;
        let k = k.trim().replace('_', "-");
        let v = v.trim();
        match v {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ if k == "param" => out.push(format!("--param={v}")),
            _ => out.push(format!("--{k}={v}")),
        }
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Recorded flag set for output headers.
fn flag_list(args: &[String]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut it = args.iter().skip(1).peekable();
    while let Some(a) = it.next() {
        let Some(k) = a.strip_prefix("--") else {
            out.push(("command".to_string(), a.clone()));
            continue;
        };
        if let Some((k, v)) = k.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else if it.peek().is_some_and(|n| !n.starts_with("--")) {
            out.push((k.to_string(), it.next().unwrap().clone()));
        } else {
            out.push((k.to_string(), "true".to_string()));
        }
    }
    out
}

fn build_map(m: &MapArgs) -> cascades::Result<MapDefinition> {
    let overrides: BTreeMap<String, f64> = m.params.iter().cloned().collect();
    builtin_map(&m.map, &overrides)
}

fn continuation_config(s: &SeedArgs) -> ContinuationConfig {
    let mut cfg = ContinuationConfig { max_period: s.max_period, ..Default::default() };
    if let Some(h) = s.max_step {
        cfg.max_step = h;
    }
    if let Some(n) = s.max_steps {
        cfg.max_steps = n;
    }
    cfg
}

fn run_trace(s: &SeedArgs) -> Result<(MapDefinition, ComponentTrace), Failure> {
    let map = build_map(&s.map)?;
    if s.seed_x.0.len() != map.dimension {
        return Err(Failure::Usage(format!("--seed-x has {} coordinates, {} needs {}", s.seed_x.0.len(), map.name, map.dimension)));
    }
    let x = DVector::from_vec(s.seed_x.0.clone());
    let seed = find_orbit(&map, s.seed_lambda, &x, s.period, &NewtonOptions::default())?;
    let trace = continue_component(&map, &seed, s.domain, &continuation_config(s))?;
    Ok((map, trace))
}

enum Failure {
    Usage(String),
    Verdict(String),
    Error(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownMap(_) | Error::BadParameter(_) => Failure::Usage(e.to_string()),
            Error::CensusMismatch(_) | Error::ConservationViolation(_) | Error::InvalidBoundary(_) => {
                Failure::Verdict(e.to_string())
            }
            _ => Failure::Error(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(e.into())
    }
}

struct Output {
    text: String,
    /// Written beside the main output, with the given suffix.
    sidecar: Option<(String, String)>,
    verdict_failure: Option<String>,
}

impl Output {
    fn plain(text: String) -> Self {
        Self { text, sidecar: None, verdict_failure: None }
    }
}

fn sweep(a: &SweepArgs, flags: &[(String, String)]) -> Result<Output, Failure> {
    let map = build_map(&a.map)?;
    let x0 = DVector::from_vec(a.x0.clone().map(|c| c.0).unwrap_or_else(|| vec![0.0; map.dimension]));
    let mut cfg = SweepConfig::new(a.lambda_min, a.lambda_max, a.count, x0);
    cfg.transient_iterations = a.transient;
    cfg.record_iterations = a.record;
    cfg.escape_radius = a.escape_radius;
    cfg.policy = InitialPolicy::parse(&a.policy).ok_or_else(|| Failure::Usage(format!("unknown policy `{}`", a.policy)))?;
    let data = attracting_set_sweep(&map, &cfg)?;
    if data.all_escaped() {
        eprintln!("warning: every trajectory escaped; dataset is empty");
    }
    let mut text = csv_header(&map.name, flags);
    text.push_str("\nlambda,coordinate,value\n");
    for (l, i, x) in &data.rows {
        text.push_str(&format!("{},{i},{}\n", fmt_real(*l), fmt_real(*x)));
    }
    let mut summary = csv_header(&map.name, flags);
    summary.push_str("\nlambda,escaped\n");
    for (l, e) in &data.escapes {
        summary.push_str(&format!("{},{}\n", fmt_real(*l), u8::from(*e)));
    }
    summary.push_str(&format!("# escapes={}\n", data.escape_count()));
    Ok(Output { text, sidecar: Some((".escapes.csv".into(), summary)), verdict_failure: None })
}

fn trace(a: &TraceArgs, flags: &[(String, String)]) -> Result<Output, Failure> {
    let (map, t) = run_trace(&a.seed)?;
    let mut text = format!("{}\n", json_header(&map.name, flags));
    for line in trace_lines(&t) {
        text.push_str(&format!("{line}\n"));
    }
    Ok(Output::plain(text))
}

fn cascades_cmd(a: &CascadeArgs, flags: &[(String, String)]) -> Result<Output, Failure> {
    let (map, t) = run_trace(&a.seed)?;
    let records = detect_cascades_with(&t, a.min_doublings);
    let conservation = check_index_conservation(&t);
    let orientation = check_index_orientation(&t);
    let bad: Vec<Value> = conservation
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| json!({"kind": c.kind.as_str(), "lambda": c.lambda, "period": c.period, "detail": c.detail}))
        .collect();
    let doc = json!({
        "header": json_header(&map.name, flags),
        "component_id": t.component_id(),
        "start_termination": t.start_termination.as_str(),
        "termination": t.termination.as_str(),
        "cascades": cascades_json(&records),
        "conservation": {"events": conservation.checks.len(), "violations": bad},
        "orientation": {"checked": orientation.checked, "violations": orientation.violations},
    });
    let verdict = (!conservation.passed() || !orientation.passed()).then(|| {
        format!(
            "{} conservation and {} orientation violations",
            conservation.violations(),
            orientation.violations.len()
        )
    });
    Ok(Output { text: format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()), sidecar: None, verdict_failure: verdict })
}

fn count(a: &CountArgs, flags: &[(String, String)]) -> Result<Output, Failure> {
    let alphabet = match a.model.as_str() {
        "tent" => Alphabet::Tent,
        "cubic" | "tent3" => Alphabet::ThreeBranch,
        "tent_product" => Alphabet::TentProduct(a.n),
        m => return Err(Failure::Usage(format!("unknown model `{m}`"))),
    };
    let mut text = csv_header(&a.model, flags);
    text.push_str("\nk,zeta,orbits,nonflip,flip\n");
    for k in a.k.0..=a.k.1 {
        let r = count_row(alphabet, k)?;
        text.push_str(&format!("{},{},{},{},{}\n", r.k, r.zeta, r.orbits, r.nonflip, r.flip));
    }
    Ok(Output::plain(text))
}

fn census(a: &CensusArgs, seed: u64, flags: &[(String, String)]) -> Result<Output, Failure> {
    let map = build_map(&a.map)?;
    let enumeration = match a.enumeration.as_str() {
        "auto" => Enumeration::Auto,
        "symbolic" => Enumeration::Symbolic,
        "multistart" => Enumeration::MultiStart { per_axis: a.per_axis, seed },
        e => return Err(Failure::Usage(format!("unknown enumeration `{e}`"))),
    };
    let cfg = CensusConfig { enumeration, per_axis: a.per_axis, seed, beta: a.beta, ..Default::default() };
    let c = boundary_census(&map, a.lambda0, a.lambda1, a.max_period, &cfg)?;
    let prediction = match predict_cascades(&c) {
        Ok(p) => p.to_json(),
        Err(Error::NoPrediction(k)) => json!({"case": "none", "in": k, "out": k}),
        Err(e) => return Err(e.into()),
    };
    let doc = json!({"header": json_header(&map.name, flags), "census": c.to_json(), "prediction": prediction});
    Ok(Output::plain(format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())))
}

fn horseshoe(a: &HorseshoeArgs, flags: &[(String, String)]) -> Result<Output, Failure> {
    let family = match Family::parse(&a.family) {
        Some(Family::CoupledQuadratic { .. }) => Family::CoupledQuadratic { n: a.n, coupling: a.coupling, k_step: a.k_step },
        Some(f) => f,
        None => return Err(Failure::Usage(format!("unknown family `{}`", a.family))),
    };
    let cert = verify_horseshoe(family, a.beta, a.lambda0, a.lambda1)?;
    let doc = json!({"header": json_header(family.as_str(), flags), "certificate": cert.to_json()});
    let failed: Vec<String> = cert.checks.iter().filter(|(_, c)| !c.verdict.passed()).map(|(k, _)| k.to_string()).collect();
    let verdict = (!cert.passed()).then(|| format!("estimates failed: {}", failed.join(", ")));
    Ok(Output { text: format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()), sidecar: None, verdict_failure: verdict })
}

fn crosscheck(a: &CrosscheckArgs, flags: &[(String, String)]) -> Result<Output, Failure> {
    let map = build_map(&a.map)?;
    let mut text = csv_header(&map.name, flags);
    text.push_str("\nk,nonflip_numeric,nonflip_symbolic,flip_numeric,matched\n");
    let mut verdict = None;
    for k in a.k.0..=a.k.1 {
        match numeric_census_crosscheck(&map, a.lambda, k as usize) {
            Ok(r) => text.push_str(&format!("{},{},{},{},{}\n", r.k, r.nonflip_numeric, r.nonflip_symbolic, r.flip_numeric, r.matched)),
            Err(e @ Error::CensusMismatch(_)) => {
                text.push_str(&format!("{k},,,,false\n"));
                verdict.get_or_insert(e.to_string());
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Output { text, sidecar: None, verdict_failure: verdict })
}

fn write_output(out: &Option<PathBuf>, o: &Output) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            w.write_all(o.text.as_bytes())?;
            w.flush()?;
            if let Some((suffix, body)) = &o.sidecar {
                let mut p = path.clone().into_os_string();
                p.push(suffix);
                std::fs::write(&p, body).with_context(|| format!("writing {}", PathBuf::from(&p).display()))?;
            }
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(o.text.as_bytes())?;
            if let Some((_, body)) = &o.sidecar {
                for line in body.lines().filter(|l| l.starts_with("# escapes")) {
                    eprintln!("{}", line.trim_start_matches("# "));
                }
            }
        }
    }
    Ok(())
}

fn run(mut args: Vec<String>) -> Result<Option<String>, Failure> {
    if let Some(path) = config_path(&args) {
        args.extend(config_args(&path)?);
    }
    let matches = Cli::command().try_get_matches_from(&args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            let _ = e.print();
            Failure::Usage(String::new())
        }
        _ => Failure::Usage(e.render().to_string()),
    })?;
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Failure::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(|e| Failure::Error(e.into()))?;
    }
    let flags = flag_list(&args);
    let out = match &cli.command {
        Command::Sweep(a) => sweep(a, &flags)?,
        Command::Trace(a) => trace(a, &flags)?,
        Command::Cascades(a) => cascades_cmd(a, &flags)?,
        Command::Count(a) => count(a, &flags)?,
        Command::Census(a) => census(a, cli.seed, &flags)?,
        Command::VerifyHorseshoe(a) => horseshoe(a, &flags)?,
        Command::Crosscheck(a) => crosscheck(a, &flags)?,
    };
    write_output(&cli.out, &out)?;
    Ok(out.verdict_failure)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let help = args.iter().any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V" || a == "help");
    match run(args) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(v)) => {
            eprintln!("verdict: {v}");
            ExitCode::from(EXIT_VERDICT)
        }
        Err(Failure::Usage(m)) if m.is_empty() && help => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprint!("{m}");
            if !m.ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Verdict(m)) => {
            eprintln!("verdict: {m}");
            ExitCode::from(EXIT_VERDICT)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
