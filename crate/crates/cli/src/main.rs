//! `cel`: execution-time tables, rate sweeps and straggler simulations for
//! coded distributed computing.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cel_core::report::{self, RateSolution, SimulationReport};
use cel_core::{DesignEpsilon, Error, Format, RunConfig};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cel", version, about = "Coded-computation execution-time lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal k*, execution time and gains for each code family.
    Table1(Common),
    /// n * T_avg at a fixed rate across block lengths.
    RateSweep(Common),
    /// Asymptotically optimal MDS rate for a straggling parameter.
    FindRate {
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, value_parser = parse_format, default_value = "csv")]
        format: Format,
    },
    /// Monte-Carlo simulation of one code next to its analytic time.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write per-trial completion times as little-endian f64.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct Common {
    /// Comma-separated block lengths.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Comma-separated families: uncoded, mds, binary-random, polar-sc,
    /// polar-ml, rm-ml.
    #[arg(long, value_delimiter = ',')]
    family: Option<Vec<String>>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Defaults to $CEL_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Polar design erasure probability, or `auto` for 1 - R*.
    #[arg(long = "design-eps")]
    design_eps: Option<String>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// key=value file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

const DEFAULT_SIM_TRIALS: usize = 100_000;

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value
        .trim()
        .parse()
        .map_err(|_| input(format!("invalid value '{value}' for {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, Error> {
    value.split(',').map(|v| parse_value(key, v)).collect()
}

/// Reads `key = value` lines; `#` starts a comment.
fn read_config_file(path: &Path) -> Result<Common, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input(format!("cannot read config {}: {e}", path.display())))?;
    let mut c = Common::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| input(format!("{}:{}: expected key=value", path.display(), lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "n" => c.n = Some(parse_list(key, value)?),
            "family" => c.family = Some(value.split(',').map(|s| s.trim().to_string()).collect()),
            "mu" => c.mu = Some(parse_value(key, value)?),
            "trials" => c.trials = Some(parse_value(key, value)?),
            "seed" => c.seed = Some(parse_value(key, value)?),
            "design-eps" => c.design_eps = Some(value.to_string()),
            "rate" => c.rate = Some(parse_value(key, value)?),
            "k" => c.k = Some(parse_value(key, value)?),
            "out" => c.out = Some(PathBuf::from(value)),
            "format" => c.format = Some(value.to_string()),
            other => return Err(input(format!("{}:{}: unknown key '{other}'", path.display(), lineno + 1))),
        }
    }
    Ok(c)
}

/// Flags over config file over environment over `base`.
fn resolve(flags: Common, mut base: RunConfig) -> Result<(RunConfig, Option<PathBuf>, Format), Error> {
    let file = match &flags.config {
        Some(p) => read_config_file(p)?,
        None => Common::default(),
    };
    if let Ok(s) = std::env::var("CEL_SEED") {
        base.seed = parse_value("CEL_SEED", &s)?;
    }
    macro_rules! pick {
        ($field:ident) => {
            flags.$field.or(file.$field)
        };
    }
    if let Some(n) = pick!(n) {
        base.n_list = n;
    }
    if let Some(f) = pick!(family) {
        base.schemes = f.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(mu) = pick!(mu) {
        base.mu = mu;
    }
    if let Some(t) = pick!(trials) {
        base.trials = t;
    }
    if let Some(s) = pick!(seed) {
        base.seed = s;
    }
    if let Some(e) = pick!(design_eps) {
        base.design_epsilon = e.parse::<DesignEpsilon>()?;
    }
    if let Some(r) = pick!(rate) {
        base.rate = Some(r);
    }
    if let Some(k) = pick!(k) {
        base.k = Some(k);
    }
    let format = match pick!(format) {
        Some(f) => f.parse()?,
        None => Format::Csv,
    };
    Ok((base, pick!(out), format))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| input(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

#[derive(Serialize)]
struct RateRow {
    mu: f64,
    rate: String,
    residual: f64,
}

#[derive(Serialize)]
struct SimRow<'a> {
    family: &'a str,
    decoder: &'a str,
    n: usize,
    k: usize,
    mu: f64,
    trials: usize,
    seed: u64,
    mean_t: f64,
    std_err: Option<f64>,
    p50: f64,
    p90: f64,
    p99: f64,
    analytic_t_avg: f64,
    analytic_std_err: Option<f64>,
    analytic_method: String,
    z_score: Option<f64>,
}

fn sim_row(rep: &SimulationReport) -> SimRow<'_> {
    let pct: &BTreeMap<u8, f64> = &rep.run.percentiles;
    SimRow {
        family: &rep.family,
        decoder: &rep.run.decoder,
        n: rep.run.model.n,
        k: rep.run.model.k,
        mu: rep.run.model.mu,
        trials: rep.run.trials,
        seed: rep.run.seed,
        mean_t: rep.run.mean_t,
        std_err: rep.run.std_err,
        p50: pct[&50],
        p90: pct[&90],
        p99: pct[&99],
        analytic_t_avg: rep.analytic_t_avg,
        analytic_std_err: rep.analytic_std_err,
        analytic_method: rep.analytic_method.to_string(),
        z_score: rep.z_score,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Table1(common) => {
            let (cfg, out, format) = resolve(common, RunConfig::table1())?;
            let rows = report::table1(&cfg)?;
            report::write_rows(&rows, format, open_output(out.as_deref())?)
        }
        Command::RateSweep(common) => {
            let (cfg, out, format) = resolve(common, RunConfig::rate_sweep())?;
            let rows = report::rate_sweep(&cfg)?;
            report::write_rows(&rows, format, open_output(out.as_deref())?)
        }
        Command::FindRate { mu, format } => {
            let RateSolution { mu, rate, residual } = report::find_rate(mu)?;
            let row = RateRow {
                mu,
                rate: format!("{rate:.6}"),
                residual,
            };
            report::write_rows(&[row], format, open_output(None)?)
        }
        Command::Simulate { common, dump } => {
            let base = RunConfig {
                n_list: Vec::new(),
                schemes: Vec::new(),
                trials: DEFAULT_SIM_TRIALS,
                ..RunConfig::table1()
            };
            let (cfg, out, format) = resolve(common, base)?;
            let (rep, times) = report::simulate_with_times(&cfg)?;
            if let Some(path) = dump {
                let f = File::create(&path).map_err(|e| input(format!("cannot create {}: {e}", path.display())))?;
                cel_core::sim::write_times_le(&times, BufWriter::new(f))
                    .map_err(|e| input(format!("write failed: {e}")))?;
            }
            match format {
                Format::Csv => report::write_rows(&[sim_row(&rep)], format, open_output(out.as_deref())?),
                Format::Json => report::write_rows(&[rep], format, open_output(out.as_deref())?),
            }
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) => 2,
        Error::Convergence { .. } => 3,
        Error::InfeasibleCode(_) => 4,
        Error::NotDecodable { .. } => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cel: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
