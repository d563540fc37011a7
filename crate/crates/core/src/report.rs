//! Experiment drivers: the execution-time table, fixed-rate sweeps, the
//! optimal-rate solver and simulation cross-checks, plus CSV and JSON-lines
//! writers for their rows.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{
    build_polar, build_reed_muller_like, log2_exact, polar_reliability_order, polar_z_fill,
    sample_random_full_rank, CodeFamily,
};
use crate::erasure::{
    estimate_profile_mc, pe_polar_sc, sc_failure_from_z, Decoder, ErasureFailureProfile,
    ProfileSource,
};
use crate::error::{Error, Result};
use crate::exec_time::{
    argmin_k, metrics, rate_equation, solve_optimal_rate, t_avg_by_quadrature, t_avg_from_profile,
    t_avg_mds, ExecTimeReport, Method, StragglerModel,
};
use crate::nested::NestedFamily;
use crate::rng::{stream_id, substream};
use crate::sim::{simulate_completion_times, SimCode, SimRun};

/// A code family paired with its decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Uncoded,
    Mds,
    BinaryRandom,
    PolarSc,
    PolarMl,
    RmMl,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Uncoded,
        Scheme::Mds,
        Scheme::BinaryRandom,
        Scheme::PolarSc,
        Scheme::PolarMl,
        Scheme::RmMl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Uncoded => "uncoded",
            Scheme::Mds => "mds",
            Scheme::BinaryRandom => "binary-random",
            Scheme::PolarSc => "polar-sc",
            Scheme::PolarMl => "polar-ml",
            Scheme::RmMl => "rm-ml",
        }
    }

    pub fn family(self, design_epsilon: f64) -> CodeFamily {
        match self {
            Scheme::Uncoded => CodeFamily::Uncoded,
            Scheme::Mds => CodeFamily::Mds,
            Scheme::BinaryRandom => CodeFamily::BinaryRandom,
            Scheme::PolarSc | Scheme::PolarMl => CodeFamily::Polar { design_epsilon },
            Scheme::RmMl => CodeFamily::ReedMuller,
        }
    }

    pub fn decoder_name(self) -> &'static str {
        match self {
            Scheme::PolarSc => "sc",
            _ => "ml",
        }
    }

    pub fn needs_power_of_two(self) -> bool {
        matches!(self, Scheme::PolarSc | Scheme::PolarMl | Scheme::RmMl)
    }

    fn is_polar(self) -> bool {
        matches!(self, Scheme::PolarSc | Scheme::PolarMl)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Scheme::ALL.iter().map(|s| s.name()).collect();
                Error::input(format!("unknown family '{s}', expected one of {}", names.join(", ")))
            })
    }
}

/// Polar design erasure probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DesignEpsilon {
    /// `1 - R*` for the configured straggling parameter.
    Auto,
    Fixed(f64),
}

impl DesignEpsilon {
    pub fn resolve(self, mu: f64) -> Result<f64> {
        let eps = match self {
            DesignEpsilon::Auto => 1.0 - solve_optimal_rate(mu)?,
            DesignEpsilon::Fixed(e) => e,
        };
        CodeFamily::polar(eps)?;
        Ok(eps)
    }
}

impl FromStr for DesignEpsilon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auto" {
            return Ok(DesignEpsilon::Auto);
        }
        let e: f64 = s
            .parse()
            .map_err(|_| Error::input(format!("design epsilon must be a number or 'auto', got '{s}'")))?;
        CodeFamily::polar(e)?;
        Ok(DesignEpsilon::Fixed(e))
    }
}

pub const TABLE1_N: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];
pub const RATE_SWEEP_N: [usize; 4] = [1024, 2048, 4096, 8192];
pub const TABLE1_TRIALS: usize = 10_000;
pub const RATE_SWEEP_TRIALS: usize = 1000;
pub const TABLE1_DESIGN_EPSILON: f64 = 0.1;

/// Parameters shared by the experiment drivers.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n_list: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub mu: f64,
    /// Monte-Carlo trials per erasure count (profiles) or per run
    /// (simulation).
    pub trials: usize,
    pub seed: u64,
    pub design_epsilon: DesignEpsilon,
    pub rate: Option<f64>,
    pub k: Option<usize>,
}

impl RunConfig {
    pub fn table1() -> Self {
        Self {
            n_list: TABLE1_N.to_vec(),
            schemes: Scheme::ALL.to_vec(),
            mu: 1.0,
            trials: TABLE1_TRIALS,
            seed: 0,
            design_epsilon: DesignEpsilon::Fixed(TABLE1_DESIGN_EPSILON),
            rate: None,
            k: None,
        }
    }

    pub fn rate_sweep() -> Self {
        Self {
            n_list: RATE_SWEEP_N.to_vec(),
            schemes: Scheme::ALL[1..].to_vec(),
            trials: RATE_SWEEP_TRIALS,
            design_epsilon: DesignEpsilon::Auto,
            ..Self::table1()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::input("the list of n values is empty"));
        }
        if self.schemes.is_empty() {
            return Err(Error::input("no code family selected"));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::input(format!("straggling parameter must be positive, got {}", self.mu)));
        }
        if self.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n == 0) {
            return Err(Error::input(format!("n must be positive, got {n}")));
        }
        if self.schemes.iter().any(|s| s.needs_power_of_two()) {
            let bad: Vec<String> = self
                .n_list
                .iter()
                .filter(|&&n| log2_exact(n).is_err())
                .map(|n| n.to_string())
                .collect();
            if !bad.is_empty() {
                return Err(Error::input(format!(
                    "polar and RM codes need n to be a power of two; offending n: {}",
                    bad.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Execution times of one scheme for every `k = 1..=n` (or just `k = n`
/// when uncoded).
struct Curve {
    /// `times[k - 1]`; uncoded holds only `k = n`.
    times: Vec<f64>,
    std_err: Option<Vec<f64>>,
    method: Method,
}

fn uncoded_time(n: usize, mu: f64) -> Result<f64> {
    Ok(t_avg_mds(&StragglerModel::new(mu, n, n)?))
}

fn mds_curve(n: usize, mu: f64) -> Result<Vec<f64>> {
    (1..=n).map(|k| Ok(t_avg_mds(&StragglerModel::new(mu, n, k)?))).collect()
}

fn brc_time(n: usize, k: usize, mu: f64) -> Result<f64> {
    let model = StragglerModel::new(mu, n, k)?;
    t_avg_from_profile(&model, &ErasureFailureProfile::random_ensemble(n, k)?)
}

fn sc_time(n: usize, order: &[usize], k: usize, mu: f64) -> Result<f64> {
    let model = StragglerModel::new(mu, n, k)?;
    let info = &order[..k];
    t_avg_by_quadrature(&model, |e| {
        let mut z = vec![0.0; n];
        polar_z_fill(&mut z, e);
        sc_failure_from_z(&z, info)
    })
}

fn nested_family(scheme: Scheme, n: usize, design_epsilon: f64) -> Result<NestedFamily> {
    match scheme {
        Scheme::PolarMl => NestedFamily::polar(n, design_epsilon),
        Scheme::RmMl => NestedFamily::reed_muller(n),
        _ => Err(Error::input(format!("{scheme} is not a nested family"))),
    }
}

fn profile_method(profile: &ErasureFailureProfile) -> Method {
    match profile.source {
        ProfileSource::Exact => Method::EnumeratedProfile,
        ProfileSource::MonteCarlo { .. } => Method::MonteCarloProfile,
    }
}

fn curve(scheme: Scheme, n: usize, cfg: &RunConfig, design_epsilon: f64) -> Result<Curve> {
    let mu = cfg.mu;
    let closed = |times| Curve {
        times,
        std_err: None,
        method: Method::ClosedForm,
    };
    match scheme {
        Scheme::Uncoded => Ok(closed(vec![uncoded_time(n, mu)?])),
        Scheme::Mds => Ok(closed(mds_curve(n, mu)?)),
        Scheme::BinaryRandom => Ok(closed(
            (1..=n)
                .into_par_iter()
                .map(|k| brc_time(n, k, mu))
                .collect::<Result<_>>()?,
        )),
        Scheme::PolarSc => {
            let order = polar_reliability_order(n, design_epsilon)?;
            Ok(Curve {
                times: (1..=n)
                    .into_par_iter()
                    .map(|k| sc_time(n, &order, k, mu))
                    .collect::<Result<_>>()?,
                std_err: None,
                method: Method::Quadrature,
            })
        }
        Scheme::PolarMl | Scheme::RmMl => {
            let fam = nested_family(scheme, n, design_epsilon)?;
            let est = fam.estimate_all(cfg.trials, cfg.seed)?;
            let times = (1..=n)
                .map(|k| t_avg_from_profile(&StragglerModel::new(mu, n, k)?, est.profile(k)))
                .collect::<Result<_>>()?;
            let se = (1..=n).map(|k| est.t_avg_std_err(k, mu)).collect();
            Ok(Curve {
                times,
                std_err: Some(se),
                method: profile_method(est.profile(1)),
            })
        }
    }
}

/// One row per `(n, scheme)`: the optimal task count `k*`, its execution
/// time, the gap to the MDS optimum and the gain over uncoded computation.
pub fn table1(cfg: &RunConfig) -> Result<Vec<ExecTimeReport>> {
    cfg.validate()?;
    let eps = cfg.design_epsilon.resolve(cfg.mu)?;
    let cells: Vec<(usize, Scheme)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| cfg.schemes.iter().map(move |&s| (n, s)))
        .collect();
    cells
        .into_par_iter()
        .map(|(n, scheme)| {
            let c = curve(scheme, n, cfg, eps)?;
            let (k_star, t) = if scheme == Scheme::Uncoded {
                (n, c.times[0])
            } else {
                argmin_k(&c.times)
            };
            let t_unc = uncoded_time(n, cfg.mu)?;
            let (_, t_opt) = argmin_k(&mds_curve(n, cfg.mu)?);
            let (g_opt, g_cod) = metrics(t, t_opt, t_unc)?;
            let mc = c.method == Method::MonteCarloProfile;
            Ok(ExecTimeReport {
                family: scheme.family(eps).to_string(),
                decoder: scheme.decoder_name().to_string(),
                n,
                k: k_star,
                mu: cfg.mu,
                t_avg: t,
                method: c.method,
                k_star: Some(k_star),
                g_opt: Some(g_opt),
                g_cod: Some(g_cod),
                t_avg_std_err: c.std_err.map(|se| se[k_star - 1]),
                trials_per_i: mc.then_some(cfg.trials),
                design_epsilon: scheme.is_polar().then_some(eps),
            })
        })
        .collect()
}

/// One row of a fixed-rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSweepRow {
    pub family: String,
    pub decoder: String,
    pub n: usize,
    pub k: usize,
    pub rate: f64,
    pub mu: f64,
    /// `n * T_avg`.
    pub n_t_avg: f64,
    pub n_t_avg_std_err: Option<f64>,
    pub method: Method,
    pub trials_per_i: Option<usize>,
    pub design_epsilon: Option<f64>,
}

/// `n * T_avg` for every scheme at `k = round(n R)`, with `R` defaulting to
/// the asymptotically optimal rate. Uncoded computation is skipped.
pub fn rate_sweep(cfg: &RunConfig) -> Result<Vec<RateSweepRow>> {
    cfg.validate()?;
    let rate = match cfg.rate {
        Some(r) if r > 0.0 && r <= 1.0 => r,
        Some(r) => return Err(Error::input(format!("rate must lie in (0,1], got {r}"))),
        None => solve_optimal_rate(cfg.mu)?,
    };
    let eps = cfg.design_epsilon.resolve(cfg.mu)?;
    let cells: Vec<(usize, Scheme)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| {
            cfg.schemes
                .iter()
                .filter(|&&s| s != Scheme::Uncoded)
                .map(move |&s| (n, s))
        })
        .collect();
    cells
        .into_par_iter()
        .map(|(n, scheme)| {
            let k = ((n as f64 * rate).round() as usize).clamp(1, n);
            let model = StragglerModel::new(cfg.mu, n, k)?;
            let (t, se, method) = match scheme {
                Scheme::Mds => (t_avg_mds(&model), None, Method::ClosedForm),
                Scheme::BinaryRandom => (brc_time(n, k, cfg.mu)?, None, Method::ClosedForm),
                Scheme::PolarSc => {
                    let (_, prof) = build_polar(n, k, eps)?;
                    let t = t_avg_by_quadrature(&model, |e| pe_polar_sc(&prof, e))?;
                    (t, None, Method::Quadrature)
                }
                Scheme::PolarMl | Scheme::RmMl => {
                    let fam = nested_family(scheme, n, eps)?;
                    let (prof, harmonic_se) = fam.estimate_member(k, cfg.trials, cfg.seed)?;
                    let t = t_avg_from_profile(&model, &prof)?;
                    let method = profile_method(&prof);
                    (t, Some(harmonic_se / (cfg.mu * k as f64)), method)
                }
                Scheme::Uncoded => unreachable!("filtered above"),
            };
            let nf = n as f64;
            Ok(RateSweepRow {
                family: scheme.family(eps).to_string(),
                decoder: scheme.decoder_name().to_string(),
                n,
                k,
                rate,
                mu: cfg.mu,
                n_t_avg: nf * t,
                n_t_avg_std_err: se.map(|s| nf * s),
                trials_per_i: (method == Method::MonteCarloProfile).then_some(cfg.trials),
                method,
                design_epsilon: scheme.is_polar().then_some(eps),
            })
        })
        .collect()
}

/// Optimal rate and the residual of its defining equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSolution {
    pub mu: f64,
    pub rate: f64,
    pub residual: f64,
}

pub fn find_rate(mu: f64) -> Result<RateSolution> {
    let rate = solve_optimal_rate(mu)?;
    Ok(RateSolution {
        mu,
        rate,
        residual: rate_equation(mu, rate),
    })
}

/// A simulation run next to the analytic execution time of the same code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub family: String,
    #[serde(flatten)]
    pub run: SimRun,
    pub analytic_t_avg: f64,
    pub analytic_std_err: Option<f64>,
    pub analytic_method: Method,
    pub z_score: Option<f64>,
}

/// Stream item reserved for sampling the random generator matrix.
const MATRIX_STREAM: u64 = 0xffff_ffff;

/// Simulates one scheme at one `(n, k)` and compares with analytics. For
/// binary random codes a single matrix is drawn from the seed and its own
/// failure profile is the analytic reference.
pub fn simulate(cfg: &RunConfig) -> Result<SimulationReport> {
    simulate_with_times(cfg).map(|(rep, _)| rep)
}

/// [`simulate`] together with the per-trial completion times.
pub fn simulate_with_times(cfg: &RunConfig) -> Result<(SimulationReport, Vec<f64>)> {
    cfg.validate()?;
    let (&n, &scheme) = match (cfg.n_list.as_slice(), cfg.schemes.as_slice()) {
        ([n], [s]) => (n, s),
        _ => return Err(Error::input("simulate takes exactly one n and one family")),
    };
    let k = match (scheme, cfg.k) {
        (Scheme::Uncoded, None) => n,
        (_, Some(k)) => k,
        (_, None) => return Err(Error::input(format!("--k is required for {scheme}"))),
    };
    let eps = cfg.design_epsilon.resolve(cfg.mu)?;
    scheme.family(eps).validate(n, k)?;
    let model = StragglerModel::new(cfg.mu, n, k)?;
    let profile_trials = cfg.trials.min(TABLE1_TRIALS);
    let (code, decoder, analytic, analytic_se, method) = match scheme {
        Scheme::Uncoded => (SimCode::Uncoded { n }, Decoder::Ml, t_avg_mds(&model), None, Method::ClosedForm),
        Scheme::Mds => (SimCode::Mds { n, k }, Decoder::Ml, t_avg_mds(&model), None, Method::ClosedForm),
        Scheme::BinaryRandom => {
            let mut rng = substream(cfg.seed, stream_id(MATRIX_STREAM, 0));
            let g = sample_random_full_rank(n, k, &mut rng)?;
            let prof = estimate_profile_mc(&g, &Decoder::Ml, profile_trials, cfg.seed)?;
            let (t, se) = profile_time(&model, &prof)?;
            (SimCode::Linear(g), Decoder::Ml, t, se, profile_method(&prof))
        }
        Scheme::PolarSc => {
            let (g, prof) = build_polar(n, k, eps)?;
            let t = t_avg_by_quadrature(&model, |e| pe_polar_sc(&prof, e))?;
            (SimCode::Linear(g), Decoder::Sc(prof.info_set), t, None, Method::Quadrature)
        }
        Scheme::PolarMl | Scheme::RmMl => {
            let g = if scheme == Scheme::RmMl {
                build_reed_muller_like(n, k)?
            } else {
                build_polar(n, k, eps)?.0
            };
            let fam = nested_family(scheme, n, eps)?;
            let (prof, harmonic_se) = fam.estimate_member(k, profile_trials, cfg.seed)?;
            let t = t_avg_from_profile(&model, &prof)?;
            let method = profile_method(&prof);
            let se = (method == Method::MonteCarloProfile).then(|| harmonic_se / (cfg.mu * k as f64));
            (SimCode::Linear(g), Decoder::Ml, t, se, method)
        }
    };
    let times = simulate_completion_times(&model, &code, &decoder, cfg.trials, cfg.seed)?;
    let tag = if matches!(decoder, Decoder::Sc(_)) { "sc" } else { "ml" };
    let run = SimRun::from_times(model, tag, cfg.seed, &times)?;
    let z_score = run.std_err.map(|se| {
        let s = (se * se + analytic_se.unwrap_or(0.0).powi(2)).sqrt();
        (run.mean_t - analytic) / s
    });
    let rep = SimulationReport {
        family: scheme.family(eps).to_string(),
        run,
        analytic_t_avg: analytic,
        analytic_std_err: analytic_se,
        analytic_method: method,
        z_score,
    };
    Ok((rep, times))
}

/// Execution time from a profile with a standard error that treats the
/// strata as independent.
fn profile_time(model: &StragglerModel, prof: &ErasureFailureProfile) -> Result<(f64, Option<f64>)> {
    let t = t_avg_from_profile(model, prof)?;
    let se = match &prof.source {
        ProfileSource::Exact => None,
        ProfileSource::MonteCarlo { std_err, .. } => {
            let var: f64 = std_err
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, s)| (s / i as f64).powi(2))
                .sum();
            Some(var.sqrt() / (model.mu * model.k as f64))
        }
    };
    Ok((t, se))
}

/// Output encodings for report rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::input(format!("unknown format '{other}', expected csv or json"))),
        }
    }
}

/// Writes rows as CSV with a header line, or as one JSON object per line.
pub fn write_rows<T: Serialize, W: Write>(rows: &[T], format: Format, out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::input(format!("write failed: {e}"));
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            for row in rows {
                w.serialize(row)
                    .map_err(|e| Error::input(format!("csv write failed: {e}")))?;
            }
            w.flush().map_err(io)
        }
        Format::Json => {
            let mut out = out;
            for row in rows {
                serde_json::to_writer(&mut out, row)
                    .map_err(|e| Error::input(format!("json write failed: {e}")))?;
                out.write_all(b"\n").map_err(io)?;
            }
            out.flush().map_err(io)
        }
    }
}
