//! Monte-Carlo straggler simulation.
//!
//! Each trial draws `n` shifted-exponential finish times, orders the nodes
//! by finish time and reports the time at which the finished set first
//! becomes decodable. Trials run in fixed-size chunks, each on its own random
//! sub-stream, so a run is reproducible for any number of worker threads.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::log2_exact;
use crate::erasure::{butterfly, Decoder, CHUNK};
use crate::error::{Error, Result};
use crate::exec_time::StragglerModel;
use crate::gf2::{EchelonBasis, Gf2Matrix};
use crate::rng::{open_unit, stream_id, substream, Stream};

/// Draws one finish time per node: `T_i = (1 - ln U_i / μ) / k`.
pub fn sample_finish_times<R: rand::Rng + ?Sized>(model: &StragglerModel, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; model.n];
    fill_finish_times(model, rng, &mut out);
    out
}

fn fill_finish_times<R: rand::Rng + ?Sized>(model: &StragglerModel, rng: &mut R, out: &mut [f64]) {
    let inv_k = 1.0 / model.k as f64;
    for t in out.iter_mut() {
        *t = (1.0 - open_unit(rng).ln() / model.mu) * inv_k;
    }
}

/// Node indices sorted by finish time, ties broken by index.
fn finish_order(times: &[f64], order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..times.len());
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
}

/// Finish time of the shortest prefix of nodes (in finish order) whose set
/// of completed indices satisfies `decodable`.
pub fn job_completion_time<F>(times: &[f64], mut decodable: F) -> Result<f64>
where
    F: FnMut(&[usize]) -> bool,
{
    let mut order = Vec::new();
    finish_order(times, &mut order);
    for m in 1..=order.len() {
        if decodable(&order[..m]) {
            return Ok(times[order[m - 1]]);
        }
    }
    Err(Error::InfeasibleCode(format!(
        "all {} nodes finished without a decodable set",
        times.len()
    )))
}

/// Code under simulation.
#[derive(Clone, Debug, PartialEq)]
pub enum SimCode {
    /// `k = n`; every node is needed.
    Uncoded { n: usize },
    /// Any `k` finished nodes suffice.
    Mds { n: usize, k: usize },
    /// Binary generator matrix, decoded with ML or SC.
    Linear(Gf2Matrix),
}

impl SimCode {
    pub fn n(&self) -> usize {
        match self {
            SimCode::Uncoded { n } | SimCode::Mds { n, .. } => *n,
            SimCode::Linear(g) => g.cols(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            SimCode::Uncoded { n } => *n,
            SimCode::Mds { k, .. } => *k,
            SimCode::Linear(g) => g.rows(),
        }
    }
}

/// Result of a simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub model: StragglerModel,
    pub decoder: String,
    pub trials: usize,
    pub seed: u64,
    pub mean_t: f64,
    /// Absent for a single trial.
    pub std_err: Option<f64>,
    pub percentiles: BTreeMap<u8, f64>,
}

impl SimRun {
    /// Summary statistics of per-trial completion times.
    pub fn from_times(model: StragglerModel, decoder: &str, seed: u64, times: &[f64]) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::input("at least one trial is required"));
        }
        let n = times.len() as f64;
        let mean_t = times.iter().sum::<f64>() / n;
        let std_err = (times.len() > 1).then(|| {
            let ss: f64 = times.iter().map(|t| (t - mean_t).powi(2)).sum();
            (ss / (n - 1.0) / n).sqrt()
        });
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let percentiles = [50u8, 90, 99]
            .into_iter()
            .map(|p| {
                let rank = ((p as f64 / 100.0) * n).ceil().max(1.0) as usize;
                (p, sorted[rank - 1])
            })
            .collect();
        Ok(Self {
            model,
            decoder: decoder.to_string(),
            trials: times.len(),
            seed,
            mean_t,
            std_err,
            percentiles,
        })
    }
}

enum Rule<'a> {
    All,
    AnyK,
    Ml(Vec<Vec<u64>>),
    Sc(&'a [usize]),
}

struct Scratch {
    times: Vec<f64>,
    order: Vec<usize>,
    basis: EchelonBasis,
    col: Vec<u64>,
    erased: Vec<bool>,
}

struct Evaluator<'a> {
    model: StragglerModel,
    rule: Rule<'a>,
}

impl<'a> Evaluator<'a> {
    fn new(model: &StragglerModel, code: &SimCode, decoder: &'a Decoder) -> Result<Self> {
        if code.n() != model.n || code.k() != model.k {
            return Err(Error::input(format!(
                "code is ({},{}), model is ({},{})",
                code.n(),
                code.k(),
                model.n,
                model.k
            )));
        }
        let rule = match (code, decoder) {
            (SimCode::Uncoded { .. }, Decoder::Ml) => Rule::All,
            (SimCode::Mds { .. }, Decoder::Ml) => Rule::AnyK,
            (SimCode::Linear(g), Decoder::Ml) => {
                let rank = g.rank();
                if rank < g.rows() {
                    return Err(Error::rank_deficient(rank, g.rows()));
                }
                Rule::Ml(g.columns())
            }
            (SimCode::Linear(g), Decoder::Sc(info)) => {
                log2_exact(g.cols())?;
                let mut seen = vec![false; g.cols()];
                for &i in info {
                    if i >= g.cols() || std::mem::replace(&mut seen[i], true) {
                        return Err(Error::input(format!("invalid information index {i}")));
                    }
                }
                if info.len() != g.rows() {
                    return Err(Error::input(format!(
                        "information set has {} indices, code dimension is {}",
                        info.len(),
                        g.rows()
                    )));
                }
                Rule::Sc(info)
            }
            (_, Decoder::Sc(_)) => {
                return Err(Error::input("SC decoding needs a generator matrix"));
            }
        };
        Ok(Self { model: *model, rule })
    }

    fn scratch(&self) -> Scratch {
        let (n, k) = (self.model.n, self.model.k);
        Scratch {
            times: vec![0.0; n],
            order: Vec::with_capacity(n),
            basis: EchelonBasis::new(k),
            col: vec![0; k.div_ceil(64).max(1)],
            erased: vec![false; n],
        }
    }

    fn completion(&self, s: &mut Scratch) -> f64 {
        let (n, k) = (self.model.n, self.model.k);
        match &self.rule {
            Rule::All => s.times.iter().copied().fold(f64::MIN, f64::max),
            Rule::AnyK => {
                let (_, kth, _) = s.times.select_nth_unstable_by(k - 1, f64::total_cmp);
                *kth
            }
            Rule::Ml(cols) => {
                finish_order(&s.times, &mut s.order);
                s.basis.clear();
                for &j in &s.order {
                    s.col.copy_from_slice(&cols[j]);
                    if s.basis.insert(&mut s.col) && s.basis.rank() == k {
                        return s.times[j];
                    }
                }
                unreachable!("generator rank was checked up front")
            }
            Rule::Sc(info) => {
                finish_order(&s.times, &mut s.order);
                // smallest prefix length m in [k, n] that SC decodes
                let (mut lo, mut hi) = (k, n);
                while lo < hi {
                    let m = lo + (hi - lo) / 2;
                    if sc_prefix_decodes(&s.order, m, info, &mut s.erased) {
                        hi = m;
                    } else {
                        lo = m + 1;
                    }
                }
                s.times[s.order[lo - 1]]
            }
        }
    }
}

fn sc_prefix_decodes(order: &[usize], m: usize, info: &[usize], e: &mut [bool]) -> bool {
    e.fill(false);
    for &j in &order[m..] {
        e[j] = true;
    }
    butterfly(e);
    info.iter().all(|&i| !e[i])
}

fn decoder_tag(code: &SimCode, decoder: &Decoder) -> &'static str {
    match (code, decoder) {
        (SimCode::Linear(_), Decoder::Sc(_)) => "sc",
        _ => "ml",
    }
}

/// Per-trial completion times. Two calls with the same model, seed and
/// trial count see identical node finish times, whatever the code.
pub fn simulate_completion_times(
    model: &StragglerModel,
    code: &SimCode,
    decoder: &Decoder,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::input("at least one trial is required"));
    }
    let eval = Evaluator::new(model, code, decoder)?;
    let chunks = trials.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(trials - c * CHUNK);
            let mut rng: Stream = substream(seed, stream_id(0, c as u64));
            let mut s = eval.scratch();
            (0..len)
                .map(|_| {
                    fill_finish_times(model, &mut rng, &mut s.times);
                    eval.completion(&mut s)
                })
                .collect()
        })
        .collect();
    Ok(per_chunk.concat())
}

/// Runs `trials` independent trials and summarizes them.
pub fn run_simulation(
    model: &StragglerModel,
    code: &SimCode,
    decoder: &Decoder,
    trials: usize,
    seed: u64,
) -> Result<SimRun> {
    let times = simulate_completion_times(model, code, decoder, trials, seed)?;
    SimRun::from_times(*model, decoder_tag(code, decoder), seed, &times)
}

/// Writes completion times as consecutive little-endian `f64` values.
pub fn write_times_le<W: Write>(times: &[f64], mut out: W) -> std::io::Result<()> {
    for t in times {
        out.write_all(&t.to_le_bytes())?;
    }
    out.flush()
}
