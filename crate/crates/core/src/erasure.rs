//! Decoding-failure probabilities over erasure channels.
//!
//! `p(i, k)` is the probability that decoding fails when `i` of the `n` coded
//! symbols are erased uniformly at random. Combined with binomial weights it
//! gives the block failure probability `P_e(ε)` on BEC(ε); the closed forms
//! for MDS codes and the full-rank random ensemble are exact, polar codes
//! under successive cancellation use the bit-channel product, and everything
//! else is estimated per erasure count.

use std::io::{Read, Write};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{log2_exact, polar_z_profile, BitChannelProfile};
use crate::error::{Error, Result};
use crate::gf2::{EchelonBasis, Gf2Matrix};
use crate::rng::{stream_id, substream};

/// Strata with at most this many erasure patterns are enumerated exactly.
pub const EXACT_ENUMERATION_LIMIT: f64 = 1e6;

/// Default number of sampled patterns per Monte-Carlo stratum.
pub const DEFAULT_TRIALS_PER_I: usize = 10_000;

pub(crate) const CHUNK: usize = 1024;

/// How a failure profile was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProfileSource {
    Exact,
    /// Per-stratum binomial standard errors; zero for strata that were
    /// enumerated exactly or are forced by dimension counting.
    MonteCarlo { trials_per_i: usize, std_err: Vec<f64> },
}

/// Conditional failure probabilities `p[i]`, `i = 0..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErasureFailureProfile {
    pub n: usize,
    pub k: usize,
    pub p: Vec<f64>,
    pub source: ProfileSource,
}

impl ErasureFailureProfile {
    pub fn exact(n: usize, k: usize, p: Vec<f64>) -> Result<Self> {
        let prof = Self {
            n,
            k,
            p,
            source: ProfileSource::Exact,
        };
        prof.validate()?;
        Ok(prof)
    }

    /// `p[i] = 1` exactly when more than `n - k` symbols are erased.
    pub fn mds(n: usize, k: usize) -> Result<Self> {
        check_nk(n, k)?;
        Self::exact(n, k, (0..=n).map(|i| if i > n - k { 1.0 } else { 0.0 }).collect())
    }

    /// Ensemble-average profile of full-rank random binary codes.
    pub fn random_ensemble(n: usize, k: usize) -> Result<Self> {
        check_nk(n, k)?;
        Self::exact(n, k, (0..=n).map(|i| pf_random_ensemble(n, k, i)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        check_nk(self.n, self.k)?;
        if self.p.len() != self.n + 1 {
            return Err(Error::input(format!(
                "profile has {} entries, expected n + 1 = {}",
                self.p.len(),
                self.n + 1
            )));
        }
        if let Some(i) = self.p.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input(format!("p[{i}] = {} outside [0,1]", self.p[i])));
        }
        if let ProfileSource::MonteCarlo { std_err, .. } = &self.source {
            if std_err.len() != self.n + 1 {
                return Err(Error::input("std_err length must be n + 1"));
            }
        }
        Ok(())
    }

    pub fn std_err(&self, i: usize) -> f64 {
        match &self.source {
            ProfileSource::Exact => 0.0,
            ProfileSource::MonteCarlo { std_err, .. } => std_err[i],
        }
    }

    /// Writes `i,p,std_err` rows for `i = 0..=n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| Error::input(format!("csv write failed: {e}"));
        w.write_record(["i", "p", "std_err"]).map_err(io)?;
        for (i, p) in self.p.iter().enumerate() {
            w.write_record([i.to_string(), p.to_string(), self.std_err(i).to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::input(format!("csv write failed: {e}")))
    }

    /// Reads the CSV form written by [`write_csv`](Self::write_csv). Any
    /// nonzero standard error marks the profile as a Monte-Carlo estimate.
    pub fn read_csv<R: Read>(input: R, k: usize) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(input);
        let headers = r
            .headers()
            .map_err(|e| Error::input(format!("csv read failed: {e}")))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["i", "p", "std_err"] {
            return Err(Error::input("profile header must be i,p,std_err"));
        }
        let mut p = Vec::new();
        let mut se = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::input(format!("csv read failed: {e}")))?;
            let field = |c: usize| -> Result<f64> {
                rec.get(c)
                    .ok_or_else(|| Error::input(format!("row {row}: missing column {c}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::input(format!("row {row}: {e}")))
            };
            if field(0)? as usize != row {
                return Err(Error::input(format!("row {row}: i out of sequence")));
            }
            p.push(field(1)?);
            se.push(field(2)?);
        }
        let n = p.len().checked_sub(1).ok_or_else(|| Error::input("empty profile"))?;
        let source = if se.iter().any(|&s| s != 0.0) {
            ProfileSource::MonteCarlo { trials_per_i: 0, std_err: se }
        } else {
            ProfileSource::Exact
        };
        let prof = Self { n, k, p, source };
        prof.validate()?;
        Ok(prof)
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::input(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    Ok(())
}

/// `ln(m!)` for `m = 0..=n`, accumulated with compensated summation.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    out.push(0.0);
    for m in 1..=n {
        let y = (m as f64).ln() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        out.push(sum);
    }
    out
}

/// Binomial(n, ε) probability masses for `i = 0..=n`, computed in the log
/// domain so that large `n` neither overflows nor underflows prematurely.
pub fn binomial_weights(n: usize, epsilon: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    if epsilon <= 0.0 {
        w[0] = 1.0;
        return w;
    }
    if epsilon >= 1.0 {
        w[n] = 1.0;
        return w;
    }
    let lf = ln_factorials(n);
    let (le, lq) = (epsilon.ln(), (-epsilon).ln_1p());
    for (i, wi) in w.iter_mut().enumerate() {
        let lc = lf[n] - lf[i] - lf[n - i];
        *wi = (lc + i as f64 * le + (n - i) as f64 * lq).exp();
    }
    w
}

/// Probability that a full-rank random `k x n` generator loses full row rank
/// after erasing `i` uniformly chosen columns.
pub fn pf_random_ensemble(n: usize, k: usize, i: usize) -> f64 {
    assert!(k >= 1 && k <= n && i <= n, "invalid (n, k, i) = ({n}, {k}, {i})");
    if i > n - k {
        return 1.0;
    }
    // ln prod_{j=1..k} (1 - 2^{j-1-m}) for m columns
    let ln_independent = |m: usize| -> f64 {
        (1..=k)
            .map(|j| (-(2f64).powi(j as i32 - 1 - m as i32)).ln_1p())
            .sum()
    };
    if i == 0 {
        return 0.0;
    }
    let diff = ln_independent(n - i) - ln_independent(n);
    (-diff.exp_m1()).clamp(0.0, 1.0)
}

/// Failure probability of an `(n, k)` MDS code on BEC(ε): more than `n - k`
/// erasures.
pub fn pe_mds(n: usize, k: usize, epsilon: f64) -> f64 {
    assert!(k >= 1 && k <= n, "invalid (n, k) = ({n}, {k})");
    binomial_weights(n, epsilon)[n - k + 1..].iter().sum::<f64>().min(1.0)
}

/// Block failure probability on BEC(ε) implied by a per-count profile.
pub fn pe_from_profile(profile: &ErasureFailureProfile, epsilon: f64) -> f64 {
    let w = binomial_weights(profile.n, epsilon);
    w.iter()
        .zip(&profile.p)
        .skip(1)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .min(1.0)
}

/// SC failure probability of a polar code on BEC(ε), with the information set
/// fixed at design time and the bit-channels re-evaluated at `epsilon`.
pub fn pe_polar_sc(profile: &BitChannelProfile, epsilon: f64) -> f64 {
    let z = polar_z_profile(profile.n, epsilon).expect("profile length is a power of two");
    sc_failure_from_z(&z, &profile.info_set)
}

pub(crate) fn sc_failure_from_z(z: &[f64], info_set: &[usize]) -> f64 {
    let ln_success: f64 = info_set.iter().map(|&i| (-z[i]).ln_1p()).sum();
    (-ln_success.exp_m1()).clamp(0.0, 1.0)
}

/// Evaluates the SC bit-channel erasure indicators for a fixed erasure
/// pattern: pairs combine as (OR, AND), top level first.
pub fn sc_bit_erasures(n: usize, erased: &[usize]) -> Result<Vec<bool>> {
    log2_exact(n)?;
    let mut e = vec![false; n];
    for &j in erased {
        if j >= n {
            return Err(Error::input(format!("erased index {j} out of range for n = {n}")));
        }
        e[j] = true;
    }
    butterfly(&mut e);
    Ok(e)
}

pub(crate) fn butterfly(e: &mut [bool]) {
    let n = e.len();
    let mut block = n;
    while block >= 2 {
        let half = block / 2;
        for start in (0..n).step_by(block) {
            for j in start..start + half {
                let (a, b) = (e[j], e[j + half]);
                e[j] = a || b;
                e[j + half] = a && b;
            }
        }
        block = half;
    }
}

/// Whether successive cancellation recovers every information bit under the
/// given erasure pattern.
pub fn sc_pattern_decodable(n: usize, info_set: &[usize], erased: &[usize]) -> Result<bool> {
    let e = sc_bit_erasures(n, erased)?;
    Ok(info_set.iter().all(|&i| !e[i]))
}

/// Whether ML (block-MAP) decoding succeeds: the unerased columns have full
/// row rank.
pub fn ml_pattern_decodable(g: &Gf2Matrix, erased: &[usize]) -> Result<bool> {
    g.check_columns(erased)?;
    let k = g.rows();
    let n = g.cols();
    if n - distinct(erased) < k {
        return Ok(false);
    }
    let mut is_erased = vec![false; n];
    for &j in erased {
        is_erased[j] = true;
    }
    let cols = g.columns();
    let mut basis = EchelonBasis::new(k);
    for (j, mut col) in cols.into_iter().enumerate() {
        if !is_erased[j] {
            basis.insert(&mut col);
            if basis.rank() == k {
                return Ok(true);
            }
        }
    }
    Ok(basis.rank() == k)
}

fn distinct(idx: &[usize]) -> usize {
    let mut v = idx.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Decoder used when classifying erasure patterns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decoder {
    Ml,
    /// Successive cancellation with the given information set.
    Sc(Vec<usize>),
}

/// `C(n, i)` as a float.
pub(crate) fn binomial(n: usize, i: usize) -> f64 {
    let i = i.min(n - i);
    (0..i).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Advances `c` to the next `i`-subset of `0..n` in lexicographic order.
pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let i = c.len();
    let mut pos = i;
    while pos > 0 {
        pos -= 1;
        if c[pos] < n - i + pos {
            c[pos] += 1;
            for q in pos + 1..i {
                c[q] = c[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Estimates `p(i, k)` for a monotone decodability predicate on erasure
/// patterns (`erased` is passed sorted ascending).
///
/// Strata with at most [`EXACT_ENUMERATION_LIMIT`] patterns are enumerated;
/// the rest draw `trials_per_i` uniform `i`-subsets each. Stratum `i`, chunk
/// `c` draws from sub-stream `(i, c)` of `seed`, so the result depends only
/// on the inputs and not on the thread count.
pub fn estimate_profile_with<F>(
    n: usize,
    k: usize,
    trials_per_i: usize,
    seed: u64,
    decodable: F,
) -> Result<ErasureFailureProfile>
where
    F: Fn(&[usize]) -> bool + Sync,
{
    stratified_profile(n, k, trials_per_i, seed, EXACT_ENUMERATION_LIMIT, decodable)
}

/// Like [`estimate_profile_with`] but samples every stratum, however small.
pub fn sample_profile_with<F>(
    n: usize,
    k: usize,
    trials_per_i: usize,
    seed: u64,
    decodable: F,
) -> Result<ErasureFailureProfile>
where
    F: Fn(&[usize]) -> bool + Sync,
{
    stratified_profile(n, k, trials_per_i, seed, 0.0, decodable)
}

fn stratified_profile<F>(
    n: usize,
    k: usize,
    trials_per_i: usize,
    seed: u64,
    enumeration_limit: f64,
    decodable: F,
) -> Result<ErasureFailureProfile>
where
    F: Fn(&[usize]) -> bool + Sync,
{
    check_nk(n, k)?;
    if trials_per_i == 0 {
        return Err(Error::input("trials_per_i must be at least 1"));
    }
    let all_enumerated = (1..=n - k).all(|i| binomial(n, i) <= enumeration_limit);
    let strata: Vec<(f64, f64)> = (1..=n - k)
        .into_par_iter()
        .map(|i| {
            let total = binomial(n, i);
            if total <= enumeration_limit {
                let mut c: Vec<usize> = (0..i).collect();
                let mut fails = 0u64;
                loop {
                    if !decodable(&c) {
                        fails += 1;
                    }
                    if !next_combination(&mut c, n) {
                        break;
                    }
                }
                (fails as f64 / total, 0.0)
            } else {
                let chunks = trials_per_i.div_ceil(CHUNK);
                let fails: u64 = (0..chunks)
                    .into_par_iter()
                    .map(|c| {
                        let mut rng = substream(seed, stream_id(i as u64, c as u64));
                        let count = CHUNK.min(trials_per_i - c * CHUNK);
                        let mut fails = 0u64;
                        for _ in 0..count {
                            let mut e = sample(&mut rng, n, i).into_vec();
                            e.sort_unstable();
                            if !decodable(&e) {
                                fails += 1;
                            }
                        }
                        fails
                    })
                    .sum();
                let p = fails as f64 / trials_per_i as f64;
                (p, (p * (1.0 - p) / trials_per_i as f64).sqrt())
            }
        })
        .collect();

    let mut p = vec![0.0; n + 1];
    let mut se = vec![0.0; n + 1];
    for (i, (pi, si)) in strata.into_iter().enumerate() {
        p[i + 1] = pi;
        se[i + 1] = si;
    }
    for v in &mut p[n - k + 1..] {
        *v = 1.0;
    }
    let source = if all_enumerated {
        ProfileSource::Exact
    } else {
        ProfileSource::MonteCarlo { trials_per_i, std_err: se }
    };
    let prof = ErasureFailureProfile { n, k, p, source };
    prof.validate()?;
    Ok(prof)
}

/// Estimates the failure profile of a specific generator under `decoder`.
pub fn estimate_profile_mc(
    g: &Gf2Matrix,
    decoder: &Decoder,
    trials_per_i: usize,
    seed: u64,
) -> Result<ErasureFailureProfile> {
    let (k, n) = (g.rows(), g.cols());
    let rank = g.rank();
    if rank < k {
        return Err(Error::rank_deficient(rank, k));
    }
    match decoder {
        Decoder::Ml => {
            let cols = g.columns();
            estimate_profile_with(n, k, trials_per_i, seed, |erased| {
                let mut basis = EchelonBasis::new(k);
                let mut next = 0;
                for (j, col) in cols.iter().enumerate() {
                    if next < erased.len() && erased[next] == j {
                        next += 1;
                        continue;
                    }
                    let mut v = col.clone();
                    basis.insert(&mut v);
                    if basis.rank() == k {
                        return true;
                    }
                }
                false
            })
        }
        Decoder::Sc(info_set) => {
            log2_exact(n)?;
            if info_set.len() != k || info_set.iter().any(|&i| i >= n) {
                return Err(Error::input("SC information set must hold k indices below n"));
            }
            let info = info_set.clone();
            estimate_profile_with(n, k, trials_per_i, seed, move |erased| {
                sc_pattern_decodable(n, &info, erased).unwrap_or(false)
            })
        }
    }
}
