//! ML failure profiles for nested families of subcodes of `F^{⊗r}`.
//!
//! Polar codes at a fixed design point and the weight-ordered Reed-Muller-like
//! codes are both "take the first `k` rows of a fixed ordering of `F^{⊗r}`".
//! Their ML failure profiles can therefore be estimated for every `k` at
//! once.
//!
//! Since `F^{⊗r}` is its own inverse over GF(2), a word `c` supported on the
//! erased columns `E` belongs to the code of dimension `k` exactly when
//! `c F^{⊗r}` is supported on the first `k` selected rows. Writing the rows
//! of `F^{⊗r}` in reversed selection coordinates, ML decoding of the
//! dimension-`k` code fails on `E` iff the span of the erased rows contains a
//! nonzero vector whose lowest set bit is at least `n - k`. With an echelon
//! basis keyed by lowest bit, that is `max_pivot >= n - k`, so one
//! elimination per pattern answers every `k` simultaneously.
//!
//! Sampling uses uniform random permutations: erasing columns in permutation
//! order, the first `i` of them form a uniform `i`-subset, so one permutation
//! yields a sample for every stratum. Each stratum's estimate is the
//! stratified estimator; strata are correlated through the shared
//! permutations.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::code::{kernel_row, log2_exact, polar_reliability_order, reed_muller_order};
use crate::erasure::{binomial, next_combination, ErasureFailureProfile, ProfileSource, CHUNK, EXACT_ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::gf2::{get_bit, set_bit, words_for, EchelonBasis, Gf2Matrix, WORD_BITS};
use crate::rng::{stream_id, substream};

/// A fixed preference order over the rows of `F^{⊗r}`.
#[derive(Clone, Debug)]
pub struct NestedFamily {
    n: usize,
    order: Vec<usize>,
    /// Row `j` of `F^{⊗r}`, coordinate `r` moved to `n - 1 - pos(r)`.
    reversed_rows: Vec<Vec<u64>>,
}

/// Per-`k` failure profiles of a nested family.
#[derive(Clone, Debug)]
pub struct NestedProfiles {
    pub n: usize,
    pub trials: usize,
    profiles: Vec<ErasureFailureProfile>,
    /// Mean and sample variance over permutations of the Monte-Carlo part of
    /// `sum_i p(i,k) / i`.
    harmonic_moments: Vec<(f64, f64)>,
}

impl NestedProfiles {
    /// Profile of the dimension-`k` code.
    pub fn profile(&self, k: usize) -> &ErasureFailureProfile {
        &self.profiles[k - 1]
    }

    pub fn profiles(&self) -> &[ErasureFailureProfile] {
        &self.profiles
    }

    /// Standard error of the execution time obtained from `profile(k)`.
    pub fn t_avg_std_err(&self, k: usize, mu: f64) -> f64 {
        if self.trials < 2 {
            return 0.0;
        }
        let (_, var) = self.harmonic_moments[k - 1];
        (var / self.trials as f64).sqrt() / (mu * k as f64)
    }
}

impl NestedFamily {
    /// Builds the family from `order[pos] = row index`.
    pub fn from_order(n: usize, order: Vec<usize>) -> Result<Self> {
        log2_exact(n)?;
        let mut pos = vec![usize::MAX; n];
        if order.len() != n {
            return Err(Error::input(format!("order must list all {n} rows")));
        }
        for (p, &row) in order.iter().enumerate() {
            if row >= n || pos[row] != usize::MAX {
                return Err(Error::input("order must be a permutation of 0..n"));
            }
            pos[row] = p;
        }
        let reversed_rows = (0..n)
            .map(|j| {
                let row = kernel_row(n, j);
                let mut v = vec![0u64; words_for(n)];
                for (r, &p) in pos.iter().enumerate() {
                    if get_bit(&row, r) {
                        set_bit(&mut v, n - 1 - p);
                    }
                }
                v
            })
            .collect();
        Ok(Self { n, order, reversed_rows })
    }

    /// Polar codes designed on BEC(`design_epsilon`).
    pub fn polar(n: usize, design_epsilon: f64) -> Result<Self> {
        Self::from_order(n, polar_reliability_order(n, design_epsilon)?)
    }

    /// Reed-Muller-like codes (heaviest rows first).
    pub fn reed_muller(n: usize) -> Result<Self> {
        Self::from_order(n, reed_muller_order(n)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Generator of the dimension-`k` member, rows in ascending index order.
    pub fn generator(&self, k: usize) -> Result<Gf2Matrix> {
        if k == 0 || k > self.n {
            return Err(Error::input(format!("need 1 <= k <= n, got k = {k}")));
        }
        let mut rows = self.order[..k].to_vec();
        rows.sort_unstable();
        let packed: Vec<Vec<u64>> = rows.iter().map(|&r| kernel_row(self.n, r)).collect();
        Gf2Matrix::from_packed_rows(&packed, self.n)
    }

    /// Largest `k` whose member is ML-decodable with `erased` erased (`n` when
    /// nothing is erased).
    pub fn max_decodable_dim(&self, erased: &[usize]) -> usize {
        let mut basis = EchelonBasis::new(self.n);
        for &j in erased {
            let mut v = self.reversed_rows[j].clone();
            basis.insert(&mut v);
        }
        basis.max_pivot().map_or(self.n, |p| self.n - 1 - p)
    }

    /// Erased rows restricted to the frozen coordinates of the
    /// dimension-`k` member (the lowest `n - k` reversed coordinates).
    fn frozen_rows(&self, k: usize) -> Vec<Vec<u64>> {
        let bits = self.n - k;
        let words = words_for(bits).max(1);
        let rem = bits % WORD_BITS;
        self.reversed_rows
            .iter()
            .map(|row| {
                let mut v = row[..words].to_vec();
                if rem != 0 {
                    v[words - 1] &= (1u64 << rem) - 1;
                }
                if bits == 0 {
                    v[0] = 0;
                }
                v
            })
            .collect()
    }

    /// Failure profiles of every member `k = 1..=n`.
    pub fn estimate_all(&self, trials: usize, seed: u64) -> Result<NestedProfiles> {
        if trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        let n = self.n;
        let exact: Vec<bool> = (0..=n)
            .map(|i| i == 0 || binomial(n, i) <= EXACT_ENUMERATION_LIMIT)
            .collect();

        // Exact strata: histogram of the largest decodable dimension.
        let exact_hist: Vec<Option<Vec<u64>>> = (0..=n)
            .into_par_iter()
            .map(|i| {
                if i == 0 || !exact[i] {
                    return None;
                }
                let mut hist = vec![0u64; n + 1];
                let mut c: Vec<usize> = (0..i).collect();
                loop {
                    hist[self.max_decodable_dim(&c)] += 1;
                    if !next_combination(&mut c, n) {
                        break;
                    }
                }
                Some(hist)
            })
            .collect();

        // Harmonic prefix sums over the sampled strata only.
        let mut mc_harmonic = vec![0.0; n + 1];
        for i in 1..=n {
            mc_harmonic[i] = mc_harmonic[i - 1] + if exact[i] { 0.0 } else { 1.0 / i as f64 };
        }

        let any_mc = exact.iter().any(|&e| !e);
        // first_fail[k] = number of erasures at which dimension k first fails.
        let chunk_stats: Vec<(Vec<u32>, Vec<f64>, Vec<f64>)> = if any_mc {
            let chunks = trials.div_ceil(CHUNK);
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = substream(seed, stream_id(0, c as u64));
                    let count = CHUNK.min(trials - c * CHUNK);
                    let mut hist = vec![0u32; (n + 1) * (n + 2)];
                    let mut sx = vec![0.0; n + 1];
                    let mut sxx = vec![0.0; n + 1];
                    let mut perm: Vec<usize> = (0..n).collect();
                    let mut basis = EchelonBasis::new(n);
                    let mut scratch = vec![0u64; words_for(n)];
                    let mut first_fail = vec![0usize; n + 1];
                    for _ in 0..count {
                        perm.shuffle(&mut rng);
                        basis.clear();
                        let mut dim = n;
                        for (t, &j) in perm.iter().enumerate() {
                            scratch.copy_from_slice(&self.reversed_rows[j]);
                            basis.insert(&mut scratch);
                            let now = basis.max_pivot().map_or(n, |p| n - 1 - p);
                            for slot in &mut first_fail[now + 1..=dim] {
                                *slot = t + 1;
                            }
                            dim = now;
                            if dim == 0 {
                                break;
                            }
                        }
                        for k in 1..=n {
                            let f = first_fail[k];
                            hist[k * (n + 2) + f] += 1;
                            let x = if f <= n - k { mc_harmonic[n - k] - mc_harmonic[f - 1] } else { 0.0 };
                            sx[k] += x;
                            sxx[k] += x * x;
                        }
                    }
                    (hist, sx, sxx)
                })
                .collect()
        } else {
            Vec::new()
        };

        let mut hist = vec![0u64; (n + 1) * (n + 2)];
        let mut sx = vec![0.0; n + 1];
        let mut sxx = vec![0.0; n + 1];
        for (h, a, b) in &chunk_stats {
            for (acc, v) in hist.iter_mut().zip(h) {
                *acc += u64::from(*v);
            }
            for k in 0..=n {
                sx[k] += a[k];
                sxx[k] += b[k];
            }
        }

        let t = trials as f64;
        let mut profiles = Vec::with_capacity(n);
        let mut moments = Vec::with_capacity(n);
        for k in 1..=n {
            let mut p = vec![0.0; n + 1];
            let mut se = vec![0.0; n + 1];
            let row = &hist[k * (n + 2)..(k + 1) * (n + 2)];
            let mut sampled_fails = 0u64;
            for i in 1..=n {
                sampled_fails += row[i];
                if i > n - k {
                    p[i] = 1.0;
                } else if let Some(h) = &exact_hist[i] {
                    let fails: u64 = h[..k].iter().sum();
                    p[i] = fails as f64 / binomial(n, i);
                } else {
                    let v = sampled_fails as f64 / t;
                    p[i] = v;
                    se[i] = (v * (1.0 - v) / t).sqrt();
                }
            }
            let source = if any_mc {
                ProfileSource::MonteCarlo { trials_per_i: trials, std_err: se }
            } else {
                ProfileSource::Exact
            };
            profiles.push(ErasureFailureProfile { n, k, p, source });
            let mean = sx[k] / t;
            let var = if trials > 1 { ((sxx[k] - t * mean * mean) / (t - 1.0)).max(0.0) } else { 0.0 };
            moments.push((mean, var));
        }
        Ok(NestedProfiles {
            n,
            trials,
            profiles,
            harmonic_moments: moments,
        })
    }

    /// Failure profile of the single member of dimension `k`, with the
    /// standard error of `sum_i p(i,k)/i` over its sampled strata.
    ///
    /// Cheaper than [`estimate_all`](Self::estimate_all) for large `n`: only
    /// the `n - k` frozen coordinates are eliminated.
    pub fn estimate_member(&self, k: usize, trials: usize, seed: u64) -> Result<(ErasureFailureProfile, f64)> {
        let n = self.n;
        if k == 0 || k > n {
            return Err(Error::input(format!("need 1 <= k <= n, got k = {k}")));
        }
        if trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        let frozen = self.frozen_rows(k);
        let words = frozen[0].len();
        let redundancy = n - k;
        let exact: Vec<bool> = (0..=n)
            .map(|i| i == 0 || i > redundancy || binomial(n, i) <= EXACT_ENUMERATION_LIMIT)
            .collect();

        let independent = |erased: &[usize]| -> bool {
            let mut basis = EchelonBasis::new(redundancy);
            let mut v = vec![0u64; words];
            erased.iter().all(|&j| {
                v.copy_from_slice(&frozen[j]);
                basis.insert(&mut v)
            })
        };

        let exact_p: Vec<f64> = (0..=redundancy)
            .into_par_iter()
            .map(|i| {
                if i == 0 || !exact[i] {
                    return 0.0;
                }
                let mut c: Vec<usize> = (0..i).collect();
                let mut fails = 0u64;
                loop {
                    if !independent(&c) {
                        fails += 1;
                    }
                    if !next_combination(&mut c, n) {
                        break;
                    }
                }
                fails as f64 / binomial(n, i)
            })
            .collect();

        let mut mc_harmonic = vec![0.0; n + 1];
        for i in 1..=n {
            mc_harmonic[i] = mc_harmonic[i - 1] + if exact[i] { 0.0 } else { 1.0 / i as f64 };
        }

        let any_mc = exact.iter().any(|&e| !e);
        let chunk_stats: Vec<(Vec<u32>, f64, f64)> = if any_mc {
            let chunks = trials.div_ceil(CHUNK);
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = substream(seed, stream_id(1 + k as u64, c as u64));
                    let count = CHUNK.min(trials - c * CHUNK);
                    let mut hist = vec![0u32; n + 2];
                    let (mut sx, mut sxx) = (0.0, 0.0);
                    let mut perm: Vec<usize> = (0..n).collect();
                    let mut basis = EchelonBasis::new(redundancy);
                    let mut scratch = vec![0u64; words];
                    for _ in 0..count {
                        perm.shuffle(&mut rng);
                        basis.clear();
                        let mut fail_at = redundancy + 1;
                        for (t, &j) in perm.iter().take(redundancy + 1).enumerate() {
                            scratch.copy_from_slice(&frozen[j]);
                            if !basis.insert(&mut scratch) {
                                fail_at = t + 1;
                                break;
                            }
                        }
                        hist[fail_at] += 1;
                        let x = mc_harmonic[redundancy] - mc_harmonic[fail_at - 1];
                        sx += x;
                        sxx += x * x;
                    }
                    (hist, sx, sxx)
                })
                .collect()
        } else {
            Vec::new()
        };

        let mut hist = vec![0u64; n + 2];
        let (mut sx, mut sxx) = (0.0, 0.0);
        for (h, a, b) in &chunk_stats {
            for (acc, v) in hist.iter_mut().zip(h) {
                *acc += u64::from(*v);
            }
            sx += a;
            sxx += b;
        }
        let t = trials as f64;
        let mut p = vec![0.0; n + 1];
        let mut se = vec![0.0; n + 1];
        let mut sampled_fails = 0u64;
        for i in 1..=n {
            sampled_fails += hist[i];
            if i > redundancy {
                p[i] = 1.0;
            } else if exact[i] {
                p[i] = exact_p[i];
            } else {
                let v = sampled_fails as f64 / t;
                p[i] = v;
                se[i] = (v * (1.0 - v) / t).sqrt();
            }
        }
        let source = if any_mc {
            ProfileSource::MonteCarlo { trials_per_i: trials, std_err: se }
        } else {
            ProfileSource::Exact
        };
        let mean = sx / t;
        let var = if trials > 1 { ((sxx - t * mean * mean) / (t - 1.0)).max(0.0) } else { 0.0 };
        Ok((ErasureFailureProfile { n, k, p, source }, (var / t).sqrt()))
    }
}
