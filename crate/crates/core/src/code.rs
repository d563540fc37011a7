//! Generator-matrix construction for the studied code families.
//!
//! Polar and Reed-Muller-like codes select rows of the Kronecker power
//! `F^{⊗r}` of `F = [[1,0],[1,1]]`, used as printed (no bit-reversal). Row
//! `i` of `F^{⊗r}` has a one in column `j` exactly when the bits of `j` are a
//! subset of the bits of `i`, so its weight is `2^popcount(i)`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{set_bit, words_for, Gf2Matrix};

/// The code families compared in the execution-time study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CodeFamily {
    Uncoded,
    Mds,
    BinaryRandom,
    Polar { design_epsilon: f64 },
    ReedMuller,
}

impl CodeFamily {
    pub fn polar(design_epsilon: f64) -> Result<Self> {
        if !(design_epsilon > 0.0 && design_epsilon < 1.0) {
            return Err(Error::input(format!(
                "polar design epsilon must lie in (0,1), got {design_epsilon}"
            )));
        }
        Ok(CodeFamily::Polar { design_epsilon })
    }

    /// Checks that `(n, k)` is admissible for this family.
    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        if k == 0 || k > n {
            return Err(Error::input(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
        }
        match self {
            CodeFamily::Uncoded if k != n => Err(Error::input(format!(
                "uncoded computation requires k = n, got n = {n}, k = {k}"
            ))),
            CodeFamily::Polar { design_epsilon } if !(*design_epsilon > 0.0 && *design_epsilon < 1.0) => {
                Err(Error::input(format!("polar design epsilon {design_epsilon} outside (0,1)")))
            }
            CodeFamily::Polar { .. } | CodeFamily::ReedMuller => log2_exact(n).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn needs_power_of_two(&self) -> bool {
        matches!(self, CodeFamily::Polar { .. } | CodeFamily::ReedMuller)
    }
}

impl fmt::Display for CodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeFamily::Uncoded => f.write_str("uncoded"),
            CodeFamily::Mds => f.write_str("mds"),
            CodeFamily::BinaryRandom => f.write_str("binary-random"),
            CodeFamily::Polar { .. } => f.write_str("polar"),
            CodeFamily::ReedMuller => f.write_str("rm"),
        }
    }
}

/// `r` such that `n = 2^r`.
pub fn log2_exact(n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::input(format!("block length {n} is not a power of two")));
    }
    Ok(n.trailing_zeros())
}

/// Bit-channel erasure probabilities of a polar transform and the chosen
/// information set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitChannelProfile {
    pub n: usize,
    pub design_epsilon: f64,
    pub z: Vec<f64>,
    /// Information indices, ascending.
    pub info_set: Vec<usize>,
}

impl BitChannelProfile {
    pub fn k(&self) -> usize {
        self.info_set.len()
    }
}

/// Samples from the ensemble of uniformly random `k x n` binary matrices
/// conditioned on full row rank, by rejection.
pub fn sample_random_full_rank<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Gf2Matrix> {
    if k == 0 || k > n {
        return Err(Error::input(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    loop {
        let g = sample_uniform_matrix(k, n, rng)?;
        if g.rank() == k {
            return Ok(g);
        }
    }
}

/// A `rows x cols` matrix with independent fair-coin entries.
pub fn sample_uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Gf2Matrix> {
    let stride = words_for(cols);
    let packed: Vec<Vec<u64>> = (0..rows)
        .map(|_| (0..stride).map(|_| rng.gen::<u64>()).collect())
        .collect();
    Gf2Matrix::from_packed_rows(&packed, cols)
}

/// Packed row `i` of `F^{⊗r}` for `n = 2^r`.
pub(crate) fn kernel_row(n: usize, i: usize) -> Vec<u64> {
    let mut w = vec![0u64; words_for(n)];
    // Enumerate the submasks of i.
    let mut j = i;
    loop {
        set_bit(&mut w, j);
        if j == 0 {
            break;
        }
        j = (j - 1) & i;
    }
    w
}

/// The full `n x n` polarization matrix `F^{⊗r}`.
pub fn polar_kernel(n: usize) -> Result<Gf2Matrix> {
    log2_exact(n)?;
    let rows: Vec<Vec<u64>> = (0..n).map(|i| kernel_row(n, i)).collect();
    Gf2Matrix::from_packed_rows(&rows, n)
}

fn select_rows(n: usize, rows: &[usize]) -> Result<Gf2Matrix> {
    let packed: Vec<Vec<u64>> = rows.iter().map(|&i| kernel_row(n, i)).collect();
    Gf2Matrix::from_packed_rows(&packed, n)
}

/// Erasure probabilities of the `n` polarized bit-channels of BEC(`epsilon`).
///
/// Each value `z` splits into `(2z - z^2, z^2)`; the most significant bit of
/// the index selects the first split.
pub fn polar_z_profile(n: usize, epsilon: f64) -> Result<Vec<f64>> {
    let r = log2_exact(n)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::input(format!("erasure probability {epsilon} outside [0,1]")));
    }
    let mut z = vec![epsilon];
    for _ in 0..r {
        z = z
            .iter()
            .flat_map(|&v| [v * (2.0 - v), v * v])
            .collect();
    }
    Ok(z)
}

/// Same as [`polar_z_profile`] into a caller buffer whose length is a power
/// of two; no validation.
pub(crate) fn polar_z_fill(z: &mut [f64], epsilon: f64) {
    z[0] = epsilon;
    let mut len = 1;
    while len < z.len() {
        for idx in (0..len).rev() {
            let v = z[idx];
            z[2 * idx] = v * (2.0 - v);
            z[2 * idx + 1] = v * v;
        }
        len *= 2;
    }
}

/// Bit-channel indices ordered from most to least reliable at `design_epsilon`
/// (ascending `z`, lower index first on ties).
pub fn polar_reliability_order(n: usize, design_epsilon: f64) -> Result<Vec<usize>> {
    let z = polar_z_profile(n, design_epsilon)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    Ok(order)
}

/// Rows of `F^{⊗r}` ordered by Hamming weight, heaviest first, lower index
/// first on ties.
pub fn reed_muller_order(n: usize) -> Result<Vec<usize>> {
    log2_exact(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| b.count_ones().cmp(&a.count_ones()).then(a.cmp(&b)));
    Ok(order)
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::input(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    Ok(())
}

/// Polar code: the `k` rows of `F^{⊗r}` whose bit-channels are most reliable
/// at `design_epsilon`.
pub fn build_polar(n: usize, k: usize, design_epsilon: f64) -> Result<(Gf2Matrix, BitChannelProfile)> {
    let z = polar_z_profile(n, design_epsilon)?;
    check_k(n, k)?;
    let mut info_set = polar_reliability_order(n, design_epsilon)?;
    info_set.truncate(k);
    info_set.sort_unstable();
    let g = select_rows(n, &info_set)?;
    Ok((
        g,
        BitChannelProfile {
            n,
            design_epsilon,
            z,
            info_set,
        },
    ))
}

/// Reed-Muller-like code: the `k` heaviest rows of `F^{⊗r}`.
pub fn build_reed_muller_like(n: usize, k: usize) -> Result<Gf2Matrix> {
    let mut rows = reed_muller_order(n)?;
    check_k(n, k)?;
    rows.truncate(k);
    rows.sort_unstable();
    select_rows(n, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn one_by_one_full_rank_is_unit() {
        let mut rng = substream(1, 0);
        let g = sample_random_full_rank(1, 1, &mut rng).unwrap();
        assert_eq!(g.to_text(), "1 1\n1\n");
    }

    #[test]
    fn random_full_rank_has_rank_k() {
        let mut rng = substream(42, 0);
        for _ in 0..50 {
            let g = sample_random_full_rank(4, 2, &mut rng).unwrap();
            assert_eq!((g.rows(), g.cols(), g.rank()), (2, 4, 2));
        }
        assert!(sample_random_full_rank(3, 4, &mut rng).is_err());
    }

    #[test]
    fn square_acceptance_rate_matches_product_formula() {
        // Probability that a uniform 4x4 binary matrix is invertible.
        let expected: f64 = (1..=4).map(|i| 1.0 - 2f64.powi(i - 5)).product();
        assert!((expected - 0.3076).abs() < 1e-4);
        let mut rng = substream(9, 0);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| sample_uniform_matrix(4, 4, &mut rng).unwrap().rank() == 4)
            .count();
        let p = hits as f64 / trials as f64;
        let se = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!((p - expected).abs() <= 3.0 * se, "p = {p}, expected {expected}");
    }

    #[test]
    fn z_profile_small_cases() {
        assert_eq!(polar_z_profile(1, 0.3).unwrap(), vec![0.3]);
        assert_eq!(polar_z_profile(2, 0.5).unwrap(), vec![0.75, 0.25]);
        let mut z4 = polar_z_profile(4, 0.5).unwrap();
        z4.sort_by(f64::total_cmp);
        assert_eq!(z4, vec![0.0625, 0.4375, 0.5625, 0.9375]);
        assert!(polar_z_profile(6, 0.5).is_err());
        assert!(polar_z_profile(4, 1.5).is_err());
    }

    #[test]
    fn z_profile_boundaries_and_mean() {
        assert!(polar_z_profile(64, 0.0).unwrap().iter().all(|&z| z == 0.0));
        assert!(polar_z_profile(64, 1.0).unwrap().iter().all(|&z| z == 1.0));
        for &eps in &[0.1, 0.3178, 0.5, 0.9] {
            let z = polar_z_profile(1024, eps).unwrap();
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            assert!((mean - eps).abs() <= 1e-12, "eps {eps}: mean {mean}");
            assert!(z.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn polar_two_by_one_picks_all_ones_row() {
        let (g, prof) = build_polar(2, 1, 0.5).unwrap();
        assert_eq!(prof.info_set, vec![1]);
        assert_eq!(prof.z[1], 0.25);
        assert_eq!(g.to_text(), "1 2\n11\n");
    }

    #[test]
    fn polar_full_selection_is_kernel() {
        let (g, _) = build_polar(4, 4, 0.2).unwrap();
        assert_eq!(g, polar_kernel(4).unwrap());
        assert_eq!(g.rank(), 4);
        let (g, _) = build_polar(8, 7, 0.1).unwrap();
        assert_eq!(g.rank(), 7);
    }

    #[test]
    fn kernel_row_weights() {
        let f = polar_kernel(8).unwrap();
        let weights: Vec<usize> = (0..8).map(|i| f.row_weight(i)).collect();
        assert_eq!(weights, vec![1, 2, 2, 4, 2, 4, 4, 8]);
        assert_eq!(f.row(0)[0], 1);
        assert_eq!(f.row(7)[0], 0xff);
    }

    #[test]
    fn reed_muller_selections() {
        assert_eq!(build_reed_muller_like(2, 1).unwrap().to_text(), "1 2\n11\n");
        let g = build_reed_muller_like(8, 4).unwrap();
        let mut w: Vec<usize> = (0..4).map(|i| g.row_weight(i)).collect();
        w.sort_unstable();
        assert_eq!(w, vec![4, 4, 4, 8]);
        // RM(1,3): the all-ones word and the three coordinate functions.
        let rm13 = Gf2Matrix::from_rows(&[
            [1u8, 1, 0, 0, 1, 1, 0, 0],
            [1, 0, 1, 0, 1, 0, 1, 0],
            [1, 1, 1, 1, 0, 0, 0, 0],
            [1, 1, 1, 1, 1, 1, 1, 1],
        ])
        .unwrap();
        // Same row space: stacking adds no rank.
        let mut stacked: Vec<Vec<u8>> = Vec::new();
        for m in [&g, &rm13] {
            for i in 0..4 {
                stacked.push((0..8).map(|j| u8::from(m.get(i, j))).collect());
            }
        }
        assert_eq!(Gf2Matrix::from_rows(&stacked).unwrap().rank(), 4);
        let g7 = build_reed_muller_like(8, 7).unwrap();
        assert!((0..7).all(|i| g7.row_weight(i) > 1));
        assert_eq!(g7.rank(), 7);
        assert!(build_reed_muller_like(12, 3).is_err());
    }

    #[test]
    fn family_validation() {
        assert!(CodeFamily::Uncoded.validate(8, 8).is_ok());
        assert!(CodeFamily::Uncoded.validate(8, 7).is_err());
        assert!(CodeFamily::polar(0.0).is_err());
        assert!(CodeFamily::polar(0.1).unwrap().validate(12, 6).is_err());
        assert!(CodeFamily::ReedMuller.validate(16, 6).is_ok());
        assert!(CodeFamily::Mds.validate(5, 6).is_err());
    }

    #[test]
    fn z_fill_matches_profile() {
        for n in [1usize, 2, 8, 64, 1024] {
            for eps in [0.0, 0.1, 0.5, 0.93, 1.0] {
                let mut z = vec![f64::NAN; n];
                polar_z_fill(&mut z, eps);
                assert_eq!(z, polar_z_profile(n, eps).unwrap());
            }
        }
    }
}
