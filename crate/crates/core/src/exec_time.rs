//! Average execution time of an `n`-node coded computation.
//!
//! Node finish times are `(1 + X)/k` with `X ~ Exp(μ)`, so at time `t` a
//! node is still busy with probability `ε(t) = exp(-μ(kt - 1))`. The job is
//! done once the finished nodes are decodable, which turns the expected
//! completion time into `1/k + (1/(μk)) ∫_0^1 P_e(ε)/ε dε`, or, in terms of
//! the conditional failure profile,
//!
//! ```text
//! T = (1/k)[1 + Σ_{i=n-k+1..n} 1/(iμ)] + (1/(μk)) Σ_{i=1..n-k} p(i,k)/i
//! ```

use serde::{Deserialize, Serialize};

use crate::code::CodeFamily;
use crate::erasure::ErasureFailureProfile;
use crate::error::{Error, Result};
use crate::quad::{integrate_over_epsilon, DEFAULT_TOL};

/// Shifted-exponential straggler model for `n` nodes and `k` tasks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StragglerModel {
    pub mu: f64,
    pub n: usize,
    pub k: usize,
}

impl StragglerModel {
    pub fn new(mu: f64, n: usize, k: usize) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::input(format!("straggling parameter must be positive, got {mu}")));
        }
        if k == 0 || k > n {
            return Err(Error::input(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
        }
        Ok(Self { mu, n, k })
    }

    /// Deterministic per-task processing time `1/k`.
    pub fn t0(&self) -> f64 {
        1.0 / self.k as f64
    }
}

/// How an execution time was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    EnumeratedProfile,
    MonteCarloProfile,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Quadrature => "quadrature",
            Method::EnumeratedProfile => "enumerated-profile",
            Method::MonteCarloProfile => "monte-carlo-profile",
        })
    }
}

/// One row of an execution-time table.
///
/// Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecTimeReport {
    pub family: String,
    pub decoder: String,
    pub n: usize,
    pub k: usize,
    pub mu: f64,
    pub t_avg: f64,
    pub method: Method,
    pub k_star: Option<usize>,
    pub g_opt: Option<f64>,
    #[serde(rename = "G_cod")]
    pub g_cod: Option<f64>,
    /// Standard error of `t_avg` for Monte-Carlo profiles.
    pub t_avg_std_err: Option<f64>,
    pub trials_per_i: Option<usize>,
    pub design_epsilon: Option<f64>,
}

fn harmonic_range(from: usize, to: usize) -> f64 {
    (from..=to).map(|i| 1.0 / i as f64).sum()
}

/// Execution time from a conditional failure profile.
pub fn t_avg_from_profile(model: &StragglerModel, profile: &ErasureFailureProfile) -> Result<f64> {
    if profile.n != model.n || profile.k != model.k {
        return Err(Error::input(format!(
            "profile is for (n,k) = ({},{}), model is ({},{})",
            profile.n, profile.k, model.n, model.k
        )));
    }
    let (n, k, mu) = (model.n, model.k, model.mu);
    let fixed = (1.0 + harmonic_range(n - k + 1, n) / mu) / k as f64;
    let variable: f64 = (1..=n - k).map(|i| profile.p[i] / i as f64).sum();
    Ok(fixed + variable / (mu * k as f64))
}

/// Execution time of an MDS code, the minimum over all `(n,k)` linear codes.
pub fn t_avg_mds(model: &StragglerModel) -> f64 {
    let (n, k, mu) = (model.n, model.k, model.mu);
    1.0 / k as f64 + harmonic_range(n - k + 1, n) / (mu * k as f64)
}

/// Execution time by numerical integration of a failure curve `pe(ε)`.
pub fn t_avg_by_quadrature<F: Fn(f64) -> f64>(model: &StragglerModel, pe: F) -> Result<f64> {
    let r = integrate_over_epsilon(pe, DEFAULT_TOL)?;
    Ok(1.0 / model.k as f64 + r.value / (model.mu * model.k as f64))
}

/// Exhaustive search for the task count minimizing `evaluator(k)`; the
/// smallest minimizing `k` wins ties. Uncoded computation has `k = n`.
pub fn find_k_star<F>(family: &CodeFamily, n: usize, evaluator: F) -> Result<(usize, f64)>
where
    F: Fn(usize) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::input("n must be positive"));
    }
    if matches!(family, CodeFamily::Uncoded) {
        return Ok((n, evaluator(n)?));
    }
    let mut best = (1, evaluator(1)?);
    for k in 2..=n {
        let t = evaluator(k)?;
        if t < best.1 {
            best = (k, t);
        }
    }
    Ok(best)
}

/// Same as [`find_k_star`] over precomputed values `times[k-1]`.
pub fn argmin_k(times: &[f64]) -> (usize, f64) {
    times
        .iter()
        .enumerate()
        .fold((1, f64::INFINITY), |best, (i, &t)| if t < best.1 { (i + 1, t) } else { best })
}

/// Percentage gap to the MDS optimum and percentage gain over uncoded.
pub fn metrics(t_code: f64, t_mds_opt: f64, t_uncoded: f64) -> Result<(f64, f64)> {
    if !(t_code > 0.0 && t_mds_opt > 0.0 && t_uncoded > 0.0) {
        return Err(Error::input("execution times must be positive"));
    }
    Ok((
        100.0 * (t_code - t_mds_opt) / t_mds_opt,
        100.0 * (t_uncoded - t_code) / t_uncoded,
    ))
}

/// Lower and upper bounds on `|n T_MDS - n T_BRC|` for the random ensemble,
/// with split point `v`. The logarithmic term is dropped when
/// `n - k - v <= 1`.
pub fn gap_bounds(n: usize, k: usize, mu: f64, v: usize) -> Result<(f64, f64)> {
    if k == 0 || k > n || mu <= 0.0 {
        return Err(Error::input(format!("invalid (n, k, mu) = ({n}, {k}, {mu})")));
    }
    if v > n - k {
        return Err(Error::input(format!("split point v = {v} exceeds n - k = {}", n - k)));
    }
    if k == n {
        return Ok((0.0, 0.0));
    }
    let (nf, rate) = (n as f64, k as f64 / n as f64);
    let lower = 1.0 / (3.0 * mu * rate * (1.0 - rate) * nf);
    let rest = n - k - v;
    let log_term = if rest <= 1 {
        0.0
    } else {
        nf * rate * 2f64.powi(-(v as i32)) * (rest as f64).ln()
    };
    let upper = (v as f64 / (rest + 1) as f64 + log_term) / (mu * rate);
    Ok((lower, upper))
}

/// Exact `|n T_MDS - n T_BRC|` from the random-ensemble closed form.
pub fn scaled_gap_random_ensemble(n: usize, k: usize, mu: f64) -> Result<f64> {
    let model = StragglerModel::new(mu, n, k)?;
    let prof = ErasureFailureProfile::random_ensemble(n, k)?;
    Ok(n as f64 * (t_avg_from_profile(&model, &prof)? - t_avg_mds(&model)).abs())
}

/// Residual of the optimal-rate equation `(1-R)ln(1-R) = μ(1-R) - R`.
pub fn rate_equation(mu: f64, rate: f64) -> f64 {
    let q = 1.0 - rate;
    let lhs = if q > 0.0 { q * q.ln() } else { 0.0 };
    lhs - mu * q + rate
}

/// Asymptotically optimal MDS rate for straggling parameter `mu`, by
/// bisection on `(0, 1)`.
pub fn solve_optimal_rate(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::input(format!("straggling parameter must be positive, got {mu}")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = rate_equation(mu, mid);
        if f.abs() <= 1e-12 && hi - lo < 1e-12 {
            return Ok(mid);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * 2.0 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The profile-dependent part of the execution time:
/// `Σ_{i=d_min..n-k} p(i,k)/i`.
pub fn optimality_score(profile: &ErasureFailureProfile, d_min: usize) -> Result<f64> {
    let n_minus_k = profile.n - profile.k;
    if d_min == 0 || d_min > n_minus_k + 1 {
        return Err(Error::input(format!("d_min = {d_min} outside 1..={}", n_minus_k + 1)));
    }
    Ok((d_min..=n_minus_k).map(|i| profile.p[i] / i as f64).sum())
}
