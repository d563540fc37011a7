//! Adaptive Simpson quadrature of `∫_0^1 P(ε)/ε dε`.
//!
//! With `ε = e^s` the integral becomes `∫ P(e^s) ds` over `s ∈ [ln ε_min, 0]`,
//! which is smooth on a log scale. The range is cut into equal panels in `s`
//! and each panel is refined adaptively. Below `ε_min` the integrand is not
//! evaluated; since `P` is nondecreasing with `P(ε) = O(ε)` or faster, the
//! missing piece is at most `P(ε_min)`, which is folded into the error bound.

use crate::error::{Error, Result};

pub const EPS_MIN: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-9;

const PANELS: usize = 64;
const MAX_DEPTH: u32 = 48;
const MAX_EVALS: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_bound: f64,
    pub evaluations: usize,
}

struct Ctx<'a, F> {
    f: &'a F,
    evals: usize,
    err: f64,
}

impl<F: Fn(f64) -> f64> Ctx<'_, F> {
    fn eval(&mut self, s: f64) -> f64 {
        self.evals += 1;
        (self.f)(s.exp())
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (self.eval(lm), self.eval(rm));
        let h = b - a;
        let left = h / 12.0 * (fa + 4.0 * flm + fm);
        let right = h / 12.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol || depth >= MAX_DEPTH || self.evals >= MAX_EVALS {
            self.err += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        self.refine(a, m, fa, flm, fm, left, tol / 2.0, depth + 1)
            + self.refine(m, b, fm, frm, fb, right, tol / 2.0, depth + 1)
    }
}

/// Integrates `pe(ε)/ε` over `(0, 1]` to absolute tolerance `tol`.
pub fn integrate_over_epsilon<F: Fn(f64) -> f64>(pe: F, tol: f64) -> Result<QuadResult> {
    let lo = EPS_MIN.ln();
    let width = -lo / PANELS as f64;
    let mut ctx = Ctx { f: &pe, evals: 0, err: 0.0 };
    let panel_tol = tol / PANELS as f64;
    let mut total = 0.0;
    let mut fa = ctx.eval(lo);
    let tail = fa.max(0.0);
    for p in 0..PANELS {
        let a = lo + p as f64 * width;
        let b = if p + 1 == PANELS { 0.0 } else { a + width };
        let m = 0.5 * (a + b);
        let (fm, fb) = (ctx.eval(m), ctx.eval(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += ctx.refine(a, b, fa, fm, fb, whole, panel_tol, 0);
        fa = fb;
    }
    let error_bound = ctx.err + tail;
    if ctx.err > tol || tail > tol || !total.is_finite() {
        return Err(Error::Convergence {
            estimate: total,
            error_bound,
        });
    }
    Ok(QuadResult {
        value: total,
        error_bound,
        evaluations: ctx.evals,
    })
}
