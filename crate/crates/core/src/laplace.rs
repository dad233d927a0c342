//! Log-domain quadrature of Laplace-type integrals `int e^{S(y)/eps} dy` and
//! their leading-order asymptotics.
//!
//! The exponent spans hundreds of nats at small `eps`, so integrals are
//! returned as logarithms. Between consecutive critical points `S` is
//! monotone, which means the maximum of each panel sits at one of its ends;
//! the integrand is rescaled by that maximum and integrated by adaptive
//! Simpson. Panels are also split geometrically towards the maximising end so
//! that peaks of width `eps / |b|` or `sqrt(eps / |b'|)` are always sampled.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-9;
/// Below this the geometric refinement needs more levels than it is tuned
/// for; results are still produced but not guaranteed to `rel_tol`.
pub const EPS_MIN: f64 = 1e-4;
const PANEL_FLOOR: f64 = 1.0 / 64.0;
const MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogIntegral {
    /// Natural log of the integral; `-inf` for an empty interval.
    pub log_value: f64,
    pub max_location: f64,
    /// Largest value of the exponent on the interval.
    pub max_exponent: f64,
}

/// `log int_a^b e^{S(y)/eps} dy`.
pub fn log_laplace_integral(model: &DriftModel, a: f64, b: f64, eps: f64, rel_tol: f64) -> Result<LogIntegral> {
    log_exp_integral(model, a, b, eps, 1.0, rel_tol)
}

/// `log int_a^b e^{sign * S(y)/eps} dy` for `sign` of either sign.
pub fn log_exp_integral(model: &DriftModel, a: f64, b: f64, eps: f64, sign: f64, rel_tol: f64) -> Result<LogIntegral> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::NonFinite(format!("eps = {eps}")));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("interval endpoint".into()));
    }
    if b < a {
        return Err(Error::InvalidArgument(format!("interval [{a}, {b}] is reversed")));
    }
    let phi = |y: f64| sign * model.s(y) / eps;
    if b == a {
        return Ok(LogIntegral { log_value: f64::NEG_INFINITY, max_location: a, max_exponent: phi(a) });
    }
    let breaks = breakpoints(model, a, b);
    let mut logs = Vec::with_capacity(breaks.len());
    let mut best = (a, phi(a));
    for w in breaks.windows(2) {
        let (p, q) = (w[0], w[1]);
        let (fp, fq) = (phi(p), phi(q));
        if fq > best.1 {
            best = (q, fq);
        }
        logs.push(log_monotone_panel(&phi, p, q, fp, fq, eps / sign.abs(), rel_tol));
    }
    Ok(LogIntegral { log_value: log_sum_exp(&logs), max_location: best.0, max_exponent: best.1 })
}

/// Panel boundaries for `[a, b]`: every critical point plus a uniform floor.
pub(crate) fn breakpoints(model: &DriftModel, a: f64, b: f64) -> Vec<f64> {
    let n = ((b - a) / PANEL_FLOOR).ceil().max(1.0) as usize;
    let mut pts: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    pts[n] = b;
    pts.extend(model.critical_between(a, b).iter().map(|c| c.location));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    pts
}

/// Log of the integral of `e^{phi}` over a panel where `phi` is monotone.
/// `width` is the natural length scale of the exponent (`eps` for `S/eps`).
pub(crate) fn log_monotone_panel(phi: &dyn Fn(f64) -> f64, p: f64, q: f64, fp: f64, fq: f64, width: f64, rel_tol: f64) -> f64 {
    let top = fp.max(fq);
    if top == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let g = |y: f64| (phi(y) - top).exp();
    let len = q - p;
    // Distances from the maximising end at which to cut.
    let mut cuts = Vec::new();
    let mut d = width / 64.0;
    while d < len {
        cuts.push(d);
        d *= 2.0;
    }
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(p);
    if fp >= fq {
        nodes.extend(cuts.iter().map(|d| p + d));
    } else {
        nodes.extend(cuts.iter().rev().map(|d| q - d));
    }
    nodes.push(q);
    let sub: Vec<(f64, f64)> = nodes.windows(2).map(|w| (w[0], w[1])).collect();
    let coarse: Vec<f64> = sub.iter().map(|&(x, y)| simpson3(&g, x, y)).collect();
    let total: f64 = coarse.iter().sum();
    let tol = rel_tol * total.max(f64::MIN_POSITIVE) / sub.len() as f64;
    let mut acc = 0.0;
    for &(x, y) in &sub {
        acc += adaptive_simpson(&g, x, y, tol);
    }
    top + acc.ln()
}

fn simpson3(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson for smooth, non-exponential integrands.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    if b == a {
        return 0.0;
    }
    let n = ((b - a).abs() / PANEL_FLOOR).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let x = a + h * i as f64;
            let y = if i + 1 == n { b } else { x + h };
            adaptive_simpson(f, x, y, abs_tol / n as f64)
        })
        .sum()
}

/// Which leading-order Laplace estimate to use at `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `x` is a maximum of `S`, integrate to its right.
    RightMax,
    /// `x` is a maximum of `S`, integrate to its left.
    LeftMax,
    /// `b(x) > 0`: `S` is strictly decreasing at `x`.
    Sliding,
}

/// Leading term of `int e^{(S(y) - S(x))/eps}` over a one-sided
/// neighbourhood of `x`.
pub fn laplace_asymptotic(model: &DriftModel, x: f64, side: Side, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::NonFinite(format!("eps = {eps}")));
    }
    let b = model.b(x);
    match side {
        Side::RightMax | Side::LeftMax => {
            let d = model.b_prime(x);
            if b.abs() > 1e-9 || d <= 0.0 {
                return Err(Error::WrongCase(format!("x = {x} is not a maximum of S (b = {b:e}, b' = {d:e})")));
            }
            Ok((PI * eps / (2.0 * d)).sqrt())
        }
        Side::Sliding => {
            if b <= 0.0 {
                return Err(Error::WrongCase(format!("b({x}) = {b:e} is not positive")));
            }
            Ok(eps / b)
        }
    }
}

/// Composite Simpson rule on an odd number of equally spaced log-values.
pub fn log_simpson(h: f64, logs: &[f64]) -> f64 {
    assert!(logs.len() % 2 == 1 && logs.len() >= 3, "Simpson needs an odd number of nodes");
    let mut terms = Vec::with_capacity(logs.len());
    let last = logs.len() - 1;
    for (i, &l) in logs.iter().enumerate() {
        let w: f64 = if i == 0 || i == last { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        terms.push(l + w.ln());
    }
    (h / 3.0).ln() + log_sum_exp(&terms)
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
