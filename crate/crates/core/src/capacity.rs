//! Equilibrium potentials and capacities between two closed arcs, exactly by
//! quadrature and by their small-noise asymptotics, plus the hitting-time
//! bound obtained from the process enlarged by an independent spin.
//!
//! Arcs are ordered `t1m <= t1p < t2m <= t2p < t1m + 1` after lifting. On
//! each gap between them the equilibrium potential is a normalised partial
//! integral of `e^{S/eps}`.

use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::landscape::{Decomposition, Interval, Place, WellSystem};
use crate::laplace::{log_add_exp, log_laplace_integral, log_simpson, log_sum_exp};
use crate::stationary::{omega, Mode, PrefactorTable, QuadratureDensity};

const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    SameValley,
    SameLandscapeDiffValleyZEqual,
    SameLandscapeDiffValleyZWrap,
    DiffLandscape,
}

impl CaseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseKind::SameValley => "same_valley",
            CaseKind::SameLandscapeDiffValleyZEqual => "same_landscape_diff_valley_z_equal",
            CaseKind::SameLandscapeDiffValleyZWrap => "same_landscape_diff_valley_z_wrap",
            CaseKind::DiffLandscape => "diff_landscape",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub a1: Interval,
    pub a2: Interval,
    pub epsilon: f64,
    pub mode: Mode,
    pub value: f64,
    /// `None` when an arc is not inside a valley.
    pub case_kind: Option<CaseKind>,
    /// Right-most highest maxima in the two gaps, reduced mod 1.
    pub saddle_points: Vec<f64>,
}

/// Lifted endpoints `(t1m, t1p, t2m, t2p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Arcs {
    t1m: f64,
    t1p: f64,
    t2m: f64,
    t2p: f64,
}

fn arrange(a1: Interval, a2: Interval) -> Result<Arcs> {
    for a in [a1, a2] {
        if !a.lo.is_finite() || !a.hi.is_finite() {
            return Err(Error::NonFinite("interval endpoint".into()));
        }
        if a.hi < a.lo || a.hi - a.lo >= 1.0 {
            return Err(Error::InvalidArgument(format!("[{}, {}] is not a proper arc", a.lo, a.hi)));
        }
    }
    let k = (a1.hi - a2.lo).floor() + 1.0;
    let arcs = Arcs { t1m: a1.lo, t1p: a1.hi, t2m: a2.lo + k, t2p: a2.hi + k };
    if arcs.t2p >= arcs.t1m + 1.0 {
        return Err(Error::Overlap);
    }
    Ok(arcs)
}

fn log_int(model: &DriftModel, a: f64, b: f64, eps: f64) -> Result<f64> {
    Ok(log_laplace_integral(model, a, b, eps, REL_TOL)?.log_value)
}

/// `P_theta[H_{a1} < H_{a2}]`.
pub fn equilibrium_potential(model: &DriftModel, eps: f64, a1: Interval, a2: Interval, theta: f64) -> Result<f64> {
    let r = arrange(a1, a2)?;
    let y = theta - (theta - r.t1m).div_euclid(1.0);
    if y <= r.t1p {
        return Ok(1.0);
    }
    if y < r.t2m {
        let num = log_int(model, y, r.t2m, eps)?;
        let den = log_int(model, r.t1p, r.t2m, eps)?;
        return Ok((num - den).exp().min(1.0));
    }
    if y <= r.t2p {
        return Ok(0.0);
    }
    let num = log_int(model, r.t2p, y, eps)?;
    let den = log_int(model, r.t2p, r.t1m + 1.0, eps)?;
    Ok((num - den).exp().min(1.0))
}

/// Exact capacity from a prepared density oracle.
///
/// With `I1`, `I2` the `e^{S/eps}` integrals over the two gaps and `J1`, `J2`
/// over the arcs themselves, the flux identity gives
/// `cap = (eps/c) [e^{-B/eps} T / I2 + (I1 + J2 + I2 + e^{-B/eps} J1) / I1]`
/// with `T = J1 + I1 + J2 + I2`.
pub fn capacity_quadrature(oracle: &QuadratureDensity, model: &DriftModel, a1: Interval, a2: Interval) -> Result<f64> {
    let r = arrange(a1, a2)?;
    let eps = oracle.eps;
    let beta = model.mean() / eps;
    let j1 = log_int(model, r.t1m, r.t1p, eps)?;
    let i1 = log_int(model, r.t1p, r.t2m, eps)?;
    let j2 = log_int(model, r.t2m, r.t2p, eps)?;
    let i2 = log_int(model, r.t2p, r.t1m + 1.0, eps)?;
    let total = log_sum_exp(&[j1, i1, j2, i2]);
    let left = -beta + total - i2;
    let right = log_sum_exp(&[i1, j2, i2, j1 - beta]) - i1;
    Ok((eps.ln() - oracle.log_c() + log_add_exp(left, right)).exp())
}

/// `eps int (h')^2 m` over both gaps by composite Simpson with `panels`
/// panels per gap; an independent check on [`capacity_quadrature`].
pub fn dirichlet_energy(oracle: &QuadratureDensity, model: &DriftModel, a1: Interval, a2: Interval, panels: usize) -> Result<f64> {
    let r = arrange(a1, a2)?;
    let eps = oracle.eps;
    let mut parts = Vec::new();
    for (lo, hi) in [(r.t1p, r.t2m), (r.t2p, r.t1m + 1.0)] {
        let norm = log_int(model, lo, hi, eps)?;
        let n = 2 * panels.max(1);
        let h = (hi - lo) / n as f64;
        let mut logs = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = if i == n { hi } else { lo + h * i as f64 };
            logs.push(2.0 * model.s(x) / eps - 2.0 * norm + oracle.log_pi(model, x)?);
        }
        parts.push(log_simpson(h, &logs));
    }
    Ok((eps.ln() + log_sum_exp(&parts) - oracle.log_c()).exp())
}

/// Right-most maximum of `S` in `(lo, hi)` among those within `tol` of the
/// highest, together with all such maxima.
fn gap_saddles(model: &DriftModel, lo: f64, hi: f64, tol: f64) -> Option<(f64, Vec<f64>)> {
    let maxima = model.maxima_between(lo, hi);
    let top = maxima.iter().map(|&m| model.s(m)).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<f64> = maxima.into_iter().filter(|&m| model.s(m) >= top - tol).collect();
    ties.last().map(|&m| (m, ties.clone()))
}

fn reduce(x: f64) -> f64 {
    x - x.floor()
}

struct Membership {
    landscape: usize,
    valley: usize,
    /// Right end of the arc in landscape coordinates.
    right: f64,
}

fn membership(decomp: &Decomposition, a: Interval) -> Option<Membership> {
    let mid = 0.5 * (a.lo + a.hi);
    match decomp.locate(mid) {
        Place::Landscape { index, valley: Some(k), x } => {
            let v = decomp.landscapes[index].valleys[k];
            let (lo, hi) = (x - (mid - a.lo), x + (a.hi - mid));
            (lo > v.lo && hi < v.hi).then_some(Membership { landscape: index, valley: k, right: hi })
        }
        _ => None,
    }
}

fn check_well(model: &DriftModel, decomp: &Decomposition, a: Interval) -> Result<()> {
    let fail = |why: String| Err(Error::WellConditionViolated(why));
    if a.hi <= a.lo {
        return fail(format!("[{}, {}] is a point", a.lo, a.hi));
    }
    let v = |x: f64| decomp.quasi_potential(model, x).1;
    let (vl, vr) = (v(a.lo), v(a.hi));
    if (vl - vr).abs() > 1e-9 * decomp.h.max(1.0) + decomp.tol_abs {
        return fail(format!("endpoints of [{}, {}] are at different heights", a.lo, a.hi));
    }
    if vl.max(vr) >= decomp.h - decomp.tol_abs {
        return fail(format!("[{}, {}] reaches the barrier height", a.lo, a.hi));
    }
    if model.maxima_between(a.lo, a.hi).iter().any(|&m| v(m) >= vl.min(vr)) {
        return fail(format!("[{}, {}] is not a sublevel set", a.lo, a.hi));
    }
    if !(model.b(a.lo) > model.tol_deriv && model.b(a.hi) < -model.tol_deriv) {
        return fail(format!("flat endpoint slope on [{}, {}]", a.lo, a.hi));
    }
    Ok(())
}

/// Which asymptotic regime applies to the pair, if both arcs sit in valleys.
pub fn classify(decomp: &Decomposition, a1: Interval, a2: Interval) -> Option<CaseKind> {
    let (m1, m2) = (membership(decomp, a1)?, membership(decomp, a2)?);
    Some(if m1.landscape != m2.landscape {
        CaseKind::DiffLandscape
    } else if m1.valley == m2.valley {
        CaseKind::SameValley
    } else if m1.right < m2.right {
        CaseKind::SameLandscapeDiffValleyZEqual
    } else {
        CaseKind::SameLandscapeDiffValleyZWrap
    })
}

/// Leading-order capacity.
pub fn capacity_asymptotic(decomp: &Decomposition, table: &PrefactorTable, model: &DriftModel, eps: f64, a1: Interval, a2: Interval) -> Result<(f64, CaseKind)> {
    let r = arrange(a1, a2)?;
    let not_in_valley = || Error::WellConditionViolated("arc is not inside a valley".into());
    let m1 = membership(decomp, a1).ok_or_else(not_in_valley)?;
    let m2 = membership(decomp, a2).ok_or_else(not_in_valley)?;
    check_well(model, decomp, a1)?;
    check_well(model, decomp, a2)?;
    let kind = classify(decomp, a1, a2).ok_or_else(not_in_valley)?;
    let z = table.z;
    let barrier = (-decomp.h / eps).exp() / z;
    let g1 = table.g1_lifted(m1.landscape, m1.right);
    let g2 = table.g1_lifted(m2.landscape, m2.right);
    let value = match kind {
        CaseKind::DiffLandscape => barrier,
        CaseKind::SameLandscapeDiffValleyZEqual => barrier * g1 / (g1 - g2),
        CaseKind::SameLandscapeDiffValleyZWrap => barrier * (1.0 + g1 / (g2 - g1)),
        CaseKind::SameValley => {
            let (lo, hi) = if m1.right < m2.right {
                (m1.right, m2.right - (r.t2p - r.t2m))
            } else {
                (m2.right, m1.right - (r.t1p - r.t1m))
            };
            let (top, ties) = gap_saddles(model, lo, hi, decomp.tol_abs)
                .ok_or_else(|| Error::WellConditionViolated("no barrier between the arcs".into()))?;
            let level = decomp.landscapes[m1.landscape].level;
            let v = model.s(top) - level + decomp.h;
            let weight: f64 = ties.iter().map(|&m| omega(model, m)).sum();
            g1 / (z * weight) * (-v / eps).exp()
        }
    };
    Ok((value, kind))
}

/// Capacity in either mode. Quadrature mode builds a density oracle; use
/// [`capacity_quadrature`] directly to reuse one.
pub fn capacity(decomp: &Decomposition, model: &DriftModel, eps: f64, a1: Interval, a2: Interval, mode: Mode) -> Result<CapacityResult> {
    let r = arrange(a1, a2)?;
    let mut saddle_points = Vec::new();
    for (lo, hi) in [(r.t1p, r.t2m), (r.t2p, r.t1m + 1.0)] {
        if let Some((m, _)) = gap_saddles(model, lo, hi, decomp.tol_abs) {
            saddle_points.push(reduce(m));
        }
    }
    let (value, case_kind) = match mode {
        Mode::Quadrature => {
            let oracle = QuadratureDensity::for_decomposition(model, decomp, eps)?;
            (capacity_quadrature(&oracle, model, a1, a2)?, classify(decomp, a1, a2))
        }
        Mode::Asymptotic => {
            let table = PrefactorTable::new(decomp, model);
            let (v, k) = capacity_asymptotic(decomp, &table, model, eps, a1, a2)?;
            (v, Some(k))
        }
    };
    Ok(CapacityResult { a1, a2, epsilon: eps, mode, value, case_kind, saddle_points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingBound {
    pub bound: f64,
    /// Energy of the test function in the enlarged process.
    pub cap_bound: f64,
    pub escape_term: f64,
    /// `eps e^{h/eps} int (f')^2 m / 2`; the part of `cap_bound` that scales with `1/gamma`.
    pub dirichlet_part: f64,
    /// `int f^2 m / 2`; multiplied by `gamma` in `cap_bound`.
    pub mass_part: f64,
    pub neighborhood_mass: f64,
}

/// Upper bound on `P_theta[H_{W^c} <= a]` for the valley `W` of well
/// `well_index`, with `a` measured on the time scale `e^{h/eps}`.
/// `eta` sets the neighbourhood of the first deepest minimum.
#[allow(clippy::too_many_arguments)]
pub fn enlarged_hitting_bound(
    decomp: &Decomposition,
    wells: &WellSystem,
    oracle: &QuadratureDensity,
    model: &DriftModel,
    well_index: usize,
    theta: f64,
    a: f64,
    eta: f64,
) -> Result<HittingBound> {
    if !(a > 0.0) || !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("a = {a} and eta = {eta} must be positive")));
    }
    let dv = wells.valleys.get(well_index).ok_or(Error::BadLabel(well_index, 0))?;
    let (wl, wr) = (dv.valley.lo, dv.valley.hi);
    let m = dv.minima[0];
    if m - eta <= wl || m + eta >= wr {
        return Err(Error::BadNeighborhood { lo: m - eta, hi: m + eta });
    }
    let y = dv.valley.lift(theta).filter(|&y| y > wl && y < wr).ok_or(Error::OutsideLandscape(theta))?;
    let eps = oracle.eps;
    let outside = Interval::new(wr, wl + 1.0);
    let mut escape_term = 0.0f64;
    for target in [m - eta, m + eta] {
        escape_term = escape_term.max(equilibrium_potential(model, eps, outside, Interval::new(target, target), y)?);
    }

    // Test function: 0 at m, 1 on the valley boundary.
    let panels = 2000;
    let mut grad = Vec::new();
    let mut mass = Vec::new();
    for (lo, hi, rising) in [(wl, m, false), (m, wr, true)] {
        let n = 2 * panels;
        let h = (hi - lo) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| if i == n { hi } else { lo + h * i as f64 }).collect();
        let mut seg = Vec::with_capacity(n);
        for w in xs.windows(2) {
            seg.push(log_int(model, w[0], w[1], eps)?);
        }
        // log int_m^x e^{S/eps} at every node.
        let mut cum = vec![f64::NEG_INFINITY; n + 1];
        if rising {
            for i in 0..n {
                cum[i + 1] = log_add_exp(cum[i], seg[i]);
            }
        } else {
            for i in (0..n).rev() {
                cum[i] = log_add_exp(cum[i + 1], seg[i]);
            }
        }
        let norm = if rising { cum[n] } else { cum[0] };
        let mut g = Vec::with_capacity(n + 1);
        let mut f2 = Vec::with_capacity(n + 1);
        for (i, &x) in xs.iter().enumerate() {
            let lp = oracle.log_pi(model, x)? - oracle.log_c();
            g.push(2.0 * (model.s(x) / eps - norm) + lp);
            f2.push(2.0 * (cum[i] - norm) + lp);
        }
        grad.push(log_simpson(h, &g));
        mass.push(log_simpson(h, &f2));
    }
    let dirichlet_part = 0.5 * eps * (decomp.h / eps + log_sum_exp(&grad)).exp();
    let mass_part = 0.5 * log_sum_exp(&mass).exp();
    let cap_bound = dirichlet_part + mass_part / a;
    let neighborhood_mass = oracle.log_mass(model, m - eta, m + eta)?.exp();
    let bound = escape_term + 2.0 * std::f64::consts::E * a * cap_bound / neighborhood_mass;
    Ok(HittingBound { bound, cap_bound, escape_term, dirichlet_part, mass_part, neighborhood_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftSpec;
    use crate::landscape::{decompose, identify_wells, DEFAULT_TOL_LEVEL};
    use crate::laplace::integrate;

    fn setup() -> (DriftModel, Decomposition, WellSystem) {
        let m = DriftModel::new(DriftSpec::two_well()).unwrap();
        let d = decompose(&m, DEFAULT_TOL_LEVEL).unwrap();
        let w = identify_wells(&d, &m, 0.5 * d.h).unwrap();
        (m, d, w)
    }

    #[test]
    fn potential_boundary_values() {
        let (m, d, w) = setup();
        let (m1, m2) = (w.valleys[0].minima[0], w.valleys[1].minima[0]);
        let a1 = Interval::new(m1 - 1e-3, m1 + 1e-3);
        let a2 = Interval::new(m2 - 1e-3, m2 + 1e-3);
        assert_eq!(equilibrium_potential(&m, 0.02, a1, a2, m1).unwrap(), 1.0);
        assert_eq!(equilibrium_potential(&m, 0.02, a1, a2, m2 + 1.0).unwrap(), 0.0);
        // Independent plain quadrature of the normalised gap integrals.
        let top = m.s(d.l_points[0]);
        let g = |y: f64| ((m.s(y) - top) / 0.02).exp();
        let expect = integrate(&g, 0.30, a2.lo, 1e-14) / integrate(&g, a1.hi, a2.lo, 1e-14);
        let h = equilibrium_potential(&m, 0.02, a1, a2, 0.30).unwrap();
        assert!((h - expect).abs() < 1e-9, "{h} {expect}");
        assert!(h > 0.85 && h < 0.95);
        assert_eq!(equilibrium_potential(&m, 0.02, a1, Interval::new(m1, m1 + 0.1), 0.5), Err(Error::Overlap));
    }

    #[test]
    fn asymptotic_diff_landscape() {
        let (m, d, w) = setup();
        let r = capacity(&d, &m, 0.04, w.valleys[0].well, w.valleys[1].well, Mode::Asymptotic).unwrap();
        assert_eq!(r.case_kind, Some(CaseKind::DiffLandscape));
        assert!((r.value - 0.0590645).abs() < 1e-6, "{}", r.value);
        assert_eq!(r.saddle_points.len(), 2);
    }

    #[test]
    fn exact_matches_dirichlet_form() {
        let (m, d, w) = setup();
        let q = QuadratureDensity::for_decomposition(&m, &d, 0.05).unwrap();
        let (a1, a2) = (w.valleys[0].well, w.valleys[1].well);
        let exact = capacity_quadrature(&q, &m, a1, a2).unwrap();
        let energy = dirichlet_energy(&q, &m, a1, a2, 4000).unwrap();
        assert!((energy / exact - 1.0).abs() < 1e-6, "{energy} {exact}");
        let swapped = capacity_quadrature(&q, &m, a2, a1).unwrap();
        assert!((swapped / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hitting_bound_is_affine_in_horizon() {
        let (m, d, w) = setup();
        let q = QuadratureDensity::for_decomposition(&m, &d, 0.045).unwrap();
        let m1 = w.valleys[0].minima[0];
        let b1 = enlarged_hitting_bound(&d, &w, &q, &m, 0, m1, 0.01, 0.05).unwrap();
        let b2 = enlarged_hitting_bound(&d, &w, &q, &m, 0, m1, 0.02, 0.05).unwrap();
        let slope = 2.0 * std::f64::consts::E * b1.dirichlet_part / b1.neighborhood_mass;
        assert!(((b2.bound - b1.bound) / 0.01 / slope - 1.0).abs() < 1e-9);
        assert_eq!(b1.escape_term, b2.escape_term);
        assert!(matches!(
            enlarged_hitting_bound(&d, &w, &q, &m, 0, m1, 0.01, 0.3),
            Err(Error::BadNeighborhood { .. })
        ));
    }
}
