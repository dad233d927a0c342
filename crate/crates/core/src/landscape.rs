//! Quasi-potential and the decomposition of the circle into saddle intervals,
//! landscapes, valleys and wells.
//!
//! Coordinates are lifted: an interval may extend past 1, and `S` is
//! evaluated on the line, so `S(x + 1) = S(x) - B`.

use serde::{Deserialize, Serialize};

use crate::drift::{bisect, CriticalKind, DriftModel};
use crate::error::{Error, Result};

pub const DEFAULT_TOL_LEVEL: f64 = 1e-9;
/// Rounding allowance when comparing a point with an endpoint shifted by a period.
const LIFT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn shift(&self, k: f64) -> Self {
        Interval { lo: self.lo + k, hi: self.hi + k }
    }

    /// Closed-interval membership of `x` modulo 1; returns the lift of `x`
    /// that lands inside, if any.
    pub fn lift(&self, x: f64) -> Option<f64> {
        let k = (self.lo - x).ceil();
        let y = x + k;
        (y <= self.hi).then_some(y)
    }
}

/// A maximal interval `[left, right]` on which the quasi-potential equals `S`
/// up to an additive constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub left: f64,
    pub right: f64,
    /// `S(left) = S(right)`.
    pub level: f64,
    /// Interior maxima at the landscape level; they separate the valleys.
    pub splits: Vec<f64>,
    pub valleys: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Maxima of `S` that are their own farthest maximum, sorted in `[0, 1)`.
    pub l_points: Vec<f64>,
    /// Left ends of the landscapes, `ell_points[n]` in `(l_points[n], l_points[n] + 1)`.
    pub ell_points: Vec<f64>,
    pub landscapes: Vec<Landscape>,
    /// `(l_points[n], ell_points[n])`.
    pub saddles: Vec<Interval>,
    /// Depth of the deepest well.
    pub h: f64,
    /// Minima in `[0, 1)` where the quasi-potential attains `-h`.
    pub deep_minima: Vec<f64>,
    /// Absolute tolerance used to decide equal heights.
    pub tol_abs: f64,
}

/// Where a point falls in the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Place {
    Saddle { index: usize, x: f64 },
    /// `valley` is `None` on a valley boundary.
    Landscape { index: usize, valley: Option<usize>, x: f64 },
}

/// Right-most location in `[x, x + 1)` of the maximum of `S` over `[x, inf)`.
/// Heights within `tol` of the maximum count as ties.
pub fn zmap(model: &DriftModel, x: f64, tol: f64) -> f64 {
    let mut best = (x, model.s(x));
    let cands: Vec<(f64, f64)> = model.maxima_between(x, x + 1.0).into_iter().map(|m| (m, model.s(m))).collect();
    for &(m, v) in &cands {
        if v > best.1 {
            best = (m, v);
        }
    }
    let top = best.1;
    for &(m, v) in &cands {
        if v >= top - tol && m > best.0 {
            best.0 = m;
        }
    }
    best.0
}

/// `S(x) - max_{y >= x} S(y)`; never positive.
pub fn vhat(model: &DriftModel, x: f64) -> f64 {
    let top = model.maxima_between(x, x + 1.0).into_iter().map(|m| model.s(m)).fold(model.s(x), f64::max);
    (model.s(x) - top).min(0.0)
}

/// Decompose the circle. `tol_level` is relative to the well depth `h`.
pub fn decompose(model: &DriftModel, tol_level: f64) -> Result<Decomposition> {
    let cps = model.critical_points();
    if cps.is_empty() {
        return Err(Error::NoMaxima);
    }
    let minima: Vec<f64> = cps.iter().filter(|c| c.kind == CriticalKind::SMin).map(|c| c.location).collect();
    let maxima: Vec<f64> = cps.iter().filter(|c| c.kind == CriticalKind::SMax).map(|c| c.location).collect();
    let h = minima.iter().map(|&m| -vhat(model, m)).fold(0.0, f64::max);
    if !(h > 0.0) {
        return Err(Error::NoMaxima);
    }
    let tol = tol_level * h;

    let l_points: Vec<f64> = maxima.iter().copied().filter(|&m| zmap(model, m, tol) == m).collect();
    let np = l_points.len();
    let mut ell_points = Vec::with_capacity(np);
    let mut landscapes = Vec::with_capacity(np);
    let mut saddles = Vec::with_capacity(np);
    for n in 0..np {
        let l_here = l_points[n];
        let l_next = if n + 1 < np { l_points[n + 1] } else { l_points[0] + 1.0 };
        let level = model.s(l_next);
        let first_min = model.minima_between(l_here, l_next)[0];
        if (model.s(first_min) - level).abs() <= tol || model.s(first_min) > level {
            return Err(Error::LevelAmbiguous(first_min));
        }
        let f = |y: f64| model.s(y) - level;
        let ell = bisect(&f, l_here, first_min, 0.0);
        let splits: Vec<f64> =
            model.maxima_between(ell, l_next).into_iter().filter(|&m| (model.s(m) - level).abs() <= tol).collect();
        let mut edges = vec![ell];
        edges.extend(&splits);
        edges.push(l_next);
        let valleys = edges.windows(2).map(|w| Interval::new(w[0], w[1])).collect();
        ell_points.push(ell);
        saddles.push(Interval::new(l_here, ell));
        landscapes.push(Landscape { left: ell, right: l_next, level, splits, valleys });
    }
    let deep_minima = minima.iter().copied().filter(|&m| (vhat(model, m) + h).abs() <= tol).collect();
    Ok(Decomposition { l_points, ell_points, landscapes, saddles, h, deep_minima, tol_abs: tol })
}

impl Decomposition {
    /// `(vhat, v)` with `v = vhat + h`.
    pub fn quasi_potential(&self, model: &DriftModel, x: f64) -> (f64, f64) {
        let v = vhat(model, x);
        (v, v + self.h)
    }

    pub fn zmap(&self, model: &DriftModel, x: f64) -> f64 {
        zmap(model, x, self.tol_abs)
    }

    pub fn locate(&self, x: f64) -> Place {
        let base = self.l_points[0];
        let y = x - (x - base).div_euclid(1.0);
        for (n, sad) in self.saddles.iter().enumerate() {
            if y > sad.lo && y < sad.hi {
                return Place::Saddle { index: n, x: y };
            }
            let land = &self.landscapes[n];
            if y >= land.left && y <= land.right {
                let valley = land.valleys.iter().position(|v| y > v.lo && y < v.hi);
                return Place::Landscape { index: n, valley, x: y };
            }
        }
        // y == base exactly: right end of the last landscape.
        let n = self.landscapes.len() - 1;
        Place::Landscape { index: n, valley: None, x: y + 1.0 }
    }
}

/// One of the deepest valleys together with its well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepValley {
    pub valley: Interval,
    pub landscape: usize,
    /// Index among all valleys of the landscape.
    pub position: usize,
    /// Global minima of the quasi-potential inside the valley, increasing.
    pub minima: Vec<f64>,
    pub well: Interval,
    /// First deep valley of its landscape.
    pub leftmost: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellSystem {
    pub v_cut: f64,
    /// Sorted by the first minimum, which lies in `[0, 1)`.
    pub valleys: Vec<DeepValley>,
    /// `barriers[j]`: maxima at height `h` between well `j` and well `j + 1`
    /// (cyclically) inside the landscape of valley `j`.
    pub barriers: Vec<Vec<f64>>,
}

impl WellSystem {
    pub fn len(&self) -> usize {
        self.valleys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valleys.is_empty()
    }

    /// Index of the well containing `x` (mod 1).
    pub fn well_of(&self, x: f64) -> Option<usize> {
        self.valleys.iter().position(|v| {
            v.well.lift(x).is_some_and(|y| y > v.well.lo && y < v.well.hi)
        })
    }
}

/// Wells at quasi-potential level `v_cut` around the deepest minima.
pub fn identify_wells(decomp: &Decomposition, model: &DriftModel, v_cut: f64) -> Result<WellSystem> {
    let h = decomp.h;
    let tol = decomp.tol_abs;
    if v_cut >= h {
        return Err(Error::CutTooHigh { v_cut, h });
    }
    if !(v_cut > 0.0) {
        return Err(Error::InvalidArgument(format!("v_cut = {v_cut} must be positive")));
    }
    let mut found = Vec::new();
    for (n, land) in decomp.landscapes.iter().enumerate() {
        let mut first = true;
        for (k, val) in land.valleys.iter().enumerate() {
            let minima: Vec<f64> = model
                .minima_between(val.lo, val.hi)
                .into_iter()
                .filter(|&m| (model.s(m) - land.level + h).abs() <= tol)
                .collect();
            if minima.is_empty() {
                continue;
            }
            let bottom = model.s(minima[0]);
            let target = bottom + v_cut;
            let lo_min = minima[0];
            let hi_min = *minima.last().unwrap();
            for m in model.maxima_between(lo_min, hi_min) {
                if model.s(m) >= target - tol {
                    return Err(Error::CutSplitsValley { valley_left: val.lo, v_cut, barrier: model.s(m) - bottom });
                }
            }
            let e_lo = level_crossing(model, lo_min, val.lo, target, tol)?;
            let e_hi = level_crossing(model, hi_min, val.hi, target, tol)?;
            let shift = -minima[0].div_euclid(1.0);
            found.push(DeepValley {
                valley: val.shift(shift),
                landscape: n,
                position: k,
                minima: minima.iter().map(|m| m + shift).collect(),
                well: Interval::new(e_lo + shift, e_hi + shift),
                leftmost: first,
            });
            first = false;
        }
    }
    if found.is_empty() {
        return Err(Error::EmptyWellSystem);
    }
    found.sort_by(|a, b| a.minima[0].total_cmp(&b.minima[0]));
    let nv = found.len();
    let mut barriers = Vec::with_capacity(nv);
    for j in 0..nv {
        let here = &found[j];
        let next_lo = if j + 1 < nv { found[j + 1].well.lo } else { found[0].well.lo + 1.0 };
        let land = &decomp.landscapes[here.landscape];
        // Put the landscape in the same lift as the valley.
        let k = (here.valley.lo - land.left).round();
        let (l_lo, l_hi, level) = (land.left + k, land.right + k, land.level - k * model.mean());
        let list = model
            .maxima_between(here.well.hi, next_lo)
            .into_iter()
            .filter(|&m| m >= l_lo - LIFT_SLACK && m <= l_hi + LIFT_SLACK && (model.s(m) - level).abs() <= tol)
            .collect();
        barriers.push(list);
    }
    Ok(WellSystem { v_cut, valleys: found, barriers })
}

/// Walk from the minimum `start` towards `end` (either side) and return the
/// first point where `S` reaches `target`.
fn level_crossing(model: &DriftModel, start: f64, end: f64, target: f64, tol: f64) -> Result<f64> {
    let mut nodes: Vec<f64> = if end < start {
        let mut v: Vec<f64> = model.critical_between(end, start).iter().map(|c| c.location).collect();
        v.reverse();
        v
    } else {
        model.critical_between(start, end).iter().map(|c| c.location).collect()
    };
    nodes.insert(0, start);
    nodes.push(end);
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sb = model.s(b);
        if (sb - target).abs() <= tol && b != end {
            return Err(Error::CutAtCritical(b));
        }
        if sb >= target {
            let f = |y: f64| model.s(y) - target;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let x = bisect(&f, lo, hi, 0.0);
            if model.b(x).abs() < model.tol_deriv {
                return Err(Error::CutAtCritical(x));
            }
            return Ok(x);
        }
    }
    Err(Error::LevelAmbiguous(end))
}
