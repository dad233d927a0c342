//! Stationary density: the quadrature oracle and its sharp asymptotics.
//!
//! The unnormalised density is `pi(x) = e^{-S(x)/eps} int_x^{x+1} e^{S(y)/eps} dy`
//! and `m = pi / c` with `c = int_0^1 pi`. Asymptotically
//! `m ~ G1(x) e^{-V(x)/eps} / (Z sqrt(eps))` on landscapes and
//! `m ~ e^{-h/eps} / (Z b(x))` on saddle intervals.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::landscape::{Decomposition, Place};
use crate::laplace::{log_add_exp, log_laplace_integral, log_sum_exp};

const GRID_PANELS: usize = 4096;
const REFINE_PANELS: usize = 256;
const REL_TOL: f64 = 1e-11;

/// One-sided Gaussian weight `sqrt(pi / (2 b'(M)))` at a maximum of `S`.
pub fn omega_half(model: &DriftModel, max: f64) -> f64 {
    (PI / (2.0 * model.b_prime(max))).sqrt()
}

/// Two-sided weight `sqrt(2 pi / b'(M))` at a maximum of `S`.
pub fn omega(model: &DriftModel, max: f64) -> f64 {
    (2.0 * PI / model.b_prime(max)).sqrt()
}

/// `sqrt(2 pi / -b'(m))` at a minimum of `S`.
pub fn sigma(model: &DriftModel, min: f64) -> f64 {
    (2.0 * PI / -model.b_prime(min)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    LandscapeValley,
    LandscapeBoundaryLayer,
    SaddleG,
    /// Zeros of the drift inside saddle intervals; empty when all zeros are
    /// simple, so never produced for Fourier drifts.
    SaddleF,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prefactor {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
    pub region: Region,
}

/// Per-landscape jump weights of `G1` and the constant `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefactorTable {
    /// For each landscape, the maxima at the landscape level with their
    /// one-sided weights, increasing.
    pub jumps: Vec<Vec<(f64, f64)>>,
    pub z: f64,
}

impl PrefactorTable {
    pub fn new(decomp: &Decomposition, model: &DriftModel) -> Self {
        let jumps: Vec<Vec<(f64, f64)>> = decomp
            .landscapes
            .iter()
            .map(|l| {
                let mut pts: Vec<(f64, f64)> = l.splits.iter().map(|&m| (m, omega_half(model, m))).collect();
                pts.push((l.right, omega_half(model, l.right)));
                pts
            })
            .collect();
        let mut table = PrefactorTable { jumps, z: 0.0 };
        table.z = decomp.deep_minima.iter().map(|&m| table.g1(decomp, m) * sigma(model, m)).sum();
        table
    }

    /// `G1` at `x`, zero outside landscapes.
    pub fn g1(&self, decomp: &Decomposition, x: f64) -> f64 {
        match decomp.locate(x) {
            Place::Landscape { index, x, .. } => self.g1_lifted(index, x),
            Place::Saddle { .. } => 0.0,
        }
    }

    /// `G1` at a point `x` already lifted into landscape `index`.
    pub fn g1_lifted(&self, index: usize, x: f64) -> f64 {
        self.jumps[index]
            .iter()
            .map(|&(y, w)| if x < y { 2.0 * w } else if x == y { w } else { 0.0 })
            .sum()
    }
}

pub fn prefactor_components(decomp: &Decomposition, table: &PrefactorTable, model: &DriftModel, x: f64) -> Prefactor {
    match decomp.locate(x) {
        Place::Landscape { index, x, .. } => {
            Prefactor { g0: 0.0, g1: table.g1_lifted(index, x), g2: 0.0, region: Region::LandscapeValley }
        }
        Place::Saddle { .. } => Prefactor { g0: 0.0, g1: 0.0, g2: 1.0 / model.b(x), region: Region::SaddleG },
    }
}

/// Half-width of the layer around a region boundary `p` where neither
/// asymptotic branch is sharp: three Gaussian widths at a zero of the drift,
/// three exponential decay lengths elsewhere.
pub fn boundary_layer_width(model: &DriftModel, p: f64, eps: f64) -> f64 {
    let b = model.b(p);
    if b.abs() < 1e-9 {
        3.0 * (eps / model.b_prime(p).abs()).sqrt()
    } else {
        3.0 * eps / b.abs()
    }
}

/// Region of `x` at noise level `eps`, with boundary layers flagged.
pub fn region_at(decomp: &Decomposition, model: &DriftModel, x: f64, eps: f64) -> Region {
    let (lo, hi, y, base) = match decomp.locate(x) {
        Place::Saddle { index, x } => {
            let s = decomp.saddles[index];
            (s.lo, s.hi, x, Region::SaddleG)
        }
        Place::Landscape { index, valley, x } => match valley {
            Some(k) => {
                let v = decomp.landscapes[index].valleys[k];
                (v.lo, v.hi, x, Region::LandscapeValley)
            }
            None => return Region::LandscapeBoundaryLayer,
        },
    };
    if y - lo < boundary_layer_width(model, lo, eps) || hi - y < boundary_layer_width(model, hi, eps) {
        Region::LandscapeBoundaryLayer
    } else {
        base
    }
}

/// The quadrature oracle for the stationary density at one `eps`.
///
/// `log pi` is tabulated on a grid over one period; values in between are
/// recovered exactly (up to quadrature tolerance) from the nearest node to
/// the right.
#[derive(Debug, Clone)]
pub struct QuadratureDensity {
    pub eps: f64,
    nodes: Vec<f64>,
    /// `log int_{x_i}^{x_i + 1} e^{S/eps}` at each node.
    log_w: Vec<f64>,
    log_pi: Vec<f64>,
    log_c: f64,
    log_one_minus: f64,
    mean: f64,
}

impl QuadratureDensity {
    /// Build the oracle. `refine` lists points (typically deep minima) near
    /// which the grid is refined within `5 sqrt(eps)`.
    pub fn new(model: &DriftModel, eps: f64, refine: &[f64]) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::NonFinite(format!("eps = {eps}")));
        }
        let x0 = 0.0;
        let mut pts: Vec<f64> = (0..=GRID_PANELS).map(|i| x0 + i as f64 / GRID_PANELS as f64).collect();
        pts.extend(model.critical_between(x0, x0 + 1.0).iter().map(|c| c.location));
        let r = 5.0 * eps.sqrt();
        for &m in refine {
            for i in 0..=REFINE_PANELS {
                let y = m - r + 2.0 * r * i as f64 / REFINE_PANELS as f64;
                pts.push(y - (y - x0).div_euclid(1.0));
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        if *pts.last().unwrap() != x0 + 1.0 {
            pts.push(x0 + 1.0);
        }
        // Interleave midpoints for Simpson's rule.
        let mut nodes = Vec::with_capacity(2 * pts.len());
        for w in pts.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(x0 + 1.0);

        let k = nodes.len() - 1;
        let mut seg = Vec::with_capacity(k);
        for w in nodes.windows(2) {
            seg.push(log_laplace_integral(model, w[0], w[1], eps, REL_TOL)?.log_value);
        }
        let shift = -model.mean() / eps;
        let mut suffix = vec![f64::NEG_INFINITY; k + 1];
        for i in (0..k).rev() {
            suffix[i] = log_add_exp(suffix[i + 1], seg[i]);
        }
        let mut log_w = Vec::with_capacity(k + 1);
        let mut prefix = f64::NEG_INFINITY;
        for i in 0..=k {
            log_w.push(log_add_exp(suffix[i], prefix + shift));
            if i < k {
                prefix = log_add_exp(prefix, seg[i]);
            }
        }
        let log_pi: Vec<f64> = nodes.iter().zip(&log_w).map(|(&x, &w)| w - model.s(x) / eps).collect();
        let mut panels = Vec::with_capacity(k / 2);
        for i in (0..k).step_by(2) {
            let h = nodes[i + 2] - nodes[i];
            let inner = log_sum_exp(&[log_pi[i], 2.0 * LN_2 + log_pi[i + 1], log_pi[i + 2]]);
            panels.push((h / 6.0).ln() + inner);
        }
        let log_c = log_sum_exp(&panels);
        let log_one_minus = ln_one_minus_exp(shift);
        Ok(QuadratureDensity { eps, nodes, log_w, log_pi, log_c, log_one_minus, mean: model.mean() })
    }

    /// Oracle refined around the deep minima of a decomposition.
    pub fn for_decomposition(model: &DriftModel, decomp: &Decomposition, eps: f64) -> Result<Self> {
        Self::new(model, eps, &decomp.deep_minima)
    }

    pub fn c(&self) -> f64 {
        self.log_c.exp()
    }

    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    /// `(1 - e^{-B/eps}) / c`, the constant in `eps m' - b m + eps R = 0`.
    pub fn r_eps(&self) -> f64 {
        (self.log_one_minus - self.log_c).exp()
    }

    /// `log pi(x)` for any real `x`.
    pub fn log_pi(&self, model: &DriftModel, x: f64) -> Result<f64> {
        let y = x - x.div_euclid(1.0);
        let i = self.nodes.partition_point(|&n| n < y).min(self.nodes.len() - 1);
        if self.nodes[i] == y {
            return Ok(self.log_pi[i]);
        }
        let piece = log_laplace_integral(model, y, self.nodes[i], self.eps, REL_TOL)?.log_value;
        let w = log_add_exp(self.log_w[i], self.log_one_minus + piece);
        Ok(w - model.s(y) / self.eps)
    }

    /// Normalised density `m(x)`.
    pub fn m(&self, model: &DriftModel, x: f64) -> Result<f64> {
        Ok((self.log_pi(model, x)? - self.log_c).exp())
    }

    /// `log mu([a, b])` for `a <= b <= a + 1`.
    pub fn log_mass(&self, model: &DriftModel, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(f64::NEG_INFINITY);
        }
        let step = 1.0 / GRID_PANELS as f64;
        let n = ((b - a) / step).ceil().max(2.0) as usize;
        let h = (b - a) / n as f64;
        let mut terms = Vec::with_capacity(n);
        let mut left = self.log_pi(model, a)?;
        for i in 0..n {
            let x = a + h * i as f64;
            let y = if i + 1 == n { b } else { x + h };
            let mid = self.log_pi(model, 0.5 * (x + y))?;
            let right = self.log_pi(model, y)?;
            terms.push((h / 6.0).ln() + log_sum_exp(&[left, 2.0 * LN_2 + mid, right]));
            left = right;
        }
        Ok(log_sum_exp(&terms) - self.log_c)
    }

    /// Grid nodes over one period with `log pi` at each.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.log_pi.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

/// `log(1 - e^{x})` for `x < 0`.
pub(crate) fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -LN_2 { (-x.exp_m1()).ln() } else { (-x.exp()).ln_1p() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConstants {
    pub z_eps: f64,
    pub z: f64,
    pub c_eps_asym: f64,
    pub c_eps_oracle: f64,
}

pub fn partition_constants(decomp: &Decomposition, model: &DriftModel, eps: f64) -> Result<PartitionConstants> {
    let table = PrefactorTable::new(decomp, model);
    let oracle = QuadratureDensity::for_decomposition(model, decomp, eps)?;
    let z = table.z;
    Ok(PartitionConstants {
        z_eps: eps * z,
        z,
        c_eps_asym: z * eps * (decomp.h / eps).exp(),
        c_eps_oracle: oracle.c(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Asymptotic,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub x: f64,
    pub epsilon: f64,
    pub mode: Mode,
    pub m_value: f64,
    pub v_at_x: f64,
    pub region: Region,
}

/// Leading-order asymptotic density.
pub fn density_asymptotic(decomp: &Decomposition, table: &PrefactorTable, model: &DriftModel, x: f64, eps: f64) -> DensityEstimate {
    let (_, v) = decomp.quasi_potential(model, x);
    let pf = prefactor_components(decomp, table, model, x);
    let m_value = match pf.region {
        Region::SaddleG | Region::SaddleF => pf.g2 * (-v / eps).exp() / table.z,
        _ => pf.g1 * (-v / eps).exp() / (table.z * eps.sqrt()),
    };
    DensityEstimate { x, epsilon: eps, mode: Mode::Asymptotic, m_value, v_at_x: v, region: region_at(decomp, model, x, eps) }
}

/// Quadrature density from a prepared oracle.
pub fn density_quadrature(decomp: &Decomposition, oracle: &QuadratureDensity, model: &DriftModel, x: f64) -> Result<DensityEstimate> {
    let (_, v) = decomp.quasi_potential(model, x);
    Ok(DensityEstimate {
        x,
        epsilon: oracle.eps,
        mode: Mode::Quadrature,
        m_value: oracle.m(model, x)?,
        v_at_x: v,
        region: region_at(decomp, model, x, oracle.eps),
    })
}

/// One-shot density in either mode.
pub fn density(decomp: &Decomposition, model: &DriftModel, x: f64, eps: f64, mode: Mode) -> Result<DensityEstimate> {
    match mode {
        Mode::Asymptotic => Ok(density_asymptotic(decomp, &PrefactorTable::new(decomp, model), model, x, eps)),
        Mode::Quadrature => density_quadrature(decomp, &QuadratureDensity::for_decomposition(model, decomp, eps)?, model, x),
    }
}

/// The finite-`eps` solution of the landscape pre-factor equation,
/// `F_eps(t) = c0 + c1 eps^{-1/2} int_{t0}^{t} e^{(S - S(left))/eps}`, and its
/// limit `c0 + c1 (G1(t0) - G1(t))`.
#[allow(clippy::too_many_arguments)]
pub fn hj_limit(
    decomp: &Decomposition,
    table: &PrefactorTable,
    model: &DriftModel,
    landscape: usize,
    theta0: f64,
    c0: f64,
    c1: f64,
    theta: f64,
    eps: f64,
) -> Result<(f64, f64)> {
    let land = decomp.landscapes.get(landscape).ok_or(Error::OutsideLandscape(theta))?;
    let lift = |t: f64| {
        let k = (land.left - t).ceil();
        let y = t + k;
        if y <= land.right { Ok(y) } else { Err(Error::OutsideLandscape(t)) }
    };
    let (t0, t) = (lift(theta0)?, lift(theta)?);
    let limit = c0 + c1 * (table.g1_lifted(landscape, t0) - table.g1_lifted(landscape, t));
    if c1 == 0.0 || t0 == t {
        return Ok((c0, limit));
    }
    let (lo, hi, sign) = if t0 < t { (t0, t, 1.0) } else { (t, t0, -1.0) };
    let li = log_laplace_integral(model, lo, hi, eps, REL_TOL)?.log_value;
    let integral = (li - land.level / eps).exp() / eps.sqrt();
    Ok((c0 + c1 * sign * integral, limit))
}
