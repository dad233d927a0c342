//! Closed-form solution of `e^{h/eps} (eps f'' + b f') = g` for right-hand
//! sides that are constant on each well and vanish elsewhere.
//!
//! With base point `w` the left end of a left-most deep valley,
//! `f(x) = F0 + a int_w^x e^{S/eps} + (e^{-h/eps}/eps) int_w^x e^{S(y)/eps} Phi(y) dy`
//! where `Phi(y) = int_w^y g e^{-S/eps}` and `a` is fixed by periodicity of
//! `f'`. Everything is accumulated on one grid in log domain, with the
//! positive and negative parts of `g` kept apart.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::chain::ReducedChain;
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::landscape::{Decomposition, WellSystem};
use crate::laplace::{log_add_exp, log_exp_integral, log_sum_exp};
use crate::stationary::{ln_one_minus_exp, QuadratureDensity};

const GRID_PANELS: usize = 4096;
const REFINE_PANELS: usize = 256;
const REL_TOL: f64 = 1e-12;
const RESIDUAL_SAMPLES: usize = 64;
const RESIDUAL_TOL: f64 = 1e-4;
const MEAN_TOL: f64 = 1e-9;

/// Right-hand side `g = sum_i G(i) 1_{E_i} - r 1_{E_base}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonRhs {
    pub epsilon: f64,
    /// `(L F)(i)` for each state.
    pub generator_values: Vec<f64>,
    /// Centred value on each well.
    pub values: Vec<f64>,
    /// `E_mu[sum_i G(i) 1_{E_i}] / mu(E_base)`.
    pub r_eps: f64,
    pub base_state: usize,
    pub well_masses: Vec<f64>,
    /// `E_mu[g]` after centring; zero up to rounding.
    pub centred_mean: f64,
}

impl PoissonRhs {
    pub fn at(&self, wells: &WellSystem, x: f64) -> f64 {
        wells.well_of(x).map_or(0.0, |i| self.values[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// First left-most deep valley in flat order.
pub fn base_state(wells: &WellSystem) -> Result<usize> {
    wells.valleys.iter().position(|v| v.leftmost).ok_or(Error::EmptyWellSystem)
}

pub fn build_rhs(wells: &WellSystem, chain: &ReducedChain, f: &[f64], oracle: &QuadratureDensity, model: &DriftModel) -> Result<PoissonRhs> {
    if f.len() != chain.n_states {
        return Err(Error::InvalidArgument(format!("F has {} entries for {} states", f.len(), chain.n_states)));
    }
    let base = base_state(wells)?;
    let lf = chain.apply_generator(f);
    let mut well_masses = Vec::with_capacity(wells.len());
    for v in &wells.valleys {
        well_masses.push(oracle.log_mass(model, v.well.lo, v.well.hi)?.exp());
    }
    let mean: f64 = lf.iter().zip(&well_masses).map(|(g, m)| g * m).sum();
    let r_eps = mean / well_masses[base];
    let mut values = lf.clone();
    values[base] -= r_eps;
    let centred_mean = values.iter().zip(&well_masses).map(|(g, m)| g * m).sum();
    Ok(PoissonRhs { epsilon: oracle.eps, generator_values: lf, values, r_eps, base_state: base, well_masses, centred_mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution {
    pub epsilon: f64,
    pub base_point: f64,
    pub a_eps: f64,
    /// Grid over `[base_point, base_point + 1]`.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Well index of each grid point, if any.
    pub well_ids: Vec<Option<usize>>,
    pub rhs: PoissonRhs,
    pub f_target: Vec<f64>,
    /// `f(base + 1) - f(base)`.
    pub periodicity_gap: f64,
    /// Largest ODE residual at the sample points, relative to `max |g|`.
    pub residual: f64,
}

impl PoissonSolution {
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Signed number as `(log |positive part|, log |negative part|)`.
type Split = (f64, f64);

fn split_add(a: Split, b: Split) -> Split {
    (log_add_exp(a.0, b.0), log_add_exp(a.1, b.1))
}

fn split_scaled(log_mag: f64, coef: f64) -> Split {
    if coef > 0.0 {
        (log_mag + coef.ln(), f64::NEG_INFINITY)
    } else if coef < 0.0 {
        (f64::NEG_INFINITY, log_mag + (-coef).ln())
    } else {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    }
}

fn split_value(s: Split, shift: f64) -> f64 {
    (s.0 + shift).exp() - (s.1 + shift).exp()
}

struct Setup<'a> {
    model: &'a DriftModel,
    rhs: &'a PoissonRhs,
    eps: f64,
    /// Wells lifted into `[base, base + 1)`, with their index.
    lifted: Vec<(f64, f64, usize)>,
}

impl Setup<'_> {
    fn g_on(&self, lo: f64, hi: f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        self.lifted.iter().find(|w| mid > w.0 && mid < w.1).map_or(0.0, |w| self.rhs.values[w.2])
    }

    /// `int_lo^hi g e^{-S/eps}` as a split, for `[lo, hi]` inside one piece.
    fn phi_piece(&self, lo: f64, hi: f64) -> Result<Split> {
        let g = self.g_on(lo, hi);
        if g == 0.0 || hi <= lo {
            return Ok((f64::NEG_INFINITY, f64::NEG_INFINITY));
        }
        Ok(split_scaled(log_exp_integral(self.model, lo, hi, self.eps, -1.0, REL_TOL)?.log_value, g))
    }

    /// `int_lo^hi g e^{-S/eps}` for arbitrary `lo <= hi`, split at well ends.
    fn phi_between(&self, lo: f64, hi: f64) -> Result<Split> {
        let mut cuts = vec![lo];
        for w in &self.lifted {
            for e in [w.0, w.1] {
                if e > lo && e < hi {
                    cuts.push(e);
                }
            }
        }
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        let mut acc = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in cuts.windows(2) {
            acc = split_add(acc, self.phi_piece(c[0], c[1])?);
        }
        Ok(acc)
    }
}

/// Solve on a grid refined at critical points, well ends and deep minima.
pub fn solve_poisson(
    decomp: &Decomposition,
    wells: &WellSystem,
    model: &DriftModel,
    rhs: &PoissonRhs,
    f_target: &[f64],
) -> Result<PoissonSolution> {
    let eps = rhs.epsilon;
    let gmax = rhs.max_abs();
    if rhs.centred_mean.abs() > MEAN_TOL * gmax.max(1.0) {
        return Err(Error::MeanNotZero(rhs.centred_mean));
    }
    let f0 = f_target[rhs.base_state];
    let base = wells.valleys[rhs.base_state].valley.lo;
    let top = base + 1.0;
    let lift = |x: f64| x - (x - base).div_euclid(1.0);
    let lifted: Vec<(f64, f64, usize)> = wells
        .valleys
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let lo = lift(v.well.lo);
            (lo, lo + v.well.len(), i)
        })
        .collect();
    let st = Setup { model, rhs, eps, lifted };

    let mut pts: Vec<f64> = (0..=GRID_PANELS).map(|i| base + i as f64 / GRID_PANELS as f64).collect();
    pts.extend(model.critical_between(base, top).iter().map(|c| c.location));
    for w in &st.lifted {
        pts.extend([w.0, w.1]);
    }
    let r = 5.0 * eps.sqrt();
    for &m in &decomp.deep_minima {
        let m = lift(m);
        for i in 0..=REFINE_PANELS {
            let y = m - r + 2.0 * r * i as f64 / REFINE_PANELS as f64;
            if y > base && y < top {
                pts.push(y);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    *pts.last_mut().unwrap() = top;

    // Cumulative `int e^{S/eps}`, `Phi` and the outer integral at each point.
    let n = pts.len();
    let mut log_p = vec![f64::NEG_INFINITY; n];
    let mut phi = vec![(f64::NEG_INFINITY, f64::NEG_INFINITY); n];
    let mut outer = vec![(f64::NEG_INFINITY, f64::NEG_INFINITY); n];
    let weight = |x: f64, p: Split| (p.0 + model.s(x) / eps, p.1 + model.s(x) / eps);
    for k in 0..n - 1 {
        let (x, y) = (pts[k], pts[k + 1]);
        let mid = 0.5 * (x + y);
        log_p[k + 1] = log_add_exp(log_p[k], log_exp_integral(model, x, y, eps, 1.0, REL_TOL)?.log_value);
        let phi_mid = split_add(phi[k], st.phi_piece(x, mid)?);
        phi[k + 1] = split_add(phi_mid, st.phi_piece(mid, y)?);
        let (wl, wm, wr) = (weight(x, phi[k]), weight(mid, phi_mid), weight(y, phi[k + 1]));
        let h6 = ((y - x) / 6.0).ln();
        let panel = (
            h6 + log_sum_exp(&[wl.0, 2.0 * LN_2 + wm.0, wr.0]),
            h6 + log_sum_exp(&[wl.1, 2.0 * LN_2 + wm.1, wr.1]),
        );
        outer[k + 1] = split_add(outer[k], panel);
    }

    // a = (1/eps) e^{-h/eps} Phi(top) / (e^{B/eps} - 1), kept as a split
    // with the log of its scale folded in.
    let beta = model.mean() / eps;
    let log_denominator = beta + ln_one_minus_exp(-beta);
    let a_shift = -decomp.h / eps - eps.ln() - log_denominator;
    let a_split = phi[n - 1];
    let a_eps = split_value(a_split, a_shift);
    let outer_shift = -decomp.h / eps - eps.ln();
    let values: Vec<f64> = (0..n)
        .map(|k| {
            let lin = split_value((a_split.0 + log_p[k], a_split.1 + log_p[k]), a_shift);
            f0 + lin + split_value(outer[k], outer_shift)
        })
        .collect();
    let periodicity_gap = values[n - 1] - values[0];
    let well_ids = pts.iter().map(|&x| wells.well_of(x)).collect();

    // Residual of the equation at sample points, with f'' by central
    // differences of the exact first derivative.
    let fprime = |x: f64| -> Result<f64> {
        let k = pts.partition_point(|&p| p <= x).saturating_sub(1);
        let ph = split_add(phi[k], st.phi_between(pts[k], x)?);
        let s = model.s(x) / eps;
        Ok(split_value((a_split.0 + s, a_split.1 + s), a_shift) + split_value((ph.0 + s, ph.1 + s), outer_shift))
    };
    let margin = 1e-3;
    let mut residual = 0.0f64;
    for i in 0..RESIDUAL_SAMPLES {
        let x = base + (i as f64 + 0.5) / RESIDUAL_SAMPLES as f64;
        if st.lifted.iter().any(|w| (x - w.0).abs() < margin || (x - w.1).abs() < margin) {
            continue;
        }
        let d = 1e-6;
        let f2 = (fprime(x + d)? - fprime(x - d)?) / (2.0 * d);
        let lhs = (decomp.h / eps).exp() * (eps * f2 + model.b(x) * fprime(x)?);
        residual = residual.max((lhs - st.g_on(x, x)).abs());
    }
    let residual = residual / gmax.max(f64::MIN_POSITIVE);
    if gmax > 0.0 && residual > RESIDUAL_TOL {
        return Err(Error::ResidualTooLarge(residual));
    }
    Ok(PoissonSolution {
        epsilon: eps,
        base_point: base,
        a_eps,
        grid: pts,
        values,
        well_ids,
        rhs: rhs.clone(),
        f_target: f_target.to_vec(),
        periodicity_gap,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellFlatness {
    pub well: usize,
    pub mean: f64,
    pub max_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub wells: Vec<WellFlatness>,
    pub sup_dev: f64,
}

/// Deviation of the solution from its target value on each well.
pub fn flatness_report(sol: &PoissonSolution) -> FlatnessReport {
    let n = sol.f_target.len();
    let mut sums = vec![(0.0, 0usize, 0.0f64); n];
    for (v, id) in sol.values.iter().zip(&sol.well_ids) {
        if let Some(i) = *id {
            sums[i].0 += v;
            sums[i].1 += 1;
            sums[i].2 = sums[i].2.max((v - sol.f_target[i]).abs());
        }
    }
    let wells: Vec<WellFlatness> = sums
        .iter()
        .enumerate()
        .map(|(i, &(s, c, d))| WellFlatness { well: i, mean: if c > 0 { s / c as f64 } else { f64::NAN }, max_dev: d })
        .collect();
    let sup_dev = wells.iter().fold(0.0f64, |m, w| m.max(w.max_dev));
    FlatnessReport { wells, sup_dev }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_reduced_chain;
    use crate::drift::DriftSpec;
    use crate::landscape::{decompose, identify_wells, DEFAULT_TOL_LEVEL};
    use crate::stationary::PrefactorTable;

    fn solve(f: &[f64], eps: f64) -> (PoissonSolution, FlatnessReport) {
        let m = DriftModel::new(DriftSpec::two_well()).unwrap();
        let d = decompose(&m, DEFAULT_TOL_LEVEL).unwrap();
        let w = identify_wells(&d, &m, 0.5 * d.h).unwrap();
        let c = build_reduced_chain(&d, &w, &PrefactorTable::new(&d, &m), &m).unwrap();
        let q = QuadratureDensity::for_decomposition(&m, &d, eps).unwrap();
        let rhs = build_rhs(&w, &c, f, &q, &m).unwrap();
        let sol = solve_poisson(&d, &w, &m, &rhs, f).unwrap();
        let rep = flatness_report(&sol);
        (sol, rep)
    }

    #[test]
    fn homogeneous_case_is_constant() {
        let (sol, rep) = solve(&[7.0, 7.0], 0.04);
        assert_eq!(sol.rhs.r_eps, 0.0);
        assert!(sol.values.iter().all(|&v| v == 7.0));
        assert_eq!(rep.sup_dev, 0.0);
    }

    #[test]
    fn two_well_solution() {
        let (sol, rep) = solve(&[0.0, 1.0], 0.04);
        assert!(sol.rhs.centred_mean.abs() < 1e-12);
        assert!(sol.periodicity_gap.abs() < 1e-8, "{}", sol.periodicity_gap);
        assert!(sol.residual < 1e-4);
        assert!(sol.sup_abs() <= 5.0);
        assert!(rep.sup_dev < 0.5, "{rep:?}");
    }

    #[test]
    fn flattens_as_noise_shrinks() {
        let devs: Vec<f64> = [0.08, 0.04, 0.02]
            .iter()
            .map(|&eps| {
                let (sol, rep) = solve(&[0.0, 1.0], eps);
                assert!(sol.periodicity_gap.abs() < 1e-8);
                assert!(sol.sup_abs() <= 5.0);
                rep.sup_dev
            })
            .collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
        assert!(devs[2] < 0.15);
    }
}
