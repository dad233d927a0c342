//! The reduced Markov chain on the deepest valleys.
//!
//! States are indexed two ways: by a flat index `j` in the order of the
//! first minimum of each valley in `[0, 1)`, and by a pair `(a, k)` where `a`
//! numbers landscapes in order of first appearance and `k` is the position
//! among the deep valleys of that landscape, left to right. Both are
//! zero-based. Jumps go only to cyclic neighbours, and never to the left out
//! of the left-most deep valley of a landscape.

use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::landscape::{Decomposition, WellSystem};
use crate::stationary::{omega, sigma, PrefactorTable};

const STATIONARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedChain {
    pub n_states: usize,
    /// `(a, k)` label of each flat state.
    pub labels: Vec<(usize, usize)>,
    pub leftmost: Vec<bool>,
    /// Sum of `sigma` over the deepest minima of each valley.
    pub pi_weights: Vec<f64>,
    /// `sigma_barriers[j]`: sum of `omega` over the barriers between `j` and `j + 1`.
    pub sigma_barriers: Vec<f64>,
    /// Dense `n x n` rate matrix; the diagonal is zero.
    pub rates: Vec<Vec<f64>>,
    /// `(p(i, i + 1), p(i, i - 1))`; both zero for a single state.
    pub jump_probs: Vec<(f64, f64)>,
    pub holding: Vec<f64>,
    pub mu: Vec<f64>,
    pub g1_at_minima: Vec<f64>,
}

pub fn build_reduced_chain(decomp: &Decomposition, wells: &WellSystem, table: &PrefactorTable, model: &DriftModel) -> Result<ReducedChain> {
    let n = wells.len();
    if n == 0 {
        return Err(Error::EmptyWellSystem);
    }
    let mut order: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(n);
    for dv in &wells.valleys {
        let a = match order.iter().position(|&l| l == dv.landscape) {
            Some(a) => a,
            None => {
                order.push(dv.landscape);
                order.len() - 1
            }
        };
        let k = wells
            .valleys
            .iter()
            .filter(|o| o.landscape == dv.landscape && o.position < dv.position)
            .count();
        labels.push((a, k));
    }
    let leftmost: Vec<bool> = wells.valleys.iter().map(|v| v.leftmost).collect();
    let pi_weights: Vec<f64> = wells.valleys.iter().map(|v| v.minima.iter().map(|&m| sigma(model, m)).sum()).collect();
    let sigma_barriers: Vec<f64> = wells.barriers.iter().map(|bs| bs.iter().map(|&m| omega(model, m)).sum()).collect();
    let g1_at_minima: Vec<f64> = wells.valleys.iter().map(|v| table.g1(decomp, v.minima[0])).collect();

    // Rates across the gap to the right and to the left of each state; with
    // two states both land on the same matrix entry.
    let mut up = vec![0.0; n];
    let mut down = vec![0.0; n];
    let mut rates = vec![vec![0.0; n]; n];
    if n > 1 {
        for j in 0..n {
            let next = (j + 1) % n;
            up[j] = 1.0 / (pi_weights[j] * sigma_barriers[j]);
            rates[j][next] += up[j];
            if !leftmost[next] {
                down[next] = 1.0 / (pi_weights[next] * sigma_barriers[j]);
                rates[next][j] += down[next];
            }
        }
    }
    let holding: Vec<f64> = rates.iter().map(|r| r.iter().sum()).collect();
    let jump_probs =
        (0..n).map(|i| if n == 1 { (0.0, 0.0) } else { (up[i] / holding[i], down[i] / holding[i]) }).collect();
    let weight: Vec<f64> = g1_at_minima.iter().zip(&pi_weights).map(|(g, p)| g * p).collect();
    let total: f64 = weight.iter().sum();
    let mu = weight.iter().map(|w| w / total).collect();
    Ok(ReducedChain { n_states: n, labels, leftmost, pi_weights, sigma_barriers, rates, jump_probs, holding, mu, g1_at_minima })
}

impl ReducedChain {
    /// `(L F)(j) = sum_k R(j, k) (F(k) - F(j))`.
    pub fn apply_generator(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n_states)
            .map(|j| self.rates[j].iter().zip(f).map(|(r, fk)| r * (fk - f[j])).sum())
            .collect()
    }

    /// `(mu L)(k)`: zero for a stationary `mu`.
    pub fn adjoint_residual(&self, mu: &[f64]) -> Vec<f64> {
        (0..self.n_states)
            .map(|k| (0..self.n_states).map(|j| mu[j] * self.rates[j][k]).sum::<f64>() - mu[k] * self.holding[k])
            .collect()
    }

    pub fn flat_index(&self, a: usize, k: usize) -> Result<usize> {
        self.labels.iter().position(|&l| l == (a, k)).ok_or(Error::BadLabel(a, k))
    }

    pub fn pair_label(&self, j: usize) -> Result<(usize, usize)> {
        self.labels.get(j).copied().ok_or(Error::BadLabel(j, 0))
    }

    /// Holding rates in the form `c(i) / mu(i)` with `c` the limiting
    /// capacity between a valley and its two neighbours.
    pub fn holding_from_capacity(&self) -> Vec<f64> {
        let n = self.n_states;
        if n == 1 {
            return vec![0.0];
        }
        let z: f64 = self.g1_at_minima.iter().zip(&self.pi_weights).map(|(g, p)| g * p).sum();
        (0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let mut inv = 1.0 / self.sigma_barriers[i];
                if !self.leftmost[i] {
                    inv += 1.0 / self.sigma_barriers[prev];
                }
                let c = self.g1_at_minima[i] / z * inv;
                c / self.mu[i]
            })
            .collect()
    }

    /// Largest `|mu(j) R(j, k) - mu(k) R(k, j)|`.
    pub fn detailed_balance_violation(&self) -> f64 {
        let n = self.n_states;
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((self.mu[j] * self.rates[j][k] - self.mu[k] * self.rates[k][j]).abs());
            }
        }
        worst
    }
}

/// The stationary law and its residual `max |mu L|`.
pub fn stationary_distribution(chain: &ReducedChain) -> Result<(Vec<f64>, f64)> {
    let residual = chain.adjoint_residual(&chain.mu).iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if residual > STATIONARY_TOL {
        return Err(Error::StationarityViolated(residual));
    }
    Ok((chain.mu.clone(), residual))
}

/// Both sides of the telescoping identity expressing `F(a, l) - F(0, 0)`
/// through `L F` weighted by `pi` and `G1` at the minima.
pub fn generator_identities(chain: &ReducedChain, f: &[f64], a: usize, l: usize) -> Result<(f64, f64)> {
    if f.len() != chain.n_states {
        return Err(Error::InvalidArgument(format!("F has {} entries for {} states", f.len(), chain.n_states)));
    }
    let target = chain.flat_index(a, l)?;
    let base = chain.flat_index(0, 0)?;
    let lf = chain.apply_generator(f);
    let g_target = chain.g1_at_minima[target];
    let mut rhs = 0.0;
    for (j, &(b, k)) in chain.labels.iter().enumerate() {
        let w = lf[j] * chain.pi_weights[j];
        if b < a {
            rhs += w * chain.g1_at_minima[j];
        } else if b == a && k < l {
            rhs += w * (chain.g1_at_minima[j] - g_target);
        }
    }
    Ok((f[target] - f[base], rhs))
}
