//! Euler–Maruyama paths of the diffusion on the circle, their trace on the
//! wells, and the statistics that compare the trace with the reduced chain.
//!
//! Paths run in unspeeded time. Reports convert to the slow time scale
//! `e^{h/eps}` once, at the end.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::ReducedChain;
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::landscape::{Decomposition, Interval, WellSystem};

/// Normal quantile for the two-sided 95% intervals in the report.
const Z95: f64 = 1.959964;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epsilon: f64,
    /// Step in unspeeded time.
    pub dt: f64,
    /// Length of each path on the slow time scale.
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Keep every `record_stride`-th position; 0 keeps none.
    pub record_stride: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon = {}", self.epsilon)));
        }
        let limit = self.epsilon / 10.0;
        if !(self.dt > 0.0) || self.dt > limit {
            return Err(Error::UnstableStep { dt: self.dt, limit });
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon = {}", self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths = 0".into()));
        }
        Ok(())
    }
}

/// One path. `events` lists every change of the set containing the path:
/// `(time, Some(well))` on entering a well, `(time, None)` on leaving it.
/// The first event is at time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub path_id: usize,
    pub events: Vec<(f64, Option<usize>)>,
    /// `(time, position in [0, 1))`.
    pub positions: Vec<(f64, f64)>,
    pub winding_count: i64,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub epsilon: f64,
    /// `e^{h/eps}`: unspeeded time per slow time unit.
    pub time_scale: f64,
    pub paths: Vec<Trajectory>,
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn membership(sets: &[Interval], x: f64) -> Option<usize> {
    sets.iter().position(|w| w.lift(x).is_some_and(|y| y > w.lo && y < w.hi))
}

/// Fraction along the step `x0 -> x1` (on the line) at which an endpoint of
/// `set` is crossed; the first crossing if `first`, else the last.
fn crossing_fraction(set: &Interval, x0: f64, x1: f64, first: bool) -> f64 {
    let (a, b) = if x0 < x1 { (x0, x1) } else { (x1, x0) };
    let mut best: Option<f64> = None;
    for p in [set.lo, set.hi] {
        let mut q = p + (a - p).ceil();
        while q <= b {
            let f = if x1 == x0 { 1.0 } else { (q - x0) / (x1 - x0) };
            best = Some(match best {
                None => f,
                Some(g) if first => g.min(f),
                Some(g) => g.max(f),
            });
            q += 1.0;
        }
    }
    best.unwrap_or(1.0).clamp(0.0, 1.0)
}

/// Paths started at `starts[p % starts.len()]`, tracking entries to and exits
/// from `sets`. The horizon is `cfg.horizon * time_scale` in unspeeded time.
pub fn simulate_sets(model: &DriftModel, sets: &[Interval], starts: &[f64], time_scale: f64, cfg: &SimConfig) -> Result<TrajectoryBatch> {
    cfg.validate()?;
    if starts.is_empty() {
        return Err(Error::InvalidArgument("no starting points".into()));
    }
    let t_end = cfg.horizon * time_scale;
    let n_steps = (t_end / cfg.dt).ceil() as u64;
    let noise = (2.0 * cfg.epsilon * cfg.dt).sqrt();
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let mut x = starts[p % starts.len()].rem_euclid(1.0);
            let mut state = membership(sets, x);
            let mut events = vec![(0.0, state)];
            let mut positions = Vec::new();
            let mut winding = 0i64;
            for k in 0..n_steps {
                let t0 = k as f64 * cfg.dt;
                if cfg.record_stride > 0 && k % cfg.record_stride as u64 == 0 {
                    positions.push((t0, x));
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                let y = x + model.b(x) * cfg.dt + noise * z;
                let next = membership(sets, y);
                if next != state {
                    if let Some(w) = state {
                        events.push((t0 + cfg.dt * crossing_fraction(&sets[w], x, y, true), None));
                    }
                    if let Some(w) = next {
                        events.push((t0 + cfg.dt * crossing_fraction(&sets[w], x, y, false), Some(w)));
                    }
                    state = next;
                }
                let turns = y.floor();
                winding += turns as i64;
                x = y - turns;
            }
            Trajectory { path_id: p, events, positions, winding_count: winding, final_time: n_steps as f64 * cfg.dt }
        })
        .collect();
    Ok(TrajectoryBatch { epsilon: cfg.epsilon, time_scale, paths })
}

/// Paths of the diffusion tracking the wells, started at the deepest minima
/// in turn.
pub fn simulate_paths(model: &DriftModel, decomp: &Decomposition, wells: &WellSystem, cfg: &SimConfig) -> Result<TrajectoryBatch> {
    if wells.is_empty() {
        return Err(Error::EmptyWellSystem);
    }
    let sets: Vec<Interval> = wells.valleys.iter().map(|v| v.well).collect();
    let starts: Vec<f64> = wells.valleys.iter().map(|v| v.minima[0]).collect();
    simulate_sets(model, &sets, &starts, (decomp.h / cfg.epsilon).exp(), cfg)
}

/// Trace of one path on the wells, on the slow time scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub path_id: usize,
    /// `(well, entry, exit)` on the trace clock, which runs only inside wells.
    pub intervals: Vec<(usize, f64, f64)>,
    /// Slow time spent outside the wells.
    pub time_in_delta: f64,
    /// Slow length of the path.
    pub total_time: f64,
    pub winding_count: i64,
}

impl TraceRecord {
    pub fn trace_time(&self) -> f64 {
        self.intervals.iter().map(|(_, a, b)| b - a).sum()
    }
}

pub fn trace_project(batch: &TrajectoryBatch) -> Vec<TraceRecord> {
    let scale = 1.0 / batch.time_scale;
    batch
        .paths
        .iter()
        .map(|p| {
            let mut intervals: Vec<(usize, f64, f64)> = Vec::new();
            let mut clock = 0.0;
            let mut outside = 0.0;
            for (i, &(t, s)) in p.events.iter().enumerate() {
                let end = p.events.get(i + 1).map_or(p.final_time, |e| e.0);
                let d = (end - t).max(0.0) * scale;
                match s {
                    None => outside += d,
                    Some(w) => {
                        match intervals.last_mut() {
                            Some(last) if last.0 == w => last.2 += d,
                            _ => intervals.push((w, clock, clock + d)),
                        }
                        clock += d;
                    }
                }
            }
            TraceRecord {
                path_id: p.path_id,
                intervals,
                time_in_delta: outside,
                total_time: p.final_time * scale,
                winding_count: p.winding_count,
            }
        })
        .collect()
}

/// Fraction of all simulated time spent outside the wells.
pub fn delta_fraction(traces: &[TraceRecord]) -> f64 {
    let total: f64 = traces.iter().map(|t| t.total_time).sum();
    traces.iter().map(|t| t.time_in_delta).sum::<f64>() / total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub from: usize,
    pub to: usize,
    pub jumps: usize,
    pub time_in_from: f64,
    pub rate_hat: f64,
    pub rate: f64,
    pub ratio: f64,
    /// 95% interval for `ratio` from the Poisson count.
    pub ratio_ci: (f64, f64),
    /// `(jumps - rate * time) / sqrt(rate * time)`.
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStat {
    pub state: usize,
    pub occupancy: f64,
    pub mu: f64,
    pub mean_holding: f64,
    pub expected_holding: f64,
    /// Coefficient of variation of the completed holding times.
    pub holding_cv: f64,
    pub completed_visits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_paths: usize,
    pub trace_time: f64,
    pub delta_fraction: f64,
    pub pairs: Vec<PairStat>,
    pub states: Vec<StateStat>,
    /// Sum of squared `z_score` over the pairs.
    pub chi_square: f64,
}

fn mean_cv(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / mean)
}

/// Compares empirical rates, holding times and occupancy with `chain`.
/// Every transition with a nonzero rate needs `min_jumps` observations.
pub fn empirical_report(traces: &[TraceRecord], chain: &ReducedChain, min_jumps: usize) -> Result<ComparisonReport> {
    let n = chain.n_states;
    let mut jumps = vec![vec![0usize; n]; n];
    let mut time = vec![0.0; n];
    let mut holds: Vec<Vec<f64>> = vec![Vec::new(); n];
    for tr in traces {
        for (i, &(w, a, b)) in tr.intervals.iter().enumerate() {
            if w >= n {
                return Err(Error::InvalidArgument(format!("trace visits well {w} of a {n}-state chain")));
            }
            time[w] += b - a;
            if let Some(&(next, _, _)) = tr.intervals.get(i + 1) {
                jumps[w][next] += 1;
                holds[w].push(b - a);
            }
        }
    }
    let trace_time: f64 = time.iter().sum();
    if !(trace_time > 0.0) {
        return Err(Error::InsufficientData("no time spent in the wells".into()));
    }
    let mut pairs = Vec::new();
    let mut chi_square = 0.0;
    for i in 0..n {
        for (j, &rate) in chain.rates[i].iter().enumerate() {
            if rate <= 0.0 {
                continue;
            }
            let k = jumps[i][j];
            if k < min_jumps {
                return Err(Error::InsufficientData(format!("{k} jumps {i} -> {j}, need {min_jumps}")));
            }
            let expected = rate * time[i];
            let z = (k as f64 - expected) / expected.sqrt();
            chi_square += z * z;
            let half = Z95 * (k as f64).sqrt();
            pairs.push(PairStat {
                from: i,
                to: j,
                jumps: k,
                time_in_from: time[i],
                rate_hat: k as f64 / time[i],
                rate,
                ratio: k as f64 / expected,
                ratio_ci: ((k as f64 - half) / expected, (k as f64 + half) / expected),
                z_score: z,
            });
        }
    }
    let states = (0..n)
        .map(|i| {
            let (mean_holding, holding_cv) = mean_cv(&holds[i]);
            StateStat {
                state: i,
                occupancy: time[i] / trace_time,
                mu: chain.mu[i],
                mean_holding,
                expected_holding: if chain.holding[i] > 0.0 { 1.0 / chain.holding[i] } else { f64::INFINITY },
                holding_cv,
                completed_visits: holds[i].len(),
            }
        })
        .collect();
    let total: f64 = traces.iter().map(|t| t.total_time).sum();
    let outside: f64 = traces.iter().map(|t| t.time_in_delta).sum();
    Ok(ComparisonReport {
        n_paths: traces.len(),
        trace_time,
        delta_fraction: outside / total,
        pairs,
        states,
        chi_square,
    })
}

/// Monte Carlo estimate of `P_theta[exit from (lo, hi) before a]`, with `a`
/// in unspeeded time; returns the estimate and its standard error.
#[allow(clippy::too_many_arguments)]
pub fn exit_probability(model: &DriftModel, eps: f64, dt: f64, theta: f64, set: Interval, a: f64, n_paths: usize, seed: u64) -> Result<(f64, f64)> {
    let limit = eps / 10.0;
    if !(dt > 0.0) || dt > limit {
        return Err(Error::UnstableStep { dt, limit });
    }
    let start = set.lift(theta).filter(|&y| y > set.lo && y < set.hi).ok_or(Error::OutsideLandscape(theta))?;
    if n_paths == 0 || !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("n_paths = {n_paths}, a = {a}")));
    }
    let n_steps = (a / dt).ceil() as u64;
    let noise = (2.0 * eps * dt).sqrt();
    let hits: usize = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut y = start;
            for _ in 0..n_steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                y += model.b(y) * dt + noise * z;
                if y <= set.lo || y >= set.hi {
                    return 1;
                }
            }
            0
        })
        .sum();
    let p = hits as f64 / n_paths as f64;
    Ok((p, (p * (1.0 - p) / n_paths as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftSpec;

    fn cfg(eps: f64, horizon: f64, n_paths: usize) -> SimConfig {
        SimConfig { epsilon: eps, dt: eps / 20.0, horizon, n_paths, seed: 7, record_stride: 0 }
    }

    #[test]
    fn step_limit() {
        let mut c = cfg(0.05, 1.0, 1);
        c.dt = 0.006;
        assert_eq!(c.validate(), Err(Error::UnstableStep { dt: 0.006, limit: 0.005 }));
    }

    #[test]
    fn constant_drift_winds_at_unit_rate() {
        let m = DriftModel::new(DriftSpec::constant(1.0)).unwrap();
        let b = simulate_sets(&m, &[], &[0.0], 1.0, &cfg(0.05, 200.0, 8)).unwrap();
        // Winding over time T has variance 2 eps T.
        let sd = (2.0 * 0.05 * 200.0f64).sqrt() / (8.0f64).sqrt();
        let mean = b.paths.iter().map(|p| p.winding_count as f64).sum::<f64>() / 8.0;
        assert!((mean - 200.0).abs() < 3.0 * sd + 1.0, "{mean}");
    }

    #[test]
    fn same_seed_same_paths() {
        let m = DriftModel::new(DriftSpec::two_well()).unwrap();
        let sets = [Interval::new(0.1, 0.3), Interval::new(0.6, 0.8)];
        let mut c = cfg(0.05, 2.0, 4);
        c.record_stride = 10;
        let a = simulate_sets(&m, &sets, &[0.2, 0.7], 10.0, &c).unwrap();
        let b = simulate_sets(&m, &sets, &[0.2, 0.7], 10.0, &c).unwrap();
        assert_eq!(a, b);
        assert!(a.paths[0].positions.iter().all(|&(_, x)| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn crossing_fraction_wraps() {
        let w = Interval::new(0.9, 1.2);
        assert!((crossing_fraction(&w, 0.15, 0.25, true) - 0.5).abs() < 1e-12);
        assert!((crossing_fraction(&w, 0.85, 0.95, false) - 0.5).abs() < 1e-12);
    }

    fn synthetic(events: Vec<(f64, Option<usize>)>, final_time: f64) -> TrajectoryBatch {
        let path = Trajectory { path_id: 0, events, positions: vec![], winding_count: 0, final_time };
        TrajectoryBatch { epsilon: 0.1, time_scale: 2.0, paths: vec![path] }
    }

    #[test]
    fn trace_of_a_path_that_stays() {
        let t = trace_project(&synthetic(vec![(0.0, Some(0))], 10.0));
        assert_eq!(t[0].intervals, vec![(0, 0.0, 5.0)]);
        assert_eq!(t[0].time_in_delta, 0.0);
    }

    #[test]
    fn excursions_are_deleted() {
        let ev = vec![(0.0, Some(0)), (2.0, None), (3.0, Some(0)), (6.0, None), (8.0, Some(1))];
        let t = &trace_project(&synthetic(ev, 10.0))[0];
        assert_eq!(t.intervals, vec![(0, 0.0, 2.5), (1, 2.5, 3.5)]);
        assert_eq!(t.time_in_delta, 1.5);
        assert!((t.trace_time() + t.time_in_delta - t.total_time).abs() < 1e-12);
    }
}
