//! Drifts shared by the integration tests.
#![allow(dead_code)]

use metastab::landscape::{decompose, identify_wells, Decomposition, Interval, WellSystem, DEFAULT_TOL_LEVEL};
use metastab::{DriftModel, DriftSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TUNED_COS: [(u32, f64); 5] = [(2, 1.044), (3, -1.404), (4, 0.418), (5, -0.095), (6, -0.078)];
const TUNED_SIN: [(u32, f64); 5] = [(2, 0.909), (3, 2.513), (4, -0.12), (5, -0.095), (6, -0.024)];

fn tuned_spec(c1: f64, s1: f64) -> DriftSpec {
    let mut cos = vec![(1, c1)];
    cos.extend(TUNED_COS);
    let mut sin = vec![(1, s1)];
    sin.extend(TUNED_SIN);
    DriftSpec::fourier(0.15, cos, sin)
}

/// Height mismatches that the first harmonic is tuned to cancel: the inner
/// maximum against the landscape's terminal maximum, and the first two
/// minima against each other.
fn tuned_residual(c1: f64, s1: f64) -> [f64; 2] {
    let m = DriftModel::new(tuned_spec(c1, s1)).unwrap();
    let cp: Vec<f64> = m.critical_points().iter().map(|c| c.location).collect();
    assert_eq!(cp.len(), 6, "tuned drift changed shape");
    [m.s(cp[1]) - m.s(cp[5]), m.s(cp[0]) - m.s(cp[2])]
}

/// One landscape holding three valleys: two at full depth, separated by an
/// inner maximum at the landscape level, and a shallower third one.
pub fn tuned_three_valley() -> DriftSpec {
    let (mut c1, mut s1) = (0.17353359, 0.40370023);
    for _ in 0..20 {
        let r = tuned_residual(c1, s1);
        if r[0].abs().max(r[1].abs()) < 1e-15 {
            break;
        }
        let h = 1e-7;
        let rc = tuned_residual(c1 + h, s1);
        let rs = tuned_residual(c1, s1 + h);
        let j = [[(rc[0] - r[0]) / h, (rs[0] - r[0]) / h], [(rc[1] - r[1]) / h, (rs[1] - r[1]) / h]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        c1 -= (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        s1 -= (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
    }
    tuned_spec(c1, s1)
}

/// `x -> b(k x + phase)`: `k` copies of the profile, rotated.
pub fn replicate(spec: &DriftSpec, k: u32, phase: f64) -> DriftSpec {
    let mut cos = Vec::new();
    let mut sin = Vec::new();
    let harmonics: std::collections::BTreeSet<u32> = spec.cos.iter().chain(&spec.sin).map(|t| t.0).collect();
    for h in harmonics {
        let a = spec.cos.iter().filter(|t| t.0 == h).map(|t| t.1).sum::<f64>();
        let b = spec.sin.iter().filter(|t| t.0 == h).map(|t| t.1).sum::<f64>();
        let th = 2.0 * std::f64::consts::PI * h as f64 * phase;
        cos.push((h * k, a * th.cos() + b * th.sin()));
        sin.push((h * k, b * th.cos() - a * th.sin()));
    }
    DriftSpec::fourier(spec.mean, cos, sin)
}

pub struct Analysed {
    pub model: DriftModel,
    pub decomp: Decomposition,
    pub wells: WellSystem,
}

pub fn analyse(spec: DriftSpec) -> Option<Analysed> {
    let model = DriftModel::new(spec).ok()?;
    let decomp = decompose(&model, DEFAULT_TOL_LEVEL).ok()?;
    for frac in [0.5, 0.3, 0.15] {
        if let Ok(wells) = identify_wells(&decomp, &model, frac * decomp.h) {
            return Some(Analysed { model, decomp, wells });
        }
    }
    None
}

/// Twenty valid drifts with several deep valleys: rotated copies of the
/// tuned profile and random profiles repeated with `k`-fold symmetry.
pub fn random_drifts(seed: u64) -> Vec<Analysed> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tuned = tuned_three_valley();
    let mut out = Vec::new();
    while out.len() < 20 {
        let spec = if out.len() % 2 == 0 {
            replicate(&tuned, rng.random_range(1..=3), rng.random::<f64>())
        } else {
            let k = rng.random_range(2..=4);
            let mean = rng.random_range(0.05..0.5);
            let cos: Vec<(u32, f64)> = (1..=3).map(|h| (h * k, rng.random_range(-1.5..1.5))).collect();
            let sin: Vec<(u32, f64)> = (1..=3).map(|h| (h * k, rng.random_range(-1.5..1.5))).collect();
            DriftSpec::fourier(mean, cos, sin)
        };
        if let Some(a) = analyse(spec) {
            if a.wells.len() >= 2 {
                out.push(a);
            }
        }
    }
    out
}

/// Component around `min` of `{V < level}`, found by stepping outward and
/// bisecting.
pub fn sublevel_arc(a: &Analysed, min: f64, level: f64) -> Interval {
    let v = |x: f64| a.decomp.quasi_potential(&a.model, x).1;
    let edge = |dir: f64| {
        let mut inner = min;
        let mut outer = min + dir * 1e-3;
        while v(outer) < level {
            inner = outer;
            outer += dir * 1e-3;
        }
        for _ in 0..60 {
            let mid = 0.5 * (inner + outer);
            if v(mid) < level {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        0.5 * (inner + outer)
    };
    Interval::new(edge(-1.0), edge(1.0))
}
