//! Property tests over randomly drawn Fourier drifts.

use metastab::capacity::equilibrium_potential;
use metastab::chain::{build_reduced_chain, stationary_distribution};
use metastab::drift::CriticalKind;
use metastab::landscape::{decompose, identify_wells, vhat, Interval, Place, DEFAULT_TOL_LEVEL};
use metastab::laplace::{log_add_exp, log_laplace_integral};
use metastab::simulate::{simulate_paths, trace_project, SimConfig};
use metastab::stationary::{omega, sigma, PrefactorTable, QuadratureDensity};
use metastab::{DriftModel, DriftSpec};
use proptest::prelude::*;

fn drift_spec() -> impl Strategy<Value = DriftSpec> {
    (
        0.05f64..1.0,
        prop::collection::vec((1u32..=4, -1.5f64..1.5), 1..4),
        prop::collection::vec((1u32..=4, -1.5f64..1.5), 0..3),
    )
        .prop_map(|(mean, mut cos, mut sin)| {
            cos.sort_by_key(|t| t.0);
            cos.dedup_by_key(|t| t.0);
            sin.sort_by_key(|t| t.0);
            sin.dedup_by_key(|t| t.0);
            DriftSpec::fourier(mean, cos, sin)
        })
}

fn model() -> impl Strategy<Value = DriftModel> {
    drift_spec().prop_filter_map("invalid drift", |s| DriftModel::new(s).ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn antiderivative_shifts_by_the_mean(m in model(), x in -2.0f64..2.0) {
        prop_assert!((m.s(x + 1.0) - (m.s(x) - m.mean())).abs() < 1e-12);
        let h = 1e-5;
        let d = (m.s(x + h) - m.s(x - h)) / (2.0 * h);
        prop_assert!((d + m.b(x)).abs() < 1e-6);
    }

    #[test]
    fn critical_points_alternate(m in model()) {
        let cps = m.critical_points();
        for (i, c) in cps.iter().enumerate() {
            prop_assert!(m.b(c.location).abs() < 1e-10);
            prop_assert_eq!(c.kind == CriticalKind::SMin, c.b_prime < 0.0);
            if cps.len() > 1 {
                prop_assert!(cps[(i + 1) % cps.len()].kind != c.kind);
            }
        }
    }

    #[test]
    fn quasi_potential_structure(m in model(), xs in prop::collection::vec(0.0f64..1.0, 20)) {
        let Ok(d) = decompose(&m, DEFAULT_TOL_LEVEL) else { return Ok(()) };
        let mut offsets: Vec<Option<f64>> = vec![None; d.landscapes.len()];
        for &x in &xs {
            let v = vhat(&m, x);
            prop_assert!(v <= 0.0);
            let z = d.zmap(&m, x);
            prop_assert!(z >= x && z < x + 1.0);
            match d.locate(x) {
                Place::Saddle { .. } => prop_assert!(v.abs() < 1e-10),
                Place::Landscape { index, x: y, .. } => {
                    let off = v - m.s(y);
                    let first = *offsets[index].get_or_insert(off);
                    prop_assert!((off - first).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zmap_is_monotone(m in model(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let tol = 1e-12;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(metastab::landscape::zmap(&m, lo, tol) <= metastab::landscape::zmap(&m, hi, tol) + 1e-12);
    }

    #[test]
    fn weights_are_positive_and_g1_decreases(m in model()) {
        let Ok(d) = decompose(&m, DEFAULT_TOL_LEVEL) else { return Ok(()) };
        for c in m.critical_points() {
            let w = match c.kind { CriticalKind::SMax => omega(&m, c.location), CriticalKind::SMin => sigma(&m, c.location) };
            prop_assert!(w > 0.0 && w.is_finite());
        }
        let t = PrefactorTable::new(&d, &m);
        prop_assert!(t.z > 0.0);
        for (i, l) in d.landscapes.iter().enumerate() {
            let mut last = f64::INFINITY;
            for k in 0..=100 {
                let x = l.left + (l.right - l.left) * k as f64 / 100.0;
                let g = t.g1_lifted(i, x);
                prop_assert!(g <= last + 1e-12 && g >= 0.0);
                last = g;
            }
        }
    }

    #[test]
    fn integrals_add_over_subintervals(m in model(), a in 0.0f64..1.0, w in 0.05f64..1.0, f in 0.1f64..0.9, eps in 0.02f64..0.2) {
        let (b, c) = (a + f * w, a + w);
        let whole = log_laplace_integral(&m, a, c, eps, 1e-12).unwrap().log_value;
        let left = log_laplace_integral(&m, a, b, eps, 1e-12).unwrap().log_value;
        let right = log_laplace_integral(&m, b, c, eps, 1e-12).unwrap().log_value;
        prop_assert!((log_add_exp(left, right) - whole).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_potential_is_monotone(m in model(), eps in 0.03f64..0.2) {
        let (a1, a2) = (Interval::new(0.0, 0.1), Interval::new(0.5, 0.6));
        let mut last = 1.0;
        for k in 0..=40 {
            let x = 0.1 + 0.4 * k as f64 / 40.0;
            let h = equilibrium_potential(&m, eps, a1, a2, x).unwrap();
            prop_assert!(h <= last + 1e-12 && (0.0..=1.0).contains(&h));
            last = h;
        }
    }

    #[test]
    fn chain_is_a_generator(m in model()) {
        let Ok(d) = decompose(&m, DEFAULT_TOL_LEVEL) else { return Ok(()) };
        let Ok(w) = identify_wells(&d, &m, 0.5 * d.h) else { return Ok(()) };
        let c = build_reduced_chain(&d, &w, &PrefactorTable::new(&d, &m), &m).unwrap();
        prop_assert!(c.apply_generator(&vec![3.0; c.n_states]).iter().all(|v| v.abs() < 1e-12));
        prop_assert!((c.mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(c.mu.iter().all(|&p| p > 0.0));
        prop_assert!(stationary_distribution(&c).unwrap().1 < 1e-12);
        for (j, (up, down)) in c.jump_probs.iter().enumerate() {
            if c.n_states > 1 {
                prop_assert!((up + down - 1.0).abs() < 1e-12);
            }
            if c.leftmost[j] && c.n_states > 2 {
                prop_assert_eq!(*down, 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn density_is_normalised(m in model(), eps in 0.05f64..0.2) {
        let q = QuadratureDensity::new(&m, eps, &[]).unwrap();
        let n = 2000;
        let h = 1.0 / n as f64;
        let total: f64 = (0..n).map(|i| q.m(&m, (i as f64 + 0.5) * h).unwrap() * h).sum();
        prop_assert!((total - 1.0).abs() < 1e-5, "{}", total);
    }

    #[test]
    fn trace_conserves_time(seed in any::<u64>()) {
        let m = DriftModel::new(DriftSpec::two_well()).unwrap();
        let d = decompose(&m, DEFAULT_TOL_LEVEL).unwrap();
        let w = identify_wells(&d, &m, 0.5 * d.h).unwrap();
        let cfg = SimConfig { epsilon: 0.06, dt: 0.003, horizon: 2.0, n_paths: 3, seed, record_stride: 0 };
        for t in trace_project(&simulate_paths(&m, &d, &w, &cfg).unwrap()) {
            prop_assert!((t.trace_time() + t.time_in_delta - t.total_time).abs() < 1e-9);
            for win in t.intervals.windows(2) {
                prop_assert!(win[0].2 <= win[1].1 + 1e-12 && win[0].0 != win[1].0);
            }
        }
    }
}
