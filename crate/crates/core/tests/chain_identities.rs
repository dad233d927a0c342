mod common;

use common::{analyse, random_drifts, tuned_three_valley};
use metastab::chain::{build_reduced_chain, generator_identities, stationary_distribution};
use metastab::stationary::PrefactorTable;
use metastab::DriftSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn tuned_drift_has_a_backward_jump() {
    let a = analyse(tuned_three_valley()).unwrap();
    let t = PrefactorTable::new(&a.decomp, &a.model);
    let c = build_reduced_chain(&a.decomp, &a.wells, &t, &a.model).unwrap();
    assert_eq!(c.n_states, 2);
    assert_eq!(c.leftmost, vec![true, false]);
    assert!(c.jump_probs[1].1 > 0.0);
}

#[test]
fn identities_hold_on_random_drifts() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for a in random_drifts(11) {
        let t = PrefactorTable::new(&a.decomp, &a.model);
        let c = build_reduced_chain(&a.decomp, &a.wells, &t, &a.model).unwrap();
        let (_, res) = stationary_distribution(&c).unwrap();
        assert!(res < 1e-12, "residual {res}");
        for _ in 0..100 {
            let f: Vec<f64> = (0..c.n_states).map(|_| rng.random_range(-1.0..1.0)).collect();
            for &(p, k) in &c.labels {
                let (lhs, rhs) = generator_identities(&c, &f, p, k).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "{:?} ({p},{k}): {lhs} vs {rhs}", c.labels);
            }
        }
    }
}

#[test]
fn three_state_chain_is_not_reversible() {
    let a = analyse(DriftSpec::fourier(0.2, vec![(3, 1.0)], vec![])).unwrap();
    let t = PrefactorTable::new(&a.decomp, &a.model);
    let c = build_reduced_chain(&a.decomp, &a.wells, &t, &a.model).unwrap();
    assert_eq!(c.n_states, 3);
    assert!(c.detailed_balance_violation() > 0.1);
}

