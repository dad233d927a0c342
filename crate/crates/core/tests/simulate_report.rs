use metastab::chain::build_reduced_chain;
use metastab::landscape::{decompose, identify_wells, DEFAULT_TOL_LEVEL};
use metastab::simulate::{empirical_report, simulate_paths, trace_project, SimConfig};
use metastab::stationary::PrefactorTable;
use metastab::{DriftModel, DriftSpec, Error};

fn setup(spec: DriftSpec) -> (DriftModel, metastab::landscape::Decomposition, metastab::landscape::WellSystem) {
    let m = DriftModel::new(spec).unwrap();
    let d = decompose(&m, DEFAULT_TOL_LEVEL).unwrap();
    let w = identify_wells(&d, &m, 0.5 * d.h).unwrap();
    (m, d, w)
}

#[test]
fn single_state_report() {
    let (m, d, w) = setup(DriftSpec::fourier(0.25, vec![(2, 1.0)], vec![(1, 0.05)]));
    let c = build_reduced_chain(&d, &w, &PrefactorTable::new(&d, &m), &m).unwrap();
    let cfg = SimConfig { epsilon: 0.05, dt: 0.005, horizon: 1.0, n_paths: 4, seed: 1, record_stride: 0 };
    let traces = trace_project(&simulate_paths(&m, &d, &w, &cfg).unwrap());
    let r = empirical_report(&traces, &c, 200).unwrap();
    assert!(r.pairs.is_empty());
    assert_eq!(r.states.len(), 1);
    assert_eq!(r.states[0].occupancy, 1.0);
}

#[test]
fn too_few_transitions() {
    let (m, d, w) = setup(DriftSpec::two_well());
    let c = build_reduced_chain(&d, &w, &PrefactorTable::new(&d, &m), &m).unwrap();
    let cfg = SimConfig { epsilon: 0.045, dt: 0.002, horizon: 1.0, n_paths: 2, seed: 1, record_stride: 0 };
    let traces = trace_project(&simulate_paths(&m, &d, &w, &cfg).unwrap());
    assert!(matches!(empirical_report(&traces, &c, 200), Err(Error::InsufficientData(_))));
}
