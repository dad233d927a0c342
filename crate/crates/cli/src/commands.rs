use std::path::PathBuf;

use metastab::capacity::{capacity_asymptotic, capacity_quadrature, CaseKind};
use metastab::chain::{build_reduced_chain, stationary_distribution, ReducedChain};
use metastab::landscape::{decompose, identify_wells, Decomposition, WellSystem};
use metastab::poisson::{build_rhs, flatness_report, solve_poisson};
use metastab::simulate::{empirical_report, simulate_paths, trace_project, SimConfig};
use metastab::stationary::{density_asymptotic, density_quadrature, PrefactorTable, QuadratureDensity, Region};
use metastab::{CriticalPoint, DriftModel, DriftSpec};
use serde::Serialize;

use crate::report::{spec_hash, write_csv, write_json, Header, Tolerances};
use crate::{verify, Cli, CliError, Command};

/// Transitions per ordered pair required by the simulate comparison.
const MIN_JUMPS: usize = 200;

struct Setup {
    model: DriftModel,
    decomp: Decomposition,
    wells: WellSystem,
    header: Header,
}

fn load_spec(cli: &Cli) -> Result<DriftSpec, CliError> {
    let path = cli.opts.drift.as_ref().ok_or_else(|| CliError::Usage("--drift is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn setup(cli: &Cli, name: &str) -> Result<Setup, CliError> {
    let o = &cli.opts;
    let spec = load_spec(cli)?;
    let model = DriftModel::with_tolerances(spec.clone(), o.tol_root, o.tol_deriv)?;
    let decomp = decompose(&model, o.tol_level)?;
    let v_cut = o.vcut.unwrap_or(0.5 * decomp.h);
    let wells = identify_wells(&decomp, &model, v_cut)?;
    let header = Header {
        tool: format!("metastab {}", env!("CARGO_PKG_VERSION")),
        command: name.into(),
        drift_sha256: spec_hash(&spec),
        drift: spec,
        epsilon: o.epsilon.clone(),
        v_cut: Some(v_cut),
        seed: (cli.command == Command::Simulate).then_some(o.seed),
        tolerances: Tolerances { tol_root: o.tol_root, tol_deriv: o.tol_deriv, tol_level: o.tol_level },
    };
    Ok(Setup { model, decomp, wells, header })
}

fn epsilons(cli: &Cli) -> Result<&[f64], CliError> {
    let e = &cli.opts.epsilon;
    if e.is_empty() {
        return Err(CliError::Usage("--epsilon needs at least one value".into()));
    }
    if let Some(bad) = e.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(CliError::Usage(format!("epsilon {bad} must be positive")));
    }
    Ok(e)
}

fn out_path(cli: &Cli, file: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cli.opts.out).map_err(|e| CliError::Io(format!("{}: {e}", cli.opts.out.display())))?;
    Ok(cli.opts.out.join(file))
}

/// `n` uniform points in `[0, 1)` merged with the critical points.
fn grid(model: &DriftModel, n: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    xs.extend(model.critical_points().iter().map(|c| c.location));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze => analyze(cli),
        Command::Density => density(cli),
        Command::Capacity => capacity(cli),
        Command::Chain => chain(cli),
        Command::Poisson => poisson(cli),
        Command::Simulate => simulate(cli),
        Command::Verify => verify::run(),
    }
}

#[derive(Serialize)]
struct Analysis<'a> {
    mean: f64,
    critical_points: &'a [CriticalPoint],
    decomposition: &'a Decomposition,
    wells: &'a WellSystem,
    z: f64,
}

fn analyze(cli: &Cli) -> Result<(), CliError> {
    let s = setup(cli, "analyze")?;
    let z = PrefactorTable::new(&s.decomp, &s.model).z;
    let report = Analysis {
        mean: s.model.mean(),
        critical_points: s.model.critical_points(),
        decomposition: &s.decomp,
        wells: &s.wells,
        z,
    };
    write_json(&out_path(cli, "decomposition.json")?, &s.header, &report)
}

#[derive(Serialize)]
struct DensityRow {
    epsilon: f64,
    x: f64,
    #[serde(rename = "V")]
    v: f64,
    m_asymptotic: f64,
    m_quadrature: f64,
    region: Region,
}

fn density(cli: &Cli) -> Result<(), CliError> {
    let s = setup(cli, "density")?;
    let table = PrefactorTable::new(&s.decomp, &s.model);
    let xs = grid(&s.model, cli.opts.grid);
    let mut rows = Vec::new();
    for &eps in epsilons(cli)? {
        let oracle = QuadratureDensity::for_decomposition(&s.model, &s.decomp, eps)?;
        for &x in &xs {
            let a = density_asymptotic(&s.decomp, &table, &s.model, x, eps);
            let q = density_quadrature(&s.decomp, &oracle, &s.model, x)?;
            rows.push(DensityRow { epsilon: eps, x, v: a.v_at_x, m_asymptotic: a.m_value, m_quadrature: q.m_value, region: a.region });
        }
    }
    write_csv(&out_path(cli, "density.csv")?, &s.header, &rows)
}

#[derive(Serialize)]
struct CapacityRow {
    well_a: usize,
    well_b: usize,
    epsilon: f64,
    case_kind: &'static str,
    cap_quadrature: f64,
    cap_asymptotic: f64,
    rel_error: f64,
}

fn capacity(cli: &Cli) -> Result<(), CliError> {
    let s = setup(cli, "capacity")?;
    let table = PrefactorTable::new(&s.decomp, &s.model);
    let n = s.wells.len();
    let mut rows = Vec::new();
    for &eps in epsilons(cli)? {
        let oracle = QuadratureDensity::for_decomposition(&s.model, &s.decomp, eps)?;
        for i in 0..n {
            for j in i + 1..n {
                let (a1, a2) = (s.wells.valleys[i].well, s.wells.valleys[j].well);
                let q = capacity_quadrature(&oracle, &s.model, a1, a2)?;
                let (a, kind): (f64, CaseKind) = capacity_asymptotic(&s.decomp, &table, &s.model, eps, a1, a2)?;
                rows.push(CapacityRow {
                    well_a: i,
                    well_b: j,
                    epsilon: eps,
                    case_kind: kind.as_str(),
                    cap_quadrature: q,
                    cap_asymptotic: a,
                    rel_error: q / a - 1.0,
                });
            }
        }
    }
    write_csv(&out_path(cli, "capacity.csv")?, &s.header, &rows)
}

#[derive(Serialize)]
struct ChainReport<'a> {
    chain: &'a ReducedChain,
    stationary_residual: f64,
    detailed_balance_violation: f64,
}

fn build_chain(s: &Setup) -> Result<ReducedChain, CliError> {
    let table = PrefactorTable::new(&s.decomp, &s.model);
    Ok(build_reduced_chain(&s.decomp, &s.wells, &table, &s.model)?)
}

fn chain(cli: &Cli) -> Result<(), CliError> {
    let s = setup(cli, "chain")?;
    let c = build_chain(&s)?;
    let (_, residual) = stationary_distribution(&c)?;
    let report = ChainReport { chain: &c, stationary_residual: residual, detailed_balance_violation: c.detailed_balance_violation() };
    write_json(&out_path(cli, "chain.json")?, &s.header, &report)
}

#[derive(Serialize)]
struct PoissonRow {
    epsilon: f64,
    x: f64,
    f: f64,
    g_bar: f64,
    well_id: Option<usize>,
}

fn poisson(cli: &Cli) -> Result<(), CliError> {
    let s = setup(cli, "poisson")?;
    let c = build_chain(&s)?;
    let target: Vec<f64> = if cli.opts.observable.is_empty() {
        (0..c.n_states).map(|j| j as f64).collect()
    } else {
        cli.opts.observable.clone()
    };
    let mut rows = Vec::new();
    for &eps in epsilons(cli)? {
        let oracle = QuadratureDensity::for_decomposition(&s.model, &s.decomp, eps)?;
        let rhs = build_rhs(&s.wells, &c, &target, &oracle, &s.model)?;
        let sol = solve_poisson(&s.decomp, &s.wells, &s.model, &rhs, &target)?;
        let rep = flatness_report(&sol);
        eprintln!(
            "eps {eps}: periodicity gap {:.3e}, residual {:.3e}, flatness {:.4}",
            sol.periodicity_gap, sol.residual, rep.sup_dev
        );
        for (i, &x) in sol.grid.iter().enumerate() {
            let well_id = sol.well_ids[i];
            rows.push(PoissonRow { epsilon: eps, x, f: sol.values[i], g_bar: well_id.map_or(0.0, |w| sol.rhs.values[w]), well_id });
        }
    }
    write_csv(&out_path(cli, "poisson.csv")?, &s.header, &rows)
}

#[derive(Serialize)]
struct TraceRow {
    epsilon: f64,
    path_id: usize,
    well_id: usize,
    t_in: f64,
    t_out: f64,
}

fn simulate(cli: &Cli) -> Result<(), CliError> {
    let s = setup(cli, "simulate")?;
    let c = build_chain(&s)?;
    let o = &cli.opts;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &eps in epsilons(cli)? {
        let cfg = SimConfig { epsilon: eps, dt: o.dt.unwrap_or(eps / 20.0), horizon: o.horizon, n_paths: o.paths, seed: o.seed, record_stride: 0 };
        let traces = trace_project(&simulate_paths(&s.model, &s.decomp, &s.wells, &cfg)?);
        for t in &traces {
            for &(w, a, b) in &t.intervals {
                rows.push(TraceRow { epsilon: eps, path_id: t.path_id, well_id: w, t_in: a, t_out: b });
            }
        }
        reports.push((eps, empirical_report(&traces, &c, MIN_JUMPS)));
    }
    write_csv(&out_path(cli, "traces.csv")?, &s.header, &rows)?;
    let mut ok = Vec::new();
    for (eps, r) in reports {
        ok.push(serde_json::json!({ "epsilon": eps, "comparison": r? }));
    }
    write_json(&out_path(cli, "comparison.json")?, &s.header, &ok)
}
