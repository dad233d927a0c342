//! Check suite over the built-in drifts: a constant drift and the symmetric
//! two-well drift `0.2 + cos(4 pi x)`.

use metastab::capacity::capacity_quadrature;
use metastab::chain::{build_reduced_chain, generator_identities, stationary_distribution};
use metastab::landscape::{decompose, identify_wells, vhat, DEFAULT_TOL_LEVEL};
use metastab::poisson::{build_rhs, solve_poisson};
use metastab::simulate::{simulate_paths, trace_project, SimConfig};
use metastab::stationary::{density_asymptotic, PrefactorTable, QuadratureDensity};
use metastab::{DriftModel, DriftSpec, Result};

use crate::CliError;

struct Check {
    drift: &'static str,
    name: &'static str,
    outcome: Result<(bool, String)>,
}

fn constant_checks() -> Vec<Check> {
    let model = DriftModel::new(DriftSpec::constant(1.0)).expect("constant drift is valid");
    let xs: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
    let mut out = Vec::new();
    let density = (|| {
        let mut worst = 0.0f64;
        for eps in [0.1, 0.05] {
            let q = QuadratureDensity::new(&model, eps, &[])?;
            for &x in &xs {
                worst = worst.max((q.m(&model, x)? - 1.0).abs());
            }
        }
        Ok((worst < 1e-6, format!("sup |m - 1| = {worst:.2e}")))
    })();
    out.push(Check { drift: "constant", name: "uniform density", outcome: density });
    let worst = xs.iter().map(|&x| vhat(&model, x).abs()).fold(0.0, f64::max);
    out.push(Check { drift: "constant", name: "flat quasi-potential", outcome: Ok((worst == 0.0, format!("sup |V| = {worst:.2e}"))) });
    let norm = (|| {
        let mut worst = 0.0f64;
        for eps in [0.1f64, 0.05, 0.02] {
            let exact = eps * -(-1.0 / eps).exp_m1();
            worst = worst.max((QuadratureDensity::new(&model, eps, &[])?.c() / exact - 1.0).abs());
        }
        Ok((worst < 1e-9, format!("max rel error {worst:.2e}")))
    })();
    out.push(Check { drift: "constant", name: "normalizer", outcome: norm });
    out
}

fn two_well_checks() -> Vec<Check> {
    let d = "two-well";
    let model = DriftModel::new(DriftSpec::two_well()).expect("two-well drift is valid");
    let decomp = match decompose(&model, DEFAULT_TOL_LEVEL) {
        Ok(x) => x,
        Err(e) => return vec![Check { drift: d, name: "decomposition", outcome: Err(e) }],
    };
    let wells = match identify_wells(&decomp, &model, 0.5 * decomp.h) {
        Ok(x) => x,
        Err(e) => return vec![Check { drift: d, name: "wells", outcome: Err(e) }],
    };
    let table = PrefactorTable::new(&decomp, &model);
    let mut out = Vec::new();
    out.push(Check { drift: d, name: "weight sum", outcome: Ok(((table.z - 1.020620).abs() < 1e-5, format!("Z = {:.7}", table.z))) });
    let m = density_asymptotic(&decomp, &table, &model, 0.14102, 0.04).m_value;
    out.push(Check { drift: d, name: "density at minimum", outcome: Ok(((m - 3.4996).abs() < 1e-3, format!("m = {m:.4}"))) });
    let chain = build_reduced_chain(&decomp, &wells, &table, &model);
    let stat = chain.as_ref().map_err(Clone::clone).and_then(|c| {
        let (_, res) = stationary_distribution(c)?;
        let r = c.rates[0][1];
        Ok((res < 1e-12 && (r - 1.959593).abs() < 1e-5, format!("residual {res:.1e}, rate {r:.6}")))
    });
    out.push(Check { drift: d, name: "reduced chain", outcome: stat });
    let ident = chain.as_ref().map_err(Clone::clone).and_then(|c| {
        let (lhs, rhs) = generator_identities(c, &[0.3, -1.2], 1, 0)?;
        Ok(((lhs - rhs).abs() < 1e-12, format!("|lhs - rhs| = {:.1e}", (lhs - rhs).abs())))
    });
    out.push(Check { drift: d, name: "generator identity", outcome: ident });
    let sym = (|| {
        let q = QuadratureDensity::for_decomposition(&model, &decomp, 0.04)?;
        let (a1, a2) = (wells.valleys[0].well, wells.valleys[1].well);
        let (x, y) = (capacity_quadrature(&q, &model, a1, a2)?, capacity_quadrature(&q, &model, a2, a1)?);
        let rel = (x / y - 1.0).abs();
        Ok((rel < 1e-10, format!("relative asymmetry {rel:.1e}")))
    })();
    out.push(Check { drift: d, name: "capacity symmetry", outcome: sym });
    let pois = chain.as_ref().map_err(Clone::clone).and_then(|c| {
        let q = QuadratureDensity::for_decomposition(&model, &decomp, 0.04)?;
        let rhs = build_rhs(&wells, c, &[0.0, 1.0], &q, &model)?;
        let sol = solve_poisson(&decomp, &wells, &model, &rhs, &[0.0, 1.0])?;
        let ok = sol.periodicity_gap.abs() < 1e-8 && sol.residual < 1e-4;
        Ok((ok, format!("gap {:.1e}, residual {:.1e}", sol.periodicity_gap, sol.residual)))
    });
    out.push(Check { drift: d, name: "poisson solution", outcome: pois });
    let det = (|| {
        let cfg = SimConfig { epsilon: 0.05, dt: 0.0025, horizon: 1.0, n_paths: 4, seed: 11, record_stride: 50 };
        let a = trace_project(&simulate_paths(&model, &decomp, &wells, &cfg)?);
        let b = trace_project(&simulate_paths(&model, &decomp, &wells, &cfg)?);
        Ok((a == b, format!("{} paths", a.len())))
    })();
    out.push(Check { drift: d, name: "seed determinism", outcome: det });
    out
}

pub fn run() -> std::result::Result<(), CliError> {
    let mut checks = constant_checks();
    checks.extend(two_well_checks());
    let mut failed = 0;
    println!("{:<10} {:<22} {:<6} detail", "drift", "check", "result");
    for c in &checks {
        let (status, detail) = match &c.outcome {
            Ok((true, s)) => ("PASS", s.clone()),
            Ok((false, s)) => ("FAIL", s.clone()),
            Err(e) => ("FAIL", e.to_string()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{:<10} {:<22} {:<6} {}", c.drift, c.name, status, detail);
    }
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}
