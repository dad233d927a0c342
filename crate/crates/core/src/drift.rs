//! Drift fields on the circle and their antiderivative.
//!
//! A drift is a finite Fourier series
//! `b(x) = mean + sum a_k cos(2 pi k x) + sum c_k sin(2 pi k x)`,
//! so `b`, `b'` and the antiderivative `S(x) = -int_0^x b` are all closed form.
//! `S` is not periodic: `S(x + 1) = S(x) - mean`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL_ROOT: f64 = 1e-12;
pub const DEFAULT_TOL_DERIV: f64 = 1e-8;
const SCAN_START: usize = 4096;
const SCAN_MAX: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftForm {
    Fourier,
    Constant,
}

/// JSON-facing description of a drift.
///
/// ```json
/// {"form":"fourier","mean":0.2,"cos":[[2,1.0]],"sin":[]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub form: DriftForm,
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<(u32, f64)>,
    #[serde(default)]
    pub sin: Vec<(u32, f64)>,
}

impl DriftSpec {
    pub fn constant(mean: f64) -> Self {
        DriftSpec { form: DriftForm::Constant, mean, cos: vec![], sin: vec![] }
    }

    pub fn fourier(mean: f64, cos: Vec<(u32, f64)>, sin: Vec<(u32, f64)>) -> Self {
        DriftSpec { form: DriftForm::Fourier, mean, cos, sin }
    }

    /// The symmetric two-well drift `0.2 + cos(4 pi x)`.
    pub fn two_well() -> Self {
        Self::fourier(0.2, vec![(2, 1.0)], vec![])
    }

    fn check(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::InvalidSpec("mean is not finite".into()));
        }
        if self.form == DriftForm::Constant && !(self.cos.is_empty() && self.sin.is_empty()) {
            return Err(Error::InvalidSpec("constant drift with harmonics".into()));
        }
        for (name, list) in [("cos", &self.cos), ("sin", &self.sin)] {
            let mut seen = Vec::with_capacity(list.len());
            for &(k, a) in list {
                if k == 0 {
                    return Err(Error::InvalidSpec(format!("{name} harmonic 0 (use mean)")));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidSpec(format!("{name} amplitude for k={k} is not finite")));
                }
                if seen.contains(&k) {
                    return Err(Error::InvalidSpec(format!("duplicate {name} harmonic {k}")));
                }
                seen.push(k);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    /// Local minimum of `S` (`b' < 0`).
    SMin,
    /// Local maximum of `S` (`b' > 0`).
    SMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: f64,
    pub kind: CriticalKind,
    pub b_prime: f64,
}

#[derive(Debug, Clone, Copy)]
struct Term {
    freq: f64,
    cos: f64,
    sin: f64,
}

/// A validated drift with its zeros located and classified.
#[derive(Debug, Clone)]
pub struct DriftModel {
    spec: DriftSpec,
    mean: f64,
    terms: Vec<Term>,
    critical: Vec<CriticalPoint>,
    pub tol_root: f64,
    pub tol_deriv: f64,
}

impl DriftModel {
    pub fn new(spec: DriftSpec) -> Result<Self> {
        Self::with_tolerances(spec, DEFAULT_TOL_ROOT, DEFAULT_TOL_DERIV)
    }

    pub fn with_tolerances(spec: DriftSpec, tol_root: f64, tol_deriv: f64) -> Result<Self> {
        spec.check()?;
        if spec.mean.abs() <= tol_root {
            return Err(Error::ZeroMeanDrift(spec.mean));
        }
        if spec.mean < 0.0 {
            return Err(Error::NegativeMean(spec.mean));
        }
        let mut terms: Vec<Term> = Vec::new();
        for &(k, a) in &spec.cos {
            push_term(&mut terms, k, a, 0.0);
        }
        for &(k, c) in &spec.sin {
            push_term(&mut terms, k, 0.0, c);
        }
        terms.retain(|t| t.cos != 0.0 || t.sin != 0.0);
        let mut model = DriftModel { mean: spec.mean, spec, terms, critical: vec![], tol_root, tol_deriv };
        model.critical = model.locate_zeros()?;
        Ok(model)
    }

    pub fn spec(&self) -> &DriftSpec {
        &self.spec
    }

    /// Winding rate `B = int_0^1 b`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Zeros of `b` in `[0, 1)`, sorted.
    pub fn critical_points(&self) -> &[CriticalPoint] {
        &self.critical
    }

    pub fn b(&self, x: f64) -> f64 {
        let mut acc = self.mean;
        for t in &self.terms {
            let (s, c) = (t.freq * x).sin_cos();
            acc += t.cos * c + t.sin * s;
        }
        acc
    }

    pub fn b_prime(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let (s, c) = (t.freq * x).sin_cos();
            acc += t.freq * (t.sin * c - t.cos * s);
        }
        acc
    }

    /// `S(x) = -int_0^x b`, valid for any real `x`.
    pub fn s(&self, x: f64) -> f64 {
        let mut acc = -self.mean * x;
        for t in &self.terms {
            let (s, c) = (t.freq * x).sin_cos();
            acc -= (t.cos * s + t.sin * (1.0 - c)) / t.freq;
        }
        acc
    }

    /// Critical points lying in the open interval `(lo, hi)` of the real
    /// line, lifted from `[0, 1)` and sorted.
    pub fn critical_between(&self, lo: f64, hi: f64) -> Vec<CriticalPoint> {
        let mut out = Vec::new();
        if self.critical.is_empty() || hi <= lo {
            return out;
        }
        let k0 = lo.floor() as i64;
        let k1 = hi.ceil() as i64;
        for k in k0..=k1 {
            for cp in &self.critical {
                let x = cp.location + k as f64;
                if x > lo && x < hi {
                    out.push(CriticalPoint { location: x, ..*cp });
                }
            }
        }
        out
    }

    pub fn maxima_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.critical_between(lo, hi)
            .into_iter()
            .filter(|c| c.kind == CriticalKind::SMax)
            .map(|c| c.location)
            .collect()
    }

    pub fn minima_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.critical_between(lo, hi)
            .into_iter()
            .filter(|c| c.kind == CriticalKind::SMin)
            .map(|c| c.location)
            .collect()
    }

    fn locate_zeros(&self) -> Result<Vec<CriticalPoint>> {
        if self.terms.is_empty() {
            return Ok(vec![]);
        }
        let b = |x: f64| self.b(x);
        let bp = |x: f64| self.b_prime(x);
        let roots = stable_scan(&b, self.tol_root)?;
        // Tangential zeros never change sign, so look at the extrema of b too.
        for x in stable_scan(&bp, self.tol_root)? {
            let v = self.b(x);
            if v.abs() < self.tol_deriv {
                return Err(Error::DegenerateCritical { x, b_prime: 0.0 });
            }
        }
        let mut out = Vec::with_capacity(roots.len());
        for x in roots {
            let d = self.b_prime(x);
            if d.abs() <= self.tol_deriv {
                return Err(Error::DegenerateCritical { x, b_prime: d });
            }
            let kind = if d < 0.0 { CriticalKind::SMin } else { CriticalKind::SMax };
            out.push(CriticalPoint { location: x, kind, b_prime: d });
        }
        for w in out.windows(2) {
            if w[0].kind == w[1].kind {
                return Err(Error::Unresolved(SCAN_MAX));
            }
        }
        Ok(out)
    }
}

fn push_term(terms: &mut Vec<Term>, k: u32, a: f64, c: f64) {
    let freq = TAU * k as f64;
    if let Some(t) = terms.iter_mut().find(|t| t.freq == freq) {
        t.cos += a;
        t.sin += c;
    } else {
        terms.push(Term { freq, cos: a, sin: c });
    }
}

/// Sign-change scan of a 1-periodic function over `[0, 1)`, doubling the grid
/// until two consecutive resolutions agree on the number of zeros.
fn stable_scan(f: &dyn Fn(f64) -> f64, tol: f64) -> Result<Vec<f64>> {
    let mut n = SCAN_START;
    let mut prev = scan_once(f, n, tol);
    while n < SCAN_MAX {
        n *= 2;
        let next = scan_once(f, n, tol);
        if next.len() == prev.len() {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Unresolved(n))
}

fn scan_once(f: &dyn Fn(f64) -> f64, n: usize, tol: f64) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let mut roots = Vec::new();
    let mut x0 = 0.0;
    let mut f0 = f(0.0);
    for i in 1..=n {
        let x1 = i as f64 * h;
        let f1 = if i == n { f(0.0) } else { f(x1) };
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let r = bisect(f, x0, x1, tol);
            roots.push(if r >= 1.0 { r - 1.0 } else { r });
        }
        x0 = x1;
        f0 = f1;
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Bisection on a bracketing interval, run to machine resolution unless the
/// residual drops below `tol` first.
pub(crate) fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 || fm.abs() < tol * 1e-3 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let fl = f(lo).abs();
    let fh = f(hi).abs();
    if fl <= fh { lo } else { hi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_well_zeros() {
        let m = DriftModel::new(DriftSpec::two_well()).unwrap();
        let cps = m.critical_points();
        assert_eq!(cps.len(), 4);
        let expect = [0.14102355421224375, 0.3589764457877563, 0.6410235542122438, 0.8589764457877563];
        for (cp, e) in cps.iter().zip(expect) {
            assert!((cp.location - e).abs() < 1e-13, "{} vs {}", cp.location, e);
            assert!(m.b(cp.location).abs() < 1e-12);
        }
        assert_eq!(cps[0].kind, CriticalKind::SMin);
        assert_eq!(cps[1].kind, CriticalKind::SMax);
        assert!((cps[1].b_prime - 12.312478364).abs() < 1e-8);
    }

    #[test]
    fn antiderivative_values() {
        let m = DriftModel::new(DriftSpec::two_well()).unwrap();
        assert!((m.s(0.14102355421224375) + 0.10617439).abs() < 1e-8);
        assert_eq!(m.s(0.0), 0.0);
        let c = DriftModel::new(DriftSpec::constant(1.0)).unwrap();
        assert!(c.critical_points().is_empty());
        assert_eq!(c.s(0.37), -0.37);
    }

    #[test]
    fn rejects_bad_means() {
        let z = DriftModel::new(DriftSpec::fourier(0.0, vec![(1, 1.0)], vec![]));
        assert!(matches!(z, Err(Error::ZeroMeanDrift(_))));
        let n = DriftModel::new(DriftSpec::fourier(-0.3, vec![(1, 1.0)], vec![]));
        assert!(matches!(n, Err(Error::NegativeMean(_))));
    }

    #[test]
    fn rejects_tangential_zero() {
        // 1 + cos(2 pi x) touches zero at x = 1/2
        let r = DriftModel::new(DriftSpec::fourier(1.0, vec![(1, 1.0)], vec![]));
        assert!(matches!(r, Err(Error::DegenerateCritical { .. })), "{r:?}");
    }

    #[test]
    fn rejects_malformed_spec() {
        let dup = DriftSpec::fourier(0.5, vec![(1, 1.0), (1, 0.2)], vec![]);
        assert!(matches!(DriftModel::new(dup), Err(Error::InvalidSpec(_))));
        let zero = DriftSpec::fourier(0.5, vec![(0, 1.0)], vec![]);
        assert!(matches!(DriftModel::new(zero), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"form":"fourier","mean":0.2,"cos":[[2,1.0]],"sin":[]}"#;
        let spec: DriftSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec, DriftSpec::two_well());
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(back, text);
    }
}
