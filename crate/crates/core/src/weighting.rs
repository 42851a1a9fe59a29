//! Reverse-S probability weighting functions.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum WeightingKind {
    /// p^γ / (p^γ + (1−p)^γ)^{1/γ}
    TverskyKahneman { gamma: f64 },
    TabulatedMonotone(Table),
    /// p ↦ 1 − w(1 − p)
    Dual(Arc<WeightingFn>),
}

/// Monotone cubic (Fritsch–Carlson) interpolant through (p, w) knots.
#[derive(Debug, Clone)]
pub struct Table {
    p: Vec<f64>,
    w: Vec<f64>,
    slope: Vec<f64>,
}

impl Table {
    fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Parameter("tabulated weighting needs at least two points".into()));
        }
        let (p, w): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        if p[0] != 0.0 || *p.last().unwrap() != 1.0 {
            return Err(Error::Parameter("tabulated grid must span [0, 1]".into()));
        }
        if w[0] != 0.0 || *w.last().unwrap() != 1.0 {
            return Err(Error::Parameter("tabulated weights must satisfy w(0)=0, w(1)=1".into()));
        }
        if p.windows(2).any(|s| s[1] <= s[0]) {
            return Err(Error::Parameter("tabulated grid must be strictly increasing in p".into()));
        }
        if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter("tabulated weights must lie in [0, 1]".into()));
        }
        let n = p.len();
        let d: Vec<f64> = (0..n - 1).map(|i| (w[i + 1] - w[i]) / (p[i + 1] - p[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            m[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
        }
        for i in 0..n - 1 {
            if d[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / d[i];
            let b = m[i + 1] / d[i];
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                m[i] = t * a * d[i];
                m[i + 1] = t * b * d[i];
            }
        }
        Ok(Table { p, w, slope: m })
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.p.len();
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = match self.p.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.w[i],
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.p[i + 1] - self.p[i];
        let t = (x - self.p[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.w[i] + h10 * h * self.slope[i] + h01 * self.w[i + 1] + h11 * h * self.slope[i + 1]
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.p.iter().copied().zip(self.w.iter().copied())
    }
}

/// A probability weighting function w: [0,1] → [0,1].
#[derive(Debug, Clone)]
pub struct WeightingFn {
    kind: WeightingKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub monotone: bool,
    pub first_monotonicity_violation: Option<f64>,
    pub endpoints_ok: bool,
    pub curvature_sign_changes: usize,
    pub concave_then_convex: bool,
    pub inflection: Option<f64>,
    pub slope_at_one: f64,
    pub slope_at_one_exceeds_one: bool,
    pub passed: bool,
}

impl WeightingFn {
    pub fn tversky_kahneman(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Parameter(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(WeightingFn { kind: WeightingKind::TverskyKahneman { gamma } })
    }

    pub fn identity() -> Self {
        WeightingFn { kind: WeightingKind::TverskyKahneman { gamma: 1.0 } }
    }

    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        Ok(WeightingFn { kind: WeightingKind::TabulatedMonotone(Table::new(points)?) })
    }

    /// Tabulate any function on a uniform grid with `n` cells.
    pub fn tabulate<F: Fn(f64) -> f64>(f: F, n: usize) -> Result<Self> {
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let p = i as f64 / n as f64;
                let v = if i == 0 { 0.0 } else if i == n { 1.0 } else { f(p) };
                (p, v)
            })
            .collect();
        Self::tabulated(&pts)
    }

    pub fn kind(&self) -> &WeightingKind {
        &self.kind
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.kind {
            WeightingKind::TverskyKahneman { gamma } => Some(gamma),
            _ => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        match &self.kind {
            WeightingKind::TverskyKahneman { gamma } => *gamma == 1.0,
            WeightingKind::Dual(inner) => inner.is_identity(),
            WeightingKind::TabulatedMonotone(t) => t.points().all(|(p, w)| (p - w).abs() < 1e-12),
        }
    }

    /// Exponent of the power-law behaviour near the endpoints, if singular.
    pub(crate) fn endpoint_exponent(&self) -> Option<f64> {
        match &self.kind {
            WeightingKind::TverskyKahneman { gamma } if *gamma < 1.0 => Some(*gamma),
            WeightingKind::Dual(inner) => inner.endpoint_exponent(),
            _ => None,
        }
    }

    pub fn eval(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        Ok(self.at(p))
    }

    /// Unchecked evaluation; arguments are clamped into [0, 1].
    #[inline]
    pub fn at(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        match &self.kind {
            WeightingKind::TverskyKahneman { gamma } => tk(p, *gamma),
            WeightingKind::TabulatedMonotone(t) => t.eval(p),
            WeightingKind::Dual(inner) => 1.0 - inner.at(1.0 - p),
        }
    }

    /// w(e^{−u}) for u ≥ 0, accurate for small u.
    #[inline]
    pub fn at_exp_neg(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 1.0;
        }
        match &self.kind {
            WeightingKind::TverskyKahneman { gamma } if *gamma < 1.0 => {
                let g = *gamma;
                let a = -g * u;
                let b = g * (-(-u).exp_m1()).ln();
                let m = a.max(b);
                let ls = m + ((a - m).exp() + (b - m).exp()).ln();
                (a - ls / g).exp().min(1.0)
            }
            WeightingKind::Dual(inner) => 1.0 - inner.at(-(-u).exp_m1()),
            _ => self.at((-u).exp()),
        }
    }

    pub fn derivative(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        match &self.kind {
            WeightingKind::TverskyKahneman { gamma } => {
                let g = *gamma;
                if g == 1.0 {
                    return Ok(1.0);
                }
                if p == 0.0 || p == 1.0 {
                    return Err(Error::Domain(format!(
                        "derivative of TK weighting diverges at p={p} for gamma={g}"
                    )));
                }
                let q = 1.0 - p;
                let s = p.powf(g) + q.powf(g);
                let dlog = g / p - (p.powf(g - 1.0) - q.powf(g - 1.0)) / s;
                Ok(tk(p, g) * dlog)
            }
            WeightingKind::TabulatedMonotone(_) => {
                let h = 1e-6;
                let a = (p - h).max(0.0);
                let b = (p + h).min(1.0);
                Ok((self.at(b) - self.at(a)) / (b - a))
            }
            WeightingKind::Dual(inner) => inner.derivative(1.0 - p),
        }
    }

    /// p ↦ 1 − w(1 − p). The dual of a dual is the original function.
    pub fn dual(&self) -> WeightingFn {
        match &self.kind {
            WeightingKind::Dual(inner) => (**inner).clone(),
            WeightingKind::TverskyKahneman { gamma } if *gamma == 1.0 => self.clone(),
            _ => WeightingFn { kind: WeightingKind::Dual(Arc::new(self.clone())) },
        }
    }

    /// Dense monotone-cubic tabulation with `n` cells.
    pub fn to_tabulated(&self, n: usize) -> Result<WeightingFn> {
        Self::tabulate(|p| self.at(p), n)
    }

    /// Checks that w(p) + w(1 − p) = 1 on a uniform grid.
    pub fn is_symmetric(&self, n: usize, tol: f64) -> bool {
        (0..=n).all(|i| {
            let p = i as f64 / n as f64;
            (self.at(p) + self.at(1.0 - p) - 1.0).abs() <= tol
        })
    }

    pub fn validate_reverse_s(&self, grid_step: f64) -> ValidationReport {
        let n = ((1.0 / grid_step).round() as usize).max(2);
        let h = 1.0 / n as f64;
        let vals: Vec<f64> = (0..=n).map(|i| self.at(i as f64 * h)).collect();
        let endpoints_ok = self.at(0.0) == 0.0 && self.at(1.0) == 1.0;
        let first_violation = vals.windows(2).position(|s| s[1] <= s[0]).map(|i| (i + 1) as f64 * h);
        let monotone = first_violation.is_none();

        let tol = 1e-12;
        let mut signs = Vec::new();
        for i in 1..n {
            let d2 = vals[i + 1] - 2.0 * vals[i] + vals[i - 1];
            if d2.abs() > tol {
                signs.push((i as f64 * h, d2 > 0.0));
            }
        }
        let mut changes = 0;
        let mut inflection = None;
        for s in signs.windows(2) {
            if s[0].1 != s[1].1 {
                changes += 1;
                inflection.get_or_insert(0.5 * (s[0].0 + s[1].0));
            }
        }
        let concave_then_convex = changes == 1 && signs.first().is_some_and(|s| !s.1);
        let eps = h.min(1e-6);
        let slope_at_one = (1.0 - self.at(1.0 - eps)) / eps;
        let slope_ok = slope_at_one > 1.0 + 1e-9;
        ValidationReport {
            monotone,
            first_monotonicity_violation: first_violation,
            endpoints_ok,
            curvature_sign_changes: changes,
            concave_then_convex,
            inflection,
            slope_at_one,
            slope_at_one_exceeds_one: slope_ok,
            passed: monotone && endpoints_ok && concave_then_convex && slope_ok,
        }
    }
}

#[inline]
fn tk(p: f64, g: f64) -> f64 {
    if g == 1.0 {
        return p;
    }
    let q = 1.0 - p;
    // log space keeps p^γ and the normaliser finite for tiny p or q
    let lp = p.ln();
    let lq = q.ln();
    let a = g * lp;
    let b = g * lq;
    let m = a.max(b);
    let ls = m + ((a - m).exp() + (b - m).exp()).ln();
    (a - ls / g).exp().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn oracle(p: f64, g: f64) -> f64 {
        p.powf(g) / (p.powf(g) + (1.0 - p).powf(g)).powf(1.0 / g)
    }

    #[test]
    fn closed_form_values() {
        let w = WeightingFn::tversky_kahneman(0.65).unwrap();
        assert_eq!(w.eval(0.0).unwrap(), 0.0);
        assert_eq!(w.eval(1.0).unwrap(), 1.0);
        assert!((w.eval(0.5).unwrap() - 0.438_770_5).abs() < 1e-7);
        for p in [1e-9, 0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((w.at(p) - oracle(p, 0.65)).abs() < 1e-14);
        }
        assert!((WeightingFn::identity().eval(0.3).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn log_space_survives_tiny_probabilities() {
        let w = WeightingFn::tversky_kahneman(0.5).unwrap();
        let v = w.at(1e-300);
        assert!(v > 0.0 && v.is_finite());
        assert!(w.at(1.0 - 1e-16) < 1.0 + 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(WeightingFn::tversky_kahneman(1.2).is_err());
        assert!(WeightingFn::tversky_kahneman(0.0).is_err());
        let w = WeightingFn::tversky_kahneman(0.65).unwrap();
        assert!(w.eval(-0.1).is_err());
        assert!(w.eval(1.1).is_err());
        assert!(w.derivative(0.0).is_err());
        assert!(w.derivative(1.0).is_err());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let w = WeightingFn::tversky_kahneman(0.65).unwrap();
        for p in [0.05, 0.3, 0.5, 0.8, 0.97] {
            let h = 1e-6;
            let fd = (oracle(p + h, 0.65) - oracle(p - h, 0.65)) / (2.0 * h);
            let d = w.derivative(p).unwrap();
            assert!(((d - fd) / fd).abs() < 1e-6, "{p}: {d} vs {fd}");
        }
        assert!(w.derivative(1.0 - 1e-9).unwrap() > 1.0);
        assert_eq!(WeightingFn::identity().derivative(0.0).unwrap(), 1.0);
    }

    #[test]
    fn reverse_s_report() {
        let r = WeightingFn::tversky_kahneman(0.65).unwrap().validate_reverse_s(0.01);
        assert!(r.passed, "{r:?}");
        let r = WeightingFn::identity().validate_reverse_s(0.01);
        assert!(!r.passed);
        assert!(!r.slope_at_one_exceeds_one);
        let bumpy = WeightingFn::tabulated(&[(0.0, 0.0), (0.3, 0.5), (0.6, 0.4), (1.0, 1.0)]).unwrap();
        let r = bumpy.validate_reverse_s(0.01);
        assert!(!r.monotone && !r.passed);
        assert!(r.first_monotonicity_violation.is_some());
    }

    #[test]
    fn dual_behaviour() {
        let w = WeightingFn::tversky_kahneman(0.65).unwrap();
        let d = w.dual();
        assert!((d.at(0.5) - (1.0 - oracle(0.5, 0.65))).abs() < 1e-15);
        assert!(WeightingFn::identity().dual().is_identity());
        let dd = d.dual();
        for i in 0..=10_000 {
            let p = i as f64 / 10_000.0;
            assert!((dd.at(p) - w.at(p)).abs() < 1e-9);
        }
        let tab = w.to_tabulated(10_000).unwrap();
        let tdd = tab.dual().dual();
        for i in 0..=10_000 {
            let p = i as f64 / 10_000.0;
            assert!((tdd.at(p) - tab.at(p)).abs() < 1e-9);
        }
    }

    #[test]
    fn tabulated_interpolates_knots() {
        let w = WeightingFn::tversky_kahneman(0.6).unwrap().to_tabulated(100).unwrap();
        assert!((w.at(0.37) - oracle(0.37, 0.6)).abs() < 1e-12);
        assert!((w.at(0.375) - oracle(0.375, 0.6)).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn strictly_increasing(g in 0.3f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let w = WeightingFn::tversky_kahneman(g).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(w.at(lo) < w.at(hi));
        }

        #[test]
        fn tabulated_stays_monotone(g in 0.3f64..1.0, x in 0.0f64..0.999) {
            let w = WeightingFn::tversky_kahneman(g).unwrap().to_tabulated(50).unwrap();
            prop_assert!(w.at(x) <= w.at(x + 1e-3) + 1e-15);
        }

        #[test]
        fn dual_is_involution(g in 0.3f64..1.0, p in 0.0f64..1.0) {
            let w = WeightingFn::tversky_kahneman(g).unwrap();
            prop_assert!((w.dual().dual().at(p) - w.at(p)).abs() < 1e-9);
        }
    }
}
