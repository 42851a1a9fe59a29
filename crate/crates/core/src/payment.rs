//! Total-payment distributions, payment schedules and T-DIR checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{fmt_sig, gauss16, gauss8, graded16, GaussRule};
use crate::weighting::WeightingFn;

/// Distributions whose support reaches beyond this are treated as divergent.
pub const DEFAULT_HORIZON: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shape {
    Linear,
    /// tail(y) = tail(a)·(tail(b)/tail(a))^{(y−a)/(b−a)}
    LogLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub value: f64,
    pub mass: f64,
}

/// Law of a nonnegative payment, stored through its tail y ↦ P(T > y).
///
/// The tail is continuous and monotone inside each piece [y_k, y_{k+1}) and
/// may jump at the knots; a jump at y_k is an atom there. Between knots the
/// tail is linear (uniform density) or log-linear (exponential density).
#[derive(Debug, Clone)]
pub struct PaymentDistribution {
    knots: Vec<f64>,
    right: Vec<f64>,
    left: Vec<f64>,
    shape: Vec<Shape>,
}

struct Builder {
    knots: Vec<f64>,
    right: Vec<f64>,
    left: Vec<f64>,
    shape: Vec<Shape>,
}

impl Builder {
    fn new() -> Self {
        Builder { knots: vec![0.0], right: Vec::new(), left: Vec::new(), shape: Vec::new() }
    }

    fn current(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Piece from the current knot to `end` with tail `ta` just after the
    /// start and `tb` just before `end`.
    fn push(&mut self, end: f64, ta: f64, tb: f64, shape: Shape) {
        let start = self.current();
        if end <= start {
            return;
        }
        let shape = if ta <= 0.0 || tb <= 0.0 || ta == tb { Shape::Linear } else { shape };
        self.right.push(ta);
        self.left.push(tb);
        self.shape.push(shape);
        self.knots.push(end);
    }

    fn finish(mut self) -> PaymentDistribution {
        self.right.push(0.0);
        PaymentDistribution { knots: self.knots, right: self.right, left: self.left, shape: self.shape }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DirResidual {
    pub s: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirReport {
    pub feasible: bool,
    pub min_slack: f64,
    pub argmin: f64,
    pub tolerance: f64,
    pub residuals: Vec<DirResidual>,
}

pub const DIR_TOLERANCE: f64 = 1e-7;

impl DirReport {
    pub fn from_residuals(residuals: Vec<DirResidual>) -> Self {
        let (mut min_slack, mut argmin) = (f64::INFINITY, 0.0);
        for r in &residuals {
            if r.slack < min_slack {
                min_slack = r.slack;
                argmin = r.s;
            }
        }
        DirReport { feasible: min_slack >= -DIR_TOLERANCE, min_slack, argmin, tolerance: DIR_TOLERANCE, residuals }
    }
}

fn check_finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{what} must be finite, got {v}")))
    }
}

#[inline]
pub(crate) fn interp(shape: Shape, ta: f64, tb: f64, x: f64) -> f64 {
    match shape {
        Shape::Linear => ta + (tb - ta) * x,
        Shape::LogLinear => ta * (tb / ta).powf(x),
    }
}

/// ∫ over a piece of w(c·tail(y)) dy.
fn weighted_piece(w: &WeightingFn, singular: bool, len: f64, ta: f64, tb: f64, shape: Shape, c: f64) -> f64 {
    let ua = (c * ta).min(1.0);
    let ub = (c * tb).min(1.0);
    let span = ua - ub;
    if span.abs() <= 1e-15 * ua.max(1e-300) {
        return len * w.at(ua);
    }
    let rule: &GaussRule = if singular && (1.0 - ua < 2.0 * span || ub < 2.0 * span) {
        graded16()
    } else if span < 0.05 {
        gauss8()
    } else {
        gauss16()
    };
    let mut s = 0.0;
    for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
        s += wt * w.at(c * interp(shape, ta, tb, *x));
    }
    s * len
}

impl PaymentDistribution {
    /// Pure-atom distribution; masses must sum to one within 1e-9.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(atoms, None)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        Self::from_atoms(&[(value, 1.0)])
    }

    /// Atoms plus a histogram density on the uniform grid
    /// [origin + j·step, origin + (j+1)·step).
    pub fn from_density_grid(atoms: &[(f64, f64)], origin: f64, step: f64, density: &[f64]) -> Result<Self> {
        Self::new(atoms, Some((origin, step, density)))
    }

    fn new(atoms: &[(f64, f64)], density: Option<(f64, f64, &[f64])>) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for &(v, m) in atoms {
            check_finite(v, "atom value")?;
            check_finite(m, "atom mass")?;
            if v < 0.0 {
                return Err(Error::Parameter(format!("payment atom at negative value {v}")));
            }
            if m < 0.0 {
                return Err(Error::Parameter(format!("negative atom mass {m}")));
            }
            pts.push((v, m));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for (v, m) in pts {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += m,
                _ => merged.push((v, m)),
            }
        }
        let mut cells: Vec<(f64, f64, f64)> = Vec::new();
        if let Some((origin, step, dens)) = density {
            check_finite(origin, "grid origin")?;
            if !(step > 0.0) {
                return Err(Error::Parameter(format!("grid step must be positive, got {step}")));
            }
            for (j, &d) in dens.iter().enumerate() {
                check_finite(d, "density value")?;
                if d < 0.0 {
                    return Err(Error::Parameter(format!("negative density {d}")));
                }
                let a = (origin + j as f64 * step).max(0.0);
                let b = origin + (j + 1) as f64 * step;
                if b > a && d > 0.0 {
                    cells.push((a, b, d * (b - a)));
                }
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum::<f64>() + cells.iter().map(|c| c.2).sum::<f64>();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("total mass {total} differs from 1")));
        }

        // all knots, then tail values right and left of each
        let mut knots: Vec<f64> = merged.iter().map(|a| a.0).collect();
        for c in &cells {
            knots.push(c.0);
            knots.push(c.1);
        }
        knots.push(0.0);
        knots.sort_by(|a, b| a.total_cmp(b));
        knots.dedup();
        let tail_at = |y: f64, inclusive: bool| -> f64 {
            let mut t = 0.0;
            for a in &merged {
                if a.0 > y || (inclusive && a.0 == y) {
                    t += a.1;
                }
            }
            for c in &cells {
                if y < c.0 {
                    t += c.2;
                } else if y < c.1 {
                    t += c.2 * (c.1 - y) / (c.1 - c.0);
                }
            }
            t
        };
        // O(n·m) build is fine for the sizes used; large grids go through
        // the incremental path below.
        if merged.len() * (cells.len() + merged.len()) < 4_000_000 {
            let mut b = Builder::new();
            for k in 0..knots.len() - 1 {
                let ta = tail_at(knots[k], false);
                let tb = tail_at(knots[k + 1], true);
                b.push(knots[k + 1], ta, tb, Shape::Linear);
            }
            return Ok(b.finish().normalised());
        }
        Self::from_sorted_parts(&merged, &cells)
    }

    fn from_sorted_parts(atoms: &[(f64, f64)], cells: &[(f64, f64, f64)]) -> Result<Self> {
        // sweep from the top keeping running mass above
        let mut knots: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        for c in cells {
            knots.push(c.0);
            knots.push(c.1);
        }
        knots.push(0.0);
        knots.sort_by(|a, b| a.total_cmp(b));
        knots.dedup();
        let n = knots.len();
        let mut atom_at = vec![0.0; n];
        for a in atoms {
            let i = knots.binary_search_by(|k| k.total_cmp(&a.0)).unwrap();
            atom_at[i] += a.1;
        }
        let mut dens = vec![0.0; n];
        for c in cells {
            let i = knots.binary_search_by(|k| k.total_cmp(&c.0)).unwrap();
            let j = knots.binary_search_by(|k| k.total_cmp(&c.1)).unwrap();
            let rate = c.2 / (c.1 - c.0);
            for (k, d) in dens.iter_mut().enumerate().take(j).skip(i) {
                let _ = k;
                *d += rate;
            }
        }
        let mut right = vec![0.0; n];
        let mut left = vec![0.0; n - 1];
        let mut acc = 0.0;
        for k in (0..n - 1).rev() {
            acc += atom_at[k + 1];
            left[k] = acc;
            acc += dens[k] * (knots[k + 1] - knots[k]);
            right[k] = acc;
        }
        let mut b = Builder::new();
        for k in 0..n - 1 {
            b.push(knots[k + 1], right[k], left[k], Shape::Linear);
        }
        Ok(b.finish().normalised())
    }

    fn normalised(mut self) -> Self {
        for v in self.right.iter_mut().chain(self.left.iter_mut()) {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Continuous pieces as (start, end, tail after start, tail before end, shape).
    pub(crate) fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64, f64, Shape)> + '_ {
        (0..self.left.len()).map(|k| (self.knots[k], self.knots[k + 1], self.right[k], self.left[k], self.shape[k]))
    }

    pub fn max_value(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    fn piece_of(&self, y: f64) -> Option<usize> {
        if y < 0.0 || y >= self.max_value() {
            return None;
        }
        let i = self.knots.partition_point(|k| *k <= y);
        Some(i - 1)
    }

    /// P(T > y).
    pub fn tail(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 1.0;
        }
        match self.piece_of(y) {
            None => 0.0,
            Some(k) => {
                let x = (y - self.knots[k]) / (self.knots[k + 1] - self.knots[k]);
                interp(self.shape[k], self.right[k], self.left[k], x)
            }
        }
    }

    /// P(T ≥ y).
    pub fn tail_inclusive(&self, y: f64) -> f64 {
        self.tail(y) + self.atom_mass_at(y)
    }

    fn atom_mass_at(&self, y: f64) -> f64 {
        match self.knots.binary_search_by(|k| k.total_cmp(&y)) {
            Ok(0) => 1.0 - self.right[0],
            Ok(i) => (self.left[i - 1] - self.right[i]).max(0.0),
            Err(_) => 0.0,
        }
    }

    /// Atoms with positive mass, in increasing order of value.
    pub fn atoms(&self) -> Vec<Atom> {
        (0..self.knots.len())
            .filter_map(|i| {
                let m = self.atom_mass_at(self.knots[i]);
                (m > 0.0).then_some(Atom { value: self.knots[i], mass: m })
            })
            .collect()
    }

    /// Density at y (zero at atoms' continuous part is ignored).
    pub fn density(&self, y: f64) -> f64 {
        match self.piece_of(y) {
            None => 0.0,
            Some(k) => {
                let len = self.knots[k + 1] - self.knots[k];
                match self.shape[k] {
                    Shape::Linear => (self.right[k] - self.left[k]) / len,
                    Shape::LogLinear => self.tail(y) * (self.right[k] / self.left[k]).ln() / len,
                }
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        // atoms plus continuous decrements; equals tail(0−) = 1 by construction
        let mut m = 1.0 - self.right[0];
        for k in 0..self.left.len() {
            m += self.right[k] - self.left[k];
            m += self.left[k] - self.right[k + 1];
        }
        m
    }

    /// ∫₀^∞ P(T > y) dy.
    pub fn expected_revenue(&self) -> Result<f64> {
        if self.max_value() > DEFAULT_HORIZON {
            return Err(Error::Divergence(format!("support extends to {} beyond the horizon", self.max_value())));
        }
        let mut s = 0.0;
        for k in 0..self.left.len() {
            let len = self.knots[k + 1] - self.knots[k];
            let (ta, tb) = (self.right[k], self.left[k]);
            s += match self.shape[k] {
                Shape::Linear => 0.5 * len * (ta + tb),
                Shape::LogLinear => len * (ta - tb) / (ta / tb).ln(),
            };
        }
        Ok(s)
    }

    /// λ·∫₀^∞ w(P(T > y)) dy.
    pub fn perceived_cost(&self, w: &WeightingFn, lambda: f64) -> Result<f64> {
        if self.max_value() > DEFAULT_HORIZON {
            return Err(Error::Divergence(format!("support extends to {} beyond the horizon", self.max_value())));
        }
        let v = lambda * self.weighted_tail_from(0.0, 1.0, w);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Divergence("perceived cost is not finite".into()))
        }
    }

    /// ∫_s^∞ w(c·P(T > y)) dy, without building the remainder.
    fn weighted_tail_from(&self, s: f64, c: f64, w: &WeightingFn) -> f64 {
        let Some(k0) = self.piece_of(s) else { return 0.0 };
        let singular = w.endpoint_exponent().is_some();
        let mut total = 0.0;
        for k in k0..self.left.len() {
            let (mut a, mut ta) = (self.knots[k], self.right[k]);
            if k == k0 {
                ta = self.tail(s);
                a = s;
            }
            let b = self.knots[k + 1];
            total += weighted_piece(w, singular, b - a, ta, self.left[k], self.shape[k], c);
        }
        total
    }

    /// Law of T − s given T > s.
    pub fn conditional_remainder(&self, s: f64) -> Result<Self> {
        let ts = self.tail(s);
        if !(ts > 0.0) {
            return Err(Error::Conditioning(format!("P(T > {s}) = 0")));
        }
        if s <= 0.0 && ts == 1.0 {
            return Ok(self.clone());
        }
        let s = s.max(0.0);
        let k0 = self.piece_of(s).unwrap();
        let mut b = Builder::new();
        for k in k0..self.left.len() {
            let ta = if k == k0 { ts } else { self.right[k] };
            b.push(self.knots[k + 1] - s, ta / ts, self.left[k] / ts, self.shape[k]);
        }
        Ok(b.finish().normalised())
    }

    /// Same law with extra zero-mass knots inserted.
    pub fn with_extra_knots(&self, points: &[f64]) -> Self {
        let mut pts: Vec<f64> = points.iter().copied().filter(|p| *p > 0.0 && *p < self.max_value()).collect();
        pts.sort_by(|a, b| a.total_cmp(b));
        let mut b = Builder::new();
        let mut j = 0;
        for k in 0..self.left.len() {
            let (a, e) = (self.knots[k], self.knots[k + 1]);
            let mut start_tail = self.right[k];
            while j < pts.len() && pts[j] < e {
                if pts[j] > a && pts[j] > b.current() {
                    let x = (pts[j] - a) / (e - a);
                    let mid = interp(self.shape[k], self.right[k], self.left[k], x);
                    b.push(pts[j], start_tail, mid, self.shape[k]);
                    start_tail = mid;
                }
                j += 1;
            }
            b.push(e, start_tail, self.left[k], self.shape[k]);
        }
        b.finish()
    }

    /// T-DIR slack θ − λ·cost(remainder at s) for one s.
    pub fn dir_slack(&self, s: f64, w: &WeightingFn, lambda: f64, theta: f64) -> Option<f64> {
        let ts = self.tail(s);
        (ts > 0.0).then(|| theta - lambda * self.weighted_tail_from(s, 1.0 / ts, w))
    }

    /// T-DIR at s = 0, at every knot with positive tail, and at `subdivisions`
    /// interior points of each continuous piece.
    pub fn t_dir_check(&self, w: &WeightingFn, lambda: f64, theta: f64, subdivisions: usize) -> DirReport {
        let mut points = vec![0.0];
        for k in 0..self.left.len() {
            let (a, b) = (self.knots[k], self.knots[k + 1]);
            if k > 0 {
                points.push(a);
            }
            if self.right[k] != self.left[k] {
                for i in 1..=subdivisions {
                    points.push(a + (b - a) * i as f64 / (subdivisions + 1) as f64);
                }
            }
        }
        self.t_dir_check_at(&points, w, lambda, theta)
    }

    pub fn t_dir_check_at(&self, points: &[f64], w: &WeightingFn, lambda: f64, theta: f64) -> DirReport {
        let residuals: Vec<DirResidual> = points
            .par_iter()
            .filter_map(|&s| self.dir_slack(s, w, lambda, theta).map(|slack| DirResidual { s, slack }))
            .collect();
        DirReport::from_residuals(residuals)
    }

    /// inf{y : P(T > y) ≤ v}; maps a uniform v to a draw of T.
    pub fn inverse_tail(&self, v: f64) -> f64 {
        if self.right[0] <= v {
            return 0.0;
        }
        // first knot whose right tail is ≤ v
        let k = self.right.partition_point(|t| *t > v);
        let k = k.min(self.knots.len() - 1);
        let j = k - 1;
        if self.left[j] > v {
            return self.knots[k];
        }
        let (a, b, ta, tb) = (self.knots[j], self.knots[k], self.right[j], self.left[j]);
        let x = match self.shape[j] {
            Shape::Linear => (ta - v) / (ta - tb),
            Shape::LogLinear => (v / ta).ln() / (tb / ta).ln(),
        };
        a + (b - a) * x.clamp(0.0, 1.0)
    }

    /// (y, tail) pairs on a uniform grid from 0 to `y_max`.
    pub fn tail_curve(&self, step: f64, y_max: f64) -> Vec<(f64, f64)> {
        let n = (y_max / step).round() as usize;
        (0..=n).map(|i| {
            let y = i as f64 * step;
            (y, self.tail(y))
        }).collect()
    }

    /// CSV with header `y,tail`.
    pub fn tail_csv(&self, step: f64, y_max: f64) -> String {
        let mut out = String::from("y,tail\n");
        for (y, t) in self.tail_curve(step, y_max) {
            out.push_str(&format!("{},{}\n", fmt_sig(y), fmt_sig(t)));
        }
        out
    }
}

/// Deterministic cumulative payment schedule T(t): a piecewise-constant flow
/// on a time grid plus lump sums (tᵢ, Tᵢ). T is left-continuous with T(0) = 0
/// and constant after the last grid knot and jump.
#[derive(Debug, Clone, Serialize)]
pub struct CumulativePaymentFn {
    knots: Vec<f64>,
    flow: Vec<f64>,
    jumps: Vec<(f64, f64)>,
    #[serde(skip)]
    cum: Vec<f64>,
    #[serde(skip)]
    events: Events,
}

#[derive(Debug, Clone, Default)]
struct Events {
    t: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    rate: Vec<f64>,
}

impl CumulativePaymentFn {
    /// Flow on an arbitrary increasing grid (one rate per cell).
    pub fn on_grid(knots: Vec<f64>, flow: Vec<f64>, mut jumps: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() || knots[0] != 0.0 {
            return Err(Error::Parameter("time grid must start at 0".into()));
        }
        if flow.len() + 1 != knots.len() {
            return Err(Error::Parameter("flow needs one value per grid cell".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("time grid must be strictly increasing".into()));
        }
        for &f in &flow {
            check_finite(f, "flow")?;
            if f < 0.0 {
                return Err(Error::Parameter(format!("negative flow {f}")));
            }
        }
        for &(t, v) in &jumps {
            check_finite(t, "jump time")?;
            check_finite(v, "jump size")?;
            if t < 0.0 || v <= 0.0 {
                return Err(Error::Parameter(format!("invalid jump ({t}, {v})")));
            }
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum = vec![0.0; knots.len()];
        for i in 0..flow.len() {
            cum[i + 1] = cum[i] + flow[i] * (knots[i + 1] - knots[i]);
        }
        let mut s = CumulativePaymentFn { knots, flow, jumps, cum, events: Events::default() };
        s.events = s.build_events();
        Ok(s)
    }

    pub fn uniform(step: f64, flow: Vec<f64>, jumps: Vec<(f64, f64)>) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::Parameter(format!("time step must be positive, got {step}")));
        }
        let knots = (0..=flow.len()).map(|i| i as f64 * step).collect();
        Self::on_grid(knots, flow, jumps)
    }

    pub fn jumps_only(jumps: Vec<(f64, f64)>) -> Result<Self> {
        Self::on_grid(vec![0.0], Vec::new(), jumps)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn flow(&self) -> &[f64] {
        &self.flow
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    pub fn t_max(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Every c-multiple of the payments.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::on_grid(
            self.knots.clone(),
            self.flow.iter().map(|f| f * c).collect(),
            self.jumps.iter().map(|&(t, v)| (t, v * c)).collect(),
        )
    }

    fn flow_cum(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.t_max() {
            return *self.cum.last().unwrap();
        }
        let i = self.knots.partition_point(|k| *k <= t) - 1;
        self.cum[i] + self.flow[i] * (t - self.knots[i])
    }

    /// T(t), left-continuous: a jump at tᵢ counts for t > tᵢ.
    pub fn eval(&self, t: f64) -> f64 {
        let mut v = self.flow_cum(t);
        for &(tj, x) in &self.jumps {
            if tj < t {
                v += x;
            } else {
                break;
            }
        }
        v
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().unwrap() + self.jumps.iter().map(|j| j.1).sum::<f64>()
    }

    fn build_events(&self) -> Events {
        let mut t: Vec<f64> = self.knots.clone();
        t.extend(self.jumps.iter().map(|j| j.0));
        t.sort_by(|a, b| a.total_cmp(b));
        t.dedup();
        let mut ev = Events::default();
        let mut ji = 0;
        let mut jump_before = 0.0;
        for (i, &te) in t.iter().enumerate() {
            let base = self.flow_cum(te);
            let left = base + jump_before;
            let mut at = 0.0;
            while ji < self.jumps.len() && self.jumps[ji].0 == te {
                at += self.jumps[ji].1;
                ji += 1;
            }
            jump_before += at;
            ev.t.push(te);
            ev.left.push(left);
            ev.right.push(left + at);
            if i + 1 < t.len() {
                let mid = 0.5 * (te + t[i + 1]);
                let c = self.knots.partition_point(|k| *k <= mid);
                ev.rate.push(if c == 0 || c > self.flow.len() { 0.0 } else { self.flow[c - 1] });
            }
        }
        ev
    }

    /// Generalised inverse sup{t : T(t) ≤ x}; +∞ when x ≥ T(∞).
    pub fn inverse(&self, x: f64) -> f64 {
        let ev = &self.events;
        let n = ev.t.len();
        let j = ev.left.partition_point(|v| *v <= x);
        if j == 0 {
            return 0.0;
        }
        let j = j - 1;
        if ev.right[j] > x {
            return ev.t[j];
        }
        if j + 1 == n {
            return f64::INFINITY;
        }
        let r = ev.rate[j];
        if r > 0.0 {
            (ev.t[j] + (x - ev.right[j]) / r).min(ev.t[j + 1])
        } else {
            ev.t[j + 1]
        }
    }

    /// Σ Tᵢe^{−tᵢ} + ∫e^{−t}f(t)dt, the expected payment under τ₀.
    pub fn exponential_revenue(&self) -> f64 {
        let mut s: f64 = self.jumps.iter().map(|&(t, v)| v * (-t).exp()).sum();
        for i in 0..self.flow.len() {
            s += self.flow[i] * ((-self.knots[i]).exp() - (-self.knots[i + 1]).exp());
        }
        s
    }

    /// Law of T(τ₀) for a unit-rate exponential τ₀.
    pub fn pushforward_exponential(&self) -> PaymentDistribution {
        let ev = &self.events;
        let mut b = Builder::new();
        let mut tail_now = 1.0;
        for i in 0..ev.t.len() {
            let te = ev.t[i];
            let tail_te = (-te).exp();
            // flat stretch before te was already closed; a jump at te is a gap
            b.push(ev.right[i], tail_te, tail_te, Shape::Linear);
            tail_now = tail_te;
            if i + 1 < ev.t.len() {
                let r = ev.rate[i];
                let next = ev.t[i + 1];
                if r > 0.0 {
                    b.push(ev.left[i + 1], tail_now, (-next).exp(), Shape::LogLinear);
                }
            }
        }
        let _ = tail_now;
        b.finish()
    }

    /// Lemma-style DIR cost at time s computed two ways: through the
    /// generalised inverse in money space, and decomposed over jumps and flow.
    pub fn dir_cost_two_ways(&self, s: f64, w: &WeightingFn) -> (f64, f64) {
        (self.dir_cost_direct(s, w), self.dir_cost_decomposed(s, w))
    }

    pub fn dir_cost_direct(&self, s: f64, w: &WeightingFn) -> f64 {
        let base = self.eval(s);
        let top = self.total();
        if top <= base {
            return 0.0;
        }
        let ev = &self.events;
        let mut cuts: Vec<f64> = ev.left.iter().chain(ev.right.iter()).map(|v| v - base).filter(|v| *v > 0.0 && *v < top - base).collect();
        cuts.push(0.0);
        cuts.push(top - base);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));
        let g = graded16();
        let f = |y: f64| w.at((-(self.inverse(y + base) - s)).exp());
        cuts.windows(2).map(|c| g.integrate(f, c[0], c[1])).sum()
    }

    pub fn dir_cost_decomposed(&self, s: f64, w: &WeightingFn) -> f64 {
        let mut total = 0.0;
        for &(t, v) in &self.jumps {
            if t >= s {
                total += v * w.at((-(t - s)).exp());
            }
        }
        for i in 0..self.flow.len() {
            let (a, b) = (self.knots[i].max(s), self.knots[i + 1]);
            if b <= a || self.flow[i] == 0.0 {
                continue;
            }
            let rule = if a - s < 2.0 * (b - a) { graded16() } else { gauss8() };
            total += self.flow[i] * rule.integrate(|t| w.at((-(t - s)).exp()), a, b);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::adaptive_simpson;
    use proptest::prelude::*;

    fn tk(g: f64) -> WeightingFn {
        WeightingFn::tversky_kahneman(g).unwrap()
    }

    #[test]
    fn two_atoms() {
        let d = PaymentDistribution::from_atoms(&[(2.0, 0.5), (4.0, 0.5)]).unwrap();
        assert_eq!(d.expected_revenue().unwrap(), 3.0);
        assert_eq!(d.tail(1.9), 1.0);
        assert_eq!(d.tail(2.0), 0.5);
        assert_eq!(d.tail(4.0), 0.0);
        let w = tk(0.65);
        let c = d.perceived_cost(&w, 1.0).unwrap();
        assert!((c - (2.0 + 2.0 * w.at(0.5))).abs() < 1e-14);
        let r = d.conditional_remainder(2.0).unwrap();
        assert_eq!(r.atoms(), vec![Atom { value: 2.0, mass: 1.0 }]);
        assert!(d.conditional_remainder(4.0).is_err());
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(PaymentDistribution::from_atoms(&[(1.0, 0.4)]).is_err());
        assert!(PaymentDistribution::from_atoms(&[(-1.0, 1.0)]).is_err());
    }

    #[test]
    fn single_atom_cost() {
        let d = PaymentDistribution::deterministic(10.0).unwrap();
        assert_eq!(d.perceived_cost(&tk(0.65), 1.0).unwrap(), 10.0);
    }

    #[test]
    fn remainder_at_zero_is_identity() {
        let d = PaymentDistribution::from_atoms(&[(1.0, 0.2), (3.0, 0.8)]).unwrap();
        let r = d.conditional_remainder(0.0).unwrap();
        assert_eq!(r.knots(), d.knots());
        assert_eq!(r.atoms(), d.atoms());
    }

    #[test]
    fn geometric_memoryless() {
        let q: f64 = 0.3;
        let atoms: Vec<(f64, f64)> = (1..200).map(|k| (k as f64, q * (1.0 - q).powi(k - 1))).collect();
        let mut atoms = atoms;
        let rest = 1.0 - atoms.iter().map(|a| a.1).sum::<f64>();
        atoms.last_mut().unwrap().1 += rest;
        let d = PaymentDistribution::from_atoms(&atoms).unwrap();
        let r = d.conditional_remainder(1.0).unwrap();
        for y in [0.0, 0.5, 1.0, 2.5, 10.0] {
            assert!((r.tail(y) - d.tail(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_density_revenue() {
        let step = 1e-3;
        let n = 40_000;
        let dens: Vec<f64> = (0..n)
            .map(|j| ((-(j as f64) * step).exp() - (-((j + 1) as f64) * step).exp()) / step)
            .collect();
        let mass: f64 = dens.iter().sum::<f64>() * step;
        let d = PaymentDistribution::from_density_grid(&[(n as f64 * step, 1.0 - mass)], 0.0, step, &dens).unwrap();
        assert!((d.expected_revenue().unwrap() - 1.0).abs() < 1e-6);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_schedule_is_exponential() {
        let s = CumulativePaymentFn::uniform(0.01, vec![1.0; 3000], vec![]).unwrap();
        let d = s.pushforward_exponential();
        for y in [0.0, 0.3, 1.0, 2.0, 10.0] {
            assert!((d.tail(y) - (-y as f64).exp()).abs() < 1e-12, "{y}");
        }
        assert!((d.expected_revenue().unwrap() - s.exponential_revenue()).abs() < 1e-12);
    }

    #[test]
    fn jump_at_zero_is_deterministic() {
        let s = CumulativePaymentFn::jumps_only(vec![(0.0, 2.5)]).unwrap();
        let d = s.pushforward_exponential();
        assert_eq!(d.atoms(), vec![Atom { value: 2.5, mass: 1.0 }]);
        assert_eq!(s.eval(0.0), 0.0);
        assert_eq!(s.eval(1e-12), 2.5);
    }

    #[test]
    fn inverse_is_sup() {
        let s = CumulativePaymentFn::uniform(0.5, vec![1.0, 0.0, 2.0], vec![(0.25, 1.0)]).unwrap();
        // T: 0→0.25 rate 1, jump 1 at 0.25, to 1.75 at 0.5, flat to 1.0, then rate 2 to 1.5
        assert!((s.eval(0.5) - 1.5).abs() < 1e-15);
        assert!((s.inverse(0.1) - 0.1).abs() < 1e-15);
        assert_eq!(s.inverse(0.6), 0.25);
        assert_eq!(s.inverse(1.5), 1.0);
        assert!((s.inverse(2.0) - 1.25).abs() < 1e-15);
        assert_eq!(s.inverse(2.5), f64::INFINITY);
    }

    #[test]
    fn lemma_decomposition_examples() {
        let w = tk(0.65);
        let s = CumulativePaymentFn::jumps_only(vec![(0.7, 2.0)]).unwrap();
        let (a, b) = s.dir_cost_two_ways(0.0, &w);
        let expect = 2.0 * w.at((-0.7f64).exp());
        assert!((a - expect).abs() < 1e-12 && (b - expect).abs() < 1e-12);

        let s = CumulativePaymentFn::uniform(0.05, vec![1.0; 100], vec![]).unwrap();
        let oracle = adaptive_simpson(&|t: f64| w.at((-t).exp()), 1e-9, 5.0, 1e-12) + 1e-9;
        let (a, b) = s.dir_cost_two_ways(0.0, &w);
        assert!((a - oracle).abs() < 1e-8, "{a} {oracle}");
        assert!((b - oracle).abs() < 1e-8, "{b} {oracle}");
    }

    #[test]
    fn dir_examples() {
        let w = tk(0.65);
        let d = PaymentDistribution::deterministic(1.0).unwrap();
        let r = d.t_dir_check(&w, 1.0, 1.0, 4);
        assert!(r.feasible);
        assert!(r.min_slack.abs() < 1e-15);
    }

    #[test]
    fn perceived_cost_of_pushforward_matches_decomposition() {
        let w = tk(0.6);
        let s = CumulativePaymentFn::uniform(0.1, vec![0.3, 0.8, 0.1, 1.5, 0.2], vec![(0.05, 0.4), (0.5, 1.0)]).unwrap();
        let d = s.pushforward_exponential();
        let c = d.perceived_cost(&w, 1.0).unwrap();
        assert!((c - s.dir_cost_decomposed(0.0, &w)).abs() < 1e-10);
        assert!((d.expected_revenue().unwrap() - s.exponential_revenue()).abs() < 1e-12);
        // atom of mass e^{-0.5} at the top
        let top = d.atoms().last().copied().unwrap();
        assert!((top.value - s.total()).abs() < 1e-12);
        assert!((top.mass - (-0.5f64).exp()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn extra_knots_do_not_change_dir(vals in proptest::collection::vec((0.0f64..5.0, 0.01f64..1.0), 1..6),
                                         extra in proptest::collection::vec(0.0f64..5.0, 0..8)) {
            let tot: f64 = vals.iter().map(|v| v.1).sum();
            let atoms: Vec<(f64, f64)> = vals.iter().map(|&(v, m)| (v, m / tot)).collect();
            let d = PaymentDistribution::from_atoms(&atoms).unwrap();
            let w = tk(0.65);
            let r1 = d.t_dir_check(&w, 1.0, 1.0, 0);
            let r2 = d.with_extra_knots(&extra).t_dir_check(&w, 1.0, 1.0, 0);
            prop_assert!((r1.min_slack - r2.min_slack).abs() < 1e-12);
        }

        #[test]
        fn tail_monotone(vals in proptest::collection::vec((0.0f64..5.0, 0.01f64..1.0), 1..6), y in 0.0f64..6.0) {
            let tot: f64 = vals.iter().map(|v| v.1).sum();
            let atoms: Vec<(f64, f64)> = vals.iter().map(|&(v, m)| (v, m / tot)).collect();
            let d = PaymentDistribution::from_atoms(&atoms).unwrap();
            prop_assert!(d.tail(y) >= d.tail(y + 0.1));
            prop_assert!((d.total_mass() - 1.0).abs() < 1e-9);
        }
    }
}
