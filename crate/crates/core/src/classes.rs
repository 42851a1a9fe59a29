//! Loot-box mechanism classes: stationary boxes, hard pity and the pity
//! system that ends in a full-price sale; payment laws, per-purchase DIR and
//! within-class optimisation.

use rayon::prelude::*;
use serde::Serialize;

use crate::cpt::CptParams;
use crate::error::{Error, Result};
use crate::exponential::{optimal_schedule, SolverOptions};
use crate::numeric::{gauss16, golden_max, near_singular_cell, scan_then_golden};
use crate::payment::{CumulativePaymentFn, DirReport, DirResidual, PaymentDistribution};
use crate::weighting::WeightingFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKind {
    Stationary,
    HardPity,
    Modified,
}

impl ClassKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClassKind::Stationary => "independent",
            ClassKind::HardPity => "hard_pity",
            ClassKind::Modified => "modified",
        }
    }
}

/// A discrete loot-box mechanism: box price c, success probability q and,
/// for the pity variants, the cap N after which the good is granted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MechanismClassSpec {
    Stationary { c: f64, q: f64 },
    HardPity { c: f64, q: f64, n: usize },
    /// After N failures the good is sold at the full price θ/λ.
    Modified { c: f64, q: f64, n: usize },
}

impl MechanismClassSpec {
    pub fn validate(&self) -> Result<()> {
        let (c, q, n) = match *self {
            MechanismClassSpec::Stationary { c, q } => (c, q, 1),
            MechanismClassSpec::HardPity { c, q, n } | MechanismClassSpec::Modified { c, q, n } => (c, q, n),
        };
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!("box price must be positive, got {c}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Parameter(format!("success probability must lie in (0, 1), got {q}")));
        }
        if n == 0 {
            return Err(Error::Parameter("pity cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn kind(&self) -> ClassKind {
        match self {
            MechanismClassSpec::Stationary { .. } => ClassKind::Stationary,
            MechanismClassSpec::HardPity { .. } => ClassKind::HardPity,
            MechanismClassSpec::Modified { .. } => ClassKind::Modified,
        }
    }

    pub fn price(&self) -> f64 {
        match *self {
            MechanismClassSpec::Stationary { c, .. }
            | MechanismClassSpec::HardPity { c, .. }
            | MechanismClassSpec::Modified { c, .. } => c,
        }
    }

    pub fn success(&self) -> f64 {
        match *self {
            MechanismClassSpec::Stationary { q, .. }
            | MechanismClassSpec::HardPity { q, .. }
            | MechanismClassSpec::Modified { q, .. } => q,
        }
    }
}

/// Where the class optimisers search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Granularity {
    /// Limit of vanishing box price and success probability: a constant
    /// payment flow under an exponential stopping time. Used for the tables.
    FineLimit,
    /// Discrete boxes with q in [q_min, q_max] and pity cap at most n_max.
    Discrete { q_min: f64, q_max: f64, n_max: usize },
}

impl Granularity {
    pub fn discrete_default() -> Self {
        Granularity::Discrete { q_min: 1e-3, q_max: 0.999, n_max: 512 }
    }
}

/// Fine-limit realisation: pay `rate` per unit time until the good arrives or
/// until `horizon`; under Modified a lump θ/λ is due at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowClass {
    pub kind: ClassKind,
    pub rate: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Realisation {
    Discrete(MechanismClassSpec),
    Flow(FlowClass),
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassOptimum {
    pub kind: ClassKind,
    pub revenue: f64,
    pub realisation: Realisation,
}

/// Payment law of a discrete class; the buyer pays for every box opened,
/// the successful one included.
pub fn class_payment_dist(spec: &MechanismClassSpec, params: &CptParams) -> Result<PaymentDistribution> {
    spec.validate()?;
    let c = spec.price();
    let q = spec.success();
    let p = 1.0 - q;
    let mut atoms = Vec::new();
    match *spec {
        MechanismClassSpec::Stationary { .. } => {
            let mut k = 1;
            let mut tail = 1.0;
            loop {
                let m = q * tail;
                tail *= p;
                if tail < 1e-12 {
                    atoms.push((k as f64 * c, m + tail));
                    break;
                }
                atoms.push((k as f64 * c, m));
                k += 1;
            }
        }
        MechanismClassSpec::HardPity { n, .. } | MechanismClassSpec::Modified { n, .. } => {
            let mut tail = 1.0;
            for k in 1..=n {
                atoms.push((k as f64 * c, q * tail));
                tail *= p;
            }
            let last = if spec.kind() == ClassKind::Modified { n as f64 * c + params.full_price() } else { n as f64 * c };
            atoms.push((last, tail));
        }
    }
    PaymentDistribution::from_atoms(&atoms)
}

/// DIR before each box: T-DIR at s = k·c for every purchase count k. The
/// stationary class is memoryless, so its slack is the exact series value
/// reported at up to 200 evenly spaced k.
pub fn class_dir_feasible(spec: &MechanismClassSpec, params: &CptParams) -> Result<DirReport> {
    let c = spec.price();
    if let MechanismClassSpec::Stationary { q, .. } = *spec {
        spec.validate()?;
        let slack = params.theta - params.lambda * c * stationary_series(&params.w_minus, q);
        let kmax = ((1e-9f64).ln() / (1.0 - q).ln()).floor().max(1.0) as usize;
        let stride = kmax.div_ceil(200).max(1);
        let residuals = (0..kmax).step_by(stride).map(|k| DirResidual { s: k as f64 * c, slack }).collect();
        return Ok(DirReport::from_residuals(residuals));
    }
    let d = class_payment_dist(spec, params)?;
    let points: Vec<f64> = match *spec {
        MechanismClassSpec::HardPity { n, .. } => (0..n).map(|k| k as f64 * c).collect(),
        MechanismClassSpec::Modified { n, .. } => (0..=n).map(|k| k as f64 * c).collect(),
        MechanismClassSpec::Stationary { .. } => unreachable!(),
    };
    Ok(d.t_dir_check_at(&points, &params.w_minus, params.lambda, params.theta))
}

/// Σ_{k≥0} w((1−q)^k), stopped once the geometric bound on the rest is
/// below 1e-13.
pub fn stationary_series(w: &WeightingFn, q: f64) -> f64 {
    let lp = (1.0 - q).ln();
    let g = w.endpoint_exponent().unwrap_or(1.0);
    let ratio = (g * lp).exp();
    let mut s = 0.0;
    let mut k = 0u64;
    loop {
        let term = w.at_exp_neg(-(k as f64) * lp);
        s += term;
        k += 1;
        if term * ratio / (1.0 - ratio) < 1e-13 || k > 50_000_000 {
            break;
        }
    }
    s
}

/// KI(x) = ∫₀ˣ w(e^{−u}) du, tabulated on a fixed step with exact partial cells.
pub struct KernelIntegral<'a> {
    w: &'a WeightingFn,
    step: f64,
    cum: Vec<f64>,
    infinite: f64,
}

impl<'a> KernelIntegral<'a> {
    pub fn new(w: &'a WeightingFn) -> Self {
        let step = 1e-3;
        let n = 10_000;
        let cells: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| near_singular_cell(|u| w.at_exp_neg(u), k as f64 * step, step))
            .collect();
        let mut cum = vec![0.0; n + 1];
        for k in 0..n {
            cum[k + 1] = cum[k] + cells[k];
        }
        let g = w.endpoint_exponent().unwrap_or(1.0);
        let end = n as f64 * step;
        let far = end + 60.0 / g;
        let mut tail = 0.0;
        let mut a = end;
        while a < far {
            tail += gauss16().integrate(|u| w.at_exp_neg(u), a, a + 1.0);
            a += 1.0;
        }
        KernelIntegral { w, step, infinite: cum[n] + tail, cum }
    }

    pub fn at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let n = self.cum.len() - 1;
        let k = ((x / self.step).floor() as usize).min(n);
        let a = k as f64 * self.step;
        let base = self.cum[k];
        if x - a <= 0.0 {
            return base;
        }
        if k == n {
            return base + crate::numeric::integrate_singular(|u| self.w.at_exp_neg(u), a, x);
        }
        base + near_singular_cell(|u| self.w.at_exp_neg(u), a, x - a)
    }

    pub fn infinite(&self) -> f64 {
        self.infinite
    }
}

fn fine_stationary(params: &CptParams, ki: &KernelIntegral) -> ClassOptimum {
    let rate = params.full_price() / ki.infinite();
    ClassOptimum {
        kind: ClassKind::Stationary,
        revenue: rate,
        realisation: Realisation::Flow(FlowClass { kind: ClassKind::Stationary, rate, horizon: f64::INFINITY }),
    }
}

fn fine_hard_pity(params: &CptParams, ki: &KernelIntegral) -> ClassOptimum {
    let rev = |l: f64| (1.0 - (-l).exp()) / ki.at(l);
    let (l, r) = scan_then_golden(rev, 1e-3, 8.0, 400, 1e-9);
    let full = params.full_price();
    ClassOptimum {
        kind: ClassKind::HardPity,
        revenue: full * r,
        realisation: Realisation::Flow(FlowClass { kind: ClassKind::HardPity, rate: full / ki.at(l), horizon: l }),
    }
}

/// Largest flow rate (per unit θ/λ) with DIR at every remaining horizon m ≤ L:
/// min over m of (1 − K(m)) / KI(m).
fn modified_rate(w: &WeightingFn, ki: &KernelIntegral, l: f64) -> f64 {
    let h = |m: f64| -(1.0 - w.at_exp_neg(m)) / ki.at(m);
    let (_, v) = scan_then_golden(h, l * 1e-3, l, 60, 1e-10 * l.max(1.0));
    -v
}

fn fine_modified(params: &CptParams, ki: &KernelIntegral) -> ClassOptimum {
    let w = &params.w_minus;
    let rev = |l: f64| {
        let c = modified_rate(w, ki, l);
        c * (1.0 - (-l).exp()) + (-l).exp()
    };
    let (l, r) = scan_then_golden(rev, 1e-3, 8.0, 200, 1e-9);
    let full = params.full_price();
    ClassOptimum {
        kind: ClassKind::Modified,
        revenue: full * r,
        realisation: Realisation::Flow(FlowClass { kind: ClassKind::Modified, rate: full * modified_rate(w, ki, l), horizon: l }),
    }
}

/// Discrete stationary revenue at q with c binding DIR; (c, revenue).
fn stationary_at(params: &CptParams, q: f64) -> (f64, f64) {
    let c = params.full_price() / stationary_series(&params.w_minus, q);
    (c, c / q)
}

/// Best pity cap for a given q; returns (n, c, revenue).
fn pity_at(params: &CptParams, q: f64, n_max: usize, modified: bool) -> (usize, f64, f64) {
    let w = &params.w_minus;
    let p = 1.0 - q;
    let full = params.full_price();
    let mut best = (1, 0.0, f64::NEG_INFINITY);
    let mut sum = 0.0; // Σ_{j<m} w(p^j)
    let mut min_ratio = f64::INFINITY;
    let mut pm = 1.0;
    for m in 1..=n_max {
        sum += w.at(pm);
        pm *= p;
        let c = if modified {
            min_ratio = min_ratio.min((1.0 - w.at(pm)) / sum);
            full * min_ratio
        } else {
            full / sum
        };
        let rev = c * (1.0 - pm) / q + if modified { full * pm } else { 0.0 };
        if rev > best.2 {
            best = (m, c, rev);
        }
    }
    best
}

fn q_grid(q_min: f64, q_max: f64, n: usize) -> Vec<f64> {
    let (a, b) = (q_min.ln(), q_max.ln());
    (0..=n).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).collect()
}

fn check_range(q_min: f64, q_max: f64, n_max: usize) -> Result<()> {
    if !(q_min > 0.0 && q_min < q_max && q_max < 1.0) || n_max == 0 {
        return Err(Error::Parameter(format!("invalid search range q in [{q_min}, {q_max}], n_max {n_max}")));
    }
    Ok(())
}

pub fn optimize_stationary(params: &CptParams, gran: &Granularity) -> Result<ClassOptimum> {
    match *gran {
        Granularity::FineLimit => Ok(fine_stationary(params, &KernelIntegral::new(&params.w_minus))),
        Granularity::Discrete { q_min, q_max, n_max } => {
            check_range(q_min, q_max, n_max)?;
            let grid = q_grid(q_min, q_max, 80);
            let revs: Vec<f64> = grid.par_iter().map(|&q| stationary_at(params, q).1).collect();
            let i = argmax(&revs);
            let (lo, hi) = (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]);
            let (q, _) = golden_max(|q| stationary_at(params, q).1, lo, hi, 1e-6);
            let (q, (c, rev)) = if stationary_at(params, q).1 >= revs[i] { (q, stationary_at(params, q)) } else { (grid[i], stationary_at(params, grid[i])) };
            Ok(ClassOptimum {
                kind: ClassKind::Stationary,
                revenue: rev,
                realisation: Realisation::Discrete(MechanismClassSpec::Stationary { c, q }),
            })
        }
    }
}

fn optimize_pity(params: &CptParams, gran: &Granularity, modified: bool) -> Result<ClassOptimum> {
    let kind = if modified { ClassKind::Modified } else { ClassKind::HardPity };
    match *gran {
        Granularity::FineLimit => {
            let ki = KernelIntegral::new(&params.w_minus);
            Ok(if modified { fine_modified(params, &ki) } else { fine_hard_pity(params, &ki) })
        }
        Granularity::Discrete { q_min, q_max, n_max } => {
            check_range(q_min, q_max, n_max)?;
            let grid = q_grid(q_min, q_max, 80);
            let revs: Vec<(usize, f64, f64)> = grid.par_iter().map(|&q| pity_at(params, q, n_max, modified)).collect();
            let i = argmax(&revs.iter().map(|r| r.2).collect::<Vec<_>>());
            let (lo, hi) = (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]);
            let (q, _) = golden_max(|q| pity_at(params, q, n_max, modified).2, lo, hi, 1e-6);
            let at = pity_at(params, q, n_max, modified);
            let (q, (n, c, rev)) = if at.2 >= revs[i].2 { (q, at) } else { (grid[i], revs[i]) };
            let spec = if modified {
                MechanismClassSpec::Modified { c, q, n }
            } else {
                MechanismClassSpec::HardPity { c, q, n }
            };
            Ok(ClassOptimum { kind, revenue: rev, realisation: Realisation::Discrete(spec) })
        }
    }
}

pub fn optimize_hard_pity(params: &CptParams, gran: &Granularity) -> Result<ClassOptimum> {
    optimize_pity(params, gran, false)
}

pub fn optimize_modified(params: &CptParams, gran: &Granularity) -> Result<ClassOptimum> {
    optimize_pity(params, gran, true)
}

pub fn optimize(kind: ClassKind, params: &CptParams, gran: &Granularity) -> Result<ClassOptimum> {
    match kind {
        ClassKind::Stationary => optimize_stationary(params, gran),
        ClassKind::HardPity => optimize_hard_pity(params, gran),
        ClassKind::Modified => optimize_modified(params, gran),
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

impl FlowClass {
    /// Payment schedule in time; the stationary flow is cut where
    /// e^{−t} < 1e-13.
    pub fn schedule(&self, params: &CptParams) -> Result<CumulativePaymentFn> {
        let end = if self.horizon.is_finite() { self.horizon } else { 30.0 };
        let jumps = if self.kind == ClassKind::Modified { vec![(end, params.full_price())] } else { vec![] };
        CumulativePaymentFn::on_grid(vec![0.0, end], vec![self.rate], jumps)
    }
}

impl ClassOptimum {
    pub fn payment_dist(&self, params: &CptParams) -> Result<PaymentDistribution> {
        match &self.realisation {
            Realisation::Discrete(spec) => class_payment_dist(spec, params),
            Realisation::Flow(f) => Ok(f.schedule(params)?.pushforward_exponential()),
        }
    }

    pub fn dir_report(&self, params: &CptParams) -> Result<DirReport> {
        match &self.realisation {
            Realisation::Discrete(spec) => class_dir_feasible(spec, params),
            Realisation::Flow(f) if f.kind == ClassKind::Stationary => {
                let slack = params.theta - params.lambda * f.rate * KernelIntegral::new(&params.w_minus).infinite();
                let residuals = (0..100).map(|i| DirResidual { s: f.rate * 0.3 * i as f64, slack }).collect();
                Ok(DirReport::from_residuals(residuals))
            }
            Realisation::Flow(f) => {
                let d = self.payment_dist(params)?;
                let top = f.rate * if f.horizon.is_finite() { f.horizon } else { 30.0 };
                let pts: Vec<f64> = (0..100).map(|i| top * i as f64 / 100.0).collect();
                Ok(d.t_dir_check_at(&pts, &params.w_minus, params.lambda, params.theta))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub gammas: Vec<f64>,
    /// (class name, revenue per γ); rows independent, hard_pity, modified, optimal.
    pub rows: Vec<(String, Vec<f64>)>,
}

impl Table {
    pub fn row(&self, name: &str) -> Option<&[f64]> {
        self.rows.iter().find(|r| r.0 == name).map(|r| r.1.as_slice())
    }

    /// The named rows, in the order given.
    pub fn select(&self, names: &[&str]) -> Option<Table> {
        let rows = names
            .iter()
            .map(|n| self.row(n).map(|r| (n.to_string(), r.to_vec())))
            .collect::<Option<Vec<_>>>()?;
        Some(Table { gammas: self.gammas.clone(), rows })
    }

    /// CSV with class rows and γ columns, 4 decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class");
        for g in &self.gammas {
            s.push_str(&format!(",{g:.2}"));
        }
        s.push('\n');
        for (name, vals) in &self.rows {
            s.push_str(name);
            for v in vals {
                s.push_str(&format!(",{v:.4}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Revenue of each class and of the optimal process for every γ (applied to
/// both accounts); the remaining parameters come from `template`.
pub fn table_sweep(gammas: &[f64], template: &CptParams, gran: &Granularity, opts: &SolverOptions) -> Result<Table> {
    if gammas.is_empty() {
        return Err(Error::Parameter("empty gamma list".into()));
    }
    let cols: Vec<Result<[f64; 4]>> = gammas
        .par_iter()
        .map(|&g| {
            let p = CptParams::new(
                WeightingFn::tversky_kahneman(g)?,
                WeightingFn::tversky_kahneman(g)?,
                template.lambda,
                template.theta,
                template.delta,
            )?;
            Ok([
                optimize_stationary(&p, gran)?.revenue,
                optimize_hard_pity(&p, gran)?.revenue,
                optimize_modified(&p, gran)?.revenue,
                optimal_schedule(&p, opts)?.revenue,
            ])
        })
        .collect();
    let cols: Vec<[f64; 4]> = cols.into_iter().collect::<Result<_>>()?;
    let names = ["independent", "hard_pity", "modified", "optimal"];
    let rows = names
        .iter()
        .enumerate()
        .map(|(r, n)| (n.to_string(), cols.iter().map(|c| c[r]).collect()))
        .collect();
    Ok(Table { gammas: gammas.to_vec(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(g: f64) -> CptParams {
        CptParams::tk(g, g, 1.0, 1.0, 0.9).unwrap()
    }

    #[test]
    fn payment_laws() {
        let p = params(0.65);
        let d = class_payment_dist(&MechanismClassSpec::Stationary { c: 1.0, q: 0.5 }, &p).unwrap();
        assert!((d.expected_revenue().unwrap() - 2.0).abs() < 1e-10);
        for k in 0..10 {
            assert!((d.tail(k as f64) - 0.5f64.powi(k)).abs() < 1e-12);
        }
        let d = class_payment_dist(&MechanismClassSpec::HardPity { c: 1.0, q: 1e-12, n: 3 }, &p).unwrap();
        assert!((d.expected_revenue().unwrap() - 3.0).abs() < 1e-9);
        let d = class_payment_dist(&MechanismClassSpec::Modified { c: 1.0, q: 1e-12, n: 3 }, &p).unwrap();
        assert!((d.expected_revenue().unwrap() - 4.0).abs() < 1e-9);
        assert!(class_payment_dist(&MechanismClassSpec::HardPity { c: 1.0, q: 0.5, n: 0 }, &p).is_err());
    }

    #[test]
    fn stationary_slack_is_constant() {
        let p = params(0.65);
        let r = class_dir_feasible(&MechanismClassSpec::Stationary { c: 0.3, q: 0.5 }, &p).unwrap();
        let s0 = r.residuals[0].slack;
        assert!(r.residuals.iter().take(20).all(|x| (x.slack - s0).abs() < 1e-9));
    }

    #[test]
    fn modified_last_step_binds() {
        let p = params(0.65);
        let spec = MechanismClassSpec::Modified { c: 0.05, q: 0.1, n: 5 };
        let r = class_dir_feasible(&spec, &p).unwrap();
        let last = r.residuals.last().unwrap();
        assert!((last.s - 0.25).abs() < 1e-12);
        assert!(last.slack.abs() < 1e-15);
    }

    #[test]
    fn series_converges() {
        let w = WeightingFn::tversky_kahneman(0.5).unwrap();
        let q = 0.05;
        let s = stationary_series(&w, q);
        let brute: f64 = (0..200_000).map(|k| w.at((1.0 - q).powi(k))).sum();
        assert!((s - brute).abs() < 1e-10, "{s} {brute}");
    }

    #[test]
    fn discrete_optima_bind_and_resist_perturbation() {
        let p = params(0.65);
        let gran = Granularity::discrete_default();
        for kind in [ClassKind::HardPity, ClassKind::Modified] {
            let o = optimize(kind, &p, &gran).unwrap();
            let Realisation::Discrete(spec) = o.realisation else { panic!() };
            let r = class_dir_feasible(&spec, &p).unwrap();
            assert!(r.min_slack >= -1e-7 && r.min_slack <= 1e-4, "{kind:?} {}", r.min_slack);
            let d = class_payment_dist(&spec, &p).unwrap();
            assert!((d.expected_revenue().unwrap() - o.revenue).abs() < 1e-9);
            let q = spec.success();
            let Granularity::Discrete { n_max, .. } = gran else { unreachable!() };
            for f in [0.99, 1.01] {
                let alt = pity_at(&p, q * f, n_max, kind == ClassKind::Modified).2;
                assert!(alt <= o.revenue + 1e-4);
            }
        }
    }

    #[test]
    fn fine_limit_bounds_discrete() {
        let p = params(0.65);
        let fine = optimize_hard_pity(&p, &Granularity::FineLimit).unwrap();
        let disc = optimize_hard_pity(&p, &Granularity::discrete_default()).unwrap();
        assert!(disc.revenue <= fine.revenue + 1e-6);
        assert!(fine.revenue - disc.revenue < 5e-3);
    }

    #[test]
    fn flow_classes_bind_at_start() {
        let p = params(0.65);
        for kind in [ClassKind::Stationary, ClassKind::HardPity, ClassKind::Modified] {
            let o = optimize(kind, &p, &Granularity::FineLimit).unwrap();
            let r = o.dir_report(&p).unwrap();
            assert!(r.min_slack > -1e-7 && r.min_slack < 1e-6, "{kind:?} {}", r.min_slack);
            let d = o.payment_dist(&p).unwrap();
            assert!((d.expected_revenue().unwrap() - o.revenue).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_stationary_tends_to_full_price() {
        let p = CptParams::new(WeightingFn::identity(), WeightingFn::identity(), 1.0, 1.0, 0.5).unwrap();
        let (_, r) = stationary_at(&p, 0.999);
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let t = Table { gammas: vec![0.5], rows: vec![("optimal".into(), vec![1.57691])] };
        assert_eq!(t.to_csv(), "class,0.50\noptimal,1.5769\n");
    }
}
