//! Continuous-time optimal pricing process under the exponential stopping
//! time: fixed point p₁, Lagrange density g₀, threshold t₀, flow f and T*.
//!
//! Both integral equations are first-kind Volterra equations with the
//! convolution kernel K(u) = w₋(e^{−u}), K(0) = 1:
//!
//!   ∫₀ᵗ K(t−s) dG(s) = e^{−t} − K(t)        G = ∫g₀, on [0, t₁]
//!   ∫₀ᵘ K(u−v) dΦ(v) = 1 − K(u)             Φ(u) = ∫_{t₀−u}^{t₀} f, on [0, t₀]
//!
//! For reverse-S weighting K′(0) = −∞ and g₀, f blow up like t^{γ−1} at the
//! singular end, so the densities are solved as cell averages by product
//! integration on a mesh graded toward that end.

use rayon::prelude::*;
use serde::Serialize;

use crate::classes::{self, Granularity};
use crate::cpt::CptParams;
use crate::error::{Error, Result};
use crate::numeric::{bisect, gauss8, graded16, near_singular_cell};
use crate::payment::{CumulativePaymentFn, PaymentDistribution};
use crate::weighting::WeightingFn;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverOptions {
    /// Cell width of the uniform part of the time mesh.
    pub grid_step: f64,
    /// Number of graded cells next to the singular end.
    pub graded_cells: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { grid_step: 1e-3, graded_cells: 400 }
    }
}

impl SolverOptions {
    pub fn with_step(grid_step: f64) -> Self {
        SolverOptions { grid_step, ..Default::default() }
    }
}

/// Mesh on [0, L]: `graded` cells with nodes a·(j/m)^r, then uniform cells.
#[derive(Debug, Clone, Serialize)]
pub struct Mesh {
    pub nodes: Vec<f64>,
    pub graded: usize,
    pub step: f64,
}

impl Mesh {
    pub fn new(length: f64, step: f64, grading: f64, graded: usize) -> Result<Self> {
        if !(length > 0.0) || !(step > 0.0) {
            return Err(Error::Parameter(format!("mesh length {length} and step {step} must be positive")));
        }
        let (mut m, mut a) = (graded, graded as f64 * step / grading);
        if grading <= 1.0 || graded == 0 {
            m = 0;
            a = 0.0;
        } else if a > 0.5 * length {
            a = 0.5 * length;
        }
        let mut nodes = Vec::with_capacity(m + 1 + ((length - a) / step) as usize + 2);
        nodes.push(0.0);
        for j in 1..=m {
            nodes.push(a * (j as f64 / m as f64).powf(grading));
        }
        let nu = ((length - a) / step).ceil().max(1.0) as usize;
        let h = (length - a) / nu as f64;
        for k in 1..=nu {
            nodes.push(if k == nu { length } else { a + k as f64 * h });
        }
        Ok(Mesh { nodes, graded: m, step: h })
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

fn grading_for(w: &WeightingFn) -> f64 {
    match w.endpoint_exponent() {
        Some(g) => 2.0 / g,
        None => 1.0,
    }
}

/// Cell slopes y_j of the piecewise-linear cumulative Y solving
/// Σ_{j≤i} y_j ∫_{cell j} K(t_i − s) ds = rhs(t_i), i = 1..n.
fn solve_cumulative<K, R>(kernel: K, mesh: &Mesh, rhs: R) -> Vec<f64>
where
    K: Fn(f64) -> f64 + Sync,
    R: Fn(f64) -> f64,
{
    let t = &mesh.nodes;
    let n = mesh.cells();
    let m = mesh.graded;
    let h = mesh.step;
    // Toeplitz weights for the uniform block: U[k] = ∫_{kh}^{(k+1)h} K
    let nu = n - m;
    let u: Vec<f64> = (0..nu).into_par_iter().map(|k| near_singular_cell(&kernel, k as f64 * h, h)).collect();
    // graded columns: W[j][i] for cell j (1..=m), row i ≥ j
    let wg: Vec<Vec<f64>> = (1..=m)
        .into_par_iter()
        .map(|j| {
            let len = t[j] - t[j - 1];
            (j..=n).map(|i| near_singular_cell(&kernel, t[i] - t[j], len)).collect()
        })
        .collect();
    let mut y = vec![0.0; n + 1];
    for i in 1..=n {
        let mut acc = 0.0;
        for j in 1..=m.min(i) {
            if j == i {
                break;
            }
            acc += y[j] * wg[j - 1][i - j];
        }
        if i > m {
            for j in (m + 1)..i {
                acc += y[j] * u[i - j];
            }
        }
        let diag = if i <= m { wg[i - 1][0] } else { u[0] };
        y[i] = (rhs(t[i]) - acc) / diag;
    }
    y.remove(0);
    y
}

/// A density stored as averages over the cells of a mesh.
#[derive(Debug, Clone, Serialize)]
pub struct CellFunction {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl CellFunction {
    pub fn at(&self, t: f64) -> f64 {
        let n = self.values.len();
        let i = self.knots.partition_point(|k| *k <= t).clamp(1, n);
        self.values[i - 1]
    }

    /// ∫₀ˣ of the piecewise-constant density.
    pub fn integral_to(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            let (a, b) = (self.knots[j], self.knots[j + 1]);
            if x <= a {
                break;
            }
            s += v * (b.min(x) - a);
        }
        s
    }

    pub fn midpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(j, v)| (0.5 * (self.knots[j] + self.knots[j + 1]), *v))
    }
}

/// Unique interior p with w(p) = p; w(p) > p below and w(p) < p above.
pub fn fixed_point_p1(w: &WeightingFn) -> Result<f64> {
    if w.is_identity() {
        return Err(Error::Degenerate("identity weighting has no isolated interior fixed point".into()));
    }
    let g = |p: f64| w.at(p) - p;
    let n = 1000;
    let mut bracket = None;
    for i in 1..n - 1 {
        let (a, b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
        if g(a) > 0.0 && g(b) <= 0.0 {
            bracket = Some((a, b));
            break;
        }
    }
    let (a, b) = bracket.ok_or_else(|| Error::Degenerate("no sign change of w(p) - p on (0, 1)".into()))?;
    let p1 = bisect(g, a, b, 1e-14);
    let eps = 1e-3;
    for i in 1..n {
        let p = p1 + eps + (1.0 - 2.0 * eps - p1) * i as f64 / n as f64;
        if p < 1.0 - eps && g(p) >= 0.0 {
            return Err(Error::Degenerate(format!("w(p) >= p at p={p} above the fixed point {p1}")));
        }
    }
    Ok(p1)
}

/// g₀ on [0, t₁] as cell averages.
pub fn solve_lagrange_density(w: &WeightingFn, opts: &SolverOptions) -> Result<CellFunction> {
    let p1 = fixed_point_p1(w)?;
    let t1 = -p1.ln();
    if opts.grid_step > 1e-3 * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!("grid step {} exceeds 1e-3", opts.grid_step)));
    }
    let mesh = Mesh::new(t1, opts.grid_step, grading_for(w), opts.graded_cells)?;
    let kernel = |u: f64| w.at_exp_neg(u);
    let y = solve_cumulative(kernel, &mesh, |t| (-t).exp() - w.at_exp_neg(t));
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Convergence("non-finite Lagrange density".into()));
    }
    Ok(CellFunction { knots: mesh.nodes, values: y })
}

/// First crossing of g₀ below zero, interpolated between cell midpoints.
pub fn find_t0(g0: &CellFunction) -> Result<f64> {
    let mids: Vec<(f64, f64)> = g0.midpoints().collect();
    if mids.first().is_none_or(|m| m.1 <= 0.0) {
        return Err(Error::Logic("g0 is not positive at the start".into()));
    }
    for k in 1..mids.len() {
        let (c0, y0) = mids[k - 1];
        let (c1, y1) = mids[k];
        if y1 <= 0.0 {
            return Ok(c0 + (c1 - c0) * y0 / (y0 - y1));
        }
    }
    Err(Error::Logic("g0 never crosses zero on [0, t1]".into()))
}

/// f on [0, t₀] as cell averages (time running forward).
pub fn solve_flow(w: &WeightingFn, t0: f64, opts: &SolverOptions) -> Result<CellFunction> {
    let mesh = Mesh::new(t0, opts.grid_step, grading_for(w), opts.graded_cells)?;
    let kernel = |u: f64| w.at_exp_neg(u);
    let phi = solve_cumulative(kernel, &mesh, |u| 1.0 - w.at_exp_neg(u));
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Convergence("non-finite flow".into()));
    }
    let n = mesh.cells();
    let mut knots: Vec<f64> = mesh.nodes.iter().rev().map(|u| t0 - u).collect();
    knots[0] = 0.0;
    knots[n] = t0;
    let values: Vec<f64> = phi.into_iter().rev().collect();
    Ok(CellFunction { knots, values })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentialSolution {
    pub p1: f64,
    pub t1: f64,
    pub t0: f64,
    /// Dual value V₀ = (θ/λ)(1 + ∫₀^{t₀} g₀).
    pub revenue: f64,
    /// Σ Tᵢe^{−tᵢ} + ∫ e^{−t} f, from the schedule.
    pub primal_revenue: f64,
    pub grid_step: f64,
    pub full_price: f64,
    pub g0: CellFunction,
    /// Unscaled flow; T* pays (θ/λ)·f.
    pub f: CellFunction,
    #[serde(skip)]
    pub schedule: CumulativePaymentFn,
}

pub fn optimal_schedule(params: &CptParams, opts: &SolverOptions) -> Result<ExponentialSolution> {
    let w = &params.w_minus;
    let p1 = fixed_point_p1(w)?;
    let g0 = solve_lagrange_density(w, opts)?;
    let t0 = find_t0(&g0)?;
    let f = solve_flow(w, t0, opts)?;
    let full = params.full_price();
    let schedule = CumulativePaymentFn::on_grid(
        f.knots.clone(),
        f.values.iter().map(|v| v * full).collect(),
        vec![(t0, full)],
    )?;
    Ok(ExponentialSolution {
        p1,
        t1: -p1.ln(),
        t0,
        revenue: full * (1.0 + g0.integral_to(t0)),
        primal_revenue: schedule.exponential_revenue(),
        grid_step: opts.grid_step,
        full_price: full,
        g0,
        f,
        schedule,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    pub max_binding_residual: f64,
    pub max_tail_slack: f64,
    pub duality_gap: f64,
    pub class_revenues: Vec<(String, f64)>,
    pub dominates_classes: bool,
    pub max_perturbation_gain: f64,
    pub passed: bool,
}

impl ExponentialSolution {
    pub fn pushforward(&self) -> PaymentDistribution {
        self.schedule.pushforward_exponential()
    }

    /// Binding-DIR residual cost(s) − θ/λ, from the decomposed form, at every
    /// knot of f and at every cell midpoint.
    pub fn binding_residuals(&self, w: &WeightingFn) -> Vec<(f64, f64)> {
        let mut pts: Vec<f64> = self.f.knots.clone();
        pts.extend(self.f.midpoints().map(|m| m.0));
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.par_iter()
            .map(|&s| (s, self.schedule.dir_cost_decomposed(s, w) - self.full_price))
            .collect()
    }

    /// Residual of e^{−t} − w(e^{−t}) − ∫₀ᵗ w(e^{−t+s}) g₀(s) ds at every
    /// `stride`-th node, with an independent quadrature.
    pub fn lagrange_residuals(&self, w: &WeightingFn, stride: usize) -> Vec<(f64, f64)> {
        let k = &self.g0.knots;
        let idx: Vec<usize> = (1..k.len()).step_by(stride.max(1)).collect();
        idx.par_iter()
            .map(|&i| {
                let t = k[i];
                let mut s = 0.0;
                for j in 0..i {
                    let (a, b) = (k[j], k[j + 1]);
                    let rule = if t - b < 2.0 * (b - a) { graded16() } else { gauss8() };
                    s += self.g0.values[j] * rule.integrate(|x| w.at_exp_neg(t - x), a, b);
                }
                (t, (-t).exp() - w.at_exp_neg(t) - s)
            })
            .collect()
    }

    pub fn verify_optimality(&self, params: &CptParams, seed: u64) -> Result<OptimalityReport> {
        use rand::{Rng, SeedableRng};
        let w = &params.w_minus;
        let full = self.full_price;
        let max_binding_residual = self.binding_residuals(w).iter().map(|r| r.1.abs()).fold(0.0, f64::max);

        let dist = self.pushforward();
        let top = self.schedule.eval(self.t0);
        let rep = dist.t_dir_check(w, params.lambda, params.theta, 1);
        let max_tail_slack = rep
            .residuals
            .iter()
            .filter(|r| r.s <= top * (1.0 - 1e-12))
            .map(|r| r.slack.abs())
            .fold(0.0, f64::max);

        let duality_gap = (self.primal_revenue - self.revenue).abs();

        let class_revenues = vec![
            ("independent".to_string(), classes::optimize_stationary(params, &Granularity::FineLimit)?.revenue),
            ("hard_pity".to_string(), classes::optimize_hard_pity(params, &Granularity::FineLimit)?.revenue),
            ("modified".to_string(), classes::optimize_modified(params, &Granularity::FineLimit)?.revenue),
            ("deterministic".to_string(), full),
        ];
        let dominates_classes = class_revenues.iter().all(|c| self.revenue > c.1);

        // bumps of ±1e-3 on random subintervals, then rescale to feasibility
        let knots = &self.f.knots;
        let costs: Vec<f64> = knots.par_iter().map(|&s| self.schedule.dir_cost_decomposed(s, w)).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut max_gain = f64::NEG_INFINITY;
        for trial in 0..20 {
            let a = rng.gen_range(0.0..self.t0);
            let b = rng.gen_range(a..self.t0);
            let eps = if trial % 2 == 0 { 1e-3 } else { -1e-3 } * full;
            let worst = knots
                .iter()
                .zip(&costs)
                .map(|(&s, &c)| {
                    let lo = a.max(s);
                    let bump = if b <= lo {
                        0.0
                    } else if lo - s < 2.0 * (b - lo) {
                        graded16().integrate(|t| w.at_exp_neg(t - s), lo, b)
                    } else {
                        gauss8().integrate(|t| w.at_exp_neg(t - s), lo, b)
                    };
                    c + eps * bump
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let scale = full / worst;
            let rev = scale * (self.primal_revenue + eps * ((-a).exp() - (-b).exp()));
            max_gain = max_gain.max(rev - self.primal_revenue);
        }

        let passed = max_tail_slack < 1e-6 && duality_gap < 1e-5 && dominates_classes && max_gain <= 1e-6;
        Ok(OptimalityReport {
            max_binding_residual,
            max_tail_slack,
            duality_gap,
            class_revenues,
            dominates_classes,
            max_perturbation_gain: max_gain,
            passed,
        })
    }
}
