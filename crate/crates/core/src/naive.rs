//! Optimal stationary loot box against a naive buyer and the perceived
//! payoffs of the buyer's "buy n + 1 more times" strategies.

use serde::Serialize;

use crate::cpt::{static_multiplier, CptParams};
use crate::error::{Error, Result};
use crate::numeric::{golden_max, scan_then_golden};
use crate::payment::PaymentDistribution;

pub const ENUMERATION_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NaiveSolution {
    /// Per-period delivery probability x*.
    pub x_star: f64,
    pub price_high: f64,
    /// Probability p* of the high price in each period.
    pub price_prob: f64,
    pub v_star: f64,
    pub mu_star: f64,
    pub delta: f64,
}

fn objective(params: &CptParams, x: f64) -> f64 {
    params.w_plus.at(x) / (1.0 - (1.0 - x) * params.delta)
}

pub fn optimal_loot_box(params: &CptParams) -> Result<NaiveSolution> {
    if !(params.delta < 1.0) {
        return Err(Error::Parameter("delta = 1 makes the seller's supremum infinite".into()));
    }
    if params.w_plus.is_identity() {
        return Err(Error::Degenerate("linear gain weighting: x* = 1, this is the static sale".into()));
    }
    let m = static_multiplier(&params.w_minus)?;
    let (x_star, best) = scan_then_golden(|x| objective(params, x), 0.0, 1.0, 10_000, 1e-12);
    let scale = m.mu_star * params.theta / params.lambda;
    Ok(NaiveSolution {
        x_star,
        price_high: scale * params.w_plus.at(x_star) / m.p_star,
        price_prob: m.p_star,
        v_star: scale * best,
        mu_star: m.mu_star,
        delta: params.delta,
    })
}

/// Second search for x* by golden section from several starts; used to probe
/// generic uniqueness of the maximiser.
pub fn x_star_multistart(params: &CptParams, starts: &[f64]) -> Vec<f64> {
    starts
        .iter()
        .map(|&s| {
            let half = 0.25;
            let (lo, hi) = ((s - half).max(0.0), (s + half).min(1.0));
            golden_max(|x| objective(params, x), lo, hi, 1e-12).0
        })
        .collect()
}

/// Law of the discounted total payment when buying in periods 0..=n and
/// stopping at the first success, from all 4^{n+1} joint outcomes.
pub fn sigma_payment_dist(sol: &NaiveSolution, n: usize, delta: f64) -> Result<PaymentDistribution> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::Size(format!("exact enumeration supports n <= {ENUMERATION_LIMIT}, got {n}")));
    }
    let periods = n + 1;
    let total = 1usize << (2 * periods);
    let (x, p) = (sol.x_star, sol.price_prob);
    let mut atoms = Vec::with_capacity(total);
    for code in 0..total {
        let mut prob = 1.0;
        let mut pay = 0.0;
        let mut live = true;
        let mut disc = 1.0;
        for k in 0..periods {
            let success = code >> (2 * k) & 1 == 1;
            let high = code >> (2 * k + 1) & 1 == 1;
            prob *= if success { x } else { 1.0 - x };
            prob *= if high { p } else { 1.0 - p };
            if live && high {
                pay += disc * sol.price_high;
            }
            if success {
                live = false;
            }
            disc *= delta;
        }
        atoms.push((pay, prob));
    }
    let tot: f64 = atoms.iter().map(|a| a.1).sum();
    for a in atoms.iter_mut() {
        a.1 /= tot;
    }
    PaymentDistribution::from_atoms(&atoms)
}

/// Perceived payoff at period 0 of buying n + 1 more times and then quitting.
pub fn strategy_payoff(sol: &NaiveSolution, n: usize, params: &CptParams) -> Result<f64> {
    let d = sigma_payment_dist(sol, n, params.delta)?;
    let wp = &params.w_plus;
    let x = sol.x_star;
    let mut gain = 0.0;
    let mut disc = 1.0;
    for k in 0..=n {
        let hi = 1.0 - (1.0 - x).powi(k as i32 + 1);
        let lo = 1.0 - (1.0 - x).powi(k as i32);
        gain += (wp.at(hi) - wp.at(lo)) * disc * params.theta;
        disc *= params.delta;
    }
    Ok(gain - d.perceived_cost(&params.w_minus, params.lambda)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct NaiveReport {
    pub payoffs: Vec<(usize, f64)>,
    pub sigma0_zero: bool,
    pub others_negative: bool,
    /// x* = 1: every σₙ delivers in the first period and equals σ₀.
    pub corner: bool,
    pub revenue_series: f64,
    pub revenue_gap: f64,
    pub passed: bool,
}

pub fn verify_naive_behavior(sol: &NaiveSolution, params: &CptParams, n_max: usize) -> Result<NaiveReport> {
    let payoffs: Vec<(usize, f64)> =
        (0..=n_max).map(|n| strategy_payoff(sol, n, params).map(|v| (n, v))).collect::<Result<_>>()?;
    let sigma0_zero = payoffs[0].1.abs() < 1e-9;
    let others_negative = payoffs[1..].iter().all(|p| p.1 < 0.0);
    // per-period expected payment p*·high = (μ*θ/λ)w₊(x*), survival (1−x*)^t
    let per = sol.price_prob * sol.price_high;
    let mut series = 0.0;
    let mut f = 1.0;
    while f > 1e-18 {
        series += per * f;
        f *= params.delta * (1.0 - sol.x_star);
    }
    let revenue_gap = (series - sol.v_star).abs();
    let corner = sol.x_star >= 1.0;
    Ok(NaiveReport {
        sigma0_zero,
        others_negative,
        corner,
        revenue_series: series,
        revenue_gap,
        passed: sigma0_zero && (others_negative || corner) && revenue_gap < 1e-9,
        payoffs,
    })
}
