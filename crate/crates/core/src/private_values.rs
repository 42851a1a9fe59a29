//! Private buyer values: monopoly cutoff, the posted random price and the
//! binary-price improvement of an arbitrary mechanism.

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::cpt::{cpt_value, static_multiplier, CptParams, Menu};
use crate::error::{Error, Result};
use crate::numeric::golden_max;
use crate::payment::PaymentDistribution;

/// Prior over θ stored on a uniform grid.
#[derive(Debug, Clone)]
pub struct TypePrior {
    lo: f64,
    hi: f64,
    cdf: Vec<f64>,
    density: Vec<f64>,
}

pub const DEFAULT_PRIOR_POINTS: usize = 10_000;

impl TypePrior {
    /// From density values on `n` + 1 grid points; the CDF is the trapezoid
    /// integral, normalised to end at 1.
    pub fn from_density<F: Fn(f64) -> f64>(lo: f64, hi: f64, n: usize, f: F) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Parameter(format!("prior support [{lo}, {hi}] is invalid")));
        }
        if n < 2 {
            return Err(Error::Parameter("prior grid needs at least two cells".into()));
        }
        let h = (hi - lo) / n as f64;
        let density: Vec<f64> = (0..=n).map(|i| f(lo + i as f64 * h)).collect();
        if density.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::Parameter("prior density must be finite and nonnegative".into()));
        }
        let mut cdf = vec![0.0; n + 1];
        for i in 0..n {
            cdf[i + 1] = cdf[i] + 0.5 * h * (density[i] + density[i + 1]);
        }
        let total = cdf[n];
        if !(total > 0.0) {
            return Err(Error::Parameter("prior density integrates to zero".into()));
        }
        let cdf = cdf.into_iter().map(|c| c / total).collect();
        let density = density.into_iter().map(|d| d / total).collect();
        Ok(TypePrior { lo, hi, cdf, density })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::from_density(a, b, DEFAULT_PRIOR_POINTS, |_| 1.0)
    }

    pub fn truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(Error::Parameter(format!("standard deviation must be positive, got {sd}")));
        }
        Self::from_density(lo, hi, DEFAULT_PRIOR_POINTS, |x| (-0.5 * ((x - mean) / sd).powi(2)).exp())
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.cdf.len() - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.cdf.len()).map(|i| self.lo + i as f64 * h).collect()
    }

    /// F(θ), linear between grid points.
    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= self.lo {
            return 0.0;
        }
        if theta >= self.hi {
            return 1.0;
        }
        let x = (theta - self.lo) / self.step();
        let i = (x.floor() as usize).min(self.cdf.len() - 2);
        let t = x - i as f64;
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    pub fn density_at(&self, i: usize) -> f64 {
        self.density[i]
    }

    /// Probability mass assigned to each grid point (half cells at the ends).
    pub fn point_masses(&self) -> Vec<f64> {
        let n = self.cdf.len();
        (0..n)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { 0.5 * (self.cdf[i] - self.cdf[i - 1]) };
                let right = if i + 1 == n { 0.0 } else { 0.5 * (self.cdf[i + 1] - self.cdf[i]) };
                left + right
            })
            .collect()
    }

    /// True when θ − (1 − F)/f increases along the grid.
    pub fn is_regular(&self) -> bool {
        let g = self.grid();
        let phi: Vec<f64> = (0..g.len()).map(|i| g[i] - (1.0 - self.cdf[i]) / self.density[i]).collect();
        phi.windows(2).all(|w| w[1] > w[0])
    }
}

/// argmax θ(1 − F(θ)); smallest maximiser on the grid, refined inside the
/// neighbouring cells.
pub fn monopoly_cutoff(prior: &TypePrior) -> f64 {
    let g = prior.grid();
    let rev = |t: f64| t * (1.0 - prior.cdf(t));
    let mut best = 0;
    for i in 1..g.len() {
        if rev(g[i]) > rev(g[best]) {
            best = i;
        }
    }
    let lo = g[best.saturating_sub(1)];
    let hi = g[(best + 1).min(g.len() - 1)];
    let (t, v) = golden_max(rev, lo, hi, 1e-12);
    if v > rev(g[best]) {
        t
    } else {
        g[best]
    }
}

/// Root of the virtual value θ − (1 − F)/f on the grid, if the prior is regular.
pub fn virtual_value_root(prior: &TypePrior) -> Option<f64> {
    if !prior.is_regular() {
        return None;
    }
    let g = prior.grid();
    let phi = |i: usize| g[i] - (1.0 - prior.cdf(g[i])) / prior.density_at(i);
    if phi(0) >= 0.0 {
        return Some(g[0]);
    }
    (1..g.len()).find(|&i| phi(i) >= 0.0).map(|i| {
        let (a, b) = (phi(i - 1), phi(i));
        g[i - 1] + (g[i] - g[i - 1]) * (-a) / (b - a)
    })
}

/// Threshold allocation at θ* with one posted random price for all buyers.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PrivateValueMechanism {
    pub theta_star: f64,
    pub price_high: f64,
    pub price_prob: f64,
}

impl PrivateValueMechanism {
    /// Closed threshold: the cutoff type buys.
    pub fn allocation(&self, theta: f64) -> f64 {
        if theta >= self.theta_star {
            1.0
        } else {
            0.0
        }
    }

    pub fn price(&self) -> Result<PaymentDistribution> {
        if self.price_prob >= 1.0 {
            PaymentDistribution::deterministic(self.price_high)
        } else {
            PaymentDistribution::from_atoms(&[(0.0, 1.0 - self.price_prob), (self.price_high, self.price_prob)])
        }
    }

    pub fn menu(&self, report: f64) -> Result<Menu> {
        if self.allocation(report) > 0.0 {
            Ok(Menu::sure(self.price()?))
        } else {
            Menu::new(0.0, PaymentDistribution::deterministic(0.0)?)
        }
    }

    /// CPT payoff of type θ reporting `report`.
    pub fn payoff(&self, theta: f64, report: f64, params: &CptParams) -> Result<f64> {
        let p = params.with_theta(theta.max(f64::MIN_POSITIVE))?;
        cpt_value(&self.menu(report)?, &p)
    }

    pub fn to_direct(&self, prior: &TypePrior) -> Result<DirectMechanism> {
        let types = prior.grid();
        let mut allocation = Vec::with_capacity(types.len());
        let mut prices = Vec::with_capacity(types.len());
        for &t in &types {
            let m = self.menu(t)?;
            allocation.push(m.allocation_prob);
            prices.push(m.payment);
        }
        Ok(DirectMechanism { types, allocation, prices })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PrivateOptimum {
    pub mechanism: PrivateValueMechanism,
    pub revenue: f64,
}

pub fn optimal_private_mechanism(prior: &TypePrior, params: &CptParams) -> Result<PrivateOptimum> {
    let theta_star = monopoly_cutoff(prior);
    let (mu, p) = match static_multiplier(&params.w_minus) {
        Ok(m) => (m.mu_star, m.p_star),
        Err(Error::Degenerate(_)) => (1.0, 1.0),
        Err(e) => return Err(e),
    };
    let mechanism = PrivateValueMechanism { theta_star, price_high: mu * theta_star / (params.lambda * p), price_prob: p };
    Ok(PrivateOptimum { mechanism, revenue: mu / params.lambda * theta_star * (1.0 - prior.cdf(theta_star)) })
}

/// A direct mechanism on the prior's grid: allocation probability and payment
/// law for each type.
#[derive(Debug, Clone)]
pub struct DirectMechanism {
    pub types: Vec<f64>,
    pub allocation: Vec<f64>,
    pub prices: Vec<PaymentDistribution>,
}

impl DirectMechanism {
    pub fn revenue(&self, prior: &TypePrior) -> Result<f64> {
        let masses = prior.point_masses();
        if masses.len() != self.types.len() {
            return Err(Error::Parameter("mechanism types must be the prior grid".into()));
        }
        let mut s = 0.0;
        for (m, d) in masses.iter().zip(&self.prices) {
            s += m * d.expected_revenue()?;
        }
        Ok(s)
    }

    pub fn interim_value(&self, i: usize, params: &CptParams) -> Result<f64> {
        let p = params.with_theta(self.types[i].max(f64::MIN_POSITIVE))?;
        let menu = Menu::new(self.allocation[i], self.prices[i].clone())?;
        cpt_value(&menu, &p)
    }
}

/// Replace each type's payment by the binary price with the same perceived
/// cost, keeping every interim payoff.
pub fn improve_price(mech: &DirectMechanism, params: &CptParams) -> Result<DirectMechanism> {
    let m = match static_multiplier(&params.w_minus) {
        Ok(m) => Some(m),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    let mut prices = Vec::with_capacity(mech.prices.len());
    for (i, d) in mech.prices.iter().enumerate() {
        let theta = mech.types[i];
        let v = mech.interim_value(i, params)?;
        let cost = theta * params.w_plus.eval(mech.allocation[i])? - v;
        if cost < -1e-12 {
            return Err(Error::Infeasible(format!("negative perceived cost {cost} at type {theta}")));
        }
        let cost = cost.max(0.0);
        let _ = d;
        let price = match m {
            _ if cost == 0.0 => PaymentDistribution::deterministic(0.0)?,
            Some(m) => {
                let high = cost * m.mu_star / (params.lambda * m.p_star);
                PaymentDistribution::from_atoms(&[(0.0, 1.0 - m.p_star), (high, m.p_star)])?
            }
            None => PaymentDistribution::deterministic(cost / params.lambda)?,
        };
        prices.push(price);
    }
    Ok(DirectMechanism { types: mech.types.clone(), allocation: mech.allocation.clone(), prices })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub max_envelope_error: f64,
    pub convex: bool,
    pub monotone: bool,
    pub max_ic_violation: f64,
    pub passed: bool,
}

/// Interim values against max(0, θ − θ*), shape of v, and random misreports.
pub fn envelope_check(mech: &PrivateValueMechanism, prior: &TypePrior, params: &CptParams, pairs: usize, seed: u64) -> Result<EnvelopeReport> {
    let grid = prior.grid();
    let stride = (grid.len() / 1000).max(1);
    let pts: Vec<f64> = grid.iter().copied().step_by(stride).collect();
    let mut vals = Vec::with_capacity(pts.len());
    let mut err: f64 = 0.0;
    for &t in &pts {
        let v = mech.payoff(t, t, params)?;
        err = err.max((v - (t - mech.theta_star).max(0.0)).abs());
        vals.push(v);
    }
    let monotone = vals.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let convex = vals.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-9);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = prior.support();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let t = rng.gen_range(lo..=hi);
        let r = rng.gen_range(lo..=hi);
        let gain = mech.payoff(t, r, params)? - mech.payoff(t, t, params)?;
        worst = worst.max(gain);
    }
    Ok(EnvelopeReport {
        max_envelope_error: err,
        convex,
        monotone,
        max_ic_violation: worst.max(0.0),
        passed: err < 1e-8 && convex && monotone && worst <= 1e-9,
    })
}
