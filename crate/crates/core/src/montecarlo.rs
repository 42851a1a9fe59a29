//! Path simulation of the mechanisms and comparison with analytic laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classes::MechanismClassSpec;
use crate::error::{Error, Result};
use crate::naive::NaiveSolution;
use crate::numeric::{fmt_sig, pairwise_sum};
use crate::payment::{CumulativePaymentFn, PaymentDistribution};
use crate::weighting::WeightingFn;

#[derive(Debug, Clone)]
pub enum SimMechanism {
    /// Discrete loot boxes; `full_price` is θ/λ for the modified class.
    Class { spec: MechanismClassSpec, full_price: f64 },
    /// Schedule paid up to an exponential delivery time.
    Schedule(CumulativePaymentFn),
    /// Per-period binary price, buyer buys every period until success.
    Naive(NaiveSolution),
    /// One draw from a static payment law with sure delivery.
    Static(PaymentDistribution),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_paths: u64,
    pub seed: u64,
    pub mechanism: SimMechanism,
    pub tail_step: f64,
    pub tail_max: f64,
    pub keep_samples: bool,
}

impl SimConfig {
    pub fn new(mechanism: SimMechanism, n_paths: u64, seed: u64) -> Self {
        SimConfig { n_paths, seed, mechanism, tail_step: 0.01, tail_max: 5.0, keep_samples: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub n_paths: u64,
    pub mean_payment: f64,
    pub std_error: f64,
    pub empirical_tail: Vec<(f64, f64)>,
    pub delivery_rate: f64,
    #[serde(skip)]
    pub samples: Option<Vec<f64>>,
}

const CHUNK: u64 = 1 << 14;
const MAX_PERIODS: u32 = 1_000_000;

fn draw(mech: &SimMechanism, rng: &mut ChaCha8Rng) -> (f64, bool) {
    let uniform = |rng: &mut ChaCha8Rng| 1.0 - rng.gen::<f64>();
    match mech {
        SimMechanism::Class { spec, full_price } => {
            let q = spec.success();
            let g = (uniform(rng).ln() / (1.0 - q).ln()).ceil().max(1.0);
            let c = spec.price();
            match *spec {
                MechanismClassSpec::Stationary { .. } => (c * g, true),
                MechanismClassSpec::HardPity { n, .. } => (c * g.min(n as f64), true),
                MechanismClassSpec::Modified { n, .. } => {
                    if g <= n as f64 {
                        (c * g, true)
                    } else {
                        (c * n as f64 + full_price, true)
                    }
                }
            }
        }
        SimMechanism::Schedule(s) => {
            let tau = -uniform(rng).ln();
            (s.eval(tau), true)
        }
        SimMechanism::Naive(sol) => {
            let mut pay = 0.0;
            let mut disc = 1.0;
            for _ in 0..MAX_PERIODS {
                if rng.gen::<f64>() < sol.price_prob {
                    pay += disc * sol.price_high;
                }
                if rng.gen::<f64>() < sol.x_star {
                    return (pay, true);
                }
                disc *= sol.delta;
            }
            (pay, false)
        }
        SimMechanism::Static(d) => (d.inverse_tail(uniform(rng)), true),
    }
}

struct Partial {
    sum: f64,
    sumsq: f64,
    delivered: u64,
    bins: Vec<u64>,
    samples: Vec<f64>,
}

/// Deterministic given the seed: path i always uses stream i of the seeded
/// generator, chunks are fixed and merged pairwise.
pub fn simulate(config: &SimConfig) -> Result<SimResult> {
    if config.n_paths == 0 {
        return Err(Error::Parameter("n_paths must be at least 1".into()));
    }
    if !(config.tail_step > 0.0 && config.tail_max > 0.0) {
        return Err(Error::Parameter("tail grid step and range must be positive".into()));
    }
    let nb = (config.tail_max / config.tail_step).round() as usize;
    let chunks = config.n_paths.div_ceil(CHUNK);
    let parts: Vec<Partial> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(config.n_paths);
            let mut p = Partial { sum: 0.0, sumsq: 0.0, delivered: 0, bins: vec![0; nb + 2], samples: Vec::new() };
            let mut vals = Vec::with_capacity((hi - lo) as usize);
            for i in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(i);
                let (v, ok) = draw(&config.mechanism, &mut rng);
                vals.push(v);
                if ok {
                    p.delivered += 1;
                }
                // v ∈ (y_{b−1}, y_b] lands in bin b
                let b = ((v / config.tail_step - 1e-9).ceil().max(0.0) as usize).min(nb + 1);
                p.bins[b] += 1;
            }
            p.sum = pairwise_sum(&vals);
            let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
            p.sumsq = pairwise_sum(&sq);
            if config.keep_samples {
                p.samples = vals;
            }
            p
        })
        .collect();
    let n = config.n_paths as f64;
    let sum = pairwise_sum(&parts.iter().map(|p| p.sum).collect::<Vec<_>>());
    let sumsq = pairwise_sum(&parts.iter().map(|p| p.sumsq).collect::<Vec<_>>());
    let delivered: u64 = parts.iter().map(|p| p.delivered).sum();
    let mut bins = vec![0u64; nb + 2];
    for p in &parts {
        for (b, c) in bins.iter_mut().zip(&p.bins) {
            *b += c;
        }
    }
    let mean = sum / n;
    let var = if config.n_paths > 1 { ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    // fraction of values > y_j is the count in bins j+1..
    let mut above = config.n_paths - bins[0];
    let mut tail = Vec::with_capacity(nb + 1);
    for j in 0..=nb {
        tail.push((j as f64 * config.tail_step, above as f64 / n));
        above -= bins[j + 1];
    }
    let samples = config.keep_samples.then(|| parts.into_iter().flat_map(|p| p.samples).collect());
    Ok(SimResult {
        n_paths: config.n_paths,
        mean_payment: mean,
        std_error: (var / n).sqrt(),
        empirical_tail: tail,
        delivery_rate: delivered as f64 / n,
        samples,
    })
}

/// Empirical law of the kept samples.
pub fn empirical_distribution(sim: &SimResult) -> Result<PaymentDistribution> {
    let s = sim.samples.as_ref().ok_or_else(|| Error::Precondition("simulation did not keep samples".into()))?;
    let m = 1.0 / s.len() as f64;
    let atoms: Vec<(f64, f64)> = s.iter().map(|v| (*v, m)).collect();
    PaymentDistribution::from_atoms(&atoms)
}

/// λ∫w(P̂(T > y))dy for the empirical law of the kept samples.
pub fn empirical_perceived_cost(sim: &SimResult, w: &WeightingFn, lambda: f64) -> Result<f64> {
    let s = sim.samples.as_ref().ok_or_else(|| Error::Precondition("simulation did not keep samples".into()))?;
    let mut v = s.clone();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut prev = 0.0;
    let terms: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let t = (x - prev) * w.at((n - i as f64) / n);
            prev = *x;
            t
        })
        .collect();
    Ok(lambda * pairwise_sum(&terms))
}

/// `y,empirical_tail,analytic_tail` rows.
pub fn comparison_csv(analytic: &PaymentDistribution, sim: &SimResult) -> String {
    let mut out = String::from("y,empirical_tail,analytic_tail\n");
    for (y, e) in &sim.empirical_tail {
        out.push_str(&format!("{},{},{}\n", fmt_sig(*y), fmt_sig(*e), fmt_sig(analytic.tail(*y))));
    }
    out
}

/// DKW half-width at confidence 1 − α.
pub fn dkw_epsilon(n: u64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

pub const DKW_ALPHA: f64 = 0.001;

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub sup_distance: f64,
    pub dkw_epsilon: f64,
    pub tail_pass: bool,
    pub analytic_mean: f64,
    pub mean_z: f64,
    pub mean_pass: bool,
    pub passed: bool,
}

pub fn compare_curve(analytic_tail: &[f64], analytic_mean: f64, sim: &SimResult) -> Result<CompareReport> {
    if analytic_tail.len() != sim.empirical_tail.len() {
        return Err(Error::Precondition("analytic and empirical tails are on different grids".into()));
    }
    let sup = analytic_tail
        .iter()
        .zip(&sim.empirical_tail)
        .map(|(a, e)| (a - e.1).abs())
        .fold(0.0, f64::max);
    let eps = dkw_epsilon(sim.n_paths, DKW_ALPHA);
    let z = if sim.std_error > 0.0 { (sim.mean_payment - analytic_mean) / sim.std_error } else if sim.mean_payment == analytic_mean { 0.0 } else { f64::INFINITY };
    let tail_pass = sup <= eps;
    let mean_pass = z.abs() <= 3.0;
    Ok(CompareReport { sup_distance: sup, dkw_epsilon: eps, tail_pass, analytic_mean, mean_z: z, mean_pass, passed: tail_pass && mean_pass })
}

pub fn compare(analytic: &PaymentDistribution, sim: &SimResult) -> Result<CompareReport> {
    let tail: Vec<f64> = sim.empirical_tail.iter().map(|e| analytic.tail(e.0)).collect();
    compare_curve(&tail, analytic.expected_revenue()?, sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpt::CptParams;

    fn stationary() -> SimMechanism {
        SimMechanism::Class { spec: MechanismClassSpec::Stationary { c: 1.0, q: 0.5 }, full_price: 1.0 }
    }

    #[test]
    fn stationary_mean() {
        let r = simulate(&SimConfig::new(stationary(), 200_000, 7)).unwrap();
        assert!((r.mean_payment - 2.0).abs() < 3.0 * r.std_error);
        assert_eq!(r.delivery_rate, 1.0);
        assert!(r.empirical_tail.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn reproducible() {
        let a = simulate(&SimConfig::new(stationary(), 50_000, 11)).unwrap();
        let b = simulate(&SimConfig::new(stationary(), 50_000, 11)).unwrap();
        assert_eq!(a.mean_payment.to_bits(), b.mean_payment.to_bits());
        assert_eq!(a.empirical_tail, b.empirical_tail);
    }

    #[test]
    fn static_dkw_and_corruption() {
        let p = CptParams::default();
        let o = crate::cpt::optimal_static_price(&p).unwrap();
        let mut cfg = SimConfig::new(SimMechanism::Static(o.menu.payment.clone()), 100_000, 3);
        cfg.tail_max = 8.0;
        let sim = simulate(&cfg).unwrap();
        let rep = compare(&o.menu.payment, &sim).unwrap();
        assert!(rep.passed, "{rep:?}");
        let bad: Vec<f64> = sim.empirical_tail.iter().map(|e| o.menu.payment.tail(e.0) + 0.01).collect();
        let rep = compare_curve(&bad, o.revenue, &sim).unwrap();
        assert!(!rep.tail_pass);
    }

    #[test]
    fn perceived_cost_converges() {
        let p = CptParams::default();
        let o = crate::cpt::optimal_static_price(&p).unwrap();
        let exact = o.menu.payment.perceived_cost(&p.w_minus, p.lambda).unwrap();
        let errs: Vec<f64> = [10_000u64, 100_000, 1_000_000]
            .iter()
            .map(|n| {
                let mut cfg = SimConfig::new(SimMechanism::Static(o.menu.payment.clone()), *n, 5);
                cfg.keep_samples = true;
                let sim = simulate(&cfg).unwrap();
                (empirical_perceived_cost(&sim, &p.w_minus, p.lambda).unwrap() - exact).abs()
            })
            .collect();
        assert!(errs[2] < errs[0] && errs[2] < 5e-3, "{errs:?}");
    }

    #[test]
    fn dkw_half_width() {
        assert!((dkw_epsilon(1_000_000, 0.001) - 0.001_949_7).abs() < 1e-6);
    }
}
