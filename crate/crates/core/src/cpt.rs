//! CPT, RDEU and joint-accounting evaluation of menus; the static optimum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{golden_max, graded16};
use crate::payment::{interp, PaymentDistribution};
use crate::weighting::WeightingFn;

#[derive(Debug, Clone)]
pub struct CptParams {
    pub w_plus: WeightingFn,
    pub w_minus: WeightingFn,
    /// Loss-aversion multiplier λ ≥ 1.
    pub lambda: f64,
    /// Buyer's value for the good.
    pub theta: f64,
    /// Per-period discount factor, only used for naive buyers.
    pub delta: f64,
}

impl CptParams {
    pub fn new(w_plus: WeightingFn, w_minus: WeightingFn, lambda: f64, theta: f64, delta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Parameter(format!("theta must be positive, got {theta}")));
        }
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be at least 1, got {lambda}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Parameter(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(CptParams { w_plus, w_minus, lambda, theta, delta })
    }

    /// Tversky–Kahneman weighting on both accounts.
    pub fn tk(gamma_plus: f64, gamma_minus: f64, lambda: f64, theta: f64, delta: f64) -> Result<Self> {
        Self::new(
            WeightingFn::tversky_kahneman(gamma_plus)?,
            WeightingFn::tversky_kahneman(gamma_minus)?,
            lambda,
            theta,
            delta,
        )
    }

    /// θ/λ, the largest sure price the buyer accepts.
    pub fn full_price(&self) -> f64 {
        self.theta / self.lambda
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.w_plus.clone(), self.w_minus.clone(), self.lambda, theta, self.delta)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.w_plus.clone(), self.w_minus.clone(), self.lambda, self.theta, delta)
    }
}

impl Default for CptParams {
    fn default() -> Self {
        Self::tk(0.65, 0.65, 1.0, 1.0, 0.9).expect("default parameters are valid")
    }
}

#[derive(Debug, Clone)]
pub struct Menu {
    pub allocation_prob: f64,
    pub payment: PaymentDistribution,
}

impl Menu {
    pub fn new(allocation_prob: f64, payment: PaymentDistribution) -> Result<Self> {
        if !(0.0..=1.0).contains(&allocation_prob) {
            return Err(Error::Parameter(format!("allocation probability {allocation_prob} outside [0, 1]")));
        }
        Ok(Menu { allocation_prob, payment })
    }

    pub fn sure(payment: PaymentDistribution) -> Self {
        Menu { allocation_prob: 1.0, payment }
    }
}

pub fn perceived_cost(payment: &PaymentDistribution, w: &WeightingFn, lambda: f64) -> Result<f64> {
    payment.perceived_cost(w, lambda)
}

/// θ·w₊(x) − λ∫w₋(P(T > y))dy.
pub fn cpt_value(menu: &Menu, params: &CptParams) -> Result<f64> {
    let gain = params.theta * params.w_plus.eval(menu.allocation_prob)?;
    Ok(gain - perceived_cost(&menu.payment, &params.w_minus, params.lambda)?)
}

/// ∫ over a piece x ∈ [a, b] of f(tail(x)), split at `cut`, with `g` applied
/// for x above the cut and `h` below.
fn integrate_pieces<G, H>(d: &PaymentDistribution, cut: f64, above: G, below: H) -> f64
where
    G: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    let rule = graded16();
    let mut total = 0.0;
    for (a, b, ta, tb, shape) in d.pieces() {
        let len = b - a;
        let mut part = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| {
            if hi <= lo {
                return;
            }
            total += rule.integrate(|x| f(interp(shape, ta, tb, (x - a) / len)), lo, hi);
        };
        part(a, b.min(cut), &below);
        part(a.max(cut), b, &above);
    }
    total
}

/// Rank-dependent expected utility of θ − T under a single weighting w,
/// computed from the tail of θ − T. Requires sure delivery.
pub fn rdeu_value(menu: &Menu, theta: f64, w: &WeightingFn) -> Result<f64> {
    if menu.allocation_prob < 1.0 {
        return Err(Error::Unsupported("RDEU equivalence needs sure delivery (x = 1)".into()));
    }
    // y = θ − x; P(θ − T > y) = 1 − P(T ≥ x), with −1 on y < 0 (x > θ)
    let beyond = (theta - menu.payment.max_value()).max(0.0);
    Ok(beyond + integrate_pieces(&menu.payment, theta, |t| w.at(1.0 - t) - 1.0, |t| w.at(1.0 - t)))
}

/// Joint-account CPT value of θ − T with λ = 1 and one symmetric w.
pub fn joint_cpt_value(menu: &Menu, params: &CptParams) -> Result<f64> {
    if menu.allocation_prob < 1.0 {
        return Err(Error::Unsupported("joint accounting equivalence needs sure delivery (x = 1)".into()));
    }
    if params.lambda != 1.0 {
        return Err(Error::Precondition(format!("joint accounting needs lambda = 1, got {}", params.lambda)));
    }
    let n = 1000;
    let same = (0..=n).all(|i| {
        let p = i as f64 / n as f64;
        (params.w_plus.at(p) - params.w_minus.at(p)).abs() <= 1e-9
    });
    if !same || !params.w_plus.is_symmetric(n, 1e-9) {
        return Err(Error::Precondition("joint accounting needs w_plus = w_minus with w(p) + w(1-p) = 1".into()));
    }
    let w = &params.w_plus;
    let theta = params.theta;
    // gains: x = θ − y ∈ [0, θ), P(θ − T > y) = 1 − P(T ≥ x)
    // losses: x > θ, P(θ − T < θ − x) = P(T > x)
    let beyond = (theta - menu.payment.max_value()).max(0.0);
    Ok(beyond + integrate_pieces(&menu.payment, theta, |t| -w.at(t), |t| w.at(1.0 - t)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StaticMultiplier {
    pub mu_star: f64,
    pub p_star: f64,
}

/// μ* = max_p p/w₋(p) and its maximiser p*.
pub fn static_multiplier(w_minus: &WeightingFn) -> Result<StaticMultiplier> {
    if w_minus.is_identity() {
        return Err(Error::Degenerate("identity weighting: p/w(p) is constant, no unique p*".into()));
    }
    let ratio = |p: f64| if p <= 0.0 { 0.0 } else { p / w_minus.at(p) };
    let n = 10_000;
    let mut best = (1.0, ratio(1.0));
    for i in 1..n {
        let p = i as f64 / n as f64;
        let r = ratio(p);
        if r > best.1 {
            best = (p, r);
        }
    }
    let step = 1.0 / n as f64;
    let (p, r) = golden_max(ratio, (best.0 - step).max(0.0), (best.0 + step).min(1.0), 1e-10);
    let (p_star, mu_star) = if r >= best.1 { (p, r) } else { best };
    if !(mu_star > 1.0 + 1e-12) || !(p_star > 0.0 && p_star < 1.0) {
        return Err(Error::Degenerate(format!("no interior maximiser of p/w(p) (mu*={mu_star}, p*={p_star})")));
    }
    Ok(StaticMultiplier { mu_star, p_star })
}

#[derive(Debug, Clone)]
pub struct StaticOptimum {
    pub menu: Menu,
    pub revenue: f64,
    pub mu_star: f64,
    pub p_star: f64,
    pub price_high: f64,
    /// Set when weighting is linear and the optimum is the sure price θ/λ.
    pub degenerate: bool,
}

/// Binary random price with atom μ*θ/(p*λ) of mass p*.
pub fn optimal_static_price(params: &CptParams) -> Result<StaticOptimum> {
    let full = params.full_price();
    match static_multiplier(&params.w_minus) {
        Ok(m) => {
            let high = m.mu_star * params.theta / (m.p_star * params.lambda);
            let payment = PaymentDistribution::from_atoms(&[(0.0, 1.0 - m.p_star), (high, m.p_star)])?;
            Ok(StaticOptimum {
                menu: Menu::sure(payment),
                revenue: m.mu_star * full,
                mu_star: m.mu_star,
                p_star: m.p_star,
                price_high: high,
                degenerate: false,
            })
        }
        Err(Error::Degenerate(_)) => Ok(StaticOptimum {
            menu: Menu::sure(PaymentDistribution::deterministic(full)?),
            revenue: full,
            mu_star: 1.0,
            p_star: 1.0,
            price_high: full,
            degenerate: true,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(g: f64) -> CptParams {
        CptParams::tk(g, g, 1.0, 1.0, 0.9).unwrap()
    }

    fn random_atoms(vals: &[(f64, f64)]) -> PaymentDistribution {
        let tot: f64 = vals.iter().map(|v| v.1).sum();
        let atoms: Vec<(f64, f64)> = vals.iter().map(|&(v, m)| (v, m / tot)).collect();
        PaymentDistribution::from_atoms(&atoms).unwrap()
    }

    #[test]
    fn deterministic_full_price_binds() {
        let p = CptParams::tk(0.65, 0.65, 2.0, 3.0, 0.9).unwrap();
        let m = Menu::sure(PaymentDistribution::deterministic(1.5).unwrap());
        assert!(cpt_value(&m, &p).unwrap().abs() < 1e-15);
        let none = Menu::new(0.0, PaymentDistribution::deterministic(0.0).unwrap()).unwrap();
        assert_eq!(cpt_value(&none, &p).unwrap(), 0.0);
    }

    #[test]
    fn multiplier_against_fine_grid() {
        let w = WeightingFn::tversky_kahneman(0.65).unwrap();
        let m = static_multiplier(&w).unwrap();
        // oracle: step 1e-6 scan
        let mut best = (0.0, 0.0);
        for i in 1..1_000_000 {
            let p = i as f64 * 1e-6;
            let r = p / w.at(p);
            if r > best.1 {
                best = (p, r);
            }
        }
        assert!((m.mu_star - best.1).abs() < 1e-10);
        assert!((m.p_star - best.0).abs() < 2e-6);
        assert!((m.mu_star * w.at(m.p_star) - m.p_star).abs() < 1e-9);
        assert!(m.mu_star > 1.0);
        let h = 1e-5;
        let d = ((m.p_star + h) / w.at(m.p_star + h) - (m.p_star - h) / w.at(m.p_star - h)) / (2.0 * h);
        assert!(d.abs() < 1e-4, "{d}");
        assert!(matches!(static_multiplier(&WeightingFn::identity()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn static_optimum_is_binding() {
        for g in [0.5, 0.55, 0.6, 0.65, 0.7, 0.75] {
            let p = params(g);
            let o = optimal_static_price(&p).unwrap();
            assert!(cpt_value(&o.menu, &p).unwrap().abs() < 1e-9);
            assert!((o.menu.payment.expected_revenue().unwrap() - o.revenue).abs() < 1e-12);
            assert!(o.revenue >= p.full_price() * (1.0 + 1e-6));
            let c = o.menu.payment.perceived_cost(&p.w_minus, p.lambda).unwrap();
            assert!((c - p.lambda * p.w_minus.at(o.p_star) * o.price_high).abs() < 1e-12);
        }
        let lin = CptParams::new(WeightingFn::identity(), WeightingFn::identity(), 2.0, 1.0, 0.5).unwrap();
        let o = optimal_static_price(&lin).unwrap();
        assert!(o.degenerate);
        assert_eq!(o.revenue, 0.5);
    }

    #[test]
    fn homogeneity() {
        let p = params(0.65);
        let o1 = optimal_static_price(&p).unwrap();
        let o3 = optimal_static_price(&p.with_theta(3.0).unwrap()).unwrap();
        assert!((o3.revenue - 3.0 * o1.revenue).abs() < 1e-12);
        assert!((o3.price_high - 3.0 * o1.price_high).abs() < 1e-12);
    }

    #[test]
    fn moving_mass_off_p_star_loses() {
        let p = params(0.65);
        let o = optimal_static_price(&p).unwrap();
        for eps in [-1e-3, 1e-3] {
            let q = o.p_star + eps;
            let high = p.theta / (p.lambda * p.w_minus.at(q));
            assert!(q * high < o.revenue);
        }
    }

    #[test]
    fn rdeu_and_joint_basics() {
        let d = PaymentDistribution::deterministic(1.0).unwrap();
        let w = WeightingFn::tversky_kahneman(0.6).unwrap();
        assert!(rdeu_value(&Menu::sure(d.clone()), 1.0, &w).unwrap().abs() < 1e-15);
        let lin = CptParams::new(WeightingFn::identity(), WeightingFn::identity(), 1.0, 2.0, 0.5).unwrap();
        let t = random_atoms(&[(0.5, 0.3), (1.7, 0.4), (3.1, 0.3)]);
        let ev = 2.0 - t.expected_revenue().unwrap();
        let m = Menu::sure(t);
        assert!((rdeu_value(&m, 2.0, &WeightingFn::identity()).unwrap() - ev).abs() < 1e-12);
        assert!((joint_cpt_value(&m, &lin).unwrap() - ev).abs() < 1e-12);
        assert!(rdeu_value(&Menu::new(0.5, d).unwrap(), 1.0, &w).is_err());
        assert!(matches!(joint_cpt_value(&m, &params(0.65)), Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn rdeu_equals_cpt_of_dual(vals in proptest::collection::vec((0.0f64..3.0, 0.01f64..1.0), 1..8),
                                   g in 0.4f64..1.0, theta in 0.2f64..3.0) {
            let w = WeightingFn::tversky_kahneman(g).unwrap();
            let m = Menu::sure(random_atoms(&vals));
            let p = CptParams::new(w.clone(), w.dual(), 1.0, theta, 0.5).unwrap();
            let a = rdeu_value(&m, theta, &w).unwrap();
            let b = cpt_value(&m, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
        }

        #[test]
        fn static_bound(vals in proptest::collection::vec((0.0f64..4.0, 0.01f64..1.0), 1..6)) {
            let p = params(0.65);
            let d = random_atoms(&vals);
            let c = d.perceived_cost(&p.w_minus, p.lambda).unwrap();
            let feasible = scale_to_ir(&d, c, p.theta);
            let o = optimal_static_price(&p).unwrap();
            prop_assert!(feasible <= o.revenue + 1e-6);
        }
    }

    // revenue after scaling payments so the perceived cost equals θ
    fn scale_to_ir(d: &PaymentDistribution, cost: f64, theta: f64) -> f64 {
        if cost <= 0.0 {
            return 0.0;
        }
        d.expected_revenue().unwrap() * theta / cost
    }
}
