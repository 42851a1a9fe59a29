//! Quick invariant suite across all modules, used by `gacha verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classes::{self, ClassKind, Granularity};
use crate::cpt::{self, CptParams, Menu};
use crate::error::Result;
use crate::exponential::{optimal_schedule, SolverOptions};
use crate::montecarlo::{self, SimConfig, SimMechanism};
use crate::naive;
use crate::payment::{CumulativePaymentFn, PaymentDistribution};
use crate::private_values::{self, TypePrior};
use crate::weighting::WeightingFn;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(module: &'static str, name: &str, passed: bool, detail: String) -> Self {
        Check { module, name: name.to_string(), passed, detail }
    }
}

fn random_atoms(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = (0..k).map(|_| (rng.gen_range(0.0..scale), rng.gen_range(0.01..1.0))).collect();
    let s: f64 = v.iter().map(|a| a.1).sum();
    v.iter_mut().for_each(|a| a.1 /= s);
    v
}

fn weighting_checks(out: &mut Vec<Check>) -> Result<()> {
    for g in [0.5, 0.65, 0.75] {
        let w = WeightingFn::tversky_kahneman(g)?;
        let r = w.validate_reverse_s(1e-3);
        out.push(Check::new("weighting", &format!("reverse_s_{g}"), r.passed, format!("inflection {:?}", r.inflection)));
        let dd = w.dual().dual();
        let err = (1..100).map(|i| (dd.at(i as f64 / 100.0) - w.at(i as f64 / 100.0)).abs()).fold(0.0, f64::max);
        out.push(Check::new("weighting", &format!("dual_involution_{g}"), err == 0.0, format!("max diff {err:e}")));
    }
    Ok(())
}

fn cpt_checks(out: &mut Vec<Check>, rng: &mut ChaCha8Rng) -> Result<()> {
    for g in [0.5, 0.65, 0.75] {
        let w = WeightingFn::tversky_kahneman(g)?;
        let m = cpt::static_multiplier(&w)?;
        let fp = (m.mu_star * w.at(m.p_star) - m.p_star).abs();
        out.push(Check::new("cpt", &format!("static_multiplier_{g}"), m.mu_star > 1.0 && fp < 1e-9, format!("mu* {:.6} |mu*w(p*)-p*| {fp:e}", m.mu_star)));
    }
    let p = CptParams::default();
    let bound = cpt::optimal_static_price(&p)?.revenue;
    let mut worst = f64::NEG_INFINITY;
    let mut rdeu_err: f64 = 0.0;
    let w = &p.w_plus;
    let rdeu_params = CptParams::new(w.clone(), w.dual(), 1.0, 1.0, p.delta)?;
    for _ in 0..100 {
        let d = PaymentDistribution::from_atoms(&random_atoms(rng, 4, 3.0))?;
        let menu = Menu::sure(d);
        let cost = menu.payment.perceived_cost(&p.w_minus, p.lambda)?;
        if cost > 0.0 {
            let scaled = menu.payment.expected_revenue()? * p.theta / cost;
            worst = worst.max(scaled - bound);
        }
        let sep = cpt::cpt_value(&menu, &rdeu_params)?;
        rdeu_err = rdeu_err.max((cpt::rdeu_value(&menu, 1.0, w)? - sep).abs());
    }
    out.push(Check::new("cpt", "static_bound", worst <= 1e-6, format!("max excess {worst:e}")));
    out.push(Check::new("cpt", "rdeu_equivalence", rdeu_err < 1e-8, format!("max diff {rdeu_err:e}")));
    Ok(())
}

fn payment_checks(out: &mut Vec<Check>, rng: &mut ChaCha8Rng) -> Result<()> {
    let w = WeightingFn::tversky_kahneman(0.65)?;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = 8;
        let step = rng.gen_range(0.05..0.3);
        let flow: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let jumps = vec![(rng.gen_range(0.0..n as f64 * step), rng.gen_range(0.0..0.5))];
        let s = CumulativePaymentFn::uniform(step, flow, jumps)?;
        let top = s.total();
        for _ in 0..5 {
            let (a, b) = s.dir_cost_two_ways(rng.gen_range(0.0..top), &w);
            worst = worst.max((a - b).abs());
        }
    }
    out.push(Check::new("payment", "dir_cost_two_ways", worst < 1e-6, format!("max diff {worst:e}")));
    let d = PaymentDistribution::from_atoms(&[(1.0, 0.5), (2.0, 0.25), (4.0, 0.25)])?;
    let r = d.expected_revenue()?;
    out.push(Check::new("payment", "revenue_is_tail_integral", (r - 2.0).abs() < 1e-12, format!("{r}")));
    Ok(())
}

fn exponential_checks(out: &mut Vec<Check>) -> Result<()> {
    let p = CptParams::default();
    let sol = optimal_schedule(&p, &SolverOptions::default())?;
    let rep = sol.verify_optimality(&p, 1)?;
    out.push(Check::new(
        "exponential",
        "optimality_0.65",
        rep.passed && rep.max_binding_residual < 1e-6,
        format!("revenue {:.6} residual {:e} gap {:e}", sol.revenue, rep.max_binding_residual, rep.duality_gap),
    ));
    Ok(())
}

fn class_checks(out: &mut Vec<Check>) -> Result<()> {
    let p = CptParams::default();
    let gran = Granularity::FineLimit;
    let hp = classes::optimize(ClassKind::HardPity, &p, &gran)?;
    let md = classes::optimize(ClassKind::Modified, &p, &gran)?;
    let opt = optimal_schedule(&p, &SolverOptions::default())?.revenue;
    out.push(Check::new(
        "classes",
        "ordering_0.65",
        hp.revenue <= md.revenue && md.revenue <= opt,
        format!("{:.4} <= {:.4} <= {:.4}", hp.revenue, md.revenue, opt),
    ));
    for o in [&hp, &md] {
        let r = o.dir_report(&p)?;
        out.push(Check::new("classes", &format!("dir_{}", o.kind.name()), r.feasible, format!("min slack {:e}", r.min_slack)));
    }
    Ok(())
}

fn naive_checks(out: &mut Vec<Check>) -> Result<()> {
    for delta in [0.9, 0.95] {
        let p = CptParams::default().with_delta(delta)?;
        let sol = naive::optimal_loot_box(&p)?;
        let r = naive::verify_naive_behavior(&sol, &p, 5)?;
        out.push(Check::new(
            "naive",
            &format!("behaviour_delta_{delta}"),
            r.passed,
            format!("x* {:.5} corner {} revenue gap {:e}", sol.x_star, r.corner, r.revenue_gap),
        ));
    }
    Ok(())
}

fn private_checks(out: &mut Vec<Check>) -> Result<()> {
    let p = CptParams::default();
    let prior = TypePrior::uniform(0.0, 1.0)?;
    let o = private_values::optimal_private_mechanism(&prior, &p)?;
    let mu = cpt::static_multiplier(&p.w_minus)?.mu_star;
    let cut_ok = (o.mechanism.theta_star - 0.5).abs() <= prior.step();
    let rev_ok = (o.revenue - 0.25 * mu).abs() < 1e-4;
    out.push(Check::new("private_values", "uniform_optimum", cut_ok && rev_ok, format!("cutoff {:.5} revenue {:.6}", o.mechanism.theta_star, o.revenue)));
    let e = private_values::envelope_check(&o.mechanism, &prior, &p, 200, 3)?;
    out.push(Check::new("private_values", "envelope_and_ic", e.passed, format!("envelope {:e} ic {:e}", e.max_envelope_error, e.max_ic_violation)));
    Ok(())
}

fn montecarlo_checks(out: &mut Vec<Check>) -> Result<()> {
    let p = CptParams::default();
    let o = cpt::optimal_static_price(&p)?;
    let mut cfg = SimConfig::new(SimMechanism::Static(o.menu.payment.clone()), 100_000, 42);
    cfg.tail_max = 8.0;
    let sim = montecarlo::simulate(&cfg)?;
    let rep = montecarlo::compare(&o.menu.payment, &sim)?;
    out.push(Check::new("montecarlo", "static_dkw", rep.passed, format!("sup {:e} eps {:e} z {:.2}", rep.sup_distance, rep.dkw_epsilon, rep.mean_z)));
    let bad: Vec<f64> = sim.empirical_tail.iter().map(|e| o.menu.payment.tail(e.0) + 0.01).collect();
    let rep = montecarlo::compare_curve(&bad, o.revenue, &sim)?;
    out.push(Check::new("montecarlo", "corrupted_tail_rejected", !rep.tail_pass, format!("sup {:e}", rep.sup_distance)));
    Ok(())
}

/// Runs every module's checks; a module that errors contributes one failed
/// check carrying the error.
pub fn run_suite(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = [
        ("weighting", weighting_checks(&mut out)),
        ("cpt", cpt_checks(&mut out, &mut rng)),
        ("payment", payment_checks(&mut out, &mut rng)),
        ("exponential", exponential_checks(&mut out)),
        ("classes", class_checks(&mut out)),
        ("naive", naive_checks(&mut out)),
        ("private_values", private_checks(&mut out)),
        ("montecarlo", montecarlo_checks(&mut out)),
    ];
    let errors: Vec<Check> = results
        .into_iter()
        .filter_map(|(module, r)| r.err().map(|e| Check::new(module, "error", false, e.to_string())))
        .collect();
    out.extend(errors);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let checks = run_suite(1);
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{failed:?}");
    }
}
