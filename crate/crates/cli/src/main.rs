use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gacha_core::classes::{self, ClassKind, Granularity, Realisation};
use gacha_core::cpt::{optimal_static_price, CptParams};
use gacha_core::exponential::{optimal_schedule, SolverOptions};
use gacha_core::montecarlo::{self, SimConfig, SimMechanism};
use gacha_core::naive::optimal_loot_box;
use gacha_core::payment::PaymentDistribution;
use gacha_core::private_values::{optimal_private_mechanism, TypePrior};
use gacha_core::verify::run_suite;
use gacha_core::Error;

#[derive(Parser)]
#[command(name = "gacha", version, about = "Optimal pricing processes for a prospect-theory buyer")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat JSON file with any of the run parameters; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sets both gamma_plus and gamma_minus.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    gamma_plus: Option<f64>,
    #[arg(long, global = true)]
    gamma_minus: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    grid_step: Option<f64>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(short = 'o', long = "output", global = true)]
    output_path: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Stationary,
    HardPity,
    Modified,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Fine,
    Discrete,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Optimal,
    Static,
    Independent,
    HardPity,
    Modified,
    Naive,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal static random price.
    SolveStatic,
    /// Optimal payment schedule under exponential delivery.
    SolveExponential,
    /// Best mechanism within one loot-box class.
    SolveClass {
        #[arg(long, value_enum)]
        class: ClassArg,
        #[arg(long, value_enum, default_value = "fine")]
        granularity: GranularityArg,
    },
    /// Optimal loot box against a naive buyer.
    SolveNaive,
    /// Optimal mechanism with private values, e.g. `--prior uniform:0,1`.
    SolvePrivate {
        #[arg(long, default_value = "uniform:0,1")]
        prior: String,
    },
    /// Revenue table across gammas (CSV).
    Table {
        #[arg(long, value_parser = ["1", "2"])]
        which: String,
        #[arg(long, value_delimiter = ',', default_value = "0.50,0.55,0.60,0.65,0.70,0.75")]
        gammas: Vec<f64>,
        #[arg(long, value_enum, default_value = "fine")]
        granularity: GranularityArg,
    },
    /// Tail curve y, P(T > y) of a mechanism's payment (CSV).
    Tails {
        #[arg(long, value_enum)]
        mechanism: MechanismArg,
        #[arg(long, value_enum, default_value = "fine")]
        granularity: GranularityArg,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 5.0)]
        y_max: f64,
    },
    /// Monte Carlo simulation against the analytic law.
    Simulate {
        #[arg(long, value_enum, default_value = "optimal")]
        mechanism: MechanismArg,
        #[arg(long, value_enum, default_value = "fine")]
        granularity: GranularityArg,
        #[arg(long, default_value_t = 1_000_000)]
        paths: u64,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 5.0)]
        y_max: f64,
    },
    /// Run the invariant suite.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    gamma_plus: f64,
    gamma_minus: f64,
    lambda: f64,
    theta: f64,
    delta: f64,
    grid_step: f64,
    tolerance: f64,
    output_path: Option<PathBuf>,
    format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gamma_plus: 0.65,
            gamma_minus: 0.65,
            lambda: 1.0,
            theta: 1.0,
            delta: 0.9,
            grid_step: 1e-3,
            tolerance: 1e-6,
            output_path: None,
            format: Format::Json,
        }
    }
}

enum Failure {
    Usage(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type Run<T> = std::result::Result<T, Failure>;

impl RunConfig {
    fn resolve(c: &Common) -> Run<Self> {
        let mut cfg = match &c.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(g) = c.gamma {
            cfg.gamma_plus = g;
            cfg.gamma_minus = g;
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.gamma_plus, c.gamma_plus);
        set(&mut cfg.gamma_minus, c.gamma_minus);
        set(&mut cfg.lambda, c.lambda);
        set(&mut cfg.theta, c.theta);
        set(&mut cfg.delta, c.delta);
        set(&mut cfg.grid_step, c.grid_step);
        set(&mut cfg.tolerance, c.tolerance);
        if c.output_path.is_some() {
            cfg.output_path = c.output_path.clone();
        }
        if let Some(f) = c.format {
            cfg.format = f;
        }
        if !(cfg.tolerance > 0.0) {
            return Err(Failure::Validation(format!("tolerance must be positive, got {}", cfg.tolerance)));
        }
        Ok(cfg)
    }

    fn params(&self) -> Run<CptParams> {
        Ok(CptParams::tk(self.gamma_plus, self.gamma_minus, self.lambda, self.theta, self.delta)?)
    }

    fn solver(&self) -> Run<SolverOptions> {
        if !(self.grid_step > 0.0 && self.grid_step <= 1e-3) {
            return Err(Failure::Validation(format!("grid_step must lie in (0, 1e-3], got {}", self.grid_step)));
        }
        Ok(SolverOptions::with_step(self.grid_step))
    }
}

#[derive(Serialize)]
struct ParamsOut {
    gamma_plus: f64,
    gamma_minus: f64,
    lambda: f64,
    theta: f64,
    delta: f64,
}

impl From<&RunConfig> for ParamsOut {
    fn from(c: &RunConfig) -> Self {
        ParamsOut { gamma_plus: c.gamma_plus, gamma_minus: c.gamma_minus, lambda: c.lambda, theta: c.theta, delta: c.delta }
    }
}

#[derive(Serialize)]
struct StaticOut {
    mu_star: f64,
    p_star: f64,
    price_high: f64,
    revenue: f64,
    #[serde(flatten)]
    params: ParamsOut,
}

#[derive(Serialize)]
struct ExponentialOut<'a> {
    revenue: f64,
    primal_revenue: f64,
    p1: f64,
    t1: f64,
    t0: f64,
    grid_step: f64,
    max_binding_residual: f64,
    within_tolerance: bool,
    #[serde(flatten)]
    params: ParamsOut,
    g0: &'a gacha_core::exponential::CellFunction,
    f: &'a gacha_core::exponential::CellFunction,
}

#[derive(Serialize)]
struct ClassOut {
    class: &'static str,
    revenue: f64,
    realisation: Realisation,
    dir_feasible: bool,
    dir_min_slack: f64,
    #[serde(flatten)]
    params: ParamsOut,
}

#[derive(Serialize)]
struct NaiveOut {
    x_star: f64,
    price_high: f64,
    price_prob: f64,
    v_star: f64,
    #[serde(flatten)]
    params: ParamsOut,
}

#[derive(Serialize)]
struct PrivateOut {
    prior: String,
    theta_star: f64,
    price_high: f64,
    price_prob: f64,
    revenue: f64,
    #[serde(flatten)]
    params: ParamsOut,
}

#[derive(Serialize)]
struct SimulateOut {
    mechanism: &'static str,
    n_paths: u64,
    seed: u64,
    mean_payment: f64,
    std_error: f64,
    delivery_rate: f64,
    analytic_mean: f64,
    sup_distance: f64,
    dkw_epsilon: f64,
    mean_z: f64,
    passed: bool,
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output types serialise");
    s.push('\n');
    s
}

fn parse_prior(spec: &str) -> Run<TypePrior> {
    let bad = || Failure::Usage(format!("--prior {spec}: expected uniform:a,b or normal:mean,sd,lo,hi"));
    let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> = args.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    match (kind, nums.as_slice()) {
        ("uniform", [a, b]) => Ok(TypePrior::uniform(*a, *b)?),
        ("normal", [m, s, lo, hi]) => Ok(TypePrior::truncated_normal(*m, *s, *lo, *hi)?),
        _ => Err(bad()),
    }
}

fn granularity(g: GranularityArg) -> Granularity {
    match g {
        GranularityArg::Fine => Granularity::FineLimit,
        GranularityArg::Discrete => Granularity::discrete_default(),
    }
}

fn mechanism_name(m: MechanismArg) -> &'static str {
    match m {
        MechanismArg::Optimal => "optimal",
        MechanismArg::Static => "static",
        MechanismArg::Independent => "independent",
        MechanismArg::HardPity => "hard_pity",
        MechanismArg::Modified => "modified",
        MechanismArg::Naive => "naive",
    }
}

/// Analytic payment law and a matching simulation mechanism.
fn mechanism(m: MechanismArg, g: GranularityArg, cfg: &RunConfig) -> Run<(PaymentDistribution, SimMechanism)> {
    let p = cfg.params()?;
    let class = |kind| -> Run<(PaymentDistribution, SimMechanism)> {
        let o = classes::optimize(kind, &p, &granularity(g))?;
        let sim = match &o.realisation {
            Realisation::Discrete(spec) => SimMechanism::Class { spec: spec.clone(), full_price: p.full_price() },
            Realisation::Flow(flow) => SimMechanism::Schedule(flow.schedule(&p)?),
        };
        Ok((o.payment_dist(&p)?, sim))
    };
    match m {
        MechanismArg::Optimal => {
            let sol = optimal_schedule(&p, &cfg.solver()?)?;
            Ok((sol.pushforward(), SimMechanism::Schedule(sol.schedule.clone())))
        }
        MechanismArg::Static => {
            let o = optimal_static_price(&p)?;
            Ok((o.menu.payment.clone(), SimMechanism::Static(o.menu.payment)))
        }
        MechanismArg::Independent => class(ClassKind::Stationary),
        MechanismArg::HardPity => class(ClassKind::HardPity),
        MechanismArg::Modified => class(ClassKind::Modified),
        MechanismArg::Naive => {
            let sol = optimal_loot_box(&p)?;
            let d = gacha_core::naive::sigma_payment_dist(&sol, gacha_core::naive::ENUMERATION_LIMIT, p.delta)?;
            if sol.x_star < 1.0 {
                eprintln!("note: naive tail is the exact law over the first {} periods", gacha_core::naive::ENUMERATION_LIMIT + 1);
            }
            Ok((d, SimMechanism::Naive(sol)))
        }
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Run<()> {
    match &cfg.output_path {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("--output {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Usage(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: Cli) -> Run<bool> {
    let cfg = RunConfig::resolve(&cli.common)?;
    match cli.command {
        Command::SolveStatic => {
            let p = cfg.params()?;
            let o = optimal_static_price(&p)?;
            let out = StaticOut { mu_star: o.mu_star, p_star: o.p_star, price_high: o.price_high, revenue: o.revenue, params: (&cfg).into() };
            emit(&cfg, &json(&out))?;
        }
        Command::SolveExponential => {
            let p = cfg.params()?;
            let sol = optimal_schedule(&p, &cfg.solver()?)?;
            let res = sol.binding_residuals(&p.w_minus).iter().map(|r| r.1.abs()).fold(0.0, f64::max);
            let out = ExponentialOut {
                revenue: sol.revenue,
                primal_revenue: sol.primal_revenue,
                p1: sol.p1,
                t1: sol.t1,
                t0: sol.t0,
                grid_step: sol.grid_step,
                max_binding_residual: res,
                within_tolerance: res < cfg.tolerance,
                params: (&cfg).into(),
                g0: &sol.g0,
                f: &sol.f,
            };
            emit(&cfg, &json(&out))?;
        }
        Command::SolveClass { class, granularity: g } => {
            let p = cfg.params()?;
            let kind = match class {
                ClassArg::Stationary => ClassKind::Stationary,
                ClassArg::HardPity => ClassKind::HardPity,
                ClassArg::Modified => ClassKind::Modified,
            };
            let o = classes::optimize(kind, &p, &granularity(g))?;
            let dir = o.dir_report(&p)?;
            let out = ClassOut {
                class: kind.name(),
                revenue: o.revenue,
                realisation: o.realisation,
                dir_feasible: dir.feasible,
                dir_min_slack: dir.min_slack,
                params: (&cfg).into(),
            };
            emit(&cfg, &json(&out))?;
        }
        Command::SolveNaive => {
            let p = cfg.params()?;
            let s = optimal_loot_box(&p)?;
            let out = NaiveOut { x_star: s.x_star, price_high: s.price_high, price_prob: s.price_prob, v_star: s.v_star, params: (&cfg).into() };
            emit(&cfg, &json(&out))?;
        }
        Command::SolvePrivate { prior } => {
            let p = cfg.params()?;
            let o = optimal_private_mechanism(&parse_prior(&prior)?, &p)?;
            let m = o.mechanism;
            let out = PrivateOut {
                prior,
                theta_star: m.theta_star,
                price_high: m.price_high,
                price_prob: m.price_prob,
                revenue: o.revenue,
                params: (&cfg).into(),
            };
            emit(&cfg, &json(&out))?;
        }
        Command::Table { which, gammas, granularity: g } => {
            let p = cfg.params()?;
            let opts = SolverOptions::with_step(cfg.solver()?.grid_step.min(1e-4));
            let t = classes::table_sweep(&gammas, &p, &granularity(g), &opts)?;
            let names: &[&str] = if which == "1" { &["independent", "hard_pity", "optimal"] } else { &["hard_pity", "modified", "optimal"] };
            let t = t.select(names).expect("sweep produces every row");
            emit(&cfg, &t.to_csv())?;
        }
        Command::Tails { mechanism: m, granularity: g, step, y_max } => {
            if !(step > 0.0 && y_max > 0.0) {
                return Err(Failure::Validation(format!("tail grid needs positive step and range, got {step}, {y_max}")));
            }
            let (d, _) = mechanism(m, g, &cfg)?;
            emit(&cfg, &d.tail_csv(step, y_max))?;
        }
        Command::Simulate { mechanism: m, granularity: g, paths, seed, step, y_max } => {
            let (d, mech) = mechanism(m, g, &cfg)?;
            let mut sc = SimConfig::new(mech, paths, seed);
            sc.tail_step = step;
            sc.tail_max = y_max;
            let sim = montecarlo::simulate(&sc)?;
            if cfg.format == Format::Csv {
                emit(&cfg, &montecarlo::comparison_csv(&d, &sim))?;
                return Ok(true);
            }
            let rep = montecarlo::compare(&d, &sim)?;
            let out = SimulateOut {
                mechanism: mechanism_name(m),
                n_paths: sim.n_paths,
                seed,
                mean_payment: sim.mean_payment,
                std_error: sim.std_error,
                delivery_rate: sim.delivery_rate,
                analytic_mean: rep.analytic_mean,
                sup_distance: rep.sup_distance,
                dkw_epsilon: rep.dkw_epsilon,
                mean_z: rep.mean_z,
                passed: rep.passed,
            };
            emit(&cfg, &json(&out))?;
        }
        Command::Verify { seed } => {
            let checks = run_suite(seed);
            let mut text = String::new();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                text.push_str(&format!("{tag} {}::{} {}\n", c.module, c.name, c.detail));
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            text.push_str(&format!("{} checks, {} failed\n", checks.len(), failed));
            emit(&cfg, &text)?;
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
    }
}
