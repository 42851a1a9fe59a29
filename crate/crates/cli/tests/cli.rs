use std::path::PathBuf;
use std::process::{Command, Output};

fn gacha(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gacha")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gacha-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn field(json: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    v[key].as_f64().unwrap_or_else(|| panic!("missing {key}"))
}

#[test]
fn solve_static_reports_multiplier() {
    let o = gacha(&["solve-static", "--gamma", "0.65", "--theta", "1", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let w = gacha_core::WeightingFn::tversky_kahneman(0.65).unwrap();
    let m = gacha_core::cpt::static_multiplier(&w).unwrap();
    assert_eq!(field(&s, "mu_star"), m.mu_star);
    assert_eq!(field(&s, "p_star"), m.p_star);
    assert_eq!(field(&s, "revenue"), m.mu_star);
    let keys: Vec<usize> = ["\"mu_star\"", "\"p_star\"", "\"price_high\"", "\"revenue\""].iter().map(|k| s.find(k).unwrap()).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn table_one_layout() {
    let o = gacha(&["table", "--which", "1", "--gammas", "0.60,0.65"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "class,0.60,0.65");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("independent,") && lines[3].starts_with("optimal,"));
    for l in &lines[1..] {
        for cell in l.split(',').skip(1) {
            assert_eq!(cell.split('.').nth(1).unwrap().len(), 4);
        }
    }
    let opt: f64 = lines[3].split(',').nth(2).unwrap().parse().unwrap();
    assert!((opt - 1.2364).abs() < 0.005);
}

#[test]
fn tails_file_is_monotone_and_reproducible() {
    let a = tmp("a.csv");
    let b = tmp("b.csv");
    for p in [&a, &b] {
        let o = gacha(&["tails", "--mechanism", "optimal", "--gamma", "0.65", "-o", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,tail"));
    let tails: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(tails.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(tails[0], 1.0);
    assert!(!text.contains('e'));
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--mechanism", "static", "--paths", "20000", "--seed", "9"];
    let a = gacha(&args);
    let b = gacha(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(field(&stdout(&a), "delivery_rate"), 1.0);
}

#[test]
fn config_file_and_flag_precedence() {
    let cfg = tmp("cfg.json");
    std::fs::write(&cfg, r#"{"gamma_plus": 0.5, "gamma_minus": 0.5, "theta": 2.0}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let o = gacha(&["solve-static", "--config", c]);
    let s = stdout(&o);
    assert_eq!(field(&s, "gamma_minus"), 0.5);
    assert!((field(&s, "revenue") - 2.0 * field(&s, "mu_star")).abs() < 1e-12);
    let o = gacha(&["solve-static", "--config", c, "--theta", "1"]);
    assert_eq!(field(&stdout(&o), "theta"), 1.0);
}

#[test]
fn exit_codes() {
    assert_eq!(gacha(&["solve-static", "--bogus"]).status.code(), Some(1));
    assert_eq!(gacha(&["table", "--which", "3"]).status.code(), Some(1));
    let bad_cfg = tmp("bad.json");
    std::fs::write(&bad_cfg, r#"{"gama": 0.5}"#).unwrap();
    assert_eq!(gacha(&["solve-static", "--config", bad_cfg.to_str().unwrap()]).status.code(), Some(1));
    let o = gacha(&["solve-static", "--gamma", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
    assert_eq!(gacha(&["solve-naive", "--delta", "1"]).status.code(), Some(2));
    assert_eq!(gacha(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_private_uniform() {
    let o = gacha(&["solve-private", "--prior", "uniform:0,1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((field(&stdout(&o), "theta_star") - 0.5).abs() < 1e-4);
    assert_eq!(gacha(&["solve-private", "--prior", "beta:1,2"]).status.code(), Some(1));
}

#[test]
fn verify_passes() {
    let o = gacha(&["verify"]);
    let s = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{s}");
    assert!(s.trim_end().ends_with("0 failed"));
}

#[test]
fn class_simulation_matches_table_granularity() {
    let o = gacha(&["simulate", "--mechanism", "independent", "--paths", "50000", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!((field(&s, "analytic_mean") - 0.8470).abs() < 5e-4);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&s).unwrap()["passed"], true);
}
