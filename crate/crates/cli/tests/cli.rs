use std::path::Path;
use std::process::{Command, Output};

fn adcross(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adcross")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exponent_reports_critical_third() {
    let o = adcross(&["exponent", "--alpha", "1", "--beta", "1", "--gamma", "1", "--delta", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("case=critical"));
    assert!(text.contains("p=1/3 (minus-nu)"));
    assert!(text.contains("delta_ok=true"));
}

#[test]
fn crossings_csv_has_unit_second_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.csv");
    let o =
        adcross(&["crossings", "--omega0", "1", "--omega-rabi", "1", "--k", "2..6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,z_k,u_k,u_asymptotic"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "2");
    assert_eq!(first[1].parse::<f64>().unwrap(), 1.0);
    assert!(first[1].starts_with("1.0000000000000"));
    assert_eq!(text.lines().count(), 6);
    assert!(Path::new(&format!("{}.config.json", out.display())).exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = adcross(&["sweep", "--preset", "rwa", "--bad-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bad-flag"));
}

#[test]
fn invalid_values_are_usage_errors() {
    assert_eq!(adcross(&["crossings", "--k", "6..2"]).status.code(), Some(2));
    assert_eq!(adcross(&["evolve", "--s-start", "0.3", "--s-end", "0.1"]).status.code(), Some(2));
    assert_eq!(adcross(&["spectrum", "--preset", "other"]).status.code(), Some(2));
}

#[test]
fn oversized_eps_is_a_computation_error() {
    let o = adcross(&["bound", "--eps", "1e6", "--k", "4..8"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("K(eps)"));
}

#[test]
fn config_is_echoed_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"spec": {"omega0": 2.0, "Omega": 1.0, "kind": "modified", "rho": 0.5, "n_modes": 8}}"#)
        .unwrap();
    let o =
        adcross(&["spectrum", "--config", cfg.to_str().unwrap(), "--omega0", "1.5", "--samples", "1", "--k", "0..0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let echo = text.lines().next().unwrap();
    assert!(echo.starts_with("# config: "));
    let v: serde_json::Value = serde_json::from_str(&echo["# config: ".len()..]).unwrap();
    assert_eq!(v["spec"]["omega0"], 1.5);
    assert_eq!(v["spec"]["rho"], 0.5);
    assert_eq!(v["spec"]["kind"], "modified");
}

#[test]
fn sweep_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = adcross(&[
            "sweep",
            "--preset",
            "rwa",
            "--n-modes",
            "6",
            "--eps-max",
            "0.1",
            "--eps-min",
            "0.03",
            "--eps-points",
            "4",
            "--s-start",
            "-0.2",
            "--s-end",
            "0.2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(&out).unwrap(), std::fs::read(out.with_extension("svg")).unwrap())
    };
    let (csv_a, svg_a) = run("a.csv");
    let (csv_b, svg_b) = run("b.csv");
    assert_eq!(csv_a, csv_b);
    assert_eq!(svg_a, svg_b);
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("eps,error,transition_prob,bound_value,K_minus,K_plus,steps,wall_time,flags\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn verify_passes_on_default_model() {
    let o = adcross(&["verify", "--n-modes", "10", "--s-start", "-0.3", "--s-end", "0.3", "--k", "4..10"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    for name in ["hermiticity", "diagonal_blocks_of_l", "rl_commutator", "intertwining", "h1_right"] {
        assert!(text.lines().any(|l| l.starts_with("PASS") && l.contains(name)), "{name}");
    }
}

#[test]
fn analyze_writes_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ledger.csv");
    let o = adcross(&["analyze", "--k", "4..8", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("h1_violations=[]"));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("k,z_k,u_k,u_km1,V_lo,V_hi,Delta_k,G_k,alpha_hat,tau_k"));
    assert_eq!(text.lines().count(), 6);
}
