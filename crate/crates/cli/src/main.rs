//! `adcross`: command-line front end for the adiabatic-crossings pipeline.
//!
//! Exit codes: 0 success, 1 computation error, 2 usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adiabatic_crossings::bounds::{exponent_p, k_of_eps_trace, theorem_bound, BoundsError, CrossingSequences};
use adiabatic_crossings::evolve::{adiabatic_error, export_checkpoints, Integrator, Metric, PropagationConfig};
use adiabatic_crossings::format::sig15;
use adiabatic_crossings::harness::{
    export_csv, render_svg, run_sweep, verify, HarnessError, SweepConfig, VerifyOptions,
};
use adiabatic_crossings::model::{Branch, FloquetModel, ModelSpec, Preset};
use adiabatic_crossings::spectral::{build_ledger, find_crossings, partition_u, u_asymptotic, Side};
use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use serde_json::json;

const AFTER_HELP: &str = "Symbols: --omega0 is the bare splitting omega_0, --omega-rabi the Rabi \
frequency Omega, --rho the phase-modulation amplitude rho (modified preset only). \
Config files are JSON documents with the sweep-config field names; explicit flags override them.";

#[derive(Parser, Debug)]
#[command(name = "adcross", version, about = "Adiabatic evolution through infinitely many eigenvalue crossings", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Floquet eigenvalues and eigenvector truncation losses.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        window: WindowArgs,
        /// Number of sample times in the window.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        /// Fourier-mode range `a..b`.
        #[arg(long, value_parser = parse_range, default_value = "-2..2")]
        k: (i64, i64),
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Crossing times, partition points and their asymptotics.
    Crossings {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_range, default_value = "2..10")]
        k: (i64, i64),
        #[arg(long, value_parser = ["left", "right"], default_value = "right")]
        side: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Crossing ledger with the gap-hypothesis checks.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_range, default_value = "4..20")]
        k: (i64, i64),
        #[arg(long, value_parser = ["left", "right"], default_value = "right")]
        side: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Total error bound and the K(eps) selection.
    Bound {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, value_parser = parse_range, default_value = "4..40")]
        k: (i64, i64),
        #[arg(long)]
        varsigma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence exponent from the power-law exponents (exact rationals).
    Exponent {
        #[arg(long, value_parser = parse_rational)]
        alpha: Ratio<i64>,
        #[arg(long, value_parser = parse_rational)]
        beta: Ratio<i64>,
        #[arg(long, value_parser = parse_rational)]
        gamma: Ratio<i64>,
        #[arg(long, value_parser = parse_rational)]
        delta: Ratio<i64>,
    },
    /// One exact/adiabatic comparison.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// Checkpoint log of the adiabatic run.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Epsilon sweep with power-law fit, CSV and SVG output.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "eps-min")]
        eps_min: Option<f64>,
        #[arg(long = "eps-max")]
        eps_max: Option<f64>,
        #[arg(long = "eps-points")]
        eps_points: Option<usize>,
        /// Overlay the total bound (builds both ledgers).
        #[arg(long = "bound-overlay")]
        bound_overlay: bool,
        #[arg(long)]
        varsigma: Option<f64>,
        /// CSV path; the SVG is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invariant suite; exits 1 if any check fails.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        #[arg(long, value_parser = parse_range, default_value = "4..20")]
        k: (i64, i64),
    },
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long = "omega-rabi")]
    omega_rabi: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_parser = ["rwa", "modified"])]
    preset: Option<String>,
    #[arg(long = "n-modes")]
    n_modes: Option<usize>,
    /// JSON config; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct WindowArgs {
    #[arg(long = "s-start", allow_hyphen_values = true)]
    s_start: Option<f64>,
    #[arg(long = "s-end", allow_hyphen_values = true)]
    s_end: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long, value_parser = ["rk4", "exp-midpoint"])]
    integrator: Option<String>,
    #[arg(long, value_parser = ["deviation", "transition"])]
    metric: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Compute(String),
}

type CliResult = Result<(), CliError>;

fn compute(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got '{s}'"))?;
    let a: i64 = a.trim().parse().map_err(|e| format!("'{a}': {e}"))?;
    let b: i64 = b.trim().parse().map_err(|e| format!("'{b}': {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

/// `p/q`, an integer or a finite decimal.
fn parse_rational(s: &str) -> Result<Ratio<i64>, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|e| format!("'{s}': {e}"))?;
        let d: i64 = d.trim().parse().map_err(|e| format!("'{s}': {e}"))?;
        if d == 0 {
            return Err(format!("'{s}': zero denominator"));
        }
        return Ok(Ratio::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("'{s}': expected p/q or a decimal with at most 12 fractional digits"));
    }
    let digits = format!("{int}{frac}");
    let n: i64 = digits.parse().map_err(|e| format!("'{s}': {e}"))?;
    Ok(Ratio::new(n, 10i64.pow(frac.len() as u32)))
}

fn parse_side(s: &str) -> Side {
    if s == "left" {
        Side::Left
    } else {
        Side::Right
    }
}

fn load_config(path: Option<&Path>) -> Result<Option<SweepConfig>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => SweepConfig::from_json_file(p).map(Some).map_err(|e| CliError::Usage(e.to_string())),
    }
}

/// Config file values first, then explicit flags.
fn effective_spec(args: &ModelArgs, base: Option<&SweepConfig>) -> Result<ModelSpec<f64>, CliError> {
    let start = base.map(|c| c.spec).unwrap_or_else(|| ModelSpec::rwa(1.0, 1.0, 16));
    let kind = match &args.preset {
        Some(p) => p.parse::<Preset>().map_err(CliError::Usage)?,
        None => start.kind,
    };
    let n = args.n_modes.unwrap_or(start.n_modes);
    let rho = args.rho.unwrap_or(match start.kind {
        Preset::Modified => start.rho_at(0.0),
        Preset::Rwa => 1.0,
    });
    let mut spec = ModelSpec::preset(
        kind,
        args.omega0.unwrap_or(start.omega0),
        args.omega_rabi.unwrap_or(start.omega_rabi),
        rho,
        n,
    )
    .with_chirp(start.chirp);
    if kind == Preset::Modified && start.kind == Preset::Modified && args.rho.is_none() {
        spec = spec.with_rho(start.rho);
    }
    if args.n_modes.is_none() && start.theta_grid != 0 {
        spec = spec.with_theta_grid(start.theta_grid);
    }
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn window(args: &WindowArgs, base: Option<&SweepConfig>) -> Result<(f64, f64), CliError> {
    let (a, b) = base.map(|c| c.s_window).unwrap_or((-0.45, 0.45));
    let w = (args.s_start.unwrap_or(a), args.s_end.unwrap_or(b));
    if !(w.0 < w.1) {
        return Err(CliError::Usage(format!("need --s-start < --s-end, got {} and {}", w.0, w.1)));
    }
    Ok(w)
}

fn run_settings(args: &RunArgs, base: Option<&SweepConfig>) -> (Integrator, Metric) {
    let integrator = match &args.integrator {
        Some(s) => s.parse().unwrap_or_default(),
        None => base.map(|c| c.integrator).unwrap_or_default(),
    };
    let metric = match &args.metric {
        Some(s) => s.parse().unwrap_or_default(),
        None => base.map(|c| c.metric).unwrap_or_default(),
    };
    (integrator, metric)
}

fn echo(config: &serde_json::Value) {
    println!("# config: {config}");
}

fn write_sidecar(out: &Path, config: &serde_json::Value) -> CliResult {
    let mut name = out.as_os_str().to_owned();
    name.push(".config.json");
    let text = serde_json::to_string_pretty(config).map_err(compute)? + "\n";
    std::fs::write(PathBuf::from(name), text).map_err(|e| compute(format!("{}: {e}", out.display())))
}

/// Writes CSV to `out` (plus the config sidecar) or to stdout.
fn emit_csv(out: Option<&Path>, header: &[&str], rows: &[Vec<String>], config: &serde_json::Value) -> CliResult {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(compute)?;
        for r in rows {
            w.write_record(r).map_err(compute)?;
        }
        w.flush().map_err(compute)?;
    }
    match out {
        Some(p) => {
            std::fs::write(p, &buf).map_err(|e| compute(format!("{}: {e}", p.display())))?;
            write_sidecar(p, config)?;
            println!("wrote {}", p.display());
        }
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(())
}

fn spectrum(model: &ModelArgs, win: &WindowArgs, samples: usize, k: (i64, i64), out: Option<&Path>) -> CliResult {
    let base = load_config(model.config.as_deref())?;
    let spec = effective_spec(model, base.as_ref())?;
    let (a, b) = window(win, base.as_ref())?;
    let n = samples.max(1);
    let config = json!({"command": "spectrum", "spec": spec, "s_window": [a, b], "samples": n, "k": [k.0, k.1]});
    echo(&config);
    let m = FloquetModel::new(spec).map_err(compute)?;
    let mut rows = Vec::new();
    for j in 0..n {
        let s = if n == 1 { a } else { a + (b - a) * j as f64 / (n - 1) as f64 };
        for mode in k.0..=k.1 {
            for branch in [Branch::Plus, Branch::Minus] {
                let e = m.exact_eigenvector(s, branch, mode).map_err(compute)?;
                rows.push(vec![
                    sig15(s),
                    if branch == Branch::Plus { "+" } else { "-" }.to_string(),
                    mode.to_string(),
                    sig15(e.value),
                    sig15(e.truncation_loss),
                ]);
            }
        }
    }
    emit_csv(out, &["s", "branch", "mode", "eigenvalue", "truncation_loss"], &rows, &config)
}

fn crossings(model: &ModelArgs, k: (i64, i64), side: &str, out: Option<&Path>) -> CliResult {
    let base = load_config(model.config.as_deref())?;
    let spec = effective_spec(model, base.as_ref())?;
    let side = parse_side(side);
    let config = json!({"command": "crossings", "spec": spec, "k": [k.0, k.1], "side": side});
    echo(&config);
    if k.0 < 2 {
        return Err(CliError::Usage(format!("crossing indices start at 2, got {}", k.0)));
    }
    let m = FloquetModel::new(spec).map_err(compute)?;
    let mut rows = Vec::new();
    for kk in k.0..=k.1 {
        let z = match find_crossings(&m, kk, kk, side) {
            Ok(z) => z[0],
            Err(e) => {
                eprintln!("k = {kk}: {e}");
                continue;
            }
        };
        let u = partition_u(&m, kk, side).map(sig15).unwrap_or_default();
        let ua = u_asymptotic(&m, kk, side).map(sig15).unwrap_or_default();
        rows.push(vec![kk.to_string(), sig15(z), u, ua]);
    }
    emit_csv(out, &["k", "z_k", "u_k", "u_asymptotic"], &rows, &config)
}

fn analyze(model: &ModelArgs, k: (i64, i64), side: &str, out: Option<&Path>) -> CliResult {
    let base = load_config(model.config.as_deref())?;
    let spec = effective_spec(model, base.as_ref())?;
    let side = parse_side(side);
    let config = json!({"command": "analyze", "spec": spec, "k": [k.0, k.1], "side": side});
    echo(&config);
    if k.0 < 3 {
        return Err(CliError::Usage(format!("the ledger starts at k = 3, got {}", k.0)));
    }
    let m = FloquetModel::new(spec).map_err(compute)?;
    let ledger = build_ledger(&m, k.0, k.1, side).map_err(compute)?;
    println!("side={side}");
    println!("records={}", ledger.records.len());
    println!("alpha={}", sig15(ledger.alpha));
    println!("h1_violations={:?}", ledger.h1_violations());
    println!("h2_violations={:?}", ledger.h2_violations());
    println!("structure_ok={}", ledger.structure_ok());
    match out {
        Some(p) => {
            ledger.export_csv(p).map_err(compute)?;
            write_sidecar(p, &config)?;
            println!("wrote {}", p.display());
        }
        None => {
            let mut buf = Vec::new();
            ledger.write_csv(&mut buf).map_err(compute)?;
            print!("{}", String::from_utf8_lossy(&buf));
        }
    }
    Ok(())
}

fn bound(model: &ModelArgs, eps: f64, k: (i64, i64), varsigma: Option<f64>, out: Option<&Path>) -> CliResult {
    let base = load_config(model.config.as_deref())?;
    let spec = effective_spec(model, base.as_ref())?;
    let config = json!({"command": "bound", "spec": spec, "eps": eps, "k": [k.0, k.1], "varsigma": varsigma});
    echo(&config);
    if !(eps > 0.0) {
        return Err(CliError::Usage(format!("--eps must be positive, got {eps}")));
    }
    if k.0 < 3 {
        return Err(CliError::Usage(format!("the ledger starts at k = 3, got {}", k.0)));
    }
    let m = FloquetModel::new(spec).map_err(compute)?;
    let left = build_ledger(&m, k.0, k.1, Side::Left).map_err(compute)?;
    let right = build_ledger(&m, k.0, k.1, Side::Right).map_err(compute)?;
    let minus = CrossingSequences::from_ledger(&left);
    let plus = CrossingSequences::from_ledger(&right);
    let report = theorem_bound(eps, &minus, &plus, varsigma).map_err(|e| match e {
        BoundsError::EpsTooLarge { .. } => compute(format!("K(eps) selector: {e}")),
        other => compute(format!("theorem_bound: {other}")),
    })?;
    print!("{}", report.key_values());
    println!("# K(eps) trace: side,k,ratio,threshold");
    let thr = eps.powf(1.0 / (1.0 + 2.0 * minus.alpha.max(plus.alpha)));
    for (name, seq) in [("minus", &minus), ("plus", &plus)] {
        for (i, r) in k_of_eps_trace(&seq.u_dist, &seq.tau, seq.alpha).iter().enumerate() {
            println!("{name},{},{},{}", seq.first_k + i as i64, sig15(*r), sig15(thr));
        }
    }
    if let Some(p) = out {
        let header: Vec<&str> = adiabatic_crossings::BoundReport64::CSV_HEADER.to_vec();
        emit_csv(Some(p), &header, &[report.csv_row()], &config)?;
    }
    Ok(())
}

fn exponent(alpha: Ratio<i64>, beta: Ratio<i64>, gamma: Ratio<i64>, delta: Ratio<i64>) -> CliResult {
    let config = json!({
        "command": "exponent",
        "alpha": alpha.to_string(), "beta": beta.to_string(),
        "gamma": gamma.to_string(), "delta": delta.to_string()
    });
    echo(&config);
    let zero = Ratio::from_integer(0);
    if alpha <= zero || beta <= zero || gamma < zero {
        return Err(CliError::Usage("need alpha > 0, beta > 0, gamma >= 0".into()));
    }
    print!("{}", exponent_p(alpha, beta, gamma, delta).key_values());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evolve(model: &ModelArgs, win: &WindowArgs, run: &RunArgs, eps: f64, out: Option<&Path>) -> CliResult {
    let base = load_config(model.config.as_deref())?;
    let spec = effective_spec(model, base.as_ref())?;
    let (a, b) = window(win, base.as_ref())?;
    let (integrator, metric) = run_settings(run, base.as_ref());
    let mut cfg = PropagationConfig::new(eps, a, b).with_integrator(integrator).with_uniform_checkpoints(21);
    cfg.metric = metric;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let config = json!({"command": "evolve", "spec": spec, "propagation": cfg});
    echo(&config);
    let m = FloquetModel::new(spec).map_err(compute)?;
    let r = adiabatic_error(&m, &cfg).map_err(compute)?;
    println!("eps={}", sig15(r.eps));
    println!("error={}", sig15(r.error()));
    println!("vector_deviation={}", sig15(r.error_vector_deviation));
    println!("transition_prob={}", sig15(r.transition_prob));
    println!("unitarity_drift={}", sig15(r.unitarity_drift));
    println!("intertwine_residual={}", sig15(r.intertwine_residual));
    println!("steps={}", r.steps);
    println!("leak={}", r.leak);
    if let Some(p) = out {
        export_checkpoints(&r.adiabatic_log, p).map_err(compute)?;
        write_sidecar(p, &config)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    model: &ModelArgs,
    win: &WindowArgs,
    run: &RunArgs,
    eps_min: Option<f64>,
    eps_max: Option<f64>,
    eps_points: Option<usize>,
    bound_overlay: bool,
    varsigma: Option<f64>,
    out: Option<&Path>,
) -> CliResult {
    let base = load_config(model.config.as_deref())?;
    let spec = effective_spec(model, base.as_ref())?;
    let mut cfg = base.clone().unwrap_or_else(|| SweepConfig::new(spec));
    cfg.spec = spec;
    cfg.s_window = window(win, base.as_ref())?;
    (cfg.integrator, cfg.metric) = run_settings(run, base.as_ref());
    if let Some(v) = eps_min {
        cfg.eps_grid.eps_min = v;
    }
    if let Some(v) = eps_max {
        cfg.eps_grid.eps_max = v;
    }
    if let Some(v) = eps_points {
        cfg.eps_grid.points = v;
    }
    cfg.bound_overlay |= bound_overlay;
    if varsigma.is_some() {
        cfg.varsigma = varsigma;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let config = serde_json::to_value(&cfg).map_err(compute)?;
    echo(&config);

    let result = run_sweep(&cfg).map_err(compute)?;
    let csv_path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.join("sweep.csv"));
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| compute(format!("{}: {e}", dir.display())))?;
    }
    export_csv(&result, &csv_path).map_err(compute)?;
    let svg_path = csv_path.with_extension("svg");
    render_svg(&result, &svg_path).map_err(|e: HarnessError| compute(e))?;
    write_sidecar(&csv_path, &config)?;

    for r in &result.rows {
        println!(
            "eps={} error={} transition_prob={} steps={} flags={}",
            sig15(r.eps),
            sig15(r.error),
            sig15(r.transition_prob),
            r.steps,
            r.flags.join(";")
        );
    }
    println!("fit_window=[{}, {}]", sig15(result.fit_window.0), sig15(result.fit_window.1));
    match (&result.fit, &result.fit_note) {
        (Some(f), _) => println!(
            "p_hat={} log_prefactor={} r_squared={} stderr_p={} n={}",
            sig15(f.p_hat),
            sig15(f.log_prefactor),
            sig15(f.r_squared),
            sig15(f.stderr_p),
            f.n
        ),
        (None, Some(note)) => println!("fit unavailable: {note}"),
        (None, None) => println!("fit unavailable"),
    }
    if let Some(c) = result.calibrated_c {
        println!("calibrated_C={} overlay_holds={}", sig15(c), result.overlay_holds().unwrap_or(false));
    }
    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

fn verify_cmd(model: &ModelArgs, win: &WindowArgs, eps: f64, k: (i64, i64)) -> CliResult {
    let base = load_config(model.config.as_deref())?;
    let spec = effective_spec(model, base.as_ref())?;
    let w = window(win, base.as_ref())?;
    let config = json!({"command": "verify", "spec": spec, "eps": eps, "s_window": [w.0, w.1], "k": [k.0, k.1]});
    echo(&config);
    if !(eps > 0.0) || k.0 < 3 {
        return Err(CliError::Usage("need --eps > 0 and --k starting at 3 or above".into()));
    }
    let opts = VerifyOptions { eps, window: w, ledger_k: k, ..Default::default() };
    let checks = verify(&spec, &opts).map_err(compute)?;
    let mut failed = Vec::new();
    for c in &checks {
        println!(
            "{} {} value={} tolerance={}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            sig15(c.value),
            sig15(c.tolerance)
        );
        if !c.passed {
            failed.push(c.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(compute(format!("failed checks: {}", failed.join(", "))))
    }
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Spectrum { model, window, samples, k, out } => spectrum(&model, &window, samples, k, out.as_deref()),
        Command::Crossings { model, k, side, out } => crossings(&model, k, &side, out.as_deref()),
        Command::Analyze { model, k, side, out } => analyze(&model, k, &side, out.as_deref()),
        Command::Bound { model, eps, k, varsigma, out } => bound(&model, eps, k, varsigma, out.as_deref()),
        Command::Exponent { alpha, beta, gamma, delta } => exponent(alpha, beta, gamma, delta),
        Command::Evolve { model, window, run, eps, out } => evolve(&model, &window, &run, eps, out.as_deref()),
        Command::Sweep { model, window, run, eps_min, eps_max, eps_points, bound_overlay, varsigma, out } => {
            sweep(&model, &window, &run, eps_min, eps_max, eps_points, bound_overlay, varsigma, out.as_deref())
        }
        Command::Verify { model, window, eps, k } => verify_cmd(&model, &window, eps, k),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
