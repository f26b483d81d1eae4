//! Epsilon sweeps, power-law fits, CSV/SVG export and the invariant suite.
//!
//! Everything here runs in `f64`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{theorem_bound, CrossingSequences};
use crate::evolve::{
    adiabatic_error, propagate_adiabatic, propagate_exact, EvolveError, Integrator, Metric, PropagationConfig,
    StepPolicy,
};
use crate::format::sig15;
use crate::linalg::{inner, op_norm, CMatrix};
use crate::model::{Branch, FloquetModel, ModelError, ModelSpec};
use crate::spectral::{build_ledger, gap, projector_and_l, reduced_commutator_rl, CrossingLedger, Side};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("power-law fit needs at least 4 positive points, got {0}")]
    DegenerateFit(usize),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: malformed CSV: {msg}")]
    Csv { path: String, msg: String },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

/// Geometric grid from `eps_max` down to `eps_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsGrid {
    pub eps_max: f64,
    pub eps_min: f64,
    pub points: usize,
}

impl Default for EpsGrid {
    fn default() -> Self {
        EpsGrid { eps_max: 1e-1, eps_min: 3e-3, points: 8 }
    }
}

impl EpsGrid {
    /// Values in descending order; the endpoints are exact.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let ratio = self.eps_min / self.eps_max;
        (0..n)
            .map(|j| match j {
                0 => self.eps_max,
                _ if j == n - 1 => self.eps_min,
                _ => self.eps_max * ratio.powf(j as f64 / (n - 1) as f64),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub spec: ModelSpec<f64>,
    #[serde(default)]
    pub eps_grid: EpsGrid,
    #[serde(default = "default_window")]
    pub s_window: (f64, f64),
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub bound_overlay: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Unused: the pipeline has no random component.
    #[serde(default)]
    pub seed: u64,
    /// Inclusive eps range entering the fit; defaults to the lower half of the grid.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_c_step")]
    pub c_step: f64,
    /// Largest crossing index in the ledgers behind the bound overlay.
    #[serde(default = "default_ledger_k_max")]
    pub ledger_k_max: i64,
    #[serde(default)]
    pub varsigma: Option<f64>,
}

fn default_window() -> (f64, f64) {
    (-0.45, 0.45)
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_c_step() -> f64 {
    0.1
}

fn default_ledger_k_max() -> i64 {
    40
}

/// First crossing index kept in overlay ledgers.
pub const LEDGER_K_MIN: i64 = 4;

impl SweepConfig {
    pub fn new(spec: ModelSpec<f64>) -> Self {
        SweepConfig {
            spec,
            eps_grid: EpsGrid::default(),
            s_window: default_window(),
            metric: Metric::default(),
            bound_overlay: false,
            output_dir: default_output_dir(),
            seed: 0,
            fit_window: None,
            integrator: Integrator::default(),
            c_step: default_c_step(),
            ledger_k_max: default_ledger_k_max(),
            varsigma: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        let g = &self.eps_grid;
        if !(g.eps_min > 0.0 && g.eps_min < g.eps_max) {
            return bad(format!("need 0 < eps_min < eps_max, got {} and {}", g.eps_min, g.eps_max));
        }
        if g.points < 4 {
            return bad(format!("need at least 4 grid points, got {}", g.points));
        }
        if !(self.s_window.0 < self.s_window.1) {
            return bad(format!("empty window ({}, {})", self.s_window.0, self.s_window.1));
        }
        if !(self.c_step > 0.0 && self.c_step <= 1.0) {
            return bad(format!("c_step must lie in (0, 1], got {}", self.c_step));
        }
        if let Some((lo, hi)) = self.fit_window {
            if !(lo > 0.0 && lo <= hi) {
                return bad(format!("fit window ({lo}, {hi}) is not a positive range"));
            }
        }
        if self.bound_overlay && self.ledger_k_max <= LEDGER_K_MIN {
            return bad(format!("ledger_k_max must exceed {LEDGER_K_MIN}"));
        }
        self.spec.validate()?;
        Ok(())
    }

    /// The configured fit window, or the lower half of the grid.
    pub fn effective_fit_window(&self) -> (f64, f64) {
        self.fit_window.unwrap_or_else(|| {
            let v = self.eps_grid.values();
            (v[v.len() - 1], v[v.len() / 2])
        })
    }

    pub fn propagation(&self, eps: f64) -> PropagationConfig<f64> {
        let mut cfg = PropagationConfig::new(eps, self.s_window.0, self.s_window.1)
            .with_integrator(self.integrator)
            .with_step(StepPolicy::Adaptive { c_step: self.c_step })
            .with_uniform_checkpoints(11);
        cfg.metric = self.metric;
        cfg
    }

    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.display().to_string(), source })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub error: f64,
    pub transition_prob: f64,
    pub bound_value: Option<f64>,
    pub k_minus: Option<usize>,
    pub k_plus: Option<usize>,
    pub steps: usize,
    pub wall_time: Option<f64>,
    pub flags: Vec<String>,
}

impl SweepRow {
    pub fn flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub p_hat: f64,
    pub log_prefactor: f64,
    pub r_squared: f64,
    pub stderr_p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub eps: f64,
    pub k_minus: usize,
    pub k_plus: usize,
    pub bound_value: f64,
    pub condition_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub fit: Option<PowerFit>,
    pub fit_window: (f64, f64),
    pub fit_note: Option<String>,
    pub bound_rows: Vec<BoundRow>,
    /// `error / bound_value` at the largest eps with both available.
    pub calibrated_c: Option<f64>,
}

impl SweepResult {
    /// Every row with a bound satisfies `error <= C bound`.
    pub fn overlay_holds(&self) -> Option<bool> {
        let c = self.calibrated_c?;
        Some(
            self.rows
                .iter()
                .filter_map(|r| r.bound_value.map(|b| (r.error, b)))
                .all(|(e, b)| e <= c * b * (1.0 + 1e-12)),
        )
    }
}

/// Ordinary least squares of `ln error` on `ln eps`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerFit, HarnessError> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(e, y)| *e > 0.0 && *y > 0.0).map(|(e, y)| (e.ln(), y.ln())).collect();
    let n = pts.len();
    if n < 4 || n < points.len() {
        return Err(HarnessError::DegenerateFit(n.min(points.len())));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::DegenerateFit(n));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let stderr_p = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(PowerFit { p_hat: slope, log_prefactor: intercept, r_squared, stderr_p, n })
}

fn overlay_ledgers(
    cfg: &SweepConfig,
    model: &FloquetModel<f64>,
) -> Result<(CrossingLedger<f64>, CrossingLedger<f64>), String> {
    let left = build_ledger(model, LEDGER_K_MIN, cfg.ledger_k_max, Side::Left).map_err(|e| e.to_string())?;
    let right = build_ledger(model, LEDGER_K_MIN, cfg.ledger_k_max, Side::Right).map_err(|e| e.to_string())?;
    Ok((left, right))
}

fn flag_text(msg: &str) -> String {
    msg.chars().map(|c| if c == ';' || c == ',' || c == '\n' { ' ' } else { c }).collect()
}

/// One adiabatic-error row per grid value, computed in parallel and returned in
/// descending eps order. Row failures become flags and leave the sweep running.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    let model = FloquetModel::new(cfg.spec)?;
    let grid = cfg.eps_grid.values();
    let ledgers = cfg.bound_overlay.then(|| overlay_ledgers(cfg, &model));

    let mut rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&eps| match adiabatic_error(&model, &cfg.propagation(eps)) {
            Ok(r) => {
                let mut flags = Vec::new();
                if r.leak {
                    flags.push("leak".to_string());
                }
                if r.tolerance_exceeded {
                    flags.push("tolerance".to_string());
                }
                SweepRow {
                    eps,
                    error: r.error(),
                    transition_prob: r.transition_prob,
                    bound_value: None,
                    k_minus: None,
                    k_plus: None,
                    steps: r.steps,
                    wall_time: r.wall_time,
                    flags,
                }
            }
            Err(e) => SweepRow {
                eps,
                error: f64::NAN,
                transition_prob: f64::NAN,
                bound_value: None,
                k_minus: None,
                k_plus: None,
                steps: 0,
                wall_time: None,
                flags: vec![format!("failed: {}", flag_text(&e.to_string()))],
            },
        })
        .collect();

    let mut bound_rows = Vec::new();
    match &ledgers {
        Some(Ok((left, right))) => {
            let minus = CrossingSequences::from_ledger(left);
            let plus = CrossingSequences::from_ledger(right);
            for row in rows.iter_mut() {
                match theorem_bound(row.eps, &minus, &plus, cfg.varsigma) {
                    Ok(b) => {
                        row.bound_value = Some(b.bound_value);
                        row.k_minus = Some(b.k_minus);
                        row.k_plus = Some(b.k_plus);
                        bound_rows.push(BoundRow {
                            eps: row.eps,
                            k_minus: b.k_minus,
                            k_plus: b.k_plus,
                            bound_value: b.bound_value,
                            condition_ok: b.condition_ok,
                        });
                    }
                    Err(e) => row.flags.push(format!("bound: {}", flag_text(&e.to_string()))),
                }
            }
        }
        Some(Err(e)) => {
            for row in rows.iter_mut() {
                row.flags.push(format!("bound: {}", flag_text(e)));
            }
        }
        None => {}
    }

    let calibrated_c = rows
        .iter()
        .find(|r| !r.flagged() && r.bound_value.is_some_and(|b| b > 0.0))
        .map(|r| r.error / r.bound_value.unwrap());

    let fit_window = cfg.effective_fit_window();
    let (lo, hi) = fit_window;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.flagged() && r.eps >= lo * (1.0 - 1e-12) && r.eps <= hi * (1.0 + 1e-12))
        .map(|r| (r.eps, r.error))
        .collect();
    let (fit, fit_note) = match fit_power_law(&pts) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(SweepResult { rows, fit, fit_window, fit_note, bound_rows, calibrated_c })
}

pub const CSV_HEADER: [&str; 9] =
    ["eps", "error", "transition_prob", "bound_value", "K_minus", "K_plus", "steps", "wall_time", "flags"];

fn opt_real(x: Option<f64>) -> String {
    x.map(sig15).unwrap_or_default()
}

pub fn write_csv(result: &SweepResult, out: impl std::io::Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &result.rows {
        w.write_record([
            sig15(r.eps),
            sig15(r.error),
            sig15(r.transition_prob),
            opt_real(r.bound_value),
            r.k_minus.map(|k| k.to_string()).unwrap_or_default(),
            r.k_plus.map(|k| k.to_string()).unwrap_or_default(),
            r.steps.to_string(),
            opt_real(r.wall_time),
            r.flags.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(result: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf)
        .map_err(|e| HarnessError::Csv { path: path.display().to_string(), msg: e.to_string() })?;
    std::fs::write(path, buf).map_err(io_err(path))
}

/// Parses a file written by [`export_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let bad = |msg: String| HarnessError::Csv { path: path.display().to_string(), msg };
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let real = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("'{s}': {e}")));
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { real(s).map(Some) };
    let int = |s: &str| {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<usize>().map(Some).map_err(|e| bad(format!("'{s}': {e}")))
        }
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        rows.push(SweepRow {
            eps: real(&rec[0])?,
            error: real(&rec[1])?,
            transition_prob: real(&rec[2])?,
            bound_value: opt(&rec[3])?,
            k_minus: int(&rec[4])?,
            k_plus: int(&rec[5])?,
            steps: int(&rec[6])?.unwrap_or(0),
            wall_time: opt(&rec[7])?,
            flags: if rec[8].is_empty() { Vec::new() } else { rec[8].split(';').map(str::to_string).collect() },
        });
    }
    Ok(rows)
}

/// Plot frame shared by the SVG writer and its tests.
#[derive(Debug, Clone, Copy)]
pub struct LogLogFrame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

pub const SVG_WIDTH: f64 = 640.0;
pub const SVG_HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

impl LogLogFrame {
    fn covering(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut f = LogLogFrame { x_min: f64::MAX, x_max: f64::MIN, y_min: f64::MAX, y_max: f64::MIN };
        for (x, y) in points.filter(|(x, y)| *x > 0.0 && *y > 0.0) {
            let (lx, ly) = (x.log10(), y.log10());
            f.x_min = f.x_min.min(lx);
            f.x_max = f.x_max.max(lx);
            f.y_min = f.y_min.min(ly);
            f.y_max = f.y_max.max(ly);
        }
        if f.x_min > f.x_max {
            f = LogLogFrame { x_min: -1.0, x_max: 0.0, y_min: -1.0, y_max: 0.0 };
        }
        let pad = |lo: f64, hi: f64| {
            if hi - lo < 1e-9 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo))
            }
        };
        (f.x_min, f.x_max) = pad(f.x_min, f.x_max);
        (f.y_min, f.y_max) = pad(f.y_min, f.y_max);
        f
    }

    /// Pixel coordinates of the data point `(x, y)`.
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = MARGIN + (x.log10() - self.x_min) / (self.x_max - self.x_min) * (SVG_WIDTH - 2.0 * MARGIN);
        let py =
            SVG_HEIGHT - MARGIN - (y.log10() - self.y_min) / (self.y_max - self.y_min) * (SVG_HEIGHT - 2.0 * MARGIN);
        (px, py)
    }
}

/// Log-log scatter of error against eps, with the fitted line over the fit
/// window and, when present, the calibrated bound.
pub fn render_svg_string(result: &SweepResult) -> String {
    let good: Vec<&SweepRow> = result.rows.iter().filter(|r| r.error.is_finite() && r.error > 0.0).collect();
    let overlay: Vec<(f64, f64)> = match result.calibrated_c {
        Some(c) => result.bound_rows.iter().map(|b| (b.eps, c * b.bound_value)).collect(),
        None => result.bound_rows.iter().map(|b| (b.eps, b.bound_value)).collect(),
    };
    let frame = LogLogFrame::covering(good.iter().map(|r| (r.eps, r.error)).chain(overlay.iter().copied()));

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#);
    let (x0, y0) = (MARGIN, SVG_HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path id="axes" d="M {x0} {} L {x0} {y0} L {} {y0}" stroke="black" fill="none"/>"#,
        MARGIN,
        SVG_WIDTH - MARGIN
    );
    for d in frame.x_min.ceil() as i32..=frame.x_max.floor() as i32 {
        let (px, _) = frame.map(10f64.powi(d), 1.0);
        let _ =
            writeln!(s, r#"<text x="{px:.3}" y="{:.3}" font-size="12" text-anchor="middle">1e{d}</text>"#, y0 + 18.0);
    }
    for d in frame.y_min.ceil() as i32..=frame.y_max.floor() as i32 {
        let (_, py) = frame.map(1.0, 10f64.powi(d));
        let _ = writeln!(s, r#"<text x="{:.3}" y="{py:.3}" font-size="12" text-anchor="end">1e{d}</text>"#, x0 - 6.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" font-size="14" text-anchor="middle">eps</text>"#,
        SVG_WIDTH / 2.0,
        SVG_HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.3}" font-size="14" transform="rotate(-90 15 {:.3})" text-anchor="middle">error</text>"#,
        SVG_HEIGHT / 2.0,
        SVG_HEIGHT / 2.0
    );

    let _ = writeln!(s, r#"<g id="points" fill="steelblue">"#);
    for r in &good {
        let (px, py) = frame.map(r.eps, r.error);
        let fill = if r.flagged() { r#" fill="orange""# } else { "" };
        let _ = writeln!(s, r#"<circle cx="{px:.6}" cy="{py:.6}" r="4"{fill}/>"#);
    }
    let _ = writeln!(s, "</g>");

    if let Some(fit) = result.fit.filter(|_| good.len() > 1) {
        let (lo, hi) = result.fit_window;
        let y = |e: f64| (fit.log_prefactor + fit.p_hat * e.ln()).exp();
        let (ax, ay) = frame.map(lo, y(lo));
        let (bx, by) = frame.map(hi, y(hi));
        let _ = writeln!(
            s,
            r#"<path id="fit" d="M {ax:.6} {ay:.6} L {bx:.6} {by:.6}" stroke="firebrick" stroke-width="1.5" fill="none"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" font-size="12">p = {:.4} (R2 = {:.4})</text>"#,
            MARGIN + 10.0,
            MARGIN + 10.0,
            fit.p_hat,
            fit.r_squared
        );
    }
    if !overlay.is_empty() {
        let mut d = String::new();
        for (i, (e, b)) in overlay.iter().filter(|(_, b)| *b > 0.0).enumerate() {
            let (px, py) = frame.map(*e, *b);
            let _ = write!(d, "{}{px:.6} {py:.6} ", if i == 0 { "M " } else { "L " });
        }
        let _ = writeln!(
            s,
            r#"<path id="bound" d="{}" stroke="seagreen" stroke-dasharray="6 4" fill="none"/>"#,
            d.trim_end()
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

pub fn render_svg(result: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, render_svg_string(result)).map_err(io_err(path))
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), passed: value.is_finite() && value <= tolerance, value, tolerance }
    }
}

/// Settings for [`verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Sample times for the pointwise identities.
    pub samples: Vec<f64>,
    pub eps: f64,
    pub window: (f64, f64),
    pub ledger_k: (i64, i64),
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: vec![-0.41, -0.27, -0.13, 0.07, 0.19, 0.33, 0.44],
            eps: 1e-2,
            window: (-0.45, 0.45),
            ledger_k: (4, 20),
        }
    }
}

/// Runs the invariant suite on one model.
pub fn verify(spec: &ModelSpec<f64>, opts: &VerifyOptions) -> Result<Vec<Check>, HarnessError> {
    let model = FloquetModel::new(*spec)?;
    let n = model.n_modes() as i64;
    let m_max = n;
    let mut herm = 0.0f64;
    let mut ladder = 0.0f64;
    let mut ortho = 0.0f64;
    let mut diag = 0.0f64;
    let mut comm = 0.0f64;
    let mut rl_excess = 0.0f64;
    for &s in &opts.samples {
        let k = model.assemble(s)?;
        herm = herm.max(k.hermiticity_residual());
        let vecs: Vec<_> = [(Branch::Plus, 0), (Branch::Minus, 0), (Branch::Plus, 1), (Branch::Minus, -1)]
            .iter()
            .map(|&(b, m)| model.exact_eigenvector(s, b, m))
            .collect::<Result<_, _>>()?;
        for e in &vecs {
            let resid = (&k.matrix * &e.vector - e.vector.scale(e.value)).norm();
            ladder = ladder.max(resid);
        }
        for (i, a) in vecs.iter().enumerate() {
            for (j, b) in vecs.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((inner(&a.vector, &b.vector) - want).norm());
            }
        }
        if gap(&model, s, m_max).value <= 1e-3 {
            continue;
        }
        let rc = match reduced_commutator_rl(&model, s, m_max) {
            Ok(rc) => rc,
            Err(_) => continue,
        };
        let pd = projector_and_l(&model, s)?;
        let q = CMatrix::identity(pd.p.nrows(), pd.p.ncols()) - &pd.p;
        let lnorm = op_norm(&pd.l);
        diag = diag.max(op_norm(&(&pd.p * &pd.l * &pd.p))).max(op_norm(&(&q * &pd.l * &q)));
        let lhs = &rc.rl * &rc.k - &rc.k * &rc.rl;
        let rhs = &pd.l * &pd.p - &pd.p * &pd.l;
        comm = comm.max(op_norm(&(lhs - rhs)) / lnorm.max(f64::MIN_POSITIVE));
        rl_excess = rl_excess.max(op_norm(&rc.rl) - 2.0 * lnorm / rc.gap);
    }
    let mut checks = vec![
        Check::at_most("hermiticity", herm, 1e-12),
        Check::at_most("ladder_eigenpairs", ladder, 1e-8),
        Check::at_most("orthonormality", ortho, 1e-10),
        Check::at_most("diagonal_blocks_of_l", diag, 1e-10),
        Check::at_most("rl_commutator", comm, 1e-8),
        Check::at_most("rl_norm_excess", rl_excess, 1e-12),
    ];

    let cfg = PropagationConfig::new(opts.eps, opts.window.0, opts.window.1).with_uniform_checkpoints(11);
    let psi0 = model.exact_eigenvector(opts.window.0, Branch::Plus, 0)?.vector;
    let (a, (u, u_fine)) = rayon::join(
        || propagate_adiabatic(&model, &cfg, &psi0),
        || {
            rayon::join(
                || propagate_exact(&model, &cfg, &psi0),
                || propagate_exact(&model, &cfg.clone().with_step(StepPolicy::Adaptive { c_step: 0.05 }), &psi0),
            )
        },
    );
    let (a, u, u_fine) = (a?, u?, u_fine?);
    checks.push(Check::at_most("intertwining", a.intertwine_residual.unwrap_or(f64::INFINITY), 1e-6));
    checks.push(Check::at_most("unitarity", a.unitarity_drift.max(u.unitarity_drift), 1e-8));
    checks.push(Check::at_most("self_convergence", (&u.psi - &u_fine.psi).norm(), 1e-6));

    let (k_lo, k_hi) = opts.ledger_k;
    for side in [Side::Left, Side::Right] {
        let name = if side == Side::Left { "left" } else { "right" };
        match build_ledger(&model, k_lo, k_hi, side) {
            Ok(l) => {
                checks.push(Check::at_most(&format!("h1_{name}"), l.h1_violations().len() as f64, 0.0));
                checks.push(Check::at_most(&format!("h2_{name}"), l.h2_violations().len() as f64, 0.0));
            }
            Err(_) => {
                checks.push(Check::at_most(&format!("h1_{name}"), f64::INFINITY, 0.0));
                checks.push(Check::at_most(&format!("h2_{name}"), f64::INFINITY, 0.0));
            }
        }
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn row(eps: f64, error: f64) -> SweepRow {
        SweepRow {
            eps,
            error,
            transition_prob: error * error,
            bound_value: None,
            k_minus: None,
            k_plus: None,
            steps: 10,
            wall_time: None,
            flags: Vec::new(),
        }
    }

    fn synthetic(f: impl Fn(f64) -> f64) -> SweepResult {
        let grid = EpsGrid::default().values();
        let rows: Vec<SweepRow> = grid.iter().map(|&e| row(e, f(e))).collect();
        let fit = fit_power_law(&rows.iter().map(|r| (r.eps, r.error)).collect::<Vec<_>>()).ok();
        SweepResult {
            fit_window: (grid[grid.len() - 1], grid[0]),
            rows,
            fit,
            fit_note: None,
            bound_rows: Vec::new(),
            calibrated_c: None,
        }
    }

    #[test]
    fn grid_is_geometric_and_descending() {
        let v = EpsGrid::default().values();
        assert_eq!(v.len(), 8);
        assert_eq!(v[0], 1e-1);
        assert_eq!(v[7], 3e-3);
        for w in v.windows(3) {
            assert!(w[0] > w[1]);
            assert!((w[0] / w[1] - w[1] / w[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_exact_power_laws() {
        let lin: Vec<(f64, f64)> = EpsGrid::default().values().iter().map(|&e| (e, e)).collect();
        let f = fit_power_law(&lin).unwrap();
        assert!((f.p_hat - 1.0).abs() < 1e-12);
        assert!(f.log_prefactor.abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);

        let cube: Vec<(f64, f64)> = EpsGrid::default().values().iter().map(|&e| (e, 3.0 * e.powf(1.0 / 3.0))).collect();
        let f = fit_power_law(&cube).unwrap();
        assert!((f.p_hat - 1.0 / 3.0).abs() <= 1e-12 / 3.0);
        assert!((f.log_prefactor - 3f64.ln()).abs() <= 1e-12 * 3f64.ln());
    }

    #[test]
    fn fit_with_seeded_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = EpsGrid::default()
            .values()
            .iter()
            .map(|&e| (e, e.powf(1.0 / 3.0) * (1.0 + 0.01 * rng.random_range(-1.0..1.0))))
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.p_hat - 1.0 / 3.0).abs() <= 0.02);
        assert!(f.stderr_p < 0.02);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(fit_power_law(&[(0.1, 1.0), (0.01, 0.5), (0.001, 0.2)]).is_err());
        assert!(fit_power_law(&[(0.1, 1.0), (0.01, 0.0), (0.001, 0.2), (1e-4, 0.1)]).is_err());
    }

    #[test]
    fn csv_round_trip_and_flags() {
        let mut res = synthetic(|e| 0.7 * e.powf(0.41));
        res.rows[2].flags = vec!["leak".into()];
        res.rows[3].bound_value = Some(1.234_567_890_123_456_7);
        res.rows[3].k_minus = Some(5);
        res.rows[3].k_plus = Some(6);
        res.rows[4].wall_time = Some(0.25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        export_csv(&res, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("eps,error,transition_prob,bound_value,K_minus,K_plus,steps,wall_time,flags\n"));
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), res.rows.len());
        for (a, b) in back.iter().zip(&res.rows) {
            assert_eq!(a.eps, crate::format::round_sig15(b.eps));
            assert_eq!(a.error, crate::format::round_sig15(b.error));
            assert_eq!(a.transition_prob, crate::format::round_sig15(b.transition_prob));
            assert_eq!(a.bound_value, b.bound_value.map(crate::format::round_sig15));
            assert_eq!((a.k_minus, a.k_plus, a.steps), (b.k_minus, b.k_plus, b.steps));
            assert_eq!(a.flags, b.flags);
        }
        assert!(back[2].flags.contains(&"leak".to_string()));
    }

    #[test]
    fn empty_result_is_header_only() {
        let res = SweepResult {
            rows: Vec::new(),
            fit: None,
            fit_window: (0.0, 0.0),
            fit_note: None,
            bound_rows: Vec::new(),
            calibrated_c: None,
        };
        let mut buf = Vec::new();
        write_csv(&res, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    fn path_coords(svg: &str, id: &str) -> Vec<(f64, f64)> {
        let tag = format!(r#"id="{id}" d=""#);
        let Some(start) = svg.find(&tag) else { return Vec::new() };
        let rest = &svg[start + tag.len()..];
        let d = &rest[..rest.find('"').unwrap()];
        let nums: Vec<f64> = d.split_whitespace().filter_map(|t| t.parse().ok()).collect();
        nums.chunks(2).map(|c| (c[0], c[1])).collect()
    }

    fn circles(svg: &str) -> Vec<(f64, f64)> {
        svg.lines()
            .filter(|l| l.starts_with("<circle"))
            .map(|l| {
                let get = |k: &str| {
                    let i = l.find(k).unwrap() + k.len();
                    l[i..i + l[i..].find('"').unwrap()].parse::<f64>().unwrap()
                };
                (get("cx=\""), get("cy=\""))
            })
            .collect()
    }

    #[test]
    fn svg_fit_line_passes_through_exact_power_law() {
        let res = synthetic(|e| 2.0 * e.powf(0.5));
        let svg = render_svg_string(&res);
        assert!(svg.contains(r#"version="1.1""#));
        let line = path_coords(&svg, "fit");
        assert_eq!(line.len(), 2);
        let (a, b) = (line[0], line[1]);
        for (x, y) in circles(&svg) {
            let t = (x - a.0) / (b.0 - a.0);
            assert!((a.1 + t * (b.1 - a.1) - y).abs() < 1e-4);
        }
        assert!(!svg.contains(r#"id="bound""#));
    }

    #[test]
    fn svg_single_row_has_no_fit_and_overlay_iff_bounds() {
        let mut res = synthetic(|e| e);
        res.rows.truncate(1);
        let svg = render_svg_string(&res);
        assert_eq!(circles(&svg).len(), 1);
        assert!(!svg.contains(r#"id="fit""#));

        let mut res = synthetic(|e| e);
        res.bound_rows = res
            .rows
            .iter()
            .map(|r| BoundRow { eps: r.eps, k_minus: 4, k_plus: 4, bound_value: r.eps.sqrt(), condition_ok: true })
            .collect();
        let svg = render_svg_string(&res);
        assert_eq!(path_coords(&svg, "bound").len(), res.rows.len());
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let mut cfg = SweepConfig::new(ModelSpec::modified(1.0, 1.0, 1.0, 16));
        cfg.bound_overlay = true;
        cfg.fit_window = Some((3e-3, 2e-2));
        let back: SweepConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let minimal: SweepConfig =
            serde_json::from_str(r#"{"spec": {"omega0": 1.0, "Omega": 1.0, "kind": "rwa", "n_modes": 8}}"#).unwrap();
        assert_eq!(minimal.eps_grid, EpsGrid::default());
        assert_eq!(minimal.s_window, (-0.45, 0.45));
        let mut bad = cfg.clone();
        bad.eps_grid.points = 3;
        assert!(bad.validate().is_err());
        bad = cfg.clone();
        bad.eps_grid.eps_min = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn small_sweep_is_deterministic_and_monotone() {
        let mut cfg = SweepConfig::new(ModelSpec::rwa(1.0, 1.0, 6));
        cfg.eps_grid = EpsGrid { eps_max: 1e-1, eps_min: 2e-2, points: 4 };
        cfg.s_window = (-0.3, 0.3);
        cfg.fit_window = Some((2e-2, 1e-1));
        cfg.bound_overlay = true;
        cfg.ledger_k_max = 12;
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_csv(&a, &mut ca).unwrap();
        write_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
        assert!(a.rows.windows(2).all(|w| w[0].eps > w[1].eps));
        assert!(a.rows.windows(2).all(|w| w[1].error <= 1.5 * w[0].error));
        assert!(a.fit.is_some());
        assert_eq!(a.bound_rows.len(), 4);
        assert!(a.calibrated_c.is_some());
    }

    #[test]
    fn verify_suite_passes_on_both_presets() {
        let opts = VerifyOptions { window: (-0.3, 0.3), ledger_k: (4, 10), ..Default::default() };
        for spec in [ModelSpec::rwa(1.0, 1.0, 10), ModelSpec::modified(1.0, 1.0, 1.0, 12)] {
            let checks = verify(&spec, &opts).unwrap();
            for c in &checks {
                assert!(c.passed, "{}: {} > {}", c.name, c.value, c.tolerance);
            }
            assert!(checks.len() >= 13);
        }
    }
}
