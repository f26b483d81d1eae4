//! Exact and adiabatic propagation on the truncated Floquet basis.
//!
//! The exact state solves `i eps psi' = K(s) psi`, the adiabatic one
//! `i eps psi' = (K(s) + eps L(s)) psi` with `L = i[P', P]` applied
//! matrix-free. Both runs of a comparison share the same step grid, so the
//! only difference between them is the generator.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::bounds::{lemma21_bound, optimal_offset, BoundsError};
use crate::format::sig15;
use crate::linalg::{inner, op_norm, vec_norm, CMatrix, CVector};
use crate::model::{Branch, FloquetModel, ModelError};
use crate::spectral::{gap, ladder_gap, CrossingRecord, RankOneGenerator};
use crate::{cabs, lit, polar, to_f64, Real};

#[derive(Debug, thiserror::Error)]
pub enum EvolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("invalid propagation config: {0}")]
    InvalidConfig(String),
    #[error("initial state has dimension {got}, model needs {want}")]
    Dimension { got: usize, want: usize },
    #[error("integration failed near s = {s}: {msg}")]
    StepFailure { s: f64, msg: String },
    #[error("i/o error writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    #[default]
    ExpMidpoint,
}

impl std::str::FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rk4" => Ok(Integrator::Rk4),
            "exp_midpoint" => Ok(Integrator::ExpMidpoint),
            other => Err(format!("unknown integrator '{other}' (expected rk4 or exp-midpoint)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    VectorDeviation,
    TransitionProbability,
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "deviation" | "vector_deviation" => Ok(Metric::VectorDeviation),
            "transition" | "transition_probability" => Ok(Metric::TransitionProbability),
            other => Err(format!("unknown metric '{other}' (expected deviation or transition)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepPolicy<T> {
    Fixed {
        h: T,
    },
    /// `h = c_step * eps / ||K||_est`.
    Adaptive {
        c_step: T,
    },
}

impl<T: Real> Default for StepPolicy<T> {
    fn default() -> Self {
        StepPolicy::Adaptive { c_step: lit(0.1) }
    }
}

/// Which generator drives the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    Exact,
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Real"))]
pub struct PropagationConfig<T> {
    pub eps: T,
    pub s_start: T,
    pub s_end: T,
    #[serde(default)]
    pub step: StepPolicy<T>,
    #[serde(default)]
    pub integrator: Integrator,
    /// Slow times at which the state is logged. The endpoints are always logged.
    #[serde(default)]
    pub checkpoints: Vec<T>,
    #[serde(default)]
    pub metric: Metric,
    /// Step in the frame rotating with `diag(m varpi)`. The midpoint rule has a
    /// larger error constant there; pair it with `c_step <= 0.025`.
    #[serde(default)]
    pub interaction_picture: bool,
    #[serde(default = "default_unitarity_tol")]
    pub unitarity_tol: T,
    /// Drop `eps L` from the adiabatic generator.
    #[serde(default)]
    pub zero_l: bool,
    /// Record wall-clock time. Off by default so outputs are reproducible.
    #[serde(default)]
    pub timing: bool,
}

fn default_unitarity_tol<T: Real>() -> T {
    lit(1e-8)
}

/// Edge-mode population above which a run is flagged as leaking.
pub const LEAK_THRESHOLD: f64 = 1e-6;

impl<T: Real> PropagationConfig<T> {
    pub fn new(eps: T, s_start: T, s_end: T) -> Self {
        PropagationConfig {
            eps,
            s_start,
            s_end,
            step: StepPolicy::default(),
            integrator: Integrator::default(),
            checkpoints: Vec::new(),
            metric: Metric::default(),
            interaction_picture: false,
            unitarity_tol: default_unitarity_tol(),
            zero_l: false,
            timing: false,
        }
    }

    /// `n` equally spaced checkpoints including both endpoints.
    pub fn with_uniform_checkpoints(mut self, n: usize) -> Self {
        let n = n.max(2);
        let span = self.s_end - self.s_start;
        self.checkpoints =
            (0..n).map(|j| self.s_start + span * lit::<T>(j as f64) / lit::<T>((n - 1) as f64)).collect();
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_step(mut self, step: StepPolicy<T>) -> Self {
        self.step = step;
        self
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: String| Err(EvolveError::InvalidConfig(m));
        if !(self.eps > T::zero()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.s_start < self.s_end) {
            return bad(format!("need s_start < s_end, got {} and {}", self.s_start, self.s_end));
        }
        match self.step {
            StepPolicy::Fixed { h } if !(h > T::zero()) => return bad(format!("fixed step must be positive, got {h}")),
            StepPolicy::Adaptive { c_step } if !(c_step > T::zero() && c_step <= T::one()) => {
                return bad(format!("c_step must lie in (0, 1], got {c_step}"))
            }
            _ => {}
        }
        if !(self.unitarity_tol > T::zero()) {
            return bad("unitarity_tol must be positive".into());
        }
        if let Some(c) = self.checkpoints.iter().find(|&&c| c < self.s_start || c > self.s_end) {
            return bad(format!("checkpoint {c} outside [{}, {}]", self.s_start, self.s_end));
        }
        Ok(())
    }

    /// `N max|varpi| + omega0 + Omega (1 + max rho)` over the window.
    pub fn opnorm_estimate(&self, model: &FloquetModel<T>) -> T {
        let spec = model.spec();
        let n = lit::<T>(model.n_modes() as f64);
        let w = model.varpi(self.s_start).abs().max(model.varpi(self.s_end).abs());
        let rho = spec.rho_at(self.s_start).abs().max(spec.rho_at(self.s_end).abs());
        n * w + spec.omega0.abs() + spec.omega_rabi.abs() * (T::one() + rho)
    }

    pub fn nominal_step(&self, model: &FloquetModel<T>) -> T {
        match self.step {
            StepPolicy::Fixed { h } => h,
            StepPolicy::Adaptive { c_step } => c_step * self.eps / self.opnorm_estimate(model),
        }
    }

    /// Logged times in integration order, endpoints included.
    fn knots(&self, direction: Direction) -> Vec<T> {
        let mut knots = vec![self.s_start, self.s_end];
        knots.extend(self.checkpoints.iter().copied());
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        knots.dedup();
        if direction == Direction::Backward {
            knots.reverse();
        }
        knots
    }
}

/// One logged state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointRow<T> {
    pub s: T,
    pub norm: T,
    pub gap: T,
    /// `||(1 - P(s)) psi(s)||`.
    pub intertwine_residual: T,
    pub pop_edge_modes: T,
}

pub const CHECKPOINT_HEADER: [&str; 5] = ["s", "norm", "gap", "intertwine_residual", "pop_edge_modes"];

pub fn write_checkpoints<T: Real>(rows: &[CheckpointRow<T>], out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CHECKPOINT_HEADER)?;
    for r in rows {
        w.write_record([
            sig15(to_f64(r.s)),
            sig15(to_f64(r.norm)),
            sig15(to_f64(r.gap)),
            sig15(to_f64(r.intertwine_residual)),
            sig15(to_f64(r.pop_edge_modes)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_checkpoints<T: Real>(rows: &[CheckpointRow<T>], path: &Path) -> Result<(), EvolveError> {
    let io = |source| EvolveError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::create(path).map_err(io)?;
    write_checkpoints(rows, std::io::BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => io(source),
        other => io(std::io::Error::other(format!("{other:?}"))),
    })
}

/// A single propagated state with its diagnostics.
#[derive(Debug, Clone)]
pub struct Propagation<T: Real> {
    pub dynamics: Dynamics,
    pub psi: CVector<T>,
    pub steps: usize,
    /// `max |‖psi‖ - 1|` over the checkpoints.
    pub unitarity_drift: T,
    /// Max of `||(1 - P) psi||` over the checkpoints; present only when the
    /// initial state lies in the range of `P`.
    pub intertwine_residual: Option<T>,
    pub max_edge_population: T,
    pub leak: bool,
    pub tolerance_exceeded: bool,
    pub checkpoints: Vec<CheckpointRow<T>>,
    pub wall_time: Option<f64>,
}

/// The matrix-free generator at one slow time, possibly in the rotating frame.
struct Frame<T: Real> {
    k: CMatrix<T>,
    l: Option<RankOneGenerator<T>>,
    eps: T,
    /// `diag(m varpi)` and the frame phases `e^{-i m Phi / eps}`.
    rotation: Option<(Vec<T>, Vec<Complex<T>>)>,
    bound: T,
}

impl<T: Real> Frame<T> {
    fn apply(&self, x: &CVector<T>) -> CVector<T> {
        match &self.rotation {
            None => self.apply_lab(x),
            Some((w, d)) => {
                let dx = CVector::from_iterator(x.len(), x.iter().zip(d).map(|(a, b)| a * b));
                let mut y = self.apply_lab(&dx);
                for i in 0..y.len() {
                    y[i] = (y[i] - dx[i].scale(w[i])) * d[i].conj();
                }
                y
            }
        }
    }

    fn apply_lab(&self, x: &CVector<T>) -> CVector<T> {
        let mut y = &self.k * x;
        if let Some(l) = &self.l {
            y += l.apply(x).scale(self.eps);
        }
        y
    }
}

struct Stepper<'a, T: Real> {
    model: &'a FloquetModel<T>,
    cfg: &'a PropagationConfig<T>,
    with_l: bool,
    modes: Vec<T>,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(model: &'a FloquetModel<T>, cfg: &'a PropagationConfig<T>, dynamics: Dynamics) -> Self {
        let modes = (0..model.dim()).map(|i| lit(model.mode_of(i) as f64)).collect();
        let with_l = dynamics == Dynamics::Adiabatic && !cfg.zero_l;
        Stepper { model, cfg, with_l, modes }
    }

    fn phases(&self, s: T) -> Vec<Complex<T>> {
        let phi = self.model.spec().chirp.integral(s) / self.cfg.eps;
        self.modes.iter().map(|&m| polar(T::one(), -(m * phi))).collect()
    }

    fn frame(&self, s: T) -> Result<Frame<T>, EvolveError> {
        let k = self.model.assemble(s)?.matrix;
        let l = if self.with_l { Some(RankOneGenerator::at(self.model, s)?) } else { None };
        let mut bound = (0..k.nrows())
            .map(|r| k.row(r).iter().fold(T::zero(), |acc, z| acc + cabs(*z)))
            .fold(T::zero(), |a, b| a.max(b));
        if let Some(l) = &l {
            bound += lit::<T>(2.0) * self.cfg.eps * vec_norm(&l.dpsi);
        }
        let rotation = if self.cfg.interaction_picture {
            let w = self.model.varpi(s);
            let diag: Vec<T> = self.modes.iter().map(|&m| m * w).collect();
            bound += diag.iter().fold(T::zero(), |a, b| a.max(b.abs()));
            Some((diag, self.phases(s)))
        } else {
            None
        };
        Ok(Frame { k, l, eps: self.cfg.eps, rotation, bound })
    }

    fn enter_frame(&self, s: T, psi: &CVector<T>) -> CVector<T> {
        if !self.cfg.interaction_picture {
            return psi.clone();
        }
        let d = self.phases(s);
        CVector::from_iterator(psi.len(), psi.iter().zip(&d).map(|(a, b)| a * b.conj()))
    }

    fn leave_frame(&self, s: T, phi: &CVector<T>) -> CVector<T> {
        if !self.cfg.interaction_picture {
            return phi.clone();
        }
        let d = self.phases(s);
        CVector::from_iterator(phi.len(), phi.iter().zip(&d).map(|(a, b)| a * b))
    }

    /// `x -> (-i/eps) G x`.
    fn rhs(&self, frame: &Frame<T>, x: &CVector<T>) -> CVector<T> {
        let c = Complex::new(T::zero(), -T::one() / self.cfg.eps);
        frame.apply(x) * c
    }

    fn step(&self, s: T, h: T, x: &CVector<T>) -> Result<CVector<T>, EvolveError> {
        let two = lit::<T>(2.0);
        let next = match self.cfg.integrator {
            Integrator::ExpMidpoint => {
                let frame = self.frame(s + h / two)?;
                expm_action(&frame, h / self.cfg.eps, x)
            }
            Integrator::Rk4 => {
                let f0 = self.frame(s)?;
                let fm = self.frame(s + h / two)?;
                let f1 = self.frame(s + h)?;
                let hc = Complex::new(h, T::zero());
                let half = Complex::new(h / two, T::zero());
                let k1 = self.rhs(&f0, x);
                let k2 = self.rhs(&fm, &(x + &k1 * half));
                let k3 = self.rhs(&fm, &(x + &k2 * half));
                let k4 = self.rhs(&f1, &(x + &k3 * hc));
                let sixth = Complex::new(h / lit(6.0), T::zero());
                x + (k1 + k2.scale(two) + k3.scale(two) + k4) * sixth
            }
        };
        if next.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(EvolveError::StepFailure { s: to_f64(s), msg: "non-finite state".into() });
        }
        Ok(next)
    }
}

/// `exp(-i tau G) x` by a Taylor series on substeps with `tau ||G|| <= 1/2`.
fn expm_action<T: Real>(frame: &Frame<T>, tau: T, x: &CVector<T>) -> CVector<T> {
    let half = lit::<T>(0.5);
    let sub = to_f64((tau.abs() * frame.bound / half).ceil()).max(1.0) as usize;
    let dt = tau / lit(sub as f64);
    let tol = T::default_epsilon();
    let mut out = x.clone();
    for _ in 0..sub {
        let mut term = out.clone();
        let mut sum = out.clone();
        for j in 1..=60 {
            let c = Complex::new(T::zero(), -dt / lit(j as f64));
            term = frame.apply(&term) * c;
            sum += &term;
            if vec_norm(&term) <= tol * vec_norm(&sum) {
                break;
            }
        }
        out = sum;
    }
    out
}

fn edge_population<T: Real>(model: &FloquetModel<T>, psi: &CVector<T>) -> T {
    let edge = model.n_modes() as i64 - 1;
    psi.iter()
        .enumerate()
        .filter(|(i, _)| model.mode_of(*i).abs() >= edge)
        .fold(T::zero(), |acc, (_, z)| acc + z.norm_sqr())
}

/// `||(1 - P(s)) psi||` for `P = |psi_{+,0}(s)><psi_{+,0}(s)|`.
pub fn off_range_norm<T: Real>(model: &FloquetModel<T>, s: T, psi: &CVector<T>) -> Result<T, ModelError> {
    let e = model.exact_eigenvector(s, Branch::Plus, 0)?;
    let ov = inner(&e.vector, psi);
    Ok(vec_norm(&(psi - e.vector * ov)))
}

/// Range-of-`P` membership tolerance for the initial state.
const IN_RANGE_TOL: f64 = 1e-10;

/// Integrates one state through the configured window.
pub fn propagate<T: Real>(
    model: &FloquetModel<T>,
    cfg: &PropagationConfig<T>,
    psi0: &CVector<T>,
    dynamics: Dynamics,
    direction: Direction,
) -> Result<Propagation<T>, EvolveError> {
    cfg.validate()?;
    if psi0.len() != model.dim() {
        return Err(EvolveError::Dimension { got: psi0.len(), want: model.dim() });
    }
    let started = cfg.timing.then(Instant::now);
    let stepper = Stepper::new(model, cfg, dynamics);
    let knots = cfg.knots(direction);
    let h_nom = cfg.nominal_step(model);
    let m_max = model.n_modes() as i64;

    let track = to_f64(off_range_norm(model, knots[0], psi0)?) < IN_RANGE_TOL;
    let mut rows = Vec::with_capacity(knots.len());
    let mut log = |s: T, psi: &CVector<T>| -> Result<(), EvolveError> {
        rows.push(CheckpointRow {
            s,
            norm: vec_norm(psi),
            gap: gap(model, s, m_max).value,
            intertwine_residual: off_range_norm(model, s, psi)?,
            pop_edge_modes: edge_population(model, psi),
        });
        Ok(())
    };

    log(knots[0], psi0)?;
    let mut phi = stepper.enter_frame(knots[0], psi0);
    let mut steps = 0usize;
    for pair in knots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let n = to_f64(((b - a).abs() / h_nom).ceil()).max(1.0) as usize;
        let h = (b - a) / lit(n as f64);
        for j in 0..n {
            let s = a + h * lit(j as f64);
            phi = stepper.step(s, h, &phi)?;
        }
        steps += n;
        log(b, &stepper.leave_frame(b, &phi))?;
    }
    let psi = stepper.leave_frame(*knots.last().expect("two knots"), &phi);

    let unitarity_drift = rows.iter().map(|r| (r.norm - T::one()).abs()).fold(T::zero(), |a, b| a.max(b));
    let max_edge_population = rows.iter().map(|r| r.pop_edge_modes).fold(T::zero(), |a, b| a.max(b));
    let intertwine_residual =
        track.then(|| rows.iter().map(|r| r.intertwine_residual).fold(T::zero(), |a, b| a.max(b)));
    Ok(Propagation {
        dynamics,
        psi,
        steps,
        unitarity_drift,
        intertwine_residual,
        max_edge_population,
        leak: to_f64(max_edge_population) > LEAK_THRESHOLD,
        tolerance_exceeded: unitarity_drift > cfg.unitarity_tol,
        checkpoints: rows,
        wall_time: started.map(|t| t.elapsed().as_secs_f64()),
    })
}

/// `i eps psi' = K(s) psi` from `s_start` to `s_end`.
pub fn propagate_exact<T: Real>(
    model: &FloquetModel<T>,
    cfg: &PropagationConfig<T>,
    psi0: &CVector<T>,
) -> Result<Propagation<T>, EvolveError> {
    propagate(model, cfg, psi0, Dynamics::Exact, Direction::Forward)
}

/// `i eps psi' = (K(s) + eps L(s)) psi` from `s_start` to `s_end`.
pub fn propagate_adiabatic<T: Real>(
    model: &FloquetModel<T>,
    cfg: &PropagationConfig<T>,
    psi0: &CVector<T>,
) -> Result<Propagation<T>, EvolveError> {
    propagate(model, cfg, psi0, Dynamics::Adiabatic, Direction::Forward)
}

/// Exact and adiabatic evolutions of `psi_{+,0}(s_start)` and their comparison.
#[derive(Debug, Clone)]
pub struct EvolutionResult<T: Real> {
    pub eps: T,
    pub psi_u: CVector<T>,
    pub psi_a: CVector<T>,
    pub unitarity_drift: T,
    pub intertwine_residual: T,
    /// `||psi_U - psi_A||`.
    pub error_vector_deviation: T,
    /// `1 - |<psi_{+,0}(s_end), psi_U>|^2`.
    pub transition_prob: T,
    pub steps: usize,
    pub wall_time: Option<f64>,
    pub leak: bool,
    pub tolerance_exceeded: bool,
    pub metric: Metric,
    pub exact_log: Vec<CheckpointRow<T>>,
    pub adiabatic_log: Vec<CheckpointRow<T>>,
}

impl<T: Real> EvolutionResult<T> {
    /// The error selected by the configured metric.
    pub fn error(&self) -> T {
        match self.metric {
            Metric::VectorDeviation => self.error_vector_deviation,
            Metric::TransitionProbability => self.transition_prob,
        }
    }
}

/// Runs both propagations of `psi_{+,0}(s_start)` concurrently and compares them.
pub fn adiabatic_error<T: Real>(
    model: &FloquetModel<T>,
    cfg: &PropagationConfig<T>,
) -> Result<EvolutionResult<T>, EvolveError> {
    cfg.validate()?;
    let started = cfg.timing.then(Instant::now);
    let psi0 = model.exact_eigenvector(cfg.s_start, Branch::Plus, 0)?.vector;
    let (u, a) = rayon::join(|| propagate_exact(model, cfg, &psi0), || propagate_adiabatic(model, cfg, &psi0));
    let (u, a) = (u?, a?);
    let target = model.exact_eigenvector(cfg.s_end, Branch::Plus, 0)?.vector;
    let tp = T::one() - inner(&target, &u.psi).norm_sqr();
    Ok(EvolutionResult {
        eps: cfg.eps,
        error_vector_deviation: vec_norm(&(&u.psi - &a.psi)),
        transition_prob: tp.max(T::zero()),
        unitarity_drift: u.unitarity_drift.max(a.unitarity_drift),
        intertwine_residual: a.intertwine_residual.unwrap_or(T::zero()),
        steps: u.steps,
        wall_time: started.map(|t| t.elapsed().as_secs_f64()),
        leak: u.leak || a.leak,
        tolerance_exceeded: u.tolerance_exceeded || a.tolerance_exceeded,
        metric: cfg.metric,
        psi_u: u.psi,
        psi_a: a.psi,
        exact_log: u.checkpoints,
        adiabatic_log: a.checkpoints,
    })
}

/// `||U(s_end) - A(s_end)||` over the whole truncated space. Intended for small
/// truncations: it propagates every basis vector twice.
pub fn operator_error<T: Real>(model: &FloquetModel<T>, cfg: &PropagationConfig<T>) -> Result<T, EvolveError> {
    use rayon::prelude::*;
    cfg.validate()?;
    let mut quiet = cfg.clone();
    quiet.checkpoints.clear();
    let n = model.dim();
    let cols: Vec<CVector<T>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = CVector::<T>::zeros(n);
            e[j] = Complex::new(T::one(), T::zero());
            let u = propagate_exact(model, &quiet, &e)?;
            let a = propagate_adiabatic(model, &quiet, &e)?;
            Ok(u.psi - a.psi)
        })
        .collect::<Result<_, EvolveError>>()?;
    Ok(op_norm(&CMatrix::from_columns(&cols)))
}

/// Measured change of `W = A^{-1} U` across one partition interval against the
/// single-crossing bound with unit constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WJump<T> {
    pub k: i64,
    pub measured_jump: T,
    pub lemma_bound: T,
    pub fitted_c: T,
    pub u0: T,
    pub t: T,
    pub s: T,
    pub u1: T,
}

/// Propagates from the earlier to the later end of `[u_k, u_{k-1}]` (in slow
/// time) starting from `psi0`, default `psi_{+,0}` there. With `W` anchored
/// at the start, `||(W(u1) - W(u0)) psi0|| = ||(U - A) psi0||`.
pub fn w_jump_across_crossing<T: Real>(
    model: &FloquetModel<T>,
    base: &PropagationConfig<T>,
    record: &CrossingRecord<T>,
    psi0: Option<&CVector<T>>,
) -> Result<WJump<T>, EvolveError> {
    let (u0, u1) = if record.u_k < record.u_km1 { (record.u_k, record.u_km1) } else { (record.u_km1, record.u_k) };
    let mut cfg = base.clone();
    cfg.s_start = u0;
    cfg.s_end = u1;
    cfg.checkpoints.clear();
    let start = match psi0 {
        Some(p) => p.clone(),
        None => model.exact_eigenvector(u0, Branch::Plus, 0)?.vector,
    };
    let (u, a) = rayon::join(|| propagate_exact(model, &cfg, &start), || propagate_adiabatic(model, &cfg, &start));
    let measured = vec_norm(&(u?.psi - a?.psi));

    let offset = optimal_offset(cfg.eps, record.tau_k, T::one(), record.alpha_hat);
    let t = (record.z_k - offset).max(u0);
    let s = (record.z_k + offset).min(u1);
    let bound = lemma21_bound(cfg.eps, T::one(), u0, t, s, u1, ladder_gap(model, t), ladder_gap(model, s))?;
    Ok(WJump { k: record.k, measured_jump: measured, lemma_bound: bound, fitted_c: measured / bound, u0, t, s, u1 })
}
