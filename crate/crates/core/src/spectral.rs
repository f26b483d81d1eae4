//! Crossing geometry, the gap function, the crossing ledger and the
//! projector-derived operators `P`, `L = i[P', P]` and `R_L`.
//!
//! Crossings are indexed by `aleph(s) = k s` (`k >= 2`): at `z_k` the followed
//! level `(+,0)` meets `(-,k)` on the right of the accumulation point `s = 0`.
//! The left side is handled by the mirror `s = -t`, under which the model maps
//! to `omega0 -> -omega0`; the crossing partner there is `(-, 2-k)`.
//! Partition points solve `aleph(u_k) = (k + 1/2) u_k`.
//!
//! All crossing routines assume the identity chirp `varpi(s) = s`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::sig15;
use crate::linalg::{hermitian_eigen, inner, outer, CMatrix, CVector};
use crate::model::{Branch, FloquetModel, ModelError};
use crate::roots::{bisect_newton, expand_bracket, RootError};
use crate::{cabs, lit, to_f64, Complex, Real};

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no crossing root for k = {k} on the {side} side: f_k has no sign change")]
    NoRoot { k: i64, side: Side },
    #[error("crossing index k = {0} below 2")]
    InvalidIndex(i64),
    #[error("crossing analysis needs the identity chirp")]
    UnsupportedChirp,
    #[error("root finder: {0}")]
    Root(#[from] RootError),
    #[error("degenerate power fit for k = {k}: gap vanishes at s = {at}")]
    DegenerateFit { k: i64, at: f64 },
    #[error("gap {gap:e} at s = {s} below the threshold for R_L")]
    NearCrossing { s: f64, gap: f64 },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// `+1` on the right, `-1` on the left.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// `aleph` on one side in the distance variable `t = |s| >= 0`.
#[derive(Debug, Clone, Copy)]
struct SidedAleph<T> {
    omega0: T,
    omega_rabi: T,
}

impl<T: Real> SidedAleph<T> {
    fn value(&self, t: T) -> T {
        (t - self.omega0).hypot(self.omega_rabi) + t
    }

    fn slope(&self, t: T) -> T {
        T::one() + (t - self.omega0) / (t - self.omega0).hypot(self.omega_rabi)
    }

    /// Positive root of `aleph(t) = c t` for `c > 2` (or `c = 2` when it exists).
    fn solve(&self, c: T) -> Result<T, RootError> {
        let f = |t: T| self.value(t) - c * t;
        let df = |t: T| self.slope(t) - c;
        let a0 = self.value(T::zero());
        let (lo, hi) = expand_bracket(f, T::zero(), a0 / c, lit(1e12))?;
        let root = bisect_newton(f, df, lo, hi, lit(1e-10))?;
        Ok(root)
    }
}

fn sided<T: Real>(model: &FloquetModel<T>, side: Side) -> Result<SidedAleph<T>, SpectralError> {
    if !model.spec().chirp.is_identity() {
        return Err(SpectralError::UnsupportedChirp);
    }
    let w0 = model.spec().omega0;
    Ok(SidedAleph { omega0: if side == Side::Left { -w0 } else { w0 }, omega_rabi: model.spec().omega_rabi })
}

fn side_sign<T: Real>(side: Side) -> T {
    lit(side.sign())
}

/// Gap value and the level realising it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap<T> {
    pub value: T,
    pub branch: Branch,
    pub mode: i64,
    /// The minimiser sits at `|mode| = m_max`; the truncation is suspect.
    pub at_edge: bool,
}

/// Distance from `lambda_{+,0}(s)` to the other levels `(branch, m)`,
/// `|m| <= m_max`.
pub fn gap<T: Real>(model: &FloquetModel<T>, s: T, m_max: i64) -> Gap<T> {
    let lam = model.eigenvalue(s, Branch::Plus, 0);
    let mut best = Gap { value: T::max_value().unwrap(), branch: Branch::Minus, mode: 0, at_edge: false };
    for m in -m_max..=m_max {
        for b in [Branch::Plus, Branch::Minus] {
            if b == Branch::Plus && m == 0 {
                continue;
            }
            let d = (lam - model.eigenvalue(s, b, m)).abs();
            if d < best.value {
                best = Gap { value: d, branch: b, mode: m, at_edge: false };
            }
        }
    }
    best.at_edge = best.mode.abs() == m_max;
    best
}

/// Gap over the full, untruncated ladder:
/// `min(|varpi|, dist(aleph, varpi Z))`.
pub fn ladder_gap<T: Real>(model: &FloquetModel<T>, s: T) -> T {
    let w = model.varpi(s);
    let a = model.aleph(s);
    if w == T::zero() {
        return T::zero();
    }
    let n = (a / w).round();
    (a - n * w).abs().min(w.abs())
}

/// Crossing times `z_k`, `k_min..=k_max`, as signed slow times on `side`.
pub fn find_crossings<T: Real>(
    model: &FloquetModel<T>,
    k_min: i64,
    k_max: i64,
    side: Side,
) -> Result<Vec<T>, SpectralError> {
    let h = sided(model, side)?;
    (k_min..=k_max)
        .map(|k| {
            if k < 2 {
                return Err(SpectralError::InvalidIndex(k));
            }
            let t = h.solve(lit(k as f64)).map_err(|e| match e {
                RootError::NoSignChange { .. } => SpectralError::NoRoot { k, side },
                other => SpectralError::Root(other),
            })?;
            Ok(side_sign::<T>(side) * t)
        })
        .collect()
}

/// Partition point `u_k` (signed slow time on `side`).
pub fn partition_u<T: Real>(model: &FloquetModel<T>, k: i64, side: Side) -> Result<T, SpectralError> {
    if k < 2 {
        return Err(SpectralError::InvalidIndex(k));
    }
    let h = sided(model, side)?;
    let t = h.solve(lit(k as f64 + 0.5)).map_err(|e| match e {
        RootError::NoSignChange { .. } => SpectralError::NoRoot { k, side },
        other => SpectralError::Root(other),
    })?;
    Ok(side_sign::<T>(side) * t)
}

/// Leading asymptotics `aleph(0) / (k + 1/2 - aleph'(0))` of `|u_k|`.
pub fn u_asymptotic<T: Real>(model: &FloquetModel<T>, k: i64, side: Side) -> Result<T, SpectralError> {
    let h = sided(model, side)?;
    let a0 = h.value(T::zero());
    let d0 = h.slope(T::zero());
    Ok(side_sign::<T>(side) * a0 / (lit::<T>(k as f64 + 0.5) - d0))
}

/// `(alpha_hat, G_hat)` from a log-log fit of the gap around a crossing.
#[derive(Debug, Clone)]
pub struct LocalPower<T> {
    pub alpha_hat: T,
    pub g_hat: T,
    /// `(|s - z|, g(s))` pairs used in the fit.
    pub samples: Vec<(T, T)>,
}

/// Samples per side of the crossing used by [`estimate_local_power`].
pub const FIT_SAMPLES_PER_SIDE: usize = 12;
/// Points closer than this to the crossing are excluded from fits.
pub const FIT_EXCLUSION: f64 = 1e-8;

/// Least-squares fit of `log g` against `log |s - z|` on geometric samples
/// in `(v_lo, z)` and `(z, v_hi)`. The prefactor is lowered until
/// `G_hat |s - z|^alpha_hat <= g(s)` holds at every sample.
pub fn estimate_local_power<T: Real>(
    gapfn: impl Fn(T) -> T,
    k: i64,
    z: T,
    v_lo: T,
    v_hi: T,
) -> Result<LocalPower<T>, SpectralError> {
    let n = FIT_SAMPLES_PER_SIDE;
    let mut samples = Vec::with_capacity(2 * n);
    for (extent, dir) in [(z - v_lo, -T::one()), (v_hi - z, T::one())] {
        let far = extent * lit(0.95);
        let near = (extent * lit(1e-4)).max(lit(10.0 * FIT_EXCLUSION));
        for i in 0..n {
            let frac = lit::<T>(i as f64 / (n - 1) as f64);
            let d = near * (far / near).powf(frac);
            let s = z + dir * d;
            let g = gapfn(s);
            if !(g > T::zero()) {
                return Err(SpectralError::DegenerateFit { k, at: to_f64(s) });
            }
            samples.push((d, g));
        }
    }
    let xs: Vec<f64> = samples.iter().map(|&(d, _)| to_f64(d).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, g)| to_f64(g).ln()).collect();
    let (slope, intercept) = ols(&xs, &ys);
    let alpha_hat: T = lit(slope);
    let mut g_hat: T = lit(intercept.exp());
    for &(d, g) in &samples {
        g_hat = g_hat.min(g / d.powf(alpha_hat));
    }
    Ok(LocalPower { alpha_hat, g_hat, samples })
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// One crossing: `u_k`, `z_k`, `u_{k-1}` as signed times, the isolating
/// window `V_k = (v_lo, v_hi)` and the fitted gap growth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord<T> {
    pub k: i64,
    pub z_k: T,
    pub u_k: T,
    pub u_km1: T,
    pub v_lo: T,
    pub v_hi: T,
    pub delta_k: T,
    pub g_k: T,
    pub alpha_hat: T,
    pub tau_k: T,
}

impl<T: Real> CrossingRecord<T> {
    pub fn v_len(&self) -> T {
        self.v_hi - self.v_lo
    }

    /// `u_k` closer to the accumulation point than `z_k`, itself closer than `u_{k-1}`.
    pub fn interlaced(&self) -> bool {
        self.u_k.abs() < self.z_k.abs() && self.z_k.abs() < self.u_km1.abs()
    }

    pub fn window_ok(&self) -> bool {
        let (a, b) = if self.u_k < self.u_km1 { (self.u_k, self.u_km1) } else { (self.u_km1, self.u_k) };
        a <= self.v_lo && self.v_hi <= b && self.v_lo < self.z_k && self.z_k < self.v_hi
    }
}

/// Outcome of the H1 grid check on one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H1Check<T> {
    pub k: i64,
    pub sup_window: T,
    pub inf_outside: T,
    pub pass: bool,
}

/// Outcome of the H2 lower-bound check on one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H2Check<T> {
    pub k: i64,
    /// `max G_k d^alpha / g - 1` over the fit samples.
    pub worst_excess: T,
    pub pass: bool,
}

pub const H1_GRID: usize = 200;
pub const H1_TOL: f64 = 1e-10;
pub const H2_TOL: f64 = 1e-9;

/// Crossings on one side of the accumulation point `a = 0`.
#[derive(Debug, Clone)]
pub struct CrossingLedger<T> {
    pub side: Side,
    pub a: T,
    pub records: Vec<CrossingRecord<T>>,
    /// Exponent used by the bounds: the largest fitted `alpha_hat`.
    pub alpha: T,
    pub h1: Vec<H1Check<T>>,
    pub h2: Vec<H2Check<T>>,
}

impl<T: Real> CrossingLedger<T> {
    pub fn h1_violations(&self) -> Vec<i64> {
        self.h1.iter().filter(|c| !c.pass).map(|c| c.k).collect()
    }

    pub fn h2_violations(&self) -> Vec<i64> {
        self.h2.iter().filter(|c| !c.pass).map(|c| c.k).collect()
    }

    /// `|u_k - a|` for every record, in ledger order.
    pub fn u_distances(&self) -> Vec<T> {
        self.records.iter().map(|r| (r.u_k - self.a).abs()).collect()
    }

    pub fn taus(&self) -> Vec<T> {
        self.records.iter().map(|r| r.tau_k).collect()
    }

    /// Replaces the global exponent and recomputes every `tau_k`.
    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        for r in &mut self.records {
            r.tau_k = crate::bounds::tau(r.delta_k, r.g_k, alpha).unwrap_or(T::max_value().unwrap());
        }
        self
    }

    /// Structural invariants: sorted by `k`, `|u_k - a|` strictly decreasing,
    /// interlacing, windows inside their partition cells and pairwise disjoint.
    pub fn structure_ok(&self) -> bool {
        let r = &self.records;
        r.windows(2).all(|w| w[0].k < w[1].k && (w[1].u_k - self.a).abs() < (w[0].u_k - self.a).abs())
            && r.iter().all(|x| x.interlaced() && x.window_ok())
            && r.windows(2).all(|w| {
                let (a, b) = (&w[0], &w[1]);
                a.v_hi <= b.v_lo || b.v_hi <= a.v_lo
            })
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "z_k", "u_k", "u_km1", "V_lo", "V_hi", "Delta_k", "G_k", "alpha_hat", "tau_k"])?;
        for r in &self.records {
            let mut row = vec![r.k.to_string()];
            for v in [r.z_k, r.u_k, r.u_km1, r.v_lo, r.v_hi, r.delta_k, r.g_k, r.alpha_hat, r.tau_k] {
                row.push(sig15(to_f64(v)));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<(), SpectralError> {
        let io = |source| SpectralError::Io { path: path.display().to_string(), source };
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| io(std::io::Error::other(e)))?;
        std::fs::File::create(path).and_then(|mut f| f.write_all(&buf)).map_err(io)
    }
}

fn grid<T: Real>(lo: T, hi: T, n: usize) -> impl Iterator<Item = T> {
    (0..n).map(move |i| lo + (hi - lo) * lit::<T>(i as f64 / (n - 1) as f64))
}

type BuiltRecord<T> = (CrossingRecord<T>, LocalPower<T>, H1Check<T>);

fn build_record<T: Real>(
    model: &FloquetModel<T>,
    h: &SidedAleph<T>,
    k: i64,
    side: Side,
) -> Result<BuiltRecord<T>, SpectralError> {
    let z = find_crossings(model, k, k, side)?[0];
    let u = partition_u(model, k, side)?;
    let um1 = partition_u(model, k - 1, side)?;
    let (tz, tu, tum1) = (z.abs(), u.abs(), um1.abs());

    // e_k: g(e) = k e - aleph(e) = u_k / 2 on (z_k, u_{k-1}), in distance units.
    let kk = lit::<T>(k as f64);
    let target = tu * lit(0.5);
    let f = |t: T| kk * t - h.value(t) - target;
    let df = |t: T| kk - h.slope(t);
    let te = if f(tum1) <= T::zero() { tum1 } else { bisect_newton(f, df, tz, tum1, lit(1e-13))? };

    let (v_lo, v_hi) = if side == Side::Right { (u, te) } else { (-te, u) };
    let delta = (tu - tz).abs().max((tum1 - tz).abs());
    let gapfn = |s: T| ladder_gap(model, s);
    let fit = estimate_local_power(gapfn, k, z, v_lo, v_hi)?;

    // H1 on 200-point grids of V_k and of the rest of [u_k, u_{k-1}].
    let (cell_lo, cell_hi) = if side == Side::Right { (u, um1) } else { (um1, u) };
    let sup_window = grid(v_lo, v_hi, H1_GRID).map(gapfn).fold(T::zero(), |a, b| a.max(b));
    let (rest_lo, rest_hi) = if side == Side::Right { (v_hi, cell_hi) } else { (cell_lo, v_lo) };
    let inf_outside = grid(rest_lo, rest_hi, H1_GRID).map(gapfn).fold(T::max_value().unwrap(), |a, b| a.min(b));
    let h1 = H1Check { k, sup_window, inf_outside, pass: sup_window <= inf_outside + lit(H1_TOL) };

    let record = CrossingRecord {
        k,
        z_k: z,
        u_k: u,
        u_km1: um1,
        v_lo,
        v_hi,
        delta_k: delta,
        g_k: fit.g_hat,
        alpha_hat: fit.alpha_hat,
        tau_k: T::zero(),
    };
    Ok((record, fit, h1))
}

/// Builds the crossing ledger for `k_min..=k_max` (`k_min >= 3`) on `side`.
/// Records are computed in parallel and assembled in `k` order.
pub fn build_ledger<T: Real>(
    model: &FloquetModel<T>,
    k_min: i64,
    k_max: i64,
    side: Side,
) -> Result<CrossingLedger<T>, SpectralError> {
    if k_min < 3 {
        return Err(SpectralError::InvalidIndex(k_min));
    }
    let h = sided(model, side)?;
    let built: Vec<_> =
        (k_min..=k_max).into_par_iter().map(|k| build_record(model, &h, k, side)).collect::<Result<_, _>>()?;
    let alpha = built.iter().map(|(r, _, _)| r.alpha_hat).fold(T::zero(), |a, b| a.max(b));
    let mut records = Vec::with_capacity(built.len());
    let mut h1 = Vec::with_capacity(built.len());
    let mut h2 = Vec::with_capacity(built.len());
    for (record, fit, check) in built {
        let mut worst = -T::one();
        for &(d, g) in &fit.samples {
            worst = worst.max(record.g_k * d.powf(record.alpha_hat) / g - T::one());
        }
        h2.push(H2Check { k: record.k, worst_excess: worst, pass: worst <= lit(H2_TOL) });
        h1.push(check);
        records.push(record);
    }
    Ok(CrossingLedger { side, a: T::zero(), records, alpha, h1, h2 }.with_alpha(alpha))
}

/// Affine map of a slow-time interval `[lo, hi]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTime<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> AffineTime<T> {
    pub fn new(lo: T, hi: T) -> Self {
        assert!(lo < hi, "empty interval");
        AffineTime { lo, hi }
    }

    pub fn to_unit(&self, s: T) -> T {
        (s - self.lo) / (self.hi - self.lo)
    }

    pub fn from_unit(&self, x: T) -> T {
        self.lo + x * (self.hi - self.lo)
    }

    /// `d(unit)/ds`; slopes and `eps` rescale by this factor.
    pub fn scale(&self) -> T {
        T::one() / (self.hi - self.lo)
    }
}

/// `L = i[P', P]` for a rank-one `P = |psi><psi|`, applied without forming
/// the matrix: `L x = i( psi' <psi,x> + c psi <psi,x> - psi <psi',x> )` with
/// `c = <psi',psi> - <psi,psi'>`.
#[derive(Debug, Clone)]
pub struct RankOneGenerator<T: Real> {
    pub psi: CVector<T>,
    pub dpsi: CVector<T>,
    c: Complex<T>,
}

impl<T: Real> RankOneGenerator<T> {
    pub fn new(psi: CVector<T>, dpsi: CVector<T>) -> Self {
        let c = inner(&dpsi, &psi) - inner(&psi, &dpsi);
        RankOneGenerator { psi, dpsi, c }
    }

    pub fn at(model: &FloquetModel<T>, s: T) -> Result<Self, ModelError> {
        let jet = model.eigenvector_jet(s, Branch::Plus, 0)?;
        Ok(Self::new(jet.psi, jet.dpsi))
    }

    pub fn apply(&self, x: &CVector<T>) -> CVector<T> {
        let a = inner(&self.psi, x);
        let b = inner(&self.dpsi, x);
        let i = Complex::new(T::zero(), T::one());
        (self.dpsi.scale(T::one()) * a + &self.psi * (self.c * a - b)) * i
    }

    pub fn matrix(&self) -> CMatrix<T> {
        let i = Complex::new(T::zero(), T::one());
        let dp = outer(&self.dpsi, &self.psi) + outer(&self.psi, &self.dpsi);
        let p = outer(&self.psi, &self.psi);
        crate::linalg::commutator(&dp, &p) * i
    }
}

/// `P`, `P'` and `L` at one slow time, in the truncated basis.
#[derive(Debug, Clone)]
pub struct ProjectorData<T: Real> {
    pub s: T,
    pub psi: CVector<T>,
    pub dpsi: CVector<T>,
    pub p: CMatrix<T>,
    pub dp: CMatrix<T>,
    pub l: CMatrix<T>,
}

/// `P = |psi_{+,0}><psi_{+,0}|`, `P' = |psi'><psi| + |psi><psi'|`, `L = i[P', P]`.
pub fn projector_and_l<T: Real>(model: &FloquetModel<T>, s: T) -> Result<ProjectorData<T>, ModelError> {
    let gen = RankOneGenerator::at(model, s)?;
    let p = outer(&gen.psi, &gen.psi);
    let dp = outer(&gen.dpsi, &gen.psi) + outer(&gen.psi, &gen.dpsi);
    let l = gen.matrix();
    Ok(ProjectorData { s, psi: gen.psi, dpsi: gen.dpsi, p, dp, l })
}

/// Gap below which [`reduced_commutator_rl`] refuses to evaluate.
pub const RL_GAP_THRESHOLD: f64 = 1e-6;

/// `R_L` together with the pieces it was built from.
#[derive(Debug, Clone)]
pub struct ReducedCommutator<T: Real> {
    pub rl: CMatrix<T>,
    pub k: CMatrix<T>,
    pub proj: ProjectorData<T>,
    pub gap: T,
}

/// Contour integral `(1/2 pi i) \oint R L R` around the followed eigenvalue,
/// evaluated by residues on the truncated spectrum:
/// `R_L = -(P L S + S L P)`, `S = sum_{j != followed} |j><j| / (mu_j - lambda)`.
/// It satisfies `[R_L, K] = [L, P]` and is block off-diagonal.
pub fn reduced_commutator_rl<T: Real>(
    model: &FloquetModel<T>,
    s: T,
    m_max: i64,
) -> Result<ReducedCommutator<T>, SpectralError> {
    let g = gap(model, s, m_max).value;
    if to_f64(g) < RL_GAP_THRESHOLD {
        return Err(SpectralError::NearCrossing { s: to_f64(s), gap: to_f64(g) });
    }
    let proj = projector_and_l(model, s)?;
    let k = model.assemble(s)?.matrix;
    let lambda = model.eigenvalue(s, Branch::Plus, 0);
    let (vals, vecs) = hermitian_eigen(&k);
    let followed = (0..vals.len())
        .max_by(|&a, &b| {
            let oa = cabs(inner(&proj.psi, &vecs.column(a).into_owned()));
            let ob = cabs(inner(&proj.psi, &vecs.column(b).into_owned()));
            oa.partial_cmp(&ob).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("nonempty spectrum");
    let n = k.nrows();
    let mut weights = CVector::<T>::zeros(n);
    for j in 0..n {
        if j != followed {
            let d = vals[j] - lambda;
            if to_f64(d.abs()) < RL_GAP_THRESHOLD {
                return Err(SpectralError::NearCrossing { s: to_f64(s), gap: to_f64(d.abs()) });
            }
            weights[j] = Complex::new(T::one() / d, T::zero());
        }
    }
    let sred = &vecs * CMatrix::from_diagonal(&weights) * vecs.adjoint();
    let pls = &proj.p * &proj.l * &sred;
    let slp = &sred * &proj.l * &proj.p;
    let rl = -(pls + slp);
    Ok(ReducedCommutator { rl, k, proj, gap: g })
}
